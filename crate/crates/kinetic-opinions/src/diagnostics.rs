//! Macroscopic observables, entropy/Hellinger functionals, convergence-rate
//! fitting, and cross-solver distance metrics.
//!
//! Functionals against Beta-type references integrate the reference with
//! exact per-cell masses (regularized incomplete Beta), so integrable
//! endpoint singularities of polarized equilibria do not wreck the
//! quadrature.

use serde::Serialize;
use thiserror::Error;

use crate::equilibria::BetaEquilibrium;
use crate::fp::grid::{Grid1D, Grid2D};
use crate::mc::Ensemble;
use crate::model::{activity_weight, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("grids have different layouts: {0}")]
    GridMismatch(String),
    #[error("h is positive on a cell where the reference vanishes (cell {0}): relative entropy diverges")]
    Divergence(usize),
    #[error("rate fit needs at least {min} points on the asymptotic window, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("rate fit needs strictly positive values (offending value {0})")]
    NonpositiveValue(f64),
}

/// Macroscopic observables of a state: mass fractions by activity class,
/// plain means, and the weighted moments with weight `Abar*omega_p + eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Macros {
    pub t: f64,
    pub rho_a: f64,
    pub rho_u: f64,
    pub rho_i: f64,
    pub m_w: f64,
    pub m_a: f64,
    pub rho_bar: f64,
    pub m_bar: f64,
}

/// Observables of a finite ensemble; fractions are exact counts.
pub fn macros_of_ensemble(ens: &Ensemble, params: &ModelParams) -> Macros {
    let n = ens.len() as f64;
    let (mut active, mut inactive) = (0usize, 0usize);
    let (mut m_w, mut m_a, mut rho_bar, mut m_bar) = (0.0, 0.0, 0.0, 0.0);
    for agent in &ens.agents {
        if agent.activity >= params.gamma {
            active += 1;
        } else if agent.activity <= -params.gamma {
            inactive += 1;
        }
        let weight =
            activity_weight(agent.activity, params.gamma) * params.omega_p + params.eps_floor;
        m_w += agent.opinion;
        m_a += agent.activity;
        rho_bar += weight;
        m_bar += weight * agent.opinion;
    }
    Macros {
        t: ens.time,
        rho_a: active as f64 / n,
        rho_u: (ens.len() - active - inactive) as f64 / n,
        rho_i: inactive as f64 / n,
        m_w: m_w / n,
        m_a: m_a / n,
        rho_bar: rho_bar / n,
        m_bar: m_bar / n,
    }
}

/// Observables of a 2-D density. Cell quadrature is exact because activity
/// edges align with +-gamma, making the weight affine inside every cell.
pub fn macros_of_grid2d(f: &Grid2D, params: &ModelParams, t: f64) -> Macros {
    let area = f.cell_area();
    let a_axis = f.activity_axis();
    let w_axis = f.opinion_axis();
    let mut mass = 0.0;
    let (mut active, mut inactive) = (0.0, 0.0);
    let (mut m_w, mut m_a, mut rho_bar, mut m_bar) = (0.0, 0.0, 0.0, 0.0);
    for row in 0..f.n_activity() {
        let a = a_axis.center(row);
        let weight = activity_weight(a, params.gamma) * params.omega_p + params.eps_floor;
        let mut row_mass = 0.0;
        let mut row_m_w = 0.0;
        for col in 0..f.n_opinion() {
            let v = f.value(row, col);
            row_mass += v;
            row_m_w += v * w_axis.center(col);
        }
        row_mass *= area;
        row_m_w *= area;
        mass += row_mass;
        if a > params.gamma {
            active += row_mass;
        } else if a < -params.gamma {
            inactive += row_mass;
        }
        m_w += row_m_w;
        m_a += a * row_mass;
        rho_bar += weight * row_mass;
        m_bar += weight * row_m_w;
    }
    Macros {
        t,
        rho_a: active / mass,
        rho_u: (mass - active - inactive) / mass,
        rho_i: inactive / mass,
        m_w: m_w / mass,
        m_a: m_a / mass,
        rho_bar,
        m_bar,
    }
}

/// Activity-class fractions and weighted moments of a 1-D grid (opinion
/// moments are zero when the axis carries no opinion information).
pub fn macros_of_activity_grid(g: &Grid1D, params: &ModelParams, t: f64) -> Macros {
    let step = g.step();
    let mass = g.mass();
    let (mut active, mut inactive) = (0.0, 0.0);
    let (mut m_a, mut rho_bar) = (0.0, 0.0);
    for j in 0..g.len() {
        let a = g.center(j);
        let cell = g.values()[j] * step;
        if a > params.gamma {
            active += cell;
        } else if a < -params.gamma {
            inactive += cell;
        }
        m_a += a * cell;
        rho_bar += (activity_weight(a, params.gamma) * params.omega_p + params.eps_floor) * cell;
    }
    Macros {
        t,
        rho_a: active / mass,
        rho_u: (mass - active - inactive) / mass,
        rho_i: inactive / mass,
        m_w: 0.0,
        m_a: m_a / mass,
        rho_bar,
        m_bar: 0.0,
    }
}

/// A reference density to measure against: either another grid (same
/// layout) or a closed-form Beta equilibrium integrated per cell.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Grid(&'a Grid1D),
    Beta(&'a BetaEquilibrium),
}

impl Reference<'_> {
    /// Cell-average densities of the reference on `grid`'s cells.
    pub fn cell_densities(&self, grid: &Grid1D) -> Result<Vec<f64>, DiagnosticsError> {
        match self {
            Reference::Grid(r) => {
                if !r.same_layout(grid) {
                    return Err(DiagnosticsError::GridMismatch(
                        "reference grid layout differs".into(),
                    ));
                }
                Ok(r.values().to_vec())
            }
            Reference::Beta(eq) => {
                let step = grid.step();
                Ok((0..grid.len())
                    .map(|j| eq.mass_in(grid.edge(j), grid.edge(j + 1)) / step)
                    .collect())
            }
        }
    }
}

/// Relative entropy sum h log(h/ref) dw >= 0 (both inputs normalized).
pub fn relative_entropy(h: &Grid1D, reference: Reference) -> Result<f64, DiagnosticsError> {
    let r = reference.cell_densities(h)?;
    let step = h.step();
    let mut total = 0.0;
    for (j, (&hj, &rj)) in h.values().iter().zip(&r).enumerate() {
        if hj > 0.0 {
            if rj <= 0.0 {
                return Err(DiagnosticsError::Divergence(j));
            }
            total += hj * (hj / rj).ln() * step;
        }
    }
    Ok(total.max(0.0))
}

/// Hellinger distance (sum (sqrt h - sqrt ref)^2 dw)^(1/2), in [0, sqrt 2].
pub fn hellinger(h: &Grid1D, reference: Reference) -> Result<f64, DiagnosticsError> {
    let r = reference.cell_densities(h)?;
    let step = h.step();
    let sum: f64 = h
        .values()
        .iter()
        .zip(&r)
        .map(|(&hj, &rj)| {
            let d = hj.max(0.0).sqrt() - rj.max(0.0).sqrt();
            d * d * step
        })
        .sum();
    Ok(sum.sqrt())
}

/// Discrete entropy production
/// `4 int (1-w^2) ref (d/dw sqrt(h/ref))^2 dw`
/// with centered differences on interior edges; the reference must be
/// positive on interior cells.
pub fn entropy_production(h: &Grid1D, reference: Reference) -> Result<f64, DiagnosticsError> {
    let r = reference.cell_densities(h)?;
    let step = h.step();
    let ratio_sqrt: Vec<f64> = h
        .values()
        .iter()
        .zip(&r)
        .map(|(&hj, &rj)| if rj > 0.0 { (hj / rj).max(0.0).sqrt() } else { 0.0 })
        .collect();
    let mut total = 0.0;
    for j in 0..h.len() - 1 {
        let w_edge = h.edge(j + 1);
        let ref_edge = 0.5 * (r[j] + r[j + 1]);
        let slope = (ratio_sqrt[j + 1] - ratio_sqrt[j]) / step;
        total += (1.0 - w_edge * w_edge) * ref_edge * slope * slope * step;
    }
    Ok(4.0 * total)
}

/// L1 distance between a grid density and a reference.
pub fn l1_distance(a: &Grid1D, reference: Reference) -> Result<f64, DiagnosticsError> {
    let r = reference.cell_densities(a)?;
    let step = a.step();
    Ok(a.values()
        .iter()
        .zip(&r)
        .map(|(&x, &y)| (x - y).abs() * step)
        .sum())
}

/// Model family for `fit_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// value ~ C exp(-rate t); the returned value is the decay rate
    /// (positive for a decaying series).
    Exponential,
    /// value ~ C t^exponent; the returned value is the exponent itself
    /// (negative for a decaying series).
    Power,
}

/// Least-squares fit result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// Decay rate (exponential model) or exponent (power model).
    pub value: f64,
    pub r_squared: f64,
    /// Standard error of the fitted slope.
    pub stderr: f64,
}

/// Fit log(value) against t (exponential) or log t (power) by least squares,
/// discarding the first `transient` fraction of the time horizon (default
/// 0.2 in `fit_rate`). Values must be positive; at least 10 points must
/// remain on the asymptotic window.
pub fn fit_rate_windowed(
    series: &[(f64, f64)],
    model: FitModel,
    transient: f64,
) -> Result<RateFit, DiagnosticsError> {
    if series.is_empty() {
        return Err(DiagnosticsError::TooFewPoints { min: 10, got: 0 });
    }
    let t0 = series.first().unwrap().0;
    let t1 = series.last().unwrap().0;
    let cut = t0 + transient * (t1 - t0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= cut)
        .copied()
        .collect();
    if pts.len() < 10 {
        return Err(DiagnosticsError::TooFewPoints {
            min: 10,
            got: pts.len(),
        });
    }
    let mut xs = Vec::with_capacity(pts.len());
    let mut ys = Vec::with_capacity(pts.len());
    for (t, v) in &pts {
        if *v <= 0.0 {
            return Err(DiagnosticsError::NonpositiveValue(*v));
        }
        let x = match model {
            FitModel::Exponential => *t,
            FitModel::Power => {
                if *t <= 0.0 {
                    return Err(DiagnosticsError::NonpositiveValue(*t));
                }
                t.ln()
            }
        };
        xs.push(x);
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let syy: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let pred = y_mean + slope * (x - x_mean);
            (y - pred).powi(2)
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let dof = (xs.len().max(3) - 2) as f64;
    let stderr = (ss_res / dof / sxx).sqrt();
    let value = match model {
        FitModel::Exponential => -slope,
        FitModel::Power => slope,
    };
    Ok(RateFit {
        value,
        r_squared,
        stderr,
    })
}

/// `fit_rate_windowed` with the default 20% transient discarded.
pub fn fit_rate(series: &[(f64, f64)], model: FitModel) -> Result<RateFit, DiagnosticsError> {
    fit_rate_windowed(series, model, 0.2)
}

/// Closed-form mean opinion under leader influence (G == 1):
/// `mu_l + (m_in - mu_l) exp(-lambda_l (omega_l + eps) t)`.
pub fn mean_opinion_closed_form(t: f64, m_in: f64, params: &ModelParams) -> f64 {
    params.mu_l + (m_in - params.mu_l) * (-params.leader_mean_rate() * t).exp()
}
