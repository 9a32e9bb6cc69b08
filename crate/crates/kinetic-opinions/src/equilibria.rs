//! Closed-form Beta-type equilibria of the opinion dynamics, their
//! normalization, the polarization/consensus regime classification, and the
//! L^q regularity indices.
//!
//! All equilibria have the shape `C (1-w)^(-1+b1) (1+w)^(-1+b2)` on [-1,1].
//! An exponent parameter below one makes the density diverge at the matching
//! endpoint (opinion polarization); both parameters at or above one give an
//! interior maximum (consensus formation). Exponents are computed and
//! reported even when nonpositive, because the regime classification needs
//! their signs, but constructing a normalized density requires positivity.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::model::ModelParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriaError {
    #[error("Beta exponent parameters (b1, b2) = ({b1}, {b2}) are not both positive; the density is not normalizable")]
    NonNormalizable { b1: f64, b2: f64 },
    #[error("weighted moments |m_bar| = {m_bar} >= rho_bar = {rho_bar}: degenerate Dirac case")]
    DegenerateMoments { rho_bar: f64, m_bar: f64 },
    #[error("leaders' mean opinion mu_l = {0} is a Dirac limit; need |mu_l| < 1")]
    DiracLeaderMean(f64),
    #[error("threshold A_* = {a_star} fell outside (-gamma, gamma) = (-{gamma}, {gamma})")]
    ThresholdOutOfBand { a_star: f64, gamma: f64 },
}

/// Normalization constant C with 1/C = int_{-1}^{1} (1-w)^(b1-1) (1+w)^(b2-1) dw,
/// evaluated in the log domain through the Euler identity
/// `int = 2^(b1+b2-1) Gamma(b1) Gamma(b2) / Gamma(b1+b2)`.
pub fn beta_normalization(b1: f64, b2: f64) -> Result<f64, EquilibriaError> {
    if !(b1 > 0.0 && b2 > 0.0) {
        return Err(EquilibriaError::NonNormalizable { b1, b2 });
    }
    Ok(ln_beta_integral(b1, b2).map(|ln| (-ln).exp()).unwrap())
}

fn ln_beta_integral(b1: f64, b2: f64) -> Option<f64> {
    if !(b1 > 0.0 && b2 > 0.0) {
        return None;
    }
    Some((b1 + b2 - 1.0) * std::f64::consts::LN_2 + ln_gamma(b1) + ln_gamma(b2) - ln_gamma(b1 + b2))
}

/// A normalized Beta-type equilibrium density on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct BetaEquilibrium {
    pub b1: f64,
    pub b2: f64,
    /// ln of the normalization constant C.
    ln_norm: f64,
}

impl BetaEquilibrium {
    pub fn new(b1: f64, b2: f64) -> Result<Self, EquilibriaError> {
        let ln_int =
            ln_beta_integral(b1, b2).ok_or(EquilibriaError::NonNormalizable { b1, b2 })?;
        Ok(BetaEquilibrium {
            b1,
            b2,
            ln_norm: -ln_int,
        })
    }

    pub fn normalization(&self) -> f64 {
        self.ln_norm.exp()
    }

    /// Pointwise density; +inf at an endpoint whose exponent is below one.
    pub fn density(&self, w: f64) -> f64 {
        if w <= -1.0 {
            return endpoint_density(self.b2);
        }
        if w >= 1.0 {
            return endpoint_density(self.b1);
        }
        (self.ln_norm + (self.b1 - 1.0) * (1.0 - w).ln() + (self.b2 - 1.0) * (1.0 + w).ln()).exp()
    }

    /// Exact mass of the interval [wl, wr] through the regularized
    /// incomplete Beta function; this is what keeps quadrature against
    /// integrable endpoint singularities honest.
    pub fn mass_in(&self, wl: f64, wr: f64) -> f64 {
        let cdf = |w: f64| {
            let u = (0.5 * (1.0 + w)).clamp(0.0, 1.0);
            // u = (1+w)/2 follows a standard Beta(b2, b1) law
            beta_reg(self.b2, self.b1, u)
        };
        (cdf(wr) - cdf(wl)).max(0.0)
    }

    /// Closed-form mean (b2 - b1) / (b1 + b2).
    pub fn mean(&self) -> f64 {
        (self.b2 - self.b1) / (self.b1 + self.b2)
    }

    /// Cell masses on the given edges (len(edges) - 1 values).
    pub fn cell_masses(&self, edges: &[f64]) -> Vec<f64> {
        edges
            .windows(2)
            .map(|e| self.mass_in(e[0], e[1]))
            .collect()
    }
}

fn endpoint_density(exponent_param: f64) -> f64 {
    if exponent_param < 1.0 {
        f64::INFINITY
    } else if exponent_param > 1.0 {
        0.0
    } else {
        f64::NAN // finite positive limit exists but depends on the other exponent
    }
}

/// Which interactions feed a partial equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumSource {
    Agents,
    Leaders,
    Both,
}

/// Raw exponent parameters (b1, b2) of the partial equilibrium at activity
/// weight `weight = Abar(A)`, for the given weighted moments. Possibly
/// nonpositive; construct a `BetaEquilibrium` only when both are positive.
///
/// Agents:  b_{1,2} = (Abar w_p + eps)(rho_bar -+ m_bar)/nu_p
/// Leaders: b_{1,2} = (Abar w_l + eps)(1 -+ mu_l)/nu_l
/// Both:    b_{1,2} = [l_p (Abar w_p+eps)(rho_bar -+ m_bar)
///                     + l_l (Abar w_l+eps)(1 -+ mu_l)] / (s_p^2 + s_l^2)
pub fn partial_equilibrium(
    weight: f64,
    rho_bar: f64,
    m_bar: f64,
    params: &ModelParams,
    source: EquilibriumSource,
) -> Result<(f64, f64), EquilibriaError> {
    let needs_agents = matches!(source, EquilibriumSource::Agents | EquilibriumSource::Both);
    let needs_leaders = matches!(source, EquilibriumSource::Leaders | EquilibriumSource::Both);
    if needs_agents && m_bar.abs() >= rho_bar {
        return Err(EquilibriaError::DegenerateMoments { rho_bar, m_bar });
    }
    if needs_leaders && params.mu_l.abs() >= 1.0 {
        return Err(EquilibriaError::DiracLeaderMean(params.mu_l));
    }
    let prob_p = weight * params.omega_p + params.eps_floor;
    let prob_l = weight * params.omega_l + params.eps_floor;
    let pair = match source {
        EquilibriumSource::Agents => (
            prob_p * (rho_bar - m_bar) / params.nu_p(),
            prob_p * (rho_bar + m_bar) / params.nu_p(),
        ),
        EquilibriumSource::Leaders => (
            prob_l * (1.0 - params.mu_l) / params.nu_l(),
            prob_l * (1.0 + params.mu_l) / params.nu_l(),
        ),
        EquilibriumSource::Both => {
            let denom = params.sigma2_p + params.sigma2_l;
            (
                (params.lambda_p * prob_p * (rho_bar - m_bar)
                    + params.lambda_l * prob_l * (1.0 - params.mu_l))
                    / denom,
                (params.lambda_p * prob_p * (rho_bar + m_bar)
                    + params.lambda_l * prob_l * (1.0 + params.mu_l))
                    / denom,
            )
        }
    };
    Ok(pair)
}

/// Regime verdict for one part of the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// At least one density exponent is negative: the equilibrium diverges
    /// at an extreme opinion.
    Polarization,
    /// Both exponents nonnegative: interior maximum.
    Consensus,
}

fn regime_of(exponents: (f64, f64)) -> Regime {
    if exponents.0.min(exponents.1) < 1.0 {
        Regime::Polarization
    } else {
        Regime::Consensus
    }
}

/// Classification of the partial equilibria across the activity range.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RegimeReport {
    pub regime_inactive: Regime,
    pub regime_active: Regime,
    /// Exponent parameters (b1, b2) at Abar = 0 and Abar = 1.
    pub exponents_inactive: (f64, f64),
    pub exponents_active: (f64, f64),
    /// Activity threshold separating polarization from consensus; present
    /// exactly in the mixed regime.
    pub a_star: Option<f64>,
}

/// Classify the agent-channel partial equilibria at Abar = 0 (inactive) and
/// Abar = 1 (active). In the mixed regime the unique threshold
/// `A_* = (1/omega_p) * min((rho -+ m)/nu_p)^(-1) - eps/omega_p`
/// is attached and checked to lie inside (-gamma, gamma).
///
/// Consensus among the inactive together with polarization among the active
/// cannot occur: the exponents are strictly increasing in the activity
/// weight.
pub fn classify_regime(
    rho_bar: f64,
    m_bar: f64,
    params: &ModelParams,
) -> Result<RegimeReport, EquilibriaError> {
    let exponents_inactive =
        partial_equilibrium(0.0, rho_bar, m_bar, params, EquilibriumSource::Agents)?;
    let exponents_active =
        partial_equilibrium(1.0, rho_bar, m_bar, params, EquilibriumSource::Agents)?;
    let regime_inactive = regime_of(exponents_inactive);
    let regime_active = regime_of(exponents_active);

    let mixed = regime_inactive == Regime::Polarization && regime_active == Regime::Consensus;
    let a_star = if mixed {
        let min_side = ((rho_bar - m_bar) / params.nu_p()).min((rho_bar + m_bar) / params.nu_p());
        let a_star = (1.0 / min_side - params.eps_floor) / params.omega_p;
        if !(-params.gamma < a_star && a_star < params.gamma) {
            return Err(EquilibriaError::ThresholdOutOfBand {
                a_star,
                gamma: params.gamma,
            });
        }
        Some(a_star)
    } else {
        None
    };

    Ok(RegimeReport {
        regime_inactive,
        regime_active,
        exponents_inactive,
        exponents_active,
        a_star,
    })
}

/// Which reduced opinion equation a global equilibrium belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquilibriumChannel {
    /// Agents only, all active; the preserved initial mean enters the
    /// exponents: b_{1,2} = ((omega_p+eps)^2/nu_p)(1 -+ m_in).
    AgentsOnly { m_in: f64 },
    /// Leaders only, all active: b_{1,2} = ((omega_l+eps)/nu_l)(1 -+ mu_l).
    LeadersOnly,
    /// Both channels: b_{1,2} = (l_p(w_p+e)^2 + l_l(w_l+e))/(s_p^2+s_l^2) (1 -+ mu_l).
    Both,
}

/// Raw exponents of the global equilibrium for the requested channel.
pub fn global_equilibrium_exponents(
    params: &ModelParams,
    channel: EquilibriumChannel,
) -> Result<(f64, f64), EquilibriaError> {
    match channel {
        EquilibriumChannel::AgentsOnly { m_in } => {
            let coeff = (params.omega_p + params.eps_floor).powi(2) / params.nu_p();
            Ok((coeff * (1.0 - m_in), coeff * (1.0 + m_in)))
        }
        EquilibriumChannel::LeadersOnly => {
            if params.mu_l.abs() >= 1.0 {
                return Err(EquilibriaError::DiracLeaderMean(params.mu_l));
            }
            let coeff = (params.omega_l + params.eps_floor) / params.nu_l();
            Ok((coeff * (1.0 - params.mu_l), coeff * (1.0 + params.mu_l)))
        }
        EquilibriumChannel::Both => {
            if params.mu_l.abs() >= 1.0 {
                return Err(EquilibriaError::DiracLeaderMean(params.mu_l));
            }
            let coeff = (params.agent_mean_rate() + params.leader_mean_rate())
                / (params.sigma2_p + params.sigma2_l);
            Ok((coeff * (1.0 - params.mu_l), coeff * (1.0 + params.mu_l)))
        }
    }
}

/// Normalized global equilibrium of the reduced opinion equation.
pub fn global_equilibrium_h(
    params: &ModelParams,
    channel: EquilibriumChannel,
) -> Result<BetaEquilibrium, EquilibriaError> {
    let (b1, b2) = global_equilibrium_exponents(params, channel)?;
    BetaEquilibrium::new(b1, b2)
}

/// Local (time-dependent) equilibrium of the two-channel reduced equation at
/// the current population mean: the agent term uses m_w, the leader term
/// mu_l. Note b1(t) + b2(t) is constant in time: the mean-dependent parts
/// cancel in the sum.
pub fn local_equilibrium_h(
    m_w: f64,
    params: &ModelParams,
) -> Result<BetaEquilibrium, EquilibriaError> {
    let (b1, b2) = local_equilibrium_exponents(m_w, params);
    BetaEquilibrium::new(b1, b2)
}

pub fn local_equilibrium_exponents(m_w: f64, params: &ModelParams) -> (f64, f64) {
    let denom = params.sigma2_p + params.sigma2_l;
    let cp = params.agent_mean_rate() / denom;
    let cl = params.leader_mean_rate() / denom;
    (
        cp * (1.0 - m_w) + cl * (1.0 - params.mu_l),
        cp * (1.0 + m_w) + cl * (1.0 + params.mu_l),
    )
}

/// L^q regularity indices of the global and local equilibria and the norm
/// growth rates tau_q.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RegularityReport {
    /// Supremum of admissible q for the global equilibrium; `None` means it
    /// belongs to every L^q (consensus case).
    pub q_star: Option<f64>,
    /// Same for the local equilibrium uniformly in time, built with
    /// sup |m_w| = max(|m_in|, |mu_l|).
    pub q_bar: Option<f64>,
    /// tau_2 and the least-restrictive feasibility check at q = 2.
    pub tau_2: f64,
    pub feasible_q2: bool,
    /// Coefficient (l_p(w_p+e)^2 + l_l(w_l+e) - s_p^2 - s_l^2) entering every tau_q.
    pub tau_scale: f64,
    /// Relaxation rate of the mean, the bound all tau_q must stay below.
    pub tau: f64,
}

impl RegularityReport {
    /// Norm growth rate tau_q = ((q-1)/q) * tau_scale.
    pub fn tau_q(&self, q: f64) -> f64 {
        (q - 1.0) / q * self.tau_scale
    }

    /// The convergence condition 0 <= tau_q < tau.
    pub fn feasible(&self, q: f64) -> bool {
        let t = self.tau_q(q);
        (0.0..self.tau).contains(&t)
    }
}

/// Compute q*, q_bar, tau_q and the q = 2 feasibility of the convergence
/// condition.
pub fn regularity_indices(params: &ModelParams, m_in: f64) -> RegularityReport {
    let denom = params.sigma2_p + params.sigma2_l;
    let coeff = (params.agent_mean_rate() + params.leader_mean_rate()) / denom;
    let arg_star = 1.0 - coeff * (1.0 - params.mu_l.abs());
    let q_star = if arg_star > 0.0 {
        Some(1.0 / arg_star)
    } else {
        None
    };

    let sup_m = m_in.abs().max(params.mu_l.abs());
    let arg_bar = 1.0
        - params.agent_mean_rate() / denom * (1.0 - sup_m)
        - params.leader_mean_rate() / denom * (1.0 - params.mu_l.abs());
    let q_bar = if arg_bar > 0.0 {
        Some(1.0 / arg_bar)
    } else {
        None
    };

    let tau_scale = params.agent_mean_rate() + params.leader_mean_rate() - denom;
    let tau = params.leader_mean_rate();
    let report = RegularityReport {
        q_star,
        q_bar,
        tau_2: 0.5 * tau_scale,
        feasible_q2: false,
        tau_scale,
        tau,
    };
    RegularityReport {
        feasible_q2: report.feasible(2.0),
        ..report
    }
}
