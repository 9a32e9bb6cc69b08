//! Conservative upwind transport of the activity marginal and the exact
//! characteristic curves of the controlled dynamics.
//!
//! Uncontrolled velocity: `V(A) = lambda_a (Abar(A) omega_p + eps - a_p)`;
//! controlled: `V(A) = (1-theta) lambda_a (Abar omega_p + eps - a_p)
//! - theta lambda_c A / 2`. Velocities are evaluated at cell centers with
//! edges aligned to +-gamma, so every cell sees a single linear branch and
//! the flux kinks are never smeared. The uncontrolled velocity is computed
//! as `lambda_a (omega_p * clamp(A/(2 gamma)) + (omega_p/2 + eps - a_p))`,
//! which makes it exactly odd in A when a_p is the zero-mean fade.

use crate::control::{self, ControlParams};
use crate::fp::grid::Grid1D;
use crate::fp::FpError;
use crate::model::{activity_weight_centered, ModelParams};

/// Drift velocity of the activity marginal at level `a`.
pub fn activity_velocity(a: f64, params: &ModelParams, controlled: bool) -> f64 {
    let ramp = params.omega_p * activity_weight_centered(a, params.gamma)
        + (0.5 * params.omega_p + params.eps_floor - params.a_p);
    let base = params.lambda_a * ramp;
    if controlled {
        (1.0 - params.theta) * base - 0.5 * params.theta * params.lambda_c * a
    } else {
        base
    }
}

/// Velocity extremes: on any domain the maximum modulus sits at a domain
/// end or at +-gamma, because the velocity is piecewise linear.
fn max_abs_velocity(g: &Grid1D, params: &ModelParams, controlled: bool) -> f64 {
    let mut m = 0.0f64;
    for a in [g.lo(), -params.gamma, params.gamma, g.hi()] {
        if a >= g.lo() && a <= g.hi() {
            m = m.max(activity_velocity(a, params, controlled).abs());
        }
    }
    m
}

/// One conservative upwind step of `dg/dt = -d/dA (V g)` with zero boundary
/// flux. Rejects CFL violations (dt max|V|/dA must stay at or below one)
/// and negative input; mass is conserved exactly up to roundoff.
pub fn transport_step_g(
    g: &Grid1D,
    params: &ModelParams,
    controlled: bool,
    dt: f64,
) -> Result<Grid1D, FpError> {
    g.check_nonnegative().map_err(FpError::NegativeInput)?;
    let n = g.len();
    let step = g.step();
    let velocities: Vec<f64> = (0..n)
        .map(|j| activity_velocity(g.center(j), params, controlled))
        .collect();
    let vmax = velocities.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cfl = dt * vmax / step;
    if cfl > 1.0 + 1e-9 {
        return Err(FpError::CflViolation { dt, cfl });
    }
    let values = g.values();
    let mut flux = vec![0.0; n + 1];
    for k in 1..n {
        let left = velocities[k - 1].max(0.0) * values[k - 1];
        let right = velocities[k].min(0.0) * values[k];
        flux[k] = left + right;
    }
    let mut out = g.clone();
    let r = dt / step;
    for j in 0..n {
        // positivity holds under the CFL bound; the clamp only removes
        // denormal-scale rounding residue
        out.values_mut()[j] = (values[j] - r * (flux[j + 1] - flux[j])).max(0.0);
    }
    Ok(out)
}

/// Exact characteristic of the controlled activity dynamics through the
/// three velocity branches. Requires an admissible control (both boundary
/// fluxes positive), which guarantees the ramp velocity is strictly
/// positive and the stable point A_c* lies above gamma; above gamma the
/// trajectory is `A_c* + (A0 - A_c*) exp(-theta lambda_c t / 2)`.
pub fn characteristics_g(a0: f64, cp: &ControlParams, t: f64) -> Result<f64, FpError> {
    if !control::is_admissible(cp) {
        return Err(FpError::ControlNotAdmissible);
    }
    let rate = control::contraction_rate(cp);
    let (_, a_c_star) = control::fixed_points(cp);
    let gamma = cp.gamma;
    let mut a = a0;
    let mut remaining = t;

    if a <= -gamma && remaining > 0.0 {
        // dA/dt = -rate * (A - a_inf), a_inf = -T3 in (-gamma, 0)
        let a_inf = -2.0 * (1.0 - cp.theta) * cp.lambda_a * (cp.a - cp.eps)
            / (cp.theta * cp.lambda_c);
        let ratio = (-gamma - a_inf) / (a - a_inf);
        let t_cross = if ratio > 0.0 && ratio < 1.0 {
            -(ratio.ln()) / rate
        } else {
            0.0
        };
        if remaining <= t_cross {
            return Ok(a_inf + (a - a_inf) * (-rate * remaining).exp());
        }
        remaining -= t_cross;
        a = -gamma;
    }

    if a < gamma && remaining > 0.0 {
        // affine ramp dA/dt = q + t2 * A, strictly positive under admissibility
        let t2 = (1.0 - cp.theta) * cp.lambda_a * cp.omega / (2.0 * gamma)
            - 0.5 * cp.theta * cp.lambda_c;
        let q = (1.0 - cp.theta) * cp.lambda_a * (0.5 * cp.omega + cp.eps - cp.a);
        if t2.abs() > 1e-300 {
            let k = q / t2;
            let ratio = (gamma + k) / (a + k);
            let t_cross = ratio.ln() / t2;
            if remaining <= t_cross {
                return Ok((a + k) * (t2 * remaining).exp() - k);
            }
            remaining -= t_cross;
        } else {
            let t_cross = (gamma - a) / q;
            if remaining <= t_cross {
                return Ok(a + q * remaining);
            }
            remaining -= t_cross;
        }
        a = gamma;
    }

    Ok(a_c_star + (a - a_c_star) * (-rate * remaining).exp())
}

/// Linear support envelope of the uncontrolled transport: starting from
/// initial support [i1, i2], the support at time t stays inside
/// `[i1 + lambda_a (eps - a_p) t, i2 + lambda_a (omega_p + eps - a_p) t]`.
pub fn support_envelope(i1: f64, i2: f64, params: &ModelParams, t: f64) -> (f64, f64) {
    (
        i1 + params.lambda_a * (params.eps_floor - params.a_p) * t,
        i2 + params.lambda_a * (params.omega_p + params.eps_floor - params.a_p) * t,
    )
}

/// One recorded sample of a transport run.
#[derive(Debug, Clone, Copy)]
pub struct TransportSample {
    pub t: f64,
    pub mass: f64,
    pub mean: f64,
    pub variance: f64,
    /// Mass fractions (inactive, undecided, active).
    pub rho_i: f64,
    pub rho_u: f64,
    pub rho_a: f64,
    /// Coordinates of the outermost cell edges whose cell value exceeds the
    /// support threshold.
    pub support: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct TransportRun {
    pub samples: Vec<TransportSample>,
    pub snapshots: Vec<(f64, Grid1D)>,
    pub g: Grid1D,
    /// max |mass(t) - mass(0)| / mass(0).
    pub mass_drift: f64,
}

#[derive(Debug, Clone)]
pub struct TransportConfig {
    pub controlled: bool,
    pub t_final: f64,
    /// Courant number; the leading constant-velocity front is advected
    /// exactly at 1.0.
    pub cfl: f64,
    /// Record a sample every this many steps (>= 1).
    pub record_every: usize,
    /// Keep a density snapshot every this many steps (0: endpoints only).
    pub snapshot_every: usize,
    /// Cells with values above this count as support.
    pub support_threshold: f64,
}

fn sample(g: &Grid1D, params: &ModelParams, t: f64, threshold: f64) -> TransportSample {
    let m = crate::diagnostics::macros_of_activity_grid(g, params, t);
    let support = match g.support_cells(threshold) {
        Some((first, last)) => (g.edge(first), g.edge(last + 1)),
        None => (f64::NAN, f64::NAN),
    };
    TransportSample {
        t,
        mass: g.mass(),
        mean: m.m_a,
        variance: g.variance(),
        rho_i: m.rho_i,
        rho_u: m.rho_u,
        rho_a: m.rho_a,
        support,
    }
}

/// Drive the upwind step to `t_final`. If mass approaches an activity
/// boundary the domain regrows (zero padding) instead of losing mass; the
/// time step is then re-derived from the new velocity bound.
pub fn run_transport(
    g0: &Grid1D,
    params: &ModelParams,
    cfg: &TransportConfig,
) -> Result<TransportRun, FpError> {
    let mut g = g0.clone();
    let mass0 = g.mass();
    let mut samples = vec![sample(&g, params, 0.0, cfg.support_threshold)];
    let mut snapshots = vec![(0.0, g.clone())];
    let mut mass_drift = 0.0f64;

    let mut t = 0.0;
    let mut dt = cfg.cfl * g.step() / max_abs_velocity(&g, params, cfg.controlled).max(1e-300);
    let mut k = 0usize;
    while t < cfg.t_final - 1e-12 {
        // regrow when the outermost cells carry mass
        let n = g.len();
        let edge_mass = cfg.support_threshold.max(1e-300);
        if g.values()[..2.min(n)].iter().any(|&v| v > edge_mass) {
            g.extend_left(n / 4 + 4);
        }
        if g.values()[n.saturating_sub(2)..].iter().any(|&v| v > edge_mass) {
            g.extend_right(n / 4 + 4);
            dt = cfg.cfl * g.step() / max_abs_velocity(&g, params, cfg.controlled).max(1e-300);
        }
        let step_dt = dt.min(cfg.t_final - t);
        g = transport_step_g(&g, params, cfg.controlled, step_dt)?;
        t += step_dt;
        k += 1;
        mass_drift = mass_drift.max((g.mass() - mass0).abs() / mass0);
        let done = t >= cfg.t_final - 1e-12;
        if k % cfg.record_every.max(1) == 0 || done {
            samples.push(sample(&g, params, t, cfg.support_threshold));
        }
        if (cfg.snapshot_every != 0 && k % cfg.snapshot_every == 0) || done {
            snapshots.push((t, g.clone()));
        }
    }

    Ok(TransportRun {
        samples,
        snapshots,
        g,
        mass_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlParams;
    use crate::model::{ModelParams, RawParams};
    use approx::assert_relative_eq;

    fn params_with_fade(a_p: f64, controlled_pair: Option<(f64, f64)>) -> ModelParams {
        let mut raw = RawParams::default();
        raw.lambda_a = 0.5;
        raw.a_p = a_p;
        if let Some((theta, lambda_c)) = controlled_pair {
            raw.theta = theta;
            raw.lambda_c = lambda_c;
        }
        ModelParams::new(raw).unwrap()
    }

    #[test]
    fn velocity_branches() {
        let p = params_with_fade(0.07, None);
        // above gamma: lambda_a (omega + eps - a)
        assert_relative_eq!(
            activity_velocity(2.0, &p, false),
            0.5 * (0.8 + 0.05 - 0.07),
            epsilon = 1e-15
        );
        // below -gamma: lambda_a (eps - a)
        assert_relative_eq!(
            activity_velocity(-2.0, &p, false),
            0.5 * (0.05 - 0.07),
            epsilon = 1e-15
        );
    }

    #[test]
    fn velocity_is_exactly_odd_for_default_fade() {
        let raw = RawParams::default();
        let p = ModelParams::new(raw).unwrap(); // a_p = default_fade
        for k in 0..200 {
            let a = -3.0 + 0.03 * k as f64;
            assert_eq!(
                activity_velocity(a, &p, false),
                -activity_velocity(-a, &p, false)
            );
            assert_eq!(
                activity_velocity(a, &p, true),
                -activity_velocity(-a, &p, true)
            );
        }
    }

    #[test]
    fn dirac_cell_with_zero_velocity_is_unchanged() {
        let p = params_with_fade(0.07, None);
        // A_p* = 2 gamma/omega (a-eps) - gamma = -0.95; place the spike in
        // the cell whose center velocity vanishes
        let mut g = Grid1D::activity(1.0, -2.0, 2.0, 10).unwrap();
        let j = (0..g.len())
            .min_by(|&a, &b| {
                activity_velocity(g.center(a), &p, false)
                    .abs()
                    .partial_cmp(&activity_velocity(g.center(b), &p, false).abs())
                    .unwrap()
            })
            .unwrap();
        // the exact stationary cell only exists if A_p* is a center; force
        // velocity zero by picking a_p so that the nearest center is A_p*
        let a_star = g.center(j);
        let a_p = (a_star / (2.0 * p.gamma) + 0.5) * p.omega_p + p.eps_floor;
        let p2 = params_with_fade(a_p, None);
        assert_relative_eq!(activity_velocity(a_star, &p2, false), 0.0, epsilon = 1e-16);
        g.values_mut()[j] = 1.0 / g.step();
        let stepped = transport_step_g(&g, &p2, false, 0.05).unwrap();
        assert_eq!(stepped.values(), g.values());
    }

    #[test]
    fn mass_conservation_and_cfl_guard() {
        let p = params_with_fade(0.02, None);
        let mut g = Grid1D::activity(1.0, -3.0, 6.0, 20).unwrap();
        g.fill_uniform(-0.5, 0.5).unwrap();
        let dt_ok = 0.9 * g.step() / 0.5;
        let mut h = g.clone();
        for _ in 0..50 {
            h = transport_step_g(&h, &p, false, dt_ok).unwrap();
            h.check_nonnegative().unwrap();
        }
        assert!((h.mass() - 1.0).abs() < 1e-13);
        assert!(matches!(
            transport_step_g(&g, &p, false, 10.0),
            Err(FpError::CflViolation { .. })
        ));
    }

    #[test]
    fn characteristics_pinned_case1() {
        // theta lambda_c/2 = 0.015, A_c* = 3.64: A(t) = 3.64 - 2.64 e^(-0.015 t)
        let cp = ControlParams {
            omega: 0.8,
            a: 0.07,
            eps: 0.05,
            gamma: 1.0,
            lambda_a: 0.1,
            lambda_c: 0.1,
            theta: 0.3,
        };
        for t in [0.0, 1.0, 10.0, 100.0] {
            let expected = 3.64 - 2.64 * (-0.015f64 * t).exp();
            assert_relative_eq!(
                characteristics_g(1.0, &cp, t).unwrap(),
                expected,
                epsilon = 1e-12
            );
        }
        // the stable point is a fixed point
        assert_relative_eq!(characteristics_g(3.64, &cp, 57.0).unwrap(), 3.64);
        // exponential convergence from anywhere
        for a0 in [-5.0, -1.0, 0.0, 0.5, 2.0, 10.0] {
            let rate = 0.015;
            let late = characteristics_g(a0, &cp, 400.0).unwrap();
            assert!((late - 3.64).abs() <= 8.0 * (-rate * 300.0f64).exp());
        }
    }

    #[test]
    fn characteristics_are_continuous_across_branches() {
        let cp = ControlParams {
            omega: 0.8,
            a: 0.07,
            eps: 0.05,
            gamma: 1.0,
            lambda_a: 0.1,
            lambda_c: 0.1,
            theta: 0.3,
        };
        for a0 in [-3.0, -1.0, -0.2, 0.9] {
            let mut prev = characteristics_g(a0, &cp, 0.0).unwrap();
            assert_relative_eq!(prev, a0, epsilon = 1e-14);
            for k in 1..=600 {
                let t = k as f64 * 0.5;
                let a = characteristics_g(a0, &cp, t).unwrap();
                assert!(a >= prev - 1e-10, "monotone approach from below");
                prev = a;
            }
        }
        // inadmissible parameters are rejected
        let bad = ControlParams {
            a: 0.5,
            ..cp
        };
        assert!(characteristics_g(0.0, &bad, 1.0).is_err());
    }

    #[test]
    fn controlled_transport_concentrates_at_a_c_star() {
        let mut raw = RawParams::default();
        raw.lambda_a = 0.1;
        raw.lambda_c = 0.1;
        raw.theta = 0.3;
        raw.a_p = 0.07;
        let p = ModelParams::new(raw).unwrap();
        let cp = ControlParams::agents_only(&p);
        let (_, a_c_star) = crate::control::fixed_points(&cp);
        let mut g = Grid1D::activity(p.gamma, -3.0, a_c_star * 1.4, 40).unwrap();
        g.fill_uniform(-2.5, 2.5).unwrap();
        let cfg = TransportConfig {
            controlled: true,
            t_final: 700.0,
            cfl: 0.95,
            record_every: 50,
            snapshot_every: 0,
            support_threshold: 1e-14,
        };
        let run = run_transport(&g, &p, &cfg).unwrap();
        assert!(run.mass_drift < 1e-12);
        assert!(run.g.mass_in(a_c_star - 0.1, a_c_star + 0.1) > 0.99);
        // supports stay inside a fixed interval for all recorded times
        for s in &run.samples {
            assert!(s.support.0 >= g.lo() - 1e-12 && s.support.1 <= g.hi() + 1e-12);
        }
    }

    #[test]
    fn uncontrolled_regrowth_keeps_mass() {
        let p = params_with_fade(0.02, None); // case I, everything drifts right
        let mut g = Grid1D::activity(1.0, -1.0, 2.0, 10).unwrap();
        g.fill_uniform(-0.5, 0.5).unwrap();
        let cfg = TransportConfig {
            controlled: false,
            t_final: 20.0,
            cfl: 1.0 - 1e-12,
            record_every: 10,
            snapshot_every: 0,
            support_threshold: 1e-12,
        };
        let run = run_transport(&g, &p, &cfg).unwrap();
        assert!(run.mass_drift < 1e-12, "mass drift {}", run.mass_drift);
        // the support moved far beyond the initial domain
        assert!(run.g.hi() > 2.0);
    }
}
