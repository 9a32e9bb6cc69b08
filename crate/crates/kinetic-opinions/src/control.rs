//! Feasibility analysis of the activity control strategy.
//!
//! With a fraction theta of agents following the contraction
//! A -> A - lambda_c A/2, the boundary fluxes of the inactive/active mass
//! fractions become
//!
//! ```text
//! d rho_i/dt = -C_i f(-gamma),  C_i = (1-theta) lambda_a (eps - a) + theta gamma lambda_c / 2
//! d rho_a/dt = +C_a f(+gamma),  C_a = (1-theta) lambda_a (omega + eps - a) - theta gamma lambda_c / 2
//! ```
//!
//! The strategy works (inactive shrink, active grow) exactly when both
//! coefficients are positive, which pins lambda_c inside an open interval
//! that is nonempty iff a in (eps, omega/2 + eps). Everything here is closed
//! form; the verdicts attach the defining inequality they came from.

use serde::Serialize;

use crate::model::{FadeRegime, ModelParams};

/// The effective parameter set the control formulas act on. The
/// leader-inclusive variant substitutes omega -> omega_p + omega_l,
/// a -> a_p + a_l, eps -> 2 eps throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub omega: f64,
    pub a: f64,
    pub eps: f64,
    pub gamma: f64,
    pub lambda_a: f64,
    pub lambda_c: f64,
    pub theta: f64,
}

impl ControlParams {
    pub fn agents_only(p: &ModelParams) -> Self {
        ControlParams {
            omega: p.omega_p,
            a: p.a_p,
            eps: p.eps_floor,
            gamma: p.gamma,
            lambda_a: p.lambda_a,
            lambda_c: p.lambda_c,
            theta: p.theta,
        }
    }

    /// With leaders, the activity evolution depends on the summed slopes and
    /// fades and a doubled floor.
    pub fn with_leaders(p: &ModelParams) -> Self {
        ControlParams {
            omega: p.omega_p + p.omega_l,
            a: p.a_p + p.a_l,
            eps: 2.0 * p.eps_floor,
            ..Self::agents_only(p)
        }
    }

    pub fn fade_regime(&self) -> Option<FadeRegime> {
        crate::model::classify_fade(self.a, self.omega, self.eps).ok()
    }
}

/// Boundary-flux coefficients (C_i, C_a).
pub fn flux_coefficients(cp: &ControlParams) -> (f64, f64) {
    let control = 0.5 * cp.theta * cp.gamma * cp.lambda_c;
    let c_i = (1.0 - cp.theta) * cp.lambda_a * (cp.eps - cp.a) + control;
    let c_a = (1.0 - cp.theta) * cp.lambda_a * (cp.omega + cp.eps - cp.a) - control;
    (c_i, c_a)
}

/// Open interval of control strengths making both fluxes positive:
/// `(2/gamma)((1-theta)/theta) lambda_a (a - eps) < lambda_c <
///  (2/gamma)((1-theta)/theta) lambda_a (omega + eps - a)`,
/// nonempty iff a in (eps, omega/2 + eps).
pub fn admissible_lambda_c(cp: &ControlParams) -> Option<(f64, f64)> {
    let scale = 2.0 / cp.gamma * (1.0 - cp.theta) / cp.theta * cp.lambda_a;
    let lo = scale * (cp.a - cp.eps);
    let hi = scale * (cp.omega + cp.eps - cp.a);
    (lo < hi).then_some((lo, hi))
}

/// Open interval of population fractions theta making both fluxes positive
/// when lambda_c = lambda_a:
/// `(a-eps)/(gamma/2 + a-eps) < theta < (omega+eps-a)/(gamma/2 + omega+eps-a)`.
///
/// Since x -> x/(gamma/2 + x) is increasing, the interval is nonempty
/// exactly when a - eps < omega + eps - a, i.e. a < omega/2 + eps — the
/// same window as the lambda_c interval. (This is what the positive-flux
/// equivalence demands; a published variant of the condition with a 2*eps
/// cutoff is inconsistent with the flux signs.)
pub fn admissible_theta(cp: &ControlParams) -> Option<(f64, f64)> {
    let lo_num = cp.a - cp.eps;
    let hi_num = cp.omega + cp.eps - cp.a;
    let lo = lo_num / (0.5 * cp.gamma + lo_num);
    let hi = hi_num / (0.5 * cp.gamma + hi_num);
    (lo < hi).then_some((lo, hi))
}

/// Stationary activity levels: the uncontrolled unstable point
/// `A_p* = (2 gamma / omega)(a - eps) - gamma` (present only in case II) and
/// the controlled stable point
/// `A_c* = 2 ((1-theta)/theta)(lambda_a/lambda_c)(omega + eps - a)`.
pub fn fixed_points(cp: &ControlParams) -> (Option<f64>, f64) {
    let a_p_star = match cp.fade_regime() {
        Some(FadeRegime::CaseII) => {
            Some(2.0 * cp.gamma / cp.omega * (cp.a - cp.eps) - cp.gamma)
        }
        _ => None,
    };
    let a_c_star =
        2.0 * (1.0 - cp.theta) / cp.theta * cp.lambda_a / cp.lambda_c * (cp.omega + cp.eps - cp.a);
    (a_p_star, a_c_star)
}

/// Convergence rate of the controlled characteristics above gamma:
/// theta * lambda_c / 2.
pub fn contraction_rate(cp: &ControlParams) -> f64 {
    0.5 * cp.theta * cp.lambda_c
}

/// Is the configured (theta, lambda_c) pair inside the admissible set, i.e.
/// are both fluxes positive?
pub fn is_admissible(cp: &ControlParams) -> bool {
    let (c_i, c_a) = flux_coefficients(cp);
    c_i > 0.0 && c_a > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Both fluxes positive: inactive shrink and active grow.
    Effective,
    /// Exactly one flux helps (or both vanish in the balanced case).
    PartiallyEffective,
    /// Both fluxes hurt.
    Ineffective,
    /// The fade already empties the inactive class (case I); the control can
    /// only make things worse.
    Unnecessary,
}

/// Full feasibility report for a parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlFeasibility {
    pub c_i: f64,
    pub c_a: f64,
    /// Admissible open interval for lambda_c, if any.
    pub lambda_c_interval: Option<(f64, f64)>,
    /// Admissible open interval for theta when lambda_c = lambda_a, if any.
    pub theta_interval: Option<(f64, f64)>,
    pub a_p_star: Option<f64>,
    pub a_c_star: f64,
    pub verdict: Verdict,
    /// The inequality that produced the verdict.
    pub explanation: String,
}

/// Reproduce the special-case taxonomy for the configured parameters.
pub fn special_case_verdict(cp: &ControlParams) -> ControlFeasibility {
    let (c_i, c_a) = flux_coefficients(cp);
    let (a_p_star, a_c_star) = fixed_points(cp);
    let half = 0.5 * cp.omega + cp.eps;

    let (verdict, explanation) = if cp.a < cp.eps {
        let effect = if c_a > 0.0 { "weak (C_a > 0)" } else { "strong (C_a < 0)" };
        (
            Verdict::Unnecessary,
            format!(
                "a = {} < eps = {}: the inactive class already empties on its own (C_i = {} > 0); the control effect is {}",
                cp.a, cp.eps, c_i, effect
            ),
        )
    } else if c_i > 0.0 && c_a > 0.0 {
        (
            Verdict::Effective,
            format!(
                "eps < a = {} < omega/2 + eps = {} and lambda_c inside the admissible interval: C_i = {} > 0 and C_a = {} > 0",
                cp.a, half, c_i, c_a
            ),
        )
    } else if c_i <= 0.0 && c_a <= 0.0 {
        (
            Verdict::Ineffective,
            format!("both fluxes nonpositive: C_i = {c_i}, C_a = {c_a}"),
        )
    } else {
        let detail = if cp.a > cp.omega + cp.eps {
            format!(
                "a = {} > omega + eps = {}: C_a = {} < 0 always; a strong control (C_i = {} > 0) still drains the inactive class",
                cp.a,
                cp.omega + cp.eps,
                c_a,
                c_i
            )
        } else if c_i == 0.0 && c_a == 0.0 {
            "balanced case: the fluxes cancel out".to_string()
        } else {
            format!(
                "a = {} above the balanced fade omega/2 + eps = {} (or lambda_c outside the interval): only one of C_i = {}, C_a = {} is positive",
                cp.a, half, c_i, c_a
            )
        };
        (Verdict::PartiallyEffective, detail)
    };

    ControlFeasibility {
        c_i,
        c_a,
        lambda_c_interval: admissible_lambda_c(cp),
        theta_interval: admissible_theta(cp),
        a_p_star,
        a_c_star,
        verdict,
        explanation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, RawParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cp(theta: f64, lambda_a: f64, lambda_c: f64, a: f64) -> ControlParams {
        ControlParams {
            omega: 0.8,
            a,
            eps: 0.05,
            gamma: 1.0,
            lambda_a,
            lambda_c,
            theta,
        }
    }

    #[test]
    fn flux_coefficients_pinned_values() {
        let p = cp(0.3, 0.1, 0.1, 0.07);
        let (c_i, c_a) = flux_coefficients(&p);
        assert_relative_eq!(c_i, 0.0136, epsilon = 1e-15);
        assert_relative_eq!(c_a, 0.0396, epsilon = 1e-15);
        // theta = 0 limit reproduces the uncontrolled fluxes
        let p0 = ControlParams { theta: 0.0, ..p };
        let (c_i, c_a) = flux_coefficients(&p0);
        assert_relative_eq!(c_i, 0.1 * (0.05 - 0.07), epsilon = 1e-16);
        assert_relative_eq!(c_a, 0.1 * 0.78, epsilon = 1e-16);
        // C_i + C_a = (1-theta) lambda_a omega, independent of lambda_c and gamma
        for gamma in [0.5, 1.0, 3.0] {
            for lc in [0.01, 0.2, 0.9] {
                let p = ControlParams {
                    gamma,
                    lambda_c: lc,
                    ..cp(0.3, 0.1, 0.1, 0.07)
                };
                let (c_i, c_a) = flux_coefficients(&p);
                assert_relative_eq!(c_i + c_a, 0.7 * 0.1 * 0.8, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn lambda_c_interval_pinned_values() {
        let p = cp(0.3, 0.1, 0.1, 0.07);
        let (lo, hi) = admissible_lambda_c(&p).unwrap();
        assert_relative_eq!(lo, 2.0 * (0.7 / 0.3) * 0.1 * 0.02, epsilon = 1e-15);
        assert_relative_eq!(hi, 2.0 * (0.7 / 0.3) * 0.1 * 0.78, epsilon = 1e-15);
        assert!((0.00933..0.00934).contains(&lo));
        assert!((0.3639..0.3641).contains(&hi));
        // a beyond omega/2 + eps: empty
        assert!(admissible_lambda_c(&cp(0.3, 0.1, 0.1, 0.5)).is_none());
        // balanced fade: degenerate (empty) interval, canceling lambda_c zeroes both
        let balanced = cp(0.3, 0.1, (0.7 / 0.3) * 0.1 * 0.8, 0.45);
        assert!(admissible_lambda_c(&balanced).is_none());
        let (c_i, c_a) = flux_coefficients(&balanced);
        assert_relative_eq!(c_i, 0.0, epsilon = 1e-16);
        assert_relative_eq!(c_a, 0.0, epsilon = 1e-16);
    }

    #[test]
    fn theta_interval_pinned_values() {
        let p = cp(0.3, 0.1, 0.1, 0.07);
        let (lo, hi) = admissible_theta(&p).unwrap();
        assert_relative_eq!(lo, 0.02 / 0.52, epsilon = 1e-15);
        assert_relative_eq!(hi, 0.78 / 1.28, epsilon = 1e-15);
        assert!(0.0 < lo && lo < hi && hi < 1.0);
        // a > 2 eps: empty
        assert!(admissible_theta(&cp(0.3, 0.1, 0.1, 0.12)).is_none());
    }

    #[test]
    fn fixed_points_pinned_values() {
        // default fade => A_p* = 0
        let p = cp(0.3, 0.1, 0.1, 0.45);
        let (a_p, _) = fixed_points(&p);
        assert_relative_eq!(a_p.unwrap(), 0.0, epsilon = 1e-15);
        // example values => A_c* = 3.64 > gamma
        let p = cp(0.3, 0.1, 0.1, 0.07);
        let (a_p, a_c) = fixed_points(&p);
        assert_relative_eq!(a_p.unwrap(), 2.0 / 0.8 * 0.02 - 1.0, epsilon = 1e-15);
        assert_relative_eq!(a_c, 3.64, epsilon = 1e-12);
        assert!(a_c > p.gamma);
        // case I/III: no unstable interior point
        assert!(fixed_points(&cp(0.3, 0.1, 0.1, 0.01)).0.is_none());
        assert!(fixed_points(&cp(0.3, 0.1, 0.1, 0.9)).0.is_none());
    }

    #[test]
    fn verdict_taxonomy() {
        // case I: unnecessary
        let report = special_case_verdict(&cp(0.3, 0.1, 0.1, 0.02));
        assert_eq!(report.verdict, Verdict::Unnecessary);
        // case III: C_a < 0 reported
        let report = special_case_verdict(&cp(0.3, 0.1, 0.1, 0.9));
        assert!(report.c_a < 0.0);
        assert_ne!(report.verdict, Verdict::Effective);
        // admissible case II: effective
        let report = special_case_verdict(&cp(0.3, 0.1, 0.1, 0.07));
        assert_eq!(report.verdict, Verdict::Effective);
        // balanced fluxes: partially effective with zero fluxes
        let balanced = cp(0.3, 0.1, (0.7 / 0.3) * 0.1 * 0.8, 0.45);
        let report = special_case_verdict(&balanced);
        assert_eq!(report.verdict, Verdict::PartiallyEffective);
        assert_eq!(report.c_i, 0.0);
        assert_eq!(report.c_a, 0.0);
    }

    #[test]
    fn leader_inclusive_transformation() {
        let mut raw = RawParams::default();
        raw.a_p = 0.07;
        raw.a_l = 0.06;
        let p = ModelParams::new(raw).unwrap();
        let both = ControlParams::with_leaders(&p);
        assert_relative_eq!(both.omega, p.omega_p + p.omega_l);
        assert_relative_eq!(both.a, 0.13);
        assert_relative_eq!(both.eps, 0.1);
    }

    proptest! {
        /// Inside the admissible interval both fluxes are positive; outside,
        /// at least one is nonpositive.
        #[test]
        fn interval_is_exactly_the_positive_flux_set(
            theta in 0.05f64..0.95,
            lambda_a in 0.01f64..0.99,
            a in 0.051f64..0.44,
            pick in 0.0f64..1.0,
            outside in proptest::bool::ANY,
        ) {
            let base = ControlParams { omega: 0.8, a, eps: 0.05, gamma: 1.0, lambda_a, lambda_c: 0.1, theta };
            if let Some((lo, hi)) = admissible_lambda_c(&base) {
                let lambda_c = if outside {
                    if pick < 0.5 { lo * pick.max(1e-3) } else { hi * (1.0 + pick) }
                } else {
                    lo + (hi - lo) * (0.001 + 0.998 * pick)
                };
                prop_assume!(lambda_c > 0.0);
                let cpx = ControlParams { lambda_c, ..base };
                let (c_i, c_a) = flux_coefficients(&cpx);
                if outside {
                    prop_assert!(c_i <= 0.0 || c_a <= 0.0);
                } else {
                    prop_assert!(c_i > 0.0 && c_a > 0.0);
                }
            }
        }

        /// The theta interval of the lambda_c = lambda_a reduction is exactly
        /// the positive-flux set.
        #[test]
        fn theta_interval_equivalence(
            theta in 0.01f64..0.99,
            lambda_a in 0.01f64..0.99,
            a in 0.051f64..0.3,
            gamma in 0.2f64..3.0,
        ) {
            let cpx = ControlParams { omega: 0.8, a, eps: 0.05, gamma, lambda_a, lambda_c: lambda_a, theta };
            let (c_i, c_a) = flux_coefficients(&cpx);
            let inside = match admissible_theta(&cpx) {
                Some((lo, hi)) => theta > lo && theta < hi,
                None => false,
            };
            prop_assert_eq!(inside, c_i > 0.0 && c_a > 0.0);
        }

        /// A_c* decreases in theta and in lambda_c.
        #[test]
        fn a_c_star_monotonicity(
            theta in 0.05f64..0.9,
            lambda_c in 0.01f64..0.9,
            bump in 0.01f64..0.09,
        ) {
            let base = cp(theta, 0.1, lambda_c, 0.07);
            let (_, a0) = fixed_points(&base);
            let (_, a_theta) = fixed_points(&ControlParams { theta: theta + bump, ..base });
            let (_, a_lc) = fixed_points(&ControlParams { lambda_c: lambda_c + bump, ..base });
            prop_assert!(a_theta < a0);
            prop_assert!(a_lc < a0);
        }
    }
}
