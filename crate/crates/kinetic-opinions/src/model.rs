//! Model parameters, the activity-weight function, interaction kernels, and
//! the fade-constant trichotomy shared by every solver.
//!
//! The population carries two microscopic traits: an opinion w in [-1,1] and
//! an activity level A in R. The activity weight
//!
//! ```text
//!         | 1                A >= gamma
//! Abar =  | 1/2 + A/(2 gamma)   -gamma < A < gamma
//!         | 0                A <= -gamma
//! ```
//!
//! modulates the probability `Abar*omega + eps` that an interaction actually
//! moves an opinion. Depending on where the fade constant `a` sits relative
//! to `(0, eps)`, `(eps, omega+eps)`, `(omega+eps, inf)`, the mean activity
//! increment has a different sign pattern (cases I-III).

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter `{name}` = {value} violates {constraint}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("fade constant a = {a} sits on a regime boundary (eps = {eps}, omega + eps = {omega_plus_eps})")]
    FadeOnBoundary {
        a: f64,
        eps: f64,
        omega_plus_eps: f64,
    },
}

fn check_open_unit(name: &'static str, value: f64) -> Result<(), ParamError> {
    if !(value > 0.0 && value < 1.0) {
        return Err(ParamError::OutOfRange {
            name,
            value,
            constraint: "the open interval (0, 1)",
        });
    }
    Ok(())
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ParamError> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(ParamError::OutOfRange {
            name,
            value,
            constraint: "(0, +inf)",
        });
    }
    Ok(())
}

/// All rate/noise/threshold constants of the kinetic model plus the control
/// parameters. Immutable after construction; every field has been validated.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Compromise rate for agent-agent interactions, in (0,1).
    pub lambda_p: f64,
    /// Compromise rate for agent-leader interactions, in (0,1).
    pub lambda_l: f64,
    /// Activity update rate, in (0,1).
    pub lambda_a: f64,
    /// Control strength of the contraction A -> A - lambda_c A/2, in (0,1).
    pub lambda_c: f64,
    /// Agent-agent noise variance, > 0.
    pub sigma2_p: f64,
    /// Agent-leader noise variance, > 0.
    pub sigma2_l: f64,
    /// Interaction-probability slope for the agent channel, > 0.
    pub omega_p: f64,
    /// Interaction-probability slope for the leader channel, > 0.
    pub omega_l: f64,
    /// Interaction-probability floor: even inactive agents interact with
    /// probability eps_floor.
    pub eps_floor: f64,
    /// Activity threshold separating inactive (< -gamma), undecided and
    /// active (> gamma) agents.
    pub gamma: f64,
    /// Activity fade constant for the agent channel.
    pub a_p: f64,
    /// Activity fade constant for the leader channel.
    pub a_l: f64,
    /// Fraction of the population following the controlled activity update.
    pub theta: f64,
    /// Quasi-invariant scaling parameter in (0,1]: interaction magnitudes are
    /// multiplied by this while the event frequency scales like its inverse.
    pub qi_scale: f64,
    /// Leaders' mean opinion in (-1,1) (the closed Dirac limits +-1 are
    /// rejected where a Beta equilibrium is required).
    pub mu_l: f64,
}

impl ModelParams {
    /// Validate every invariant and build the parameter set.
    pub fn new(raw: RawParams) -> Result<Self, ParamError> {
        let p = ModelParams {
            lambda_p: raw.lambda_p,
            lambda_l: raw.lambda_l,
            lambda_a: raw.lambda_a,
            lambda_c: raw.lambda_c,
            sigma2_p: raw.sigma2_p,
            sigma2_l: raw.sigma2_l,
            omega_p: raw.omega_p,
            omega_l: raw.omega_l,
            eps_floor: raw.eps_floor,
            gamma: raw.gamma,
            a_p: raw.a_p,
            a_l: raw.a_l,
            theta: raw.theta,
            qi_scale: raw.qi_scale,
            mu_l: raw.mu_l,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), ParamError> {
        check_open_unit("lambda_p", self.lambda_p)?;
        check_open_unit("lambda_l", self.lambda_l)?;
        check_open_unit("lambda_a", self.lambda_a)?;
        check_open_unit("lambda_c", self.lambda_c)?;
        check_open_unit("theta", self.theta)?;
        check_positive("sigma2_p", self.sigma2_p)?;
        check_positive("sigma2_l", self.sigma2_l)?;
        check_positive("omega_p", self.omega_p)?;
        check_positive("omega_l", self.omega_l)?;
        check_positive("eps_floor", self.eps_floor)?;
        check_positive("gamma", self.gamma)?;
        check_positive("a_p", self.a_p)?;
        check_positive("a_l", self.a_l)?;
        if !(self.qi_scale > 0.0 && self.qi_scale <= 1.0) {
            return Err(ParamError::OutOfRange {
                name: "qi_scale",
                value: self.qi_scale,
                constraint: "the half-open interval (0, 1]",
            });
        }
        if !(self.mu_l >= -1.0 && self.mu_l <= 1.0) {
            return Err(ParamError::OutOfRange {
                name: "mu_l",
                value: self.mu_l,
                constraint: "[-1, 1]",
            });
        }
        if self.omega_p + self.eps_floor >= 1.0 {
            return Err(ParamError::OutOfRange {
                name: "omega_p",
                value: self.omega_p,
                constraint: "omega_p + eps_floor < 1",
            });
        }
        if self.omega_l + self.eps_floor >= 1.0 {
            return Err(ParamError::OutOfRange {
                name: "omega_l",
                value: self.omega_l,
                constraint: "omega_l + eps_floor < 1",
            });
        }
        if self.eps_floor >= self.omega_p {
            return Err(ParamError::OutOfRange {
                name: "eps_floor",
                value: self.eps_floor,
                constraint: "eps_floor < omega_p",
            });
        }
        if self.eps_floor >= self.omega_l {
            return Err(ParamError::OutOfRange {
                name: "eps_floor",
                value: self.eps_floor,
                constraint: "eps_floor < omega_l",
            });
        }
        // Derived compromise/diffusion ratios must be finite and positive.
        check_positive("nu_p = sigma2_p/lambda_p", self.nu_p())?;
        check_positive("nu_l = sigma2_l/lambda_l", self.nu_l())?;
        Ok(())
    }

    /// Ratio sigma_p^2 / lambda_p; small values mean compromise-dominated
    /// opinion dynamics.
    pub fn nu_p(&self) -> f64 {
        self.sigma2_p / self.lambda_p
    }

    /// Ratio sigma_l^2 / lambda_l.
    pub fn nu_l(&self) -> f64 {
        self.sigma2_l / self.lambda_l
    }

    /// Apply the quasi-invariant rescaling: all interaction magnitudes
    /// (compromise rates, the activity/control rates, noise variances) are
    /// multiplied by `scale`, while probabilities and fade constants are
    /// untouched. The micro rules themselves stay scale-agnostic.
    pub fn scaled(&self, scale: f64) -> ModelParams {
        ModelParams {
            lambda_p: self.lambda_p * scale,
            lambda_l: self.lambda_l * scale,
            lambda_a: self.lambda_a * scale,
            lambda_c: self.lambda_c * scale,
            sigma2_p: self.sigma2_p * scale,
            sigma2_l: self.sigma2_l * scale,
            ..self.clone()
        }
    }

    /// Drift coefficient of the reduced all-active opinion equation for the
    /// agent channel: lambda_p (omega_p + eps)^2.
    pub fn agent_mean_rate(&self) -> f64 {
        self.lambda_p * (self.omega_p + self.eps_floor).powi(2)
    }

    /// Relaxation rate of the population mean toward the leaders' mean:
    /// lambda_l (omega_l + eps).
    pub fn leader_mean_rate(&self) -> f64 {
        self.lambda_l * (self.omega_l + self.eps_floor)
    }
}

/// Unvalidated parameter bag; `ModelParams::new` is the only way to turn it
/// into a usable set.
#[derive(Debug, Clone, Copy)]
pub struct RawParams {
    pub lambda_p: f64,
    pub lambda_l: f64,
    pub lambda_a: f64,
    pub lambda_c: f64,
    pub sigma2_p: f64,
    pub sigma2_l: f64,
    pub omega_p: f64,
    pub omega_l: f64,
    pub eps_floor: f64,
    pub gamma: f64,
    pub a_p: f64,
    pub a_l: f64,
    pub theta: f64,
    pub qi_scale: f64,
    pub mu_l: f64,
}

impl Default for RawParams {
    /// Compromise-dominated defaults with the Fig.-style slopes omega_p = 0.8,
    /// eps = 0.05 and the zero-mean fade a = omega/2 + eps for both channels.
    fn default() -> Self {
        let omega_p = 0.8;
        let omega_l = 0.75;
        let eps_floor = 0.05;
        RawParams {
            lambda_p: 0.5,
            lambda_l: 0.5,
            lambda_a: 0.5,
            lambda_c: 0.1,
            sigma2_p: 0.02,
            sigma2_l: 0.02,
            omega_p,
            omega_l,
            eps_floor,
            gamma: 1.0,
            a_p: default_fade(omega_p, eps_floor),
            a_l: default_fade(omega_l, eps_floor),
            theta: 0.3,
            qi_scale: 0.01,
            mu_l: 0.0,
        }
    }
}

/// Piecewise-linear activity weight: 1 above gamma, 0 below -gamma,
/// 1/2 + A/(2 gamma) in between. Continuous and nondecreasing.
///
/// The clamped form keeps `activity_weight(A) - 1/2` exactly antisymmetric
/// under A -> -A in floating point, which the even-data solvers rely on.
pub fn activity_weight(activity: f64, gamma: f64) -> f64 {
    debug_assert!(gamma > 0.0);
    0.5 + (activity / (2.0 * gamma)).clamp(-0.5, 0.5)
}

/// Centered activity weight `activity_weight(A) - 1/2`, exactly odd in A.
pub fn activity_weight_centered(activity: f64, gamma: f64) -> f64 {
    (activity / (2.0 * gamma)).clamp(-0.5, 0.5)
}

/// Probability that an interaction moves the opinion: `Abar*omega + eps`,
/// always inside [eps, omega+eps] and therefore strictly inside (0,1).
pub fn interact_prob(weight: f64, omega: f64, eps_floor: f64) -> Result<f64, ParamError> {
    if omega + eps_floor >= 1.0 {
        return Err(ParamError::OutOfRange {
            name: "omega",
            value: omega,
            constraint: "omega + eps_floor < 1",
        });
    }
    Ok(weight * omega + eps_floor)
}

/// Fade constant making the mean activity increment integrate to zero over a
/// symmetric activity interval: a = omega/2 + eps. Always classifies as
/// `FadeRegime::CaseII`.
pub fn default_fade(omega: f64, eps_floor: f64) -> f64 {
    0.5 * omega + eps_floor
}

/// Sign pattern of the mean activity increment `Abar*omega + eps - a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadeRegime {
    /// a in (0, eps): activity increases on average for everyone.
    CaseI,
    /// a in (eps, omega+eps): active agents gain activity, inactive lose it.
    CaseII,
    /// a > omega+eps: activity decreases on average for everyone.
    CaseIII,
}

impl fmt::Display for FadeRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FadeRegime::CaseI => write!(f, "case I (activity grows for all)"),
            FadeRegime::CaseII => write!(f, "case II (active gain, inactive lose)"),
            FadeRegime::CaseIII => write!(f, "case III (activity fades for all)"),
        }
    }
}

/// Classify a fade constant into cases I-III. The trichotomy is on open
/// intervals, so the boundary values a = eps and a = omega + eps are
/// rejected.
pub fn classify_fade(a: f64, omega: f64, eps_floor: f64) -> Result<FadeRegime, ParamError> {
    check_positive("a", a)?;
    let upper = omega + eps_floor;
    if a == eps_floor || a == upper {
        return Err(ParamError::FadeOnBoundary {
            a,
            eps: eps_floor,
            omega_plus_eps: upper,
        });
    }
    if a < eps_floor {
        Ok(FadeRegime::CaseI)
    } else if a < upper {
        Ok(FadeRegime::CaseII)
    } else {
        Ok(FadeRegime::CaseIII)
    }
}

type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type LocalizerFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Symmetric influence kernel G(w,v) in [0,1]. The constant kernel is a
/// distinguished variant so solvers can take the closed-form fast paths that
/// only exist for G == 1.
#[derive(Clone)]
pub enum InfluenceKernel {
    /// G == 1 everywhere.
    Uniform,
    /// Arbitrary symmetric kernel; symmetry is the caller's responsibility
    /// (and is spot-checked by tests via sampling).
    Custom(KernelFn),
}

impl InfluenceKernel {
    pub fn eval(&self, w: f64, v: f64) -> f64 {
        match self {
            InfluenceKernel::Uniform => 1.0,
            InfluenceKernel::Custom(g) => g(w, v),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, InfluenceKernel::Uniform)
    }
}

impl fmt::Debug for InfluenceKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => write!(f, "Uniform"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Diffusion localizer D(w) in [0,1]; the default sqrt(1-w^2) vanishes at the
/// extreme opinions and keeps them inside [-1,1].
#[derive(Clone)]
pub enum DiffusionLocalizer {
    /// D(w) = sqrt(1 - w^2).
    Semicircle,
    Custom(LocalizerFn),
}

impl DiffusionLocalizer {
    pub fn eval(&self, w: f64) -> f64 {
        match self {
            DiffusionLocalizer::Semicircle => (1.0 - w * w).max(0.0).sqrt(),
            DiffusionLocalizer::Custom(d) => d(w),
        }
    }
}

impl fmt::Debug for DiffusionLocalizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Semicircle => write!(f, "Semicircle"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// The kernel pair (G, D) used by the binary interaction rules and by the
/// nonlocal drift of the mean-field solvers.
#[derive(Debug, Clone)]
pub struct InteractionKernels {
    pub influence: InfluenceKernel,
    pub localizer: DiffusionLocalizer,
}

impl Default for InteractionKernels {
    fn default() -> Self {
        InteractionKernels {
            influence: InfluenceKernel::Uniform,
            localizer: DiffusionLocalizer::Semicircle,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn activity_weight_branches() {
        assert_eq!(activity_weight(2.0, 1.0), 1.0);
        assert_eq!(activity_weight(0.0, 1.0), 0.5);
        assert_relative_eq!(activity_weight(-0.5, 1.0), 0.25);
        assert_eq!(activity_weight(-3.0, 1.0), 0.0);
        assert_eq!(activity_weight(1.0, 1.0), 1.0);
        assert_eq!(activity_weight(-1.0, 1.0), 0.0);
    }

    #[test]
    fn activity_weight_is_lipschitz_with_slope_half_over_gamma() {
        let gamma = 0.7;
        let lip = 1.0 / (2.0 * gamma);
        let mut prev_a = -3.0;
        let mut prev_w = activity_weight(prev_a, gamma);
        let n = 4000;
        for i in 1..=n {
            let a = -3.0 + 6.0 * i as f64 / n as f64;
            let w = activity_weight(a, gamma);
            assert!(w >= prev_w, "nondecreasing");
            assert!((w - prev_w).abs() <= lip * (a - prev_a) + 1e-12);
            prev_a = a;
            prev_w = w;
        }
    }

    #[test]
    fn interact_prob_pinned_values() {
        assert_relative_eq!(interact_prob(1.0, 0.8, 0.05).unwrap(), 0.85);
        assert_relative_eq!(interact_prob(0.0, 0.8, 0.05).unwrap(), 0.05);
        assert_relative_eq!(interact_prob(0.5, 0.8, 0.05).unwrap(), 0.45);
        assert!(interact_prob(1.0, 0.97, 0.05).is_err());
    }

    #[test]
    fn default_fade_pinned_values() {
        assert_relative_eq!(default_fade(0.8, 0.05), 0.45);
        assert_relative_eq!(default_fade(0.75, 0.05), 0.425);
    }

    #[test]
    fn classify_fade_cases() {
        assert_eq!(classify_fade(0.02, 0.8, 0.05).unwrap(), FadeRegime::CaseI);
        assert_eq!(classify_fade(0.45, 0.8, 0.05).unwrap(), FadeRegime::CaseII);
        assert_eq!(classify_fade(0.9, 0.8, 0.05).unwrap(), FadeRegime::CaseIII);
        assert!(classify_fade(0.05, 0.8, 0.05).is_err());
        assert!(classify_fade(0.85, 0.8, 0.05).is_err());
    }

    #[test]
    fn params_validation_names_the_field() {
        let raw = RawParams {
            omega_p: 0.96,
            ..RawParams::default()
        };
        let err = ModelParams::new(raw).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("omega_p"), "got: {msg}");

        let raw = RawParams {
            lambda_p: 0.0,
            ..RawParams::default()
        };
        assert!(ModelParams::new(raw).unwrap_err().to_string().contains("lambda_p"));
    }

    #[test]
    fn default_params_are_valid_case_ii() {
        let p = ModelParams::new(RawParams::default()).unwrap();
        assert_eq!(
            classify_fade(p.a_p, p.omega_p, p.eps_floor).unwrap(),
            FadeRegime::CaseII
        );
        assert_relative_eq!(p.nu_p(), 0.04);
    }

    #[test]
    fn mean_increment_antisymmetric_under_default_fade() {
        // With a = omega/2 + eps, Abar*omega + eps - a = omega*(Abar - 1/2)
        // flips sign exactly under A -> -A.
        let (omega, eps, gamma) = (0.8, 0.05, 1.3);
        let a = default_fade(omega, eps);
        for i in 0..500 {
            let act = -4.0 + 8.0 * i as f64 / 499.0;
            let up = activity_weight(act, gamma) * omega + eps - a;
            let down = activity_weight(-act, gamma) * omega + eps - a;
            assert_relative_eq!(up, -down, epsilon = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn interact_prob_nondecreasing_in_activity(
            a1 in -5.0f64..5.0,
            a2 in -5.0f64..5.0,
            omega in 0.1f64..0.9,
            eps in 0.001f64..0.09,
        ) {
            prop_assume!(omega + eps < 1.0 && eps < omega);
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let p_lo = interact_prob(activity_weight(lo, 1.0), omega, eps).unwrap();
            let p_hi = interact_prob(activity_weight(hi, 1.0), omega, eps).unwrap();
            prop_assert!(p_lo <= p_hi);
            prop_assert!(p_lo >= eps - 1e-15 && p_hi <= omega + eps + 1e-15);
        }

        #[test]
        fn default_fade_always_case_ii(omega in 0.1f64..0.9, eps in 0.001f64..0.09) {
            prop_assume!(omega + eps < 1.0 && eps < omega);
            let a = default_fade(omega, eps);
            prop_assert_eq!(classify_fade(a, omega, eps).unwrap(), FadeRegime::CaseII);
        }
    }

    #[test]
    fn default_kernels() {
        let k = InteractionKernels::default();
        assert_eq!(k.influence.eval(0.3, -0.7), 1.0);
        assert_eq!(k.localizer.eval(1.0), 0.0);
        assert_eq!(k.localizer.eval(-1.0), 0.0);
        assert_relative_eq!(k.localizer.eval(0.0), 1.0);
        // symmetry of a custom kernel, by sampling
        let g = InfluenceKernel::Custom(Arc::new(|w: f64, v: f64| 1.0 / (1.0 + (w - v).abs())));
        for i in 0..50 {
            let w = -1.0 + 2.0 * i as f64 / 49.0;
            let v = 1.0 - 2.0 * i as f64 / 49.0 * 0.8;
            assert_relative_eq!(g.eval(w, v), g.eval(v, w));
        }
    }
}
