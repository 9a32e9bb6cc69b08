//! Microscopic update rules: the binary agent-agent and agent-leader
//! interactions, the controlled activity contraction, and their exact
//! expected increments.
//!
//! Agent-agent, with Bernoulli gates `ta`, `tb` and centered noises:
//!
//! ```text
//! w' = w + ta*tb*G(w,v)*lambda_p*(v - w) + D(w)*eta_a
//! A' = A + lambda_a*(ta - a_p)
//! ```
//!
//! and symmetrically for the partner. The gate product multiplies both
//! compromises, so for symmetric G and zero noise w' + v' = w + v exactly.
//! Draws are explicit inputs; the Monte Carlo engine owns all randomness, so
//! every conservation property here is deterministic and directly testable.

use rand::Rng;
use thiserror::Error;

use crate::model::{activity_weight, DiffusionLocalizer, InteractionKernels, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MicroError {
    #[error("pre-interaction opinion {0} outside [-1, 1]")]
    OpinionOutOfRange(f64),
    #[error("leader opinion {0} outside [-1, 1]")]
    LeaderOutOfRange(f64),
    #[error("draw would move the opinion to {0}, outside [-1, 1]; use the bounded sampler")]
    DrawExitsInterval(f64),
}

/// One agent's microscopic state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    /// Opinion in [-1, 1].
    pub opinion: f64,
    /// Activity level, unbounded.
    pub activity: f64,
}

impl AgentState {
    pub fn new(opinion: f64, activity: f64) -> Self {
        AgentState { opinion, activity }
    }
}

/// Outcome of the random elements of one interaction, for one participant:
/// the Bernoulli gate and the noise realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionDraw {
    /// The {0,1} gate (true = the compromise fires and the activity gains).
    pub accept: bool,
    /// Centered noise realization, already bounded by the sampler.
    pub noise: f64,
}

impl InteractionDraw {
    /// A draw that changes nothing: closed gate, zero noise.
    pub fn silent() -> Self {
        InteractionDraw {
            accept: false,
            noise: 0.0,
        }
    }
}

fn check_opinion(w: f64) -> Result<(), MicroError> {
    if !(-1.0..=1.0).contains(&w) {
        return Err(MicroError::OpinionOutOfRange(w));
    }
    Ok(())
}

/// Binary agent-agent interaction. Both post-opinions must stay in [-1,1];
/// a draw violating that is rejected. The activity update depends only on
/// the agent's own gate, never on any opinion.
pub fn agent_agent_update(
    a: AgentState,
    b: AgentState,
    params: &ModelParams,
    kernels: &InteractionKernels,
    draw_a: InteractionDraw,
    draw_b: InteractionDraw,
) -> Result<(AgentState, AgentState), MicroError> {
    check_opinion(a.opinion)?;
    check_opinion(b.opinion)?;
    let gate = (draw_a.accept && draw_b.accept) as u8 as f64;
    let g_ab = kernels.influence.eval(a.opinion, b.opinion);
    let g_ba = kernels.influence.eval(b.opinion, a.opinion);

    let w_a = a.opinion
        + gate * g_ab * params.lambda_p * (b.opinion - a.opinion)
        + kernels.localizer.eval(a.opinion) * draw_a.noise;
    let w_b = b.opinion
        + gate * g_ba * params.lambda_p * (a.opinion - b.opinion)
        + kernels.localizer.eval(b.opinion) * draw_b.noise;
    check_draw_result(w_a)?;
    check_draw_result(w_b)?;

    let act_a = a.activity + params.lambda_a * (draw_a.accept as u8 as f64 - params.a_p);
    let act_b = b.activity + params.lambda_a * (draw_b.accept as u8 as f64 - params.a_p);
    Ok((AgentState::new(w_a, act_a), AgentState::new(w_b, act_b)))
}

/// Agent-leader interaction: only the agent is updated, the leader opinion z
/// is static.
pub fn agent_leader_update(
    a: AgentState,
    z: f64,
    params: &ModelParams,
    kernels: &InteractionKernels,
    draw: InteractionDraw,
) -> Result<AgentState, MicroError> {
    check_opinion(a.opinion)?;
    if !(-1.0..=1.0).contains(&z) {
        return Err(MicroError::LeaderOutOfRange(z));
    }
    let gate = draw.accept as u8 as f64;
    let w = a.opinion
        + gate * kernels.influence.eval(a.opinion, z) * params.lambda_l * (z - a.opinion)
        + kernels.localizer.eval(a.opinion) * draw.noise;
    check_draw_result(w)?;
    let act = a.activity + params.lambda_a * (gate - params.a_l);
    Ok(AgentState::new(w, act))
}

fn check_draw_result(w: f64) -> Result<(), MicroError> {
    if !(-1.0..=1.0).contains(&w) {
        return Err(MicroError::DrawExitsInterval(w));
    }
    Ok(())
}

/// Controlled activity update A -> A - lambda_c A / 2: a strict contraction
/// toward zero with factor 1 - lambda_c/2.
pub fn controlled_activity_update(activity: f64, lambda_c: f64) -> f64 {
    activity * (1.0 - 0.5 * lambda_c)
}

/// Which interaction channel an expected increment refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Agent,
    Leader,
}

/// Mean activity increment at a fixed level A:
/// `lambda_a * (Abar(A)*omega + eps - a)` for the requested channel.
pub fn expected_activity_increment(activity: f64, params: &ModelParams, channel: Channel) -> f64 {
    let (omega, fade) = match channel {
        Channel::Agent => (params.omega_p, params.a_p),
        Channel::Leader => (params.omega_l, params.a_l),
    };
    let weight = activity_weight(activity, params.gamma);
    params.lambda_a * (weight * omega + params.eps_floor - fade)
}

/// Sample a bounded, exactly centered noise realization for an agent at
/// opinion `w`.
///
/// The raw law is uniform on [-c, c] with c = sqrt(3 sigma^2) (variance
/// sigma^2). The support is then symmetrically truncated to
/// +- (1-|w|)(1-max_compromise)/D(w), the largest symmetric interval that
/// keeps w' inside [-1,1] for every admissible compromise term. This is the
/// closed form of rejection sampling against that symmetric set, so the mean
/// stays exactly zero; the truncation only bites within O(sigma^2) of the
/// extreme opinions where D(w) already kills the diffusion.
pub fn sample_bounded_noise<R: Rng + ?Sized>(
    w: f64,
    sigma2: f64,
    max_compromise: f64,
    localizer: &DiffusionLocalizer,
    rng: &mut R,
) -> f64 {
    let c = (3.0 * sigma2).sqrt();
    let d = localizer.eval(w);
    let bound = if d > 0.0 {
        let margin = (1.0 - w.abs()) * (1.0 - max_compromise);
        (margin / d).min(c)
    } else {
        c
    };
    if bound <= 0.0 {
        return 0.0;
    }
    rng.gen_range(-bound..=bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, RawParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn params_with(f: impl FnOnce(&mut RawParams)) -> ModelParams {
        let mut raw = RawParams::default();
        f(&mut raw);
        ModelParams::new(raw).unwrap()
    }

    fn fire(noise: f64) -> InteractionDraw {
        InteractionDraw {
            accept: true,
            noise,
        }
    }

    #[test]
    fn agent_agent_pinned_values() {
        let params = params_with(|r| r.lambda_p = 0.1);
        let kernels = InteractionKernels::default();
        let (a, _b) = agent_agent_update(
            AgentState::new(0.0, 0.0),
            AgentState::new(1.0, 0.0),
            &params,
            &kernels,
            fire(0.0),
            fire(0.0),
        )
        .unwrap();
        assert_relative_eq!(a.opinion, 0.1);

        // closed gate on one side: no compromise at all
        let (a, b) = agent_agent_update(
            AgentState::new(0.3, 1.0),
            AgentState::new(-0.8, -1.0),
            &params,
            &kernels,
            InteractionDraw::silent(),
            fire(0.0),
        )
        .unwrap();
        assert_eq!(a.opinion, 0.3);
        assert_eq!(b.opinion, -0.8);
    }

    #[test]
    fn agent_agent_preserves_mean_without_noise() {
        let params = params_with(|r| r.lambda_p = 0.37);
        let kernels = InteractionKernels::default();
        for (w, v) in [(0.9, -0.4), (-1.0, 1.0), (0.123, 0.456)] {
            let (a, b) = agent_agent_update(
                AgentState::new(w, 0.0),
                AgentState::new(v, 0.0),
                &params,
                &kernels,
                fire(0.0),
                fire(0.0),
            )
            .unwrap();
            assert_relative_eq!(a.opinion + b.opinion, w + v, epsilon = 1e-15);
        }
    }

    #[test]
    fn agent_leader_pinned_values() {
        let params = params_with(|r| {
            r.lambda_l = 0.2;
            r.lambda_a = 0.1;
            r.a_l = 0.45;
        });
        let kernels = InteractionKernels::default();
        let a = agent_leader_update(
            AgentState::new(0.0, 0.0),
            0.5,
            &params,
            &kernels,
            fire(0.0),
        )
        .unwrap();
        assert_relative_eq!(a.opinion, 0.1);
        assert_relative_eq!(a.activity, 0.055);

        // fixed point of the compromise
        let a = agent_leader_update(
            AgentState::new(0.5, 2.0),
            0.5,
            &params,
            &kernels,
            fire(0.0),
        )
        .unwrap();
        assert_relative_eq!(a.opinion, 0.5);
    }

    #[test]
    fn controlled_update_pinned_values() {
        assert_relative_eq!(controlled_activity_update(1.0, 0.2), 0.9);
        assert_eq!(controlled_activity_update(0.0, 0.37), 0.0);
        assert_relative_eq!(controlled_activity_update(-2.0, 0.2), -1.8);
    }

    #[test]
    fn expected_increment_sign_pattern_case_ii() {
        let params = params_with(|r| r.lambda_a = 0.1);
        // default fade is case II
        assert!(expected_activity_increment(2.0, &params, Channel::Agent) > 0.0);
        assert!(expected_activity_increment(-2.0, &params, Channel::Agent) < 0.0);
        assert_relative_eq!(
            expected_activity_increment(0.0, &params, Channel::Agent),
            0.0,
            epsilon = 1e-16
        );
    }

    #[test]
    fn noise_sampler_moments() {
        let mut rng = StdRng::seed_from_u64(7);
        let sigma2 = 0.02;
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let loc = DiffusionLocalizer::Semicircle;
        for _ in 0..n {
            let eta = sample_bounded_noise(0.0, sigma2, 0.01, &loc, &mut rng);
            sum += eta;
            sum2 += eta * eta;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        // 4 standard errors of the mean of a U[-c,c] sample
        let se = (sigma2 / n as f64).sqrt();
        assert!(mean.abs() <= 4.0 * se, "mean {mean} vs se {se}");
        assert!((var - sigma2).abs() / sigma2 <= 0.05, "var {var}");
    }

    #[test]
    fn noise_vanishes_at_extremes_with_default_localizer() {
        let mut rng = StdRng::seed_from_u64(1);
        let loc = DiffusionLocalizer::Semicircle;
        for w in [1.0, -1.0] {
            let eta = sample_bounded_noise(w, 0.02, 0.01, &loc, &mut rng);
            assert_eq!(loc.eval(w) * eta, 0.0);
        }
    }

    proptest! {
        #[test]
        fn opinions_stay_confined(
            w in -1.0f64..=1.0,
            v in -1.0f64..=1.0,
            seed in any::<u64>(),
            lambda in 0.001f64..0.9,
        ) {
            let params = params_with(|r| r.lambda_p = lambda);
            let kernels = InteractionKernels::default();
            let mut rng = StdRng::seed_from_u64(seed);
            let na = sample_bounded_noise(w, 0.02, params.lambda_p, &kernels.localizer, &mut rng);
            let nb = sample_bounded_noise(v, 0.02, params.lambda_p, &kernels.localizer, &mut rng);
            let (a, b) = agent_agent_update(
                AgentState::new(w, 0.0),
                AgentState::new(v, 0.0),
                &params,
                &kernels,
                fire(na),
                fire(nb),
            ).unwrap();
            prop_assert!((-1.0..=1.0).contains(&a.opinion));
            prop_assert!((-1.0..=1.0).contains(&b.opinion));
        }

        #[test]
        fn activity_update_ignores_opinions(
            w1 in -1.0f64..=1.0,
            w2 in -1.0f64..=1.0,
            act in -3.0f64..3.0,
            accept in any::<bool>(),
        ) {
            let params = params_with(|_| {});
            let kernels = InteractionKernels::default();
            let draw = InteractionDraw { accept, noise: 0.0 };
            let other = AgentState::new(0.0, 0.0);
            let (r1, _) = agent_agent_update(AgentState::new(w1, act), other, &params, &kernels, draw, fire(0.0)).unwrap();
            let (r2, _) = agent_agent_update(AgentState::new(w2, act), other, &params, &kernels, draw, fire(0.0)).unwrap();
            prop_assert_eq!(r1.activity, r2.activity);
        }

        #[test]
        fn controlled_update_contracts(act in -10.0f64..10.0, lc in 0.001f64..0.999) {
            let after = controlled_activity_update(act, lc);
            prop_assert!(after.abs() <= (1.0 - lc / 2.0) * act.abs() + 1e-15);
        }
    }
}
