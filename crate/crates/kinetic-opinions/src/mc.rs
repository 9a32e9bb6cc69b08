//! Boltzmann-type Monte Carlo simulation of a finite ensemble.
//!
//! One step advances scaled time by `qi_scale`: the ensemble is split into a
//! uniform random perfect matching and every pair undergoes one binary
//! interaction with the rescaled rates (lambda -> qi*lambda,
//! sigma^2 -> qi*sigma^2); if leaders are present every agent additionally
//! meets one independent leader draw. Under control, each agent's activity
//! update is replaced by the contraction A -> A(1 - qi*lambda_c/2) with
//! probability theta, independently per agent and step.
//!
//! All randomness comes from counter-based streams keyed by
//! (seed, step, agent lane), so runs are bit-reproducible.

use rand::seq::SliceRandom;
use rand_distr::{Beta as BetaDist, Distribution};
use thiserror::Error;

use crate::diagnostics::{macros_of_ensemble, Macros};
use crate::fp::grid::{Axis, Grid1D, GridError};
use crate::micro::{
    agent_agent_update, agent_leader_update, controlled_activity_update, sample_bounded_noise,
    AgentState, InteractionDraw, MicroError,
};
use crate::model::{activity_weight, InteractionKernels, ModelParams};
use crate::rng::StreamRng;

#[derive(Debug, Error)]
pub enum McError {
    #[error("ensemble size {0} must be even and nonzero")]
    OddSize(usize),
    #[error(transparent)]
    Micro(#[from] MicroError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("leader Beta distribution with concentration {0} is invalid")]
    BadLeaderShape(f64),
}

/// Static opinion distribution of the leaders.
#[derive(Debug, Clone)]
pub enum LeaderDistribution {
    /// Every leader interaction sees the same opinion mu_l.
    PointMass { mu: f64 },
    /// Beta-type law on [-1,1] with mean mu and concentration kappa:
    /// exponent parameters b1 = kappa*(1-mu)/2 (at w = +1 side) and
    /// b2 = kappa*(1+mu)/2.
    Beta { mu: f64, kappa: f64 },
    /// Resample uniformly from a fixed list of opinions.
    Empirical { samples: Vec<f64> },
}

impl LeaderDistribution {
    pub fn mean(&self) -> f64 {
        match self {
            LeaderDistribution::PointMass { mu } => *mu,
            LeaderDistribution::Beta { mu, .. } => *mu,
            LeaderDistribution::Empirical { samples } => {
                samples.iter().sum::<f64>() / samples.len() as f64
            }
        }
    }

    fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            LeaderDistribution::PointMass { mu } => *mu,
            LeaderDistribution::Beta { mu, kappa } => {
                let b1 = kappa * (1.0 - mu) / 2.0;
                let b2 = kappa * (1.0 + mu) / 2.0;
                // u ~ Beta(b2, b1) on [0,1], w = 2u - 1
                let dist = BetaDist::new(b2, b1).expect("validated in constructor");
                2.0 * dist.sample(rng) - 1.0
            }
            LeaderDistribution::Empirical { samples } => {
                samples[(rng.uniform() * samples.len() as f64) as usize % samples.len()]
            }
        }
    }

    pub fn validate(&self) -> Result<(), McError> {
        if let LeaderDistribution::Beta { mu, kappa } = self {
            let b1 = kappa * (1.0 - mu) / 2.0;
            let b2 = kappa * (1.0 + mu) / 2.0;
            if !(b1 > 0.0 && b2 > 0.0) {
                return Err(McError::BadLeaderShape(*kappa));
            }
        }
        Ok(())
    }
}

/// A finite population of (opinion, activity) agents with its RNG key and
/// simulation clock.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub agents: Vec<AgentState>,
    pub seed: u64,
    pub time: f64,
    step: u64,
}

impl Ensemble {
    pub fn new(agents: Vec<AgentState>, seed: u64) -> Result<Self, McError> {
        if agents.is_empty() || agents.len() % 2 != 0 {
            return Err(McError::OddSize(agents.len()));
        }
        Ok(Ensemble {
            agents,
            seed,
            time: 0.0,
            step: 0,
        })
    }

    /// Sample opinions uniformly from [w_lo, w_hi] and activities uniformly
    /// from [a_lo, a_hi].
    pub fn uniform_box(
        n: usize,
        w_lo: f64,
        w_hi: f64,
        a_lo: f64,
        a_hi: f64,
        seed: u64,
    ) -> Result<Self, McError> {
        let mut rng = StreamRng::at(seed, u64::MAX, 0);
        let agents = (0..n)
            .map(|_| {
                AgentState::new(
                    w_lo + (w_hi - w_lo) * rng.uniform(),
                    a_lo + (a_hi - a_lo) * rng.uniform(),
                )
            })
            .collect();
        Ensemble::new(agents, seed)
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn mean_opinion(&self) -> f64 {
        self.agents.iter().map(|a| a.opinion).sum::<f64>() / self.len() as f64
    }

    pub fn mean_activity(&self) -> f64 {
        self.agents.iter().map(|a| a.activity).sum::<f64>() / self.len() as f64
    }

    pub fn opinion_std(&self) -> f64 {
        let m = self.mean_opinion();
        (self
            .agents
            .iter()
            .map(|a| (a.opinion - m).powi(2))
            .sum::<f64>()
            / self.len() as f64)
            .sqrt()
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }
}

// lanes 0..N-1 belong to the agents; high lanes to step-level decisions
const LANE_PAIRING: u64 = u64::MAX - 1;

/// One Boltzmann step of scaled length `dt = params.qi_scale`.
///
/// Never drops agents; propagates any draw that would leave [-1,1], which
/// cannot happen with the bounded sampler.
pub fn mc_step(
    ens: &mut Ensemble,
    params: &ModelParams,
    kernels: &InteractionKernels,
    leaders: Option<&LeaderDistribution>,
    controlled: bool,
) -> Result<(), McError> {
    let qi = params.qi_scale;
    let scaled = params.scaled(qi);
    let n = ens.len();
    let step = ens.step;

    let mut order: Vec<usize> = (0..n).collect();
    let mut pairing_rng = StreamRng::at(ens.seed, step, LANE_PAIRING);
    order.shuffle(&mut pairing_rng);

    let max_compromise = scaled.lambda_p.max(scaled.lambda_l);

    for pair in order.chunks_exact(2) {
        let (i, j) = (pair[0], pair[1]);
        let mut rng_i = StreamRng::at(ens.seed, step, i as u64);
        let mut rng_j = StreamRng::at(ens.seed, step, j as u64);
        let a = ens.agents[i];
        let b = ens.agents[j];

        // agent-agent interaction with the sum dt equal to one scaled round
        let p_a = activity_weight(a.activity, params.gamma) * params.omega_p + params.eps_floor;
        let p_b = activity_weight(b.activity, params.gamma) * params.omega_p + params.eps_floor;
        let draw_a = InteractionDraw {
            accept: rng_i.bernoulli(p_a),
            noise: sample_bounded_noise(
                a.opinion,
                scaled.sigma2_p,
                max_compromise,
                &kernels.localizer,
                &mut rng_i,
            ),
        };
        let draw_b = InteractionDraw {
            accept: rng_j.bernoulli(p_b),
            noise: sample_bounded_noise(
                b.opinion,
                scaled.sigma2_p,
                max_compromise,
                &kernels.localizer,
                &mut rng_j,
            ),
        };
        let (mut a_new, mut b_new) = agent_agent_update(a, b, &scaled, kernels, draw_a, draw_b)?;

        // one leader interaction per agent per step, independent of pairing
        if let Some(leader_law) = leaders {
            for (agent, rng) in [(&mut a_new, &mut rng_i), (&mut b_new, &mut rng_j)] {
                let z = leader_law.sample(rng);
                let p_l = activity_weight(agent.activity, params.gamma) * params.omega_l
                    + params.eps_floor;
                let draw = InteractionDraw {
                    accept: rng.bernoulli(p_l),
                    noise: sample_bounded_noise(
                        agent.opinion,
                        scaled.sigma2_l,
                        max_compromise,
                        &kernels.localizer,
                        rng,
                    ),
                };
                *agent = agent_leader_update(*agent, z, &scaled, kernels, draw)?;
            }
        }

        // the controlled branch replaces the standard activity updates
        if controlled {
            for (agent, pre, rng) in [(&mut a_new, a, &mut rng_i), (&mut b_new, b, &mut rng_j)] {
                if rng.bernoulli(params.theta) {
                    agent.activity = controlled_activity_update(pre.activity, scaled.lambda_c);
                }
            }
        }

        ens.agents[i] = a_new;
        ens.agents[j] = b_new;
    }

    ens.step += 1;
    ens.time += qi;
    Ok(())
}

/// Normalized histogram of one marginal. The requested bin layout is grown
/// (never truncated) if samples fall outside it, so no mass is discarded.
pub fn bin_marginal(ens: &Ensemble, axis: Axis, mut grid: Grid1D) -> Result<Grid1D, McError> {
    let coord = |a: &AgentState| match axis {
        Axis::Opinion => a.opinion,
        Axis::Activity => a.activity,
    };
    if axis == Axis::Activity {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in &ens.agents {
            lo = lo.min(coord(a));
            hi = hi.max(coord(a));
        }
        let step = grid.step();
        if lo < grid.lo() {
            grid.extend_left(((grid.lo() - lo) / step).ceil() as usize + 1);
        }
        if hi >= grid.hi() {
            grid.extend_right(((hi - grid.hi()) / step).ceil() as usize + 1);
        }
    }
    let n = grid.len();
    let (lo, step) = (grid.lo(), grid.step());
    let weight = 1.0 / (ens.len() as f64 * step);
    for a in &ens.agents {
        let mut idx = ((coord(a) - lo) / step) as usize;
        if idx >= n {
            idx = n - 1;
        }
        grid.values_mut()[idx] += weight;
    }
    Ok(grid)
}

/// What a Monte Carlo run records.
#[derive(Debug, Clone)]
pub struct McRun {
    /// Macroscopic observables at the recording cadence (including t = 0).
    pub series: Vec<Macros>,
    /// Binned opinion and activity marginals at the snapshot times.
    pub snapshots: Vec<McSnapshot>,
    /// Final ensemble state.
    pub ensemble: Ensemble,
}

#[derive(Debug, Clone)]
pub struct McSnapshot {
    pub time: f64,
    pub opinion: Grid1D,
    pub activity: Grid1D,
}

/// Scenario description for `run_mc`.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub steps: u64,
    /// Record Macros every this many steps (0 records only the endpoints).
    pub record_every: u64,
    /// Take marginal snapshots at these step indices.
    pub snapshot_steps: Vec<u64>,
    pub opinion_bins: usize,
    pub activity_bins_per_gamma: usize,
    pub controlled: bool,
    pub leaders: Option<LeaderDistribution>,
}

/// Drive `mc_step` to the final time, recording macros at the configured
/// cadence and binned marginals at the snapshot steps.
pub fn run_mc(
    mut ens: Ensemble,
    params: &ModelParams,
    kernels: &InteractionKernels,
    config: &McConfig,
) -> Result<McRun, McError> {
    if let Some(l) = &config.leaders {
        l.validate()?;
    }
    let mut series = vec![macros_of_ensemble(&ens, params)];
    let mut snapshots = Vec::new();
    let snap = |ens: &Ensemble| -> Result<McSnapshot, McError> {
        let w_grid = Grid1D::opinion(config.opinion_bins)?;
        let a_lo = ens
            .agents
            .iter()
            .map(|a| a.activity)
            .fold(f64::INFINITY, f64::min);
        let a_hi = ens
            .agents
            .iter()
            .map(|a| a.activity)
            .fold(f64::NEG_INFINITY, f64::max);
        let a_grid = Grid1D::activity(
            params.gamma,
            a_lo.min(-params.gamma) - params.gamma,
            a_hi.max(params.gamma) + params.gamma,
            config.activity_bins_per_gamma,
        )?;
        Ok(McSnapshot {
            time: ens.time,
            opinion: bin_marginal(ens, Axis::Opinion, w_grid)?,
            activity: bin_marginal(ens, Axis::Activity, a_grid)?,
        })
    };
    if config.snapshot_steps.contains(&0) {
        snapshots.push(snap(&ens)?);
    }
    for k in 1..=config.steps {
        mc_step(
            &mut ens,
            params,
            kernels,
            config.leaders.as_ref(),
            config.controlled,
        )?;
        let record = config.record_every != 0 && k % config.record_every == 0;
        if record || k == config.steps {
            series.push(macros_of_ensemble(&ens, params));
        }
        if config.snapshot_steps.contains(&k) {
            snapshots.push(snap(&ens)?);
        }
    }
    Ok(McRun {
        series,
        snapshots,
        ensemble: ens,
    })
}
