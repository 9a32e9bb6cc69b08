//! Config-file driven scenario description.
//!
//! Scenarios are TOML ("key = value within named sections"); every section
//! and key is optional, so the empty file is the default agents-only
//! uncontrolled run. Unknown keys are rejected by name and every model
//! invariant is enforced at parse time with a field-precise message. A
//! scenario is fully determined by its serialized form: reruns with the
//! same seed are byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fp::chang_cooper::MeanMode;
use crate::fp::grid::{Grid1D, Grid2D};
use crate::mc::{Ensemble, LeaderDistribution};
use crate::micro::AgentState;
use crate::model::{default_fade, ModelParams, ParamError, RawParams};
use crate::rng::StreamRng;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Uncontrolled,
    Controlled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channels {
    Agents,
    Leaders,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Mc,
    FpH,
    FpG,
    Fp2d,
    Characteristics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanModeCfg {
    ClosedForm,
    SelfConsistent,
}

impl From<MeanModeCfg> for MeanMode {
    fn from(m: MeanModeCfg) -> MeanMode {
        match m {
            MeanModeCfg::ClosedForm => MeanMode::ClosedForm,
            MeanModeCfg::SelfConsistent => MeanMode::SelfConsistent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: Option<ModelKind>,
    pub channels: Option<Channels>,
    pub solver: Option<SolverKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub lambda_p: Option<f64>,
    pub lambda_l: Option<f64>,
    pub lambda_a: Option<f64>,
    pub lambda_c: Option<f64>,
    pub sigma2_p: Option<f64>,
    pub sigma2_l: Option<f64>,
    pub omega_p: Option<f64>,
    pub omega_l: Option<f64>,
    pub eps_floor: Option<f64>,
    pub gamma: Option<f64>,
    /// Defaults to the zero-mean fade omega_p/2 + eps_floor.
    pub a_p: Option<f64>,
    pub a_l: Option<f64>,
    pub theta: Option<f64>,
    pub qi_scale: Option<f64>,
    pub mu_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum InitialSection {
    /// Product of uniform laws on [w_lo, w_hi] x [a_lo, a_hi].
    UniformBox {
        w_lo: f64,
        w_hi: f64,
        a_lo: f64,
        a_hi: f64,
    },
    /// Opinion follows a Beta-type law with exponent parameters (w_b1, w_b2)
    /// on [-1,1]; activity is uniform on [a_lo, a_hi].
    BetaProduct {
        w_b1: f64,
        w_b2: f64,
        a_lo: f64,
        a_hi: f64,
    },
    /// Weighted point masses (opinion, activity, weight).
    PointMass { points: Vec<(f64, f64, f64)> },
    /// Opinion density table (CSV rows `w,density` on uniform cells);
    /// activity uniform on [a_lo, a_hi].
    Table { path: String, a_lo: f64, a_hi: f64 },
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection::UniformBox {
            w_lo: -0.6,
            w_hi: 0.2,
            a_lo: -2.0,
            a_hi: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_final: Option<f64>,
    pub seed: Option<u64>,
    /// Recording cadence in steps.
    pub record_every: Option<usize>,
    pub snapshot_times: Option<Vec<f64>>,
    pub n_agents: Option<usize>,
    pub w_cells: Option<usize>,
    pub a_cells_per_gamma: Option<usize>,
    pub a_lo: Option<f64>,
    pub a_hi: Option<f64>,
    pub dt: Option<f64>,
    pub cfl: Option<f64>,
    pub mean_mode: Option<MeanModeCfg>,
    /// Number of characteristic curves for the characteristics solver.
    pub trajectories: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum LeadersSection {
    Point { mu: f64 },
    Beta { mu: f64, kappa: f64 },
    Empirical { samples: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    /// Exit with the infeasible-control code when the configured control is
    /// not effective.
    pub require_effective: Option<bool>,
    /// Apply the leader-inclusive parameter transformation to the control
    /// formulas.
    pub include_leaders: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    /// Weighted moments to classify; when absent they are computed from the
    /// initial condition.
    pub rho_bar: Option<f64>,
    pub m_bar: Option<f64>,
    /// Cells per activity slice in the emitted density tables.
    pub table_cells: Option<usize>,
}

/// The raw, serializable configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "is_default_model")]
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "is_default_params")]
    pub params: ParamsSection,
    pub initial: Option<InitialSection>,
    #[serde(default, skip_serializing_if = "is_default_run")]
    pub run: RunSection,
    pub leaders: Option<LeadersSection>,
    pub control: Option<ControlSection>,
    pub classify: Option<ClassifySection>,
}

fn is_default_model(m: &ModelSection) -> bool {
    *m == ModelSection::default()
}
fn is_default_params(p: &ParamsSection) -> bool {
    *p == ParamsSection::default()
}
fn is_default_run(r: &RunSection) -> bool {
    *r == RunSection::default()
}

/// A validated scenario, fully determined by its serialized form.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: ModelKind,
    pub channels: Channels,
    pub solver: SolverKind,
    pub params: ModelParams,
    pub initial: InitialSection,
    pub t_final: f64,
    pub seed: u64,
    pub record_every: usize,
    pub snapshot_times: Vec<f64>,
    pub n_agents: usize,
    pub w_cells: usize,
    pub a_cells_per_gamma: usize,
    pub a_lo: f64,
    pub a_hi: f64,
    pub dt: Option<f64>,
    pub cfl: f64,
    pub mean_mode: MeanMode,
    pub trajectories: usize,
    pub leaders: Option<LeadersSection>,
    pub require_effective: bool,
    pub control_includes_leaders: bool,
    pub classify: ClassifySection,
    /// The normalized raw form (defaults resolved where they alter meaning),
    /// used for the config copy in run directories.
    pub raw: RawConfig,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        Scenario::from_raw(raw)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml_str(&text)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let p = &raw.params;
        let omega_p = p.omega_p.unwrap_or(0.8);
        let omega_l = p.omega_l.unwrap_or(0.75);
        let eps_floor = p.eps_floor.unwrap_or(0.05);
        let defaults = RawParams::default();
        let params = ModelParams::new(RawParams {
            lambda_p: p.lambda_p.unwrap_or(defaults.lambda_p),
            lambda_l: p.lambda_l.unwrap_or(defaults.lambda_l),
            lambda_a: p.lambda_a.unwrap_or(defaults.lambda_a),
            lambda_c: p.lambda_c.unwrap_or(defaults.lambda_c),
            sigma2_p: p.sigma2_p.unwrap_or(defaults.sigma2_p),
            sigma2_l: p.sigma2_l.unwrap_or(defaults.sigma2_l),
            omega_p,
            omega_l,
            eps_floor,
            gamma: p.gamma.unwrap_or(1.0),
            a_p: p.a_p.unwrap_or_else(|| default_fade(omega_p, eps_floor)),
            a_l: p.a_l.unwrap_or_else(|| default_fade(omega_l, eps_floor)),
            theta: p.theta.unwrap_or(defaults.theta),
            qi_scale: p.qi_scale.unwrap_or(defaults.qi_scale),
            mu_l: p.mu_l.unwrap_or(defaults.mu_l),
        })?;

        let initial = raw.initial.clone().unwrap_or_default();
        validate_initial(&initial)?;

        let run = &raw.run;
        let t_final = run.t_final.unwrap_or(10.0);
        if !(t_final >= 0.0) {
            return Err(invalid("run.t_final", "must be nonnegative"));
        }
        let n_agents = run.n_agents.unwrap_or(10_000);
        if n_agents == 0 || n_agents % 2 != 0 {
            return Err(invalid("run.n_agents", "must be even and nonzero"));
        }
        let w_cells = run.w_cells.unwrap_or(400);
        if w_cells < 4 {
            return Err(invalid("run.w_cells", "need at least 4 opinion cells"));
        }
        let cfl = run.cfl.unwrap_or(0.95);
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(invalid("run.cfl", "must lie in (0, 1]"));
        }
        if let Some(dt) = run.dt {
            if !(dt > 0.0) {
                return Err(invalid("run.dt", "must be positive"));
            }
        }
        let (a_lo, a_hi) = (run.a_lo.unwrap_or(-4.0), run.a_hi.unwrap_or(6.0));
        if !(a_hi > a_lo) {
            return Err(invalid("run.a_lo/a_hi", "activity bounds must increase"));
        }

        let channels = raw.model.channels.unwrap_or(Channels::Agents);
        let leaders = raw.leaders.clone();
        if channels != Channels::Agents && leaders.is_none() {
            // leaders default to a point mass at mu_l
            // (kept implicit; MC materializes it at run time)
        }
        if let Some(LeadersSection::Beta { mu, kappa }) = &leaders {
            if !(kappa * (1.0 - mu) / 2.0 > 0.0 && kappa * (1.0 + mu) / 2.0 > 0.0) {
                return Err(invalid("leaders", "Beta leader law needs kappa > 0 and |mu| < 1"));
            }
        }
        if let Some(LeadersSection::Empirical { samples }) = &leaders {
            if samples.is_empty() || samples.iter().any(|z| !(-1.0..=1.0).contains(z)) {
                return Err(invalid(
                    "leaders.samples",
                    "need a nonempty list of opinions inside [-1, 1]",
                ));
            }
        }

        let control = raw.control.clone().unwrap_or_default();

        Ok(Scenario {
            model: raw.model.kind.unwrap_or(ModelKind::Uncontrolled),
            channels,
            solver: raw.model.solver.unwrap_or(SolverKind::FpH),
            params,
            initial,
            t_final,
            seed: run.seed.unwrap_or(0),
            record_every: run.record_every.unwrap_or(10).max(1),
            snapshot_times: run.snapshot_times.clone().unwrap_or_default(),
            n_agents,
            w_cells,
            a_cells_per_gamma: run.a_cells_per_gamma.unwrap_or(10).max(1),
            a_lo,
            a_hi,
            dt: run.dt,
            cfl,
            mean_mode: run
                .mean_mode
                .unwrap_or(MeanModeCfg::SelfConsistent)
                .into(),
            trajectories: run.trajectories.unwrap_or(8).max(1),
            leaders,
            require_effective: control.require_effective.unwrap_or(false),
            control_includes_leaders: control.include_leaders.unwrap_or(false),
            classify: raw.classify.clone().unwrap_or_default(),
            raw,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&self.raw).expect("config serializes")
    }

    /// The leader law the Monte Carlo engine sees; leader channels default
    /// to a point mass at mu_l.
    pub fn leader_distribution(&self) -> Option<LeaderDistribution> {
        if self.channels == Channels::Agents {
            return None;
        }
        Some(match &self.leaders {
            None => LeaderDistribution::PointMass { mu: self.params.mu_l },
            Some(LeadersSection::Point { mu }) => LeaderDistribution::PointMass { mu: *mu },
            Some(LeadersSection::Beta { mu, kappa }) => LeaderDistribution::Beta {
                mu: *mu,
                kappa: *kappa,
            },
            Some(LeadersSection::Empirical { samples }) => LeaderDistribution::Empirical {
                samples: samples.clone(),
            },
        })
    }

    /// Initial two-dimensional density on the scenario's grids.
    pub fn initial_grid2d(&self) -> Result<Grid2D, ConfigError> {
        let a = Grid1D::activity(self.params.gamma, self.a_lo, self.a_hi, self.a_cells_per_gamma)
            .map_err(|e| invalid("run.a_lo/a_hi", e.to_string()))?;
        let w = Grid1D::opinion(self.w_cells).map_err(|e| invalid("run.w_cells", e.to_string()))?;
        let mut f = Grid2D::new(a, w).map_err(|e| invalid("run", e.to_string()))?;
        match &self.initial {
            InitialSection::UniformBox {
                w_lo,
                w_hi,
                a_lo,
                a_hi,
            } => {
                f.fill_uniform_box(*a_lo, *a_hi, *w_lo, *w_hi)
                    .map_err(|e| invalid("initial", e.to_string()))?;
            }
            InitialSection::BetaProduct { w_b1, w_b2, a_lo, a_hi } => {
                let beta = crate::equilibria::BetaEquilibrium::new(*w_b1, *w_b2)
                    .map_err(|e| invalid("initial", e.to_string()))?;
                let mut ga = f.activity_axis().clone();
                ga.fill_uniform(*a_lo, *a_hi)
                    .map_err(|e| invalid("initial", e.to_string()))?;
                let w_axis = f.opinion_axis().clone();
                for row in 0..f.n_activity() {
                    for col in 0..f.n_opinion() {
                        let wmass = beta.mass_in(w_axis.edge(col), w_axis.edge(col + 1));
                        *f.value_mut(row, col) = ga.values()[row] * wmass / w_axis.step();
                    }
                }
            }
            InitialSection::PointMass { points } => {
                let total: f64 = points.iter().map(|(_, _, wt)| wt).sum();
                for (w_pt, a_pt, wt) in points {
                    let col = locate(&f.opinion_axis().clone(), *w_pt);
                    let row = locate(&f.activity_axis().clone(), *a_pt);
                    *f.value_mut(row, col) += wt / total / f.cell_area();
                }
            }
            InitialSection::Table { path, a_lo, a_hi } => {
                let (edges, values) = read_density_table(Path::new(path))?;
                let mut ga = f.activity_axis().clone();
                ga.fill_uniform(*a_lo, *a_hi)
                    .map_err(|e| invalid("initial", e.to_string()))?;
                let w_axis = f.opinion_axis().clone();
                let projected = project_piecewise_constant(&edges, &values, &w_axis);
                for row in 0..f.n_activity() {
                    for col in 0..f.n_opinion() {
                        *f.value_mut(row, col) = ga.values()[row] * projected[col];
                    }
                }
            }
        }
        f.normalize();
        Ok(f)
    }

    /// Initial opinion marginal.
    pub fn initial_opinion_grid(&self) -> Result<Grid1D, ConfigError> {
        Ok(self.initial_grid2d()?.opinion_marginal())
    }

    /// Initial activity marginal.
    pub fn initial_activity_grid(&self) -> Result<Grid1D, ConfigError> {
        Ok(self.initial_grid2d()?.activity_marginal())
    }

    /// Sample the initial condition into an ensemble.
    pub fn initial_ensemble(&self, seed: u64) -> Result<Ensemble, ConfigError> {
        let mut rng = StreamRng::at(seed, u64::MAX, 1);
        let n = self.n_agents;
        let agents: Vec<AgentState> = match &self.initial {
            InitialSection::UniformBox {
                w_lo,
                w_hi,
                a_lo,
                a_hi,
            } => (0..n)
                .map(|_| {
                    AgentState::new(
                        w_lo + (w_hi - w_lo) * rng.uniform(),
                        a_lo + (a_hi - a_lo) * rng.uniform(),
                    )
                })
                .collect(),
            InitialSection::BetaProduct { w_b1, w_b2, a_lo, a_hi } => {
                use rand_distr::Distribution;
                let dist = rand_distr::Beta::new(*w_b2, *w_b1)
                    .map_err(|_| invalid("initial", "Beta exponents must be positive"))?;
                (0..n)
                    .map(|_| {
                        AgentState::new(
                            2.0 * dist.sample(&mut rng) - 1.0,
                            a_lo + (a_hi - a_lo) * rng.uniform(),
                        )
                    })
                    .collect()
            }
            InitialSection::PointMass { points } => {
                let total: f64 = points.iter().map(|(_, _, wt)| wt).sum();
                (0..n)
                    .map(|_| {
                        let mut u = rng.uniform() * total;
                        for (w_pt, a_pt, wt) in points {
                            if u < *wt {
                                return AgentState::new(*w_pt, *a_pt);
                            }
                            u -= wt;
                        }
                        let last = points.last().unwrap();
                        AgentState::new(last.0, last.1)
                    })
                    .collect()
            }
            InitialSection::Table { path, a_lo, a_hi } => {
                let (edges, values) = read_density_table(Path::new(path))?;
                let masses: Vec<f64> = values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (edges[j + 1] - edges[j]))
                    .collect();
                let total: f64 = masses.iter().sum();
                (0..n)
                    .map(|_| {
                        let mut u = rng.uniform() * total;
                        let mut w = edges[0];
                        for (j, m) in masses.iter().enumerate() {
                            if u < *m {
                                w = edges[j] + (edges[j + 1] - edges[j]) * (u / m);
                                break;
                            }
                            u -= m;
                        }
                        AgentState::new(w, a_lo + (a_hi - a_lo) * rng.uniform())
                    })
                    .collect()
            }
        };
        Ensemble::new(agents, seed).map_err(|e| invalid("run.n_agents", e.to_string()))
    }
}

fn validate_initial(initial: &InitialSection) -> Result<(), ConfigError> {
    match initial {
        InitialSection::UniformBox { w_lo, w_hi, a_lo, a_hi } => {
            if !(w_lo < w_hi && *w_lo >= -1.0 && *w_hi <= 1.0) {
                return Err(invalid("initial.w_lo/w_hi", "need -1 <= w_lo < w_hi <= 1"));
            }
            if !(a_lo < a_hi) {
                return Err(invalid("initial.a_lo/a_hi", "activity bounds must increase"));
            }
        }
        InitialSection::BetaProduct { w_b1, w_b2, a_lo, a_hi } => {
            if !(*w_b1 > 0.0 && *w_b2 > 0.0) {
                return Err(invalid("initial.w_b1/w_b2", "Beta exponents must be positive"));
            }
            if !(a_lo < a_hi) {
                return Err(invalid("initial.a_lo/a_hi", "activity bounds must increase"));
            }
        }
        InitialSection::PointMass { points } => {
            if points.is_empty() {
                return Err(invalid("initial.points", "need at least one point"));
            }
            for (w, _, wt) in points {
                if !(-1.0..=1.0).contains(w) {
                    return Err(invalid("initial.points", "opinions must lie in [-1, 1]"));
                }
                if !(*wt > 0.0) {
                    return Err(invalid("initial.points", "weights must be positive"));
                }
            }
        }
        InitialSection::Table { .. } => {}
    }
    Ok(())
}

fn locate(grid: &Grid1D, x: f64) -> usize {
    let j = ((x - grid.lo()) / grid.step()).floor() as i64;
    j.clamp(0, grid.len() as i64 - 1) as usize
}

/// Read a `w,density` CSV table; returns (edges, values) of a piecewise
/// constant density on uniform cells centered at the listed points.
fn read_density_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let mut centers = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("w,") {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<f64, ConfigError> {
            s.and_then(|x| x.trim().parse::<f64>().ok()).ok_or_else(|| {
                invalid(
                    "initial.path",
                    format!("line {}: expected `w,density`", lineno + 1),
                )
            })
        };
        centers.push(parse(parts.next())?);
        values.push(parse(parts.next())?);
    }
    if centers.len() < 2 {
        return Err(invalid("initial.path", "table needs at least two rows"));
    }
    let step = centers[1] - centers[0];
    if !(step > 0.0) {
        return Err(invalid("initial.path", "table centers must increase"));
    }
    let mut edges = Vec::with_capacity(centers.len() + 1);
    edges.push(centers[0] - 0.5 * step);
    for c in &centers {
        edges.push(c + 0.5 * step);
    }
    Ok((edges, values))
}

/// Exact overlap projection of a piecewise-constant density onto a grid.
fn project_piecewise_constant(edges: &[f64], values: &[f64], grid: &Grid1D) -> Vec<f64> {
    (0..grid.len())
        .map(|j| {
            let (gl, gr) = (grid.edge(j), grid.edge(j + 1));
            let mut mass = 0.0;
            for (k, v) in values.iter().enumerate() {
                let overlap = (edges[k + 1].min(gr) - edges[k].max(gl)).max(0.0);
                mass += v * overlap;
            }
            mass / grid.step()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn minimal_config_fills_defaults() {
        let sc = Scenario::from_toml_str("").unwrap();
        assert_eq!(sc.model, ModelKind::Uncontrolled);
        assert_eq!(sc.channels, Channels::Agents);
        assert_eq!(sc.solver, SolverKind::FpH);
        // case II fade from the zero-mean choice
        assert_relative_eq!(sc.params.a_p, 0.45);
        assert_eq!(
            crate::model::classify_fade(sc.params.a_p, sc.params.omega_p, sc.params.eps_floor)
                .unwrap(),
            crate::model::FadeRegime::CaseII
        );
    }

    #[test]
    fn violated_constraint_is_named() {
        let err = Scenario::from_toml_str("[params]\nomega_p = 0.97\n").unwrap_err();
        assert!(err.to_string().contains("omega_p"), "got {err}");
        let err = Scenario::from_toml_str("[run]\nn_agents = 7\n").unwrap_err();
        assert!(err.to_string().contains("n_agents"), "got {err}");
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = Scenario::from_toml_str("[params]\nomega_q = 0.5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("omega_q") || msg.contains("unknown field"), "got {msg}");
    }

    #[test]
    fn round_trip_is_identity() {
        let text = r#"
[model]
kind = "controlled"
channels = "both"
solver = "mc"

[params]
lambda_p = 0.4
omega_p = 0.8
eps_floor = 0.05
a_p = 0.07

[initial]
kind = "uniform-box"
w_lo = -0.7
w_hi = 0.3
a_lo = 1.2
a_hi = 2.2

[run]
t_final = 5.0
seed = 99
n_agents = 1000

[leaders]
kind = "point"
mu = 0.3

[control]
require_effective = true
"#;
        let sc = Scenario::from_toml_str(text).unwrap();
        let serialized = sc.to_toml_string();
        let sc2 = Scenario::from_toml_str(&serialized).unwrap();
        assert_eq!(sc.raw, sc2.raw);
        assert_eq!(sc.params, sc2.params);
        assert!(sc.require_effective);
    }

    #[test]
    fn initial_builders_are_consistent() {
        let text = r#"
[initial]
kind = "uniform-box"
w_lo = -0.5
w_hi = 0.5
a_lo = 1.0
a_hi = 2.0

[run]
n_agents = 20000
w_cells = 100
"#;
        let sc = Scenario::from_toml_str(text).unwrap();
        let f = sc.initial_grid2d().unwrap();
        assert_relative_eq!(f.mass(), 1.0, epsilon = 1e-12);
        let h = sc.initial_opinion_grid().unwrap();
        assert_relative_eq!(h.mean(), 0.0, epsilon = 1e-12);
        let ens = sc.initial_ensemble(7).unwrap();
        assert_eq!(ens.len(), 20000);
        assert!((ens.mean_opinion() - 0.0).abs() < 0.02);
        assert!(ens.agents.iter().all(|a| (1.0..=2.0).contains(&a.activity)));
    }

    #[test]
    fn beta_product_sampling_matches_grid() {
        let text = r#"
[initial]
kind = "beta-product"
w_b1 = 6.0
w_b2 = 10.0
a_lo = 1.0
a_hi = 2.0

[run]
n_agents = 50000
"#;
        let sc = Scenario::from_toml_str(text).unwrap();
        let h = sc.initial_opinion_grid().unwrap();
        let ens = sc.initial_ensemble(3).unwrap();
        // Beta(b1=6, b2=10) mean is (b2-b1)/(b1+b2) = 0.25
        assert_relative_eq!(h.mean(), 0.25, epsilon = 1e-9);
        assert!((ens.mean_opinion() - 0.25).abs() < 0.01);
    }
}
