//! Scenario orchestration: drive the configured solver, write the run
//! directory (config copy, macros/diagnostics CSV, snapshot CSVs, JSON
//! summary), and map failures to stable exit codes.
//!
//! Output layout under `--out`:
//!
//! ```text
//! config.toml          exact copy of the scenario
//! macros.csv           t,rho_a,rho_u,rho_i,m_w,m_A,rho_bar,m_bar,H,D,I_H,L1
//! snapshots/*.csv      cell centers and densities (w,density / A,density /
//!                      A,w,density)
//! summary.json         regime report, feasibility verdict, fitted rates,
//!                      conservation residuals
//! ```
//!
//! Columns that a solver cannot produce (e.g. entropy functionals of an
//! activity-only run) are written as NaN. H, D and I_H are measured against
//! the local equilibrium at the current mean, L1 against the global one.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::{Channels, ConfigError, ModelKind, Scenario, SolverKind};
use crate::control::{self, ControlFeasibility, ControlParams, Verdict};
use crate::diagnostics::{
    self, fit_rate, FitModel, Macros, RateFit, Reference,
};
use crate::equilibria::{
    self, BetaEquilibrium, EquilibriumChannel, RegimeReport,
};
use crate::fp::chang_cooper::{advance_h, AdvanceConfig, ChannelMode};
use crate::fp::grid::Grid1D;
use crate::fp::split::{advance_f, SplitConfig};
use crate::fp::transport::{characteristics_g, run_transport, TransportConfig};
use crate::fp::FpError;
use crate::mc::{run_mc, McConfig};
use crate::model::{InteractionKernels, ModelParams};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("infeasible control request: {0}")]
    InfeasibleControl(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunnerError {
    /// 0 success, 2 config error, 3 solver error, 4 infeasible control.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 2,
            RunnerError::Solver(_) | RunnerError::Io(_) => 3,
            RunnerError::InfeasibleControl(_) => 4,
        }
    }
}

fn solver_err(step: usize, e: FpError) -> RunnerError {
    match e {
        FpError::ControlNotAdmissible => RunnerError::InfeasibleControl(e.to_string()),
        other => RunnerError::Solver(format!("step {step}: {other}")),
    }
}

/// One row of the macros/diagnostics CSV.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub rho_a: f64,
    pub rho_u: f64,
    pub rho_i: f64,
    pub m_w: f64,
    pub m_a: f64,
    pub rho_bar: f64,
    pub m_bar: f64,
    pub entropy: f64,
    pub hellinger: f64,
    pub entropy_production: f64,
    pub l1: f64,
}

impl DiagnosticsRow {
    fn from_macros(m: &Macros) -> Self {
        DiagnosticsRow {
            t: m.t,
            rho_a: m.rho_a,
            rho_u: m.rho_u,
            rho_i: m.rho_i,
            m_w: m.m_w,
            m_a: m.m_a,
            rho_bar: m.rho_bar,
            m_bar: m.m_bar,
            entropy: f64::NAN,
            hellinger: f64::NAN,
            entropy_production: f64::NAN,
            l1: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct FittedRates {
    /// Exponential rate of |m_w(t) - mu_l| (leader channels).
    pub mean_relaxation: Option<RateFit>,
    /// Power-law exponent of the L1 distance to the global equilibrium.
    pub l1_power: Option<RateFit>,
    /// Exponential rate of |m_A(t) - A_c*| (controlled activity runs).
    pub activity_contraction: Option<RateFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Conservation {
    /// max |mass(t) - mass(0)| / mass(0) over the run.
    pub relative_mass_drift: f64,
    /// Agents at start and end (Monte Carlo runs).
    pub population: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub solver: String,
    pub model: String,
    pub channels: String,
    pub seed: u64,
    pub t_final: f64,
    pub conservation: Conservation,
    pub regime: Option<RegimeReport>,
    pub feasibility: Option<ControlFeasibility>,
    pub rates: FittedRates,
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.17e}")
    }
}

const MACROS_HEADER: &str = "t,rho_a,rho_u,rho_i,m_w,m_A,rho_bar,m_bar,H,D,I_H,L1";

fn write_macros_csv(path: &Path, rows: &[DiagnosticsRow]) -> Result<(), RunnerError> {
    let mut out = String::new();
    out.push_str(MACROS_HEADER);
    out.push('\n');
    for r in rows {
        let cols = [
            r.t,
            r.rho_a,
            r.rho_u,
            r.rho_i,
            r.m_w,
            r.m_a,
            r.rho_bar,
            r.m_bar,
            r.entropy,
            r.hellinger,
            r.entropy_production,
            r.l1,
        ];
        let line: Vec<String> = cols.iter().map(|&c| fmt_f64(c)).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_grid_csv(path: &Path, label: &str, grid: &Grid1D) -> Result<(), RunnerError> {
    let mut out = String::new();
    writeln!(out, "{label},density").unwrap();
    for j in 0..grid.len() {
        writeln!(out, "{},{}", fmt_f64(grid.center(j)), fmt_f64(grid.values()[j])).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_grid2d_csv(path: &Path, f: &crate::fp::grid::Grid2D) -> Result<(), RunnerError> {
    let mut out = String::new();
    writeln!(out, "A,w,density").unwrap();
    for row in 0..f.n_activity() {
        for col in 0..f.n_opinion() {
            writeln!(
                out,
                "{},{},{}",
                fmt_f64(f.activity_axis().center(row)),
                fmt_f64(f.opinion_axis().center(col)),
                fmt_f64(f.value(row, col))
            )
            .unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}

struct RunDir {
    root: PathBuf,
    snapshots: PathBuf,
}

fn prepare_dir(out: &Path, scenario: &Scenario) -> Result<RunDir, RunnerError> {
    let snapshots = out.join("snapshots");
    fs::create_dir_all(&snapshots)?;
    fs::write(out.join("config.toml"), scenario.to_toml_string())?;
    Ok(RunDir {
        root: out.to_path_buf(),
        snapshots,
    })
}

fn channel_mode(ch: Channels) -> ChannelMode {
    match ch {
        Channels::Agents => ChannelMode::AgentsOnly,
        Channels::Leaders => ChannelMode::LeadersOnly,
        Channels::Both => ChannelMode::Both,
    }
}

fn equilibrium_channel(ch: Channels, m_in: f64) -> EquilibriumChannel {
    match ch {
        Channels::Agents => EquilibriumChannel::AgentsOnly { m_in },
        Channels::Leaders => EquilibriumChannel::LeadersOnly,
        Channels::Both => EquilibriumChannel::Both,
    }
}

/// Local reference for the entropy columns: the time-dependent equilibrium
/// at the measured mean for both-channel runs, the stationary one otherwise.
fn local_reference(
    params: &ModelParams,
    ch: Channels,
    m_in: f64,
    mean_now: f64,
) -> Option<BetaEquilibrium> {
    match ch {
        Channels::Both => equilibria::local_equilibrium_h(mean_now, params).ok(),
        other => equilibria::global_equilibrium_h(params, equilibrium_channel(other, m_in)).ok(),
    }
}

fn entropy_columns(
    h: &Grid1D,
    local: Option<&BetaEquilibrium>,
    global: Option<&BetaEquilibrium>,
) -> (f64, f64, f64, f64) {
    let against = |eq: Option<&BetaEquilibrium>,
                   f: &dyn Fn(&BetaEquilibrium) -> Option<f64>| match eq {
        Some(eq) => f(eq).unwrap_or(f64::NAN),
        None => f64::NAN,
    };
    (
        against(local, &|eq| diagnostics::relative_entropy(h, Reference::Beta(eq)).ok()),
        against(local, &|eq| diagnostics::hellinger(h, Reference::Beta(eq)).ok()),
        against(local, &|eq| diagnostics::entropy_production(h, Reference::Beta(eq)).ok()),
        against(global, &|eq| diagnostics::l1_distance(h, Reference::Beta(eq)).ok()),
    )
}

/// Execute the scenario and write the artifact bundle into `out`.
pub fn run(scenario: &Scenario, out: &Path, quiet: bool) -> Result<Summary, RunnerError> {
    let dir = prepare_dir(out, scenario)?;
    let controlled = scenario.model == ModelKind::Controlled;

    if scenario.require_effective {
        let cp = control_params(scenario);
        let report = control::special_case_verdict(&cp);
        if report.verdict != Verdict::Effective {
            return Err(RunnerError::InfeasibleControl(format!(
                "require_effective is set but the verdict is {:?}: {}",
                report.verdict, report.explanation
            )));
        }
    }

    let summary = match scenario.solver {
        SolverKind::FpH => run_fp_h(scenario, &dir)?,
        SolverKind::FpG => run_fp_g(scenario, controlled, &dir)?,
        SolverKind::Fp2d => run_fp_2d(scenario, controlled, &dir)?,
        SolverKind::Mc => run_mc_scenario(scenario, controlled, &dir)?,
        SolverKind::Characteristics => run_characteristics(scenario, &dir)?,
    };

    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(dir.root.join("summary.json"), json)?;
    if !quiet {
        let mut stdout = std::io::stdout();
        let _ = writeln!(
            stdout,
            "run complete: solver={} mass_drift={:.3e} out={}",
            summary.solver,
            summary.conservation.relative_mass_drift,
            dir.root.display()
        );
    }
    Ok(summary)
}

fn control_params(scenario: &Scenario) -> ControlParams {
    if scenario.control_includes_leaders {
        ControlParams::with_leaders(&scenario.params)
    } else {
        ControlParams::agents_only(&scenario.params)
    }
}

fn base_summary(scenario: &Scenario) -> Summary {
    Summary {
        solver: format!("{:?}", scenario.solver),
        model: format!("{:?}", scenario.model),
        channels: format!("{:?}", scenario.channels),
        seed: scenario.seed,
        t_final: scenario.t_final,
        conservation: Conservation {
            relative_mass_drift: 0.0,
            population: None,
        },
        regime: None,
        feasibility: None,
        rates: FittedRates::default(),
    }
}

fn regime_of_initial(scenario: &Scenario) -> Option<RegimeReport> {
    let m = if let (Some(rho), Some(mb)) = (scenario.classify.rho_bar, scenario.classify.m_bar) {
        (rho, mb)
    } else {
        let f = scenario.initial_grid2d().ok()?;
        let mac = diagnostics::macros_of_grid2d(&f, &scenario.params, 0.0);
        (mac.rho_bar, mac.m_bar)
    };
    equilibria::classify_regime(m.0, m.1, &scenario.params).ok()
}

fn run_fp_h(scenario: &Scenario, dir: &RunDir) -> Result<Summary, RunnerError> {
    let params = &scenario.params;
    let h0 = scenario.initial_opinion_grid()?;
    let m_in = h0.mean();
    let cfg = AdvanceConfig {
        mode: channel_mode(scenario.channels),
        mean_mode: scenario.mean_mode,
        t_final: scenario.t_final,
        dt: scenario.dt,
        snapshot_every: scenario.record_every,
    };
    let traj = advance_h(&h0, params, &cfg).map_err(|e| solver_err(0, e))?;

    let global =
        equilibria::global_equilibrium_h(params, equilibrium_channel(scenario.channels, m_in)).ok();
    let mut rows = Vec::new();
    let prob = params.omega_p + params.eps_floor;
    for (t, h) in &traj.snapshots {
        let mean = h.mean();
        let local = local_reference(params, scenario.channels, m_in, mean);
        let (entropy, hell, prod, l1) = entropy_columns(h, local.as_ref(), global.as_ref());
        rows.push(DiagnosticsRow {
            t: *t,
            rho_a: 1.0,
            rho_u: 0.0,
            rho_i: 0.0,
            m_w: mean,
            m_a: f64::NAN,
            rho_bar: prob * h.mass(),
            m_bar: prob * h.moment1(),
            entropy,
            hellinger: hell,
            entropy_production: prod,
            l1,
        });
    }
    write_macros_csv(&dir.root.join("macros.csv"), &rows)?;
    for (idx, (t, h)) in traj.snapshots.iter().enumerate() {
        write_grid_csv(
            &dir.snapshots.join(format!("opinion_{idx:04}_t{t:.6}.csv")),
            "w",
            h,
        )?;
    }

    let mut summary = base_summary(scenario);
    summary.conservation.relative_mass_drift = traj.mass_drift;
    summary.regime = regime_of_initial(scenario);
    if scenario.channels != Channels::Agents {
        let series: Vec<(f64, f64)> = traj
            .times
            .iter()
            .zip(&traj.means)
            .map(|(&t, &m)| (t, (m - params.mu_l).abs()))
            .filter(|(_, v)| *v > 1e-13)
            .collect();
        summary.rates.mean_relaxation = fit_rate(&series, FitModel::Exponential).ok();
    }
    let l1_series: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.t > 0.0 && r.l1.is_finite() && r.l1 > 1e-13)
        .map(|r| (r.t, r.l1))
        .collect();
    summary.rates.l1_power = fit_rate(&l1_series, FitModel::Power).ok();
    Ok(summary)
}

fn run_fp_g(scenario: &Scenario, controlled: bool, dir: &RunDir) -> Result<Summary, RunnerError> {
    let params = &scenario.params;
    let g0 = scenario.initial_activity_grid()?;
    let cfg = TransportConfig {
        controlled,
        t_final: scenario.t_final,
        cfl: scenario.cfl,
        record_every: scenario.record_every,
        snapshot_every: scenario.record_every * 10,
        support_threshold: 1e-12,
    };
    let run = run_transport(&g0, params, &cfg).map_err(|e| solver_err(0, e))?;

    let rows: Vec<DiagnosticsRow> = run
        .samples
        .iter()
        .map(|s| DiagnosticsRow {
            t: s.t,
            rho_a: s.rho_a,
            rho_u: s.rho_u,
            rho_i: s.rho_i,
            m_w: f64::NAN,
            m_a: s.mean,
            rho_bar: f64::NAN,
            m_bar: f64::NAN,
            entropy: f64::NAN,
            hellinger: f64::NAN,
            entropy_production: f64::NAN,
            l1: f64::NAN,
        })
        .collect();
    write_macros_csv(&dir.root.join("macros.csv"), &rows)?;
    for (idx, (t, g)) in run.snapshots.iter().enumerate() {
        write_grid_csv(
            &dir.snapshots.join(format!("activity_{idx:04}_t{t:.6}.csv")),
            "A",
            g,
        )?;
    }

    let mut summary = base_summary(scenario);
    summary.conservation.relative_mass_drift = run.mass_drift;
    if controlled {
        let cp = control_params(scenario);
        summary.feasibility = Some(control::special_case_verdict(&cp));
        let (_, a_c_star) = control::fixed_points(&cp);
        let series: Vec<(f64, f64)> = run
            .samples
            .iter()
            .map(|s| (s.t, (s.mean - a_c_star).abs()))
            .filter(|(_, v)| *v > 2.0 * run.g.step())
            .collect();
        summary.rates.activity_contraction = fit_rate(&series, FitModel::Exponential).ok();
    }
    Ok(summary)
}

fn run_fp_2d(scenario: &Scenario, controlled: bool, dir: &RunDir) -> Result<Summary, RunnerError> {
    let params = &scenario.params;
    let kernels = InteractionKernels::default();
    let f0 = scenario.initial_grid2d()?;
    let m_in = f0.opinion_marginal().mean();
    let dt = scenario.dt.unwrap_or_else(|| {
        // drift-limited default: 0.25 min(dw/max|drift|, dA/max|V|)
        let dw = f0.opinion_axis().step();
        let da = f0.activity_axis().step();
        let drift = params.agent_mean_rate() + params.leader_mean_rate();
        let vmax = [f0.activity_axis().lo(), f0.activity_axis().hi(), params.gamma]
            .iter()
            .map(|&a| crate::fp::transport::activity_velocity(a, params, controlled).abs())
            .fold(1e-12, f64::max);
        0.25 * (dw / drift.max(1e-12)).min(da / vmax)
    });
    let cfg = SplitConfig {
        mode: channel_mode(scenario.channels),
        controlled,
        t_final: scenario.t_final,
        dt,
        snapshot_every: scenario.record_every,
    };
    let run = advance_f(&f0, params, &kernels, &cfg).map_err(|e| solver_err(0, e))?;

    let global =
        equilibria::global_equilibrium_h(params, equilibrium_channel(scenario.channels, m_in)).ok();
    let mut rows = Vec::new();
    for (t, f) in &run.snapshots {
        let idx = (t / dt).round() as usize;
        let m = run.macros[idx.min(run.macros.len() - 1)];
        let h = f.opinion_marginal();
        let local = local_reference(params, scenario.channels, m_in, m.m_w);
        let (entropy, hell, prod, l1) = entropy_columns(&h, local.as_ref(), global.as_ref());
        rows.push(DiagnosticsRow {
            entropy,
            hellinger: hell,
            entropy_production: prod,
            l1,
            ..DiagnosticsRow::from_macros(&m)
        });
    }
    write_macros_csv(&dir.root.join("macros.csv"), &rows)?;
    for (idx, (t, f)) in run.snapshots.iter().enumerate() {
        write_grid2d_csv(&dir.snapshots.join(format!("density_{idx:04}_t{t:.6}.csv")), f)?;
    }

    let mut summary = base_summary(scenario);
    summary.conservation.relative_mass_drift = run.mass_drift;
    summary.regime = regime_of_initial(scenario);
    if controlled {
        summary.feasibility = Some(control::special_case_verdict(&control_params(scenario)));
    }
    if scenario.channels != Channels::Agents {
        let series: Vec<(f64, f64)> = run
            .macros
            .iter()
            .map(|m| (m.t, (m.m_w - params.mu_l).abs()))
            .filter(|(_, v)| *v > 1e-13)
            .collect();
        summary.rates.mean_relaxation = fit_rate(&series, FitModel::Exponential).ok();
    }
    Ok(summary)
}

fn run_mc_scenario(
    scenario: &Scenario,
    controlled: bool,
    dir: &RunDir,
) -> Result<Summary, RunnerError> {
    let params = &scenario.params;
    let kernels = InteractionKernels::default();
    let ens = scenario.initial_ensemble(scenario.seed)?;
    let n0 = ens.len();
    let steps = (scenario.t_final / params.qi_scale).round() as u64;
    let record = (scenario.record_every as u64).max(1);
    let snapshot_steps: Vec<u64> = (0..=steps)
        .filter(|k| k % record == 0 || *k == steps)
        .collect();
    let cfg = McConfig {
        steps,
        record_every: record,
        snapshot_steps,
        opinion_bins: scenario.w_cells,
        activity_bins_per_gamma: scenario.a_cells_per_gamma,
        controlled,
        leaders: scenario.leader_distribution(),
    };
    let run = run_mc(ens, params, &kernels, &cfg)
        .map_err(|e| RunnerError::Solver(format!("monte carlo: {e}")))?;

    let m_in = run.series[0].m_w;
    let global =
        equilibria::global_equilibrium_h(params, equilibrium_channel(scenario.channels, m_in)).ok();
    let mut rows = Vec::new();
    for (m, snap) in run.series.iter().zip(&run.snapshots) {
        let local = local_reference(params, scenario.channels, m_in, m.m_w);
        let (entropy, hell, prod, l1) =
            entropy_columns(&snap.opinion, local.as_ref(), global.as_ref());
        rows.push(DiagnosticsRow {
            entropy,
            hellinger: hell,
            entropy_production: prod,
            l1,
            ..DiagnosticsRow::from_macros(m)
        });
    }
    write_macros_csv(&dir.root.join("macros.csv"), &rows)?;
    for (idx, snap) in run.snapshots.iter().enumerate() {
        if idx % 10 == 0 || idx + 1 == run.snapshots.len() {
            write_grid_csv(
                &dir.snapshots
                    .join(format!("opinion_{idx:04}_t{:.6}.csv", snap.time)),
                "w",
                &snap.opinion,
            )?;
            write_grid_csv(
                &dir.snapshots
                    .join(format!("activity_{idx:04}_t{:.6}.csv", snap.time)),
                "A",
                &snap.activity,
            )?;
        }
    }

    let mut summary = base_summary(scenario);
    summary.conservation.population = Some((n0, run.ensemble.len()));
    summary.conservation.relative_mass_drift =
        (run.ensemble.len() as f64 - n0 as f64).abs() / n0 as f64;
    summary.regime = regime_of_initial(scenario);
    if controlled {
        summary.feasibility = Some(control::special_case_verdict(&control_params(scenario)));
    }
    if scenario.channels != Channels::Agents {
        let series: Vec<(f64, f64)> = run
            .series
            .iter()
            .map(|m| (m.t, (m.m_w - params.mu_l).abs()))
            .filter(|(_, v)| *v > 1e-6)
            .collect();
        summary.rates.mean_relaxation = fit_rate(&series, FitModel::Exponential).ok();
    }
    Ok(summary)
}

fn run_characteristics(scenario: &Scenario, dir: &RunDir) -> Result<Summary, RunnerError> {
    let cp = control_params(scenario);
    if !control::is_admissible(&cp) {
        return Err(RunnerError::InfeasibleControl(
            "characteristics need an admissible control (both fluxes positive)".into(),
        ));
    }
    let k = scenario.trajectories;
    let starts: Vec<f64> = (0..k)
        .map(|i| scenario.a_lo + (scenario.a_hi - scenario.a_lo) * i as f64 / (k - 1).max(1) as f64)
        .collect();
    let n_times = 400;
    let dt = scenario.t_final / n_times as f64;

    let mut out = String::new();
    out.push('t');
    for (i, a0) in starts.iter().enumerate() {
        write!(out, ",a{i}_from_{a0:.3}").unwrap();
    }
    out.push('\n');
    let mut first_series = Vec::new();
    let (_, a_c_star) = control::fixed_points(&cp);
    for step in 0..=n_times {
        let t = step as f64 * dt;
        write!(out, "{}", fmt_f64(t)).unwrap();
        for (i, &a0) in starts.iter().enumerate() {
            let a = characteristics_g(a0, &cp, t).map_err(|e| solver_err(step, e))?;
            write!(out, ",{}", fmt_f64(a)).unwrap();
            if i == 0 {
                first_series.push((t, (a - a_c_star).abs()));
            }
        }
        out.push('\n');
    }
    fs::write(dir.root.join("trajectories.csv"), out)?;

    let mut summary = base_summary(scenario);
    summary.feasibility = Some(control::special_case_verdict(&cp));
    let tail: Vec<(f64, f64)> = first_series
        .into_iter()
        .filter(|(_, v)| *v > 1e-12)
        .collect();
    summary.rates.activity_contraction = fit_rate(&tail, FitModel::Exponential).ok();
    Ok(summary)
}

/// `classify` subcommand: regime report plus per-slice equilibrium density
/// tables at the inactive and active weights.
pub fn classify(scenario: &Scenario, out: &Path, quiet: bool) -> Result<RegimeReport, RunnerError> {
    let dir = prepare_dir(out, scenario)?;
    let params = &scenario.params;
    let (rho_bar, m_bar) =
        if let (Some(r), Some(m)) = (scenario.classify.rho_bar, scenario.classify.m_bar) {
            (r, m)
        } else {
            let f = scenario.initial_grid2d()?;
            let mac = diagnostics::macros_of_grid2d(&f, params, 0.0);
            (mac.rho_bar, mac.m_bar)
        };
    let report = equilibria::classify_regime(rho_bar, m_bar, params)
        .map_err(|e| RunnerError::Solver(e.to_string()))?;

    let cells = scenario.classify.table_cells.unwrap_or(400);
    for (label, weight) in [("inactive", 0.0), ("active", 1.0)] {
        let (b1, b2) = equilibria::partial_equilibrium(
            weight,
            rho_bar,
            m_bar,
            params,
            equilibria::EquilibriumSource::Agents,
        )
        .map_err(|e| RunnerError::Solver(e.to_string()))?;
        if b1 > 0.0 && b2 > 0.0 {
            let eq = BetaEquilibrium::new(b1, b2).expect("positive exponents");
            let mut g = Grid1D::opinion(cells).map_err(|e| RunnerError::Solver(e.to_string()))?;
            let step = g.step();
            let values: Vec<f64> = (0..cells)
                .map(|j| eq.mass_in(g.edge(j), g.edge(j + 1)) / step)
                .collect();
            g.set_values(values).expect("layout");
            write_grid_csv(&dir.snapshots.join(format!("equilibrium_{label}.csv")), "w", &g)?;
        }
    }

    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(dir.root.join("regime.json"), json)?;
    if !quiet {
        println!(
            "inactive: {:?}, active: {:?}, A_* = {:?}",
            report.regime_inactive, report.regime_active, report.a_star
        );
    }
    Ok(report)
}

/// `feasibility` subcommand.
pub fn feasibility(
    scenario: &Scenario,
    out: &Path,
    quiet: bool,
) -> Result<ControlFeasibility, RunnerError> {
    let dir = prepare_dir(out, scenario)?;
    let cp = control_params(scenario);
    let report = control::special_case_verdict(&cp);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(dir.root.join("feasibility.json"), json)?;
    if !quiet {
        println!("verdict: {:?} (C_i = {}, C_a = {})", report.verdict, report.c_i, report.c_a);
    }
    if scenario.require_effective && report.verdict != Verdict::Effective {
        return Err(RunnerError::InfeasibleControl(report.explanation));
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumOutput {
    pub b1: f64,
    pub b2: f64,
    pub normalization: f64,
    pub mean: f64,
    pub regularity: equilibria::RegularityReport,
}

/// `equilibrium` subcommand: the global equilibrium of the configured
/// channel plus the regularity indices; emits a density table.
pub fn equilibrium(
    scenario: &Scenario,
    out: &Path,
    quiet: bool,
) -> Result<EquilibriumOutput, RunnerError> {
    let dir = prepare_dir(out, scenario)?;
    let params = &scenario.params;
    let m_in = scenario.initial_opinion_grid()?.mean();
    let channel = equilibrium_channel(scenario.channels, m_in);
    let eq = equilibria::global_equilibrium_h(params, channel)
        .map_err(|e| RunnerError::Solver(e.to_string()))?;
    let cells = scenario.classify.table_cells.unwrap_or(400);
    let mut g = Grid1D::opinion(cells).map_err(|e| RunnerError::Solver(e.to_string()))?;
    let step = g.step();
    let values: Vec<f64> = (0..cells)
        .map(|j| eq.mass_in(g.edge(j), g.edge(j + 1)) / step)
        .collect();
    g.set_values(values).expect("layout");
    write_grid_csv(&dir.snapshots.join("equilibrium_global.csv"), "w", &g)?;

    let output = EquilibriumOutput {
        b1: eq.b1,
        b2: eq.b2,
        normalization: eq.normalization(),
        mean: eq.mean(),
        regularity: equilibria::regularity_indices(params, m_in),
    };
    let json = serde_json::to_string_pretty(&output).expect("serializes");
    fs::write(dir.root.join("equilibrium.json"), json)?;
    if !quiet {
        println!("b1 = {}, b2 = {}, mean = {}", output.b1, output.b2, output.mean);
    }
    Ok(output)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareOutput {
    /// (time, L1 distance between the binned MC opinion marginal and the
    /// fp-h solution aggregated to the same bins).
    pub l1_by_time: Vec<(f64, f64)>,
    pub bins: usize,
    pub n_agents: usize,
    pub qi_scale: f64,
}

/// `compare` subcommand: run the Monte Carlo and fp-h legs on matched
/// initial data and report the L1 distance of the opinion marginals at the
/// configured snapshot times.
pub fn compare(scenario: &Scenario, out: &Path, quiet: bool) -> Result<CompareOutput, RunnerError> {
    let dir = prepare_dir(out, scenario)?;
    let params = &scenario.params;
    let kernels = InteractionKernels::default();
    let times = if scenario.snapshot_times.is_empty() {
        vec![scenario.t_final]
    } else {
        scenario.snapshot_times.clone()
    };
    let bins = 50usize.min(scenario.w_cells);

    // Monte Carlo leg
    let ens = scenario.initial_ensemble(scenario.seed)?;
    let n_agents = ens.len();
    let steps = (scenario.t_final / params.qi_scale).round() as u64;
    let snapshot_steps: Vec<u64> = times
        .iter()
        .map(|t| (t / params.qi_scale).round() as u64)
        .collect();
    let cfg = McConfig {
        steps,
        record_every: steps.max(1),
        snapshot_steps: snapshot_steps.clone(),
        opinion_bins: bins,
        activity_bins_per_gamma: scenario.a_cells_per_gamma,
        controlled: scenario.model == ModelKind::Controlled,
        leaders: scenario.leader_distribution(),
    };
    let mc_run = run_mc(ens, params, &kernels, &cfg)
        .map_err(|e| RunnerError::Solver(format!("monte carlo leg: {e}")))?;

    // fp-h leg on matched initial data
    let h0 = scenario.initial_opinion_grid()?;
    let dt = scenario.dt.unwrap_or(1e-3);
    let adv = AdvanceConfig {
        mode: channel_mode(scenario.channels),
        mean_mode: scenario.mean_mode,
        t_final: scenario.t_final,
        dt: Some(dt),
        snapshot_every: 1,
    };
    let traj = advance_h(&h0, params, &adv).map_err(|e| solver_err(0, e))?;

    let mut l1_by_time = Vec::new();
    for (snap, &t) in mc_run.snapshots.iter().zip(&times) {
        // nearest recorded fp state
        let fp = traj
            .snapshots
            .iter()
            .min_by(|a, b| {
                (a.0 - t).abs().partial_cmp(&(b.0 - t).abs()).unwrap()
            })
            .map(|(_, h)| h)
            .expect("nonempty trajectory");
        // aggregate both to the coarse bins by exact overlap masses
        let coarse = &snap.opinion;
        let mut l1 = 0.0;
        for j in 0..coarse.len() {
            let (lo, hi) = (coarse.edge(j), coarse.edge(j + 1));
            let mc_mass = coarse.values()[j] * coarse.step();
            let fp_mass = fp.mass_in(lo, hi);
            l1 += (mc_mass - fp_mass).abs();
        }
        l1_by_time.push((t, l1));
        write_grid_csv(
            &dir.snapshots.join(format!("mc_opinion_t{t:.6}.csv")),
            "w",
            &snap.opinion,
        )?;
        write_grid_csv(&dir.snapshots.join(format!("fp_opinion_t{t:.6}.csv")), "w", fp)?;
    }

    let output = CompareOutput {
        l1_by_time,
        bins,
        n_agents,
        qi_scale: params.qi_scale,
    };
    let json = serde_json::to_string_pretty(&output).expect("serializes");
    fs::write(dir.root.join("compare.json"), json)?;
    if !quiet {
        for (t, l1) in &output.l1_by_time {
            println!("t = {t}: L1(mc, fp-h) = {l1:.4}");
        }
    }
    Ok(output)
}
