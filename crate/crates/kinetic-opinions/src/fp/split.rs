//! Strang-split solver for the full two-dimensional density f(t, A, w):
//! half a Chang-Cooper step in the opinion direction on every activity row,
//! one upwind step in the activity direction on every opinion column, then
//! the second opinion half-step, with the nonlocal drift refreshed before
//! each opinion sweep. Zero flux on all four boundaries.

use crate::fp::chang_cooper::{cc_step_h, ChannelMode, DriftSpec};
use crate::fp::grid::Grid2D;
#[cfg(test)]
use crate::fp::grid::Grid1D;
use crate::fp::nonlocal::nonlocal_k_profile;
use crate::fp::transport::activity_velocity;
use crate::fp::FpError;
use crate::model::{activity_weight, InteractionKernels, ModelParams};

fn opinion_half_step(
    f: &mut Grid2D,
    params: &ModelParams,
    kernels: &InteractionKernels,
    mode: ChannelMode,
    half_dt: f64,
) -> Result<(), FpError> {
    let sigma2 = match mode {
        ChannelMode::AgentsOnly => params.sigma2_p,
        ChannelMode::LeadersOnly => params.sigma2_l,
        ChannelMode::Both => params.sigma2_p + params.sigma2_l,
    };
    let w_axis = f.opinion_axis().clone();
    let n_w = w_axis.len();
    let edges: Vec<f64> = (0..=n_w).map(|j| w_axis.edge(j)).collect();
    let with_agents = mode != ChannelMode::LeadersOnly;
    let with_leaders = mode != ChannelMode::AgentsOnly;
    let k_profile = if with_agents {
        nonlocal_k_profile(f, kernels, params, &edges)
    } else {
        vec![0.0; n_w + 1]
    };

    let mut row_grid = w_axis.clone();
    for row in 0..f.n_activity() {
        let a = f.activity_axis().center(row);
        let weight = activity_weight(a, params.gamma);
        let c_agent = if with_agents {
            params.lambda_p * (weight * params.omega_p + params.eps_floor)
        } else {
            0.0
        };
        let c_leader = if with_leaders {
            params.lambda_l * (weight * params.omega_l + params.eps_floor)
        } else {
            0.0
        };
        let table: Vec<f64> = (0..=n_w)
            .map(|j| c_agent * k_profile[j] + c_leader * (edges[j] - params.mu_l))
            .collect();
        row_grid
            .set_values(f.row(row).to_vec())
            .expect("same layout");
        let stepped = cc_step_h(&row_grid, &DriftSpec::Tabulated { edges: table }, sigma2, half_dt)?;
        f.row_mut(row).copy_from_slice(stepped.values());
    }
    Ok(())
}

fn activity_full_step(
    f: &mut Grid2D,
    params: &ModelParams,
    controlled: bool,
    dt: f64,
) -> Result<(), FpError> {
    let a_axis = f.activity_axis().clone();
    let n_a = a_axis.len();
    let n_w = f.n_opinion();
    let step = a_axis.step();
    let velocities: Vec<f64> = (0..n_a)
        .map(|row| activity_velocity(a_axis.center(row), params, controlled))
        .collect();
    let vmax = velocities.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cfl = dt * vmax / step;
    if cfl > 1.0 + 1e-9 {
        return Err(FpError::CflViolation { dt, cfl });
    }
    let r = dt / step;
    let mut column = vec![0.0; n_a];
    let mut flux = vec![0.0; n_a + 1];
    for col in 0..n_w {
        for row in 0..n_a {
            column[row] = f.value(row, col);
        }
        for k in 1..n_a {
            flux[k] = velocities[k - 1].max(0.0) * column[k - 1]
                + velocities[k].min(0.0) * column[k];
        }
        flux[0] = 0.0;
        flux[n_a] = 0.0;
        for row in 0..n_a {
            *f.value_mut(row, col) = column[row] - r * (flux[row + 1] - flux[row]);
        }
    }
    Ok(())
}

/// One Strang-split step of length dt.
pub fn split_step_f(
    f: &Grid2D,
    params: &ModelParams,
    kernels: &InteractionKernels,
    mode: ChannelMode,
    controlled: bool,
    dt: f64,
) -> Result<Grid2D, FpError> {
    f.check_nonnegative().map_err(FpError::NegativeInput)?;
    let mut out = f.clone();
    opinion_half_step(&mut out, params, kernels, mode, 0.5 * dt)?;
    activity_full_step(&mut out, params, controlled, dt)?;
    opinion_half_step(&mut out, params, kernels, mode, 0.5 * dt)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SplitConfig {
    pub mode: ChannelMode,
    pub controlled: bool,
    pub t_final: f64,
    pub dt: f64,
    /// Snapshot cadence in steps (0: endpoints only).
    pub snapshot_every: usize,
}

#[derive(Debug, Clone)]
pub struct SplitRun {
    pub times: Vec<f64>,
    pub macros: Vec<crate::diagnostics::Macros>,
    pub snapshots: Vec<(f64, Grid2D)>,
    pub f: Grid2D,
    pub mass_drift: f64,
}

/// Drive the split step to t_final, recording macroscopic observables every
/// step and regrowing the activity domain if mass approaches its edge.
pub fn advance_f(
    f0: &Grid2D,
    params: &ModelParams,
    kernels: &InteractionKernels,
    cfg: &SplitConfig,
) -> Result<SplitRun, FpError> {
    let mut f = f0.clone();
    let mass0 = f.mass();
    let steps = (cfg.t_final / cfg.dt).round().max(0.0) as usize;
    let mut times = vec![0.0];
    let mut macros = vec![crate::diagnostics::macros_of_grid2d(&f, params, 0.0)];
    let mut snapshots = vec![(0.0, f.clone())];
    let mut mass_drift = 0.0f64;
    for k in 0..steps {
        let edge_mass = 1e-13 / f.cell_area();
        let n_a = f.n_activity();
        let g = f.activity_marginal();
        if g.values()[..2.min(n_a)].iter().any(|&v| v > edge_mass) {
            f.extend_activity_left(n_a / 4 + 4);
        }
        if g.values()[n_a.saturating_sub(2)..].iter().any(|&v| v > edge_mass) {
            f.extend_activity_right(n_a / 4 + 4);
        }
        f = split_step_f(&f, params, kernels, cfg.mode, cfg.controlled, cfg.dt)?;
        let t = (k + 1) as f64 * cfg.dt;
        times.push(t);
        macros.push(crate::diagnostics::macros_of_grid2d(&f, params, t));
        mass_drift = mass_drift.max((f.mass() - mass0).abs() / mass0);
        if (cfg.snapshot_every != 0 && (k + 1) % cfg.snapshot_every == 0) || k + 1 == steps {
            snapshots.push((t, f.clone()));
        }
    }
    Ok(SplitRun {
        times,
        macros,
        snapshots,
        f,
        mass_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp::chang_cooper::{advance_h, AdvanceConfig, MeanMode};
    use crate::fp::transport::transport_step_g;
    use crate::model::{ModelParams, RawParams};
    use approx::assert_relative_eq;

    fn params() -> ModelParams {
        let mut raw = RawParams::default();
        raw.lambda_a = 0.2;
        raw.a_p = 0.07;
        ModelParams::new(raw).unwrap()
    }

    fn start(p: &ModelParams) -> Grid2D {
        let a = Grid1D::activity(p.gamma, -2.0, 4.0, 10).unwrap();
        let w = Grid1D::opinion(80).unwrap();
        let mut f = Grid2D::new(a, w).unwrap();
        f.fill_uniform_box(-1.5, 1.5, -0.6, 0.4).unwrap();
        f
    }

    #[test]
    fn mass_conserved_and_nonnegative() {
        let p = params();
        let kernels = InteractionKernels::default();
        let mut f = start(&p);
        let m0 = f.mass();
        for _ in 0..100 {
            f = split_step_f(&f, &p, &kernels, ChannelMode::AgentsOnly, false, 2e-2).unwrap();
            f.check_nonnegative().unwrap();
        }
        assert!((f.mass() - m0).abs() / m0 < 1e-12);
    }

    #[test]
    fn opinion_marginal_matches_transport_free_reference() {
        // all mass active and a velocity that vanishes at the spike: the w
        // dynamics must match the 1-D reduced solver closely
        let mut raw = RawParams::default();
        raw.lambda_a = 0.2;
        raw.a_p = 0.45; // default fade: active agents drift right, fine
        let p = ModelParams::new(raw).unwrap();
        let kernels = InteractionKernels::default();
        let a = Grid1D::activity(p.gamma, 0.0, 8.0, 8).unwrap();
        let w = Grid1D::opinion(120).unwrap();
        let mut f = Grid2D::new(a, w).unwrap();
        f.fill_uniform_box(1.0, 2.0, -0.6, 0.4).unwrap();

        let dt = 5e-3;
        let cfg = SplitConfig {
            mode: ChannelMode::AgentsOnly,
            controlled: false,
            t_final: 2.0,
            dt,
            snapshot_every: 0,
        };
        let run = advance_f(&f, &p, &kernels, &cfg).unwrap();
        let h2d = run.f.opinion_marginal();

        let h0 = f.opinion_marginal();
        let cfg1 = AdvanceConfig {
            mode: ChannelMode::AgentsOnly,
            mean_mode: MeanMode::SelfConsistent,
            t_final: 2.0,
            dt: Some(dt),
            snapshot_every: 0,
        };
        let run1 = advance_h(&h0, &p, &cfg1).unwrap();
        let l1: f64 = h2d
            .values()
            .iter()
            .zip(run1.h.values())
            .map(|(a, b)| (a - b).abs() * h2d.step())
            .sum();
        // O(dA + dw^2 + dt^2) agreement
        assert!(l1 < 2e-2, "L1 between marginal and reduced solver: {l1}");
    }

    #[test]
    fn activity_marginal_matches_transport_exactly() {
        // integrating over w kills the opinion operators: the activity
        // marginal of the split step equals the plain upwind step to roundoff
        let p = params();
        let kernels = InteractionKernels::default();
        let f = start(&p);
        let g0 = f.activity_marginal();
        let dt = 1e-2;
        let f1 = split_step_f(&f, &p, &kernels, ChannelMode::AgentsOnly, false, dt).unwrap();
        let g_split = f1.activity_marginal();
        let g_direct = transport_step_g(&g0, &p, false, dt).unwrap();
        for (a, b) in g_split.values().iter().zip(g_direct.values()) {
            assert_relative_eq!(a, b, epsilon = 1e-12, max_relative = 1e-10);
        }
    }

    #[test]
    fn even_activity_data_keeps_zero_mean_activity() {
        let mut raw = RawParams::default();
        raw.lambda_a = 0.2; // a_p stays the default fade
        let p = ModelParams::new(raw).unwrap();
        let kernels = InteractionKernels::default();
        let a = Grid1D::activity(p.gamma, -3.0, 3.0, 8).unwrap();
        let w = Grid1D::opinion(60).unwrap();
        let mut f = Grid2D::new(a, w).unwrap();
        f.fill_uniform_box(-1.5, 1.5, -0.8, 0.8).unwrap();
        for controlled in [false, true] {
            let cfg = SplitConfig {
                mode: ChannelMode::AgentsOnly,
                controlled,
                t_final: 1.0,
                dt: 1e-2,
                snapshot_every: 0,
            };
            let run = advance_f(&f, &p, &kernels, &cfg).unwrap();
            for m in &run.macros {
                assert!(m.m_a.abs() <= 1e-10, "m_A drift {}", m.m_a);
            }
        }
    }
}
