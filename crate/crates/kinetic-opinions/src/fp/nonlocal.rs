//! Quadrature of the nonlocal compromise drifts
//!
//! ```text
//! K[f](w) = int (Bbar omega_p + eps) G(w,v) (w - v) f(B,v) dB dv
//! J[fl](w) = int G(w,z) (w - z) fl(z) dz
//! ```
//!
//! For G == 1 these collapse to `K(w) = w rho_bar - m_bar` with the weighted
//! moments of the density and `J(w) = w - mu_l`; the quadrature path is only
//! taken for genulooking kernels.

use crate::diagnostics::macros_of_grid2d;
use crate::fp::grid::{Grid1D, Grid2D};
use crate::model::{activity_weight, InteractionKernels, ModelParams};

/// Weighted opinion profile `S(v) = int (Abar omega_p + eps) f(A, v) dA`,
/// one value per opinion cell.
fn weighted_opinion_profile(f: &Grid2D, params: &ModelParams) -> Vec<f64> {
    let da = f.activity_axis().step();
    let mut profile = vec![0.0; f.n_opinion()];
    for row in 0..f.n_activity() {
        let a = f.activity_axis().center(row);
        let weight = activity_weight(a, params.gamma) * params.omega_p + params.eps_floor;
        for (col, s) in profile.iter_mut().enumerate() {
            *s += weight * f.value(row, col) * da;
        }
    }
    profile
}

/// K[f] evaluated at arbitrary opinion points.
pub fn nonlocal_k_profile(
    f: &Grid2D,
    kernels: &InteractionKernels,
    params: &ModelParams,
    points: &[f64],
) -> Vec<f64> {
    if kernels.influence.is_uniform() {
        let m = macros_of_grid2d(f, params, 0.0);
        return points.iter().map(|&w| w * m.rho_bar - m.m_bar).collect();
    }
    let profile = weighted_opinion_profile(f, params);
    let w_axis = f.opinion_axis();
    let dw = w_axis.step();
    points
        .iter()
        .map(|&w| {
            profile
                .iter()
                .enumerate()
                .map(|(col, s)| {
                    let v = w_axis.center(col);
                    kernels.influence.eval(w, v) * (w - v) * s * dw
                })
                .sum()
        })
        .collect()
}

/// K[f] at a single opinion point.
pub fn eval_nonlocal_k(
    f: &Grid2D,
    kernels: &InteractionKernels,
    params: &ModelParams,
    w: f64,
) -> f64 {
    nonlocal_k_profile(f, kernels, params, &[w])[0]
}

/// J[fl] against a tabulated leader density (for G == 1 use `w - mu_l`
/// directly; this quadrature exists for custom kernels).
pub fn leader_j_profile(
    kernels: &InteractionKernels,
    leader_density: &Grid1D,
    points: &[f64],
) -> Vec<f64> {
    let dz = leader_density.step();
    points
        .iter()
        .map(|&w| {
            (0..leader_density.len())
                .map(|col| {
                    let z = leader_density.center(col);
                    kernels.influence.eval(w, z) * (w - z) * leader_density.values()[col] * dz
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp::grid::{Grid1D, Grid2D};
    use crate::model::{InfluenceKernel, ModelParams, RawParams};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn uniform_f() -> (Grid2D, ModelParams) {
        let p = ModelParams::new(RawParams::default()).unwrap();
        let a = Grid1D::activity(1.0, -2.0, 2.0, 10).unwrap();
        let w = Grid1D::opinion(80).unwrap();
        let mut f = Grid2D::new(a, w).unwrap();
        f.fill_uniform_box(-2.0, 2.0, -1.0, 1.0).unwrap();
        (f, p)
    }

    #[test]
    fn uniform_kernel_closed_form() {
        let (f, p) = uniform_f();
        let kernels = InteractionKernels::default();
        // symmetric density: K(0) = 0, and K(w) = w * 0.45 (rho_bar = 0.45, m_bar = 0)
        assert_relative_eq!(eval_nonlocal_k(&f, &kernels, &p, 0.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(
            eval_nonlocal_k(&f, &kernels, &p, 0.5),
            0.5 * 0.45,
            epsilon = 1e-12
        );
    }

    #[test]
    fn quadrature_matches_closed_form_for_constant_custom_kernel() {
        let (f, p) = uniform_f();
        let constant_one = InteractionKernels {
            influence: InfluenceKernel::Custom(Arc::new(|_, _| 1.0)),
            ..InteractionKernels::default()
        };
        let fast = InteractionKernels::default();
        for w in [-0.9, -0.3, 0.0, 0.7] {
            assert_relative_eq!(
                eval_nonlocal_k(&f, &constant_one, &p, w),
                eval_nonlocal_k(&f, &fast, &p, w),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn leader_profile_reduces_to_mean_shift() {
        let kernels = InteractionKernels::default();
        let mut fl = Grid1D::opinion(200).unwrap();
        fl.fill_uniform(0.1, 0.7).unwrap(); // mean 0.4
        let pts = [-0.5, 0.0, 0.9];
        let j = leader_j_profile(&kernels, &fl, &pts);
        for (w, jw) in pts.iter().zip(j) {
            assert_relative_eq!(jw, w - 0.4, epsilon = 1e-12);
        }
    }
}
