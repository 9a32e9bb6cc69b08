//! Cell-averaged densities on uniform grids.
//!
//! Grid nodes are generated from integer offsets around zero so that
//! symmetric grids mirror exactly in floating point; the even-data solvers
//! rely on that to keep odd moments at roundoff level. Activity grids align
//! cell edges with the thresholds +-gamma, so the piecewise-linear activity
//! weight is affine inside every cell and midpoint quadrature of the
//! weighted moments is exact.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least {min} cells, got {got}")]
    TooFewCells { min: usize, got: usize },
    #[error("grid bounds [{lo}, {hi}] are not increasing")]
    BadBounds { lo: f64, hi: f64 },
    #[error("grids are incompatible: {0}")]
    Mismatch(String),
    #[error("density has a negative cell value {value} at index {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("cannot align edges with +-gamma = +-{gamma} inside [{lo}, {hi}]")]
    Alignment { gamma: f64, lo: f64, hi: f64 },
}

/// Which physical axis a 1-D grid discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Opinion, always on [-1, 1].
    Opinion,
    /// Activity, on a finite truncation [a_min, a_max].
    Activity,
}

/// Uniform cell-averaged density on one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    axis: Axis,
    /// Leftmost edge, as `edge0 = step * idx0` with integer idx0 when the
    /// grid is integer-anchored; stored directly.
    lo: f64,
    hi: f64,
    step: f64,
    /// Integer index of the leftmost edge in units of `step` (edges are
    /// `(idx0 + j) * step`), so mirrored grids have bit-identical nodes.
    idx0: i64,
    values: Vec<f64>,
}

impl Grid1D {
    /// Uniform opinion grid on [-1, 1] with `n` cells, zero-filled.
    pub fn opinion(n: usize) -> Result<Self, GridError> {
        if n < 4 {
            return Err(GridError::TooFewCells { min: 4, got: n });
        }
        // edges are j * (2/n) - offset by -n/2 in integer units
        let step = 2.0 / n as f64;
        Ok(Grid1D {
            axis: Axis::Opinion,
            lo: -1.0,
            hi: 1.0,
            step,
            idx0: -(n as i64) / 2,
            values: vec![0.0; n],
        })
    }

    /// Uniform activity grid covering at least [lo, hi] whose edges land on
    /// integer multiples of gamma / cells_per_gamma, so that +-gamma are
    /// always edges.
    pub fn activity(
        gamma: f64,
        lo: f64,
        hi: f64,
        cells_per_gamma: usize,
    ) -> Result<Self, GridError> {
        if !(hi > lo) {
            return Err(GridError::BadBounds { lo, hi });
        }
        if cells_per_gamma == 0 || !(gamma > 0.0) {
            return Err(GridError::Alignment { gamma, lo, hi });
        }
        let step = gamma / cells_per_gamma as f64;
        let idx0 = (lo / step).floor() as i64;
        let idx1 = (hi / step).ceil() as i64;
        let n = (idx1 - idx0) as usize;
        if n < 4 {
            return Err(GridError::TooFewCells { min: 4, got: n });
        }
        Ok(Grid1D {
            axis: Axis::Activity,
            lo: idx0 as f64 * step,
            hi: idx1 as f64 * step,
            step,
            idx0,
            values: vec![0.0; n],
        })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Edge j in [0, len]; for opinion grids the two outermost edges are
    /// pinned to exactly -1 and 1.
    pub fn edge(&self, j: usize) -> f64 {
        if self.axis == Axis::Opinion {
            if j == 0 {
                return -1.0;
            }
            if j == self.len() {
                return 1.0;
            }
        }
        (self.idx0 + j as i64) as f64 * self.step
    }

    /// Cell center j; computed from the odd integer 2*(idx0+j)+1 so mirrored
    /// cells negate exactly.
    pub fn center(&self, j: usize) -> f64 {
        (2 * (self.idx0 + j as i64) + 1) as f64 * (0.5 * self.step)
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.center(j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn set_values(&mut self, values: Vec<f64>) -> Result<(), GridError> {
        if values.len() != self.len() {
            return Err(GridError::Mismatch(format!(
                "expected {} cell values, got {}",
                self.len(),
                values.len()
            )));
        }
        self.values = values;
        Ok(())
    }

    /// Total mass: sum of cell averages times the cell width.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.step
    }

    /// First moment of the coordinate.
    pub fn moment1(&self) -> f64 {
        (0..self.len())
            .map(|j| self.center(j) * self.values[j])
            .sum::<f64>()
            * self.step
    }

    /// Mean coordinate (first moment over mass).
    pub fn mean(&self) -> f64 {
        self.moment1() / self.mass()
    }

    /// Second central moment.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (0..self.len())
            .map(|j| {
                let d = self.center(j) - m;
                d * d * self.values[j]
            })
            .sum::<f64>()
            * self.step
            / self.mass()
    }

    /// Rescale so the total mass is one.
    pub fn normalize(&mut self) {
        let m = self.mass();
        if m > 0.0 {
            for v in &mut self.values {
                *v /= m;
            }
        }
    }

    pub fn check_nonnegative(&self) -> Result<(), GridError> {
        for (index, &value) in self.values.iter().enumerate() {
            if value < 0.0 {
                return Err(GridError::NegativeDensity { index, value });
            }
        }
        Ok(())
    }

    /// Fill with the cell averages of a uniform density on [lo, hi]
    /// (partial overlaps handled exactly), normalized to unit mass.
    pub fn fill_uniform(&mut self, lo: f64, hi: f64) -> Result<(), GridError> {
        if !(hi > lo) {
            return Err(GridError::BadBounds { lo, hi });
        }
        let height = 1.0 / (hi - lo);
        for j in 0..self.len() {
            let (el, er) = (self.edge(j), self.edge(j + 1));
            let overlap = (er.min(hi) - el.max(lo)).max(0.0);
            self.values[j] = height * overlap / self.step;
        }
        Ok(())
    }

    /// Smallest and largest cell index whose value exceeds `threshold`.
    pub fn support_cells(&self, threshold: f64) -> Option<(usize, usize)> {
        let first = self.values.iter().position(|&v| v > threshold)?;
        let last = self.values.iter().rposition(|&v| v > threshold)?;
        Some((first, last))
    }

    /// Mass inside the coordinate interval [lo, hi], counting partial cells
    /// proportionally.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        for j in 0..self.len() {
            let (el, er) = (self.edge(j), self.edge(j + 1));
            let overlap = (er.min(hi) - el.max(lo)).max(0.0);
            total += self.values[j] * overlap;
        }
        total
    }

    pub fn same_layout(&self, other: &Grid1D) -> bool {
        self.axis == other.axis
            && self.idx0 == other.idx0
            && self.len() == other.len()
            && self.step == other.step
    }

    /// Extend an activity grid by `extra` cells on the requested side,
    /// padding with zeros (domain regrowth when mass approaches a boundary).
    pub fn extend_left(&mut self, extra: usize) {
        self.idx0 -= extra as i64;
        self.lo = self.idx0 as f64 * self.step;
        let mut values = vec![0.0; extra];
        values.extend_from_slice(&self.values);
        self.values = values;
    }

    pub fn extend_right(&mut self, extra: usize) {
        let idx1 = self.idx0 + (self.len() + extra) as i64;
        self.hi = idx1 as f64 * self.step;
        self.values.extend(std::iter::repeat(0.0).take(extra));
    }
}

/// Cell-averaged density f(A, w) on the product of an activity grid and an
/// opinion grid; row-major with the activity index outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    activity: Grid1D,
    opinion: Grid1D,
    /// values[row * n_w + col] = cell average in activity row `row`,
    /// opinion column `col`.
    values: Vec<f64>,
}

impl Grid2D {
    pub fn new(activity: Grid1D, opinion: Grid1D) -> Result<Self, GridError> {
        if activity.axis() != Axis::Activity || opinion.axis() != Axis::Opinion {
            return Err(GridError::Mismatch(
                "Grid2D wants (activity, opinion) axes in that order".into(),
            ));
        }
        let n = activity.len() * opinion.len();
        Ok(Grid2D {
            activity,
            opinion,
            values: vec![0.0; n],
        })
    }

    pub fn activity_axis(&self) -> &Grid1D {
        &self.activity
    }

    pub fn opinion_axis(&self) -> &Grid1D {
        &self.opinion
    }

    pub fn n_activity(&self) -> usize {
        self.activity.len()
    }

    pub fn n_opinion(&self) -> usize {
        self.opinion.len()
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.opinion.len() + col]
    }

    #[inline]
    pub fn value_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        let n = self.opinion.len();
        &mut self.values[row * n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.opinion.len();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        let n = self.opinion.len();
        &mut self.values[row * n..(row + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_area(&self) -> f64 {
        self.activity.step() * self.opinion.step()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn normalize(&mut self) {
        let m = self.mass();
        if m > 0.0 {
            for v in &mut self.values {
                *v /= m;
            }
        }
    }

    pub fn check_nonnegative(&self) -> Result<(), GridError> {
        for (index, &value) in self.values.iter().enumerate() {
            if value < 0.0 {
                return Err(GridError::NegativeDensity { index, value });
            }
        }
        Ok(())
    }

    /// Marginal over the activity axis: h(w).
    pub fn opinion_marginal(&self) -> Grid1D {
        let mut h = self.opinion.clone();
        let da = self.activity.step();
        for col in 0..self.opinion.len() {
            let mut sum = 0.0;
            for row in 0..self.activity.len() {
                sum += self.value(row, col);
            }
            h.values_mut()[col] = sum * da;
        }
        h
    }

    /// Marginal over the opinion axis: g(A).
    pub fn activity_marginal(&self) -> Grid1D {
        let mut g = self.activity.clone();
        let dw = self.opinion.step();
        for row in 0..self.activity.len() {
            g.values_mut()[row] = self.row(row).iter().sum::<f64>() * dw;
        }
        g
    }

    /// Fill with a product density: uniform box in both coordinates,
    /// normalized to unit mass.
    pub fn fill_uniform_box(
        &mut self,
        a_lo: f64,
        a_hi: f64,
        w_lo: f64,
        w_hi: f64,
    ) -> Result<(), GridError> {
        let mut ga = self.activity.clone();
        ga.fill_uniform(a_lo, a_hi)?;
        let mut gw = self.opinion.clone();
        gw.fill_uniform(w_lo, w_hi)?;
        for row in 0..self.activity.len() {
            for col in 0..self.opinion.len() {
                *self.value_mut(row, col) = ga.values()[row] * gw.values()[col];
            }
        }
        Ok(())
    }

    /// Grow the activity domain with zero rows.
    pub fn extend_activity_left(&mut self, extra: usize) {
        let n_w = self.opinion.len();
        self.activity.extend_left(extra);
        let mut values = vec![0.0; extra * n_w];
        values.extend_from_slice(&self.values);
        self.values = values;
    }

    pub fn extend_activity_right(&mut self, extra: usize) {
        let n_w = self.opinion.len();
        self.activity.extend_right(extra);
        self.values.extend(std::iter::repeat(0.0).take(extra * n_w));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn opinion_grid_edges_and_mirroring() {
        let g = Grid1D::opinion(400).unwrap();
        assert_eq!(g.edge(0), -1.0);
        assert_eq!(g.edge(400), 1.0);
        assert_relative_eq!(g.step(), 0.005);
        for j in 0..400 {
            assert_eq!(g.center(j), -g.center(399 - j), "mirror at {j}");
        }
    }

    #[test]
    fn activity_grid_aligns_gamma() {
        let g = Grid1D::activity(1.0, -2.3, 3.1, 10).unwrap();
        // edges are multiples of 0.1; +-gamma must be edges
        let has_gamma = (0..=g.len()).any(|j| g.edge(j) == 1.0);
        let has_neg_gamma = (0..=g.len()).any(|j| g.edge(j) == -1.0);
        assert!(has_gamma && has_neg_gamma);
        assert!(g.lo() <= -2.3 && g.hi() >= 3.1);
    }

    #[test]
    fn uniform_fill_masses() {
        let mut g = Grid1D::opinion(50).unwrap();
        g.fill_uniform(-0.33, 0.71).unwrap();
        assert_relative_eq!(g.mass(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.mean(), 0.19, epsilon = 1e-12);
        // partial-cell handling is exact even off the edge lattice
        assert_relative_eq!(g.mass_in(-0.33, 0.71), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn marginals_of_product_box() {
        let a = Grid1D::activity(1.0, -2.0, 2.0, 8).unwrap();
        let w = Grid1D::opinion(40).unwrap();
        let mut f = Grid2D::new(a, w).unwrap();
        f.fill_uniform_box(-2.0, 2.0, -1.0, 1.0).unwrap();
        assert_relative_eq!(f.mass(), 1.0, epsilon = 1e-12);
        let h = f.opinion_marginal();
        let g = f.activity_marginal();
        assert_relative_eq!(h.mass(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.mass(), 1.0, epsilon = 1e-12);
        for &v in h.values() {
            assert_relative_eq!(v, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn regrowth_pads_zeros_and_keeps_mass() {
        let mut g = Grid1D::activity(1.0, -1.0, 1.0, 5).unwrap();
        g.fill_uniform(-1.0, 1.0).unwrap();
        let m = g.mass();
        g.extend_left(3);
        g.extend_right(2);
        assert_relative_eq!(g.mass(), m, epsilon = 1e-14);
        assert_eq!(g.values()[0], 0.0);
        assert_eq!(*g.values().last().unwrap(), 0.0);
    }
}
