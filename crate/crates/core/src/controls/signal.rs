use serde::{Deserialize, Serialize};

use crate::dynamics::Grid;
use crate::error::{Error, Result};
use crate::Vector;

/// Piecewise-constant signal on a uniform grid: `values[k]` holds on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    grid: Grid,
    #[serde(with = "crate::serde_la::vectors")]
    values: Vec<Vector>,
}

impl ControlSignal {
    pub fn new(grid: Grid, values: Vec<Vector>) -> Result<Self> {
        if values.len() != grid.intervals() {
            return Err(Error::Dimension(format!(
                "signal needs {} values, got {}",
                grid.intervals(),
                values.len()
            )));
        }
        let dim = values[0].len();
        for (k, v) in values.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Dimension(format!(
                    "signal value {k} has length {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite(format!("signal value on interval {k}")));
            }
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: Vector) -> Self {
        let values = vec![value; grid.intervals()];
        Self::new(grid, values).expect("constant signal is well-formed")
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> Vector) -> Result<Self> {
        let values = (0..grid.intervals()).map(|k| f(grid.time(k))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn at(&self, k: usize) -> &Vector {
        &self.values[k]
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Exact copy on a grid whose interval count is a multiple of this one's.
    pub fn refine(&self, fine: Grid) -> Result<Self> {
        let factor = self.grid.refinement_factor(fine)?;
        let values = (0..fine.intervals())
            .map(|j| self.values[j / factor].clone())
            .collect();
        Self::new(fine, values)
    }

    pub fn to_piecewise(&self) -> PiecewiseSignal {
        let breaks = (0..=self.grid.intervals()).map(|k| self.grid.time(k)).collect();
        PiecewiseSignal {
            breaks,
            values: self.values.clone(),
        }
    }

    pub fn weak_norm(&self) -> f64 {
        self.to_piecewise().weak_norm()
    }

    /// `∫ |u(t)| dt`.
    pub fn l1_norm(&self) -> f64 {
        self.grid.step() * self.values.iter().map(|v| v.norm()).sum::<f64>()
    }

    pub fn sub(&self, other: &ControlSignal) -> Result<ControlSignal> {
        if self.grid != other.grid || self.dim() != other.dim() {
            return Err(Error::Dimension("signals live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        ControlSignal::new(self.grid, values)
    }
}

/// Piecewise-constant signal with arbitrary breakpoints `0 = τ₀ < … < τ_J = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSignal {
    breaks: Vec<f64>,
    values: Vec<Vector>,
}

impl PiecewiseSignal {
    pub fn new(breaks: Vec<f64>, values: Vec<Vector>) -> Result<Self> {
        if values.is_empty() || breaks.len() != values.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} values need {} breakpoints, got {}",
                values.len(),
                values.len() + 1,
                breaks.len()
            )));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid("breakpoints must increase strictly".into()));
        }
        Ok(Self { breaks, values })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn horizon(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Value on the piece containing `t` (right-continuous; the last piece is closed).
    pub fn value_at(&self, t: f64) -> &Vector {
        let j = self.breaks.partition_point(|b| *b <= t).saturating_sub(1);
        &self.values[j.min(self.values.len() - 1)]
    }

    /// Samples the signal at the midpoint of each grid interval.
    pub fn sample_on(&self, grid: Grid) -> Result<ControlSignal> {
        let h = grid.step();
        let values = (0..grid.intervals())
            .map(|k| self.value_at(grid.time(k) + 0.5 * h).clone())
            .collect();
        ControlSignal::new(grid, values)
    }

    /// `∫ u` over each interval of `grid`.
    pub fn integrals_on(&self, grid: Grid) -> Result<Vec<Vector>> {
        if (grid.horizon() - self.horizon()).abs() > 1e-12 * self.horizon().max(1.0) {
            return Err(Error::InvalidGrid("grid and signal horizons differ".into()));
        }
        let mut out = Vec::with_capacity(grid.intervals());
        let mut j = 0;
        for k in 0..grid.intervals() {
            let (a, b) = (grid.time(k), grid.time(k + 1));
            let mut acc = Vector::zeros(self.dim());
            while j + 1 < self.values.len() && self.breaks[j + 1] <= a {
                j += 1;
            }
            let mut i = j;
            while i < self.values.len() && self.breaks[i] < b {
                let overlap = self.breaks[i + 1].min(b) - self.breaks[i].max(a);
                if overlap > 0.0 {
                    acc.axpy(overlap, &self.values[i], 1.0);
                }
                i += 1;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Partial integrals `∫₀^{τ_j} u` at every breakpoint.
    pub fn cumulative(&self) -> Vec<Vector> {
        let mut acc = Vector::zeros(self.dim());
        let mut out = Vec::with_capacity(self.breaks.len());
        out.push(acc.clone());
        for (j, v) in self.values.iter().enumerate() {
            acc += v * (self.breaks[j + 1] - self.breaks[j]);
            out.push(acc.clone());
        }
        out
    }

    pub fn integral(&self) -> Vector {
        self.cumulative().pop().unwrap()
    }

    /// `sup_{s ≤ t} |∫ₛᵗ u|`, exact for piecewise-constant signals: the
    /// partial integral is a polygonal path, so the supremum of a convex
    /// function of `(s, t)` is attained at breakpoints.
    pub fn weak_norm(&self) -> f64 {
        let path = self.cumulative();
        if self.dim() == 1 {
            let (lo, hi) = path
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    (lo.min(c[0]), hi.max(c[0]))
                });
            return hi - lo;
        }
        let mut best: f64 = 0.0;
        for (i, a) in path.iter().enumerate() {
            for b in &path[i + 1..] {
                best = best.max((a - b).norm());
            }
        }
        best
    }

    pub fn l1_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| v.norm() * (self.breaks[j + 1] - self.breaks[j]))
            .sum()
    }

    /// `self − other` on the union of both breakpoint sets.
    pub fn sub(&self, other: &PiecewiseSignal) -> Result<PiecewiseSignal> {
        if (self.horizon() - other.horizon()).abs() > 1e-12 || self.dim() != other.dim() {
            return Err(Error::Dimension("signals have different horizons or dimensions".into()));
        }
        let mut breaks: Vec<f64> = self.breaks.iter().chain(&other.breaks).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
        let values = breaks
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                self.value_at(mid) - other.value_at(mid)
            })
            .collect();
        PiecewiseSignal::new(breaks, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn square_wave(n: usize, k: usize) -> ControlSignal {
        // ±1 with period 2/n on [0, 1]
        let grid = Grid::new(1.0, k).unwrap();
        ControlSignal::from_fn(grid, |t| {
            let phase = ((t + 1e-12) * n as f64).floor() as usize;
            dvector![if phase.is_multiple_of(2) { 1.0 } else { -1.0 }]
        })
        .unwrap()
    }

    #[test]
    fn weak_norm_examples() {
        let grid = Grid::new(2.0, 10).unwrap();
        assert_eq!(ControlSignal::constant(grid, dvector![0.0]).weak_norm(), 0.0);
        let c = ControlSignal::constant(grid, dvector![-1.5]);
        assert!((c.weak_norm() - 3.0).abs() < 1e-12);
        assert!((square_wave(10, 1000).weak_norm() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn weak_norm_in_two_dimensions() {
        // Quarter turns trace a unit square; the farthest corners are √2·¼ apart.
        let grid = Grid::new(1.0, 4).unwrap();
        let u = ControlSignal::new(
            grid,
            vec![dvector![1.0, 0.0], dvector![0.0, 1.0], dvector![-1.0, 0.0], dvector![0.0, -1.0]],
        )
        .unwrap();
        assert!((u.weak_norm() - 0.25 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn weak_norm_is_dominated_by_l1() {
        for n in [1, 3, 7, 20] {
            let u = square_wave(n, 840);
            assert!(u.weak_norm() <= u.l1_norm() + 1e-12);
        }
    }

    #[test]
    fn square_waves_converge_weakly_to_zero() {
        let grid = Grid::new(1.0, 1280).unwrap();
        let tests: Vec<ControlSignal> = [0.2, 0.5, 0.8]
            .iter()
            .map(|&c| ControlSignal::from_fn(grid, |t| dvector![f64::from(t < c)]).unwrap())
            .collect();
        let mut previous = f64::INFINITY;
        for n in [4, 8, 16, 32, 64] {
            let u = square_wave(n, 1280);
            let w = u.weak_norm();
            assert!(w < previous);
            previous = w;
            // The L¹ norm stays bounded while the pairings vanish.
            assert!((u.l1_norm() - 1.0).abs() < 1e-12);
            for phi in &tests {
                let pairing: f64 = (0..grid.intervals())
                    .map(|k| grid.step() * u.at(k)[0] * phi.at(k)[0])
                    .sum();
                assert!(pairing.abs() <= w + 1e-12);
            }
        }
    }

    #[test]
    fn refine_and_sample_are_consistent() {
        let coarse = Grid::new(1.0, 4).unwrap();
        let u = ControlSignal::from_fn(coarse, |t| dvector![t]).unwrap();
        let fine = Grid::new(1.0, 12).unwrap();
        assert_eq!(u.refine(fine).unwrap(), u.to_piecewise().sample_on(fine).unwrap());
        assert!(u.refine(Grid::new(1.0, 6).unwrap()).is_err());
    }

    #[test]
    fn piecewise_difference_merges_breaks() {
        let a = PiecewiseSignal::new(vec![0.0, 0.5, 1.0], vec![dvector![1.0], dvector![-1.0]]).unwrap();
        let b = PiecewiseSignal::new(vec![0.0, 0.25, 1.0], vec![dvector![2.0], dvector![0.0]]).unwrap();
        let d = a.sub(&b).unwrap();
        assert_eq!(d.breaks(), &[0.0, 0.25, 0.5, 1.0]);
        assert_eq!(d.values(), &[dvector![-1.0], dvector![1.0], dvector![-1.0]]);
        assert!((d.weak_norm() - 0.5).abs() < 1e-15);
    }
}
