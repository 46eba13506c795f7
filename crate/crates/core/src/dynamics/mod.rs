//! Proximal implicit-Euler integration of `−x′ ∈ A(x) + h(t)` and of the
//! controlled system `−x′ ∈ A(x) + f(t, x) u(t)`.
//!
//! The monotone part is treated implicitly through the resolvent and the
//! control term explicitly:
//!
//! ```text
//!     x_{k+1} = (I + Δ A)⁻¹ (x_k − Δ f(t_k, x_k) u_k)
//! ```

mod field;

use serde::{Deserialize, Serialize};

use crate::controls::ControlSignal;
use crate::error::{Error, Result};
use crate::monotone::{MonotoneOperator, PreparedResolvent};
use crate::problem::Problem;
use crate::relax_young::YoungControl;
use crate::Vector;

pub use field::{FieldKind, FieldSpec};

/// Tolerance on the distance of `x₀` to `cl D(A)`.
pub const INITIAL_STATE_TOLERANCE: f64 = 1e-9;
/// Slack on `|u_k| ≤ M`.
pub const CONTROL_BOUND_TOLERANCE: f64 = 1e-9;

/// Uniform grid `t_k = k b / K` on `[0, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    horizon: f64,
    intervals: usize,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    horizon: f64,
    intervals: usize,
}

impl TryFrom<GridRepr> for Grid {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        Grid::new(r.horizon, r.intervals)
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        GridRepr {
            horizon: g.horizon,
            intervals: g.intervals,
        }
    }
}

impl Grid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if intervals == 0 {
            return Err(Error::InvalidGrid("at least one interval is required".into()));
        }
        Ok(Self { horizon, intervals })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.intervals {
            self.horizon
        } else {
            k as f64 * self.horizon / self.intervals as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.intervals).map(|k| self.time(k)).collect()
    }

    /// Index of the interval containing `t` (the last one for `t = b`).
    pub fn locate(&self, t: f64) -> usize {
        let k = (t / self.horizon * self.intervals as f64).floor();
        (k.max(0.0) as usize).min(self.intervals - 1)
    }

    /// `K_fine / K` when `fine` subdivides every interval of `self`.
    pub fn refinement_factor(&self, fine: Grid) -> Result<usize> {
        let same_horizon = (self.horizon - fine.horizon).abs() <= 1e-12 * self.horizon.max(1.0);
        if !same_horizon || !fine.intervals.is_multiple_of(self.intervals) {
            return Err(Error::InvalidGrid(format!(
                "grid with {} intervals on [0, {}] does not refine {} intervals on [0, {}]",
                fine.intervals, fine.horizon, self.intervals, self.horizon
            )));
        }
        Ok(fine.intervals / self.intervals)
    }
}

/// States `x_0, …, x_K` on a grid with the inclusion residual of the step
/// arriving at each node (0 at `x_0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub states: Vec<Vector>,
    pub residuals: Vec<f64>,
}

impl Trajectory {
    /// Largest residual over all steps.
    pub fn residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn sup_norm(&self) -> f64 {
        self.states.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `max_k |x_k − y_k|`.
    pub fn distance(&self, other: &Trajectory) -> Result<f64> {
        if self.grid != other.grid || self.dim() != other.dim() {
            return Err(Error::Dimension("trajectories live on different grids".into()));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// State on the interval containing `t`, sampled at its left node.
    pub fn state_at(&self, t: f64) -> &Vector {
        &self.states[self.grid.locate(t)]
    }

    /// Copy sampled on a finer grid: the state at each fine node is the
    /// state at the enclosing coarse node.
    pub fn sample_on(&self, fine: Grid) -> Result<Trajectory> {
        let factor = self.grid.refinement_factor(fine)?;
        let states = (0..=fine.intervals())
            .map(|j| self.states[j / factor].clone())
            .collect();
        let residuals = (0..=fine.intervals())
            .map(|j| if j % factor == 0 { self.residuals[j / factor] } else { 0.0 })
            .collect();
        Ok(Trajectory {
            grid: fine,
            states,
            residuals,
        })
    }
}

fn start_state(op: &MonotoneOperator, x0: &Vector) -> Result<Vector> {
    if x0.len() != op.dim() {
        return Err(Error::Dimension(format!(
            "x0 has length {}, operator acts on ℝ^{}",
            x0.len(),
            op.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state".into()));
    }
    let distance = op.domain_distance(x0);
    if distance > INITIAL_STATE_TOLERANCE {
        return Err(Error::InitialState { distance });
    }
    Ok(op.domain_project(x0))
}

/// Steps the scheme with a forcing evaluated along the computed path.
fn integrate(
    op: &MonotoneOperator,
    x0: &Vector,
    grid: Grid,
    mut forcing: impl FnMut(usize, f64, &Vector) -> Result<Vector>,
) -> Result<Trajectory> {
    let dt = grid.step();
    let resolvent = op.prepare(dt)?;
    let mut states = Vec::with_capacity(grid.intervals() + 1);
    states.push(start_state(op, x0)?);
    let mut residuals = Vec::with_capacity(grid.intervals() + 1);
    residuals.push(0.0);
    for k in 0..grid.intervals() {
        let x = &states[k];
        let h = forcing(k, grid.time(k), x)?;
        if h.len() != x.len() {
            return Err(Error::Dimension(format!(
                "forcing on interval {k} has length {}, expected {}",
                h.len(),
                x.len()
            )));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteForcing { index: k });
        }
        let next = resolvent.apply(&(x - &h * dt))?;
        let w = (x - &next) / dt - &h;
        residuals.push(op.distance_to_image(&next, &w));
        states.push(next);
    }
    Ok(Trajectory {
        grid,
        states,
        residuals,
    })
}

/// Solves `−x′ ∈ A(x) + h(t)`, `x(0) = x₀` with `h` piecewise constant on `grid`.
pub fn solve_forced(
    op: &MonotoneOperator,
    h: &ControlSignal,
    x0: &Vector,
    grid: Grid,
) -> Result<Trajectory> {
    if h.grid() != grid {
        return Err(Error::InvalidGrid("forcing must live on the integration grid".into()));
    }
    integrate(op, x0, grid, |k, _, _| Ok(h.at(k).clone()))
}

fn check_control(problem: &Problem, u: &ControlSignal) -> Result<()> {
    if u.dim() != problem.control_dim() {
        return Err(Error::Dimension(format!(
            "control has {} components, problem expects {}",
            u.dim(),
            problem.control_dim()
        )));
    }
    if (u.grid().horizon() - problem.horizon).abs() > 1e-12 * problem.horizon.max(1.0) {
        return Err(Error::InvalidGrid("control horizon differs from the problem horizon".into()));
    }
    let bound = problem.control_radius();
    for (index, v) in u.values().iter().enumerate() {
        let norm = v.norm();
        if norm > bound + CONTROL_BOUND_TOLERANCE {
            return Err(Error::ControlBound { index, norm, bound });
        }
    }
    Ok(())
}

/// Solves the controlled inclusion on the grid of `u`.
pub fn solve_controlled(problem: &Problem, u: &ControlSignal) -> Result<Trajectory> {
    check_control(problem, u)?;
    integrate(&problem.operator, &problem.x0, u.grid(), |k, t, x| {
        Ok(problem.field.apply(t, x, u.at(k)))
    })
}

/// Relaxed dynamics driven by a Young measure; since `f(t, x)` acts linearly
/// on `u`, the measure enters only through its barycenter.
pub fn solve_young(problem: &Problem, lam: &YoungControl) -> Result<Trajectory> {
    solve_controlled(problem, &lam.barycenter_signal()?)
}

/// One step of the scheme with a prepared resolvent, for callers that
/// re-simulate trajectory suffixes.
pub struct Stepper<'a> {
    problem: &'a Problem,
    grid: Grid,
    resolvent: PreparedResolvent<'a>,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a Problem, grid: Grid) -> Result<Self> {
        Ok(Self {
            problem,
            grid,
            resolvent: problem.operator.prepare(grid.step())?,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn initial_state(&self) -> Result<Vector> {
        start_state(&self.problem.operator, &self.problem.x0)
    }

    pub fn step(&self, k: usize, x: &Vector, u: &Vector) -> Result<Vector> {
        let dt = self.grid.step();
        let h = self.problem.field.apply(self.grid.time(k), x, u);
        self.resolvent.apply(&(x - h * dt))
    }
}

/// Gronwall constant `ĉ = (|x₀| + A₁) e^{A₁}` with
/// `A₁ = ∫₀ᵇ a(s) max(1, a₀(s)) ds`, evaluated exactly on step profiles.
pub fn apriori_bound(problem: &Problem) -> f64 {
    let growth = problem
        .field
        .bound
        .combine(&problem.controls.bound, |a, a0| a * a0.max(1.0));
    let a1 = growth.integral(problem.horizon);
    (problem.x0.norm() + a1) * a1.exp()
}

/// `‖K(h_n) − K(reference)‖_∞` for each forcing, where `K` is the solution
/// map of `−x′ ∈ A(x) + h`.
pub fn continuity_probe(
    op: &MonotoneOperator,
    x0: &Vector,
    forcings: &[ControlSignal],
    reference: &ControlSignal,
) -> Result<Vec<f64>> {
    let base = solve_forced(op, reference, x0, reference.grid())?;
    forcings
        .iter()
        .map(|h| solve_forced(op, h, x0, reference.grid())?.distance(&base))
        .collect()
}
