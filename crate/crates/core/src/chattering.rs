//! From relaxed controls back to ordinary ones.
//!
//! A Young control is realized by time sharing: on every base interval each
//! atom is used for `weight · Δ / n` in each of `n` cycles. The chattered
//! target is then tracked along the actual state by projecting onto
//! `U(t, x)`, the canonical selector of
//!
//! ```text
//!     V_n(t, x) = {ξ ∈ U(t, x) : |û_n(t) − ξ| ≤ k(t) |x̂(t) − x| + 1/n}.
//! ```

use serde::Serialize;

use crate::controls::{ControlSignal, PiecewiseSignal};
use crate::dynamics::{self, Grid, Stepper, Trajectory};
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::relax_convex;
use crate::relax_young::YoungControl;
use crate::Vector;

/// Slack added to `1/n` in the `V_n` inequality.
pub const FEEDBACK_TOLERANCE: f64 = 1e-6;

/// Time-sharing schedule: base grid, cycle count, and per-interval atom order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatterPlan {
    pub base: Grid,
    pub cycles: usize,
    /// Indices of the atoms with positive weight, in emission order.
    pub order: Vec<Vec<usize>>,
}

impl ChatterPlan {
    pub fn new(lam: &YoungControl, cycles: usize) -> Result<Self> {
        if cycles == 0 {
            return Err(Error::InvalidGrid("at least one chattering cycle is required".into()));
        }
        let order = lam
            .measures()
            .iter()
            .map(|mu| (0..mu.len()).filter(|&i| mu.weights()[i] > 0.0).collect())
            .collect();
        Ok(Self {
            base: lam.grid(),
            cycles,
            order,
        })
    }

    pub fn realize(&self, lam: &YoungControl) -> Result<PiecewiseSignal> {
        if lam.grid() != self.base || lam.measures().len() != self.order.len() {
            return Err(Error::InvalidGrid("plan was built for another Young control".into()));
        }
        let dt = self.base.step();
        let cycle = dt / self.cycles as f64;
        let mut breaks = vec![0.0];
        let mut values: Vec<Vector> = Vec::new();
        let mut push = |end: f64, v: &Vector| {
            let last = *breaks.last().expect("starts at 0");
            if end <= last {
                return;
            }
            if values.last() == Some(v) {
                *breaks.last_mut().expect("nonempty") = end;
            } else {
                breaks.push(end);
                values.push(v.clone());
            }
        };
        for (k, order) in self.order.iter().enumerate() {
            let mu = lam.measure(k);
            let t0 = self.base.time(k);
            for c in 0..self.cycles {
                let start = t0 + c as f64 * cycle;
                let stop = if c + 1 == self.cycles {
                    self.base.time(k + 1)
                } else {
                    t0 + (c + 1) as f64 * cycle
                };
                let mut offset = 0.0;
                for (pos, &i) in order.iter().enumerate() {
                    offset += mu.weights()[i] * cycle;
                    let end = if pos + 1 == order.len() { stop } else { start + offset };
                    push(end, &mu.atoms()[i]);
                }
            }
        }
        PiecewiseSignal::new(breaks, values)
    }
}

/// Chattering realization of `lam` with `n` cycles per base interval.
pub fn chatter_realize(lam: &YoungControl, n: usize) -> Result<PiecewiseSignal> {
    ChatterPlan::new(lam, n)?.realize(lam)
}

/// Chattering realization of `lam` carried onto the finer grid `sim`.
///
/// Sub-durations rarely fall on `sim` breakpoints, and plain sampling repeats
/// the same rounding in every cycle. Instead each step takes the atom of the
/// current base measure that keeps the running integral closest to the
/// exact one, so the partial integrals stay within a few steps of the
/// realization for every `n`.
pub fn chatter_on(lam: &YoungControl, n: usize, sim: Grid) -> Result<ControlSignal> {
    let exact = chatter_realize(lam, n)?;
    let factor = lam.grid().refinement_factor(sim)?;
    let h = sim.step();
    let mut error = Vector::zeros(lam.dim());
    let mut values = Vec::with_capacity(sim.intervals());
    for (j, inc) in exact.integrals_on(sim)?.iter().enumerate() {
        let mu = lam.measure(j / factor);
        let target = &error + inc;
        let (best, _) = mu
            .atoms()
            .iter()
            .zip(mu.weights())
            .filter(|(_, w)| **w > 0.0)
            .map(|(a, _)| (a, (&target - a * h).norm()))
            .fold(None, |acc: Option<(&Vector, f64)>, (a, d)| match acc {
                Some((_, bd)) if bd <= d => acc,
                _ => Some((a, d)),
            })
            .expect("measures have positive mass");
        error = target - best * h;
        values.push(best.clone());
    }
    ControlSignal::new(sim, values)
}

/// An ordinary pair obtained by tracking a target along the actual state.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub trajectory: Trajectory,
    pub control: ControlSignal,
    /// `max_k |v_k − target_k|`.
    pub max_correction: f64,
    /// `max_k (|v_k − target_k| − k(t_k)|x̂_k − x_k|)`; `None` without a reference.
    pub max_slack: Option<f64>,
}

/// Runs `v_k = proj_{U(t_k, x_k)}(target_k)` forward and, given the reference
/// trajectory `x̂`, checks the `V_n` inequality at every step.
pub fn feedback_correct(
    problem: &Problem,
    target: &ControlSignal,
    reference: Option<&Trajectory>,
    n: usize,
) -> Result<Feedback> {
    let grid = target.grid();
    if let Some(r) = reference {
        if r.grid != grid {
            return Err(Error::InvalidGrid("reference trajectory must share the target grid".into()));
        }
    }
    if n == 0 {
        return Err(Error::InvalidGrid("feedback index n must be positive".into()));
    }
    let stepper = Stepper::new(problem, grid)?;
    let mut x = stepper.initial_state()?;
    let mut values = Vec::with_capacity(grid.intervals());
    let mut max_correction: f64 = 0.0;
    let mut max_slack: Option<f64> = None;
    for k in 0..grid.intervals() {
        let t = grid.time(k);
        let v = problem.controls.nearest_point(t, &x, target.at(k));
        let gap = (&v - target.at(k)).norm();
        max_correction = max_correction.max(gap);
        if let Some(r) = reference {
            let allowance = problem.controls.lipschitz.at(t) * (&r.states[k] - &x).norm();
            let slack = gap - allowance;
            max_slack = Some(max_slack.map_or(slack, |s: f64| s.max(slack)));
            let bound = allowance + 1.0 / n as f64 + FEEDBACK_TOLERANCE;
            if gap > bound {
                return Err(Error::FeedbackBound { step: k, gap, bound });
            }
        }
        x = stepper.step(k, &x, &v)?;
        values.push(v);
    }
    let control = ControlSignal::new(grid, values)?;
    let trajectory = dynamics::solve_controlled(problem, &control)?;
    Ok(Feedback {
        trajectory,
        control,
        max_correction,
        max_slack,
    })
}

/// The chattered, feedback-corrected original pair for `n` cycles of `base`,
/// simulated on the grid of `x_sim`, the relaxed state on that grid.
pub fn chattered_pair(problem: &Problem, base: &YoungControl, x_sim: &Trajectory, n: usize) -> Result<Feedback> {
    let sim = x_sim.grid;
    let chatter = chatter_on(base, n, sim)?;
    // Targets are selections of U along the relaxed state.
    let target = ControlSignal::new(
        sim,
        (0..sim.intervals())
            .map(|k| problem.controls.nearest_point(sim.time(k), &x_sim.states[k], chatter.at(k)))
            .collect(),
    )?;
    feedback_correct(problem, &target, Some(x_sim), n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChatterOptions {
    /// Interval count of the grid the chattering cycles are laid on; the
    /// relaxed grid when `None`. Must divide the relaxed interval count.
    pub base_intervals: Option<usize>,
    /// Simulation grid for chattered controls; a multiple of the relaxed
    /// interval count.
    pub sim_intervals: usize,
}

impl Default for ChatterOptions {
    fn default() -> Self {
        Self {
            base_intervals: None,
            sim_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// `‖v_n − barycenter(λ̂)‖_w`.
    pub weak_gap: f64,
    /// `‖x_n − x̂‖_∞` on the simulation grid.
    pub state_gap: f64,
    /// `J(x_n, v_n)`.
    pub cost: f64,
    pub gap_to_mr: f64,
    /// Largest `|v − target| − k|x̂ − x|` along the run.
    pub feedback_slack: f64,
}

/// Convergence of chattered, feedback-corrected pairs to a relaxed pair
/// `(x̂, λ̂)` with value `m_r`, one row per cycle count.
pub fn convergence_table(
    problem: &Problem,
    x_hat: &Trajectory,
    lam: &YoungControl,
    m_r: f64,
    ns: &[usize],
    opts: &ChatterOptions,
) -> Result<Vec<ConvergenceRow>> {
    if x_hat.grid != lam.grid() {
        return Err(Error::InvalidGrid("relaxed state and control grids differ".into()));
    }
    let horizon = lam.grid().horizon();
    let base_grid = match opts.base_intervals {
        Some(k) => Grid::new(horizon, k)?,
        None => lam.grid(),
    };
    let base = if base_grid == lam.grid() {
        lam.clone()
    } else {
        lam.average_onto(base_grid)?
    };
    let sim = Grid::new(horizon, opts.sim_intervals)?;
    let lam_sim = lam.refine(sim)?;
    let x_sim = dynamics::solve_young(problem, &lam_sim)?;
    let bary_sim = lam_sim.barycenter_signal()?;

    let mut ns: Vec<usize> = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();

    let row = |n: usize| -> Result<ConvergenceRow> {
        let fb = chattered_pair(problem, &base, &x_sim, n)?;
        let cost = relax_convex::cost_J(problem, &fb.trajectory, &fb.control)?;
        Ok(ConvergenceRow {
            n,
            weak_gap: fb.control.sub(&bary_sim)?.weak_norm(),
            state_gap: fb.trajectory.distance(&x_sim)?,
            cost,
            gap_to_mr: (cost - m_r).abs(),
            feedback_slack: fb.max_slack.unwrap_or(0.0),
        })
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ns.par_iter().map(|&n| row(n)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ns.iter().map(|&n| row(n)).collect()
    }
}
