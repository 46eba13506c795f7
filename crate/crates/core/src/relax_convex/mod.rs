//! First relaxation: the convexified problem with running cost `L̂**`.
//!
//! `Γ(t, x) = {(u, η) : u ∈ U(t, x), L(t, x, u) ≤ η ≤ a_ĉ(t)}` is sampled on
//! a finite net of `U(t, x)`; `L̂**(t, x, ·)` is the lower boundary of its
//! convex hull, finite exactly on `conv U(t, x)`.

mod cost;
mod envelope;
pub mod lp;

use serde::Serialize;

use crate::controls::ControlSignal;
use crate::dynamics::{self, Trajectory};
use crate::error::{Error, Result};
use crate::problem::Problem;

pub use cost::{CostKind, CostSpec, Monomial};
pub use envelope::{
    biconjugate, envelope_at, gamma_sample, hull_distance, lower_envelope, Envelope, GammaSample,
    BALL_TOLERANCE,
};

/// Tolerance on `dist(u_k, U(t_k, x_k))`.
pub const TOL_U: f64 = 1e-8;
/// Tolerance on the replayed recursion.
pub const TOL_X: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    /// `u(t) ∈ U(t, x(t))`.
    Original,
    /// `u(t) ∈ conv U(t, x(t))`.
    Convexified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The state sequence does not reproduce the scheme.
    State,
    /// The control leaves the (convexified) constraint set.
    Control,
    /// The control exceeds the radius `M`, so the scheme is not defined.
    ControlBound,
    /// `x₀` is not in `cl D(A)`.
    InitialState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityFailure {
    pub index: usize,
    pub kind: FailureKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub mode: Admissibility,
    pub admissible: bool,
    /// First failing index (state index for `State`, interval otherwise).
    pub failure: Option<AdmissibilityFailure>,
    pub max_control_distance: f64,
    pub max_state_deviation: f64,
}

impl AdmissibilityReport {
    pub fn describe(&self) -> String {
        match &self.failure {
            None => format!("{:?} admissible", self.mode),
            Some(f) => format!("{:?} check failed at index {}: {:?} ({})", self.mode, f.index, f.kind, f.value),
        }
    }
}

fn check_shapes(problem: &Problem, traj: &Trajectory, u: &ControlSignal) -> Result<()> {
    if traj.grid != u.grid() {
        return Err(Error::InvalidGrid("trajectory and control grids differ".into()));
    }
    if traj.states.len() != traj.grid.intervals() + 1 {
        return Err(Error::Dimension("trajectory needs K + 1 states".into()));
    }
    if traj.dim() != problem.state_dim() || u.dim() != problem.control_dim() {
        return Err(Error::Dimension("pair does not match the problem dimensions".into()));
    }
    Ok(())
}

/// Checks membership of `(x, u)` in `P` (original) or `P_c` (convexified):
/// control constraints along the given states, plus an exact replay of the
/// scheme.
pub fn check_admissible(
    problem: &Problem,
    traj: &Trajectory,
    u: &ControlSignal,
    mode: Admissibility,
    n: usize,
) -> Result<AdmissibilityReport> {
    check_shapes(problem, traj, u)?;
    let grid = traj.grid;
    let mut first: Option<AdmissibilityFailure> = None;
    let mut note = |f: AdmissibilityFailure| {
        if first.is_none() {
            first = Some(f);
        }
    };

    let replay = match dynamics::solve_controlled(problem, u) {
        Ok(r) => Some(r),
        Err(Error::ControlBound { index, norm, .. }) => {
            note(AdmissibilityFailure {
                index,
                kind: FailureKind::ControlBound,
                value: norm,
            });
            None
        }
        Err(Error::InitialState { distance }) => {
            note(AdmissibilityFailure {
                index: 0,
                kind: FailureKind::InitialState,
                value: distance,
            });
            None
        }
        Err(e) => return Err(e),
    };

    let mut max_control: f64 = 0.0;
    let mut max_state: f64 = 0.0;
    for k in 0..=grid.intervals() {
        if let Some(r) = &replay {
            let dev = (&traj.states[k] - &r.states[k]).norm();
            max_state = max_state.max(dev);
            if !(dev <= TOL_X) {
                note(AdmissibilityFailure {
                    index: k,
                    kind: FailureKind::State,
                    value: dev,
                });
            }
        }
        if k == grid.intervals() {
            break;
        }
        let (t, x, uk) = (grid.time(k), &traj.states[k], u.at(k));
        let dist = match mode {
            Admissibility::Original => problem.controls.distance(t, x, uk),
            Admissibility::Convexified => hull_distance(&problem.controls.sample_atoms(t, x, n), uk),
        };
        max_control = max_control.max(dist);
        if !(dist <= TOL_U) {
            note(AdmissibilityFailure {
                index: k,
                kind: FailureKind::Control,
                value: dist,
            });
        }
    }
    Ok(AdmissibilityReport {
        mode,
        admissible: first.is_none(),
        failure: first,
        max_control_distance: max_control,
        max_state_deviation: max_state,
    })
}

/// Left-endpoint quadrature `Σ_k Δ L(t_k, x_k, u_k)` without admissibility checks.
pub fn running_cost(problem: &Problem, traj: &Trajectory, u: &ControlSignal) -> Result<f64> {
    check_shapes(problem, traj, u)?;
    let grid = traj.grid;
    Ok(grid.step()
        * (0..grid.intervals())
            .map(|k| problem.cost.eval(grid.time(k), &traj.states[k], u.at(k)))
            .sum::<f64>())
}

/// `J(x, u)` for a pair admissible for the original problem.
#[allow(non_snake_case)]
pub fn cost_J(problem: &Problem, traj: &Trajectory, u: &ControlSignal) -> Result<f64> {
    let report = check_admissible(problem, traj, u, Admissibility::Original, 0)?;
    if !report.admissible {
        return Err(Error::Inadmissible(report.describe()));
    }
    running_cost(problem, traj, u)
}

/// `J_r(x, u) = Σ_k Δ L̂**(t_k, x_k, u_k)`; `+∞` when some `u_k` leaves the hull.
#[allow(non_snake_case)]
pub fn cost_Jr(problem: &Problem, traj: &Trajectory, u: &ControlSignal, n: usize) -> Result<f64> {
    check_shapes(problem, traj, u)?;
    let grid = traj.grid;
    let mut total = 0.0;
    for k in 0..grid.intervals() {
        let v = biconjugate(problem, grid.time(k), &traj.states[k], u.at(k), n)?;
        if v.is_infinite() {
            return Ok(f64::INFINITY);
        }
        total += v;
    }
    Ok(grid.step() * total)
}
