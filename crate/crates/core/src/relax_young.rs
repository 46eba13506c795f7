//! Second relaxation: piecewise-constant Young-measure controls.
//!
//! On each grid interval the control is a finitely supported probability
//! measure `λ_k` on `U(t_k, x_k)`. Dynamics see only its barycenter, the cost
//! integrates `L` against it.

use std::fmt;

use serde::Serialize;

use crate::controls::ControlSignal;
use crate::dynamics::{Grid, Trajectory};
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::Vector;

/// Tolerance on `Σ wᵢ = 1`.
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Atoms closer than this are the same atom.
pub const ATOM_MERGE_TOLERANCE: f64 = 1e-12;
/// Tolerance on atom membership in `U(t_k, x_k)`.
pub const SUPPORT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<Vector>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms with {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let m = atoms[0].len();
        if m == 0 || atoms.iter().any(|a| a.len() != m) {
            return Err(Error::InvalidMeasure("atoms must share a positive dimension".into()));
        }
        if atoms.iter().flat_map(|a| a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("atoms must be finite".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not a probability")));
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("total mass {mass}")));
        }
        for i in 0..atoms.len() {
            for j in 0..i {
                if (&atoms[i] - &atoms[j]).norm() <= ATOM_MERGE_TOLERANCE {
                    return Err(Error::InvalidMeasure(format!("atoms {j} and {i} coincide")));
                }
            }
        }
        Ok(Self { atoms, weights })
    }

    pub fn dirac(u: Vector) -> Self {
        Self::new(vec![u], vec![1.0]).expect("a finite point carries a Dirac measure")
    }

    /// Builds a measure from possibly repeated atoms and unnormalized
    /// nonnegative weights: coincident atoms merge, zero weights drop, and the
    /// mass is rescaled to one.
    pub fn from_weighted(atoms: &[Vector], weights: &[f64]) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure("atom and weight counts differ".into()));
        }
        let mut merged_atoms: Vec<Vector> = Vec::new();
        let mut merged_weights: Vec<f64> = Vec::new();
        for (a, &w) in atoms.iter().zip(weights) {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidMeasure(format!("weight {w} is not nonnegative")));
            }
            if w == 0.0 {
                continue;
            }
            match merged_atoms
                .iter()
                .position(|b| (a - b).norm() <= ATOM_MERGE_TOLERANCE)
            {
                Some(j) => merged_weights[j] += w,
                None => {
                    merged_atoms.push(a.clone());
                    merged_weights.push(w);
                }
            }
        }
        let mass: f64 = merged_weights.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidMeasure("no positive weight".into()));
        }
        for w in &mut merged_weights {
            *w /= mass;
        }
        Self::new(merged_atoms, merged_weights)
    }

    pub fn atoms(&self) -> &[Vector] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn barycenter(&self) -> Vector {
        barycenter(self)
    }

    /// `∫ φ dμ`.
    pub fn integrate(&self, phi: impl Fn(&Vector) -> f64) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| w * phi(a)).sum()
    }
}

/// `Σ wᵢ uᵢ`.
pub fn barycenter(mu: &DiscreteMeasure) -> Vector {
    let mut b = Vector::zeros(mu.dim());
    for (a, w) in mu.atoms.iter().zip(&mu.weights) {
        b.axpy(*w, a, 1.0);
    }
    b
}

/// `λ(t) = measures[k]` on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct YoungControl {
    grid: Grid,
    measures: Vec<DiscreteMeasure>,
}

impl YoungControl {
    pub fn new(grid: Grid, measures: Vec<DiscreteMeasure>) -> Result<Self> {
        if measures.len() != grid.intervals() {
            return Err(Error::Dimension(format!(
                "Young control needs {} measures, got {}",
                grid.intervals(),
                measures.len()
            )));
        }
        let m = measures[0].dim();
        if measures.iter().any(|mu| mu.dim() != m) {
            return Err(Error::Dimension("measures must share the control dimension".into()));
        }
        Ok(Self { grid, measures })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn measures(&self) -> &[DiscreteMeasure] {
        &self.measures
    }

    pub fn measure(&self, k: usize) -> &DiscreteMeasure {
        &self.measures[k]
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    pub fn barycenter_signal(&self) -> Result<ControlSignal> {
        ControlSignal::new(self.grid, self.measures.iter().map(barycenter).collect())
    }

    /// Exact copy on a finer grid.
    pub fn refine(&self, fine: Grid) -> Result<Self> {
        let factor = self.grid.refinement_factor(fine)?;
        let measures = (0..fine.intervals())
            .map(|j| self.measures[j / factor].clone())
            .collect();
        Self::new(fine, measures)
    }

    /// Time average onto a coarser grid: each coarse measure is the equal-mass
    /// mixture of the fine measures it contains.
    pub fn average_onto(&self, coarse: Grid) -> Result<Self> {
        let factor = coarse.refinement_factor(self.grid)?;
        let measures = (0..coarse.intervals())
            .map(|c| {
                let block = &self.measures[c * factor..(c + 1) * factor];
                let atoms: Vec<Vector> = block.iter().flat_map(|mu| mu.atoms.iter().cloned()).collect();
                let weights: Vec<f64> = block.iter().flat_map(|mu| mu.weights.iter().copied()).collect();
                DiscreteMeasure::from_weighted(&atoms, &weights)
            })
            .collect::<Result<_>>()?;
        Self::new(coarse, measures)
    }
}

/// `δ_{u(t)}` for an ordinary control.
pub fn dirac_embed(u: &ControlSignal) -> YoungControl {
    let measures = u.values().iter().cloned().map(DiscreteMeasure::dirac).collect();
    YoungControl::new(u.grid(), measures).expect("one Dirac per interval")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportViolation {
    pub interval: usize,
    pub atom: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportReport {
    pub ok: bool,
    pub max_distance: f64,
    /// First atom found outside `U(t_k, x_k)`.
    pub violation: Option<SupportViolation>,
}

fn check_grids(problem: &Problem, traj: &Trajectory, lam: &YoungControl) -> Result<()> {
    if traj.grid != lam.grid {
        return Err(Error::InvalidGrid("trajectory and Young control grids differ".into()));
    }
    if lam.dim() != problem.control_dim() || traj.dim() != problem.state_dim() {
        return Err(Error::Dimension("pair does not match the problem dimensions".into()));
    }
    Ok(())
}

/// Checks `λ(t_k)(U(t_k, x_k)) = 1`: every atom lies in the constraint set.
pub fn young_support_check(
    problem: &Problem,
    traj: &Trajectory,
    lam: &YoungControl,
) -> Result<SupportReport> {
    check_grids(problem, traj, lam)?;
    let mut max_distance: f64 = 0.0;
    let mut violation = None;
    for (k, mu) in lam.measures.iter().enumerate() {
        let (t, x) = (lam.grid.time(k), &traj.states[k]);
        for (i, a) in mu.atoms.iter().enumerate() {
            let d = problem.controls.distance(t, x, a);
            max_distance = max_distance.max(d);
            if !(d <= SUPPORT_TOLERANCE) && violation.is_none() {
                violation = Some(SupportViolation {
                    interval: k,
                    atom: i,
                    distance: d,
                });
            }
        }
    }
    Ok(SupportReport {
        ok: violation.is_none(),
        max_distance,
        violation,
    })
}

/// `Ĵ_r(x, λ) = Σ_k Δ Σ_i w_{k,i} L(t_k, x_k, u_{k,i})`.
#[allow(non_snake_case)]
pub fn cost_Jhat(problem: &Problem, traj: &Trajectory, lam: &YoungControl) -> Result<f64> {
    let report = young_support_check(problem, traj, lam)?;
    if let Some(v) = report.violation {
        return Err(Error::Support {
            interval: v.interval,
            atom: v.atom,
            distance: v.distance,
        });
    }
    let grid = lam.grid;
    Ok(grid.step()
        * lam
            .measures
            .iter()
            .enumerate()
            .map(|(k, mu)| {
                let (t, x) = (grid.time(k), &traj.states[k]);
                mu.integrate(|u| problem.cost.eval(t, x, u))
            })
            .sum::<f64>())
}

/// Registered test integrands `φ(t, u)` for the narrow topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    One,
    Coord(usize),
    Product(usize, usize),
    CosTimeCoord(usize),
    NormSq,
}

impl TestFunction {
    /// `{1, u_j, u_j u_l (j ≤ l), cos(πt) u_j, |u|²}` for controls in `ℝᵐ`.
    pub fn registered(m: usize) -> Vec<TestFunction> {
        let mut family = vec![TestFunction::One];
        family.extend((0..m).map(TestFunction::Coord));
        for j in 0..m {
            family.extend((j..m).map(|l| TestFunction::Product(j, l)));
        }
        family.extend((0..m).map(TestFunction::CosTimeCoord));
        family.push(TestFunction::NormSq);
        family
    }

    pub fn eval(&self, t: f64, u: &Vector) -> f64 {
        match *self {
            TestFunction::One => 1.0,
            TestFunction::Coord(j) => u[j],
            TestFunction::Product(j, l) => u[j] * u[l],
            TestFunction::CosTimeCoord(j) => (std::f64::consts::PI * t).cos() * u[j],
            TestFunction::NormSq => u.norm_squared(),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::One => write!(f, "1"),
            TestFunction::Coord(j) => write!(f, "u{}", j + 1),
            TestFunction::Product(j, l) => write!(f, "u{}*u{}", j + 1, l + 1),
            TestFunction::CosTimeCoord(j) => write!(f, "cos(pi t)*u{}", j + 1),
            TestFunction::NormSq => write!(f, "|u|^2"),
        }
    }
}

/// `I_φ(λ) = Σ_k Δ Σ_i w_{k,i} φ(t_k, u_{k,i})`.
pub fn narrow_functional(lam: &YoungControl, phi: TestFunction) -> f64 {
    let grid = lam.grid;
    grid.step()
        * lam
            .measures
            .iter()
            .enumerate()
            .map(|(k, mu)| mu.integrate(|u| phi.eval(grid.time(k), u)))
            .sum::<f64>()
}
