//! Direct transcription of the relaxed problems.
//!
//! On each interval the control is a weight vector `α_k` on the probability
//! simplex over the `n` sampled atoms of `U(t_k, x_k)`. The state is driven by
//! the barycenter and the objective is
//!
//! ```text
//!     Φ(α) = Σ_k Δ Σ_i α_{k,i} L(t_k, x_k, u_{k,i}),
//! ```
//!
//! minimized by projected gradient with finite-difference sensitivities and
//! Armijo backtracking from several starts. The optimal weights are finally
//! replaced by the envelope weights at the same barycenters, so the
//! transcription value coincides with both `J_r` and `Ĵ_r`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chattering::{self, ChatterOptions, ConvergenceRow};
use crate::controls::ControlSignal;
use crate::dynamics::{self, Grid, Stepper, Trajectory};
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::relax_convex::{self, lower_envelope};
use crate::relax_young::{self, DiscreteMeasure, YoungControl};
use crate::Vector;

/// Tolerance on `|m_r − m̂_r|`.
pub const TOL_EQUIV: f64 = 1e-4;
/// Slack in the sandwich `m_estimate ≥ m_r`.
pub const SANDWICH_TOLERANCE: f64 = 1e-6;
/// Above this many step evaluations per gradient, sensitivities are chained.
const GLOBAL_FD_BUDGET: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxMode {
    Convexified,
    Young,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Global differences when affordable, chained otherwise.
    #[default]
    Auto,
    /// Central differences of the full objective; each perturbation of
    /// `α_k` re-simulates from step `k`.
    Global,
    /// Central differences of the one-step maps, chained backwards through
    /// the trajectory.
    Chained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub fd_step: f64,
    pub armijo: f64,
    /// Convergence when the objective drops by less than `stall_tol` over
    /// `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tol: f64,
    /// Random simplex starts in addition to the uniform and vertex starts.
    pub random_starts: usize,
    pub seed: u64,
    pub gradient: GradientMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            fd_step: 1e-6,
            armijo: 1e-4,
            stall_window: 20,
            stall_tol: 1e-10,
            random_starts: 0,
            seed: 0,
            gradient: GradientMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartSummary {
    pub label: String,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub mode: RelaxMode,
    pub atoms: usize,
    pub trajectory: Trajectory,
    pub young: YoungControl,
    /// Barycenter signal of `young`.
    pub control: ControlSignal,
    /// `J_r` of the barycenter pair.
    pub value_convexified: f64,
    /// `Ĵ_r` of the Young pair.
    pub value_young: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Trace of the best start.
    pub trace: Vec<TraceEntry>,
    pub starts: Vec<StartSummary>,
    /// Distinct starts ended at the same value with different weights.
    pub tie: bool,
}

impl RelaxedSolution {
    /// The value reported for the solution's mode.
    pub fn value(&self) -> f64 {
        match self.mode {
            RelaxMode::Convexified => self.value_convexified,
            RelaxMode::Young => self.value_young,
        }
    }
}

/// Euclidean projection onto the probability simplex (sorting method).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, s) in sorted.iter().enumerate() {
        cumulative += s;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

struct Transcription<'a> {
    problem: &'a Problem,
    stepper: Stepper<'a>,
    grid: Grid,
    n: usize,
    /// Atoms per interval.
    width: usize,
    x0: Vector,
}

impl<'a> Transcription<'a> {
    fn new(problem: &'a Problem, grid: Grid, n: usize) -> Result<Self> {
        let stepper = Stepper::new(problem, grid)?;
        let x0 = stepper.initial_state()?;
        let width = problem.controls.sample_atoms(0.0, &x0, n).len();
        Ok(Self {
            problem,
            stepper,
            grid,
            n,
            width,
            x0,
        })
    }

    fn atoms(&self, k: usize, x: &Vector) -> Result<Vec<Vector>> {
        let atoms = self.problem.controls.sample_atoms(self.grid.time(k), x, self.n);
        if atoms.len() != self.width {
            return Err(Error::Dimension(format!(
                "control net changed size on interval {k}: {} atoms, expected {}",
                atoms.len(),
                self.width
            )));
        }
        Ok(atoms)
    }

    /// Stage cost and next state for weights `w` at `(k, x)`.
    fn stage(&self, k: usize, x: &Vector, w: &[f64]) -> Result<(f64, Vector)> {
        let t = self.grid.time(k);
        let atoms = self.atoms(k, x)?;
        let mut ubar = Vector::zeros(self.problem.control_dim());
        let mut cost = 0.0;
        for (a, wi) in atoms.iter().zip(w) {
            ubar.axpy(*wi, a, 1.0);
            cost += wi * self.problem.cost.eval(t, x, a);
        }
        let next = self.stepper.step(k, x, &ubar)?;
        Ok((self.grid.step() * cost, next))
    }

    fn weights<'b>(&self, alpha: &'b [f64], k: usize) -> &'b [f64] {
        &alpha[k * self.width..(k + 1) * self.width]
    }

    /// States `x_0..x_K` and stage costs.
    fn rollout(&self, alpha: &[f64]) -> Result<(Vec<Vector>, Vec<f64>)> {
        let steps = self.grid.intervals();
        let mut states = Vec::with_capacity(steps + 1);
        let mut costs = Vec::with_capacity(steps);
        states.push(self.x0.clone());
        for k in 0..steps {
            let (c, next) = self.stage(k, &states[k], self.weights(alpha, k))?;
            costs.push(c);
            states.push(next);
        }
        Ok((states, costs))
    }

    fn objective(&self, alpha: &[f64]) -> Result<f64> {
        Ok(self.rollout(alpha)?.1.iter().sum())
    }

    /// Cost from step `k` on, starting at `x` with `w` on interval `k`.
    fn tail(&self, alpha: &[f64], k: usize, x: &Vector, w: &[f64]) -> Result<f64> {
        let (mut total, mut state) = self.stage(k, x, w)?;
        for j in k + 1..self.grid.intervals() {
            let (c, next) = self.stage(j, &state, self.weights(alpha, j))?;
            total += c;
            state = next;
        }
        Ok(total)
    }

    fn gradient(&self, alpha: &[f64], method: GradientMethod, h: f64) -> Result<Vec<f64>> {
        let steps = self.grid.intervals();
        let method = match method {
            GradientMethod::Auto if steps * steps * self.width <= GLOBAL_FD_BUDGET => GradientMethod::Global,
            GradientMethod::Auto => GradientMethod::Chained,
            m => m,
        };
        let (states, _) = self.rollout(alpha)?;
        let mut grad = vec![0.0; alpha.len()];
        match method {
            GradientMethod::Global | GradientMethod::Auto => {
                for k in 0..steps {
                    let mut w = self.weights(alpha, k).to_vec();
                    for i in 0..self.width {
                        let orig = w[i];
                        w[i] = orig + h;
                        let plus = self.tail(alpha, k, &states[k], &w)?;
                        w[i] = orig - h;
                        let minus = self.tail(alpha, k, &states[k], &w)?;
                        w[i] = orig;
                        grad[k * self.width + i] = (plus - minus) / (2.0 * h);
                    }
                }
            }
            GradientMethod::Chained => {
                let dim = self.x0.len();
                // Costate p_{k+1} = ∂(tail cost from k+1)/∂x_{k+1}.
                let mut p = Vector::zeros(dim);
                for k in (0..steps).rev() {
                    let psi = |x: &Vector, w: &[f64]| -> Result<f64> {
                        let (c, next) = self.stage(k, x, w)?;
                        Ok(c + p.dot(&next))
                    };
                    let x = &states[k];
                    let mut w = self.weights(alpha, k).to_vec();
                    for i in 0..self.width {
                        let orig = w[i];
                        w[i] = orig + h;
                        let plus = psi(x, &w)?;
                        w[i] = orig - h;
                        let minus = psi(x, &w)?;
                        w[i] = orig;
                        grad[k * self.width + i] = (plus - minus) / (2.0 * h);
                    }
                    let mut next_p = Vector::zeros(dim);
                    let mut xp = x.clone();
                    for j in 0..dim {
                        let hj = h * x[j].abs().max(1.0);
                        xp[j] = x[j] + hj;
                        let plus = psi(&xp, &w)?;
                        xp[j] = x[j] - hj;
                        let minus = psi(&xp, &w)?;
                        xp[j] = x[j];
                        next_p[j] = (plus - minus) / (2.0 * hj);
                    }
                    p = next_p;
                }
            }
        }
        Ok(grad)
    }

    fn project(&self, alpha: &[f64]) -> Vec<f64> {
        alpha
            .chunks(self.width)
            .flat_map(project_simplex)
            .collect()
    }

    fn descend(&self, start: Vec<f64>, opts: &SolverOptions) -> Result<Descent> {
        let mut alpha = self.project(&start);
        let mut f = self.objective(&alpha)?;
        let mut trace = vec![TraceEntry {
            iteration: 0,
            objective: f,
            step: 0.0,
        }];
        let mut history = vec![f];
        let mut previous: Option<(Vec<f64>, Vec<f64>, f64)> = None;
        for iteration in 1..=opts.max_iter {
            let g = self.gradient(&alpha, opts.gradient, opts.fd_step)?;
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gmax == 0.0 {
                return Ok(Descent::done(alpha, f, trace, iteration - 1, true));
            }
            // Barzilai-Borwein trial step, falling back to doubling the last one.
            let mut s = match &previous {
                None => 1.0 / gmax,
                Some((a0, g0, s0)) => {
                    let (mut ss, mut sy) = (0.0, 0.0);
                    for i in 0..alpha.len() {
                        let da = alpha[i] - a0[i];
                        ss += da * da;
                        sy += da * (g[i] - g0[i]);
                    }
                    if sy > 0.0 && ss > 0.0 {
                        (ss / sy).min(1e6 / gmax)
                    } else {
                        2.0 * s0
                    }
                }
            };
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = alpha.iter().zip(&g).map(|(a, gi)| a - s * gi).collect();
                let trial = self.project(&trial);
                let d: Vec<f64> = trial.iter().zip(&alpha).map(|(a, b)| a - b).collect();
                if d.iter().all(|v| v.abs() < 1e-15) {
                    break;
                }
                let slope: f64 = g.iter().zip(&d).map(|(gi, di)| gi * di).sum();
                let ft = self.objective(&trial)?;
                if ft <= f + opts.armijo * slope && ft <= f {
                    accepted = Some((trial, ft));
                    break;
                }
                s *= 0.5;
            }
            let Some((next, fnext)) = accepted else {
                // No descent along the projected arc: stationary to FD accuracy.
                return Ok(Descent::done(alpha, f, trace, iteration - 1, true));
            };
            previous = Some((std::mem::replace(&mut alpha, next), g, s));
            f = fnext;
            trace.push(TraceEntry {
                iteration,
                objective: f,
                step: s,
            });
            history.push(f);
            if iteration >= opts.stall_window
                && history[iteration - opts.stall_window] - f < opts.stall_tol
            {
                return Ok(Descent::done(alpha, f, trace, iteration, true));
            }
        }
        Ok(Descent::done(alpha, f, trace, opts.max_iter, false))
    }

    /// Replaces each `α_k` by the envelope weights at the same barycenter and
    /// returns the resulting Young control.
    fn polish(&self, alpha: &[f64]) -> Result<YoungControl> {
        let mut x = self.x0.clone();
        let mut measures = Vec::with_capacity(self.grid.intervals());
        for k in 0..self.grid.intervals() {
            let t = self.grid.time(k);
            let atoms = self.atoms(k, &x)?;
            let w = self.weights(alpha, k);
            let pairs: Vec<(Vector, f64)> = atoms
                .iter()
                .map(|a| (a.clone(), self.problem.cost.eval(t, &x, a)))
                .collect();
            let mut ubar = Vector::zeros(self.problem.control_dim());
            let mut current = 0.0;
            for ((a, eta), wi) in pairs.iter().zip(w) {
                ubar.axpy(*wi, a, 1.0);
                current += wi * eta;
            }
            let chosen = match lower_envelope(&pairs, &ubar) {
                Some(env) if env.value <= current => env.weights,
                _ => w.to_vec(),
            };
            // Projection leaves round-off mass on inactive atoms.
            let chosen: Vec<f64> = chosen.iter().map(|v| if *v < 1e-12 { 0.0 } else { *v }).collect();
            let mu = DiscreteMeasure::from_weighted(&atoms, &chosen)?;
            x = self.stepper.step(k, &x, &mu.barycenter())?;
            measures.push(mu);
        }
        YoungControl::new(self.grid, measures)
    }
}

struct Descent {
    alpha: Vec<f64>,
    value: f64,
    trace: Vec<TraceEntry>,
    iterations: usize,
    converged: bool,
}

impl Descent {
    fn done(alpha: Vec<f64>, value: f64, trace: Vec<TraceEntry>, iterations: usize, converged: bool) -> Self {
        Self {
            alpha,
            value,
            trace,
            iterations,
            converged,
        }
    }
}

fn starts(steps: usize, width: usize, opts: &SolverOptions) -> Vec<(String, Vec<f64>)> {
    let mut out = vec![("uniform".to_string(), vec![1.0 / width as f64; steps * width])];
    for i in 0..width {
        let mut alpha = vec![0.0; steps * width];
        for k in 0..steps {
            alpha[k * width + i] = 1.0;
        }
        out.push((format!("vertex{i}"), alpha));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for r in 0..opts.random_starts {
        let mut alpha: Vec<f64> = (0..steps * width).map(|_| rng.gen::<f64>()).collect();
        for chunk in alpha.chunks_mut(width) {
            let s: f64 = chunk.iter().sum();
            chunk.iter_mut().for_each(|v| *v /= s);
        }
        out.push((format!("random{r}"), alpha));
    }
    out
}

/// Solves the transcribed relaxed problem on `grid` with `n`-point nets of
/// `U`. Both modes run the same inner problem; `mode` selects the reported
/// value.
pub fn solve_relaxed(
    problem: &Problem,
    grid: Grid,
    n: usize,
    mode: RelaxMode,
    opts: &SolverOptions,
) -> Result<RelaxedSolution> {
    problem.check()?;
    if (grid.horizon() - problem.horizon).abs() > 1e-12 * problem.horizon.max(1.0) {
        return Err(Error::InvalidGrid("relaxation grid must cover the problem horizon".into()));
    }
    let tr = Transcription::new(problem, grid, n)?;
    let initial = starts(grid.intervals(), tr.width, opts);

    #[cfg(feature = "parallel")]
    let runs: Vec<Result<Descent>> = {
        use rayon::prelude::*;
        initial.par_iter().map(|(_, a)| tr.descend(a.clone(), opts)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Result<Descent>> = initial.iter().map(|(_, a)| tr.descend(a.clone(), opts)).collect();
    let runs: Vec<Descent> = runs.into_iter().collect::<Result<_>>()?;

    let best = (0..runs.len())
        .min_by(|&a, &b| runs[a].value.total_cmp(&runs[b].value).then(a.cmp(&b)))
        .expect("at least one start");
    let tie_tol = 1e-9 * runs[best].value.abs().max(1.0);
    let tie = runs.iter().enumerate().any(|(j, r)| {
        j != best
            && (r.value - runs[best].value).abs() <= tie_tol
            && r.alpha
                .iter()
                .zip(&runs[best].alpha)
                .any(|(a, b)| (a - b).abs() > 1e-6)
    });
    let summaries = initial
        .iter()
        .zip(&runs)
        .map(|((label, _), r)| StartSummary {
            label: label.clone(),
            value: r.value,
            iterations: r.iterations,
            converged: r.converged,
        })
        .collect();

    let young = tr.polish(&runs[best].alpha)?;
    let trajectory = dynamics::solve_young(problem, &young)?;
    let control = young.barycenter_signal()?;
    let value_young = relax_young::cost_Jhat(problem, &trajectory, &young)?;
    let value_convexified = relax_convex::cost_Jr(problem, &trajectory, &control, n)?;
    let winner = &runs[best];
    Ok(RelaxedSolution {
        mode,
        atoms: n,
        trajectory,
        young,
        control,
        value_convexified,
        value_young,
        converged: winner.converged,
        iterations: winner.iterations,
        trace: winner.trace.clone(),
        starts: summaries,
        tie,
    })
}

/// Value of the relaxed problems, of chattered original pairs, and the
/// resulting gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationReport {
    pub problem: String,
    pub intervals: usize,
    pub atoms: usize,
    pub m_r: f64,
    pub m_hat_r: f64,
    /// Smallest original cost over the chattering table.
    pub m_estimate: f64,
    pub best_n: usize,
    pub converged: bool,
    pub tie: bool,
    pub equivalence_ok: bool,
    pub sandwich_ok: bool,
    pub table: Vec<ConvergenceRow>,
    pub trace: Vec<TraceEntry>,
}

/// Chatters the relaxed solution for each `n`, corrects along the actual
/// state, and compares the best original cost with the relaxed values.
pub fn estimate_original(
    problem: &Problem,
    solution: &RelaxedSolution,
    ns: &[usize],
    chatter: &ChatterOptions,
) -> Result<RelaxationReport> {
    if ns.is_empty() {
        return Err(Error::InvalidGrid("chattering list is empty".into()));
    }
    let m_r = solution.value_convexified;
    let m_hat_r = solution.value_young;
    let table =
        chattering::convergence_table(problem, &solution.trajectory, &solution.young, m_r, ns, chatter)?;
    let best = table
        .iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .expect("nonempty table");
    Ok(RelaxationReport {
        problem: problem.name.clone(),
        intervals: solution.trajectory.grid.intervals(),
        atoms: solution.atoms,
        m_r,
        m_hat_r,
        m_estimate: best.cost,
        best_n: best.n,
        converged: solution.converged,
        tie: solution.tie,
        equivalence_ok: (m_r - m_hat_r).abs() <= TOL_EQUIV,
        sandwich_ok: best.cost >= m_r - SANDWICH_TOLERANCE,
        trace: solution.trace.clone(),
        table,
    })
}
