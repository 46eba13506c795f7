//! Scenario files, the built-in problem library, and hypothesis validation.
//!
//! A scenario is a JSON document with a `problem` block (data and declared
//! hypothesis profiles), a `numerics` block, an optional `output` block and
//! an optional `control` block used by `solve`.

use nalgebra::dmatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chattering::ChatterOptions;
use crate::controls::{ControlSetKind, ControlSetSpec, ControlSignal, Saturation};
use crate::dynamics::{FieldKind, FieldSpec, Grid};
use crate::error::{Error, Result};
use crate::monotone::MonotoneOperator;
use crate::optimizer::SolverOptions;
use crate::problem::Problem;
use crate::profile::StepProfile;
use crate::relax_convex::{CostKind, CostSpec};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub name: String,
    /// `N`.
    pub state_dim: usize,
    /// `m`.
    pub control_dim: usize,
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub operator: MonotoneOperator,
    pub field: FieldSpec,
    pub controls: ControlSetSpec,
    pub cost: CostSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    /// Relaxation grid `K`.
    pub grid: usize,
    /// Points per net of `U(t, x)`.
    pub atoms: usize,
    /// Chattering cycle counts.
    pub chatter: Vec<usize>,
    /// Grid on which chattered controls are simulated.
    pub sim_grid: usize,
    /// Interval count of the chattering base grid; the relaxation grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chatter_base: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl Numerics {
    pub fn chatter_options(&self) -> ChatterOptions {
        ChatterOptions {
            base_intervals: self.chatter_base,
            sim_intervals: self.sim_grid,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            seed: self.seed,
            ..self.solver.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

/// An ordinary control for `solve`: either constant or one value per
/// interval of the relaxation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlBlock {
    Constant(Vec<f64>),
    Values(Vec<Vec<f64>>),
}

impl ControlBlock {
    pub fn to_signal(&self, grid: Grid) -> Result<ControlSignal> {
        match self {
            ControlBlock::Constant(v) => Ok(ControlSignal::constant(grid, Vector::from_vec(v.clone()))),
            ControlBlock::Values(rows) => ControlSignal::new(
                grid,
                rows.iter().map(|r| Vector::from_vec(r.clone())).collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub problem: ProblemBlock,
    pub numerics: Numerics,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlBlock>,
}

impl Scenario {
    /// Parses and structurally checks a scenario; errors carry the JSON path.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            Error::schema(if path == "." { "$".to_string() } else { path }, e.into_inner().to_string())
        })?;
        scenario.check()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios serialize")
    }

    fn check(&self) -> Result<()> {
        let p = &self.problem;
        let n = &self.numerics;
        let problem = self.to_problem_unchecked();
        problem.check().map_err(|e| Error::schema("problem", e.to_string()))?;
        if p.operator.dim() != p.state_dim {
            return Err(Error::schema("problem.operator", format!("acts on ℝ^{}, state_dim is {}", p.operator.dim(), p.state_dim)));
        }
        if p.controls.dim() != p.control_dim {
            return Err(Error::schema("problem.controls", format!("lives in ℝ^{}, control_dim is {}", p.controls.dim(), p.control_dim)));
        }
        if n.grid == 0 || n.sim_grid == 0 || n.atoms == 0 {
            return Err(Error::schema("numerics", "grid, sim_grid and atoms must be positive"));
        }
        if !n.sim_grid.is_multiple_of(n.grid) {
            return Err(Error::schema("numerics.sim_grid", format!("{} is not a multiple of grid {}", n.sim_grid, n.grid)));
        }
        if let Some(base) = n.chatter_base {
            if base == 0 || !n.grid.is_multiple_of(base) {
                return Err(Error::schema("numerics.chatter_base", format!("{base} must divide grid {}", n.grid)));
            }
        }
        if n.chatter.is_empty() || n.chatter.contains(&0) {
            return Err(Error::schema("numerics.chatter", "cycle counts must be a nonempty list of positive integers"));
        }
        if let Some(ControlBlock::Values(rows)) = &self.control {
            if rows.len() != n.grid {
                return Err(Error::schema("control.values", format!("{} rows for grid {}", rows.len(), n.grid)));
            }
        }
        Ok(())
    }

    fn to_problem_unchecked(&self) -> Problem {
        let p = &self.problem;
        Problem {
            name: p.name.clone(),
            horizon: p.horizon,
            x0: Vector::from_vec(p.x0.clone()),
            operator: p.operator.clone(),
            field: p.field.clone(),
            controls: p.controls.clone(),
            cost: p.cost.clone(),
        }
    }

    pub fn to_problem(&self) -> Result<Problem> {
        self.check()?;
        Ok(self.to_problem_unchecked())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.problem.horizon, self.numerics.grid)
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["p1", "p2", "p3", "p4"]
    }

    pub fn builtin(name: &str) -> Option<Scenario> {
        match name.to_ascii_lowercase().as_str() {
            "p1" => Some(p1()),
            "p2" => Some(p2()),
            "p3" => Some(p3()),
            "p4" => Some(p4()),
            _ => None,
        }
    }
}

fn c(v: f64) -> StepProfile {
    StepProfile::constant(v)
}

fn quadratic(q: Matrix, state_ref: Option<Vector>, control_weight: f64, double_well: f64) -> CostKind {
    CostKind::Quadratic {
        state_weight: q,
        state_ref,
        control_weight,
        double_well,
    }
}

fn numerics(grid: usize, atoms: usize, chatter: &[usize], sim_grid: usize, chatter_base: Option<usize>) -> Numerics {
    Numerics {
        grid,
        atoms,
        chatter: chatter.to_vec(),
        sim_grid,
        chatter_base,
        seed: 0,
        solver: SolverOptions::default(),
    }
}

/// Classic chattering: `U = {−1, 1}`, `L = x² + (1 − u²)²`. The relaxed
/// optimum is 0 with `λ = ½δ₋₁ + ½δ₁`; the original infimum 0 is not attained.
fn p1() -> Scenario {
    Scenario {
        problem: ProblemBlock {
            name: "p1".into(),
            state_dim: 1,
            control_dim: 1,
            horizon: 1.0,
            x0: vec![0.0],
            operator: MonotoneOperator::zero(1).expect("valid"),
            field: FieldSpec::new(FieldKind::ConstantMatrix { b: dmatrix![1.0] }, c(1.0), c(0.0)).expect("valid"),
            controls: ControlSetSpec::new(
                ControlSetKind::FiniteAtoms {
                    atoms: vec![Vector::from_element(1, -1.0), Vector::from_element(1, 1.0)],
                    shift_gain: 0.0,
                    saturation: Saturation::Tanh,
                },
                c(1.0),
                c(0.0),
            )
            .expect("valid"),
            cost: CostSpec::new(quadratic(dmatrix![1.0], None, 0.0, 1.0), c(9.0), c(6.0)),
        },
        numerics: numerics(50, 2, &[1, 2, 5, 10, 20], 2000, Some(1)),
        output: OutputBlock::default(),
        control: None,
    }
}

/// Unilateral constraint `x ≥ 0` with a convex cost; optimum `u ≡ 0`, value 0.
fn p2() -> Scenario {
    Scenario {
        problem: ProblemBlock {
            name: "p2".into(),
            state_dim: 1,
            control_dim: 1,
            horizon: 2.0,
            x0: vec![1.0],
            operator: MonotoneOperator::normal_cone_box(
                Vector::from_element(1, 0.0),
                Vector::from_element(1, f64::INFINITY),
            )
            .expect("valid"),
            field: FieldSpec::new(FieldKind::ConstantMatrix { b: dmatrix![1.0] }, c(1.0), c(0.0)).expect("valid"),
            controls: ControlSetSpec::new(
                ControlSetKind::Box {
                    lo: Vector::from_element(1, -1.0),
                    hi: Vector::from_element(1, 1.0),
                },
                c(1.0),
                c(0.0),
            )
            .expect("valid"),
            cost: CostSpec::new(
                quadratic(dmatrix![1.0], Some(Vector::from_element(1, 1.0)), 0.1, 0.0),
                c(540.0),
                c(48.0),
            ),
        },
        numerics: numerics(100, 3, &[1, 2, 5], 2000, None),
        output: OutputBlock::default(),
        control: Some(ControlBlock::Constant(vec![1.0])),
    }
}

/// State-dependent control set `{−1, 1} + ½ tanh(x)` with `k ≡ ½`.
fn p3() -> Scenario {
    Scenario {
        problem: ProblemBlock {
            name: "p3".into(),
            state_dim: 1,
            control_dim: 1,
            horizon: 1.0,
            x0: vec![0.0],
            operator: MonotoneOperator::zero(1).expect("valid"),
            field: FieldSpec::new(FieldKind::ConstantMatrix { b: dmatrix![1.0] }, c(1.0), c(0.0)).expect("valid"),
            controls: ControlSetSpec::new(
                ControlSetKind::FiniteAtoms {
                    atoms: vec![Vector::from_element(1, -1.0), Vector::from_element(1, 1.0)],
                    shift_gain: 0.5,
                    saturation: Saturation::Tanh,
                },
                c(1.5),
                c(0.5),
            )
            .expect("valid"),
            cost: CostSpec::new(quadratic(dmatrix![1.0], None, 0.1, 0.0), c(46.0), c(14.0)),
        },
        numerics: numerics(20, 2, &[5, 10, 20], 4000, None),
        output: OutputBlock::default(),
        control: None,
    }
}

/// Linear monotone dynamics in the plane with a double-well cost on the unit
/// ball. Holding `x ≡ r` needs the interior control `−Pr`, which costs
/// nothing only as a mixture of boundary points: the relaxed value is 0 on
/// every grid and the original infimum 0 is not attained.
fn p4() -> Scenario {
    let r = Vector::from_vec(vec![0.5, 0.0]);
    Scenario {
        problem: ProblemBlock {
            name: "p4".into(),
            state_dim: 2,
            control_dim: 2,
            horizon: 1.0,
            x0: r.iter().copied().collect(),
            operator: MonotoneOperator::linear(dmatrix![0.5, 1.0; -1.0, 0.5]).expect("valid"),
            field: FieldSpec::new(
                FieldKind::ConstantMatrix {
                    b: Matrix::identity(2, 2),
                },
                c(1.0),
                c(0.0),
            )
            .expect("valid"),
            controls: ControlSetSpec::new(
                ControlSetKind::Ball {
                    center: Vector::zeros(2),
                    radius: 1.0,
                },
                c(1.0),
                c(0.0),
            )
            .expect("valid"),
            cost: CostSpec::new(quadratic(Matrix::identity(2, 2) * 0.5, Some(r), 0.0, 1.0), c(12.0), c(5.0)),
        },
        numerics: numerics(20, 9, &[1, 2, 5, 10], 2000, None),
        output: OutputBlock::default(),
        control: None,
    }
}

/// Outcome of one hypothesis probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    /// Worst excess of the probed quantity over its declared bound.
    pub worst_excess: f64,
    pub tolerance: f64,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Tracks the worst sample of a probe.
struct Probe {
    name: &'static str,
    tolerance: f64,
    worst: f64,
    witness: String,
}

impl Probe {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            worst: f64::NEG_INFINITY,
            witness: String::from("no samples"),
        }
    }

    fn record(&mut self, excess: f64, witness: impl FnOnce() -> String) {
        if excess > self.worst || excess.is_nan() {
            self.worst = excess;
            self.witness = witness();
        }
    }

    fn finish(self) -> HypothesisCheck {
        HypothesisCheck {
            name: self.name.to_string(),
            passed: self.worst <= self.tolerance,
            worst_excess: self.worst,
            tolerance: self.tolerance,
            witness: self.witness,
        }
    }
}

const SAMPLES: usize = 200;

fn fmt_vec(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(", "))
}

fn random_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vector {
    let v = Vector::from_fn(dim, |_, _| rng.gen_range(-1.0..=1.0));
    let norm = v.norm();
    let r = radius * rng.gen::<f64>().powf(1.0 / dim as f64);
    if norm == 0.0 {
        v
    } else {
        v * (r / norm)
    }
}

/// States on the sphere of radius `r` along the axes, plus the origin.
fn structured_states(dim: usize, radius: f64) -> Vec<Vector> {
    let mut out = vec![Vector::zeros(dim)];
    for j in 0..dim {
        for s in [-1.0, 1.0] {
            let mut e = Vector::zeros(dim);
            e[j] = s * radius;
            out.push(e);
        }
    }
    out
}

fn sample_times(rng: &mut ChaCha8Rng, horizon: f64) -> Vec<f64> {
    let mut ts = vec![0.0, 0.5 * horizon, horizon * (1.0 - 1e-12)];
    ts.extend((0..16).map(|_| rng.gen_range(0.0..horizon)));
    ts
}

/// Probes the hypotheses `H(A)`, `H_0`, `H(f)`, `H(U)(ii)/(iii)` and
/// `H(L)(ii)/(iii)` on seeded and structured samples.
pub fn validate(scenario: &Scenario) -> Result<(Problem, HypothesisReport)> {
    let problem = scenario.to_problem()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.numerics.seed);
    let n_dim = problem.state_dim();
    let m_dim = problem.control_dim();
    let radius = problem.apriori_bound();
    let net = scenario.numerics.atoms;
    let times = sample_times(&mut rng, problem.horizon);
    let mut states = structured_states(n_dim, radius);
    states.extend((0..SAMPLES).map(|_| random_in_ball(&mut rng, n_dim, radius)));

    // H(A): monotone graph with 0 ∈ A(0).
    let mut h_a = Probe::new("H(A)", 1e-12);
    let wide = radius.max(1.0) * 2.0;
    let mut points = structured_states(n_dim, wide);
    points.extend((0..SAMPLES).map(|_| random_in_ball(&mut rng, n_dim, wide)));
    let graph = problem.operator.graph_pairs(&points);
    for (i, (x, xs)) in graph.iter().enumerate() {
        for (y, ys) in &graph[i + 1..] {
            let inner = (xs - ys).dot(&(x - y));
            h_a.record(-inner, || format!("(x*−y*)·(x−y) = {inner} at x = {}, y = {}", fmt_vec(x), fmt_vec(y)));
        }
    }
    let j0 = problem.operator.resolvent(1.0, &Vector::zeros(n_dim))?.norm();
    h_a.record(j0, || format!("|J_1(0)| = {j0}"));

    // H_0: x0 ∈ cl D(A).
    let mut h_0 = Probe::new("H_0", crate::dynamics::INITIAL_STATE_TOLERANCE);
    let distance = problem.operator.domain_distance(&problem.x0);
    h_0.record(distance, || format!("dist(x0, cl D(A)) = {distance} at x0 = {}", fmt_vec(&problem.x0)));

    // H(f)(iii) growth and H(f)(ii) Lipschitz on the ball of radius ĉ.
    let mut h_f_growth = Probe::new("H(f)(iii)", 1e-9);
    let mut h_f_lip = Probe::new("H(f)(ii)", 1e-9);
    for &t in &times {
        let a = problem.field.bound.at(t);
        let l = problem.field.lipschitz.at(t);
        for x in &states {
            let norm = problem.field.operator_norm(t, x);
            let bound = a * (1.0 + x.norm());
            h_f_growth.record(norm - bound, || {
                format!("‖f(t,x)‖ = {norm} vs a(t)(1+|x|) = {bound} at t = {t}, x = {}", fmt_vec(x))
            });
        }
        for pair in states.windows(2) {
            let (x, y) = (&pair[0], &pair[1]);
            let gap = (x - y).norm();
            if gap == 0.0 {
                continue;
            }
            let diff = (problem.field.matrix(t, x) - problem.field.matrix(t, y)).norm();
            h_f_lip.record(diff - l * gap, || {
                format!("ratio {} vs l(t) = {l} at t = {t}, x = {}, y = {}", diff / gap, fmt_vec(x), fmt_vec(y))
            });
        }
    }

    // H(U)(iii): sup |u| ≤ a0(t); H(U)(ii): Hausdorff-Lipschitz in x.
    let mut h_u_bound = Probe::new("H(U)(iii)", 1e-9);
    let mut h_u_lip = Probe::new("H(U)(ii)", 1e-9);
    for &t in &times {
        let a0 = problem.controls.bound.at(t);
        let k = problem.controls.lipschitz.at(t);
        for x in &states {
            for u in problem.controls.sample_atoms(t, x, net) {
                let norm = u.norm();
                h_u_bound.record(norm - a0, || {
                    format!("|u| = {norm} vs a0(t) = {a0} at t = {t}, x = {}, u = {}", fmt_vec(x), fmt_vec(&u))
                });
            }
        }
        let mut pairs: Vec<(Vector, Vector)> = states.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        pairs.extend(states.iter().take(40).map(|x| {
            let mut y = x.clone();
            y[0] += 1e-3;
            (x.clone(), y)
        }));
        for (x, y) in pairs {
            let gap = (&x - &y).norm();
            if gap == 0.0 {
                continue;
            }
            let ratio = problem.controls.lipschitz_probe(t, &[(x.clone(), y.clone())], net);
            h_u_lip.record((ratio - k) * gap, || {
                format!("ratio h(U(t,x),U(t,y))/|x−y| = {ratio} vs k(t) = {k} at t = {t}, x = {}, y = {}", fmt_vec(&x), fmt_vec(&y))
            });
        }
    }

    // H(L)(iii): |L| ≤ a_r on |x| ≤ ĉ, u ∈ U(t, x); H(L)(ii): Lipschitz on the same ball.
    let mut h_l_bound = Probe::new("H(L)(iii)", 1e-9);
    let mut h_l_lip = Probe::new("H(L)(ii)", 1e-6);
    let m_radius = problem.control_radius();
    for &t in &times {
        let ar = problem.cost.bound.at(t);
        let theta = problem.cost.lipschitz.at(t);
        for x in &states {
            for u in problem.controls.sample_atoms(t, x, net) {
                let value = problem.cost.eval(t, x, &u);
                h_l_bound.record(value.abs() - ar, || {
                    format!("|L| = {} vs a_r(t) = {ar} at t = {t}, x = {}, u = {}", value.abs(), fmt_vec(x), fmt_vec(&u))
                });
            }
        }
        for _ in 0..SAMPLES / 4 {
            let x = random_in_ball(&mut rng, n_dim, radius);
            let u = random_in_ball(&mut rng, m_dim, m_radius);
            let (y, v) = if rng.gen_bool(0.5) {
                (random_in_ball(&mut rng, n_dim, radius), random_in_ball(&mut rng, m_dim, m_radius))
            } else {
                let shrink = |z: &Vector, r: f64, d: Vector| {
                    let w = z + d;
                    let nw = w.norm();
                    if nw > r { w * (r / nw) } else { w }
                };
                let dx = random_in_ball(&mut rng, n_dim, 1e-4);
                let du = random_in_ball(&mut rng, m_dim, 1e-4);
                (shrink(&x, radius, dx), shrink(&u, m_radius, du))
            };
            let gap = (&x - &y).norm() + (&u - &v).norm();
            if gap == 0.0 {
                continue;
            }
            let diff = (problem.cost.eval(t, &x, &u) - problem.cost.eval(t, &y, &v)).abs();
            h_l_lip.record(diff - theta * gap, || {
                format!("ratio {} vs ϑ(t) = {theta} at t = {t}, x = {}, u = {}", diff / gap, fmt_vec(&x), fmt_vec(&u))
            });
        }
    }

    let checks = vec![
        h_a.finish(),
        h_0.finish(),
        h_f_growth.finish(),
        h_f_lip.finish(),
        h_u_lip.finish(),
        h_u_bound.finish(),
        h_l_lip.finish(),
        h_l_bound.finish(),
    ];
    Ok((problem, HypothesisReport { checks }))
}
