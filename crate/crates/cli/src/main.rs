//! `relaxctl`: run relaxation experiments on scenario files.
//!
//! Exit codes: 0 success, 1 I/O or schema error, 2 hypothesis or
//! admissibility failure, 3 solver non-convergence.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use relax_core::chattering;
use relax_core::dynamics::{self, solve_controlled};
use relax_core::export;
use relax_core::optimizer::{self, RelaxationReport, SANDWICH_TOLERANCE, TOL_EQUIV};
use relax_core::relax_convex::{self, check_admissible, Admissibility};
use relax_core::relax_young::young_support_check;
use relax_core::scenario::{self, HypothesisReport};
use relax_core::{ControlSignal, Error, Problem, RelaxMode, RelaxedSolution, Scenario, Trajectory};

#[derive(Parser)]
#[command(name = "relaxctl", version, about = "Relaxation of nonconvex optimal control problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the scenario's control (or --control) and report its cost.
    Solve(Common),
    /// Solve the relaxed problems.
    Relax(Common),
    /// Chatter the relaxed solution and tabulate convergence.
    Chatter(Common),
    /// Check a trajectory/control pair, or the full invariant suite.
    Verify(Common),
    /// Relax, chatter, and summarize m_r, m̂_r and the chattered estimate.
    Report(Common),
    /// Probe the hypotheses only.
    Validate(Common),
    /// Print a built-in scenario as JSON.
    Show {
        name: String,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    scenario: Option<PathBuf>,
    /// Built-in problem: p1, p2, p3 or p4.
    #[arg(long)]
    builtin: Option<String>,
    /// Output directory for CSV artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relaxation grid K.
    #[arg(long)]
    grid: Option<usize>,
    /// Points per net of U(t, x).
    #[arg(long)]
    atoms: Option<usize>,
    /// Chattering cycle counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    chatter: Option<Vec<usize>>,
    /// Seed for the random multi-start points.
    #[arg(long)]
    seed: Option<u64>,
    /// Which relaxation to solve.
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    /// Trajectory CSV to verify.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Control CSV to simulate or verify.
    #[arg(long)]
    control: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Convexified,
    Young,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<RelaxMode> {
        match self {
            ModeArg::Convexified => vec![RelaxMode::Convexified],
            ModeArg::Young => vec![RelaxMode::Young],
            ModeArg::Both => vec![RelaxMode::Convexified, RelaxMode::Young],
        }
    }
}

/// Failures with their own exit codes.
#[derive(Debug)]
enum Failure {
    Hypothesis(String),
    NotConverged(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Hypothesis(s) | Failure::NotConverged(s) => f.write_str(s),
        }
    }
}

impl std::error::Error for Failure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(f) = err.downcast_ref::<Failure>() {
        return match f {
            Failure::Hypothesis(_) => 2,
            Failure::NotConverged(_) => 3,
        };
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::InitialState { .. }
            | Error::Inadmissible(_)
            | Error::FeedbackBound { .. }
            | Error::Support { .. }
            | Error::ControlBound { .. }
            | Error::CapViolation { .. }
            | Error::OutsideBall { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Show { name } => {
            let s = Scenario::builtin(&name).ok_or_else(|| unknown_builtin(&name))?;
            println!("{}", s.to_json());
            Ok(())
        }
        Command::Validate(c) => {
            let ctx = Session::load(&c)?;
            print_hypotheses(&ctx.report);
            ctx.require_hypotheses()
        }
        Command::Solve(c) => solve(&Session::load(&c)?, &c),
        Command::Relax(c) => relax(&Session::load(&c)?, &c),
        Command::Chatter(c) => chatter(&Session::load(&c)?),
        Command::Verify(c) => verify(&Session::load(&c)?, &c),
        Command::Report(c) => report(&Session::load(&c)?),
    }
}

fn unknown_builtin(name: &str) -> anyhow::Error {
    anyhow!(
        "unknown built-in {name:?}; available: {}",
        Scenario::builtin_names().join(", ")
    )
}

struct Session {
    scenario: Scenario,
    problem: Problem,
    report: HypothesisReport,
    out: PathBuf,
}

impl Session {
    fn load(c: &Common) -> anyhow::Result<Self> {
        let mut scenario = match (&c.scenario, &c.builtin) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Scenario::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            (None, Some(name)) => Scenario::builtin(name).ok_or_else(|| unknown_builtin(name))?,
            (None, None) => unreachable!("clap requires one source"),
        };
        if let Some(k) = c.grid {
            scenario.numerics.grid = k;
        }
        if let Some(n) = c.atoms {
            scenario.numerics.atoms = n;
        }
        if let Some(list) = &c.chatter {
            scenario.numerics.chatter = list.clone();
        }
        if let Some(seed) = c.seed {
            scenario.numerics.seed = seed;
        }
        let (problem, report) = scenario::validate(&scenario)?;
        let out = c
            .out
            .clone()
            .or_else(|| scenario.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Self {
            scenario,
            problem,
            report,
            out,
        })
    }

    fn require_hypotheses(&self) -> anyhow::Result<()> {
        if self.report.passed() {
            return Ok(());
        }
        let lines: Vec<String> = self
            .report
            .failures()
            .map(|c| format!("{} violated: {}", c.name, c.witness))
            .collect();
        Err(Failure::Hypothesis(lines.join("; ")).into())
    }

    fn create(&self, name: &str) -> anyhow::Result<BufWriter<File>> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    fn relaxed(&self, mode: RelaxMode) -> anyhow::Result<RelaxedSolution> {
        let n = &self.scenario.numerics;
        Ok(optimizer::solve_relaxed(
            &self.problem,
            self.scenario.grid()?,
            n.atoms,
            mode,
            &n.solver_options(),
        )?)
    }
}

fn print_hypotheses(report: &HypothesisReport) {
    for c in &report.checks {
        let status = if c.passed { "pass" } else { "FAIL" };
        println!("{status} {:<10} worst excess {:.3e}; {}", c.name, c.worst_excess, c.witness);
    }
}

fn read_csv(path: &Path) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("reading {}", path.display()))
}

fn load_control(ctx: &Session, c: &Common) -> anyhow::Result<ControlSignal> {
    if let Some(path) = &c.control {
        return Ok(export::read_control(read_csv(path)?, ctx.problem.horizon)?);
    }
    let block = ctx
        .scenario
        .control
        .as_ref()
        .ok_or_else(|| anyhow!("scenario has no control block; pass --control"))?;
    Ok(block.to_signal(ctx.scenario.grid()?)?)
}

fn solve(ctx: &Session, c: &Common) -> anyhow::Result<()> {
    ctx.require_hypotheses()?;
    let u = load_control(ctx, c)?;
    let traj = solve_controlled(&ctx.problem, &u)?;
    export::write_trajectory(ctx.create("trajectory.csv")?, &traj)?;
    export::write_control(ctx.create("control.csv")?, &u)?;
    let adm = check_admissible(&ctx.problem, &traj, &u, Admissibility::Original, ctx.scenario.numerics.atoms)?;
    println!("problem = {}", ctx.problem.name);
    println!("intervals = {}", u.grid().intervals());
    println!("x_final = {:?}", traj.states.last().expect("nonempty").as_slice());
    println!("residual = {:e}", traj.residual());
    println!("admissible = {}", adm.admissible);
    println!("J = {}", relax_convex::running_cost(&ctx.problem, &traj, &u)?);
    if !adm.admissible {
        return Err(Failure::Hypothesis(adm.describe()).into());
    }
    Ok(())
}

fn mode_name(mode: RelaxMode) -> &'static str {
    match mode {
        RelaxMode::Convexified => "convexified",
        RelaxMode::Young => "young",
    }
}

fn relax(ctx: &Session, c: &Common) -> anyhow::Result<()> {
    ctx.require_hypotheses()?;
    let mut unconverged = Vec::new();
    for mode in c.mode.modes() {
        let sol = ctx.relaxed(mode)?;
        let tag = mode_name(mode);
        export::write_trajectory(ctx.create(&format!("relaxed_{tag}_trajectory.csv"))?, &sol.trajectory)?;
        export::write_control(ctx.create(&format!("relaxed_{tag}_control.csv"))?, &sol.control)?;
        export::write_young(ctx.create(&format!("relaxed_{tag}_measures.csv"))?, &sol.young)?;
        export::write_trace(ctx.create(&format!("relaxed_{tag}_trace.csv"))?, &sol.trace)?;
        let key = match mode {
            RelaxMode::Convexified => "m_r",
            RelaxMode::Young => "m_hat_r",
        };
        println!("{key} = {}", sol.value());
        println!("{tag}.converged = {}", sol.converged);
        println!("{tag}.iterations = {}", sol.iterations);
        println!("{tag}.tie = {}", sol.tie);
        if !sol.converged {
            unconverged.push(tag);
        }
    }
    if !unconverged.is_empty() {
        return Err(Failure::NotConverged(format!("solver hit the iteration cap ({})", unconverged.join(", "))).into());
    }
    Ok(())
}

fn chatter(ctx: &Session) -> anyhow::Result<()> {
    ctx.require_hypotheses()?;
    let sol = ctx.relaxed(RelaxMode::Young)?;
    let n = &ctx.scenario.numerics;
    let table = chattering::convergence_table(
        &ctx.problem,
        &sol.trajectory,
        &sol.young,
        sol.value_convexified,
        &n.chatter,
        &n.chatter_options(),
    )?;
    export::write_convergence(ctx.create("convergence.csv")?, &table)?;
    println!("m_r = {}", sol.value_convexified);
    for row in &table {
        println!(
            "n = {:<4} weak_gap = {:.6e}  state_gap = {:.6e}  J = {:.6e}  gap_to_mr = {:.6e}",
            row.n, row.weak_gap, row.state_gap, row.cost, row.gap_to_mr
        );
    }
    if !sol.converged {
        return Err(Failure::NotConverged("relaxed solve hit the iteration cap".into()).into());
    }
    Ok(())
}

fn estimate(ctx: &Session) -> anyhow::Result<(RelaxedSolution, RelaxationReport)> {
    let sol = ctx.relaxed(RelaxMode::Convexified)?;
    let n = &ctx.scenario.numerics;
    let rep = optimizer::estimate_original(&ctx.problem, &sol, &n.chatter, &n.chatter_options())?;
    Ok((sol, rep))
}

fn report(ctx: &Session) -> anyhow::Result<()> {
    ctx.require_hypotheses()?;
    let (_, rep) = estimate(ctx)?;
    export::write_report(ctx.create("report.csv")?, &rep)?;
    export::write_convergence(ctx.create("convergence.csv")?, &rep.table)?;
    export::write_trace(ctx.create("trace.csv")?, &rep.trace)?;
    println!("problem = {}", rep.problem);
    println!("m_r = {}", rep.m_r);
    println!("m_hat_r = {}", rep.m_hat_r);
    println!("m_estimate = {} (n = {})", rep.m_estimate, rep.best_n);
    println!("equivalence_ok = {}", rep.equivalence_ok);
    println!("sandwich_ok = {}", rep.sandwich_ok);
    println!("tie = {}", rep.tie);
    if !rep.converged {
        return Err(Failure::NotConverged("relaxed solve hit the iteration cap".into()).into());
    }
    Ok(())
}

struct Suite {
    failed: Vec<String>,
}

impl Suite {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "pass" } else { "FAIL" });
        if !ok {
            self.failed.push(format!("{name}: {detail}"));
        }
    }
}

fn verify(ctx: &Session, c: &Common) -> anyhow::Result<()> {
    print_hypotheses(&ctx.report);
    ctx.require_hypotheses()?;
    match &c.trajectory {
        Some(path) => verify_pair(ctx, c, path),
        None => verify_suite(ctx),
    }
}

fn verify_pair(ctx: &Session, c: &Common, path: &Path) -> anyhow::Result<()> {
    let traj: Trajectory = export::read_trajectory(read_csv(path)?, ctx.problem.horizon)?;
    let u = load_control(ctx, c)?;
    let adm = check_admissible(&ctx.problem, &traj, &u, Admissibility::Original, ctx.scenario.numerics.atoms)?;
    println!("{}", adm.describe());
    if !adm.admissible {
        return Err(Failure::Hypothesis(adm.describe()).into());
    }
    println!("J = {}", relax_convex::cost_J(&ctx.problem, &traj, &u)?);
    Ok(())
}

fn verify_suite(ctx: &Session) -> anyhow::Result<()> {
    let (sol, rep) = estimate(ctx)?;
    let p = &ctx.problem;
    let mut suite = Suite { failed: Vec::new() };

    let young = ctx.relaxed(RelaxMode::Young)?;
    let diff = (sol.value() - young.value()).abs();
    suite.check("mode equivalence", diff <= 1e-9, format!("|m_r − m̂_r| = {diff:e}"));
    suite.check(
        "relaxed values",
        rep.equivalence_ok,
        format!("m_r = {}, m̂_r = {} (tol {TOL_EQUIV:e})", rep.m_r, rep.m_hat_r),
    );
    suite.check(
        "sandwich",
        rep.sandwich_ok,
        format!("m_estimate = {} ≥ m_r − {SANDWICH_TOLERANCE:e}", rep.m_estimate),
    );
    let adm = check_admissible(p, &sol.trajectory, &sol.control, Admissibility::Convexified, sol.atoms)?;
    suite.check("relaxed admissibility", adm.admissible, adm.describe());
    let support = young_support_check(p, &sol.trajectory, &sol.young)?;
    suite.check(
        "Young support",
        support.ok,
        format!("max atom distance {:e}", support.max_distance),
    );
    let monotone = sol.trace.windows(2).all(|w| w[1].objective <= w[0].objective);
    suite.check("monotone trace", monotone, format!("{} accepted steps", sol.trace.len().saturating_sub(1)));
    let bound = dynamics::apriori_bound(p);
    let sup = sol.trajectory.sup_norm();
    suite.check("a-priori bound", sup <= bound, format!("‖x̂‖∞ = {sup} ≤ ĉ = {bound}"));

    let n = &ctx.scenario.numerics;
    let opts = n.chatter_options();
    let sim = relax_core::Grid::new(p.horizon, opts.sim_intervals)?;
    let base = match opts.base_intervals {
        Some(k) => sol.young.average_onto(relax_core::Grid::new(p.horizon, k)?)?,
        None => sol.young.clone(),
    };
    let x_sim = dynamics::solve_young(p, &sol.young.refine(sim)?)?;
    for &cycles in &n.chatter {
        let fb = chattering::chattered_pair(p, &base, &x_sim, cycles)?;
        let adm = check_admissible(p, &fb.trajectory, &fb.control, Admissibility::Original, 0)?;
        suite.check(&format!("chattered pair n={cycles}"), adm.admissible, adm.describe());
    }

    if !suite.failed.is_empty() {
        return Err(Failure::Hypothesis(suite.failed.join("; ")).into());
    }
    if !sol.converged {
        return Err(Failure::NotConverged("relaxed solve hit the iteration cap".into()).into());
    }
    Ok(())
}
