use nalgebra::dvector;
use proptest::prelude::*;
use relax_core::chattering::{chatter_on, chatter_realize, convergence_table, feedback_correct};
use relax_core::dynamics::{solve_controlled, solve_young};
use relax_core::optimizer::{estimate_original, solve_relaxed};
use relax_core::relax_convex::{check_admissible, cost_Jr, Admissibility};
use relax_core::relax_young::{cost_Jhat, narrow_functional, young_support_check, TestFunction};
use relax_core::scenario::validate;
use relax_core::{
    ChatterOptions, ControlSignal, DiscreteMeasure, Grid, Problem, RelaxMode, RelaxedSolution, Scenario,
    YoungControl,
};

fn builtin(name: &str) -> (Scenario, Problem) {
    let s = Scenario::builtin(name).unwrap();
    let (p, report) = validate(&s).unwrap();
    assert!(report.passed(), "{name}: {:?}", report.failures().collect::<Vec<_>>());
    (s, p)
}

fn relax(s: &Scenario, p: &Problem, mode: RelaxMode) -> RelaxedSolution {
    solve_relaxed(p, s.grid().unwrap(), s.numerics.atoms, mode, &s.numerics.solver_options()).unwrap()
}

fn half_half(grid: Grid) -> YoungControl {
    let mu = DiscreteMeasure::new(vec![dvector![-1.0], dvector![1.0]], vec![0.5, 0.5]).unwrap();
    YoungControl::new(grid, vec![mu; grid.intervals()]).unwrap()
}

#[test]
fn p1_relaxed_value_modes_and_chattering() {
    let (s, p) = builtin("p1");
    let convex = relax(&s, &p, RelaxMode::Convexified);
    let young = relax(&s, &p, RelaxMode::Young);
    assert!(convex.value() <= 1e-3, "m_r = {}", convex.value());
    assert!((convex.value() - young.value()).abs() <= 1e-9);
    assert!(convex.converged);

    let report = estimate_original(&p, &convex, &[1, 2, 5, 10, 20], &s.numerics.chatter_options()).unwrap();
    assert!(report.equivalence_ok && report.sandwich_ok);
    assert!(report.m_estimate <= 1e-3);
    for row in &report.table {
        let closed = 1.0 / (12.0 * (row.n * row.n) as f64);
        assert!((row.cost - closed).abs() <= 0.2 * closed, "n = {}: {}", row.n, row.cost);
        assert!(row.cost >= report.m_r - 1e-6);
    }
    let costs: Vec<f64> = report.table.iter().filter(|r| r.n >= 2).map(|r| r.cost).collect();
    assert!(costs.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn solver_trace_is_monotone_and_weights_feasible() {
    let (s, p) = builtin("p3");
    let sol = relax(&s, &p, RelaxMode::Convexified);
    assert!(sol.trace.windows(2).all(|w| w[1].objective <= w[0].objective));
    for mu in sol.young.measures() {
        assert!(mu.weights().iter().all(|w| *w >= 0.0));
        assert!((mu.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }
    // The transcription value is the envelope value of the barycenter pair.
    assert!((sol.value_convexified - sol.value_young).abs() <= 1e-6);
    assert!(young_support_check(&p, &sol.trajectory, &sol.young).unwrap().ok);
}

#[test]
fn p3_feedback_correction() {
    let (s, p) = builtin("p3");
    let sol = relax(&s, &p, RelaxMode::Young);
    let opts = s.numerics.chatter_options();
    let table = convergence_table(&p, &sol.trajectory, &sol.young, sol.value(), &[5, 10, 20], &opts).unwrap();
    for w in table.windows(2) {
        assert!(w[1].state_gap <= 1.1 * w[0].state_gap, "{table:?}");
    }
    let sim = Grid::new(p.horizon, opts.sim_intervals).unwrap();
    let lam_sim = sol.young.refine(sim).unwrap();
    let x_sim = solve_young(&p, &lam_sim).unwrap();
    for n in [5, 10, 20] {
        let raw = chatter_on(&sol.young, n, sim).unwrap();
        let fb = feedback_correct(&p, &raw, Some(&x_sim), n).unwrap();
        let report = check_admissible(&p, &fb.trajectory, &fb.control, Admissibility::Original, 0).unwrap();
        assert!(report.admissible, "{}", report.describe());
        // Direct check of |v − target| ≤ k |x̂ − x| + 1/n.
        for k in 0..sim.intervals() {
            let gap = (fb.control.at(k) - raw.at(k)).norm();
            let allowance = 0.5 * (&x_sim.states[k] - &fb.trajectory.states[k]).norm() + 1.0 / n as f64;
            assert!(gap <= allowance + 1e-6, "n = {n}, k = {k}");
        }
    }
}

#[test]
fn p1_narrow_convergence() {
    let grid = Grid::new(1.0, 50).unwrap();
    let lam = half_half(grid);
    let sim = Grid::new(1.0, 8000).unwrap();
    let base = lam.average_onto(Grid::new(1.0, 1).unwrap()).unwrap();
    for n in [5, 10, 20, 40] {
        let dirac = relax_core::relax_young::dirac_embed(&chatter_on(&base, n, sim).unwrap());
        for phi in TestFunction::registered(1) {
            let gap = (narrow_functional(&dirac, phi) - narrow_functional(&lam, phi)).abs();
            assert!(gap <= 2.0 / n as f64, "n = {n}, {phi}: {gap}");
        }
    }
}

#[test]
fn already_ordinary_pairs_have_no_gap() {
    let (_, p) = builtin("p1");
    let grid = Grid::new(1.0, 20).unwrap();
    let u = ControlSignal::constant(grid, dvector![1.0]);
    let lam = relax_core::relax_young::dirac_embed(&u);
    let x = solve_controlled(&p, &u).unwrap();
    let value = cost_Jhat(&p, &x, &lam).unwrap();
    let opts = ChatterOptions {
        base_intervals: None,
        sim_intervals: 20,
    };
    for row in convergence_table(&p, &x, &lam, value, &[1, 3, 7], &opts).unwrap() {
        assert_eq!(row.weak_gap, 0.0);
        assert_eq!(row.state_gap, 0.0);
        assert!(row.gap_to_mr < 1e-12);
    }
}

#[test]
fn chattering_weak_norm_rate_on_builtins() {
    for name in ["p1", "p3", "p4"] {
        let (s, p) = builtin(name);
        let sol = relax(&s, &p, RelaxMode::Young);
        let m = p.control_radius();
        let dt = sol.young.grid().step();
        let bary = sol.young.barycenter_signal().unwrap().to_piecewise();
        for n in [1, 4, 16] {
            let chatter = chatter_realize(&sol.young, n).unwrap();
            let gap = chatter.sub(&bary).unwrap().weak_norm();
            assert!(gap <= 2.0 * m * dt / n as f64 + 1e-12, "{name}, n = {n}: {gap}");
        }
    }
}

fn random_young(seed_weights: &[f64], grid: Grid) -> YoungControl {
    let measures = seed_weights
        .iter()
        .map(|w| DiscreteMeasure::new(vec![dvector![-1.0], dvector![0.2], dvector![1.0]], vec![*w, 0.3, 0.7 - w]).unwrap())
        .collect();
    YoungControl::new(grid, measures).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jensen_chain_and_dynamics_equivalence(weights in prop::collection::vec(0.0..0.7f64, 20)) {
        // P2 has the box U = [−1, 1] and a convex cost.
        let (s, p) = builtin("p2");
        let grid = Grid::new(p.horizon, weights.len()).unwrap();
        let lam = random_young(&weights, grid);
        let x_young = solve_young(&p, &lam).unwrap();
        let bary = lam.barycenter_signal().unwrap();
        let x_bary = solve_controlled(&p, &bary).unwrap();
        prop_assert_eq!(&x_young.states, &x_bary.states);
        let jhat = cost_Jhat(&p, &x_young, &lam).unwrap();
        let jr = cost_Jr(&p, &x_bary, &bary, s.numerics.atoms).unwrap();
        prop_assert!(jhat >= jr - 1e-6, "{jhat} < {jr}");
    }

    #[test]
    fn chattering_preserves_interval_averages(w in 0.0..1.0f64, n in 1usize..30) {
        let grid = Grid::new(1.0, 5).unwrap();
        let mu = DiscreteMeasure::new(vec![dvector![-1.0], dvector![1.0]], vec![w, 1.0 - w]);
        prop_assume!(mu.is_ok());
        let lam = YoungControl::new(grid, vec![mu.unwrap(); 5]).unwrap();
        let s = chatter_realize(&lam, n).unwrap();
        let per = s.integrals_on(grid).unwrap();
        for v in per {
            prop_assert!((v[0] / grid.step() - (1.0 - 2.0 * w)).abs() <= 1e-12);
        }
    }
}
