//! Browser bindings for three small relax-core demos. Every function returns
//! a JSON string; non-finite numbers come out as `null`.

use nalgebra::{dvector, DMatrix};
use relax_core::chattering::chatter_on;
use relax_core::dynamics::{solve_controlled, solve_forced};
use relax_core::relax_convex::{biconjugate, cost_J};
use relax_core::{
    ControlSetKind, ControlSetSpec, ControlSignal, CostKind, CostSpec, DiscreteMeasure, FieldSpec, Grid,
    MonotoneOperator, Problem, Scenario, StepProfile, YoungControl,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn json(v: &impl Serialize) -> Result<String, JsValue> {
    serde_json::to_string(v).map_err(js)
}

#[derive(Serialize)]
struct EnvelopeCurve {
    u: Vec<f64>,
    cost: Vec<f64>,
    envelope: Vec<Option<f64>>,
    nodes: Vec<f64>,
}

fn well(control_weight: f64, double_well: f64) -> Result<Problem, JsValue> {
    Problem::new(
        "well",
        1.0,
        dvector![0.0],
        MonotoneOperator::zero(1).map_err(js)?,
        FieldSpec::constant(DMatrix::from_element(1, 1, 1.0), 1.0, 0.0).map_err(js)?,
        ControlSetSpec::new(
            ControlSetKind::Box {
                lo: dvector![-1.0],
                hi: dvector![1.0],
            },
            StepProfile::constant(1.0),
            StepProfile::constant(0.0),
        )
        .map_err(js)?,
        CostSpec::new(
            CostKind::Quadratic {
                state_weight: DMatrix::zeros(1, 1),
                state_ref: None,
                control_weight,
                double_well,
            },
            StepProfile::constant(10.0 + control_weight.abs() + double_well.abs()),
            StepProfile::constant(10.0),
        ),
    )
    .map_err(js)
}

/// `L(u) = c u² + w (1 − u²)²` on `[−1, 1]` and its convex envelope over an
/// `atoms`-point net, sampled on `[−1.2, 1.2]`.
#[wasm_bindgen]
pub fn envelope_curve(control_weight: f64, double_well: f64, atoms: usize) -> Result<String, JsValue> {
    if atoms < 2 {
        return Err(js("need at least 2 atoms"));
    }
    let p = well(control_weight, double_well)?;
    let x = dvector![0.0];
    let u: Vec<f64> = (0..=240).map(|i| -1.2 + 0.01 * i as f64).collect();
    let cost = u.iter().map(|v| p.cost.eval(0.0, &x, &dvector![*v])).collect();
    let envelope = u
        .iter()
        .map(|v| {
            biconjugate(&p, 0.0, &x, &dvector![*v], atoms)
                .map(|e| e.is_finite().then_some(e))
                .map_err(js)
        })
        .collect::<Result<_, _>>()?;
    let nodes = (0..atoms).map(|i| -1.0 + 2.0 * i as f64 / (atoms - 1) as f64).collect();
    json(&EnvelopeCurve {
        u,
        cost,
        envelope,
        nodes,
    })
}

#[derive(Serialize)]
struct Chattered {
    t: Vec<f64>,
    u: Vec<f64>,
    x: Vec<f64>,
    cost: f64,
    reference: f64,
}

/// Chatters the half/half measure on `{−1, 1}` for the built-in `p1` with
/// `n` switching cycles and reports the trajectory and its cost.
#[wasm_bindgen]
pub fn chatter_p1(n: usize, sim_intervals: usize) -> Result<String, JsValue> {
    if n == 0 || sim_intervals < 2 * n {
        return Err(js("need n ≥ 1 and at least 2n simulation intervals"));
    }
    let scenario = Scenario::builtin("p1").ok_or_else(|| js("missing p1"))?;
    let p = scenario.to_problem().map_err(js)?;
    let base = Grid::new(p.horizon, 1).map_err(js)?;
    let mu = DiscreteMeasure::new(vec![dvector![-1.0], dvector![1.0]], vec![0.5, 0.5]).map_err(js)?;
    let lam = YoungControl::new(base, vec![mu]).map_err(js)?;
    let sim = Grid::new(p.horizon, sim_intervals).map_err(js)?;
    let u = chatter_on(&lam, n, sim).map_err(js)?;
    let traj = solve_controlled(&p, &u).map_err(js)?;
    let cost = cost_J(&p, &traj, &u).map_err(js)?;
    json(&Chattered {
        t: sim.times(),
        u: u.values().iter().map(|v| v[0]).collect(),
        x: traj.states.iter().map(|s| s[0]).collect(),
        cost,
        reference: 1.0 / (12.0 * (n * n) as f64),
    })
}

#[derive(Serialize)]
struct Unilateral {
    t: Vec<f64>,
    x: Vec<f64>,
    exact: Vec<f64>,
    max_error: f64,
}

/// `−x′ ∈ N_[0,∞)(x) + h` with `x(0) = x0` and constant push `h > 0`:
/// the state slides down at rate `h` and sticks at 0.
#[wasm_bindgen]
pub fn unilateral(x0: f64, push: f64, horizon: f64, intervals: usize) -> Result<String, JsValue> {
    let op = MonotoneOperator::normal_cone_box(dvector![0.0], dvector![f64::INFINITY]).map_err(js)?;
    let grid = Grid::new(horizon, intervals).map_err(js)?;
    let h = ControlSignal::constant(grid, dvector![push]);
    let traj = solve_forced(&op, &h, &dvector![x0], grid).map_err(js)?;
    let t = grid.times();
    let x: Vec<f64> = traj.states.iter().map(|s| s[0]).collect();
    let exact: Vec<f64> = t.iter().map(|t| (x0 - push * t).max(0.0)).collect();
    let max_error = x.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    json(&Unilateral { t, x, exact, max_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unilateral_matches_the_closed_form() {
        let v: serde_json::Value = serde_json::from_str(&unilateral(1.0, 1.0, 2.0, 400).unwrap()).unwrap();
        assert!(v["max_error"].as_f64().unwrap() < 1e-2);
    }

    #[test]
    fn envelope_vanishes_on_the_well() {
        let v: serde_json::Value = serde_json::from_str(&envelope_curve(0.0, 1.0, 9).unwrap()).unwrap();
        let env = v["envelope"].as_array().unwrap();
        assert!(env[0].is_null());
        assert!(env[120].as_f64().unwrap().abs() < 1e-9);
    }

    #[test]
    fn chattered_cost_tracks_the_reference() {
        let v: serde_json::Value = serde_json::from_str(&chatter_p1(5, 1000).unwrap()).unwrap();
        let (cost, reference) = (v["cost"].as_f64().unwrap(), v["reference"].as_f64().unwrap());
        assert!((cost - reference).abs() <= 0.2 * reference, "{cost} vs {reference}");
    }
}
