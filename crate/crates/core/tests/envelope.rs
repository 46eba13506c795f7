use nalgebra::{dmatrix, dvector, DVector};
use proptest::prelude::*;
use relax_core::relax_convex::{biconjugate, lower_envelope, CostKind, CostSpec};
use relax_core::{ControlSetKind, ControlSetSpec, FieldSpec, MonotoneOperator, Problem, StepProfile};

fn box_problem(cost: CostKind) -> Problem {
    Problem::new(
        "envelope",
        1.0,
        dvector![0.0],
        MonotoneOperator::zero(1).unwrap(),
        FieldSpec::constant(dmatrix![1.0], 1.0, 0.0).unwrap(),
        ControlSetSpec::new(
            ControlSetKind::Box {
                lo: dvector![-1.0],
                hi: dvector![1.0],
            },
            StepProfile::constant(1.0),
            StepProfile::constant(0.0),
        )
        .unwrap(),
        CostSpec::new(cost, StepProfile::constant(100.0), StepProfile::constant(20.0)),
    )
    .unwrap()
}

fn double_well() -> Problem {
    box_problem(CostKind::Quadratic {
        state_weight: dmatrix![0.0],
        state_ref: None,
        control_weight: 0.0,
        double_well: 1.0,
    })
}

fn tilted() -> Problem {
    // x² + 0.3u² + (1 − u²)²: nonconvex in u, depends on x.
    box_problem(CostKind::Quadratic {
        state_weight: dmatrix![1.0],
        state_ref: Some(dvector![0.2]),
        control_weight: 0.3,
        double_well: 1.0,
    })
}

#[test]
fn double_well_envelope_vanishes_on_the_box() {
    let p = double_well();
    let x = dvector![0.0];
    for n in [3, 5, 9, 33] {
        for i in 0..=200 {
            let u = -1.0 + 2.0 * i as f64 / 200.0;
            let v = biconjugate(&p, 0.3, &x, &dvector![u], n).unwrap();
            assert!(v.abs() <= 1e-9, "n = {n}, u = {u}: {v}");
        }
        for u in [-1.5, -1.0 - 1e-6, 1.0 + 1e-6, 2.0] {
            assert_eq!(biconjugate(&p, 0.3, &x, &dvector![u], n).unwrap(), f64::INFINITY);
        }
    }
}

/// Envelope of a scalar sample by exhaustive chords.
fn chord_oracle(pairs: &[(DVector<f64>, f64)], u: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (a, ea) in pairs {
        for (b, eb) in pairs {
            let (a, b) = (a[0], b[0]);
            let value = if a == b && a == u {
                ea.min(*eb)
            } else if a < b && a <= u && u <= b {
                let th = (u - a) / (b - a);
                (1.0 - th) * ea + th * eb
            } else {
                continue;
            };
            best = Some(best.map_or(value, |v: f64| v.min(value)));
        }
    }
    best
}

/// Envelope of a planar sample by exhaustive triangles, edges, and points.
fn triangle_oracle(pairs: &[(DVector<f64>, f64)], u: &DVector<f64>) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut offer = |v: f64| best = Some(best.map_or(v, |b: f64| b.min(v)));
    let n = pairs.len();
    for i in 0..n {
        if (&pairs[i].0 - u).norm() < 1e-12 {
            offer(pairs[i].1);
        }
        for j in i + 1..n {
            let (a, b) = (&pairs[i].0, &pairs[j].0);
            let d = b - a;
            let dd = d.norm_squared();
            if dd > 0.0 {
                let th = (u - a).dot(&d) / dd;
                if (0.0..=1.0).contains(&th) && (a + &d * th - u).norm() < 1e-12 {
                    offer((1.0 - th) * pairs[i].1 + th * pairs[j].1);
                }
            }
            for k in j + 1..n {
                let c = &pairs[k].0;
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                if det.abs() < 1e-14 {
                    continue;
                }
                let l1 = ((u[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (u[1] - a[1])) / det;
                let l2 = ((b[0] - a[0]) * (u[1] - a[1]) - (u[0] - a[0]) * (b[1] - a[1])) / det;
                let l0 = 1.0 - l1 - l2;
                if l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12 {
                    offer(l0 * pairs[i].1 + l1 * pairs[j].1 + l2 * pairs[k].1);
                }
            }
        }
    }
    best
}

fn scalar_sample() -> impl Strategy<Value = Vec<(DVector<f64>, f64)>> {
    prop::collection::vec((-3.0..3.0f64, -2.0..2.0f64), 1..10)
        .prop_map(|v| v.into_iter().map(|(u, e)| (dvector![u], e)).collect())
}

fn planar_sample() -> impl Strategy<Value = Vec<(DVector<f64>, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, -1.0..1.0f64), 3..8)
        .prop_map(|v| v.into_iter().map(|(a, b, e)| (dvector![a, b], e)).collect())
}

proptest! {
    #[test]
    fn scalar_envelope_matches_chords(pairs in scalar_sample(), u in -3.5..3.5f64) {
        let got = lower_envelope(&pairs, &dvector![u]).map(|e| e.value);
        let want = chord_oracle(&pairs, u);
        match (got, want) {
            (Some(g), Some(w)) => prop_assert!((g - w).abs() <= 1e-9, "{g} vs {w}"),
            (None, None) => {}
            other => prop_assert!(false, "membership differs: {other:?}"),
        }
    }

    #[test]
    fn planar_envelope_matches_triangles(pairs in planar_sample(), u0 in -2.0..2.0f64, u1 in -2.0..2.0f64) {
        let u = dvector![u0, u1];
        let got = lower_envelope(&pairs, &u);
        let want = triangle_oracle(&pairs, &u);
        match (&got, want) {
            (Some(g), Some(w)) => {
                prop_assert!((g.value - w).abs() <= 1e-8, "{} vs {w}", g.value);
                let bary = pairs.iter().zip(&g.weights).fold(DVector::zeros(2), |acc, ((a, _), w)| acc + a * *w);
                prop_assert!((bary - &u).norm() <= 1e-8);
                prop_assert!(g.weights.iter().all(|w| *w >= -1e-12));
            }
            (None, None) => {}
            // Points on the hull boundary may fall either way under round-off.
            (None, Some(_)) | (Some(_), None) => {
                let inside = pairs.iter().any(|(a, _)| (a - &u).norm() < 1e-6);
                prop_assert!(!inside);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn envelope_invariants(t in 0.0..1.0f64, x in -2.0..2.0f64, u in -1.0..1.0f64, v in -1.0..1.0f64) {
        let p = tilted();
        let xv = dvector![x];
        let env = |w: f64, n: usize| biconjugate(&p, t, &xv, &dvector![w], n).unwrap();
        // Minorant on the net, which for the box lattice contains ±1 and its midpoints.
        for n in [3, 5, 9, 17] {
            let h = 2.0 / (n - 1) as f64;
            for i in 0..n {
                let a = -1.0 + h * i as f64;
                prop_assert!(env(a, n) <= p.cost.eval(t, &xv, &dvector![a]) + 1e-12);
            }
        }
        // Midpoint convexity.
        let mid = env(0.5 * (u + v), 17);
        prop_assert!(mid <= 0.5 * (env(u, 17) + env(v, 17)) + 1e-9);
        // Nested nets can only lower the envelope.
        let values: Vec<f64> = [3, 5, 9, 17].iter().map(|n| env(u, *n)).collect();
        for w in values.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{values:?}");
        }
        prop_assert_eq!(env(1.0 + 1e-3, 17), f64::INFINITY);
    }
}
