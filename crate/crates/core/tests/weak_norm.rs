use nalgebra::{dvector, DVector};
use proptest::prelude::*;
use relax_core::{ControlSignal, Grid, PiecewiseSignal};

fn square_wave(n: usize) -> PiecewiseSignal {
    // Period 2/n on [0, 1]: +1 then −1 on halves of length 1/n.
    let breaks: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    let values = (0..n).map(|j| dvector![if j % 2 == 0 { 1.0 } else { -1.0 }]).collect();
    PiecewiseSignal::new(breaks, values).unwrap()
}

/// Brute force over all pairs of breakpoints.
fn weak_norm_oracle(breaks: &[f64], values: &[DVector<f64>]) -> f64 {
    let dim = values[0].len();
    let mut partial = vec![DVector::zeros(dim)];
    for (j, v) in values.iter().enumerate() {
        let next = partial[j].clone() + v * (breaks[j + 1] - breaks[j]);
        partial.push(next);
    }
    let mut best: f64 = 0.0;
    for a in &partial {
        for b in &partial {
            best = best.max((a - b).norm());
        }
    }
    best
}

#[test]
fn square_waves_have_weak_norm_one_over_n() {
    let mut previous = f64::INFINITY;
    for n in [1, 4, 8, 16, 32, 64, 100] {
        let w = square_wave(n).weak_norm();
        assert!((w - 1.0 / n as f64).abs() < 1e-14, "n = {n}: {w}");
        assert!(w < previous);
        previous = w;
        assert!((square_wave(n).l1_norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn grid_signals_agree_with_piecewise_form() {
    let grid = Grid::new(1.0, 64).unwrap();
    let u = ControlSignal::from_fn(grid, |t| dvector![if ((t * 16.0) as usize).is_multiple_of(2) { 1.0 } else { -1.0 }]).unwrap();
    assert!((u.weak_norm() - 1.0 / 16.0).abs() < 1e-14);
}

fn piecewise(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<DVector<f64>>)> {
    (1usize..12).prop_flat_map(move |pieces| {
        (
            prop::collection::vec(0.01..1.0f64, pieces),
            prop::collection::vec(prop::collection::vec(-2.0..2.0f64, dim), pieces),
        )
            .prop_map(|(lengths, values)| {
                let mut breaks = vec![0.0];
                for l in lengths {
                    breaks.push(breaks.last().unwrap() + l);
                }
                (breaks, values.into_iter().map(DVector::from_vec).collect())
            })
    })
}

proptest! {
    #[test]
    fn matches_brute_force_in_one_dimension((breaks, values) in piecewise(1)) {
        let s = PiecewiseSignal::new(breaks.clone(), values.clone()).unwrap();
        prop_assert!((s.weak_norm() - weak_norm_oracle(&breaks, &values)).abs() < 1e-12);
        prop_assert!(s.weak_norm() <= s.l1_norm() + 1e-12);
    }

    #[test]
    fn matches_brute_force_in_two_dimensions((breaks, values) in piecewise(2)) {
        let s = PiecewiseSignal::new(breaks.clone(), values.clone()).unwrap();
        prop_assert!((s.weak_norm() - weak_norm_oracle(&breaks, &values)).abs() < 1e-12);
    }

    #[test]
    fn triangle_inequality((breaks, values) in piecewise(1), shift in -1.0..1.0f64) {
        let a = PiecewiseSignal::new(breaks.clone(), values.clone()).unwrap();
        let shifted: Vec<DVector<f64>> = values.iter().rev().map(|v| v.add_scalar(shift)).collect();
        let b = PiecewiseSignal::new(breaks, shifted).unwrap();
        let d = a.sub(&b).unwrap();
        prop_assert!(d.weak_norm() <= a.weak_norm() + b.weak_norm() + 1e-12);
    }
}
