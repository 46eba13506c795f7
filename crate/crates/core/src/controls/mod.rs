//! Control constraint sets `U(t, x)`, metric projections, Hausdorff
//! distances, and piecewise-constant control signals.

mod signal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::StepProfile;
use crate::Vector;

pub use signal::{ControlSignal, PiecewiseSignal};

/// Relative tolerance under which two projection candidates count as tied.
const TIE_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlSetKind {
    /// Finitely many points, each translated by `shift_gain · sat(x)`
    /// (componentwise on the first `m` state coordinates).
    FiniteAtoms {
        #[serde(with = "crate::serde_la::vectors")]
        atoms: Vec<Vector>,
        #[serde(default)]
        shift_gain: f64,
        #[serde(default)]
        saturation: Saturation,
    },
    Box {
        #[serde(with = "crate::serde_la::vector")]
        lo: Vector,
        #[serde(with = "crate::serde_la::vector")]
        hi: Vector,
    },
    Ball {
        #[serde(with = "crate::serde_la::vector")]
        center: Vector,
        radius: f64,
    },
}

/// Slope-one saturation applied to the state before translating atoms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Saturation {
    #[default]
    Tanh,
    Clamp { radius: f64 },
}

impl Saturation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Saturation::Tanh => v.tanh(),
            Saturation::Clamp { radius } => v.clamp(-radius, radius),
        }
    }
}

/// `U(t, x)` together with its declared bound profile `a₀(t)` and
/// Hausdorff-Lipschitz profile `k(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSetSpec {
    #[serde(flatten)]
    pub kind: ControlSetKind,
    /// `a₀(t) ≥ sup{|u| : u ∈ U(t, x)}`.
    pub bound: StepProfile,
    /// `k(t)` with `h(U(t,x), U(t,y)) ≤ k(t)|x − y|`.
    pub lipschitz: StepProfile,
}

impl ControlSetSpec {
    pub fn new(kind: ControlSetKind, bound: StepProfile, lipschitz: StepProfile) -> Result<Self> {
        let spec = Self {
            kind,
            bound,
            lipschitz,
        };
        spec.check()?;
        Ok(spec)
    }

    /// Structural checks (dimensions, nonempty sets); hypothesis checks live in
    /// [`crate::scenario::validate`].
    pub fn check(&self) -> Result<()> {
        match &self.kind {
            ControlSetKind::FiniteAtoms {
                atoms,
                shift_gain,
                saturation,
            } => {
                if let Saturation::Clamp { radius } = saturation {
                    if !(radius.is_finite() && *radius > 0.0) {
                        return Err(Error::NonFinite("clamp radius must be positive".into()));
                    }
                }
                let Some(first) = atoms.first() else {
                    return Err(Error::EmptySet);
                };
                if first.is_empty() || atoms.iter().any(|a| a.len() != first.len()) {
                    return Err(Error::Dimension("atoms must share a positive dimension".into()));
                }
                if atoms.iter().flat_map(|a| a.iter()).any(|v| !v.is_finite())
                    || !shift_gain.is_finite()
                {
                    return Err(Error::NonFinite("control atoms".into()));
                }
            }
            ControlSetKind::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::Dimension("box bounds must have equal positive length".into()));
                }
                if lo.iter().chain(hi.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("control boxes must be bounded".into()));
                }
                if (0..lo.len()).any(|i| lo[i] > hi[i]) {
                    return Err(Error::EmptySet);
                }
            }
            ControlSetKind::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::Dimension("ball center must be nonempty".into()));
                }
                if !(radius.is_finite() && *radius >= 0.0) || center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("ball must have finite center and radius".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ControlSetKind::FiniteAtoms { atoms, .. } => atoms[0].len(),
            ControlSetKind::Box { lo, .. } => lo.len(),
            ControlSetKind::Ball { center, .. } => center.len(),
        }
    }

    /// `M = ‖a₀‖_∞`, the radius of the ball carrying every relaxed control.
    pub fn radius_bound(&self) -> f64 {
        self.bound.sup()
    }

    pub fn is_state_dependent(&self) -> bool {
        matches!(&self.kind, ControlSetKind::FiniteAtoms { shift_gain, .. } if *shift_gain != 0.0)
    }

    fn shift(&self, x: &Vector) -> Option<Vector> {
        match &self.kind {
            ControlSetKind::FiniteAtoms {
                shift_gain,
                saturation,
                ..
            } if *shift_gain != 0.0 => {
                let m = self.dim();
                Some(Vector::from_fn(m, |j, _| {
                    shift_gain * saturation.apply(x.get(j).copied().unwrap_or(0.0))
                }))
            }
            _ => None,
        }
    }

    /// A finite net of `U(t, x)` with at most about `n` points, always
    /// containing the extreme points. Finite atom sets ignore `n`.
    pub fn sample_atoms(&self, _t: f64, x: &Vector, n: usize) -> Vec<Vector> {
        match &self.kind {
            ControlSetKind::FiniteAtoms { atoms, .. } => match self.shift(x) {
                Some(s) => atoms.iter().map(|a| a + &s).collect(),
                None => atoms.clone(),
            },
            ControlSetKind::Box { lo, hi } => box_lattice(lo, hi, n),
            ControlSetKind::Ball { center, radius } => ball_net(center, *radius, n),
        }
    }

    /// Metric projection onto `U(t, x)`; ties go to the lexicographically
    /// smallest candidate.
    pub fn nearest_point(&self, t: f64, x: &Vector, target: &Vector) -> Vector {
        match &self.kind {
            ControlSetKind::FiniteAtoms { .. } => {
                let atoms = self.sample_atoms(t, x, 0);
                let mut best = &atoms[0];
                let mut best_d = (target - best).norm();
                for a in &atoms[1..] {
                    let d = (target - a).norm();
                    let tied = (d - best_d).abs() <= TIE_TOLERANCE * best_d.max(1.0);
                    if (!tied && d < best_d) || (tied && lex_less(a, best)) {
                        best = a;
                        best_d = d;
                    }
                }
                best.clone()
            }
            ControlSetKind::Box { lo, hi } => Vector::from_fn(target.len(), |i, _| {
                target[i].max(lo[i]).min(hi[i])
            }),
            ControlSetKind::Ball { center, radius } => {
                let d = target - center;
                let r = d.norm();
                if r <= *radius {
                    target.clone()
                } else {
                    center + d * (radius / r)
                }
            }
        }
    }

    pub fn distance(&self, t: f64, x: &Vector, u: &Vector) -> f64 {
        (u - self.nearest_point(t, x, u)).norm()
    }

    /// Largest observed ratio `h(U(t,x), U(t,y)) / |x − y|` over the pairs,
    /// with both sets represented by their `n`-point nets.
    pub fn lipschitz_probe(&self, t: f64, pairs: &[(Vector, Vector)], n: usize) -> f64 {
        pairs
            .iter()
            .filter_map(|(x, y)| {
                let gap = (x - y).norm();
                (gap > 0.0).then(|| {
                    let a = self.sample_atoms(t, x, n);
                    let b = self.sample_atoms(t, y, n);
                    hausdorff(&a, &b).expect("nets are nonempty") / gap
                })
            })
            .fold(0.0, f64::max)
    }
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[Vector], b: &[Vector]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let directed = |from: &[Vector], to: &[Vector]| {
        from.iter()
            .map(|p| to.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

fn lex_less(a: &Vector, b: &Vector) -> bool {
    a.iter()
        .zip(b.iter())
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x < y)
}

fn box_lattice(lo: &Vector, hi: &Vector, n: usize) -> Vec<Vector> {
    let m = lo.len();
    // largest per-axis count p ≥ 2 with p^m ≤ max(n, 2^m)
    let mut per_axis = 2usize;
    while (per_axis + 1).checked_pow(m as u32).is_some_and(|c| c <= n) {
        per_axis += 1;
    }
    let axes: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            if lo[i] == hi[i] {
                vec![lo[i]]
            } else {
                linspace(lo[i], hi[i], per_axis)
            }
        })
        .collect();
    let mut points = vec![Vec::with_capacity(m)];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    points.into_iter().map(Vector::from_vec).collect()
}

fn ball_net(center: &Vector, radius: f64, n: usize) -> Vec<Vector> {
    let m = center.len();
    if radius == 0.0 {
        return vec![center.clone()];
    }
    match m {
        1 => linspace(center[0] - radius, center[0] + radius, n.max(2))
            .into_iter()
            .map(|v| Vector::from_element(1, v))
            .collect(),
        2 => {
            let ring = n.saturating_sub(1).max(3);
            let mut pts = vec![center.clone()];
            for j in 0..ring {
                let angle = std::f64::consts::TAU * j as f64 / ring as f64;
                pts.push(center + Vector::from_vec(vec![radius * angle.cos(), radius * angle.sin()]));
            }
            pts
        }
        _ => {
            let mut pts = vec![center.clone()];
            for j in 0..m {
                for sign in [-1.0, 1.0] {
                    let mut p = center.clone();
                    p[j] += sign * radius;
                    pts.push(p);
                }
            }
            pts
        }
    }
}

fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    let last = (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { b } else { a + (b - a) * i as f64 / last })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;

    fn atoms_with(points: &[f64], shift_gain: f64, saturation: Saturation) -> ControlSetSpec {
        ControlSetSpec::new(
            ControlSetKind::FiniteAtoms {
                atoms: points.iter().map(|p| dvector![*p]).collect(),
                shift_gain,
                saturation,
            },
            StepProfile::constant(1.0 + shift_gain),
            StepProfile::constant(shift_gain),
        )
        .unwrap()
    }

    fn atoms(points: &[f64], shift_gain: f64) -> ControlSetSpec {
        atoms_with(points, shift_gain, Saturation::Tanh)
    }

    fn unit_box(m: usize) -> ControlSetSpec {
        ControlSetSpec::new(
            ControlSetKind::Box {
                lo: Vector::from_element(m, -1.0),
                hi: Vector::from_element(m, 1.0),
            },
            StepProfile::constant((m as f64).sqrt()),
            StepProfile::constant(0.0),
        )
        .unwrap()
    }

    #[test]
    fn sample_atoms_examples() {
        let x = dvector![0.3];
        assert_eq!(atoms(&[-1.0, 1.0], 0.0).sample_atoms(0.0, &x, 5), vec![dvector![-1.0], dvector![1.0]]);
        assert_eq!(
            unit_box(1).sample_atoms(0.0, &x, 3),
            vec![dvector![-1.0], dvector![0.0], dvector![1.0]]
        );
        let ball = ControlSetSpec::new(
            ControlSetKind::Ball {
                center: dvector![0.0],
                radius: 2.0,
            },
            StepProfile::constant(2.0),
            StepProfile::constant(0.0),
        )
        .unwrap();
        assert_eq!(ball.sample_atoms(0.0, &x, 2), vec![dvector![-2.0], dvector![2.0]]);
    }

    #[test]
    fn box_net_contains_vertices() {
        let net = unit_box(2).sample_atoms(0.0, &dvector![0.0, 0.0], 9);
        assert_eq!(net.len(), 9);
        for v in [dvector![-1.0, -1.0], dvector![-1.0, 1.0], dvector![1.0, -1.0], dvector![1.0, 1.0]] {
            assert!(net.contains(&v));
        }
        // Too few points requested still yields the vertices.
        assert_eq!(unit_box(3).sample_atoms(0.0, &dvector![0.0, 0.0, 0.0], 1).len(), 8);
    }

    #[test]
    fn ball_net_in_the_plane() {
        let ball = ControlSetSpec::new(
            ControlSetKind::Ball {
                center: dvector![0.0, 0.0],
                radius: 1.0,
            },
            StepProfile::constant(1.0),
            StepProfile::constant(0.0),
        )
        .unwrap();
        let net = ball.sample_atoms(0.0, &dvector![0.0, 0.0], 9);
        assert_eq!(net.len(), 9);
        assert_eq!(net[0], dvector![0.0, 0.0]);
        for p in &net[1..] {
            assert!((p.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn nearest_point_examples() {
        let x = dvector![0.0];
        let pm = atoms(&[-1.0, 1.0], 0.0);
        assert_eq!(pm.nearest_point(0.0, &x, &dvector![1.0]), dvector![1.0]);
        assert_eq!(pm.nearest_point(0.0, &x, &dvector![0.2]), dvector![1.0]);
        // Equidistant: lexicographically smallest wins.
        assert_eq!(pm.nearest_point(0.0, &x, &dvector![0.0]), dvector![-1.0]);
        let b = unit_box(3);
        assert_eq!(
            b.nearest_point(0.0, &dvector![0.0, 0.0, 0.0], &dvector![3.0, -7.0, 0.5]),
            dvector![1.0, -1.0, 0.5]
        );
    }

    #[test]
    fn hausdorff_examples() {
        let s = vec![dvector![1.0], dvector![4.0]];
        assert_eq!(hausdorff(&s, &s).unwrap(), 0.0);
        assert_eq!(hausdorff(&[dvector![0.0]], &[dvector![3.0]]).unwrap(), 3.0);
        // brute force: d(-1,{-1,2})=0, d(1,{-1,2})=1, d(-1,{-1,1})=0, d(2,{-1,1})=1
        let a = vec![dvector![-1.0], dvector![1.0]];
        let b = vec![dvector![-1.0], dvector![2.0]];
        assert_eq!(hausdorff(&a, &b).unwrap(), 1.0);
        assert!(hausdorff(&[], &b).is_err());
    }

    #[test]
    fn lipschitz_probe_examples() {
        let pairs = vec![(dvector![0.0], dvector![1.0]), (dvector![-0.4], dvector![0.9])];
        assert_eq!(atoms(&[-1.0, 1.0], 0.0).lipschitz_probe(0.0, &pairs, 4), 0.0);
        assert_eq!(unit_box(1).lipschitz_probe(0.0, &pairs, 4), 0.0);

        // In the linear range of the clamp every atom moves by exactly κ|x − y|.
        let linear = atoms_with(&[-1.0, 1.0], 0.5, Saturation::Clamp { radius: 10.0 });
        assert!((linear.lipschitz_probe(0.0, &pairs, 4) - 0.5).abs() < 1e-12);

        // Finite-difference slopes of the smooth saturation stay below the declared k.
        let shifted = atoms(&[-1.0, 1.0], 0.5);
        let close: Vec<_> = (0..50)
            .map(|i| {
                let x = -3.0 + 0.12 * i as f64;
                (dvector![x], dvector![x + 1e-6])
            })
            .collect();
        assert!(shifted.lipschitz_probe(0.0, &close, 4) <= 0.5 + 1e-6);
    }

    fn pt() -> impl Strategy<Value = Vector> {
        prop::collection::vec(-3.0f64..3.0, 2).prop_map(Vector::from_vec)
    }

    proptest! {
        #[test]
        fn nearest_point_is_a_member(target in pt(), x in pt()) {
            let ball = ControlSetSpec::new(
                ControlSetKind::Ball { center: dvector![0.5, 0.0], radius: 1.5 },
                StepProfile::constant(2.0),
                StepProfile::constant(0.0),
            ).unwrap();
            let shifted = ControlSetSpec::new(
                ControlSetKind::FiniteAtoms {
                    atoms: vec![dvector![-1.0, 0.0], dvector![1.0, 0.0], dvector![0.0, 1.0]],
                    shift_gain: 0.3,
                    saturation: Saturation::Tanh,
                },
                StepProfile::constant(1.5),
                StepProfile::constant(0.3),
            ).unwrap();
            for spec in [unit_box(2), ball, shifted] {
                let p = spec.nearest_point(0.0, &x, &target);
                prop_assert!(spec.distance(0.0, &x, &p) <= 1e-12);
                prop_assert!((&target - &p).norm() <= spec.distance(0.0, &x, &target) + 1e-12);
            }
        }

        #[test]
        fn hausdorff_is_a_metric(
            a in prop::collection::vec(pt(), 1..5),
            b in prop::collection::vec(pt(), 1..5),
            c in prop::collection::vec(pt(), 1..5),
        ) {
            let ab = hausdorff(&a, &b).unwrap();
            prop_assert_eq!(ab, hausdorff(&b, &a).unwrap());
            prop_assert!(ab <= hausdorff(&a, &c).unwrap() + hausdorff(&c, &b).unwrap() + 1e-12);
        }
    }
}
