//! The lower boundary of `conv Γ(t, x)` over a finite atom sample.

use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::{Matrix, Vector};

use super::lp::{self, LpOutcome};

/// Slack on `|x| ≤ ĉ` before Γ is considered undefined.
pub const BALL_TOLERANCE: f64 = 1e-6;
/// Relative slack on hull membership for targets produced by arithmetic.
const HULL_TOLERANCE: f64 = 1e-12;

/// Sample of `Γ(t, x)` at the level `η = L(t, x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSample {
    pub t: f64,
    pub x: Vector,
    pub pairs: Vec<(Vector, f64)>,
    pub cap: f64,
}

/// A minimizing convex combination for the envelope at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub value: f64,
    /// Weights over the sampled atoms, in sample order.
    pub weights: Vec<f64>,
}

pub fn gamma_sample(problem: &Problem, t: f64, x: &Vector, n: usize) -> Result<GammaSample> {
    let bound = problem.apriori_bound();
    let norm = x.norm();
    if norm > bound + BALL_TOLERANCE {
        return Err(Error::OutsideBall { t, norm, bound });
    }
    let cap = problem.cost.cap(t);
    let pairs = problem
        .controls
        .sample_atoms(t, x, n)
        .into_iter()
        .map(|u| {
            let value = problem.cost.eval(t, x, &u);
            if value > cap {
                return Err(Error::CapViolation {
                    t,
                    x: x.iter().copied().collect(),
                    u: u.iter().copied().collect(),
                    value,
                    cap,
                });
            }
            Ok((u, value))
        })
        .collect::<Result<_>>()?;
    Ok(GammaSample {
        t,
        x: x.clone(),
        pairs,
        cap,
    })
}

/// `min Σ αᵢ ηᵢ` over `α ≥ 0`, `Σ αᵢ = 1`, `Σ αᵢ uᵢ = u`; `None` when `u`
/// lies outside the convex hull of the atoms.
pub fn lower_envelope(pairs: &[(Vector, f64)], u: &Vector) -> Option<Envelope> {
    if pairs.is_empty() {
        return None;
    }
    if u.len() == 1 {
        scalar_envelope(pairs, u[0])
    } else {
        lp_envelope(pairs, u)
    }
}

fn scalar_envelope(pairs: &[(Vector, f64)], u: f64) -> Option<Envelope> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        pairs[a].0[0]
            .total_cmp(&pairs[b].0[0])
            .then(pairs[a].1.total_cmp(&pairs[b].1))
    });
    // Keep the lowest value per abscissa.
    order.dedup_by(|later, kept| pairs[*later].0[0] == pairs[*kept].0[0]);

    let abscissa = |i: usize| pairs[i].0[0];
    let lo = abscissa(order[0]);
    let hi = abscissa(*order.last().expect("nonempty"));
    let slack = HULL_TOLERANCE * lo.abs().max(hi.abs()).max(1.0);
    if u < lo - slack || u > hi + slack {
        return None;
    }
    let u = u.clamp(lo, hi);

    let mut hull: Vec<usize> = Vec::with_capacity(order.len());
    for &p in &order {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (abscissa(a) - abscissa(o)) * (pairs[p].1 - pairs[o].1)
                - (pairs[a].1 - pairs[o].1) * (abscissa(p) - abscissa(o));
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let mut weights = vec![0.0; pairs.len()];
    if let Some(&v) = hull.iter().find(|&&v| abscissa(v) == u) {
        weights[v] = 1.0;
        return Some(Envelope {
            value: pairs[v].1,
            weights,
        });
    }
    let j = hull.windows(2).position(|w| abscissa(w[0]) < u && u < abscissa(w[1]))?;
    let (a, b) = (hull[j], hull[j + 1]);
    let theta = (u - abscissa(a)) / (abscissa(b) - abscissa(a));
    weights[a] = 1.0 - theta;
    weights[b] = theta;
    Some(Envelope {
        value: (1.0 - theta) * pairs[a].1 + theta * pairs[b].1,
        weights,
    })
}

fn lp_envelope(pairs: &[(Vector, f64)], u: &Vector) -> Option<Envelope> {
    let m = u.len();
    let a = Matrix::from_fn(m + 1, pairs.len(), |i, j| if i < m { pairs[j].0[i] } else { 1.0 });
    let mut b: Vec<f64> = u.iter().copied().collect();
    b.push(1.0);
    let c: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    match lp::solve(&a, &b, &c) {
        LpOutcome::Optimal { x, value } => Some(Envelope { value, weights: x }),
        LpOutcome::Infeasible | LpOutcome::Unbounded => None,
    }
}

/// Euclidean distance from `u` to the convex hull of `points`: exact for
/// scalar controls and for members; Frank–Wolfe otherwise.
pub fn hull_distance(points: &[Vector], u: &Vector) -> f64 {
    if points.is_empty() {
        return f64::INFINITY;
    }
    if u.len() == 1 {
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
        return (lo - u[0]).max(u[0] - hi).max(0.0);
    }
    let flat: Vec<(Vector, f64)> = points.iter().map(|p| (p.clone(), 0.0)).collect();
    if lp_envelope(&flat, u).is_some() {
        return 0.0;
    }
    let mut y = points
        .iter()
        .min_by(|a, b| (*a - u).norm().total_cmp(&(*b - u).norm()))
        .expect("nonempty")
        .clone();
    for _ in 0..2000 {
        let grad = &y - u;
        let s = points
            .iter()
            .min_by(|a, b| a.dot(&grad).total_cmp(&b.dot(&grad)))
            .expect("nonempty");
        let d = s - &y;
        let dd = d.norm_squared();
        if dd == 0.0 || -grad.dot(&d) <= 1e-15 {
            break;
        }
        let gamma = (-grad.dot(&d) / dd).clamp(0.0, 1.0);
        y += d * gamma;
    }
    (y - u).norm()
}

/// `L̂**(t, x, u)` over the `n`-point sample of `U(t, x)`, with `+∞` off the hull.
pub fn biconjugate(problem: &Problem, t: f64, x: &Vector, u: &Vector, n: usize) -> Result<f64> {
    Ok(envelope_at(problem, t, x, u, n)?.map_or(f64::INFINITY, |e| e.value))
}

/// The minimizing combination behind [`biconjugate`].
pub fn envelope_at(
    problem: &Problem,
    t: f64,
    x: &Vector,
    u: &Vector,
    n: usize,
) -> Result<Option<Envelope>> {
    let sample = gamma_sample(problem, t, x, n)?;
    Ok(lower_envelope(&sample.pairs, u))
}
