//! Maximal monotone operators with closed-form resolvents.
//!
//! Four families are supported: the zero map, the normal cone of a box
//! (unilateral constraints), a linear monotone map, and the subdifferential
//! of a weighted ℓ¹ norm. Each satisfies `0 ∈ A(0)`.

use nalgebra::{Dyn, SymmetricEigen, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Smallest admissible eigenvalue of the symmetric part of a linear operator.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    Zero,
    /// Normal cone of `[lo, hi]`; infinite bounds are allowed.
    NormalConeBox { lo: Vector, hi: Vector },
    /// `A(x) = P x` with `P + Pᵀ` positive semidefinite.
    LinearMonotone { matrix: Matrix },
    /// Subdifferential of `x ↦ Σ wᵢ |xᵢ|`.
    SubdiffAbs { weights: Vector },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorSpec", into = "OperatorSpec")]
pub struct MonotoneOperator {
    kind: OperatorKind,
    dim: usize,
}

pub struct PreparedResolvent<'a> {
    op: &'a MonotoneOperator,
    lambda: f64,
    lu: Option<LU<f64, Dyn, Dyn>>,
}

impl PreparedResolvent<'_> {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn apply(&self, z: &Vector) -> Result<Vector> {
        self.op.check_point(z)?;
        let x = match &self.op.kind {
            OperatorKind::Zero => z.clone(),
            OperatorKind::NormalConeBox { lo, hi } => clamp(z, lo, hi),
            OperatorKind::LinearMonotone { .. } => self
                .lu
                .as_ref()
                .and_then(|lu| lu.solve(z))
                .ok_or(Error::SingularResolvent {
                    lambda: self.lambda,
                })?,
            OperatorKind::SubdiffAbs { weights } => Vector::from_iterator(
                z.len(),
                z.iter().zip(weights.iter()).map(|(zi, wi)| {
                    let mag = zi.abs() - self.lambda * wi;
                    if mag > 0.0 {
                        mag.copysign(*zi)
                    } else {
                        0.0
                    }
                }),
            ),
        };
        Ok(x)
    }
}

/// Scenario-file representation of an operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Zero {
        dim: usize,
    },
    /// `null` bounds mean unbounded on that side.
    NormalConeBox {
        lo: Vec<Option<f64>>,
        hi: Vec<Option<f64>>,
    },
    LinearMonotone {
        matrix: Vec<Vec<f64>>,
    },
    SubdiffAbs {
        weights: Vec<f64>,
    },
}

impl TryFrom<OperatorSpec> for MonotoneOperator {
    type Error = Error;

    fn try_from(spec: OperatorSpec) -> Result<Self> {
        match spec {
            OperatorSpec::Zero { dim } => MonotoneOperator::zero(dim),
            OperatorSpec::NormalConeBox { lo, hi } => {
                let lo = lo.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY));
                let hi = hi.iter().map(|v| v.unwrap_or(f64::INFINITY));
                MonotoneOperator::normal_cone_box(
                    Vector::from_iterator(lo.len(), lo),
                    Vector::from_iterator(hi.len(), hi),
                )
            }
            OperatorSpec::LinearMonotone { matrix } => {
                MonotoneOperator::linear(crate::matrix_from_rows(&matrix, "matrix")?)
            }
            OperatorSpec::SubdiffAbs { weights } => {
                MonotoneOperator::subdiff_abs(Vector::from_vec(weights))
            }
        }
    }
}

impl From<MonotoneOperator> for OperatorSpec {
    fn from(op: MonotoneOperator) -> Self {
        let bound = |v: f64| v.is_finite().then_some(v);
        match op.kind {
            OperatorKind::Zero => OperatorSpec::Zero { dim: op.dim },
            OperatorKind::NormalConeBox { lo, hi } => OperatorSpec::NormalConeBox {
                lo: lo.iter().copied().map(bound).collect(),
                hi: hi.iter().copied().map(bound).collect(),
            },
            OperatorKind::LinearMonotone { matrix } => OperatorSpec::LinearMonotone {
                matrix: crate::matrix_to_rows(&matrix),
            },
            OperatorKind::SubdiffAbs { weights } => OperatorSpec::SubdiffAbs {
                weights: weights.iter().copied().collect(),
            },
        }
    }
}

impl MonotoneOperator {
    pub fn zero(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            kind: OperatorKind::Zero,
            dim,
        })
    }

    pub fn normal_cone_box(lo: Vector, hi: Vector) -> Result<Self> {
        let dim = lo.len();
        check_dim(dim)?;
        if hi.len() != dim {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                dim,
                hi.len()
            )));
        }
        for i in 0..dim {
            if lo[i].is_nan() || hi[i].is_nan() {
                return Err(Error::InvalidOperator("box bounds must not be NaN".into()));
            }
            if lo[i] > hi[i] {
                return Err(Error::InvalidOperator(format!(
                    "empty box: lo[{i}] = {} > hi[{i}] = {}",
                    lo[i], hi[i]
                )));
            }
            if lo[i] > 0.0 || hi[i] < 0.0 {
                return Err(Error::InvalidOperator(format!(
                    "0 ∉ A(0): box [{}, {}] in coordinate {i} excludes the origin",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(Self {
            kind: OperatorKind::NormalConeBox { lo, hi },
            dim,
        })
    }

    pub fn linear(matrix: Matrix) -> Result<Self> {
        let dim = matrix.nrows();
        check_dim(dim)?;
        if matrix.ncols() != dim {
            return Err(Error::Dimension(format!(
                "linear operator must be square, got {}x{}",
                dim,
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidOperator("matrix entries must be finite".into()));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
        if min_eig < -PSD_TOLERANCE {
            return Err(Error::InvalidOperator(format!(
                "symmetric part has eigenvalue {min_eig} < 0; operator is not monotone"
            )));
        }
        Ok(Self {
            kind: OperatorKind::LinearMonotone { matrix },
            dim,
        })
    }

    pub fn subdiff_abs(weights: Vector) -> Result<Self> {
        let dim = weights.len();
        check_dim(dim)?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidOperator(
                "subdifferential weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            kind: OperatorKind::SubdiffAbs { weights },
            dim,
        })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(I + λA)⁻¹ z`.
    pub fn resolvent(&self, lambda: f64, z: &Vector) -> Result<Vector> {
        self.prepare(lambda)?.apply(z)
    }

    /// Resolvent with a fixed step, factoring linear systems once.
    pub fn prepare(&self, lambda: f64) -> Result<PreparedResolvent<'_>> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::NonFinite(format!("resolvent step λ = {lambda}")));
        }
        let lu = match &self.kind {
            OperatorKind::LinearMonotone { matrix } => {
                let lu = (Matrix::identity(self.dim, self.dim) + matrix * lambda).lu();
                if !lu.is_invertible() {
                    return Err(Error::SingularResolvent { lambda });
                }
                Some(lu)
            }
            _ => None,
        };
        Ok(PreparedResolvent {
            op: self,
            lambda,
            lu,
        })
    }

    /// Nearest point of `cl D(A)`.
    pub fn domain_project(&self, z: &Vector) -> Vector {
        match &self.kind {
            OperatorKind::NormalConeBox { lo, hi } => clamp(z, lo, hi),
            _ => z.clone(),
        }
    }

    pub fn domain_distance(&self, z: &Vector) -> f64 {
        (self.domain_project(z) - z).norm()
    }

    /// Minimal-norm element of `A(x)` for `x ∈ D(A)`.
    pub fn min_norm_element(&self, x: &Vector) -> Vector {
        match &self.kind {
            OperatorKind::Zero | OperatorKind::NormalConeBox { .. } => Vector::zeros(self.dim),
            OperatorKind::LinearMonotone { matrix } => matrix * x,
            OperatorKind::SubdiffAbs { weights } => Vector::from_iterator(
                self.dim,
                x.iter()
                    .zip(weights.iter())
                    .map(|(xi, wi)| if *xi == 0.0 { 0.0 } else { wi.copysign(*xi) }),
            ),
        }
    }

    /// Graph points `(x, x*)` with `x` the projection of each sample onto the
    /// domain and `x*` the minimal-norm element of `A(x)`.
    pub fn graph_pairs(&self, samples: &[Vector]) -> Vec<(Vector, Vector)> {
        samples
            .iter()
            .map(|s| {
                let x = self.domain_project(s);
                let xs = self.min_norm_element(&x);
                (x, xs)
            })
            .collect()
    }

    /// Euclidean distance from `w` to the set `A(x)`; `+∞` when `x ∉ D(A)`.
    pub fn distance_to_image(&self, x: &Vector, w: &Vector) -> f64 {
        match &self.kind {
            OperatorKind::Zero => w.norm(),
            OperatorKind::LinearMonotone { matrix } => (w - matrix * x).norm(),
            OperatorKind::NormalConeBox { lo, hi } => {
                let mut sq = 0.0;
                for i in 0..self.dim {
                    let d = if x[i] < lo[i] || x[i] > hi[i] {
                        return f64::INFINITY;
                    } else if lo[i] == hi[i] {
                        0.0
                    } else if x[i] == lo[i] {
                        w[i].max(0.0)
                    } else if x[i] == hi[i] {
                        (-w[i]).max(0.0)
                    } else {
                        w[i].abs()
                    };
                    sq += d * d;
                }
                sq.sqrt()
            }
            OperatorKind::SubdiffAbs { weights } => x
                .iter()
                .zip(w.iter())
                .zip(weights.iter())
                .map(|((xi, wi), ci)| {
                    let d = if *xi == 0.0 {
                        (wi.abs() - ci).max(0.0)
                    } else {
                        wi - ci.copysign(*xi)
                    };
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    fn check_point(&self, z: &Vector) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::Dimension(format!(
                "operator acts on R^{}, got a vector of length {}",
                self.dim,
                z.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("resolvent argument {:?}", z.as_slice())));
        }
        Ok(())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::Dimension("operator dimension must be positive".into()))
    } else {
        Ok(())
    }
}

fn clamp(z: &Vector, lo: &Vector, hi: &Vector) -> Vector {
    Vector::from_iterator(
        z.len(),
        (0..z.len()).map(|i| z[i].max(lo[i]).min(hi[i])),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;

    fn half_line() -> MonotoneOperator {
        MonotoneOperator::normal_cone_box(dvector![0.0], dvector![f64::INFINITY]).unwrap()
    }

    fn all_kinds(dim: usize) -> Vec<MonotoneOperator> {
        let mut p = Matrix::zeros(dim, dim);
        for i in 0..dim {
            p[(i, i)] = 0.5 + i as f64;
            if i + 1 < dim {
                p[(i, i + 1)] = 2.0;
                p[(i + 1, i)] = -2.0;
            }
        }
        vec![
            MonotoneOperator::zero(dim).unwrap(),
            MonotoneOperator::normal_cone_box(
                Vector::from_element(dim, -1.0),
                Vector::from_element(dim, f64::INFINITY),
            )
            .unwrap(),
            MonotoneOperator::linear(p).unwrap(),
            MonotoneOperator::subdiff_abs(Vector::from_element(dim, 0.7)).unwrap(),
        ]
    }

    #[test]
    fn resolvent_examples() {
        let zero = MonotoneOperator::zero(2).unwrap();
        assert_eq!(zero.resolvent(0.1, &dvector![1.0, 2.0]).unwrap(), dvector![1.0, 2.0]);
        assert_eq!(half_line().resolvent(0.5, &dvector![-3.0]).unwrap(), dvector![0.0]);
        let lin = MonotoneOperator::linear(Matrix::identity(1, 1)).unwrap();
        assert!((lin.resolvent(1.0, &dvector![2.0]).unwrap()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn soft_threshold() {
        let op = MonotoneOperator::subdiff_abs(dvector![1.0, 1.0, 1.0]).unwrap();
        let x = op.resolvent(0.5, &dvector![2.0, -0.3, -1.5]).unwrap();
        assert_eq!(x, dvector![1.5, 0.0, -1.0]);
    }

    #[test]
    fn domain_project_examples() {
        let zero = MonotoneOperator::zero(2).unwrap();
        assert_eq!(zero.domain_project(&dvector![5.0, 5.0]), dvector![5.0, 5.0]);
        let unit = MonotoneOperator::normal_cone_box(dvector![0.0, 0.0], dvector![1.0, 1.0]).unwrap();
        assert_eq!(unit.domain_project(&dvector![2.0, -1.0]), dvector![1.0, 0.0]);
        let abs = MonotoneOperator::subdiff_abs(dvector![1.0]).unwrap();
        assert_eq!(abs.domain_project(&dvector![-3.0]), dvector![-3.0]);
    }

    #[test]
    fn graph_pair_examples() {
        let zero = MonotoneOperator::zero(1).unwrap();
        let pairs = zero.graph_pairs(&[dvector![1.0], dvector![2.0]]);
        assert_eq!(pairs, vec![(dvector![1.0], dvector![0.0]), (dvector![2.0], dvector![0.0])]);
        let lin = MonotoneOperator::linear(Matrix::identity(1, 1) * 2.0).unwrap();
        assert_eq!(lin.graph_pairs(&[dvector![1.0]]), vec![(dvector![1.0], dvector![2.0])]);
        assert_eq!(
            half_line().graph_pairs(&[dvector![0.0]]),
            vec![(dvector![0.0], dvector![0.0])]
        );
    }

    #[test]
    fn rejects_invalid_operators() {
        assert!(MonotoneOperator::normal_cone_box(dvector![1.0], dvector![2.0]).is_err());
        assert!(MonotoneOperator::normal_cone_box(dvector![0.5], dvector![-0.5]).is_err());
        assert!(MonotoneOperator::linear(Matrix::identity(2, 2) * -1.0).is_err());
        assert!(MonotoneOperator::linear(Matrix::zeros(2, 3)).is_err());
        assert!(MonotoneOperator::subdiff_abs(dvector![-1.0]).is_err());
        assert!(MonotoneOperator::zero(0).is_err());
        // Skew-symmetric matrices are monotone (symmetric part is zero).
        let skew = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(MonotoneOperator::linear(skew).is_ok());
    }

    #[test]
    fn resolvent_rejects_bad_input() {
        let op = MonotoneOperator::zero(1).unwrap();
        assert!(op.resolvent(0.0, &dvector![1.0]).is_err());
        assert!(op.resolvent(1.0, &dvector![f64::NAN]).is_err());
        assert!(op.resolvent(1.0, &dvector![1.0, 2.0]).is_err());
    }

    #[test]
    fn residual_vanishes_on_resolvent_steps() {
        for op in all_kinds(3) {
            let z = dvector![-2.0, 0.3, 1.7];
            let lambda = 0.25;
            let x = op.resolvent(lambda, &z).unwrap();
            let w = (&z - &x) / lambda;
            assert!(op.distance_to_image(&x, &w) < 1e-12, "{:?}", op.kind());
        }
    }

    #[test]
    fn serde_round_trip_keeps_unbounded_sides() {
        let json = r#"{"kind":"normal_cone_box","lo":[0.0],"hi":[null]}"#;
        let op: MonotoneOperator = serde_json::from_str(json).unwrap();
        assert_eq!(op, half_line());
        assert_eq!(serde_json::to_string(&op).unwrap(), json);
    }

    fn vec3() -> impl Strategy<Value = Vector> {
        prop::collection::vec(-5.0f64..5.0, 3).prop_map(Vector::from_vec)
    }

    proptest! {
        #[test]
        fn graph_is_monotone(a in vec3(), b in vec3()) {
            for op in all_kinds(3) {
                let pairs = op.graph_pairs(&[a.clone(), b.clone()]);
                let (x, xs) = &pairs[0];
                let (y, ys) = &pairs[1];
                prop_assert!((xs - ys).dot(&(x - y)) >= -1e-12);
            }
        }

        #[test]
        fn resolvent_is_firmly_nonexpansive(a in vec3(), b in vec3(), li in 0usize..3) {
            let lambda = [0.01, 0.1, 1.0][li];
            for op in all_kinds(3) {
                let ja = op.resolvent(lambda, &a).unwrap();
                let jb = op.resolvent(lambda, &b).unwrap();
                let d = &ja - &jb;
                prop_assert!(d.norm_squared() <= d.dot(&(&a - &b)) + 1e-10);
            }
        }

        #[test]
        fn domain_project_is_idempotent(z in vec3()) {
            for op in all_kinds(3) {
                let p = op.domain_project(&z);
                prop_assert_eq!(op.domain_project(&p), p);
            }
        }
    }

    #[test]
    fn resolvent_fixes_origin() {
        for op in all_kinds(3) {
            for lambda in [0.01, 0.1, 1.0] {
                assert_eq!(op.resolvent(lambda, &Vector::zeros(3)).unwrap().norm(), 0.0);
            }
        }
    }
}
