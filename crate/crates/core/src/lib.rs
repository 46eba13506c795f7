//! Numerical relaxation of nonconvex optimal control problems
//!
//! ```text
//!     minimize  J(x, u) = ∫₀ᵇ L(t, x(t), u(t)) dt
//!     subject to  −x′(t) ∈ A(x(t)) + f(t, x(t)) u(t),  x(0) = x₀,  u(t) ∈ U(t, x(t))
//! ```
//!
//! with `A` maximal monotone (possibly with a proper domain, i.e. unilateral
//! constraints) and a state-dependent, nonconvex control set `U`.
//!
//! Two relaxations are provided and cross-checked: the convexified problem
//! driven by the biconjugate of the extended running cost ([`relax_convex`]),
//! and the Young-measure problem ([`relax_young`]). [`optimizer`] solves both
//! by direct transcription, and [`chattering`] turns relaxed solutions back
//! into ordinary admissible controls whose costs approach the relaxed value.

pub mod chattering;
pub mod controls;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod monotone;
pub mod optimizer;
pub mod problem;
pub mod profile;
pub mod relax_convex;
pub mod relax_young;
pub mod scenario;

pub use chattering::{ChatterOptions, ConvergenceRow};
pub use controls::{ControlSetKind, ControlSetSpec, ControlSignal, PiecewiseSignal, Saturation};
pub use dynamics::{FieldKind, FieldSpec, Grid, Trajectory};
pub use error::{Error, Result};
pub use monotone::MonotoneOperator;
pub use optimizer::{RelaxMode, RelaxationReport, RelaxedSolution, SolverOptions};
pub use problem::Problem;
pub use profile::StepProfile;
pub use relax_convex::{CostKind, CostSpec};
pub use relax_young::{DiscreteMeasure, YoungControl};
pub use scenario::{HypothesisReport, Scenario};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Dimension(format!("{what} must be a nonempty matrix")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!("{what} has ragged rows")));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Serde adapters storing matrices as row lists and vectors as plain arrays.
pub(crate) mod serde_la {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::{Matrix, Vector};

    pub mod matrix {
        use super::*;

        pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
            crate::matrix_to_rows(m).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
            let rows = Vec::<Vec<f64>>::deserialize(d)?;
            crate::matrix_from_rows(&rows, "matrix").map_err(serde::de::Error::custom)
        }
    }

    pub mod vector {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
            v.as_slice().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
            Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
        }
    }

    pub mod opt_vector {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<Vector>, s: S) -> Result<S::Ok, S::Error> {
            v.as_ref().map(|x| x.as_slice()).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vector>, D::Error> {
            Ok(Option::<Vec<f64>>::deserialize(d)?.map(Vector::from_vec))
        }
    }

    pub mod vectors {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Vector], s: S) -> Result<S::Ok, S::Error> {
            let rows: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector>, D::Error> {
            Ok(Vec::<Vec<f64>>::deserialize(d)?
                .into_iter()
                .map(Vector::from_vec)
                .collect())
        }
    }
}
