use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::StepProfile;
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// `f(t, x) = B`.
    ConstantMatrix {
        #[serde(with = "crate::serde_la::matrix")]
        b: Matrix,
    },
    /// `f(t, x) = (1 + gain · min(|x|, radius)) · B`.
    StateAffine {
        #[serde(with = "crate::serde_la::matrix")]
        b: Matrix,
        gain: f64,
        radius: f64,
    },
    /// `f(t, x) = weight(t) · B`.
    TimeWeighted {
        #[serde(with = "crate::serde_la::matrix")]
        b: Matrix,
        weight: StepProfile,
    },
}

/// The control gain `f(t, x) ∈ ℝ^{N×m}` with its declared growth profile
/// `a(t)` and local Lipschitz profile `l(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    #[serde(flatten)]
    pub kind: FieldKind,
    /// `a(t)` with `‖f(t, x)‖ ≤ a(t)(1 + |x|)`.
    pub bound: StepProfile,
    pub lipschitz: StepProfile,
}

impl FieldSpec {
    pub fn new(kind: FieldKind, bound: StepProfile, lipschitz: StepProfile) -> Result<Self> {
        let spec = Self {
            kind,
            bound,
            lipschitz,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn constant(b: Matrix, bound: f64, lipschitz: f64) -> Result<Self> {
        Self::new(
            FieldKind::ConstantMatrix { b },
            StepProfile::constant(bound),
            StepProfile::constant(lipschitz),
        )
    }

    pub fn check(&self) -> Result<()> {
        let b = self.base();
        if b.nrows() == 0 || b.ncols() == 0 {
            return Err(Error::Dimension("field matrix must be nonempty".into()));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field matrix".into()));
        }
        if let FieldKind::StateAffine { gain, radius, .. } = &self.kind {
            if !gain.is_finite() || !(radius.is_finite() && *radius >= 0.0) {
                return Err(Error::NonFinite("state-affine gain and radius".into()));
            }
        }
        Ok(())
    }

    pub fn base(&self) -> &Matrix {
        match &self.kind {
            FieldKind::ConstantMatrix { b }
            | FieldKind::StateAffine { b, .. }
            | FieldKind::TimeWeighted { b, .. } => b,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.base().nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.base().ncols()
    }

    fn scale(&self, t: f64, x: &Vector) -> f64 {
        match &self.kind {
            FieldKind::ConstantMatrix { .. } => 1.0,
            FieldKind::StateAffine { gain, radius, .. } => 1.0 + gain * x.norm().min(*radius),
            FieldKind::TimeWeighted { weight, .. } => weight.at(t),
        }
    }

    pub fn matrix(&self, t: f64, x: &Vector) -> Matrix {
        self.base() * self.scale(t, x)
    }

    /// `f(t, x) u`.
    pub fn apply(&self, t: f64, x: &Vector, u: &Vector) -> Vector {
        (self.base() * u) * self.scale(t, x)
    }

    /// Spectral norm `‖f(t, x)‖`.
    pub fn operator_norm(&self, t: f64, x: &Vector) -> f64 {
        let sigma = self
            .base()
            .clone()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max);
        sigma * self.scale(t, x).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn kinds_evaluate() {
        let b = dmatrix![1.0, 0.0; 0.0, 2.0];
        let x = dvector![3.0, 4.0];
        let u = dvector![1.0, 1.0];
        let c = FieldSpec::constant(b.clone(), 2.0, 0.0).unwrap();
        assert_eq!(c.apply(0.0, &x, &u), dvector![1.0, 2.0]);
        assert!((c.operator_norm(0.0, &x) - 2.0).abs() < 1e-12);

        let s = FieldSpec::new(
            FieldKind::StateAffine {
                b: b.clone(),
                gain: 0.5,
                radius: 2.0,
            },
            StepProfile::constant(4.0),
            StepProfile::constant(1.0),
        )
        .unwrap();
        // |x| = 5 saturates at 2: scale 2
        assert_eq!(s.apply(0.0, &x, &u), dvector![2.0, 4.0]);

        let w = FieldSpec::new(
            FieldKind::TimeWeighted {
                b,
                weight: StepProfile::new(vec![0.5], vec![1.0, 3.0]).unwrap(),
            },
            StepProfile::constant(6.0),
            StepProfile::constant(0.0),
        )
        .unwrap();
        assert_eq!(w.apply(0.25, &x, &u), dvector![1.0, 2.0]);
        assert_eq!(w.apply(0.75, &x, &u), dvector![3.0, 6.0]);
    }

    #[test]
    fn serde_round_trip() {
        let json = r#"{"kind":"state_affine","b":[[1.0],[0.5]],"gain":0.2,"radius":3.0,"bound":2.0,"lipschitz":0.2}"#;
        let spec: FieldSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.state_dim(), 2);
        assert_eq!(spec.control_dim(), 1);
        let back: FieldSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
