use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::StepProfile;
use crate::{Matrix, Vector};

/// A monomial `coeff · Π x_i^{x[i]} · Π u_j^{u[j]}`; missing powers are 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coeff: f64,
    #[serde(default)]
    pub x: Vec<u32>,
    #[serde(default)]
    pub u: Vec<u32>,
}

impl Monomial {
    fn eval(&self, x: &Vector, u: &Vector) -> f64 {
        let xs = self.x.iter().zip(x.iter()).map(|(p, v)| v.powi(*p as i32));
        let us = self.u.iter().zip(u.iter()).map(|(p, v)| v.powi(*p as i32));
        self.coeff * xs.chain(us).product::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostKind {
    /// `(x − r)ᵀ Q (x − r) + c |u|² + d (1 − |u|²)²`.
    Quadratic {
        #[serde(with = "crate::serde_la::matrix")]
        state_weight: Matrix,
        #[serde(default, with = "crate::serde_la::opt_vector", skip_serializing_if = "Option::is_none")]
        state_ref: Option<Vector>,
        #[serde(default)]
        control_weight: f64,
        #[serde(default)]
        double_well: f64,
    },
    Polynomial { terms: Vec<Monomial> },
}

/// Running cost `L(t, x, u)` with its declared bound profile `a_r(t)` and
/// Lipschitz profile `ϑ_r(t)` on the ball of radius `r = ĉ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    #[serde(flatten)]
    pub kind: CostKind,
    /// `a_r(t) ≥ |L(t, x, u)|` for `|x| ≤ ĉ`, `u ∈ U(t, x)`; also the cap of Γ.
    pub bound: StepProfile,
    /// `ϑ_r(t)` with `|L(t,x,u) − L(t,y,v)| ≤ ϑ_r(t)(|x − y| + |u − v|)`.
    pub lipschitz: StepProfile,
}

impl CostSpec {
    pub fn new(kind: CostKind, bound: StepProfile, lipschitz: StepProfile) -> Self {
        Self {
            kind,
            bound,
            lipschitz,
        }
    }

    /// Checks the cost against state dimension `n` and control dimension `m`.
    pub fn check(&self, n: usize, m: usize) -> Result<()> {
        match &self.kind {
            CostKind::Quadratic {
                state_weight,
                state_ref,
                control_weight,
                double_well,
            } => {
                if state_weight.nrows() != n || state_weight.ncols() != n {
                    return Err(Error::Dimension(format!(
                        "state weight is {}×{}, expected {n}×{n}",
                        state_weight.nrows(),
                        state_weight.ncols()
                    )));
                }
                if let Some(r) = state_ref {
                    if r.len() != n {
                        return Err(Error::Dimension(format!(
                            "state reference has length {}, expected {n}",
                            r.len()
                        )));
                    }
                }
                let finite = state_weight.iter().all(|v| v.is_finite())
                    && state_ref.iter().flat_map(|r| r.iter()).all(|v| v.is_finite())
                    && control_weight.is_finite()
                    && double_well.is_finite();
                if !finite {
                    return Err(Error::NonFinite("cost coefficients".into()));
                }
            }
            CostKind::Polynomial { terms } => {
                for (i, term) in terms.iter().enumerate() {
                    if term.x.len() > n || term.u.len() > m {
                        return Err(Error::Dimension(format!(
                            "monomial {i} has more powers than variables"
                        )));
                    }
                    if !term.coeff.is_finite() {
                        return Err(Error::NonFinite(format!("monomial {i} coefficient")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, _t: f64, x: &Vector, u: &Vector) -> f64 {
        match &self.kind {
            CostKind::Quadratic {
                state_weight,
                state_ref,
                control_weight,
                double_well,
            } => {
                let dx = match state_ref {
                    Some(r) => x - r,
                    None => x.clone(),
                };
                let u2 = u.norm_squared();
                dx.dot(&(state_weight * &dx)) + control_weight * u2 + double_well * (1.0 - u2).powi(2)
            }
            CostKind::Polynomial { terms } => terms.iter().map(|m| m.eval(x, u)).sum(),
        }
    }

    /// The cap `a_ĉ(t)` bounding `η` in `Γ(t, x)`.
    pub fn cap(&self, t: f64) -> f64 {
        self.bound.at(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn quadratic_double_well() {
        let cost = CostSpec::new(
            CostKind::Quadratic {
                state_weight: dmatrix![1.0],
                state_ref: None,
                control_weight: 0.0,
                double_well: 1.0,
            },
            StepProfile::constant(9.0),
            StepProfile::constant(6.0),
        );
        cost.check(1, 1).unwrap();
        assert_eq!(cost.eval(0.0, &dvector![0.0], &dvector![0.0]), 1.0);
        assert_eq!(cost.eval(0.0, &dvector![2.0], &dvector![1.0]), 4.0);
        assert!(cost.check(2, 1).is_err());
    }

    #[test]
    fn polynomial_matches_quadratic() {
        // x² + (1 − u²)² = x² + 1 − 2u² + u⁴
        let json = r#"{"kind":"polynomial","terms":[
            {"coeff":1.0,"x":[2]},{"coeff":1.0},{"coeff":-2.0,"u":[2]},{"coeff":1.0,"u":[4]}
        ],"bound":9.0,"lipschitz":6.0}"#;
        let poly: CostSpec = serde_json::from_str(json).unwrap();
        poly.check(1, 1).unwrap();
        let quad = CostSpec::new(
            CostKind::Quadratic {
                state_weight: dmatrix![1.0],
                state_ref: None,
                control_weight: 0.0,
                double_well: 1.0,
            },
            StepProfile::constant(9.0),
            StepProfile::constant(6.0),
        );
        for (x, u) in [(0.3, -0.7), (1.5, 1.0), (-2.0, 0.1)] {
            let (x, u) = (dvector![x], dvector![u]);
            assert!((poly.eval(0.0, &x, &u) - quad.eval(0.0, &x, &u)).abs() < 1e-12);
        }
    }

    #[test]
    fn state_reference_serde() {
        let json = r#"{"kind":"quadratic","state_weight":[[1.0]],"state_ref":[1.0],"control_weight":0.1,"bound":5.0,"lipschitz":5.0}"#;
        let cost: CostSpec = serde_json::from_str(json).unwrap();
        assert!((cost.eval(0.0, &dvector![1.0], &dvector![1.0]) - 0.1).abs() < 1e-15);
        let back: CostSpec = serde_json::from_str(&serde_json::to_string(&cost).unwrap()).unwrap();
        assert_eq!(back, cost);
    }
}
