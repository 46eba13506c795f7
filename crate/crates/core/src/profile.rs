//! Nonnegative step functions on a horizon `[0, b]`.
//!
//! Every hypothesis constant (growth bounds, Lipschitz moduli, caps) is a
//! step profile, so integrals of products stay exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous step function: `values[j]` holds on `[knots[j-1], knots[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct StepProfile {
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ProfileRepr {
    Constant(f64),
    Steps { knots: Vec<f64>, values: Vec<f64> },
}

impl TryFrom<ProfileRepr> for StepProfile {
    type Error = Error;

    fn try_from(repr: ProfileRepr) -> Result<Self> {
        match repr {
            ProfileRepr::Constant(c) => StepProfile::new(Vec::new(), vec![c]),
            ProfileRepr::Steps { knots, values } => StepProfile::new(knots, values),
        }
    }
}

impl From<StepProfile> for ProfileRepr {
    fn from(p: StepProfile) -> Self {
        if p.knots.is_empty() {
            ProfileRepr::Constant(p.values[0])
        } else {
            ProfileRepr::Steps {
                knots: p.knots,
                values: p.values,
            }
        }
    }
}

impl StepProfile {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != knots.len() + 1 {
            return Err(Error::InvalidProfile(format!(
                "{} knots need {} values, got {}",
                knots.len(),
                knots.len() + 1,
                values.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidProfile("knots must be strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidProfile(format!(
                "values must be finite and nonnegative, found {v}"
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidProfile("knots must be finite".into()));
        }
        Ok(Self { knots, values })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(Vec::new(), vec![value]).expect("constant profile must be finite and nonnegative")
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, t: f64) -> f64 {
        let j = self.knots.partition_point(|k| *k <= t);
        self.values[j]
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Pointwise combination; the result's knots are the union of both.
    pub fn combine(&self, other: &StepProfile, op: impl Fn(f64, f64) -> f64) -> StepProfile {
        let mut knots: Vec<f64> = self.knots.iter().chain(&other.knots).copied().collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut values = Vec::with_capacity(knots.len() + 1);
        // Evaluate just right of each left endpoint.
        let mut left = f64::NEG_INFINITY;
        for k in knots.iter().copied().chain(std::iter::once(f64::INFINITY)) {
            let probe = if left.is_finite() { left } else { k.min(0.0) - 1.0 };
            values.push(op(self.at(probe), other.at(probe)).max(0.0));
            left = k;
        }
        StepProfile { knots, values }
    }

    /// Exact integral over `[0, horizon]`.
    pub fn integral(&self, horizon: f64) -> f64 {
        let mut total = 0.0;
        let mut left = 0.0;
        for (j, value) in self.values.iter().enumerate() {
            let right = self.knots.get(j).copied().unwrap_or(f64::INFINITY).min(horizon);
            if right > left {
                total += value * (right - left);
                left = right;
            }
        }
        total
    }
}
