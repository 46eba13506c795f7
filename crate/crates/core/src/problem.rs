use serde::{Deserialize, Serialize};

use crate::controls::ControlSetSpec;
use crate::dynamics::{self, FieldSpec};
use crate::error::{Error, Result};
use crate::monotone::MonotoneOperator;
use crate::relax_convex::CostSpec;
use crate::Vector;

/// Data of the original problem
/// `min ∫₀ᵇ L(t, x, u) dt` subject to `−x′ ∈ A(x) + f(t, x) u`, `x(0) = x₀`,
/// `u(t) ∈ U(t, x(t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub horizon: f64,
    #[serde(with = "crate::serde_la::vector")]
    pub x0: Vector,
    pub operator: MonotoneOperator,
    pub field: FieldSpec,
    pub controls: ControlSetSpec,
    pub cost: CostSpec,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        horizon: f64,
        x0: Vector,
        operator: MonotoneOperator,
        field: FieldSpec,
        controls: ControlSetSpec,
        cost: CostSpec,
    ) -> Result<Self> {
        let problem = Self {
            name: name.into(),
            horizon,
            x0,
            operator,
            field,
            controls,
            cost,
        };
        problem.check()?;
        Ok(problem)
    }

    /// Dimension and finiteness checks shared by every entry point.
    pub fn check(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {}", self.horizon)));
        }
        let n = self.operator.dim();
        let m = self.controls.dim();
        let mismatch = |what: &str, got: usize, want: usize| {
            Error::Dimension(format!("{what} has dimension {got}, expected {want}"))
        };
        if self.x0.len() != n {
            return Err(mismatch("x0", self.x0.len(), n));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial state".into()));
        }
        self.field.check()?;
        if self.field.state_dim() != n {
            return Err(mismatch("field rows", self.field.state_dim(), n));
        }
        if self.field.control_dim() != m {
            return Err(mismatch("field columns", self.field.control_dim(), m));
        }
        self.controls.check()?;
        self.cost.check(n, m)
    }

    pub fn state_dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn control_dim(&self) -> usize {
        self.controls.dim()
    }

    /// `M = ‖a₀‖_∞`.
    pub fn control_radius(&self) -> f64 {
        self.controls.radius_bound()
    }

    /// The a-priori bound `ĉ` on every admissible trajectory.
    pub fn apriori_bound(&self) -> f64 {
        dynamics::apriori_bound(self)
    }
}
