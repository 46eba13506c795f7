use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("non-finite forcing on interval {index}")]
    NonFiniteForcing { index: usize },

    #[error("resolvent system (I + {lambda} P) is singular")]
    SingularResolvent { lambda: f64 },

    #[error("initial state is {distance} away from the closure of D(A)")]
    InitialState { distance: f64 },

    #[error("control bound violated on interval {index}: |u| = {norm} > M = {bound}")]
    ControlBound { index: usize, norm: f64, bound: f64 },

    #[error("running cost {value} exceeds the cap {cap} at t = {t}, x = {x:?}, u = {u:?}")]
    CapViolation {
        t: f64,
        x: Vec<f64>,
        u: Vec<f64>,
        value: f64,
        cap: f64,
    },

    #[error("state norm {norm} exceeds the a-priori bound {bound} at t = {t}")]
    OutsideBall { t: f64, norm: f64, bound: f64 },

    #[error("inadmissible pair: {0}")]
    Inadmissible(String),

    #[error("support constraint violated on interval {interval}, atom {atom} (distance {distance})")]
    Support {
        interval: usize,
        atom: usize,
        distance: f64,
    },

    #[error("feedback inequality violated at step {step}: |target - v| = {gap} > bound {bound}")]
    FeedbackBound { step: usize, gap: f64, bound: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("empty point set")]
    EmptySet,

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
