use thiserror::Error;

use crate::exprlang::{EvalError, ParseError};

/// Which side of a map a chart error refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Source => "source",
            Side::Target => "target",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("point outside the domain of chart `{chart}` ({side}); predicate = {value}")]
    OutOfDomain {
        chart: String,
        side: Side,
        value: f64,
    },
    #[error("metric of chart `{chart}` is not positive definite at {point:?}")]
    NotPositiveDefinite { chart: String, point: Vec<f64> },
    #[error("map `{0}` has no weight function")]
    WeightMissing(String),
    #[error("weight must be positive, got {0}")]
    WeightNotPositive(f64),
    #[error("critical point: |dφ| = 0 where the operator is singular")]
    CriticalPoint,
    #[error("chart mismatch: expected `{expected}`, found `{found}`")]
    ChartMismatch { expected: String, found: String },
    #[error("map is not horizontally weakly conformal (residual {0:e})")]
    NotHwc(f64),
    #[error("map is not submersive at this point")]
    NotSubmersive,
    #[error("source and target have equal dimension; fibers are points")]
    EqualDimensions,
    #[error("map is not an immersion at this point")]
    NotImmersion,
    #[error("map is not f-harmonic for the given weight (residual {0:e})")]
    NotFHarmonic(f64),
    #[error("sampler exhausted: {accepted} of {requested} points after {attempts} attempts")]
    SamplerExhausted {
        requested: usize,
        accepted: usize,
        attempts: usize,
    },
    #[error("line search step fell below 1e-16 at iteration {0}")]
    StepUnderflow(usize),
    #[error("coupling weight is not positive at node {node}: {value}")]
    NonPositiveWeight { node: usize, value: f64 },
    #[error("time integration blew up at step {0}")]
    BlowUp(usize),
    #[error("invalid definition: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
