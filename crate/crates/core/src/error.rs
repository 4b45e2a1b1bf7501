use thiserror::Error;

use crate::mixing::TraceStep;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("x = {x} lies outside [-{sigma}, {sigma}]")]
    OutOfDomain { x: f64, sigma: f64 },

    #[error("digit (sign {sign}, a = {a}) has an empty cylinder for q = {q}")]
    EmptyCylinder { q: u32, sign: i8, a: u64 },

    #[error("power iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("deflation residual {0:e} exceeds tolerance")]
    Deflation(f64),

    #[error("interval [{c}, {d}] contains 0 in its interior")]
    ContainsZero { c: f64, d: f64 },

    #[error("interval did not cover I_q within {max_iter} steps (last measure {last_measure})")]
    NotMixed {
        max_iter: usize,
        last_measure: f64,
        trace: Vec<TraceStep>,
    },

    #[error("degenerate variance: sigma^2 = {sigma2:e}, Var(S_N)/Var(S_N/10) = {growth_ratio}")]
    DegenerateVariance { sigma2: f64, growth_ratio: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
