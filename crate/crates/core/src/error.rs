use thiserror::Error;

use crate::case::LineId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid case: {0}")]
    Validation(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("unknown line {0}")]
    UnknownLine(String),

    #[error("unknown bus {0}")]
    UnknownBus(u32),

    #[error("line {line} is out of service")]
    LineOutOfService { line: LineId },

    #[error("degenerate outage on line {line}: |Xth - x| = {gap:.3e} (islanding line)")]
    DegenerateOutage { line: LineId, gap: f64 },

    #[error("unbalanced injection: sum = {sum:.3e} pu")]
    Unbalanced { sum: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("target line {line} is unobservable from the PMU set (|beta2| = {norm:.3e})")]
    Unobservable { line: LineId, norm: f64 },

    #[error("invalid attack budget tau = {0}; expected 0 < tau <= 4")]
    InvalidTau(f64),

    #[error("attack problem is infeasible")]
    Infeasible,

    #[error("attack problem is unbounded")]
    Unbounded,

    #[error("iteration cap of {cap} reached; best objective so far {best_objective:.6e}")]
    IterationCap { cap: usize, best_objective: f64 },

    #[error("measurement matrix is rank deficient (rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("invalid input: {0}")]
    Invalid(String),
}
