// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::geometry::SetTag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid constraint set: {0}")]
    InvalidSet(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{solver} did not converge after {iterations} iterations (KKT residual {residual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("point is within {distance:.3e} of a kink along coordinate {coordinate}; jitter and retry")]
    Degenerate { coordinate: usize, distance: f64 },

    #[error("operation requires a cone, got {0:?}")]
    NotACone(SetTag),

    #[error("operation requires a polyhedral set, got {0:?}")]
    NotPolyhedral(SetTag),

    #[error("at least {min} replications required, got {got}")]
    TooFewReplications { got: usize, min: usize },

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error("cost cap exceeded: {0}")]
    CostCap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::Degenerate { .. }
                | Error::InvariantViolated(_)
                | Error::CostCap(_)
        )
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
