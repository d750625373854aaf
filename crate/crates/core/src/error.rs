use thiserror::Error;

use crate::design::DefectiveSet;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// A formula hit a zero denominator (e.g. an entropy of exactly 0).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("design of {cells} cells exceeds the memory budget of {budget} cells")]
    Size { cells: u128, budget: u64 },

    #[error("item {item} out of range for {n} items")]
    IndexOutOfRange { item: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("outcome vector is not produced by any set of items")]
    Inconsistent,

    /// Exact search gave up; `incumbent` is the best satisfying set seen so far.
    #[error("search budget of {budget} nodes exceeded")]
    BudgetExceeded {
        budget: u64,
        incumbent: Option<DefectiveSet>,
    },

    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),

    #[error("satisfying family is empty")]
    EmptyFamily,

    #[error("curve never crosses level {level}")]
    NoCrossing { level: f64 },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
