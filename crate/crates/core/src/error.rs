use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("(alpha={alpha}, beta={beta}, c={c}) is not admissible: {rule}")]
    Inadmissible { alpha: f64, beta: f64, c: f64, rule: &'static str },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("path length must be at least 1")]
    EmptyPath,

    #[error("tau is only defined for walks started at 0 (start = {0})")]
    TauUndefined(f64),

    #[error("constraint kind mismatch: expected {expected}, got {got}")]
    ConstraintKind { expected: String, got: String },

    #[error("renewal table: {0}")]
    Table(String),

    #[error("budget refused: {needed:.3e} replicas needed (limit {limit:.0e}); {report}")]
    BudgetRefused { needed: f64, limit: f64, report: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
