use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("exponent m = {m} outside the admissible range for d = {d}: {reason}")]
    Range { d: usize, m: f64, reason: String },

    #[error("invalid value: {0}")]
    Value(String),

    #[error("integral diverges: {0}")]
    IntegralDivergence(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("quadrature and closed form disagree: {quadrature} vs {closed_form} (rel {rel:e})")]
    QuadratureMismatch {
        quadrature: f64,
        closed_form: f64,
        rel: f64,
    },

    #[error("time step restriction needs {needed} substeps, cap is {cap}")]
    Cfl { needed: usize, cap: usize },

    #[error("non-finite value in field at cell {cell}")]
    NonFinite { cell: usize },

    #[error("inversion failed: {0}")]
    Inversion(String),

    #[error("shift {0} hits an eigenvalue")]
    SingularShift(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
