use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failures of the expression language front end.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax {
        offset: usize,
        message: &'static str,
    },
    #[error("unknown symbol `{name}` at offset {offset}")]
    UnknownSymbol { name: String, offset: usize },
    #[error("expected {expected} components, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("math domain error in component {component}")]
    MathDomain { component: usize },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid point: {0}")]
    InvalidPoint(&'static str),
    #[error("chart mismatch between point and expression")]
    ChartMismatch,
    #[error("point lies outside the domain")]
    OutOfDomain,
    #[error("base flow diverged near t = {t}")]
    Diverged { t: f64 },
    #[error("scenario invalid: {0}")]
    ScenarioInvalid(String),
    #[error("trajectory is undefined at or beyond the Zeno abort at t = {abort_time}")]
    BeyondAbort { abort_time: f64 },
    #[error("sampling the impulsive set produced no points")]
    DegenerateSection,
    #[error("need at least two samples")]
    Degenerate,
    #[error("no declared inverse and no impulsive-set sample to search")]
    PreimageUnavailable,
    #[error("representative lies on the impulsive set with no off-set class member")]
    IllPosedAtD,
    #[error("invalid measure: {0}")]
    InvalidMeasure(&'static str),
    #[error("map undefined at atoms {0:?}")]
    PartialMap(Vec<usize>),
}
