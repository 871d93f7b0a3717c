use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The operation needs symbolic derivatives the field cannot provide.
    #[error("unsupported closure: {0}")]
    UnsupportedClosure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Kernel evaluated on its singularity.
    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("point {point:?} lies inside the source support (distance to support ball {distance:.3e})")]
    InsideSupport { point: [f64; 3], distance: f64 },

    #[error("source support would reach the boundary: {0}")]
    SupportTouchesBoundary(String),

    /// A quadrature self-check (order doubling, tail estimate) failed.
    #[error("unresolved quadrature: {0}")]
    Quadrature(String),

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("singular Gram matrix: {0}")]
    SingularGram(String),

    /// A numerical check contradicted a lemma that must hold for this input.
    #[error("lemma violation: {0}")]
    LemmaViolation(String),

    #[error("dataset format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
