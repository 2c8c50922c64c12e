use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },
    #[error("triangle {triangle} has non-positive area {area:e} after deformation")]
    InvertedElement { triangle: usize, area: f64 },
    #[error("linear solver breakdown: {0}")]
    SolverBreakdown(String),
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("integrand has no implemented Fenchel conjugate")]
    ConjugateUnavailable,
    #[error("quadratic form lost definiteness: {0}")]
    DegenerateForm(String),
    #[error("route requires a {expected} integrand")]
    WrongPair { expected: &'static str },
    #[error("deformation is not normal to the boundary (max tangential component {0:e})")]
    NonNormalV(f64),
    #[error("deformation does not vanish on the boundary (max |V| = {0:e})")]
    SupportViolation(f64),
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("config error in `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "INVALID_PARAMETER",
            Error::InvalidMesh(_) => "INVALID_MESH",
            Error::MeshParse { .. } => "MESH_PARSE",
            Error::InvertedElement { .. } => "INVERTED_ELEMENT",
            Error::SolverBreakdown(_) => "SOLVER_BREAKDOWN",
            Error::NoConvergence { .. } => "NO_CONVERGENCE",
            Error::ConjugateUnavailable => "CONJUGATE_UNAVAILABLE",
            Error::DegenerateForm(_) => "DEGENERATE_FORM",
            Error::WrongPair { .. } => "WRONG_PAIR",
            Error::NonNormalV(_) => "NONNORMAL_V",
            Error::SupportViolation(_) => "SUPPORT_VIOLATION",
            Error::UnsupportedCombination(_) => "UNSUPPORTED_COMBINATION",
            Error::Config { .. } => "CONFIG",
            Error::Io(_) => "IO",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
