use thiserror::Error;

/// Failures raised by the spectral solvers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("grid of {grid} nodes cannot resolve order {order} (needs at least {required})")]
    Alias { grid: usize, order: usize, required: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("scalar lift undefined at grid node {node} (value {value})")]
    SingularValue { node: usize, value: String },

    #[error("no convergence after {iterations} iterations (last residual {last_residual:.3e})")]
    Convergence {
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("inverse perturbation failed at {point}: residual {residual:.3e}")]
    Inversion { point: String, residual: f64 },

    #[error("disk parameter too close to the singular caps: {0}")]
    NearPole(String),

    #[error("foliation failed: {0}")]
    Foliation(String),

    #[error("graph representation violated: {0}")]
    Graph(String),

    #[error("boundary frame error: {0}")]
    Frame(String),

    #[error("phase step {step:.4} at node {node} exceeds pi/2; grid too coarse")]
    GridTooCoarse { node: usize, step: f64 },

    #[error("singular locus tracing failed: {0}")]
    Locus(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Alias { .. } => "AliasError",
            Error::Domain(_) => "DomainError",
            Error::SingularValue { .. } => "SingularValueError",
            Error::Convergence { .. } => "ConvergenceError",
            Error::Inversion { .. } => "InversionError",
            Error::NearPole(_) => "NearPoleError",
            Error::Foliation(_) => "FoliationError",
            Error::Graph(_) => "GraphError",
            Error::Frame(_) => "FrameError",
            Error::GridTooCoarse { .. } => "GridTooCoarseError",
            Error::Locus(_) => "LocusError",
            Error::Parse(_) => "ParseError",
            Error::Io(_) => "IoError",
        }
    }
}
