use thiserror::Error;

/// Errors raised by mesh handling, assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("mesh file line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("boundary node {node} has {count} adjacent boundary edges (expected 2)")]
    NonManifoldBoundary { node: usize, count: usize },

    #[error("incompatible frames at node {node}: {message}")]
    IncompatibleFrames { node: usize, message: String },

    #[error("incompatible flux: net boundary flux {flux:e} with no outlet for it")]
    IncompatibleFlux { flux: f64 },

    #[error("invalid patch data: {0}")]
    InvalidPatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular matrix: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("coercivity failure: alpha = {alpha:e}")]
    NotCoercive { alpha: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
