use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh needs at least 2 elements, got {0}")]
    MeshTooCoarse(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("point x = {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("mode index {index} is not valid for {bc} boundary conditions")]
    InvalidMode { index: usize, bc: &'static str },

    #[error("observation partition is incompatible with the mesh: {0}")]
    IncompatiblePartition(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("singular linear system (zero pivot at row {0})")]
    SingularMatrix(usize),

    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64, residuals: Vec<f64> },

    #[error("step {step} (t = {time}) failed: {source}")]
    StepFailed {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("meshes are not nested: {0}")]
    NonNestedMeshes(String),

    #[error("nonpositive value {value:e} where a positive one is required ({what})")]
    NonPositive { what: &'static str, value: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("expression error: {0}")]
    Expression(String),
}
