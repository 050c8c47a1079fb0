use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("singular system at {context} (pivot {pivot:e})")]
    Singular { context: String, pivot: f64 },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("base-state floor violated: min modulus {min:e} < floor {floor:e} in {component}")]
    Floor {
        component: String,
        min: f64,
        floor: f64,
    },
    #[error("smallness condition violated: {0}")]
    Smallness(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Shape(_) => 2,
            Error::Verification(_) | Error::Smallness(_) => 4,
            _ => 3,
        }
    }
}
