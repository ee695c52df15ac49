use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed reaction network: {0}")]
    Model(String),

    #[error("cannot parse reaction `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Total propensity vanished before the requested end time. `partial` holds
    /// the subsampled states recorded so far.
    #[error("absorbing state reached at t = {time} (trajectory {trajectory:?}, {} samples kept)", partial.len())]
    Absorbed {
        time: f64,
        trajectory: Option<usize>,
        partial: Vec<Vec<i64>>,
    },

    #[error("degenerate refinement region: species {axis} never changed during sampling")]
    DegenerateRegion { axis: usize },

    #[error("point {point:?} lies outside the computational domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("degenerate element {element} (signed volume {volume:e})")]
    DegenerateElement { element: usize, volume: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mesh invariant violated: {0}")]
    MeshInvariant(String),

    #[error("sparse LU factorization failed ({0}); try a larger shift")]
    Factorization(String),

    #[error("null-vector iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("null vector carries no positive mass after clipping")]
    NoPositiveMass,

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("densities are defined on different domains: {0}")]
    DomainMismatch(String),

    #[error("histogram received no samples")]
    EmptyHistogram,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Innermost error, skipping stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code: 2 configuration, 3 numerical failure, 4 resource cap.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Model(_) | Error::Parse { .. } | Error::Config(_) => 2,
            Error::ResourceCap(_) => 4,
            Error::Io(_) | Error::Json(_) => 1,
            _ => 3,
        }
    }
}

/// Attach a stage tag to the error side of a result.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
