use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("box min exceeds max")]
    InvertedBox,
    #[error("zero-length direction")]
    ZeroDirection,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("point is behind the camera (depth {depth})")]
    PointBehindCamera { depth: f64 },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    ConfigInvalid(String),
    #[error("no valid viewpoint after {attempts} attempts")]
    NoValidViewpoint { attempts: usize },
    #[error("no object qualifies as a pointing target")]
    NoEligibleTarget,
    #[error("target {0} is outside the reachable pointing envelope")]
    UnreachableTarget(String),
    #[error("unknown object id {0}")]
    UnknownObject(String),
    #[error("invalid gesture: {0}")]
    InvalidGesture(String),
    #[error("could not produce an accepted clip after {attempts} attempts")]
    AttemptsExhausted { attempts: usize },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResolveError {
    #[error("index-finger keypoints 5 and 8 are coincident")]
    DegeneratePose,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QaError {
    #[error("{category} question infeasible: {reason}")]
    CategoryInfeasible { category: String, reason: String },
    #[error("only {found} distinct distractors available, 4 required")]
    InsufficientDistractors { found: usize },
    #[error("rephraser unavailable: {0}")]
    RephraserUnavailable(String),
    #[error("rephrased question failed validation: {0:?}")]
    ValidationFailed(Vec<String>),
    #[error("structured question has no <objectN> placeholder")]
    MissingPlaceholder,
    #[error("unknown object id {0}")]
    UnknownObject(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("confidence {confidence} below gate threshold {tau}; no hand token")]
    GateClosed { confidence: f64, tau: f64 },
    #[error("{visual} visual blocks but {hand} hand tokens")]
    LengthMismatch { visual: usize, hand: usize },
    #[error("model width {model} does not match embedding width {found}")]
    WidthMismatch { model: usize, found: usize },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("empty dataset")]
    EmptyDataset,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("prediction references unknown qa_id {0}")]
    UnknownQaId(String),
    #[error("answerer requested masked input: {0}")]
    FlagViolation(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("answerer failed: {0}")]
    Answerer(String),
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl JsonlError {
    pub fn line(&self) -> Option<usize> {
        match self {
            JsonlError::Parse { line, .. } => Some(*line),
            JsonlError::Io { .. } => None,
        }
    }
}
