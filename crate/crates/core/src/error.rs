use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("duplicate record for line `{line}` and treatment `{treatment}`")]
    DuplicateRecord { line: String, treatment: String },
    #[error("dataset failed validation: {0}")]
    Validation(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("insufficient follow-up: no measurement after day {threshold}")]
    InsufficientFollowUp { threshold: f64 },
    #[error("empty feature set")]
    EmptyFeatureSet,
    #[error("fewer than 2 treatments remain ({remaining})")]
    TooFewTreatments { remaining: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate response vector for treatment `{treatment}`")]
    DegenerateResponse { treatment: String },
    #[error("no complete lines available")]
    NoCompleteLines,
    #[error("degenerate weights: all rewards are zero")]
    DegenerateWeights,
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("unfittable node {node}: {reason}")]
    UnfittableNode { node: usize, reason: String },
    #[error("{what} = {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },
    #[error("requested L_sup = {requested} but only {available} genes are ranked")]
    NotEnoughGenes { requested: usize, available: usize },
    #[error("no concordant mice")]
    NoConcordantMice,
    #[error("sub-rules do not share a common grouping")]
    IncompatibleGroupings,
    #[error("treatment group is not part of the rule's grouping")]
    UnknownGroup,
    #[error("all grid points failed: {}", .0.join("; "))]
    AllGridPointsFailed(Vec<String>),
}
