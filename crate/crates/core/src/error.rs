use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no features")]
    NoFeatures,
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("invalid label space: {0}")]
    LabelSpace(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("feature width mismatch: model expects {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("classifier lacks the `{0}` capability")]
    MissingCapability(&'static str),
    #[error("BADGE-style gradients are single-label only")]
    SingleLabelOnly,
    #[error("strategy `{0}` does not support multi-label data")]
    MultiLabelUnsupported(String),
    #[error("batch size {k} exceeds {available} candidates")]
    BatchTooLarge { k: usize, available: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no labeled examples")]
    NoLabeled,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("pending batch")]
    PendingBatch,
    #[error("no pending batch")]
    NoPendingBatch,
    #[error("pool exhausted")]
    PoolExhausted,
    #[error("label map does not match pending batch (missing {missing:?}, extra {extra:?})")]
    BatchMismatch { missing: Vec<usize>, extra: Vec<usize> },
    #[error("empty seed set")]
    EmptySeedSet,
    #[error("index {0} is not in the unlabeled pool")]
    NotUnlabeled(usize),
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("corrupt session: field `{field}`: {message}")]
    CorruptSession { field: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
