use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report.
///
/// Variant names double as stable identifiers in benchmark reports
/// (see [`Error::id`]), so renaming one changes report output.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class {0} has no samples")]
    MissingClass(usize),
    #[error("class {0} has no samples to resample from")]
    EmptyClass(usize),
    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("class {class} has {count} samples, need at least {needed}")]
    TooFewSamples { class: usize, count: usize, needed: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("shape mismatch: expected {expected} columns, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("fraction {0} outside (0, 1)")]
    FractionOutOfRange(f64),
    #[error("mean is zero")]
    ZeroMean,
    #[error("every feature has zero within-class variance")]
    AllDegenerate,
    #[error("k = {k} exceeds the {available} eligible points")]
    KTooLarge { k: usize, available: usize },
    #[error("loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("non-finite probability")]
    NonFiniteProb,
    #[error("single class labels")]
    SingleClassLabels,
    #[error("labels contain only one class")]
    SingleClass,
    #[error("class {class} has {count} samples, need more than k = {k}")]
    TooFewMinority { class: usize, count: usize, k: usize },
    #[error("no minority sample has a neighbour from another class")]
    NoBoundarySamples,
    #[error("target {target} exceeds the {count} samples of class {class}")]
    TargetExceedsCount { class: usize, target: usize, count: usize },
    #[error("unknown class {0}")]
    UnknownClass(usize),
    #[error("every boosting round was rejected")]
    AllRoundsRejected,
    #[error("both costs are zero")]
    ZeroCosts,
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("could not reach FDR {target} (reachable range {low}..{high})")]
    CalibrationFailed { target: f64, low: f64, high: f64 },
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("no rows left after cleaning ({dropped} dropped)")]
    EmptyAfterCleaning { dropped: usize },
    #[error("label {0:?} has no mapping")]
    UnmappableLabel(String),
    #[error("unknown technique {0:?}")]
    UnknownTechnique(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("csv error: {0}")]
    Csv(String),
}

impl Error {
    /// Short identifier used in report status cells, e.g. `NoBoundarySamples`.
    pub fn id(&self) -> &'static str {
        match self {
            Error::InvalidDataset(_) => "InvalidDataset",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::EmptyDataset => "EmptyDataset",
            Error::MissingClass(_) => "MissingClass",
            Error::EmptyClass(_) => "EmptyClass",
            Error::TooFewClasses(_) => "TooFewClasses",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::FractionOutOfRange(_) => "FractionOutOfRange",
            Error::ZeroMean => "ZeroMean",
            Error::AllDegenerate => "AllDegenerate",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::DivergedLoss { .. } => "DivergedLoss",
            Error::NonFiniteProb => "NonFiniteProb",
            Error::SingleClassLabels => "SingleClassLabels",
            Error::SingleClass => "SingleClass",
            Error::TooFewMinority { .. } => "TooFewMinority",
            Error::NoBoundarySamples => "NoBoundarySamples",
            Error::TargetExceedsCount { .. } => "TargetExceedsCount",
            Error::UnknownClass(_) => "UnknownClass",
            Error::AllRoundsRejected => "AllRoundsRejected",
            Error::ZeroCosts => "ZeroCosts",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::CalibrationFailed { .. } => "CalibrationFailed",
            Error::MissingColumn(_) => "MissingColumn",
            Error::EmptyAfterCleaning { .. } => "EmptyAfterCleaning",
            Error::UnmappableLabel(_) => "UnmappableLabel",
            Error::UnknownTechnique(_) => "UnknownTechnique",
            Error::Config(_) => "Config",
            Error::Io(_) => "IoError",
            Error::Csv(_) => "CsvError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            return Error::Io(e.to_string());
        }
        Error::Csv(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
