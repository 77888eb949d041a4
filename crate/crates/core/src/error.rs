use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("support violation at component {index}: f has mass where g vanishes")]
    SupportViolation { index: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("negative entry at index {index}")]
    NegativeEntry { index: usize },

    #[error("distribution for input index {input} sums to {sum}, expected 1")]
    Normalization { input: usize, sum: String },

    #[error("dense table would need {entries} entries, above the cap of {cap}")]
    SizeCap { entries: u128, cap: u128 },

    #[error(
        "box is not CHSH symmetric: entries {first} and {second} share a win count but differ"
    )]
    NotChshSymmetric { first: usize, second: usize },

    #[error("threshold premise fails at k = {k} ({kind})")]
    ThresholdPremise { k: usize, kind: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{patterns} sign/input patterns exceed the cap of {cap}; reduce the alphabets")]
    PatternCap { patterns: u128, cap: u64 },

    #[error("linear program is {0}")]
    Lp(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
