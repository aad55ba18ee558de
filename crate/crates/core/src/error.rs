use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("answer at position {0} is empty after trimming")]
    EmptyAnswer(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("all weights are zero")]
    ZeroMass,
    #[error("probabilities sum to {sum}, expected 1")]
    SumViolation { sum: f64 },
    #[error("value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("interval at index {index} is inverted: lower {lower} > upper {upper}")]
    InvertedInterval { index: usize, lower: f64, upper: f64 },
    #[error("credal set has no members")]
    EmptyCredal,
    #[error("member tags ({tags}) do not match member count ({members})")]
    TagCountMismatch { members: usize, tags: usize },
    #[error("inputs are defined over different candidate sets")]
    CandidateSetMismatch,
    #[error("all possibility scores are zero")]
    AllZero,
    #[error("input is empty")]
    EmptyInput,
    #[error("lower probabilities sum to {sum}, which exceeds 1")]
    LowerSumExceedsOne { sum: f64 },
    #[error("candidate set of size {size} exceeds the exact enumeration cap {cap}")]
    CandidateSetTooLarge { size: usize, cap: usize },
    #[error("reference distribution has mass on index {0} where the estimate is zero")]
    SupportMismatch(usize),
    #[error("score {0} is negative")]
    NegativeScore(f64),
    #[error("decision weights sum to {sum}, expected 1")]
    WeightSumViolation { sum: f64 },
    #[error("reference answer {0:?} is not in the truth set")]
    ReferenceNotInTruthSet(String),
    #[error("input contains characters outside A-Z: {0:?}")]
    NonAlphabetInput(String),
    #[error("cannot shift an empty string")]
    EmptyString,
    #[error("cannot draw {needed} distinct words of length {word_length}")]
    VocabularyExhausted { needed: usize, word_length: usize },
    #[error("enumerating {variants} case variants exceeds the limit {limit}")]
    EnumerationTooLarge { variants: u128, limit: u128 },
    #[error("every example carries the same label")]
    DegenerateLabels,
    #[error("all reference values are tied")]
    AllRefsTied,
    #[error("need at least {needed} items, got {got}")]
    TooFewItems { needed: usize, got: usize },
    #[error("no price configured for endpoint {0:?}")]
    UnknownEndpoint(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
