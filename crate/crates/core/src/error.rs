use thiserror::Error;

/// Errors raised by the CSA library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degree distribution is empty")]
    EmptyVector,
    #[error("degree distribution must cover at least degrees 0 and 1 (got length {0})")]
    MaxDegreeTooSmall(usize),
    #[error("negative or non-finite probability {value} at degree {degree}")]
    NegativeEntry { degree: usize, value: f64 },
    #[error("probability {value} at degree {degree} exceeds 1")]
    EntryAboveOne { degree: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    SumNotOne(f64),
    #[error("value {0} outside [0, 1]")]
    DomainError(f64),
    #[error("distribution has zero mean degree")]
    ZeroMeanDegree,
    #[error("frame has {n} slots but degree {q} requires at least {q}")]
    SlotCountTooSmall { n: usize, q: usize },
    #[error("{m} users cannot host a structure with {needed} users")]
    TooFewUsers { m: usize, needed: usize },
    #[error("density evolution does not model degree-0/1 users (mass {0})")]
    DegreeOneUnsupported(f64),
    #[error("enumeration of {0} assignments exceeds the limit")]
    EnumerationTooLarge(u128),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
