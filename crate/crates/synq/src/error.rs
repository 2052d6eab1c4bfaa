//! Error types shared across the crate.

use thiserror::Error;

/// A single violated model assumption found during validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A vector field does not have length `n`.
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    /// A parameter is NaN or infinite.
    NonFiniteParameter(String),
    /// Poisson intensity must be strictly positive.
    InvalidRate { component: usize, rate: f64 },
    /// A law parameter is outside its admissible range.
    InvalidLawParameter { component: usize, detail: String },
    /// A jump law places mass on a negative coordinate.
    NotSpectrallyOneSided { component: usize, coordinate: usize },
    /// A jump law has no nonzero coordinate at all.
    EmptyJumpLaw { component: usize },
    /// Coordinate 1 is nondecreasing (sigma = 0 and c_1 >= 0).
    SubordinatorFirstCoordinate,
    /// A subordinator coordinate has negative drift.
    NegativeSubordinatorDrift { coordinate: usize },
    /// Coordinate `i` is identically zero (no drift, no jump mass).
    ZeroSubordinator { coordinate: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected length {expected}, found {found}"),
            Violation::NonFiniteParameter(what) => write!(f, "non-finite parameter: {what}"),
            Violation::InvalidRate { component, rate } => {
                write!(f, "component {component}: rate {rate} must be > 0")
            }
            Violation::InvalidLawParameter { component, detail } => {
                write!(f, "component {component}: {detail}")
            }
            Violation::NotSpectrallyOneSided {
                component,
                coordinate,
            } => write!(
                f,
                "component {component}: jump coordinate {coordinate} can be negative"
            ),
            Violation::EmptyJumpLaw { component } => {
                write!(f, "component {component}: jump law is identically zero")
            }
            Violation::SubordinatorFirstCoordinate => write!(
                f,
                "coordinate 1 is a subordinator (needs sigma > 0 or c_1 < 0)"
            ),
            Violation::NegativeSubordinatorDrift { coordinate } => {
                write!(f, "coordinate {coordinate}: subordinator drift must be >= 0")
            }
            Violation::ZeroSubordinator { coordinate } => {
                write!(f, "coordinate {coordinate} is identically zero")
            }
        }
    }
}

/// Validation failure listing every violated assumption.
#[derive(Debug, Clone, Error)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} violated assumption(s): ", self.violations.len())?;
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(#[from] ValidationError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("evaluation within {threshold:e} of a pole at {location}")]
    NearPole { location: String, threshold: f64 },
    #[error("bracketing exceeded {doublings} doublings (unstable or invalid model?)")]
    BracketOverflow { doublings: u32 },
    #[error("model is unstable: E Y_n(1) = {mean_yn} >= 0")]
    Unstable { mean_yn: f64 },
    #[error("subordinator exponent has no finite mean")]
    InfiniteMean,
    #[error("infinite moment: {0}")]
    InfiniteMoment(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("model file: {0}")]
    ModelFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
