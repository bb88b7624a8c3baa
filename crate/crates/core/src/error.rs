use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Hypothesis,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precision exhausted at continued-fraction step {k}")]
    PrecisionExhausted { k: usize },
    #[error("leading coefficient |V_d| = {modulus:e} is numerically zero")]
    DegenerateLeadingCoefficient { modulus: f64 },
    #[error("factor at step {step} is numerically singular (condition {condition:e})")]
    SingularInverse { step: i64, condition: f64 },
    #[error("cocycle is not subcritical: L_0 = {l0}")]
    NotSubcritical { l0: f64 },
    #[error("section is near singular (condition {condition:e})")]
    NearSingular { condition: f64 },
    #[error("determinant vanished at grid point {index} even after perturbation")]
    ZeroHit { index: usize },
    #[error("index {index} out of range [{lo}, {hi}]")]
    IndexOutOfRange { index: i64, lo: i64, hi: i64 },
    #[error("no eigenvalue within {tolerance:e} of {target} (nearest {nearest})")]
    NoEigenvalueWithin { target: f64, nearest: f64, tolerance: f64 },
    #[error("vector vanishes on the strip: floor {floor:e}")]
    VectorVanishes { floor: f64 },
    #[error("resonant small divisors at modes {modes:?}")]
    ResonantDivisor { modes: Vec<i64> },
    #[error("determinant vanishes on the strip: floor {floor:e}")]
    DeterminantVanishes { floor: f64 },
    #[error("no dual phase found for E = {energy}")]
    NoDualPhase { energy: f64 },
    #[error("scale {scale}: {source}")]
    AtScale {
        scale: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_) | Error::IndexOutOfRange { .. } => ErrorClass::Config,
            Error::NotSubcritical { .. } | Error::VectorVanishes { .. } => ErrorClass::Hypothesis,
            Error::AtScale { source, .. } => source.class(),
            _ => ErrorClass::Numeric,
        }
    }

    pub fn at_scale(self, scale: usize) -> Error {
        Error::AtScale { scale, source: Box::new(self) }
    }
}
