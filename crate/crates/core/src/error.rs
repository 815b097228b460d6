use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coefficient bit-size {bits} exceeds budget {cap}")]
    CoefficientOverflowBudget { bits: u64, cap: u64 },
    #[error("constant map rejected")]
    ConstantMap,
    #[error("map is not a polynomial")]
    NotAPolynomial,
    #[error("normalization needs the radical ({root})-th root of {value}")]
    NeedsRadical { root: u32, value: String },
    #[error("polynomial is not monic and centered")]
    NotCentered,
    #[error("exceptional input: {0}")]
    ExceptionalInput(String),
    #[error("rotation index {index} is not a symmetry of order {order}")]
    NotASymmetry { index: i64, order: u64 },
    #[error("hypothesis fails: {0}")]
    HypothesisFail(String),
    #[error("family is not admissible: {0}")]
    NotAdmissible(String),
    #[error("truncation window too small: need {needed}, have {have}")]
    WindowTooSmall { needed: usize, have: usize },
    #[error("root finding stalled after {iterations} iterations (residual {residual:e})")]
    RootFindingStalled { iterations: usize, residual: f64 },
    #[error("start point is totally invariant; the sample would collapse to an atom")]
    AtomicTrap,
    #[error("interval radius {radius:e} exceeds matching precision {precision:e}")]
    IntervalBlowup { radius: f64, precision: f64 },
    #[error("derivative vanishes at {0}")]
    DerivativeVanishes(String),
    #[error("rotation twist cannot be carried through this operation")]
    NotRepresentable,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
