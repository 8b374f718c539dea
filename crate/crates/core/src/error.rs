use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("malformed bracket at byte {offset}: {reason}")]
    MalformedBracket { offset: usize, reason: String },
    #[error("bracket leaves must be consecutive indices, found {0}")]
    NonConsecutiveSeq(String),
    #[error("path does not address a subbracket")]
    NotASubbracket,
    #[error("a bracket of length one has no factorization")]
    LengthOne,
    #[error("expression parse error at byte {offset}: {reason}")]
    ExprParse { offset: usize, reason: String },
    #[error("expression not evaluable: {0}")]
    EvalDomain(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("field bound to X{index} is C^{declared} but C^{required} is required")]
    InsufficientSmoothness {
        index: u32,
        required: u32,
        declared: u32,
    },
    #[error("X{0} has no field assigned")]
    UnassignedVariable(u32),
    #[error("control value outside the cone: {0}")]
    ConeViolation(String),
    #[error("space-time speed w0+|w| degenerates (min {0:e})")]
    DegenerateSpeed(f64),
    #[error("state norm exceeded the blow-up bound at s = {0}")]
    BlowUp(f64),
    #[error("variation window does not fit: {0}")]
    EpsilonTooLarge(String),
    #[error("leaf X{leaf} is bound to g{field}, outside the first {m1} fields")]
    IndexOutOfC1 { leaf: u32, field: usize, m1: usize },
    #[error("variation windows overlap or are out of order at entry {0}")]
    OverlappingWindows(usize),
    #[error("epsilon ladder is degenerate: {0}")]
    DegenerateLadder(String),
    #[error("multiplier grid does not match the trajectory: {0}")]
    GridMismatch(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid control: {0}")]
    InvalidControl(String),
}
