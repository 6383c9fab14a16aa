use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("chain is not irreducible: {0}")]
    NotIrreducible(String),
    #[error("detailed balance violated on edge ({x}, {y}): relative error {rel:e}")]
    NotReversible { x: String, y: String, rel: f64 },
    #[error("negative or non-finite rate on edge ({0}, {1})")]
    NegativeRate(String, String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty set: {0}")]
    EmptySet(String),
    #[error("iteration did not converge: {0}")]
    ConvergenceFailure(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("all killing rates vanish")]
    DegenerateKilling,
    #[error("R\\S is empty")]
    EmptyInterior,
    #[error("epsilon* = {0} is not below 1")]
    EpsilonTooLarge(f64),
    #[error("infinite kappa and lambda both act on state {0}")]
    ConstraintConflict(String),
    #[error("not a unit flow: max violation {0:e}")]
    NotAUnitFlow(f64),
    #[error("flow on edge with zero conductance: {0}")]
    FlowOnZeroEdge(String),
    #[error("not a cover: {0}")]
    NotACover(String),
    #[error("window [{t}, {t} + {theta}] outside [0, {total}]")]
    WindowOutOfRange { t: f64, theta: f64, total: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("infeasible configuration: {0}")]
    ConfigInfeasible(String),
    #[error("bad potential: {0}")]
    BadPotential(String),
    #[error("too large for exact mode: {0}")]
    TooLargeForExact(String),
    #[error("operation needs an explicit chain; implicit dynamics only support simulation")]
    ImplicitOnly,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
