use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coupling a = {0} is not admissible: the operator is only positive for a > -1/4")]
    CouplingOutOfRange(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field has {got} samples but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("the zero field has no Gagliardo-Nirenberg quotient")]
    ZeroField,

    #[error("no shooting bracket found for c in [{lo:e}, {hi:e}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("ground state tail is unreliable: {0}")]
    UnreliableTail(String),

    #[error("gradient ascent stalled: J failed to increase over {0} consecutive steps")]
    NonMonotone(usize),

    #[error("negative eigenvalue {value:e} (index {index}) beyond tolerance; refine the grid")]
    NegativeEigenvalue { index: usize, value: f64 },

    #[error("tridiagonal solve hit a zero pivot at row {0}")]
    SingularPivot(usize),

    #[error("rescaled support does not fit on the grid (lost fraction {0:e})")]
    SupportOverflow(f64),

    #[error("scattering probe inapplicable: {0}")]
    ProbeInapplicable(String),

    #[error("malformed field data at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
