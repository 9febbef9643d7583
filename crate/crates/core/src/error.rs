use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Operation-level failures that a run can report without the inputs being
/// malformed. The CLI maps these to exit code 2.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Diagnostic {
    #[error("write of {bit} failed: nodes not within 5% of rails {deadline_ps} ps after pulse start (Y={y:.4} V, YB={yb:.4} V)")]
    WriteFailure {
        bit: u8,
        deadline_ps: f64,
        y: f64,
        yb: f64,
    },
    #[error("write power {write_w:e} W does not exceed bias power {bias_w:e} W")]
    WriteUnderpowered { write_w: f64, bias_w: f64 },
    #[error("indeterminate read: Z = {p_z_w:e} W within guard band around threshold {threshold_w:e} W")]
    IndeterminateRead { p_z_w: f64, threshold_w: f64 },
    #[error("stability violation during hold: {reason}")]
    StabilityViolation { reason: String },
    #[error("threshold calibration failed: contrast {contrast:.2} < {required}")]
    CalibrationFailure { contrast: f64, required: f64 },
    #[error("indeterminate channels {channels:?} in column {column}")]
    IndeterminateChannels { column: usize, channels: Vec<usize> },
    #[error("popcount ambiguous: {units:.3} unit steps is more than 0.4 from an integer")]
    PopcountAmbiguity { units: f64 },
    #[error("array result {got} in column {column} differs from expected {expected}")]
    OracleMismatch {
        column: usize,
        expected: String,
        got: String,
    },
    #[error("latch did not converge within {limit_ns} ns (final Y={y:.4} V, YB={yb:.4} V from start {start:?})")]
    NonConvergence {
        limit_ns: f64,
        start: (f64, f64),
        y: f64,
        yb: f64,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("optical topology error: {0}")]
    Topology(String),
    #[error("unknown probe `{name}`; available: {}", .available.join(", "))]
    UnknownProbe { name: String, available: Vec<String> },
    #[error("capacity exceeded: {requested} channels requested but one FSR holds at most {max}")]
    Capacity { requested: usize, max: usize },
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error(transparent)]
    Diagnostic(#[from] Diagnostic),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }

    pub fn diagnostic(&self) -> Option<&Diagnostic> {
        match self {
            Error::Diagnostic(d) => Some(d),
            _ => None,
        }
    }
}
