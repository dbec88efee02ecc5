use thiserror::Error;

/// Errors raised by simulation, codec, regulator and configuration code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("interval {span} is not an integer multiple of step {step}")]
    StepMisaligned { span: f64, step: f64 },

    #[error("schedules {first} and {second} jump together at t = {t} without a declared order")]
    ScheduleConflict { t: f64, first: usize, second: usize },

    #[error("state norm {norm:.3e} exceeded divergence ceiling {ceiling:.3e} at t = {t}")]
    Diverged { t: f64, norm: f64, ceiling: f64 },

    #[error("{bits} bits cannot carry {r} components with at least 2 levels each")]
    BudgetTooSmall { bits: u32, r: usize },

    #[error("frame for sample {frame} delivered to decoder at sample {decoder}")]
    FrameIndexMismatch { frame: u64, decoder: u64 },

    #[error("malformed frame: {0}")]
    MalformedFrame(String),

    #[error("coefficients {0:?} do not form a Hurwitz polynomial")]
    NotHurwitz(Vec<f64>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors that indicate a numerically diverging run.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::NonFiniteState { .. } | Error::Diverged { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
