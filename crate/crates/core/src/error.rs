use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid switching angles: {0}")]
    InvalidAngles(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("harmonic rank {0} is not an odd positive integer")]
    InvalidRank(u32),

    #[error("spectrum has a zero fundamental")]
    ZeroFundamental,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular Jacobian (pivot {pivot:e}) at theta = {iterate:?}")]
    SingularJacobian { pivot: f64, iterate: Vec<f64> },

    #[error("harmonic {n_max} aliases with {samples} samples per period (need n_max < samples/4)")]
    Aliasing { n_max: u32, samples: usize },

    #[error(
        "dead time {dead_time:e} s does not fit the interval {start_deg:.4}°..{end_deg:.4}° ({duration:e} s)"
    )]
    DeadTimeTooLarge {
        dead_time: f64,
        start_deg: f64,
        end_deg: f64,
        duration: f64,
    },

    #[error("timer tick too coarse: {0}")]
    TickTooCoarse(String),
}
