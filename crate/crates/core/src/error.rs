use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("driven atom index {driven} is outside 1..={n_atoms}")]
    DrivenAtomOutOfRange { driven: usize, n_atoms: usize },

    #[error("atom spacing must be positive, got {0} wavelengths")]
    NonPositiveSpacing(f64),

    #[error("atom spacing {spacing} is below the supported minimum of {minimum} wavelengths")]
    SpacingBelowMinimum { spacing: f64, minimum: f64 },

    #[error("{0} atoms is outside the supported range 1..={max}", max = crate::config::MAX_ATOMS)]
    UnsupportedAtomCount(usize),

    #[error("Rabi frequency must be a finite non-negative multiple of gamma, got {0}")]
    InvalidRabiFrequency(f64),

    #[error("interatomic separation must be positive, got {0}")]
    NonPositiveSeparation(f64),

    #[error("atom index {index} is outside 1..={n_atoms}")]
    AtomIndexOutOfRange { index: usize, n_atoms: usize },

    #[error("steady state is not unique: generator kernel has dimension {dimension}")]
    DegenerateKernel { dimension: usize },

    #[error("steady-state residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error(
        "time integration unstable (trace drift {drift:e}); retry with a smaller step than {dt}"
    )]
    UnstableIntegration { drift: f64, dt: f64 },

    #[error("invalid time integration parameters: t_final = {t_final}, dt = {dt}")]
    InvalidTimeStep { t_final: f64, dt: f64 },

    #[error("correlation sum has imaginary residual {value:e}")]
    ImaginaryResidual { value: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("angular grid needs at least {minimum} points, got {points}")]
    GridTooCoarse { points: usize, minimum: usize },

    #[error("{0}")]
    Io(String),

    #[error("invalid configuration file: {0}")]
    Config(String),

    #[error("state check failed: {0}")]
    InvariantViolated(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
