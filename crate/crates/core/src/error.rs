use thiserror::Error;

/// Errors raised by the simulator modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite random draw at index {0}")]
    NonFiniteDraw(usize),

    #[error("subharmonic level {level} exceeds configured maximum {max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("separation {0} m is not a positive multiple of the pixel pitch below L/2")]
    BadSeparation(f64),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("mode {label} loses {lost_fraction:.4} of its energy outside the raster")]
    Clipping { label: String, lost_fraction: f64 },

    #[error("column {0} has zero norm on the blank screen")]
    ZeroColumn(usize),

    #[error("PRBS state must be a nonzero 15-bit value, got {0:#x}")]
    BadPrbsState(u16),

    #[error("channels {0} and {1} share the same delay and tributary")]
    DuplicateChannel(usize, usize),

    #[error("training block is rank deficient (reciprocal condition {rcond:.3e}, {rows} known symbols for {cols} channels)")]
    RankDeficient { rcond: f64, rows: usize, cols: usize },

    #[error("equalizer diverged at symbol {at}: output power {output:.3e} vs input {input:.3e}")]
    Diverged { at: usize, output: f64, input: f64 },

    #[error("sequences are misaligned: {0}")]
    Misaligned(String),

    #[error("non-positive received power {0} in scintillation statistics")]
    NonPositivePower(f64),

    #[error("bad screen file: {0}")]
    BadScreenFile(String),

    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("config serialization error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
