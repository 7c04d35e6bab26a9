use thiserror::Error;

use crate::discretize::{Codebook, LloydMaxReport};
use crate::meanshift::ModeSet;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series contains a non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("series is empty")]
    EmptySeries,

    #[error("series of length {len} is too short (need at least {min})")]
    TooShort { len: usize, min: usize },

    #[error("series is constant (zero standard deviation)")]
    ConstantSeries,

    #[error("length {len} is not divisible into {segments} equal segments")]
    IndivisibleLength { len: usize, segments: usize },

    #[error("{what} = {value} is outside its admissible range")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("scale parameter must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("alphabet size {0} is too small (need at least 2)")]
    AlphabetTooSmall(usize),

    #[error("alphabet size {0} is too large")]
    AlphabetTooLarge(usize),

    #[error("need at least {needed} distinct sample values, found {found}")]
    InsufficientDistinctValues { needed: usize, found: usize },

    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),

    #[error("quantization cell {cell} has no probability mass")]
    EmptyCell { cell: usize },

    #[error("Lloyd-Max did not converge after {} iterations", .report.iterations)]
    LloydMaxNoConvergence {
        codebook: Box<Codebook>,
        report: LloydMaxReport,
    },

    #[error("mean-shift trajectory did not converge within {max_iter} iterations")]
    MeanShiftNoConvergence { partial: ModeSet, max_iter: usize },

    #[error("no samples inside the kernel support")]
    EmptyNeighborhood,

    #[error("symbol {symbol} out of range for alphabet of size {kappa}")]
    SymbolOutOfRange { symbol: u32, kappa: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("symbolic sequences were produced by different codebooks")]
    CodebookMismatch,

    #[error("distance between the two series is zero")]
    ZeroDistance,

    #[error("training set is empty")]
    EmptyTraining,

    #[error("samples are not normalized (mean {mean}, variance {variance})")]
    NotNormalized { mean: f64, variance: f64 },

    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("window length mismatch: {left} vs {right}")]
    WindowLengthMismatch { left: usize, right: usize },

    #[error("stream of length {len} is shorter than the window length {window}")]
    StreamTooShort { len: usize, window: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("grid cell infeasible: {0}")]
    GridInfeasible(String),

    #[error("label set has no positive windows")]
    NoPositives,

    #[error("label set has no negative windows")]
    NoNegatives,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("file is empty")]
    EmptyFile,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
