use thiserror::Error;

/// Errors raised by the simulation and analysis layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state is not normalized: |a|^2 + |b|^2 = {0}")]
    NotNormalized(f64),

    #[error("`{name}` = {value} is out of range ({expected})")]
    OutOfRange {
        name: String,
        value: f64,
        expected: &'static str,
    },

    #[error("gain is zero, QBER is undefined")]
    ZeroGain,

    #[error("LFSR register must not be all zeros")]
    ZeroLfsrState,

    #[error("record sequences differ in length: {alice} transmitter vs {bob} receiver")]
    LengthMismatch { alice: usize, bob: usize },

    #[error("sifted batch is empty")]
    EmptyBatch,

    #[error("degenerate intensity schedule: signal {u} and decoy {v} must satisfy u > v > 0")]
    DegenerateSchedule { u: f64, v: f64 },

    #[error("missing statistic: {0}")]
    MissingStatistic(&'static str),

    #[error("statistics invariant violated: {0}")]
    Statistics(String),

    #[error("insufficient counts for tomography cell {cell}: {count} detections, need {required}")]
    InsufficientCounts {
        cell: String,
        count: u64,
        required: u64,
    },

    #[error("CDMA scheme requires `{0}`")]
    MissingCdmaParameter(&'static str),

    #[error("invalid scheme parameters: {0}")]
    InvalidScheme(String),

    #[error("invalid session: {0}")]
    InvalidSession(String),

    #[error("pulse log: {0}")]
    PulseLog(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(
    name: &str,
    value: f64,
    ok: bool,
    expected: &'static str,
) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: name.to_string(),
            value,
            expected,
        })
    }
}
