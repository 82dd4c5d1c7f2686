use thiserror::Error;

use crate::model::BeamState;
use crate::scalar::Scalar;

/// Library-wide error type.
#[derive(Error, Debug)]
pub enum Error<T: Scalar> {
    #[error("fields are defined on different bases ({left} vs {right} modes)")]
    BasisMismatch { left: usize, right: usize },

    #[error("{what} is not finite (range error)")]
    RangeError { what: &'static str },

    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    #[error("sample point {x} lies outside [0, 1]")]
    PointOutsideDomain { x: T },

    #[error("operation requires time-independent forcing")]
    TimeDependentForcing,

    #[error("frozen-coefficient problem is singular on mode {mode} (s = {s})")]
    Pole { mode: usize, s: T },

    #[error("blow-up at t = {time}: coefficient on mode {mode} exceeded threshold")]
    BlowUp {
        time: T,
        mode: usize,
        last_state: Box<BeamState<T>>,
        /// Partial trajectory recorded before the failure, when available.
        partial: Option<Box<crate::integrator::TrajectoryRecord<T>>>,
    },

    #[error("initial states coincide: zero separation is rejected")]
    ZeroSeparation,

    #[error("time series too short after truncation ({len} usable samples)")]
    SeriesTooShort { len: usize },

    #[error("series are defined on different time grids")]
    GridMismatch,

    #[error("window {window} exceeds the recorded trajectory span {span}")]
    WindowTooLarge { window: T, span: T },

    #[error("trajectory record is too sparse: {what}")]
    RecordTooSparse { what: &'static str },
}

pub type Result<T, S> = std::result::Result<T, Error<S>>;
