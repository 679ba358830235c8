use thiserror::Error;

/// Which length went non-positive in a rack-overdraw failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthKind {
    Sideline,
    Segment,
}

impl std::fmt::Display for LengthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LengthKind::Sideline => f.write_str("sideline"),
            LengthKind::Segment => f.write_str("segment"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A rack was driven so far that a sideline or centerline length is no longer positive.
    /// `index` is 1-based, matching the motor/segment numbering.
    #[error("rack overdraw: {kind} {index} has length {length:e} m")]
    RackOverdraw {
        kind: LengthKind,
        index: usize,
        length: f64,
    },

    #[error(
        "length budget violated: segment lengths sum to {sum} m, robot length is {expected} m"
    )]
    LengthBudget { sum: f64, expected: f64 },

    #[error("period mismatch: robot length {robot_length} m differs from serpenoid period 4l = {period} m")]
    PeriodMismatch { robot_length: f64, period: f64 },

    #[error("at t = {t} s: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("hold invariance violated at t = {t} s: segment {segment} drifted {drift:e} rad")]
    HoldDrift { t: f64, segment: usize, drift: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn at_time(self, t: f64) -> Self {
        Error::AtTime {
            t,
            source: Box::new(self),
        }
    }

    /// True for failures of the numbers themselves (overdraw, drift) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Invalid(_) | Error::LengthBudget { .. } | Error::PeriodMismatch { .. } => false,
            Error::RackOverdraw { .. } | Error::HoldDrift { .. } => true,
            Error::AtTime { source, .. } => source.is_numerical(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
