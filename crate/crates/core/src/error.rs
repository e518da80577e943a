use std::fmt;

use thiserror::Error;

/// Names of the six coefficient fields of a pseudo-linear system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    P,
    Q,
    R,
    S,
    F,
    G,
}

impl Label {
    pub const ALL: [Label; 6] = [Label::P, Label::Q, Label::R, Label::S, Label::F, Label::G];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::P => "P",
            Label::Q => "Q",
            Label::R => "R",
            Label::S => "S",
            Label::F => "F",
            Label::G => "G",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coefficient {label} is not finite at t={t}, u={u}, v={v}")]
    NonFiniteCoefficient { label: Label, t: f64, u: f64, v: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown corpus entry `{0}`")]
    UnknownEntry(String),

    #[error("invalid parameter {name}={value}: {reason}")]
    InvalidParam { name: String, value: f64, reason: String },

    #[error("parameter case not covered by the closed form: {0}")]
    UnsupportedParameterCase(String),

    #[error("time {t} is outside [{t0}, {t_end}]")]
    OutOfRange { t: f64, t0: f64, t_end: f64 },

    #[error("quadrature error estimate {estimate:e} exceeds cap {cap:e}")]
    GridTooCoarse { estimate: f64, cap: f64 },

    #[error("exponential weight spans more than 700 log units near t={t}")]
    OverflowGuard { t: f64 },

    #[error("riccati initial value {init} does not match the trajectory ratio {expected}")]
    InitMismatch { init: f64, expected: f64 },

    #[error("gamma={gamma} is outside [{lo}, {hi}]")]
    GammaOutOfRange { gamma: f64, lo: f64, hi: f64 },

    #[error("system is not homogeneous (F or G is not identically zero)")]
    NotHomogeneous,

    #[error("envelope set has no B1/B2 bracket")]
    MissingBracket,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
