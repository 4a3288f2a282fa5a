use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{op}: argument outside domain ({detail})")]
    Domain { op: &'static str, detail: String },

    #[error("roots of psi(s) = q are nearly repeated (separation {separation:e})")]
    NearlyRepeatedRoots { separation: f64 },

    #[error("{what} has no finite root")]
    NoFiniteRoot { what: &'static str },

    #[error("no best response for player C: l = {l} lies below x_c = {x_under_c}")]
    NoBestResponse { l: f64, x_under_c: f64 },

    #[error("J(l; a(l)) has no sign change on the scan grid [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("no sign change of {what} on [{lo}, {hi}]")]
    NoBracket { what: &'static str, lo: f64, hi: f64 },

    #[error("{what} is not monotone on the bracket")]
    NotMonotone { what: &'static str },

    #[error("simulation config: {0}")]
    SimConfig(String),
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        })
    }
}

pub(crate) fn check_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and >= 0",
        })
    }
}

pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        op,
        detail: detail.into(),
    }
}
