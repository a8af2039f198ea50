use thiserror::Error;

/// Errors raised by bound computations, parsers, and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("distributions belong to different families")]
    MixedFamily,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("observation is missing `{0}` required by the {1} bound")]
    MissingField(&'static str, &'static str),

    #[error("lambda = {lambda} exceeds the cap {cap} required by the {kind} bound")]
    LambdaCap {
        lambda: f64,
        cap: f64,
        kind: &'static str,
    },

    #[error("non-finite value in `{0}`")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "delta",
            value: delta,
            domain: "(0, 1)",
        })
    }
}

pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: p,
            domain: "[0, 1]",
        })
    }
}

pub(crate) fn check_finite(name: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}
