use thiserror::Error;

/// Errors raised by the solvers, channel validation and the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid ensemble ({l}, {r}): need l >= 2 and r > l")]
    InvalidEnsemble { l: usize, r: usize },

    #[error("value {value} for `{what}` is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed channel: {0}")]
    MalformedChannel(String),

    #[error("channel spec validation failed: {0}")]
    Validation(String),

    #[error("failed to converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("no bracket: {0}")]
    Bracket(String),

    #[error("population update failed: {failures} zero-normalizer draws exhausted their resampling budget")]
    ResampleExhausted { failures: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "[0, 1]",
        })
    }
}
