use thiserror::Error;

/// Errors raised by model construction, solving and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("chain has no unique stationary distribution (null space dimension {dimension})")]
    NoUniqueStationary { dimension: usize },

    #[error("policy induces {classes} recurrent classes; expected a unichain model")]
    Multichain { classes: usize },

    #[error("value iteration did not converge after {iterations} sweeps (last span {span:e})")]
    NonConvergence { iterations: usize, span: f64 },

    #[error(
        "multiplier bracket not established: cost {cost} at mu+ = {mu_hi} still meets budget {budget}; raise mu_hi"
    )]
    Bracket { mu_hi: f64, cost: f64, budget: f64 },

    #[error("budget {budget} infeasible: cost floor {floor} at mu = {mu}")]
    Infeasible { budget: f64, floor: f64, mu: f64 },

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors produced by the numerical pipeline rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoUniqueStationary { .. }
                | Error::Multichain { .. }
                | Error::NonConvergence { .. }
                | Error::Bracket { .. }
                | Error::Infeasible { .. }
        )
    }
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

pub type Result<T, E = Error> = std::result::Result<T, E>;
