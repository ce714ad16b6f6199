use thiserror::Error;

use crate::model::CellState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("positive steady state E2 does not exist for these parameters")]
    NoPositiveEquilibrium,

    #[error("no positive bifurcation point: d3 = {d3} is not below d3_max = {d3_max}")]
    NoPositiveBifurcation { d3: f64, d3_max: f64 },

    #[error("characteristic coefficients outside the Routh-Hurwitz setting (b1 = {b1}, b3 = {b3})")]
    OutOfTheory { b1: f64, b3: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64, last: CellState },

    #[error("non-finite right-hand side at t = {t}")]
    NonFinite { t: f64, last: CellState },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps {
        t: f64,
        max_steps: usize,
        last: CellState,
    },

    #[error("bracket endpoints have the same Hurwitz sign ({low} and {high})")]
    SameSignBracket { low: f64, high: f64 },

    #[error("unknown parameter name '{0}'")]
    UnknownParameter(String),

    #[error("invalid sweep grid: {0}")]
    InvalidSweep(String),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::NonFinite { .. }
                | Error::TooManySteps { .. }
        )
    }
}
