use thiserror::Error;

use crate::extrapolate::ExtrapolationError;
use crate::hilbert::HilbertError;
use crate::meter::MeterError;
use crate::scenarios::ScenarioError;

/// Errors raised by the measurement pipeline and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// `⟨f|U_sys|in⟩` vanishes, so the weak value has no denominator.
    #[error("weak value undefined: |<f|U_sys|in>| = {overlap:.3e}")]
    UndefinedWeakValue { overlap: f64 },
    #[error("postselection probability {probability:.3e} at g = {g} is effectively zero")]
    ZeroPostselection { g: f64, probability: f64 },
    #[error("observable is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("evolution operator is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("channels are not mutually orthogonal (|<a|b>| = {0:.3e})")]
    ChannelsNotOrthogonal(f64),
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Meter(#[from] MeterError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Extrapolation(#[from] ExtrapolationError),
}

pub type Result<T> = std::result::Result<T, Error>;
