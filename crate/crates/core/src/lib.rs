//! Finite-dimensional weak-measurement simulator.
//!
//! The crate computes weak values `⟨f|U S|in⟩ / ⟨f|U|in⟩` two ways:
//! analytically, and operationally by coupling the system to a Gaussian
//! pointer with `exp(−i g S ⊗ P_M)`, evolving, postselecting and
//! extrapolating the pointer mean to the weak limit. A classifier then
//! reports whether the weak value is representative of the undisturbed
//! system or whether the coupling derails it.
//!
//! ```
//! use weakval::analysis::{analytic_weak_value, classify, BehaviorClass, CLASSIFY_TOL};
//! use weakval::protocol::{operational_weak_value, GSchedule};
//! use weakval::scenarios::build_simple_mzi;
//!
//! let s = build_simple_mzi();
//! let analytic = analytic_weak_value(&s).unwrap();
//! let estimate = operational_weak_value(&s, &GSchedule::default_for(s.meter)).unwrap();
//! assert!((analytic.re - 0.5).abs() < 1e-12);
//! assert!((estimate.value - 0.5).abs() < 1e-6);
//! assert_eq!(classify(&s, CLASSIFY_TOL).unwrap().behavior, BehaviorClass::WellBehaved);
//! ```
//!
//! Modules, bottom up:
//!
//! - [`hilbert`]: labelled bases, state vectors, operators, spectral decomposition.
//! - [`meter`]: closed-form Gaussian pointer states, grid rendering, sampling.
//! - [`protocol`]: coupling, evolution, postselection, limit extrapolation, Monte Carlo.
//! - [`analysis`]: analytic weak values, derailment trace, classifier.
//! - [`scenarios`]: built-in interferometers and the JSON scenario format.
//! - [`cli`]: the `weakval` command-line front end.

// Negated comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod extrapolate;
pub mod hilbert;
pub mod meter;
pub mod protocol;
pub mod report;
pub mod scenarios;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/hilbert.md")]
    mod hilbert {}
    #[doc = include_str!("../../../book/src/meter.md")]
    mod meter {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/scenario-format.md")]
    mod scenario_format {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
