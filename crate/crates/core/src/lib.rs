//! Port resilience analytics under tropical cyclones.
//!
//! The crate is `no_std` (with `alloc`) and holds every numerical piece of the
//! pipeline; reading files, configuration and the command line live in the
//! `portres` companion crate.
//!
//! Pipeline order:
//!
//! 1. [`ais`] segments vessel positions into port calls, daily counts and
//!    origin-destination legs.
//! 2. [`exposure`] finds port/cyclone interactions inside the eye-track buffer
//!    and joins gauge and weather-station observations.
//! 3. [`baseline`] fits a trend + Fourier forecaster with cyclone windows
//!    masked and produces 95% intervals.
//! 4. [`impact`] turns forecast/observation gaps into impact windows and
//!    resilience metrics.
//! 5. [`netgraph`] builds weekly freight graphs and centralities.
//! 6. [`countmodel`] fits NB, NB-Lindley and random-parameter NB-Lindley
//!    regressions by MCMC.
//! 7. [`effects`] screens covariates, runs stepwise DIC selection and computes
//!    Halton-draw average marginal effects.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ais;
pub mod baseline;
pub mod countmodel;
pub mod effects;
pub mod error;
pub mod exposure;
pub mod geo;
pub mod impact;
pub mod math;
pub mod netgraph;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
