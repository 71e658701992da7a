//! Generative modeling toolkit for the days-alive-and-at-home (DAH) endpoint.
//!
//! DAH counts the days a patient spends alive and at home during a fixed
//! follow-up window after surgery. Its distribution is awkward for off-the-shelf
//! models: a death/complication spike at zero, a hard upper bound imposed by a
//! mandatory initial hospital stay, and strong left skew. This crate models the
//! endpoint by dividing it into its clinical components — death, initial stay,
//! extended stay beyond the protocol minimum, and subsequent institutional care —
//! fitting each with its own distributional regression, and recombining them.
//!
//! The pieces:
//!
//! - [`dist`] — count and continuous distribution kernels plus the
//!   censoring / truncation / zero-mass combinators everything is built from.
//! - [`regression`] — maximum-likelihood distributional regression (every
//!   distribution parameter gets its own link and linear predictor) with
//!   stepwise GAIC term selection.
//! - [`composite`] — the component-wise generative model of DAH: patient
//!   simulation, the factorized likelihood, and component-wise fitting.
//! - [`competitors`] — five single-distribution DAH models used as baselines,
//!   with an optional protocol-stay window shift.
//! - [`diagnostics`] — randomized quantile residuals, worm plots, and a
//!   resampling-based quantile–quantile predictive check.
//! - [`trial`] — Mann–Whitney–Wilcoxon testing, treatment-effect calibration,
//!   and Monte Carlo power / type-I-error / sample-size studies.
//! - [`trajectory`] — day-by-day location records and derivation of the DAH
//!   components from them.

pub mod competitors;
pub mod composite;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod regression;
pub mod rng;
pub mod stats;
pub mod trajectory;
pub mod trial;

pub use error::{Error, Result};
