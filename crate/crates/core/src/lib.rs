//! Continuous measurement of educational attainment.
//!
//! Grouped census data report the share of a population whose highest
//! completed level is no schooling, primary, secondary, incomplete tertiary,
//! or complete tertiary. Treating time in school as a continuous variable,
//! this crate fits a three-parameter generalized gamma distribution to those
//! shares per country/year/sex cell — handling the top category as
//! right-censored — and derives mean years of schooling, Lorenz curves, the
//! Gini index, and generalized-entropy inequality measures, plus
//! population-weighted regional mixtures with an exact between/within
//! entropy decomposition.
//!
//! Modules:
//! - [`specfun`]: log-gamma, digamma, regularized incomplete gamma and its
//!   inverse.
//! - [`gg`]: the generalized gamma distribution and its closed-form
//!   functionals.
//! - [`fitter`]: censor-aware targets and grid-restarted nonlinear least
//!   squares.
//! - [`mixture`]: regional mixtures, Lorenz curves, GE decomposition,
//!   dominance checks.
//! - [`dataio`]: CSV schemas for inputs, results, and curve grids.
//! - [`verify`]: samplers, Monte Carlo and quadrature oracles for the test
//!   suite; not used on the estimation path.
//! - [`demo`]: a small synthetic dataset for exercising the pipeline.

// Special-function coefficient tables keep their full published digits.
#![allow(clippy::excessive_precision)]

pub mod dataio;
pub mod demo;
pub mod fitter;
pub mod gg;
pub mod mixture;
pub mod quad;
pub mod specfun;
pub mod verify;

pub use fitter::{AttainmentRecord, FitConfig, FitResult, FitTargets};
pub use gg::GgParams;
pub use mixture::Region;
