//! Exponential functionals of Lévy processes drifting to -infinity.
//!
//! The law of `I = integral_0^inf exp(X_t) dt` factorizes into the
//! exponential functional of the descending ladder subordinator times the
//! exponential functional of a spectrally positive auxiliary process. This
//! crate builds models from their ladder exponents, computes positive and
//! negative integer moments, evaluates series and convolution forms of the
//! densities, checks the stationarity equation of the associated
//! generalized Ornstein-Uhlenbeck semigroup, and cross-validates everything
//! against exact Monte Carlo samplers.

pub mod config;
pub mod density;
pub mod error;
pub mod gou;
pub mod levy;
pub mod mc;
pub mod moments;
pub mod quad;
pub mod special;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Render a float with 17 significant digits, enough to round-trip f64
/// exactly; used by every CSV/JSON writer so reruns are byte-identical.
pub fn render_f64(v: f64) -> String {
    format!("{v:.16e}")
}
