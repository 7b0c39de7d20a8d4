//! Companding scalar quantizers for a Gaussian source whose compressor is a
//! piecewise-quadratic least-squares fit of the MSE-optimal compressor.
//!
//! The crate is organised bottom-up:
//!
//! * [`quadrature`]: adaptive Gauss–Kronrod integration used everywhere else.
//! * [`gauss`]: Gaussian density, tail statistics, the optimal compressor and
//!   the support-region threshold.
//! * [`spline`]: per-segment quadratic least-squares fit of a target function,
//!   evaluation, differentiation and segment inversion.
//! * [`design`]: construction of the companding quantizer from a fitted spline
//!   and its analytic distortion / SQNR.
//! * [`optimizer`]: grid sweep (and golden-section refinement) of the free
//!   segment threshold.
//! * [`oracles`]: Monte-Carlo distortion, Lloyd–Max and an exact-compressor
//!   comparator used to validate everything above.
//!
//! ```
//! use spline_compander::{design, gauss::SourceModel, spline};
//!
//! let source = SourceModel::unit();
//! let config = design::DesignConfig::two_segment(source, 16, 1.68).unwrap();
//! let q = design::design(&config).unwrap();
//! let report = q.sqnr().unwrap();
//! assert!(report.sqnr_db > 19.0 && report.sqnr_db < 21.0);
//! # let _ = spline::QuadraticSpline::identity(0.0, 1.0);
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod gauss;
pub mod optimizer;
pub mod oracles;
pub mod quadrature;
pub mod spline;

pub use error::{Error, Result};
