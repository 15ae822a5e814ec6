//! Parallel-pancake hard instances for Gaussian-mixture testing.
//!
//! The crate covers the whole pipeline:
//!
//! * [`hermite`]: normalized probabilist's Hermite polynomials, Gaussian
//!   moments and Gaussian `L_p` norms of polynomials.
//! * [`distributions`]: finitely supported laws, common-variance mixtures,
//!   the Ornstein–Uhlenbeck lift between them and a simulated STAT oracle.
//! * [`design`]: Gauss–Hermite quadrature and numerical moment-matching
//!   design search (uniform and mostly-uniform weights).
//! * [`pancakes`]: the `d`-dimensional hidden-direction mixture and its
//!   samplers.
//! * [`tensor`]: canonical symmetric moment tensors.
//! * [`tester`]: the moment-tensor distinguisher with majority voting and
//!   null calibration.
//! * [`verify`]: numerical checks of the structural inequalities.

// Validation is written as `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod distributions;
pub mod error;
pub mod hermite;
pub mod numeric;
pub mod pancakes;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod tensor;
pub mod tester;
pub mod verify;

pub use design::{DesignResult, DesignStatus, RatioEstimate};
pub use distributions::{DiscreteDist1D, Distribution1D, Gmm1D};
pub use error::{Error, Result};
pub use hermite::{HermiteExpansion, LpOrder, Polynomial};
pub use pancakes::PancakeInstance;
pub use report::CheckReport;
pub use tensor::SymmetricTensor;
pub use tester::{Hypothesis, TestConfig, Verdict};
