//! Order-2 u- and v-statistics with the m-out-of-n multinomial bootstrap.
//!
//! - [`kernel`]: observations, samples, the kernel catalog and empirical
//!   Hoeffding projections.
//! - [`ustat`]: `U_n`, `V_n`, leave-one-out statistics and the jackknife
//!   variance estimate in O(n²).
//! - [`weights`]: multinomial bootstrap weights and their dispersion.
//! - [`boot`]: `U*`, `V*`, the studentized pivot, the Hoeffding split and
//!   bootstrap-t intervals.
//! - [`arrays`]: weighted double arrays for the array laws of large numbers.
//! - [`datagen`]: seeded i.i.d. and AR(1) generators.
//! - [`mc`]: declarative Monte Carlo experiments with JSON reports.
//! - [`cli`]: the `uvboot` command-line front end.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrays;
pub mod boot;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod io;
pub mod kernel;
pub mod mc;
pub mod rng;
pub mod summary;
pub mod ustat;
pub mod weights;

pub use error::{Error, Result};
pub use kernel::{BuiltinKernel, Kernel, Observation, Sample};

/// Library version echoed into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
