//! Monte Carlo experiments that check the limit theorems at desk scale.
//!
//! Every replicate owns its random streams, addressed by
//! `(master_seed, replicate index, lane)` (see [`crate::rng`]). Replicates
//! run on a rayon pool and are collected in index order, so a report does
//! not depend on the number of workers.

mod array_lln;
mod clt;
pub mod config;
mod consistency;
mod coverage;
pub mod ks;
mod marcinkiewicz;
pub mod report;

use std::time::Instant;

pub use array_lln::run_array_lln_experiment;
pub use clt::run_clt_experiment;
pub use config::{
    ArrayCheck, ArrayLlnConfig, CltConfig, CoverageConfig, ExperimentConfig, FixedNConfig,
    GrowingConfig, MRule, MarcinkiewiczConfig,
};
pub use consistency::{run_consistency_experiment, run_fixed_n_experiment, run_growing_experiment};
pub use coverage::run_coverage_experiment;
pub use ks::{ks_statistic, normal_cdf};
pub use marcinkiewicz::run_marcinkiewicz_experiment;
pub use report::{CellSummary, Criterion, RawTable, Report};

use crate::datagen::{DataSpec, DistSpec};
use crate::error::{Error, Result};
use crate::kernel::BuiltinKernel;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "UVBOOT_THREADS";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; falls back to `UVBOOT_THREADS`, then to rayon's default.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn threads(threads: usize) -> Self {
        Self {
            threads: Some(threads),
        }
    }

    pub(crate) fn pool(&self) -> Result<rayon::ThreadPool> {
        let threads = self.threads.or_else(|| {
            std::env::var(THREADS_ENV)
                .ok()
                .and_then(|v| v.trim().parse::<usize>().ok())
        });
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads.filter(|&t| t > 0) {
            builder = builder.num_threads(t);
        }
        builder
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))
    }
}

/// Runs any experiment kind and stamps the runtime.
pub fn run(config: &ExperimentConfig, options: &RunOptions) -> Result<Report> {
    config.validate()?;
    let start = Instant::now();
    let mut report = match config {
        ExperimentConfig::Clt(c) => run_clt_experiment(c, options)?,
        ExperimentConfig::ConsistencyFixedN(_) | ExperimentConfig::ConsistencyGrowing(_) => {
            run_consistency_experiment(config, options)?
        }
        ExperimentConfig::Marcinkiewicz(c) => run_marcinkiewicz_experiment(c, options)?,
        ExperimentConfig::ArrayLln(c) => run_array_lln_experiment(c, options)?,
        ExperimentConfig::Coverage(c) => run_coverage_experiment(c, options)?,
    };
    report.runtime_seconds = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

/// `theta = E h(X_1, X_2)` for i.i.d. data where a closed form is known.
pub fn closed_form_theta(kernel: BuiltinKernel, dist: &DistSpec) -> Option<f64> {
    use std::f64::consts::PI;
    match kernel {
        BuiltinKernel::Zero => Some(0.0),
        // independent continuous coordinates: concordance and discordance balance
        BuiltinKernel::Kendall => Some(0.0),
        BuiltinKernel::Product => dist.mean().map(|m| m * m),
        BuiltinKernel::Variance => dist.variance(),
        BuiltinKernel::Gini => match *dist {
            DistSpec::Normal { sd, .. } => Some(2.0 * sd / PI.sqrt()),
            DistSpec::Uniform { low, high } => Some((high - low) / 3.0),
            DistSpec::Exponential { rate } => Some(1.0 / rate),
            DistSpec::Pareto { alpha, x_min } => {
                (alpha > 1.0).then(|| 2.0 * alpha * x_min / ((alpha - 1.0) * (2.0 * alpha - 1.0)))
            }
        },
        BuiltinKernel::SignedSqrtProduct => match *dist {
            DistSpec::Exponential { rate } => Some(PI / (4.0 * rate)),
            DistSpec::Pareto { .. } | DistSpec::Uniform { .. } => {
                dist.abs_moment(0.5).map(|e| e * e).filter(|_| match *dist {
                    DistSpec::Uniform { low, .. } => low >= 0.0,
                    _ => true,
                })
            }
            DistSpec::Normal { .. } => None,
        },
    }
}

/// Whether `E|h(X_1, X_2)|^q` and `E|h(X_1, X_1)|^q` are finite for i.i.d. data.
pub fn kernel_moments_finite(kernel: BuiltinKernel, dist: &DistSpec, q: f64) -> (bool, bool) {
    match kernel {
        BuiltinKernel::Product => (dist.abs_moment_finite(q), dist.abs_moment_finite(2.0 * q)),
        BuiltinKernel::SignedSqrtProduct => {
            (dist.abs_moment_finite(q / 2.0), dist.abs_moment_finite(q))
        }
        BuiltinKernel::Variance => (dist.abs_moment_finite(2.0 * q), true),
        BuiltinKernel::Gini => (dist.abs_moment_finite(q), true),
        BuiltinKernel::Kendall | BuiltinKernel::Zero => (true, true),
    }
}

/// Target of `U_n` for the data spec: `E h` for i.i.d. data, or the mean of
/// `E h(X_i, X_j)` over `i != j` for AR(1) data with the product kernel.
pub(crate) fn u_target(
    kernel: BuiltinKernel,
    data: &DataSpec,
    n: usize,
    theta: Option<f64>,
) -> Result<f64> {
    match data {
        DataSpec::Iid(dist) => theta
            .or_else(|| closed_form_theta(kernel, dist))
            .ok_or_else(|| {
                Error::NoTarget(format!(
                    "no closed-form E h for kernel `{kernel}` on {dist:?}; set `theta`"
                ))
            }),
        DataSpec::Ar1(spec) => {
            if kernel != BuiltinKernel::Product {
                return Err(Error::NoTarget(format!(
                    "AR(1) targets are only available for the product kernel, not `{kernel}`"
                )));
            }
            // sum_{i != j} phi^|i-j| v = 2 v sum_{k=1}^{n-1} (n - k) phi^k
            let mut acc = 0.0;
            for k in 1..n {
                acc += (n - k) as f64 * spec.autocovariance(k);
            }
            Ok(2.0 * acc / (n * (n - 1)) as f64)
        }
    }
}

/// Strictly decreasing sequence.
pub(crate) fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}
