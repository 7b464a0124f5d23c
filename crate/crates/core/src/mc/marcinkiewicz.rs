use rayon::prelude::*;

use super::config::{ExperimentConfig, MarcinkiewiczConfig};
use super::kernel_moments_finite;
use super::report::{CellSummary, Criterion, Report};
use super::RunOptions;
use crate::arrays::marcinkiewicz_scale;
use crate::boot::{bootstrap_u, bootstrap_v};
use crate::datagen::iid_sample;
use crate::error::{Error, Result};
use crate::kernel::{BuiltinKernel, Kernel};
use crate::rng::{Lane, StreamFactory};
use crate::summary::median;
use crate::weights::draw_weights;

fn moment_guard(kernel: BuiltinKernel, cfg: &MarcinkiewiczConfig, need_diag: bool) -> Result<()> {
    let q = 2.0 / cfg.d;
    let (offdiag, diag) = kernel_moments_finite(kernel, &cfg.data, q);
    if !offdiag || (need_diag && !diag) {
        return Err(Error::InvalidParameter(format!(
            "kernel `{kernel}` on {:?} lacks a finite |h|^{q:.4} moment{}",
            cfg.data,
            if offdiag { " on the diagonal" } else { "" }
        )));
    }
    Ok(())
}

fn shrink_criterion(
    name: &str,
    medians: &[f64],
    min_shrink: f64,
    asserted: bool,
) -> (f64, Criterion) {
    let (first, last) = (medians[0], medians[medians.len() - 1]);
    let shrink = if first == 0.0 && last == 0.0 {
        f64::INFINITY
    } else {
        first / last
    };
    let pass = shrink >= min_shrink;
    let detail = format!("median first/last = {shrink:.3}, need >= {min_shrink}");
    let c = if asserted {
        Criterion::asserted(name, pass, detail)
    } else {
        Criterion::info(name, pass, detail)
    };
    (shrink, c)
}

/// Median over seeds of `|m^{-(d-2)} U*|` (and of `V*` with `v_kernel`)
/// along the n-grid. Data must carry the fractional moment `E|h|^{2/d}`.
pub fn run_marcinkiewicz_experiment(
    cfg: &MarcinkiewiczConfig,
    options: &RunOptions,
) -> Result<Report> {
    let config = ExperimentConfig::Marcinkiewicz(cfg.clone());
    config.validate()?;
    moment_guard(cfg.kernel, cfg, false)?;
    if let Some(vk) = cfg.v_kernel {
        moment_guard(vk, cfg, true)?;
    }
    let streams = StreamFactory::new(cfg.master_seed);
    let pool = options.pool()?;
    let seeds = cfg.seeds as u64;
    let mut report = Report::new(&config);
    let mut med_u = Vec::new();
    let mut med_v = Vec::new();

    for (c, &n) in cfg.n_grid.iter().enumerate() {
        let m = cfg.m_rule.check(n)?;
        let values: Vec<(f64, Option<f64>)> = pool.install(|| {
            (0..seeds)
                .into_par_iter()
                .map(|s| {
                    let idx = c as u64 * seeds + s;
                    let sample = iid_sample(&cfg.data, n, &mut streams.stream(idx, Lane::Data))?;
                    let w = draw_weights(n, m, &mut streams.stream(idx, Lane::Weights))?;
                    let u = marcinkiewicz_scale(bootstrap_u(&cfg.kernel, &sample, &w)?, m, cfg.d)?
                        .abs();
                    let v = match cfg.v_kernel {
                        Some(vk) => Some(
                            marcinkiewicz_scale(bootstrap_v(&vk, &sample, &w)?, m, cfg.d)?.abs(),
                        ),
                        None => None,
                    };
                    Ok((u, v))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let us: Vec<f64> = values.iter().map(|v| v.0).collect();
        let mut cell = CellSummary::new(format!("n = {n}"), n, Some(m))
            .with("median_abs_scaled_u", median(&us))
            .with("max_abs_scaled_u", us.iter().cloned().fold(0.0, f64::max));
        med_u.push(median(&us));
        if cfg.v_kernel.is_some() {
            let vs: Vec<f64> = values.iter().filter_map(|v| v.1).collect();
            cell = cell
                .with("median_abs_scaled_v", median(&vs))
                .with("max_abs_scaled_v", vs.iter().cloned().fold(0.0, f64::max));
            med_v.push(median(&vs));
        }
        cell.count = values.len();
        report.cells.push(cell);
    }

    let (shrink, c) = shrink_criterion("u_median_shrink", &med_u, cfg.min_shrink, true);
    report.stat("u_median_shrink", shrink);
    report.check(c);
    if let Some(vk) = cfg.v_kernel {
        let (shrink, c) = shrink_criterion("v_median_shrink", &med_v, cfg.min_shrink, true);
        report.stat("v_median_shrink", shrink);
        report.check(Criterion {
            detail: format!("{} (kernel `{}`)", c.detail, vk.id()),
            ..c
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::DistSpec;
    use crate::mc::config::MRule;

    fn cfg(kernel: BuiltinKernel, v_kernel: Option<BuiltinKernel>) -> MarcinkiewiczConfig {
        MarcinkiewiczConfig {
            kernel,
            v_kernel,
            data: DistSpec::Pareto {
                alpha: 0.8,
                x_min: 1.0,
            },
            d: 3.0,
            n_grid: vec![20, 60],
            m_rule: MRule::Power {
                c: 1.0,
                exponent: 3.0,
            },
            seeds: 20,
            master_seed: 9,
            min_shrink: 5.0,
        }
    }

    #[test]
    fn refuses_infinite_diagonal_moment_for_v() {
        let r = run_marcinkiewicz_experiment(
            &cfg(BuiltinKernel::Product, Some(BuiltinKernel::Product)),
            &RunOptions::threads(1),
        );
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn zero_kernel_counts_as_shrinking() {
        let report =
            run_marcinkiewicz_experiment(&cfg(BuiltinKernel::Zero, None), &RunOptions::threads(1))
                .unwrap();
        assert!(report.pass);
        assert_eq!(report.cells[1].metric("median_abs_scaled_u"), 0.0);
    }

    #[test]
    fn small_grid_shrinks() {
        let report = run_marcinkiewicz_experiment(
            &cfg(
                BuiltinKernel::Product,
                Some(BuiltinKernel::SignedSqrtProduct),
            ),
            &RunOptions::default(),
        )
        .unwrap();
        assert!(report.statistics["u_median_shrink"] > 1.0);
        assert_eq!(report.cells.len(), 2);
    }
}
