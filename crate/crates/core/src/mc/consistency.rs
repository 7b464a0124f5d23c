use rayon::prelude::*;

use super::config::{ExperimentConfig, FixedNConfig, GrowingConfig};
use super::report::{CellSummary, Criterion, Report};
use super::{strictly_decreasing, u_target, RunOptions};
use crate::boot::{bootstrap_uv, KernelMatrix};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::rng::{Lane, StreamFactory};
use crate::summary::{mean, quantile_of};
use crate::ustat::pair_sums;
use crate::weights::draw_weights;

/// Dispatches on the consistency kind.
pub fn run_consistency_experiment(
    config: &ExperimentConfig,
    options: &RunOptions,
) -> Result<Report> {
    match config {
        ExperimentConfig::ConsistencyFixedN(c) => run_fixed_n_experiment(c, options),
        ExperimentConfig::ConsistencyGrowing(c) => run_growing_experiment(c, options),
        other => Err(Error::InvalidParameter(format!(
            "`{}` is not a consistency experiment",
            other.kind()
        ))),
    }
}

/// One data set of size `n`; for each `m` in the grid, quantiles of
/// `|U* - ((n-1)/n) U_n|` and `|V* - V_n|` over fresh weight draws.
pub fn run_fixed_n_experiment(cfg: &FixedNConfig, options: &RunOptions) -> Result<Report> {
    let config = ExperimentConfig::ConsistencyFixedN(cfg.clone());
    config.validate()?;
    let kernel = cfg.kernel;
    let n = cfg.n;
    let streams = StreamFactory::new(cfg.master_seed);
    let sample = cfg
        .data
        .sample(n, kernel.dim(), &mut streams.stream(0, Lane::Data))?;
    let sums = pair_sums(&kernel, &sample)?;
    let (u_n, v_n) = (sums.u(), sums.v());
    let target_u = (n - 1) as f64 / n as f64 * u_n;
    let matrix = KernelMatrix::new(&kernel, &sample)?;

    let mut report = Report::new(&config);
    report.stat("u_n", u_n);
    report.stat("v_n", v_n);
    report.stat("target_u", target_u);

    let pool = options.pool()?;
    let r_count = cfg.replicates as u64;
    let mut q_u = Vec::new();
    let mut q_v = Vec::new();
    for (g, &m) in cfg.m_grid.iter().enumerate() {
        let devs: Vec<(f64, f64)> = pool.install(|| {
            (0..r_count)
                .into_par_iter()
                .map(|r| {
                    let w = draw_weights(
                        n,
                        m,
                        &mut streams.stream(g as u64 * r_count + r, Lane::Weights),
                    )?;
                    let (u, v) = matrix.bootstrap_uv(&w)?;
                    Ok(((u - target_u).abs(), (v - v_n).abs()))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let du: Vec<f64> = devs.iter().map(|d| d.0).collect();
        let dv: Vec<f64> = devs.iter().map(|d| d.1).collect();
        let (qu, qv) = (
            quantile_of(&du, cfg.quantile),
            quantile_of(&dv, cfg.quantile),
        );
        q_u.push(qu);
        q_v.push(qv);
        let mut cell = CellSummary::new(format!("m = {m}"), n, Some(m))
            .with("quantile_abs_dev_u", qu)
            .with("quantile_abs_dev_v", qv)
            .with("mean_abs_dev_u", mean(&du))
            .with("mean_abs_dev_v", mean(&dv));
        cell.count = devs.len();
        report.cells.push(cell);
    }

    report.check(Criterion::asserted(
        "u_quantile_strictly_decreasing",
        strictly_decreasing(&q_u),
        format!("{q_u:?}"),
    ));
    let factors: Vec<f64> = cfg
        .m_grid
        .windows(2)
        .zip(q_u.windows(2))
        .map(|(m, q)| (q[0] / q[1]).powf(1.0 / (m[1] as f64 / m[0] as f64).log10()))
        .collect();
    for (k, f) in factors.iter().enumerate() {
        report.stat(&format!("shrink_per_decade_{k}"), *f);
    }
    let [lo, hi] = cfg.shrink_band;
    report.check(Criterion::asserted(
        "u_shrink_per_decade_in_band",
        factors.iter().all(|f| (lo..=hi).contains(f)),
        format!("{factors:?} within [{lo:.4}, {hi:.4}]"),
    ));
    report.check(Criterion::info(
        "v_quantile_strictly_decreasing",
        strictly_decreasing(&q_v),
        format!("{q_v:?}"),
    ));
    Ok(report)
}

/// Fresh data and weights per seed along an n-grid; deviations of `U*` and
/// `V*` from the population target.
pub fn run_growing_experiment(cfg: &GrowingConfig, options: &RunOptions) -> Result<Report> {
    let config = ExperimentConfig::ConsistencyGrowing(cfg.clone());
    config.validate()?;
    let kernel = cfg.kernel;
    let streams = StreamFactory::new(cfg.master_seed);
    let mut report = Report::new(&config);
    let pool = options.pool()?;
    let r_count = cfg.replicates as u64;

    let mut q_u = Vec::new();
    for (c, &n) in cfg.n_grid.iter().enumerate() {
        let m = cfg.m_rule.check(n)?;
        let target = u_target(kernel, &cfg.data, n, cfg.theta)?;
        let devs: Vec<(f64, f64)> = pool.install(|| {
            (0..r_count)
                .into_par_iter()
                .map(|r| {
                    let idx = c as u64 * r_count + r;
                    let sample =
                        cfg.data
                            .sample(n, kernel.dim(), &mut streams.stream(idx, Lane::Data))?;
                    let w = draw_weights(n, m, &mut streams.stream(idx, Lane::Weights))?;
                    let (u, v) = bootstrap_uv(&kernel, &sample, &w)?;
                    Ok(((u - target).abs(), (v - target).abs()))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let du: Vec<f64> = devs.iter().map(|d| d.0).collect();
        let dv: Vec<f64> = devs.iter().map(|d| d.1).collect();
        let qu = quantile_of(&du, cfg.quantile);
        q_u.push(qu);
        let mut cell = CellSummary::new(format!("n = {n}"), n, Some(m))
            .with("target", target)
            .with("quantile_abs_dev_u", qu)
            .with("quantile_abs_dev_v", quantile_of(&dv, cfg.quantile))
            .with("mean_abs_dev_u", mean(&du))
            .with("mean_abs_dev_v", mean(&dv));
        if let Some(tol) = cfg.tolerance {
            let frac = du.iter().filter(|&&d| d < tol).count() as f64 / du.len() as f64;
            cell = cell.with("fraction_within_tolerance", frac);
            report.check(Criterion::asserted(
                format!("within_tolerance_n{n}"),
                frac >= cfg.min_fraction,
                format!(
                    "{frac:.3} of runs with |U* - target| < {tol} (need {})",
                    cfg.min_fraction
                ),
            ));
        }
        cell.count = devs.len();
        report.cells.push(cell);
    }

    if let (Some(ratio), true) = (cfg.max_ratio, q_u.len() >= 2) {
        let observed = q_u[q_u.len() - 1] / q_u[0];
        report.stat("quantile_ratio_last_first", observed);
        report.check(Criterion::asserted(
            "u_quantile_ratio",
            observed <= ratio,
            format!("last/first = {observed:.4}, need <= {ratio}"),
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{DataSpec, DistSpec, MixingSpec};
    use crate::kernel::BuiltinKernel;
    use crate::mc::config::MRule;

    fn n11() -> DataSpec {
        DataSpec::Iid(DistSpec::Normal { mean: 1.0, sd: 1.0 })
    }

    #[test]
    fn fixed_n_reports_every_m() {
        let cfg = FixedNConfig {
            kernel: BuiltinKernel::Product,
            data: n11(),
            n: 30,
            m_grid: vec![100, 1000, 10_000],
            replicates: 200,
            master_seed: 3,
            quantile: 0.9,
            shrink_band: [10f64.sqrt() / 2.0, 2.0 * 10f64.sqrt()],
        };
        let report = run_fixed_n_experiment(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(report.cells.len(), 3);
        assert!(
            report
                .criterion("u_quantile_strictly_decreasing")
                .unwrap()
                .pass
        );
    }

    #[test]
    fn growing_needs_a_target() {
        let cfg = GrowingConfig {
            kernel: BuiltinKernel::Gini,
            data: DataSpec::Ar1(MixingSpec {
                phi: 0.5,
                innovation_sd: 1.0,
            }),
            n_grid: vec![50],
            m_rule: MRule::EqualN,
            replicates: 5,
            master_seed: 1,
            quantile: 0.95,
            max_ratio: None,
            tolerance: Some(0.1),
            min_fraction: 0.95,
            theta: None,
        };
        assert!(matches!(
            run_growing_experiment(&cfg, &RunOptions::default()),
            Err(Error::NoTarget(_))
        ));
    }

    #[test]
    fn theta_override_is_used() {
        let cfg = GrowingConfig {
            kernel: BuiltinKernel::SignedSqrtProduct,
            data: n11(),
            n_grid: vec![40],
            m_rule: MRule::EqualN,
            replicates: 4,
            master_seed: 1,
            quantile: 0.95,
            max_ratio: None,
            tolerance: None,
            min_fraction: 0.95,
            theta: Some(0.25),
        };
        let report = run_growing_experiment(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(report.cells[0].metric("target"), 0.25);
    }
}
