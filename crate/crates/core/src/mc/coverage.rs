use rayon::prelude::*;

use super::config::{CoverageConfig, ExperimentConfig};
use super::report::{CellSummary, Criterion, RawTable, Report};
use super::{u_target, RunOptions};
use crate::boot::{bootstrap_ci_with, Interval};
use crate::error::Result;
use crate::kernel::Kernel;
use crate::rng::{Lane, StreamFactory};
use crate::summary::mean;

/// Empirical coverage of bootstrap-t intervals: each outer trial draws a
/// data set from its data lane and all inner weight vectors from its weight lane.
pub fn run_coverage_experiment(cfg: &CoverageConfig, options: &RunOptions) -> Result<Report> {
    let config = ExperimentConfig::Coverage(cfg.clone());
    config.validate()?;
    let kernel = cfg.kernel;
    let n = cfg.n;
    let m = cfg.m_rule.check(n)?;
    let theta = u_target(kernel, &cfg.data, n, cfg.theta)?;
    let streams = StreamFactory::new(cfg.master_seed);
    let pool = options.pool()?;

    let intervals: Vec<Interval> = pool.install(|| {
        (0..cfg.outer_trials as u64)
            .into_par_iter()
            .map(|t| {
                let sample =
                    cfg.data
                        .sample(n, kernel.dim(), &mut streams.stream(t, Lane::Data))?;
                bootstrap_ci_with(
                    &kernel,
                    &sample,
                    m,
                    cfg.replicates,
                    cfg.level,
                    cfg.normalization,
                    &mut streams.stream(t, Lane::Weights),
                )
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let covered: Vec<bool> = intervals
        .iter()
        .map(|iv| iv.lower <= theta && theta <= iv.upper)
        .collect();
    let hits = covered.iter().filter(|&&c| c).count();
    let coverage = hits as f64 / intervals.len() as f64;
    let widths: Vec<f64> = intervals.iter().map(|iv| iv.upper - iv.lower).collect();
    let below = intervals.iter().filter(|iv| theta < iv.lower).count();
    let above = intervals.iter().filter(|iv| theta > iv.upper).count();

    let mut report = Report::new(&config);
    let mut cell = CellSummary::new("outer trials", n, Some(m))
        .with("coverage", coverage)
        .with("mean_width", mean(&widths))
        .with("theta", theta)
        .with("misses_below", below as f64)
        .with("misses_above", above as f64);
    cell.count = intervals.len();
    cell.dropped = intervals.iter().map(|iv| iv.dropped).sum();
    report.cells.push(cell);
    report.stat("coverage", coverage);
    let se = (coverage * (1.0 - coverage) / intervals.len() as f64).sqrt();
    report.stat("coverage_se", se);
    let [lo, hi] = cfg.coverage_band;
    report.check(Criterion::asserted(
        "coverage_in_band",
        (lo..=hi).contains(&coverage),
        format!(
            "{hits}/{} = {coverage:.4} covered (band [{lo}, {hi}])",
            intervals.len()
        ),
    ));
    report.raw = Some(RawTable {
        columns: ["trial", "lower", "upper", "u_n", "sigma2_hat", "covered"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows: intervals
            .iter()
            .zip(&covered)
            .enumerate()
            .map(|(t, (iv, &c))| {
                vec![
                    t as f64,
                    iv.lower,
                    iv.upper,
                    iv.u_n,
                    iv.sigma2_hat,
                    c as u8 as f64,
                ]
            })
            .collect(),
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{DataSpec, DistSpec};
    use crate::kernel::BuiltinKernel;
    use crate::mc::config::MRule;

    #[test]
    fn small_run_is_reproducible_and_reasonable() {
        let cfg = CoverageConfig {
            kernel: BuiltinKernel::Product,
            data: DataSpec::Iid(DistSpec::Normal { mean: 1.0, sd: 1.0 }),
            n: 100,
            m_rule: MRule::EqualN,
            outer_trials: 20,
            replicates: 200,
            level: 0.95,
            master_seed: 11,
            coverage_band: [0.7, 1.0],
            theta: None,
            normalization: Default::default(),
        };
        let a = run_coverage_experiment(&cfg, &RunOptions::threads(1)).unwrap();
        let b = run_coverage_experiment(&cfg, &RunOptions::threads(2)).unwrap();
        assert_eq!(a.body_json(), b.body_json());
        assert!(a.pass, "{:?}", a.criteria);
        assert_eq!(a.raw.unwrap().rows.len(), 20);
    }
}
