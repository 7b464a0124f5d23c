//! Declarative experiment configuration, read from JSON.

use serde::{Deserialize, Serialize};

use crate::datagen::{DataSpec, DistSpec};
use crate::error::{Error, Result};
use crate::kernel::BuiltinKernel;
use crate::ustat::JackknifeNormalization;

/// Bootstrap size as a function of the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MRule {
    Fixed(u64),
    EqualN,
    /// `round(c * n^exponent)`
    Power {
        c: f64,
        exponent: f64,
    },
    /// `ceil(c * n * ln n)`
    NLogN {
        c: f64,
    },
}

impl MRule {
    pub fn apply(&self, n: usize) -> u64 {
        let nf = n as f64;
        match *self {
            MRule::Fixed(m) => m,
            MRule::EqualN => n as u64,
            MRule::Power { c, exponent } => (c * nf.powf(exponent)).round().max(0.0) as u64,
            MRule::NLogN { c } => (c * nf * nf.ln()).ceil().max(0.0) as u64,
        }
    }

    pub fn check(&self, n: usize) -> Result<u64> {
        let m = self.apply(n);
        if m < 2 {
            return Err(Error::BootstrapSizeTooSmall { min: 2, got: m });
        }
        Ok(m)
    }
}

fn default_ks_cutoff() -> f64 {
    0.05
}

fn default_degeneracy() -> f64 {
    crate::kernel::DEFAULT_DEGENERACY_THRESHOLD
}

/// Joint (fresh data and weights per replicate) pivots, plus optional
/// conditional diagnostics on a few fixed data sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltConfig {
    pub kernel: BuiltinKernel,
    pub data: DataSpec,
    pub n: usize,
    pub m_rule: MRule,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default = "default_ks_cutoff")]
    pub ks_cutoff: f64,
    #[serde(default = "default_degeneracy")]
    pub degeneracy_threshold: f64,
    #[serde(default)]
    pub normalization: JackknifeNormalization,
    /// Fixed data sets for the conditional diagnostic (0 disables it).
    #[serde(default)]
    pub conditional_datasets: usize,
}

fn default_q90() -> f64 {
    0.9
}

fn default_band() -> [f64; 2] {
    let r = 10f64.sqrt();
    [r / 2.0, 2.0 * r]
}

/// Fixed data, growing bootstrap size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedNConfig {
    pub kernel: BuiltinKernel,
    pub data: DataSpec,
    pub n: usize,
    pub m_grid: Vec<u64>,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default = "default_q90")]
    pub quantile: f64,
    /// Allowed shrink factor of the quantile per decade of `m`.
    #[serde(default = "default_band")]
    pub shrink_band: [f64; 2],
}

fn default_q95() -> f64 {
    0.95
}

fn default_fraction() -> f64 {
    0.95
}

/// Growing `n` with `m = m_rule(n)`; fresh data and weights per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowingConfig {
    pub kernel: BuiltinKernel,
    pub data: DataSpec,
    pub n_grid: Vec<usize>,
    pub m_rule: MRule,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default = "default_q95")]
    pub quantile: f64,
    /// Pass if the last cell's quantile is at most this fraction of the first's.
    #[serde(default)]
    pub max_ratio: Option<f64>,
    /// Pass if `|U* - target| < tolerance` in at least `min_fraction` of runs.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default = "default_fraction")]
    pub min_fraction: f64,
    /// Overrides the closed-form `E h` for i.i.d. data.
    #[serde(default)]
    pub theta: Option<f64>,
}

fn default_shrink() -> f64 {
    5.0
}

/// `m^{-(d-2)} U*` along an n-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarcinkiewiczConfig {
    pub kernel: BuiltinKernel,
    /// Kernel for the `V*` check; skipped when absent.
    #[serde(default)]
    pub v_kernel: Option<BuiltinKernel>,
    pub data: DistSpec,
    pub d: f64,
    pub n_grid: Vec<usize>,
    pub m_rule: MRule,
    pub seeds: usize,
    pub master_seed: u64,
    #[serde(default = "default_shrink")]
    pub min_shrink: f64,
}

/// One array check inside an array-lln experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ArrayCheck {
    /// `X_ij = Z_i Z_j`, `eps_ij = W_i W_j` (or 1); `S_n` should approach `E(eps X)`.
    SymmetricMean {
        z: DistSpec,
        #[serde(default)]
        w: Option<DistSpec>,
        n_grid: Vec<usize>,
        tolerance: f64,
    },
    /// Exceedance of bootstrap pair weights of order `d` should thin out with n.
    Exceedance {
        d: f64,
        n_grid: Vec<usize>,
        m_rule: MRule,
        delta: f64,
    },
    /// Fixed `n`, growing `m`: `sum |eps| c` and `P(|sum eps X| > delta)` shrink.
    FixedNWeights {
        z: DistSpec,
        n: usize,
        m_grid: Vec<u64>,
        delta: f64,
        #[serde(default = "default_fixed_fraction")]
        min_fraction: f64,
    },
}

fn default_fixed_fraction() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayLlnConfig {
    pub checks: Vec<ArrayCheck>,
    pub seeds: usize,
    pub master_seed: u64,
}

fn default_band_coverage() -> [f64; 2] {
    [0.93, 0.97]
}

/// Coverage of bootstrap-t intervals over outer trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageConfig {
    pub kernel: BuiltinKernel,
    pub data: DataSpec,
    pub n: usize,
    pub m_rule: MRule,
    pub outer_trials: usize,
    pub replicates: usize,
    pub level: f64,
    pub master_seed: u64,
    #[serde(default = "default_band_coverage")]
    pub coverage_band: [f64; 2],
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub normalization: JackknifeNormalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Clt(CltConfig),
    ConsistencyFixedN(FixedNConfig),
    ConsistencyGrowing(GrowingConfig),
    Marcinkiewicz(MarcinkiewiczConfig),
    ArrayLln(ArrayLlnConfig),
    Coverage(CoverageConfig),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Clt(_) => "clt",
            ExperimentConfig::ConsistencyFixedN(_) => "consistency-fixed-n",
            ExperimentConfig::ConsistencyGrowing(_) => "consistency-growing",
            ExperimentConfig::Marcinkiewicz(_) => "marcinkiewicz",
            ExperimentConfig::ArrayLln(_) => "array-lln",
            ExperimentConfig::Coverage(_) => "coverage",
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::InvalidParameter(format!("{name} must be >= 1")))
            } else {
                Ok(())
            }
        };
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::InvalidParameter(format!("{name} must not be empty")))
            } else {
                Ok(())
            }
        };
        let min_n = |n: usize, min: usize| {
            if n < min {
                Err(Error::SampleTooSmall { min, got: n })
            } else {
                Ok(())
            }
        };
        match self {
            ExperimentConfig::Clt(c) => {
                c.data.validate()?;
                positive("replicates", c.replicates)?;
                min_n(c.n, 3)?;
                c.m_rule.check(c.n)?;
            }
            ExperimentConfig::ConsistencyFixedN(c) => {
                c.data.validate()?;
                positive("replicates", c.replicates)?;
                nonempty("m_grid", c.m_grid.len())?;
                min_n(c.n, 2)?;
                for &m in &c.m_grid {
                    MRule::Fixed(m).check(c.n)?;
                }
            }
            ExperimentConfig::ConsistencyGrowing(c) => {
                c.data.validate()?;
                positive("replicates", c.replicates)?;
                nonempty("n_grid", c.n_grid.len())?;
                for &n in &c.n_grid {
                    min_n(n, 2)?;
                    c.m_rule.check(n)?;
                }
            }
            ExperimentConfig::Marcinkiewicz(c) => {
                c.data.validate()?;
                positive("seeds", c.seeds)?;
                nonempty("n_grid", c.n_grid.len())?;
                if !(c.d > 2.0) {
                    return Err(Error::InvalidParameter(format!(
                        "d must exceed 2, got {}",
                        c.d
                    )));
                }
                for &n in &c.n_grid {
                    min_n(n, 2)?;
                    c.m_rule.check(n)?;
                }
            }
            ExperimentConfig::ArrayLln(c) => {
                positive("seeds", c.seeds)?;
                nonempty("checks", c.checks.len())?;
                for check in &c.checks {
                    match check {
                        ArrayCheck::SymmetricMean { z, w, n_grid, .. } => {
                            z.validate()?;
                            if let Some(w) = w {
                                w.validate()?;
                            }
                            nonempty("n_grid", n_grid.len())?;
                            for &n in n_grid {
                                min_n(n, 2)?;
                            }
                        }
                        ArrayCheck::Exceedance {
                            n_grid,
                            m_rule,
                            delta,
                            ..
                        } => {
                            nonempty("n_grid", n_grid.len())?;
                            for &n in n_grid {
                                m_rule.check(n)?;
                            }
                            if !(*delta > 0.0) {
                                return Err(Error::InvalidParameter(
                                    "delta must be positive".into(),
                                ));
                            }
                        }
                        ArrayCheck::FixedNWeights { z, n, m_grid, .. } => {
                            z.validate()?;
                            nonempty("m_grid", m_grid.len())?;
                            for &m in m_grid {
                                MRule::Fixed(m).check(*n)?;
                            }
                        }
                    }
                }
            }
            ExperimentConfig::Coverage(c) => {
                c.data.validate()?;
                positive("outer_trials", c.outer_trials)?;
                positive("replicates", c.replicates)?;
                min_n(c.n, 3)?;
                c.m_rule.check(c.n)?;
                if !(c.level > 0.0 && c.level < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "level must be in (0, 1), got {}",
                        c.level
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_rules() {
        assert_eq!(MRule::Fixed(7).apply(100), 7);
        assert_eq!(MRule::EqualN.apply(500), 500);
        assert_eq!(
            MRule::Power {
                c: 0.25,
                exponent: 2.0
            }
            .apply(200),
            10_000
        );
        assert_eq!(
            MRule::Power {
                c: 1.0,
                exponent: 3.0
            }
            .apply(50),
            125_000
        );
        assert_eq!(MRule::NLogN { c: 0.5 }.apply(100), 231);
        assert!(MRule::Fixed(1).check(10).is_err());
    }

    #[test]
    fn parses_clt_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind":"clt","kernel":"product",
                "data":{"iid":{"family":"normal","mean":1.0,"sd":1.0}},
                "n":500,"m_rule":"equal-n","replicates":2000,"master_seed":1}"#,
        )
        .unwrap();
        let ExperimentConfig::Clt(c) = cfg else {
            panic!()
        };
        assert_eq!(c.ks_cutoff, 0.05);
        assert_eq!(c.normalization, JackknifeNormalization::QuarterN);
        assert_eq!(c.m_rule.apply(c.n), 500);
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad = [
            r#"{"kind":"clt","kernel":"product","data":{"iid":{"family":"normal","mean":1.0,"sd":1.0}},"n":2,"m_rule":"equal-n","replicates":10,"master_seed":1}"#,
            r#"{"kind":"clt","kernel":"product","data":{"iid":{"family":"normal","mean":1.0,"sd":1.0}},"n":50,"m_rule":"equal-n","replicates":0,"master_seed":1}"#,
            r#"{"kind":"clt","kernel":"nope","data":{"iid":{"family":"normal","mean":1.0,"sd":1.0}},"n":50,"m_rule":"equal-n","replicates":1,"master_seed":1}"#,
            r#"{"kind":"marcinkiewicz","kernel":"product","data":{"family":"pareto","alpha":0.8,"x_min":1.0},"d":2.0,"n_grid":[50],"m_rule":"equal-n","seeds":5,"master_seed":1}"#,
            r#"{"kind":"coverage","kernel":"product","data":{"ar1":{"phi":1.5,"innovation_sd":1.0}},"n":50,"m_rule":"equal-n","outer_trials":2,"replicates":5,"level":0.9,"master_seed":1}"#,
        ];
        for text in bad {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }
}
