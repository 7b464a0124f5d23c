//! u- and v-statistics, leave-one-out statistics and the jackknife
//! variance estimate, all from a single O(n²) pass over unordered pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, Sample};

/// Accumulation mode for pair sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Summation {
    /// Plain left-to-right addition in index order.
    #[default]
    Plain,
    /// Neumaier-compensated addition, same order.
    Compensated,
}

/// Row sums, total and diagonal of the kernel matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSums {
    /// Ordered-pair sum `sum_{i != j} h(X_i, X_j)`; always equals the sum of `row`.
    pub total: f64,
    /// `row[i] = sum_{j != i} h(X_i, X_j)`.
    pub row: Vec<f64>,
    /// `diag[i] = h(X_i, X_i)`.
    pub diag: Vec<f64>,
}

impl PairSums {
    pub fn n(&self) -> usize {
        self.row.len()
    }

    pub fn u(&self) -> f64 {
        let n = self.n() as f64;
        self.total / (n * (n - 1.0))
    }

    /// `V_n = ((n-1)/n) U_n + n^-2 sum_i h(X_i, X_i)`.
    pub fn v(&self) -> f64 {
        let n = self.n() as f64;
        (n - 1.0) / n * self.u() + self.diag.iter().sum::<f64>() / (n * n)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    sum: f64,
    comp: f64,
}

impl Acc {
    #[inline]
    fn add_compensated(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn require_n(sample_n: usize, min: usize) -> Result<()> {
    if sample_n < min {
        return Err(Error::SampleTooSmall { min, got: sample_n });
    }
    Ok(())
}

pub fn pair_sums<K: Kernel + ?Sized>(kernel: &K, sample: &Sample) -> Result<PairSums> {
    pair_sums_with(kernel, sample, Summation::Plain)
}

/// Single pass over `i < j`; each value is added to rows `i` and `j`.
pub fn pair_sums_with<K: Kernel + ?Sized>(
    kernel: &K,
    sample: &Sample,
    summation: Summation,
) -> Result<PairSums> {
    kernel.check_sample(sample)?;
    let n = sample.n();
    require_n(n, 2)?;

    let diag: Vec<f64> = sample.points().map(|x| kernel.eval(x, x)).collect();
    let row = match summation {
        Summation::Plain => {
            let mut row = vec![0.0; n];
            for i in 0..n {
                let xi = sample.point(i);
                let mut acc = 0.0;
                for (j, rj) in row.iter_mut().enumerate().skip(i + 1) {
                    let h = kernel.eval(xi, sample.point(j));
                    acc += h;
                    *rj += h;
                }
                row[i] += acc;
            }
            row
        }
        Summation::Compensated => {
            let mut row = vec![Acc::default(); n];
            for i in 0..n {
                let xi = sample.point(i);
                for j in (i + 1)..n {
                    let h = kernel.eval(xi, sample.point(j));
                    row[i].add_compensated(h);
                    row[j].add_compensated(h);
                }
            }
            row.into_iter().map(Acc::value).collect()
        }
    };
    let total = match summation {
        Summation::Plain => row.iter().sum(),
        Summation::Compensated => {
            let mut acc = Acc::default();
            row.iter().for_each(|&r| acc.add_compensated(r));
            acc.value()
        }
    };
    if !total.is_finite() {
        return Err(Error::InvalidParameter(
            "kernel pair sum is not finite".into(),
        ));
    }
    Ok(PairSums { total, row, diag })
}

/// `U_n = sum_{i != j} h(X_i, X_j) / (n(n-1))`.
pub fn u_statistic<K: Kernel + ?Sized>(kernel: &K, sample: &Sample) -> Result<f64> {
    Ok(pair_sums(kernel, sample)?.u())
}

/// `V_n = sum_{i, j} h(X_i, X_j) / n²`; for `n = 1` this is `h(X_1, X_1)`.
pub fn v_statistic<K: Kernel + ?Sized>(kernel: &K, sample: &Sample) -> Result<f64> {
    kernel.check_sample(sample)?;
    if sample.n() == 1 {
        let x = sample.point(0);
        return Ok(kernel.eval(x, x));
    }
    Ok(pair_sums(kernel, sample)?.v())
}

/// Leave-one-out u-statistics `U^i_{n-1} = (T - 2 S_i) / ((n-1)(n-2))`.
pub fn deleted_u_all(sums: &PairSums, n: usize) -> Result<Vec<f64>> {
    require_n(n, 3)?;
    if sums.n() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: sums.n(),
        });
    }
    let denom = ((n - 1) * (n - 2)) as f64;
    Ok(sums
        .row
        .iter()
        .map(|s| (sums.total - 2.0 * s) / denom)
        .collect())
}

/// Constant multiplying `sum_i (U^i_{n-1} - U_n)^2` in the jackknife estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JackknifeNormalization {
    /// `n / 4`: consistent for `Var(htilde(X_1))`.
    #[default]
    QuarterN,
    /// `n (n - 1)`, kept for comparison; grows like `n²/4` times the target.
    NTimesNMinusOne,
    Custom(f64),
}

impl JackknifeNormalization {
    pub fn factor(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            JackknifeNormalization::QuarterN => n / 4.0,
            JackknifeNormalization::NTimesNMinusOne => n * (n - 1.0),
            JackknifeNormalization::Custom(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JackknifeEstimate {
    pub deleted: Vec<f64>,
    pub sigma2_hat: f64,
    pub normalization: f64,
}

pub fn jackknife_sigma2(deleted: &[f64], u_n: f64, n: usize) -> Result<JackknifeEstimate> {
    jackknife_sigma2_with(deleted, u_n, n, JackknifeNormalization::default())
}

pub fn jackknife_sigma2_with(
    deleted: &[f64],
    u_n: f64,
    n: usize,
    normalization: JackknifeNormalization,
) -> Result<JackknifeEstimate> {
    require_n(n, 3)?;
    if deleted.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: deleted.len(),
        });
    }
    let factor = normalization.factor(n);
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "jackknife normalization must be positive, got {factor}"
        )));
    }
    let spread: f64 = deleted.iter().map(|d| (d - u_n) * (d - u_n)).sum();
    Ok(JackknifeEstimate {
        deleted: deleted.to_vec(),
        sigma2_hat: factor * spread,
        normalization: factor,
    })
}

/// `U_n`, `V_n` and the jackknife estimate from one pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub u: f64,
    pub v: f64,
    pub jackknife: Option<JackknifeEstimate>,
}

pub fn summarize<K: Kernel + ?Sized>(
    kernel: &K,
    sample: &Sample,
    normalization: JackknifeNormalization,
) -> Result<Summary> {
    let sums = pair_sums(kernel, sample)?;
    let n = sample.n();
    let u = sums.u();
    let jackknife = if n >= 3 {
        let deleted = deleted_u_all(&sums, n)?;
        Some(jackknife_sigma2_with(&deleted, u, n, normalization)?)
    } else {
        None
    };
    Ok(Summary {
        n,
        u,
        v: sums.v(),
        jackknife,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{iid_sample, DistSpec};
    use crate::kernel::BuiltinKernel;
    use crate::rng::{Lane, StreamFactory};
    use rand::Rng;

    fn one_two_three() -> Sample {
        Sample::from_scalars(vec![1.0, 2.0, 3.0]).unwrap()
    }

    fn naive_u<K: Kernel>(k: &K, s: &Sample) -> f64 {
        let n = s.n();
        let mut t = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    t += k.eval(s.point(i), s.point(j));
                }
            }
        }
        t / (n * (n - 1)) as f64
    }

    fn naive_v<K: Kernel>(k: &K, s: &Sample) -> f64 {
        let n = s.n();
        let mut t = 0.0;
        for i in 0..n {
            for j in 0..n {
                t += k.eval(s.point(i), s.point(j));
            }
        }
        t / (n * n) as f64
    }

    fn random_sample(rng: &mut impl Rng, k: BuiltinKernel, n: usize) -> Sample {
        let coords = (0..n * k.dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Sample::from_flat(k.dim(), coords).unwrap()
    }

    #[test]
    fn pair_sums_of_1_2_3() {
        let s = pair_sums(&BuiltinKernel::Product, &one_two_three()).unwrap();
        assert_eq!(s.row, vec![5.0, 8.0, 9.0]);
        assert_eq!(s.total, 22.0);
        assert_eq!(s.diag, vec![1.0, 4.0, 9.0]);
    }

    #[test]
    fn pair_sums_two_points() {
        let s = pair_sums(
            &BuiltinKernel::Gini,
            &Sample::from_scalars(vec![0.0, 1.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(s.total, 2.0);
        assert_eq!(s.row, vec![1.0, 1.0]);
        assert_eq!(s.diag, vec![0.0, 0.0]);
        let s = pair_sums(
            &BuiltinKernel::Product,
            &Sample::from_scalars(vec![2.0, -3.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(s.total, -12.0);
        assert_eq!(s.row, vec![-6.0, -6.0]);
    }

    #[test]
    fn pair_sums_rejects_small_and_mismatched() {
        let one = Sample::from_scalars(vec![1.0]).unwrap();
        assert!(matches!(
            pair_sums(&BuiltinKernel::Product, &one),
            Err(Error::SampleTooSmall { .. })
        ));
        assert!(matches!(
            pair_sums(&BuiltinKernel::Kendall, &one_two_three()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn compensated_matches_plain_on_benign_data() {
        let mut rng = StreamFactory::new(9).stream(0, Lane::Aux);
        let s = random_sample(&mut rng, BuiltinKernel::Gini, 50);
        let a = pair_sums_with(&BuiltinKernel::Gini, &s, Summation::Plain).unwrap();
        let b = pair_sums_with(&BuiltinKernel::Gini, &s, Summation::Compensated).unwrap();
        assert!((a.total - b.total).abs() < 1e-10);
    }

    #[test]
    fn u_and_v_of_1_2_3() {
        let k = BuiltinKernel::Product;
        assert!((u_statistic(&k, &one_two_three()).unwrap() - 22.0 / 6.0).abs() < 1e-15);
        assert!((v_statistic(&k, &one_two_three()).unwrap() - 4.0).abs() < 1e-15);
        let single = Sample::from_scalars(vec![1.7]).unwrap();
        assert_eq!(v_statistic(&k, &single).unwrap(), 1.7 * 1.7);
        assert!(u_statistic(&k, &single).is_err());
    }

    #[test]
    fn variance_kernel_gives_sample_variance() {
        let mut rng = StreamFactory::new(4).stream(0, Lane::Aux);
        for _ in 0..20 {
            let n = rng.random_range(2..40);
            let s = random_sample(&mut rng, BuiltinKernel::Variance, n);
            let xs = s.as_flat();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let u = u_statistic(&BuiltinKernel::Variance, &s).unwrap();
            assert!((u - var).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_naive_double_loops() {
        let mut rng = StreamFactory::new(21).stream(0, Lane::Aux);
        for _ in 0..100 {
            for k in BuiltinKernel::ALL {
                let n = rng.random_range(2..=6);
                let s = random_sample(&mut rng, k, n);
                let sums = pair_sums(&k, &s).unwrap();
                assert!((sums.u() - naive_u(&k, &s)).abs() < 1e-12);
                assert!((sums.v() - naive_v(&k, &s)).abs() < 1e-12);
                let diag: f64 = sums.diag.iter().sum();
                let rel = (n as f64 - 1.0) / n as f64 * sums.u() + diag / (n * n) as f64;
                assert_eq!(sums.v(), rel);
            }
        }
    }

    #[test]
    fn deleted_examples() {
        let sums = pair_sums(&BuiltinKernel::Product, &one_two_three()).unwrap();
        assert_eq!(deleted_u_all(&sums, 3).unwrap(), vec![6.0, 3.0, 2.0]);
        let two = pair_sums(
            &BuiltinKernel::Product,
            &Sample::from_scalars(vec![1.0, 2.0]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            deleted_u_all(&two, 2),
            Err(Error::SampleTooSmall { min: 3, .. })
        ));
    }

    #[test]
    fn deleted_matches_brute_force() {
        let mut rng = StreamFactory::new(22).stream(0, Lane::Aux);
        for _ in 0..50 {
            for k in BuiltinKernel::ALL {
                let n = rng.random_range(3..=8);
                let s = random_sample(&mut rng, k, n);
                let deleted = deleted_u_all(&pair_sums(&k, &s).unwrap(), n).unwrap();
                for (i, d) in deleted.iter().enumerate() {
                    let want = naive_u(&k, &s.without(i).unwrap());
                    assert!((d - want).abs() < 1e-12, "{k} n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn jackknife_zero_spread() {
        let est = jackknife_sigma2(&[2.0; 5], 2.0, 5).unwrap();
        assert_eq!(est.sigma2_hat, 0.0);
        assert_eq!(est.normalization, 1.25);
        assert!(jackknife_sigma2(&[1.0, 1.0], 1.0, 2).is_err());
        assert!(jackknife_sigma2(&[1.0, 1.0, 1.0], 1.0, 4).is_err());
    }

    #[test]
    fn jackknife_printed_normalization_is_selectable() {
        let est = jackknife_sigma2_with(
            &[1.0, 2.0, 3.0],
            2.0,
            3,
            JackknifeNormalization::NTimesNMinusOne,
        )
        .unwrap();
        assert_eq!(est.normalization, 6.0);
        assert_eq!(est.sigma2_hat, 12.0);
    }

    fn sigma2_for(k: BuiltinKernel, spec: &DistSpec, n: usize, seed: u64, idx: u64) -> f64 {
        let s = iid_sample(
            spec,
            n,
            &mut StreamFactory::new(seed).stream(idx, Lane::Data),
        )
        .unwrap();
        summarize(&k, &s, JackknifeNormalization::QuarterN)
            .unwrap()
            .jackknife
            .unwrap()
            .sigma2_hat
    }

    #[test]
    fn jackknife_calibration_product_and_variance() {
        let p = sigma2_for(
            BuiltinKernel::Product,
            &DistSpec::Normal { mean: 1.0, sd: 1.0 },
            2000,
            1,
            0,
        );
        assert!((p - 1.0).abs() < 0.15, "{p}");
        let v = sigma2_for(
            BuiltinKernel::Variance,
            &DistSpec::Normal { mean: 0.0, sd: 1.0 },
            2000,
            1,
            1,
        );
        assert!((v - 0.5).abs() < 0.1, "{v}");
    }

    #[test]
    fn jackknife_consistency_improves_with_n() {
        let spec = DistSpec::Normal { mean: 1.0, sd: 1.0 };
        let trials = 50;
        let closer = (0..trials)
            .filter(|&t| {
                let small = sigma2_for(BuiltinKernel::Product, &spec, 500, 77, 2 * t);
                let large = sigma2_for(BuiltinKernel::Product, &spec, 2000, 77, 2 * t + 1);
                (large - 1.0).abs() < (small - 1.0).abs()
            })
            .count();
        assert!(closer as f64 >= 0.8 * trials as f64, "{closer}/{trials}");
    }
}
