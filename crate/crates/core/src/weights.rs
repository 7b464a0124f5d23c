//! Multinomial m-out-of-n bootstrap weights.
//!
//! Resampling `m` indices with replacement from `{1, …, n}` is equivalent
//! to drawing the count vector `w ~ Multinomial(m; 1/n, …, 1/n)`. Counts are
//! generated cell by cell from conditional binomials, so a draw costs O(n)
//! regardless of `m`.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};

/// Bootstrap counts `w_i`, summing to `m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightVector {
    counts: Vec<u64>,
    m: u64,
}

impl WeightVector {
    /// Wraps explicit counts; `m` is their sum.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Empty("weight vector"));
        }
        let m = counts.iter().sum();
        if m == 0 {
            return Err(Error::BootstrapSizeTooSmall { min: 1, got: 0 });
        }
        Ok(Self { counts, m })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    /// Counts reordered so that the k-th entry is `self.counts()[perm[k]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: perm.len(),
            });
        }
        Self::from_counts(perm.iter().map(|&k| self.counts[k]).collect())
    }

    /// Comma-separated counts, one CSV row.
    pub fn to_csv_row(&self) -> String {
        let cells: Vec<String> = self.counts.iter().map(u64::to_string).collect();
        cells.join(",")
    }
}

/// Draws `w ~ Multinomial(m; 1/n, …, 1/n)`.
pub fn draw_weights<R: Rng + ?Sized>(n: usize, m: u64, rng: &mut R) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::Empty("weight vector"));
    }
    if m == 0 {
        return Err(Error::BootstrapSizeTooSmall { min: 1, got: 0 });
    }
    let mut counts = Vec::with_capacity(n);
    let mut remaining = m;
    for i in 0..n - 1 {
        if remaining == 0 {
            counts.push(0);
            continue;
        }
        let p = 1.0 / (n - i) as f64;
        let c = Binomial::new(remaining, p)
            .expect("probability in (0, 1]")
            .sample(rng);
        counts.push(c);
        remaining -= c;
    }
    counts.push(remaining);
    debug_assert_eq!(counts.iter().sum::<u64>(), m);
    Ok(WeightVector { counts, m })
}

/// `Q = sum_t (w_t/m - 1/n)^2` and its expectation `(1 - 1/n)/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dispersion {
    pub q: f64,
    pub expected: f64,
}

pub fn weight_dispersion(w: &WeightVector) -> Dispersion {
    let n = w.n() as f64;
    let m = w.m() as f64;
    // Exact zero when every count equals m/n.
    let q = if w.m().is_multiple_of(w.n() as u64)
        && w.counts.iter().all(|&c| c == w.m() / w.n() as u64)
    {
        0.0
    } else {
        w.counts
            .iter()
            .map(|&c| {
                let d = c as f64 / m - 1.0 / n;
                d * d
            })
            .sum()
    };
    Dispersion {
        q,
        expected: (1.0 - 1.0 / n) / m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Lane, StreamFactory};

    #[test]
    fn single_cell_gets_everything() {
        let mut rng = StreamFactory::new(1).stream(0, Lane::Weights);
        for m in [1, 7, 1_000_000] {
            assert_eq!(draw_weights(1, m, &mut rng).unwrap().counts(), &[m]);
        }
    }

    #[test]
    fn rejects_empty_and_zero() {
        let mut rng = StreamFactory::new(1).stream(0, Lane::Weights);
        assert!(draw_weights(0, 5, &mut rng).is_err());
        assert!(draw_weights(5, 0, &mut rng).is_err());
        assert!(WeightVector::from_counts(vec![0, 0]).is_err());
    }

    #[test]
    fn sums_to_m_for_huge_m() {
        let mut rng = StreamFactory::new(3).stream(0, Lane::Weights);
        let w = draw_weights(200, 8_000_000, &mut rng).unwrap();
        assert_eq!(w.counts().iter().sum::<u64>(), 8_000_000);
    }

    #[test]
    fn binomial_marginal_moments() {
        let (n, m, draws) = (5usize, 10_000u64, 10_000usize);
        let f = StreamFactory::new(17);
        let mut sums = vec![0.0; n];
        let mut sq = vec![0.0; n];
        for d in 0..draws {
            let w = draw_weights(n, m, &mut f.stream(d as u64, Lane::Weights)).unwrap();
            assert_eq!(w.counts().iter().sum::<u64>(), m);
            for (i, &c) in w.counts().iter().enumerate() {
                sums[i] += c as f64;
                sq[i] += (c as f64).powi(2);
            }
        }
        let p = 1.0 / n as f64;
        let mean = m as f64 * p;
        let var = m as f64 * p * (1.0 - p);
        let se = (var / draws as f64).sqrt();
        for i in 0..n {
            let mu = sums[i] / draws as f64;
            let v = sq[i] / draws as f64 - mu * mu;
            assert!((mu - mean).abs() < 3.0 * se, "cell {i}: mean {mu}");
            assert!((v - var).abs() < 0.05 * var, "cell {i}: var {v}");
        }
    }

    #[test]
    fn dispersion_examples() {
        let d = weight_dispersion(&WeightVector::from_counts(vec![2, 0]).unwrap());
        assert_eq!(d.q, 0.5);
        assert_eq!(d.expected, 0.25);
        assert_eq!(
            weight_dispersion(&WeightVector::from_counts(vec![1, 1]).unwrap()).q,
            0.0
        );
        assert_eq!(
            weight_dispersion(&WeightVector::from_counts(vec![3, 3, 3]).unwrap()).q,
            0.0
        );
        assert!(weight_dispersion(&WeightVector::from_counts(vec![3, 3, 2]).unwrap()).q > 0.0);
    }

    #[test]
    fn csv_row() {
        assert_eq!(
            WeightVector::from_counts(vec![2, 0, 5])
                .unwrap()
                .to_csv_row(),
            "2,0,5"
        );
    }
}
