//! Bootstrap u- and v-statistics, the studentized pivot and the Hoeffding
//! split of the bootstrap deviation.
//!
//! With weights `w ~ Multinomial(m; 1/n, …, 1/n)`:
//!
//! ```text
//! U* = sum_{i != j} w_i w_j h(X_i, X_j) / (m(m-1))
//! V* = U* + sum_i w_i^2 h(X_i, X_i) / (m(m-1))
//! pivot = (U* - U_n) / (2 sigma_hat sqrt(Q)),   Q = sum_t (w_t/m - 1/n)^2
//! ```
//!
//! `U*` is normalised by `m(m-1)` as written, not by `sum_{i != j} w_i w_j`,
//! so `E_w U* = ((n-1)/n) U_n`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, Sample};
use crate::summary::quantile;
use crate::ustat::{self, JackknifeNormalization};
use crate::weights::{draw_weights, weight_dispersion, WeightVector};

fn check_weights(sample: &Sample, w: &WeightVector) -> Result<()> {
    if w.n() != sample.n() {
        return Err(Error::LengthMismatch {
            expected: sample.n(),
            got: w.n(),
        });
    }
    if w.m() < 2 {
        return Err(Error::BootstrapSizeTooSmall { min: 2, got: w.m() });
    }
    Ok(())
}

fn mm1(w: &WeightVector) -> f64 {
    let m = w.m() as f64;
    m * (m - 1.0)
}

fn support(w: &WeightVector) -> Vec<usize> {
    w.counts()
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| (c > 0).then_some(i))
        .collect()
}

/// `U*_{n,m}`; only pairs with both weights positive are evaluated.
pub fn bootstrap_u<K: Kernel + ?Sized>(
    kernel: &K,
    sample: &Sample,
    w: &WeightVector,
) -> Result<f64> {
    kernel.check_sample(sample)?;
    check_weights(sample, w)?;
    let idx = support(w);
    let c = w.counts();
    let mut total = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        let xi = sample.point(i);
        let mut acc = 0.0;
        for &j in &idx[a + 1..] {
            acc += c[j] as f64 * kernel.eval(xi, sample.point(j));
        }
        total += c[i] as f64 * acc;
    }
    Ok(2.0 * total / mm1(w))
}

fn diagonal_term<K: Kernel + ?Sized>(kernel: &K, sample: &Sample, w: &WeightVector) -> f64 {
    w.counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| {
            let x = sample.point(i);
            (c as f64).powi(2) * kernel.eval(x, x)
        })
        .sum::<f64>()
        / mm1(w)
}

/// `V*_{n,m} = U*_{n,m} + sum_i w_i^2 h(X_i, X_i) / (m(m-1))`.
pub fn bootstrap_v<K: Kernel + ?Sized>(
    kernel: &K,
    sample: &Sample,
    w: &WeightVector,
) -> Result<f64> {
    let u = bootstrap_u(kernel, sample, w)?;
    Ok(u + diagonal_term(kernel, sample, w))
}

/// `(U*, V*)` with one pass over the weight support.
pub fn bootstrap_uv<K: Kernel + ?Sized>(
    kernel: &K,
    sample: &Sample,
    w: &WeightVector,
) -> Result<(f64, f64)> {
    let u = bootstrap_u(kernel, sample, w)?;
    Ok((u, u + diagonal_term(kernel, sample, w)))
}

/// `(u_star - u_n) / (2 sqrt(sigma2_hat) sqrt(q))`; also serves `V*` with `V_n`.
pub fn studentized_pivot(u_star: f64, u_n: f64, sigma2_hat: f64, q: f64) -> Result<f64> {
    if !(sigma2_hat > 0.0) {
        return Err(Error::DegenerateNormalizer(format!(
            "jackknife variance is {sigma2_hat}"
        )));
    }
    if !(q > 0.0) {
        return Err(Error::DegenerateNormalizer(format!(
            "weight dispersion is {q}"
        )));
    }
    Ok((u_star - u_n) / (2.0 * sigma2_hat.sqrt() * q.sqrt()))
}

/// `U* - U_n = G + H` for coefficients `c_ij = w_i w_j/(m(m-1)) - 1/(n(n-1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HoeffdingSplit {
    /// `sum_{i != j} c_ij (h(X_i, X_j) - p_i - p_j)`
    pub g: f64,
    /// `sum_{i != j} c_ij (p_i + p_j)`
    pub h_lin: f64,
}

pub fn hoeffding_split<K: Kernel + ?Sized>(
    kernel: &K,
    sample: &Sample,
    w: &WeightVector,
    proj: &[f64],
) -> Result<HoeffdingSplit> {
    kernel.check_sample(sample)?;
    check_weights(sample, w)?;
    let n = sample.n();
    if n < 2 {
        return Err(Error::SampleTooSmall { min: 2, got: n });
    }
    if proj.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: proj.len(),
        });
    }
    let wm = mm1(w);
    let base = 1.0 / (n * (n - 1)) as f64;
    let c = w.counts();

    let mut g = 0.0;
    for i in 0..n {
        let xi = sample.point(i);
        let wi = c[i] as f64;
        let mut acc = 0.0;
        for j in (i + 1)..n {
            let cij = wi * c[j] as f64 / wm - base;
            acc += cij * (kernel.eval(xi, sample.point(j)) - proj[i] - proj[j]);
        }
        g += acc;
    }
    g *= 2.0;

    // sum_{j != i} c_ij = w_i (m - w_i)/(m(m-1)) - 1/n
    let m = w.m() as f64;
    let h_lin = 2.0
        * c.iter()
            .zip(proj)
            .map(|(&wi, p)| {
                let wi = wi as f64;
                p * (wi * (m - wi) / wm - 1.0 / n as f64)
            })
            .sum::<f64>();
    Ok(HoeffdingSplit { g, h_lin })
}

/// Dense symmetric kernel matrix for repeated bootstrap draws on fixed data.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn new<K: Kernel + ?Sized>(kernel: &K, sample: &Sample) -> Result<Self> {
        kernel.check_sample(sample)?;
        let n = sample.n();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            let xi = sample.point(i);
            values[i * n + i] = kernel.eval(xi, xi);
            for j in (i + 1)..n {
                let h = kernel.eval(xi, sample.point(j));
                values[i * n + j] = h;
                values[j * n + i] = h;
            }
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    fn check(&self, w: &WeightVector) -> Result<()> {
        if w.n() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: w.n(),
            });
        }
        if w.m() < 2 {
            return Err(Error::BootstrapSizeTooSmall { min: 2, got: w.m() });
        }
        Ok(())
    }

    /// `(U*, V*)` for one weight vector.
    pub fn bootstrap_uv(&self, w: &WeightVector) -> Result<(f64, f64)> {
        self.check(w)?;
        let wf: Vec<f64> = w.counts().iter().map(|&c| c as f64).collect();
        let mut full = 0.0;
        let mut diag = 0.0;
        for (i, &wi) in wf.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            full += wi * dot(self.row(i), &wf);
            diag += wi * wi * self.get(i, i);
        }
        let wm = mm1(w);
        let u = (full - diag) / wm;
        Ok((u, u + diag / wm))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// One bootstrap draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReplicate {
    pub u_star: f64,
    pub v_star: f64,
    pub q: f64,
    /// `None` when the normalizer is degenerate.
    pub pivot_u: Option<f64>,
    pub pivot_v: Option<f64>,
    pub weight_checksum: u64,
}

/// Data-side quantities shared by every replicate on one sample.
#[derive(Debug, Clone)]
pub struct Bootstrapper {
    pub u_n: f64,
    pub v_n: f64,
    pub sigma2_hat: f64,
    matrix: KernelMatrix,
}

impl Bootstrapper {
    pub fn new<K: Kernel + ?Sized>(
        kernel: &K,
        sample: &Sample,
        normalization: JackknifeNormalization,
    ) -> Result<Self> {
        let summary = ustat::summarize(kernel, sample, normalization)?;
        let jk = summary.jackknife.ok_or(Error::SampleTooSmall {
            min: 3,
            got: sample.n(),
        })?;
        Ok(Self {
            u_n: summary.u,
            v_n: summary.v,
            sigma2_hat: jk.sigma2_hat,
            matrix: KernelMatrix::new(kernel, sample)?,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn replicate(&self, w: &WeightVector) -> Result<BootstrapReplicate> {
        let (u_star, v_star) = self.matrix.bootstrap_uv(w)?;
        let q = weight_dispersion(w).q;
        Ok(BootstrapReplicate {
            u_star,
            v_star,
            q,
            pivot_u: studentized_pivot(u_star, self.u_n, self.sigma2_hat, q).ok(),
            pivot_v: studentized_pivot(v_star, self.v_n, self.sigma2_hat, q).ok(),
            weight_checksum: w.counts().iter().sum(),
        })
    }
}

/// Two-sided bootstrap-t interval for `theta = E h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub u_n: f64,
    pub sigma2_hat: f64,
    /// Replicates with a usable pivot.
    pub used: usize,
    /// Replicates dropped for a degenerate normalizer.
    pub dropped: usize,
}

/// Inverts empirical pivot quantiles around `U_n` on the scale
/// `2 sigma_hat / sqrt(n)` of `U_n - theta`.
pub fn bootstrap_ci<K: Kernel + ?Sized, R: Rng + ?Sized>(
    kernel: &K,
    sample: &Sample,
    m: u64,
    replicates: usize,
    level: f64,
    rng: &mut R,
) -> Result<Interval> {
    bootstrap_ci_with(
        kernel,
        sample,
        m,
        replicates,
        level,
        JackknifeNormalization::default(),
        rng,
    )
}

pub fn bootstrap_ci_with<K: Kernel + ?Sized, R: Rng + ?Sized>(
    kernel: &K,
    sample: &Sample,
    m: u64,
    replicates: usize,
    level: f64,
    normalization: JackknifeNormalization,
    rng: &mut R,
) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "level must be in (0, 1), got {level}"
        )));
    }
    if replicates == 0 {
        return Err(Error::Empty("replicate set"));
    }
    if m < 2 {
        return Err(Error::BootstrapSizeTooSmall { min: 2, got: m });
    }
    let boot = Bootstrapper::new(kernel, sample, normalization)?;
    let mut pivots = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let w = draw_weights(sample.n(), m, rng)?;
        if let Some(t) = boot.replicate(&w)?.pivot_u {
            pivots.push(t);
        }
    }
    interval_from_pivots(&mut pivots, replicates, &boot, level)
}

pub(crate) fn interval_from_pivots(
    pivots: &mut [f64],
    replicates: usize,
    boot: &Bootstrapper,
    level: f64,
) -> Result<Interval> {
    if pivots.is_empty() {
        return Err(Error::DegenerateNormalizer(
            "every replicate had a degenerate normalizer".into(),
        ));
    }
    pivots.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let lo_q = quantile(pivots, alpha / 2.0);
    let hi_q = quantile(pivots, 1.0 - alpha / 2.0);
    let scale = 2.0 * boot.sigma2_hat.sqrt() / (boot.n() as f64).sqrt();
    Ok(Interval {
        lower: boot.u_n - hi_q * scale,
        upper: boot.u_n - lo_q * scale,
        level,
        u_n: boot.u_n,
        sigma2_hat: boot.sigma2_hat,
        used: pivots.len(),
        dropped: replicates - pivots.len(),
    })
}
