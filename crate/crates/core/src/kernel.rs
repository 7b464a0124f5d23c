//! Observations, samples and symmetric order-2 kernels.
//!
//! A [`Sample`] stores its points row-major in one flat buffer; kernels see
//! each observation as a `&[f64]` slice of length `dim`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ustat;

/// One owned d-dimensional observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("observation"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(Self(coords))
    }

    pub fn scalar(x: f64) -> Result<Self> {
        Self::new(vec![x])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// An ordered list of `n >= 1` finite observations of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    dim: usize,
    coords: Vec<f64>,
}

impl Sample {
    /// Builds a sample from a flat row-major buffer.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::Empty("sample"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch {
                expected: (coords.len() / dim + 1) * dim,
                got: coords.len(),
            });
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index: pos / dim });
        }
        Ok(Self { dim, coords })
    }

    /// One-dimensional sample.
    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::from_flat(1, values)
    }

    pub fn from_observations(points: &[Observation]) -> Result<Self> {
        let first = points.first().ok_or(Error::Empty("sample"))?;
        let dim = first.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            coords.extend_from_slice(p.coords());
        }
        Self::from_flat(dim, coords)
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Sample with point `i` removed.
    pub fn without(&self, i: usize) -> Result<Self> {
        let mut coords = self.coords.clone();
        coords.drain(i * self.dim..(i + 1) * self.dim);
        Self::from_flat(self.dim, coords)
    }

    /// Points reordered so that the k-th point is `self.point(perm[k])`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: perm.len(),
            });
        }
        let mut coords = Vec::with_capacity(self.coords.len());
        for &k in perm {
            coords.extend_from_slice(self.point(k));
        }
        Self::from_flat(self.dim, coords)
    }
}

/// A symmetric real-valued function of two observations.
///
/// Implementations must satisfy `eval(x, y) == eval(y, x)` bit for bit and
/// be deterministic.
pub trait Kernel: Sync {
    fn id(&self) -> &str;

    /// Required observation dimension.
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], y: &[f64]) -> f64;

    fn check_sample(&self, sample: &Sample) -> Result<()> {
        if sample.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: sample.dim(),
            });
        }
        Ok(())
    }
}

/// The built-in kernel catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinKernel {
    /// `x * y`
    Product,
    /// `(x - y)^2 / 2`; its u-statistic is the unbiased sample variance.
    Variance,
    /// `|x - y|`, Gini's mean difference.
    Gini,
    /// `sign((x1 - y1)(x2 - y2))` on 2-d points, Kendall's tau.
    Kendall,
    /// `sign(xy) * sqrt(|xy|)`; has finite fractional moments on heavy tails.
    SignedSqrtProduct,
    /// Identically zero.
    Zero,
}

impl BuiltinKernel {
    pub const ALL: [BuiltinKernel; 6] = [
        BuiltinKernel::Product,
        BuiltinKernel::Variance,
        BuiltinKernel::Gini,
        BuiltinKernel::Kendall,
        BuiltinKernel::SignedSqrtProduct,
        BuiltinKernel::Zero,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BuiltinKernel::Product => "product",
            BuiltinKernel::Variance => "variance",
            BuiltinKernel::Gini => "gini",
            BuiltinKernel::Kendall => "kendall",
            BuiltinKernel::SignedSqrtProduct => "signed-sqrt-product",
            BuiltinKernel::Zero => "zero",
        }
    }
}

impl fmt::Display for BuiltinKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BuiltinKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinKernel::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownKernel(s.to_string()))
    }
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Kernel for BuiltinKernel {
    fn id(&self) -> &str {
        self.as_str()
    }

    fn dim(&self) -> usize {
        match self {
            BuiltinKernel::Kendall => 2,
            _ => 1,
        }
    }

    #[inline]
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            BuiltinKernel::Product => x[0] * y[0],
            BuiltinKernel::Variance => {
                let d = x[0] - y[0];
                0.5 * d * d
            }
            BuiltinKernel::Gini => (x[0] - y[0]).abs(),
            BuiltinKernel::Kendall => sign((x[0] - y[0]) * (x[1] - y[1])),
            BuiltinKernel::SignedSqrtProduct => {
                let p = x[0] * y[0];
                sign(p) * p.abs().sqrt()
            }
            BuiltinKernel::Zero => 0.0,
        }
    }
}

/// Evaluates a catalog kernel by id.
pub fn eval_builtin(kernel_id: &str, x: &Observation, y: &Observation) -> Result<f64> {
    let kernel: BuiltinKernel = kernel_id.parse()?;
    for obs in [x, y] {
        if obs.dim() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                got: obs.dim(),
            });
        }
    }
    Ok(kernel.eval(x.coords(), y.coords()))
}

/// Empirical Hoeffding projections of a kernel on a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionSummary {
    /// `htilde[i] = S_i / (n - 1) - U_n`, with `S_i` the i-th off-diagonal row sum.
    pub htilde: Vec<f64>,
    /// Sample variance of `htilde` (divisor `n - 1`).
    pub var_htilde: f64,
    /// Variance of the `n(n-1)/2` off-diagonal kernel values around `U_n`.
    pub var_kernel: f64,
}

/// Relative threshold used by [`degeneracy_check`] when none is configured.
pub const DEFAULT_DEGENERACY_THRESHOLD: f64 = 0.01;

pub fn empirical_projection<K: Kernel + ?Sized>(
    kernel: &K,
    sample: &Sample,
) -> Result<ProjectionSummary> {
    let sums = ustat::pair_sums(kernel, sample)?;
    let n = sample.n();
    let u = sums.total / (n * (n - 1)) as f64;
    let htilde: Vec<f64> = sums.row.iter().map(|s| s / (n - 1) as f64 - u).collect();

    // Sum of S_i/(n-1) over i equals n * U_n, so the projections cancel.
    let scale = sums.row.iter().map(|s| s.abs()).sum::<f64>() / (n - 1) as f64;
    let centre: f64 = htilde.iter().sum();
    debug_assert!(
        centre.abs() <= 1e-9 * scale.max(1.0),
        "projection sum {centre} not centred"
    );

    let var_htilde = htilde.iter().map(|h| h * h).sum::<f64>() / (n - 1) as f64;

    let mut ss = 0.0;
    for i in 0..n {
        let xi = sample.point(i);
        for j in (i + 1)..n {
            let d = kernel.eval(xi, sample.point(j)) - u;
            ss += d * d;
        }
    }
    let var_kernel = ss / (n * (n - 1) / 2) as f64;

    Ok(ProjectionSummary {
        htilde,
        var_htilde,
        var_kernel,
    })
}

/// Outcome of [`degeneracy_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degeneracy {
    NonDegenerate,
    NearDegenerate,
}

/// Flags kernels whose projection variance is negligible next to the
/// variance of the kernel itself.
pub fn degeneracy_check(summary: &ProjectionSummary, threshold: f64) -> Degeneracy {
    if summary.var_htilde <= 0.0 || summary.var_htilde < threshold * summary.var_kernel {
        Degeneracy::NearDegenerate
    } else {
        Degeneracy::NonDegenerate
    }
}
