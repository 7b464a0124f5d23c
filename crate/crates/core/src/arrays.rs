//! Randomly weighted double arrays `sum_{i,j} eps_ij X_ij` and the
//! empirical checks used for the array laws of large numbers.
//!
//! Almost-sure "infinitely often" conditions are not observable on finite
//! runs; the harness looks at exceedance *rates* along an n-grid instead.

use std::io::{Read, Write};

use rand::Rng;

use crate::datagen::DistSpec;
use crate::error::{Error, Result};
use crate::rng::{Lane, Stream, StreamFactory};
use crate::weights::draw_weights;

/// Largest side length the harness will allocate.
pub const MAX_SIDE: usize = 2000;

/// Dense row-major n×n array.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareArray {
    n: usize,
    values: Vec<f64>,
}

impl SquareArray {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        Ok(Self { n, values })
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self {
            n,
            values: vec![value; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self { n, values }
    }

    /// `a_i * b_j`.
    pub fn outer(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        Ok(Self::from_fn(a.len(), |i, j| a[i] * b[j]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        for row in self.values.chunks_exact(self.n.max(1)) {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let rows = crate::io::read_numeric_rows(input, None)?;
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::MalformedCsv {
                    row: r + 1,
                    column: row.len().min(n) + 1,
                    message: format!("expected {n} columns for a square array, got {}", row.len()),
                });
            }
            values.extend(row);
        }
        Self::new(n, values)
    }
}

fn same_shape(a: &SquareArray, b: &SquareArray) -> Result<()> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            got: b.n,
        });
    }
    Ok(())
}

/// `sum_{i,j} eps_ij x_ij`.
pub fn weighted_array_sum(x: &SquareArray, eps: &SquareArray) -> Result<f64> {
    same_shape(x, eps)?;
    Ok(x.values.iter().zip(&eps.values).map(|(a, b)| a * b).sum())
}

/// Fraction of cells with `|eps_ij - c_ij| > delta * a_ij`.
pub fn exceedance_rate(
    eps: &SquareArray,
    centers: &SquareArray,
    scales: &SquareArray,
    delta: f64,
) -> Result<f64> {
    same_shape(eps, centers)?;
    same_shape(eps, scales)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if let Some(bad) = scales.values.iter().find(|&&a| !(a > 0.0)) {
        return Err(Error::InvalidParameter(format!("non-positive scale {bad}")));
    }
    if eps.n == 0 {
        return Ok(0.0);
    }
    let hits = eps
        .values
        .iter()
        .zip(&centers.values)
        .zip(&scales.values)
        .filter(|((e, c), a)| (*e - *c).abs() > delta * **a)
        .count();
    Ok(hits as f64 / eps.values.len() as f64)
}

/// `S_n = sum_{i != j} eps_ij x_ij / (n(n-1))`.
pub fn symmetric_array_mean(eps: &SquareArray, x: &SquareArray) -> Result<f64> {
    same_shape(eps, x)?;
    let n = x.n;
    if n < 2 {
        return Err(Error::SampleTooSmall { min: 2, got: n });
    }
    let mut total = 0.0;
    for i in 0..n {
        let (er, xr) = (
            &eps.values[i * n..(i + 1) * n],
            &x.values[i * n..(i + 1) * n],
        );
        let row: f64 = er.iter().zip(xr).map(|(a, b)| a * b).sum();
        total += row - er[i] * xr[i];
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// `m^{-(d-2)} u_star`.
pub fn marcinkiewicz_scale(u_star: f64, m: u64, d: f64) -> Result<f64> {
    if !(d > 2.0) {
        return Err(Error::InvalidParameter(format!("d must exceed 2, got {d}")));
    }
    if m == 0 {
        return Err(Error::BootstrapSizeTooSmall { min: 1, got: 0 });
    }
    Ok((m as f64).powf(-(d - 2.0)) * u_star)
}

pub type ArrayGen = Box<dyn Fn(usize, u64, &mut Stream) -> Result<SquareArray> + Send + Sync>;
pub type ArrayMap = Box<dyn Fn(usize, u64) -> SquareArray + Send + Sync>;
pub type SizeRule = Box<dyn Fn(usize) -> u64 + Send + Sync>;

/// A family of weighted arrays indexed by `n`, with `m = m_rule(n)`.
pub struct ArraySpec {
    pub x_gen: ArrayGen,
    pub eps_gen: ArrayGen,
    pub centers: ArrayMap,
    pub scales: ArrayMap,
    pub m_rule: SizeRule,
}

/// One realization of an [`ArraySpec`].
#[derive(Debug, Clone)]
pub struct ArrayInstance {
    pub n: usize,
    pub m: u64,
    pub x: SquareArray,
    pub eps: SquareArray,
    pub centers: SquareArray,
    pub scales: SquareArray,
}

impl ArrayInstance {
    /// `sum eps_ij x_ij` and `sum c_ij x_ij`, both asserted finite.
    pub fn sums(&self) -> Result<(f64, f64)> {
        let weighted = weighted_array_sum(&self.x, &self.eps)?;
        let centred = weighted_array_sum(&self.x, &self.centers)?;
        if !(weighted.is_finite() && centred.is_finite()) {
            return Err(Error::InvalidParameter(
                "array partial sum is not finite".into(),
            ));
        }
        Ok((weighted, centred))
    }
}

impl ArraySpec {
    /// `x` uses the data lane and `eps` the weight lane of replicate `index`.
    pub fn realize(&self, n: usize, streams: &StreamFactory, index: u64) -> Result<ArrayInstance> {
        if n > MAX_SIDE {
            return Err(Error::InvalidParameter(format!(
                "array side {n} exceeds the harness cap {MAX_SIDE}"
            )));
        }
        let m = (self.m_rule)(n);
        let x = (self.x_gen)(n, m, &mut streams.stream(index, Lane::Data))?;
        let eps = (self.eps_gen)(n, m, &mut streams.stream(index, Lane::Weights))?;
        let centers = (self.centers)(n, m);
        let scales = (self.scales)(n, m);
        for a in [&x, &eps, &centers, &scales] {
            if a.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: a.n(),
                });
            }
        }
        if scales.values().iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidParameter(
                "scales must be strictly positive".into(),
            ));
        }
        Ok(ArrayInstance {
            n,
            m,
            x,
            eps,
            centers,
            scales,
        })
    }

    /// `X_ij = Z_i Z_j`, `eps_ij = 1`, `c_ij = 1`, `a_ij = 1`.
    pub fn exchangeable_product(z: DistSpec) -> Self {
        Self {
            x_gen: product_gen(z),
            eps_gen: Box::new(|n, _, _| Ok(SquareArray::filled(n, 1.0))),
            centers: Box::new(|n, _| SquareArray::filled(n, 1.0)),
            scales: Box::new(|n, _| SquareArray::filled(n, 1.0)),
            m_rule: Box::new(|n| n as u64),
        }
    }

    /// `X_ij = Z_i Z_j`, `eps_ij = W_i W_j` with `W` independent of `Z`.
    pub fn exchangeable_weighted(z: DistSpec, w: DistSpec) -> Self {
        Self {
            eps_gen: product_gen(w),
            ..Self::exchangeable_product(z)
        }
    }

    /// Bootstrap pair weights of the Marcinkiewicz-type law of order `d`:
    /// `eps_ij = w_i w_j / (m^{d-1}(m-1))`, `c_ij = 1/(n² m^{d-2})`, `a_ij = n^{-d}`.
    pub fn marcinkiewicz_pair_weights(d: f64, m_rule: SizeRule) -> Self {
        Self {
            x_gen: Box::new(|n, _, _| Ok(SquareArray::filled(n, 1.0))),
            eps_gen: Box::new(move |n, m, rng| {
                let w: Vec<f64> = draw_weights(n, m, rng)?
                    .counts()
                    .iter()
                    .map(|&c| c as f64)
                    .collect();
                let mf = m as f64;
                let denom = mf.powf(d - 1.0) * (mf - 1.0);
                Ok(SquareArray::outer(&w, &w)?.scaled(1.0 / denom))
            }),
            centers: Box::new(move |n, m| {
                SquareArray::filled(n, 1.0 / ((n * n) as f64 * (m as f64).powf(d - 2.0)))
            }),
            scales: Box::new(move |n, _| SquareArray::filled(n, (n as f64).powf(-d))),
            m_rule,
        }
    }

    /// Centred bootstrap weights at fixed `n`:
    /// `eps_ij = w_i w_j/(m(m-1)) - 1/n²`, `X_ij = Z_i Z_j`, `c_ij = E|X_ij|`.
    pub fn centred_bootstrap_weights(z: DistSpec, m_rule: SizeRule) -> Result<Self> {
        let first = z.abs_moment(1.0).ok_or_else(|| {
            Error::InvalidParameter("need a closed-form E|Z| for the centres".into())
        })?;
        let second = z.abs_moment(2.0).ok_or_else(|| {
            Error::InvalidParameter("need a closed-form E|Z|^2 for the centres".into())
        })?;
        Ok(Self {
            x_gen: product_gen(z),
            eps_gen: Box::new(|n, m, rng| {
                let w: Vec<f64> = draw_weights(n, m, rng)?
                    .counts()
                    .iter()
                    .map(|&c| c as f64)
                    .collect();
                let mf = m as f64;
                let base = 1.0 / (n * n) as f64;
                Ok(SquareArray::outer(&w, &w)?.map(|v| v / (mf * (mf - 1.0)) - base))
            }),
            centers: Box::new(move |n, _| {
                SquareArray::from_fn(n, |i, j| if i == j { second } else { first * first })
            }),
            scales: Box::new(|n, _| SquareArray::filled(n, 1.0)),
            m_rule,
        })
    }
}

fn product_gen(z: DistSpec) -> ArrayGen {
    Box::new(move |n, _, rng: &mut Stream| {
        z.validate()?;
        let v: Vec<f64> = (0..n).map(|_| z.draw(rng)).collect();
        SquareArray::outer(&v, &v)
    })
}

/// Uniform draw helper for tests of arbitrary arrays.
pub fn random_array<R: Rng + ?Sized>(n: usize, low: f64, high: f64, rng: &mut R) -> SquareArray {
    SquareArray::from_fn(n, |_, _| rng.random_range(low..high))
}
