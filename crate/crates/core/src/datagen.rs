//! Seeded data generators: i.i.d. draws from a few parametric families and
//! a stationary Gaussian AR(1) process.
//!
//! Normal variates come from `rand_distr::Normal` (ziggurat on the standard
//! normal). Pareto variates use the inverse CDF `x_min * u^(-1/alpha)` with
//! `u` uniform on `(0, 1]`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Sample;

/// Marginal law of an i.i.d. sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistSpec {
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
    Pareto { alpha: f64, x_min: f64 },
}

impl DistSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DistSpec::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            DistSpec::Uniform { low, high } => low.is_finite() && high.is_finite() && high > low,
            DistSpec::Exponential { rate } => rate.is_finite() && rate > 0.0,
            DistSpec::Pareto { alpha, x_min } => {
                alpha.is_finite() && alpha > 0.0 && x_min.is_finite() && x_min > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid distribution {self:?}"
            )))
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            DistSpec::Normal { mean, .. } => Some(mean),
            DistSpec::Uniform { low, high } => Some(0.5 * (low + high)),
            DistSpec::Exponential { rate } => Some(1.0 / rate),
            DistSpec::Pareto { alpha, x_min } => {
                (alpha > 1.0).then(|| alpha * x_min / (alpha - 1.0))
            }
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match *self {
            DistSpec::Normal { sd, .. } => Some(sd * sd),
            DistSpec::Uniform { low, high } => Some((high - low).powi(2) / 12.0),
            DistSpec::Exponential { rate } => Some(1.0 / (rate * rate)),
            DistSpec::Pareto { alpha, x_min } => (alpha > 2.0)
                .then(|| x_min * x_min * alpha / ((alpha - 1.0).powi(2) * (alpha - 2.0))),
        }
    }

    /// Whether `E|X|^q` is finite.
    pub fn abs_moment_finite(&self, q: f64) -> bool {
        match *self {
            DistSpec::Pareto { alpha, .. } => q < alpha,
            _ => true,
        }
    }

    /// `E|X|^q` where a closed form is known: every `q` for the uniform,
    /// the exponential and the Pareto (`q < alpha`), and `q` in {1, 2} for
    /// the normal.
    pub fn abs_moment(&self, q: f64) -> Option<f64> {
        if !(q > 0.0) {
            return (q == 0.0).then_some(1.0);
        }
        match *self {
            DistSpec::Pareto { alpha, x_min } => {
                (q < alpha).then(|| alpha / (alpha - q) * x_min.powf(q))
            }
            DistSpec::Uniform { low, high } => {
                // integral of |x|^q over [low, high], split at zero
                let prim = |x: f64| x.signum() * x.abs().powf(q + 1.0) / (q + 1.0);
                let integral = if low >= 0.0 || high <= 0.0 {
                    (prim(high) - prim(low)).abs()
                } else {
                    prim(high) - prim(low)
                };
                Some(integral / (high - low))
            }
            DistSpec::Exponential { rate } => {
                Some(statrs::function::gamma::gamma(q + 1.0) / rate.powf(q))
            }
            DistSpec::Normal { mean, sd } if q == 1.0 => {
                // folded normal mean
                let z = mean / sd;
                let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let tail = 0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2);
                Some(sd * 2.0 * phi + mean * (1.0 - 2.0 * tail))
            }
            DistSpec::Normal { mean, sd } if q == 2.0 => Some(mean * mean + sd * sd),
            DistSpec::Normal { .. } => None,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DistSpec::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            DistSpec::Uniform { low, high } => {
                Uniform::new(low, high).expect("validated").sample(rng)
            }
            DistSpec::Exponential { rate } => Exp::new(rate).expect("validated").sample(rng),
            DistSpec::Pareto { alpha, x_min } => {
                let u = 1.0 - rng.random::<f64>();
                x_min * u.powf(-1.0 / alpha)
            }
        }
    }
}

/// `n` i.i.d. one-dimensional draws.
pub fn iid_sample<R: Rng + ?Sized>(spec: &DistSpec, n: usize, rng: &mut R) -> Result<Sample> {
    iid_sample_dim(spec, n, 1, rng)
}

/// `n` i.i.d. points whose `dim` coordinates are independent draws from `spec`.
pub fn iid_sample_dim<R: Rng + ?Sized>(
    spec: &DistSpec,
    n: usize,
    dim: usize,
    rng: &mut R,
) -> Result<Sample> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Empty("sample"));
    }
    let coords = match *spec {
        DistSpec::Normal { mean, sd } => {
            let d = Normal::new(mean, sd).expect("validated");
            d.sample_iter(rng).take(n * dim).collect()
        }
        _ => (0..n * dim).map(|_| spec.draw(rng)).collect(),
    };
    Sample::from_flat(dim, coords)
}

/// Gaussian AR(1): `X_t = phi X_{t-1} + e_t`, `e_t ~ Normal(0, innovation_sd²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSpec {
    pub phi: f64,
    pub innovation_sd: f64,
}

impl MixingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "AR(1) coefficient must satisfy |phi| < 1, got {}",
                self.phi
            )));
        }
        if !(self.innovation_sd.is_finite() && self.innovation_sd > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "innovation sd must be positive, got {}",
                self.innovation_sd
            )));
        }
        Ok(())
    }

    pub fn stationary_variance(&self) -> f64 {
        self.innovation_sd * self.innovation_sd / (1.0 - self.phi * self.phi)
    }

    /// `Cov(X_s, X_t) = phi^|s-t| * stationary variance`.
    pub fn autocovariance(&self, lag: usize) -> f64 {
        self.phi.powi(lag as i32) * self.stationary_variance()
    }
}

/// Strictly stationary path of length `n`; `X_0` is drawn from the stationary law.
pub fn ar1_sample<R: Rng + ?Sized>(spec: &MixingSpec, n: usize, rng: &mut R) -> Result<Sample> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Empty("sample"));
    }
    let innovation = Normal::new(0.0, spec.innovation_sd).expect("validated");
    let stationary = Normal::new(0.0, spec.stationary_variance().sqrt()).expect("validated");
    let mut path = Vec::with_capacity(n);
    let mut x = stationary.sample(rng);
    path.push(x);
    for _ in 1..n {
        x = spec.phi * x + innovation.sample(rng);
        path.push(x);
    }
    Sample::from_scalars(path)
}

/// Where the observations of an experiment come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSpec {
    Iid(DistSpec),
    Ar1(MixingSpec),
}

impl DataSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DataSpec::Iid(d) => d.validate(),
            DataSpec::Ar1(m) => m.validate(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, dim: usize, rng: &mut R) -> Result<Sample> {
        match self {
            DataSpec::Iid(d) => iid_sample_dim(d, n, dim, rng),
            DataSpec::Ar1(m) if dim == 1 => ar1_sample(m, n, rng),
            DataSpec::Ar1(_) => Err(Error::InvalidParameter(
                "AR(1) data is one-dimensional".into(),
            )),
        }
    }
}
