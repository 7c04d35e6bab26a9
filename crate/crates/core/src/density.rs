//! Kernel density estimation: kernels, rule-of-thumb bandwidths, and exact
//! interval moments of the estimate.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gauss_sum::{GaussSum, GaussSums};
use crate::series::mean_std;

const SQRT_5: f64 = 2.236_067_977_499_79;
/// Peak height of the unit-variance Epanechnikov kernel, 3 / (4 sqrt 5).
const EPAN_PEAK: f64 = 3.0 / (4.0 * SQRT_5);
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Beyond 40 standard deviations the Gaussian CDF is exactly 0 or 1 in f64.
const GAUSS_SUPPORT: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    Epanechnikov,
    Gaussian,
}

impl KernelKind {
    /// Both kernels are parameterized with unit variance.
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelKind::Epanechnikov => (EPAN_PEAK * (1.0 - u * u / 5.0)).max(0.0),
            KernelKind::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            KernelKind::Epanechnikov if u.abs() < SQRT_5 => -EPAN_PEAK * 2.0 * u / 5.0,
            KernelKind::Epanechnikov => 0.0,
            KernelKind::Gaussian => -u * INV_SQRT_2PI * (-0.5 * u * u).exp(),
        }
    }

    /// Half-width of the (effective) support in kernel units.
    fn support(self) -> f64 {
        match self {
            KernelKind::Epanechnikov => SQRT_5,
            KernelKind::Gaussian => GAUSS_SUPPORT,
        }
    }

    /// `(int t^k K(t) dt over (-inf, u])` for k = 0, 1, 2.
    fn lower_moments(self, u: f64) -> [f64; 3] {
        match self {
            KernelKind::Epanechnikov => {
                let u = u.clamp(-SQRT_5, SQRT_5);
                let u2 = u * u;
                [
                    EPAN_PEAK * (u - u * u2 / 15.0) + 0.5,
                    EPAN_PEAK * (u2 / 2.0 - u2 * u2 / 20.0 - 1.25),
                    EPAN_PEAK * (u * u2 / 3.0 - u * u2 * u2 / 25.0) + 0.5,
                ]
            }
            KernelKind::Gaussian => {
                let cdf = standard_normal_cdf(u);
                let pdf = INV_SQRT_2PI * (-0.5 * u * u).exp();
                [cdf, -pdf, cdf - u * pdf]
            }
        }
    }

    /// AMISE rule-of-thumb constant for density estimation.
    fn silverman_constant(self) -> f64 {
        match self {
            KernelKind::Epanechnikov => 2.3449,
            KernelKind::Gaussian => 1.0492,
        }
    }

    /// AMISE rule-of-thumb constant for density-derivative estimation.
    fn gradient_constant(self) -> f64 {
        match self {
            KernelKind::Epanechnikov => 1.5232,
            KernelKind::Gaussian => 0.9686,
        }
    }

    /// Factor converting a rule-of-thumb bandwidth into this crate's
    /// unit-variance kernel parameterization. The Epanechnikov constants are
    /// derived for the kernel supported on [-1, 1], whose variance is 1/5.
    fn rule_scale(self) -> f64 {
        match self {
            KernelKind::Epanechnikov => 1.0 / SQRT_5,
            KernelKind::Gaussian => 1.0,
        }
    }
}

pub fn kernel_eval(kernel: KernelKind, u: f64) -> f64 {
    kernel.eval(u)
}

pub fn standard_normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / SQRT_2)
}

pub fn standard_normal_pdf(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

fn rule(constant: f64, sigma_hat: f64, n: usize, exponent: f64) -> Result<f64> {
    if !(sigma_hat > 0.0) || !sigma_hat.is_finite() {
        return Err(Error::NonPositiveScale(sigma_hat));
    }
    if n == 0 {
        return Err(Error::OutOfRange {
            what: "sample count",
            value: 0.0,
        });
    }
    Ok(constant * sigma_hat * (n as f64).powf(-exponent))
}

/// Silverman-type bandwidth `C * sigma * N^(-1/5)` for density estimation.
pub fn bandwidth_silverman(kernel: KernelKind, sigma_hat: f64, n: usize) -> Result<f64> {
    rule(kernel.silverman_constant(), sigma_hat, n, 1.0 / 5.0)
}

/// Bandwidth `C * sigma * N^(-1/7)` for estimating the density gradient.
pub fn bandwidth_gradient(kernel: KernelKind, sigma_hat: f64, n: usize) -> Result<f64> {
    rule(kernel.gradient_constant(), sigma_hat, n, 1.0 / 7.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandwidthRule {
    Silverman,
    Gradient,
}

/// Cumulative moments `int_{-inf}^{b} x^k f(x) dx`, k = 0, 1, 2.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub first: f64,
    pub second: f64,
}

impl std::ops::Sub for Moments {
    type Output = Moments;

    fn sub(self, rhs: Moments) -> Moments {
        Moments {
            mass: self.mass - rhs.mass,
            first: self.first - rhs.first,
            second: self.second - rhs.second,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DensityRecord {
    kernel: KernelKind,
    bandwidth: f64,
    samples: Vec<f64>,
}

/// A fixed-bandwidth kernel density estimate over 1-D samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DensityRecord", into = "DensityRecord")]
pub struct DensityModel {
    kernel: KernelKind,
    bandwidth: f64,
    /// ascending
    samples: Vec<f64>,
    prefix_sum: Vec<f64>,
    prefix_sq: Vec<f64>,
    gauss: Option<GaussSum>,
}

impl DensityModel {
    pub fn new(mut samples: Vec<f64>, kernel: KernelKind, bandwidth: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTraining);
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::NonPositiveScale(bandwidth));
        }
        samples.sort_by(f64::total_cmp);
        let mut prefix_sum = Vec::with_capacity(samples.len() + 1);
        let mut prefix_sq = Vec::with_capacity(samples.len() + 1);
        let (mut s, mut q) = (0.0, 0.0);
        prefix_sum.push(0.0);
        prefix_sq.push(0.0);
        for &x in &samples {
            s += x;
            q += x * x;
            prefix_sum.push(s);
            prefix_sq.push(q);
        }
        let gauss = (kernel == KernelKind::Gaussian).then(|| GaussSum::new(&samples, bandwidth));
        Ok(Self {
            kernel,
            bandwidth,
            samples,
            prefix_sum,
            prefix_sq,
            gauss,
        })
    }

    /// Bandwidth from a rule of thumb with sigma the population standard
    /// deviation of the samples.
    pub fn with_rule(samples: Vec<f64>, kernel: KernelKind, rule: BandwidthRule) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTraining);
        }
        let (_, sigma) = mean_std(&samples);
        let h = match rule {
            BandwidthRule::Silverman => bandwidth_silverman(kernel, sigma, samples.len())?,
            BandwidthRule::Gradient => bandwidth_gradient(kernel, sigma, samples.len())?,
        };
        Self::new(samples, kernel, h * kernel.rule_scale())
    }

    pub fn kernel(&self) -> KernelKind {
        self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Training samples in ascending order.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn window(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.samples.partition_point(|&v| v < lo);
        let b = self.samples.partition_point(|&v| v <= hi);
        a..b.max(a)
    }

    pub(crate) fn gauss_sums(&self, x: f64) -> Option<GaussSums> {
        self.gauss.as_ref().map(|g| g.sums(&self.samples, x))
    }

    /// Density estimate at `x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let n = self.samples.len() as f64;
        match self.kernel {
            KernelKind::Gaussian => {
                let sums = self.gauss_sums(x).expect("gaussian model has block sums");
                sums.unscaled_weight() * INV_SQRT_2PI / (n * h)
            }
            KernelKind::Epanechnikov => {
                let reach = SQRT_5 * h;
                let total: f64 = self.samples[self.window(x - reach, x + reach)]
                    .iter()
                    .map(|&xi| self.kernel.eval((x - xi) / h))
                    .sum();
                total / (n * h)
            }
        }
    }

    pub fn evaluate_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.par_iter().map(|&x| self.evaluate(x)).collect()
    }

    /// Derivative of the density estimate at `x`.
    pub fn gradient(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let n = self.samples.len() as f64;
        match self.kernel {
            KernelKind::Gaussian => {
                let s = self.gauss_sums(x).expect("gaussian model has block sums");
                (s.unscaled_weighted_x() - x * s.unscaled_weight()) * INV_SQRT_2PI
                    / (n * h * h * h)
            }
            KernelKind::Epanechnikov => {
                let reach = SQRT_5 * h;
                let total: f64 = self.samples[self.window(x - reach, x + reach)]
                    .iter()
                    .map(|&xi| self.kernel.derivative((x - xi) / h))
                    .sum();
                total / (n * h * h)
            }
        }
    }

    /// `int_{-inf}^{b} x^k f(x) dx` for k = 0, 1, 2 in closed form.
    pub fn moments_below(&self, b: f64) -> Moments {
        let n = self.samples.len();
        if b == f64::NEG_INFINITY {
            return Moments::default();
        }
        if b == f64::INFINITY {
            return self.total_moments();
        }
        let h = self.bandwidth;
        let reach = self.kernel.support() * h;
        let range = self.window(b - reach, b + reach);
        // samples left of the window contribute their full kernel mass
        let full = range.start;
        let var_k = 1.0;
        let mut mass = full as f64;
        let mut first = self.prefix_sum[full];
        let mut second = self.prefix_sq[full] + full as f64 * h * h * var_k;
        for &xi in &self.samples[range] {
            let [f, t1, t2] = self.kernel.lower_moments((b - xi) / h);
            mass += f;
            first += xi * f + h * t1;
            second += xi * xi * f + 2.0 * xi * h * t1 + h * h * t2;
        }
        let inv = 1.0 / n as f64;
        Moments {
            mass: mass * inv,
            first: first * inv,
            second: second * inv,
        }
    }

    pub fn total_moments(&self) -> Moments {
        let n = self.samples.len();
        let inv = 1.0 / n as f64;
        let h = self.bandwidth;
        Moments {
            mass: 1.0,
            first: self.prefix_sum[n] * inv,
            second: (self.prefix_sq[n] + n as f64 * h * h) * inv,
        }
    }

    /// Probability mass of `[a, b]` under the estimate.
    pub fn cdf(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.moments_below(b).mass - self.moments_below(a).mass).clamp(0.0, 1.0)
    }
}

impl TryFrom<DensityRecord> for DensityModel {
    type Error = Error;

    fn try_from(r: DensityRecord) -> Result<Self> {
        Self::new(r.samples, r.kernel, r.bandwidth)
    }
}

impl From<DensityModel> for DensityRecord {
    fn from(m: DensityModel) -> Self {
        DensityRecord {
            kernel: m.kernel,
            bandwidth: m.bandwidth,
            samples: m.samples,
        }
    }
}

pub fn kde_evaluate(model: &DensityModel, x: f64) -> f64 {
    model.evaluate(x)
}

pub fn kde_cdf(model: &DensityModel, a: f64, b: f64) -> f64 {
    model.cdf(a, b)
}

/// Gaussian density with mean and standard deviation, used by callers that
/// need an analytic reference.
pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    standard_normal_pdf((x - mean) / sd) / sd
}
