//! Scalar discretization: codebooks and the schemes that produce them.
//!
//! A [`Codebook`] holds `kappa - 1` interior cutlines and `kappa` centroids.
//! Symbol `i` covers the half-open interval `[cutlines[i-1], cutlines[i])`
//! with `-inf` and `+inf` at the ends.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{standard_normal_cdf, standard_normal_pdf, DensityModel, Moments};
use crate::error::{Error, Result};

pub type Symbol = u32;

pub const MAX_ALPHABET: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodebookMethod {
    GaussianEquiprobable,
    KMeans,
    LloydMax,
    MeanShift,
}

impl fmt::Display for CodebookMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            CodebookMethod::GaussianEquiprobable => "GaussianEquiprobable",
            CodebookMethod::KMeans => "KMeans",
            CodebookMethod::LloydMax => "LloydMax",
            CodebookMethod::MeanShift => "MeanShift",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CodebookRecord {
    method: CodebookMethod,
    kappa: usize,
    cutlines: Vec<f64>,
    centroids: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CodebookRecord", into = "CodebookRecord")]
pub struct Codebook {
    method: CodebookMethod,
    cutlines: Vec<f64>,
    centroids: Vec<f64>,
    modes: Option<Vec<f64>>,
    id: u64,
}

impl PartialEq for Codebook {
    fn eq(&self, other: &Self) -> bool {
        self.method == other.method
            && self.cutlines == other.cutlines
            && self.centroids == other.centroids
            && self.modes == other.modes
    }
}

impl Codebook {
    pub fn new(method: CodebookMethod, cutlines: Vec<f64>, centroids: Vec<f64>) -> Result<Self> {
        let kappa = centroids.len();
        if kappa < 2 {
            return Err(Error::AlphabetTooSmall(kappa));
        }
        if kappa > MAX_ALPHABET {
            return Err(Error::AlphabetTooLarge(kappa));
        }
        if cutlines.len() + 1 != kappa {
            return Err(Error::InvalidCodebook(format!(
                "{} cutlines for {} centroids",
                cutlines.len(),
                kappa
            )));
        }
        if cutlines.iter().chain(&centroids).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCodebook("non-finite value".into()));
        }
        if !strictly_increasing(&cutlines) || !strictly_increasing(&centroids) {
            return Err(Error::InvalidCodebook("values not strictly increasing".into()));
        }
        for (i, &c) in centroids.iter().enumerate() {
            let lo = if i == 0 { f64::NEG_INFINITY } else { cutlines[i - 1] };
            let hi = cutlines.get(i).copied().unwrap_or(f64::INFINITY);
            if !(lo < c && c < hi) {
                return Err(Error::InvalidCodebook(format!(
                    "centroid {i} = {c} outside its interval [{lo}, {hi})"
                )));
            }
        }
        let id = fingerprint(method, &cutlines, &centroids);
        Ok(Self {
            method,
            cutlines,
            centroids,
            modes: None,
            id,
        })
    }

    pub(crate) fn with_modes(mut self, modes: Vec<f64>) -> Self {
        self.modes = Some(modes);
        self
    }

    pub fn method(&self) -> CodebookMethod {
        self.method
    }

    pub fn kappa(&self) -> usize {
        self.centroids.len()
    }

    pub fn cutlines(&self) -> &[f64] {
        &self.cutlines
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn modes(&self) -> Option<&[f64]> {
        self.modes.as_deref()
    }

    /// Content fingerprint; equal codebooks have equal ids.
    pub fn id(&self) -> String {
        format!("{:016x}", self.id)
    }

    /// Index of the half-open interval containing `y`.
    pub fn quantize(&self, y: f64) -> Symbol {
        self.cutlines.partition_point(|&b| b <= y) as Symbol
    }

    pub fn reconstruct(&self, s: Symbol) -> Result<f64> {
        self.centroids
            .get(s as usize)
            .copied()
            .ok_or(Error::SymbolOutOfRange {
                symbol: s,
                kappa: self.kappa(),
            })
    }

    /// Lower boundary of symbol `s`'s interval (`-inf` for the first symbol).
    pub fn lower_cutline(&self, s: Symbol) -> f64 {
        match s as usize {
            0 => f64::NEG_INFINITY,
            i => self.cutlines[i - 1],
        }
    }

    /// Upper boundary of symbol `s`'s interval (`+inf` for the last symbol).
    pub fn upper_cutline(&self, s: Symbol) -> f64 {
        self.cutlines
            .get(s as usize)
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

impl TryFrom<CodebookRecord> for Codebook {
    type Error = Error;

    fn try_from(r: CodebookRecord) -> Result<Self> {
        if r.kappa != r.centroids.len() {
            return Err(Error::InvalidCodebook(format!(
                "kappa {} disagrees with {} centroids",
                r.kappa,
                r.centroids.len()
            )));
        }
        let cb = Codebook::new(r.method, r.cutlines, r.centroids)?;
        Ok(match r.modes {
            Some(m) => cb.with_modes(m),
            None => cb,
        })
    }
}

impl From<Codebook> for CodebookRecord {
    fn from(cb: Codebook) -> Self {
        CodebookRecord {
            method: cb.method,
            kappa: cb.centroids.len(),
            cutlines: cb.cutlines,
            centroids: cb.centroids,
            modes: cb.modes,
        }
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// FNV-1a over the method tag and the bit patterns of all values.
fn fingerprint(method: CodebookMethod, cutlines: &[f64], centroids: &[f64]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(&[method as u8]);
    feed(&(cutlines.len() as u64).to_le_bytes());
    for v in cutlines.iter().chain(centroids) {
        feed(&v.to_bits().to_le_bytes());
    }
    hash
}

fn midpoints(c: &[f64]) -> Vec<f64> {
    c.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

pub fn quantize(cb: &Codebook, y: f64) -> Symbol {
    cb.quantize(y)
}

pub fn reconstruct(cb: &Codebook, s: Symbol) -> Result<f64> {
    cb.reconstruct(s)
}

/// Inverse of the standard normal CDF.
///
/// Rational approximation (P. J. Acklam) followed by one Halley step on the
/// complementary error function, which brings the result to full double
/// precision.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -inverse_normal_cdf(1.0 - p);
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = standard_normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Equiprobable intervals of the standard normal with conditional-mean centroids.
pub fn gaussian_equiprobable_codebook(kappa: usize) -> Result<Codebook> {
    if kappa < 2 {
        return Err(Error::AlphabetTooSmall(kappa));
    }
    if kappa > MAX_ALPHABET {
        return Err(Error::AlphabetTooLarge(kappa));
    }
    let k = kappa as f64;
    let mut cutlines = vec![0.0; kappa - 1];
    for i in 1..kappa {
        cutlines[i - 1] = if 2 * i < kappa {
            inverse_normal_cdf(i as f64 / k)
        } else if 2 * i == kappa {
            0.0
        } else {
            -inverse_normal_cdf((kappa - i) as f64 / k)
        };
    }
    let centroids = (0..kappa)
        .map(|i| {
            let a = if i == 0 { f64::NEG_INFINITY } else { cutlines[i - 1] };
            let b = cutlines.get(i).copied().unwrap_or(f64::INFINITY);
            k * normal_pdf_difference(a, b)
        })
        .collect();
    Codebook::new(CodebookMethod::GaussianEquiprobable, cutlines, centroids)
}

/// `phi(a) - phi(b)` without cancellation for narrow intervals.
fn normal_pdf_difference(a: f64, b: f64) -> f64 {
    if a.is_infinite() || b.is_infinite() {
        let pa = if a.is_infinite() { 0.0 } else { standard_normal_pdf(a) };
        let pb = if b.is_infinite() { 0.0 } else { standard_normal_pdf(b) };
        return pa - pb;
    }
    // phi(a) - phi(b) = -phi(a) * expm1(-(b - a)(b + a) / 2)
    -standard_normal_pdf(a) * (-(b - a) * (b + a) / 2.0).exp_m1()
}

fn distinct_count(samples: &[f64]) -> usize {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    sorted.len()
}

/// k-means++ seeding with D^2 weighting; returns centroids in draw order.
pub fn kmeans_pp_init(samples: &[f64], kappa: usize, seed: u64) -> Result<Vec<f64>> {
    let found = distinct_count(samples);
    if kappa == 0 || found < kappa {
        return Err(Error::InsufficientDistinctValues {
            needed: kappa.max(1),
            found,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = samples[rng.random_range(0..samples.len())];
    let mut centers = vec![first];
    let mut d2: Vec<f64> = samples.iter().map(|&x| (x - first) * (x - first)).collect();
    while centers.len() < kappa {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let next = samples[pick.expect("a sample with positive distance exists")];
        centers.push(next);
        for (d, &x) in d2.iter_mut().zip(samples) {
            *d = d.min((x - next) * (x - next));
        }
    }
    Ok(centers)
}

const KMEANS_MAX_ITER: usize = 500;

/// Lloyd's k-means on raw samples; cutlines are midpoints of adjacent centroids.
pub fn kmeans_codebook(samples: &[f64], kappa: usize, seed: u64) -> Result<Codebook> {
    if kappa < 2 {
        return Err(Error::AlphabetTooSmall(kappa));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("non-finite training sample".into()));
    }
    let mut centroids = kmeans_pp_init(samples, kappa, seed)?;
    centroids.sort_by(f64::total_cmp);

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut prefix = Vec::with_capacity(sorted.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &x in &sorted {
        acc += x;
        prefix.push(acc);
    }

    let mut bounds: Vec<usize> = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        let cut = midpoints(&centroids);
        let mut next_bounds = Vec::with_capacity(kappa + 1);
        next_bounds.push(0);
        next_bounds.extend(cut.iter().map(|&b| sorted.partition_point(|&x| x < b)));
        next_bounds.push(sorted.len());
        if next_bounds == bounds {
            break;
        }
        bounds = next_bounds;

        let mut empty = Vec::new();
        for i in 0..kappa {
            let (a, b) = (bounds[i], bounds[i + 1]);
            if a == b {
                empty.push(i);
            } else {
                centroids[i] = (prefix[b] - prefix[a]) / (b - a) as f64;
            }
        }
        if !empty.is_empty() {
            // empty centroids move onto the samples farthest from their own centroid
            let mut candidates: Vec<(f64, f64)> = (0..kappa)
                .filter(|&i| bounds[i] < bounds[i + 1])
                .flat_map(|i| {
                    let c = centroids[i];
                    [sorted[bounds[i]], sorted[bounds[i + 1] - 1]].map(|x| ((x - c).abs(), x))
                })
                .filter(|&(_, x)| !centroids.contains(&x))
                .collect();
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
            candidates.dedup_by(|a, b| a.1 == b.1);
            for (&i, &(_, x)) in empty.iter().zip(&candidates) {
                centroids[i] = x;
            }
        }
        centroids.sort_by(f64::total_cmp);
        centroids.dedup();
        if centroids.len() != kappa {
            return Err(Error::InsufficientDistinctValues {
                needed: kappa,
                found: centroids.len(),
            });
        }
    }
    Codebook::new(CodebookMethod::KMeans, midpoints(&centroids), centroids)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LloydMaxOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LloydMaxOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LloydMaxReport {
    pub iterations: usize,
    /// Largest centroid movement in the final iteration.
    pub max_update: f64,
    /// Mean squared quantization error of the returned codebook under the density.
    pub distortion: f64,
    /// Distortion after each iteration.
    pub history: Vec<f64>,
    pub reseeds: usize,
}

/// Cell mass below which an interval counts as empty.
const EMPTY_MASS: f64 = 1e-12;

fn cell_moments(density: &DensityModel, cutlines: &[f64]) -> Vec<Moments> {
    let mut cumulative = Vec::with_capacity(cutlines.len() + 2);
    cumulative.push(Moments::default());
    cumulative.extend(cutlines.iter().map(|&b| density.moments_below(b)));
    cumulative.push(density.total_moments());
    cumulative.windows(2).map(|w| w[1] - w[0]).collect()
}

fn distortion_of(cells: &[Moments], centroids: &[f64]) -> f64 {
    cells
        .iter()
        .zip(centroids)
        .map(|(m, &c)| (m.second - 2.0 * c * m.first + c * c * m.mass).max(0.0))
        .sum()
}

/// Distortion `E[(X - Q(X))^2]` of a codebook under a density estimate.
pub fn codebook_distortion(cb: &Codebook, density: &DensityModel) -> f64 {
    distortion_of(&cell_moments(density, cb.cutlines()), cb.centroids())
}

/// Effective data range used when an empty cell has to be re-seeded.
fn effective_range(density: &DensityModel) -> (f64, f64) {
    let s = density.samples();
    let pad = 3.0 * density.bandwidth();
    (s[0] - pad, s[s.len() - 1] + pad)
}

/// Point below which fraction `q` of the mass in `[lo, hi]` lies.
fn cell_quantile(density: &DensityModel, lo: f64, hi: f64, q: f64) -> f64 {
    let base = density.moments_below(lo).mass;
    let target = base + q * (density.moments_below(hi).mass - base);
    let (mut a, mut b) = (lo, hi);
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if density.moments_below(mid).mass < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Lloyd-Max quantizer design by alternating the midpoint and centroid
/// conditions under `density`.
pub fn lloyd_max(
    density: &DensityModel,
    kappa: usize,
    init: &[f64],
    options: LloydMaxOptions,
) -> Result<(Codebook, LloydMaxReport)> {
    if kappa < 2 {
        return Err(Error::AlphabetTooSmall(kappa));
    }
    if init.len() != kappa {
        return Err(Error::InvalidParams(format!(
            "{} initial centroids for alphabet size {kappa}",
            init.len()
        )));
    }
    if !strictly_increasing(init) || init.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams(
            "initial centroids must be finite and strictly increasing".into(),
        ));
    }
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::InvalidParams("tol must be positive, max_iter at least 1".into()));
    }

    let (range_lo, range_hi) = effective_range(density);
    let mut centroids = init.to_vec();
    let mut history = Vec::new();
    let mut reseeds = 0;
    let mut max_update = f64::INFINITY;
    let mut iterations = 0;

    while iterations < options.max_iter {
        iterations += 1;
        let cutlines = midpoints(&centroids);
        let cells = cell_moments(density, &cutlines);

        let mut next = centroids.clone();
        let mut empty = Vec::new();
        for (i, m) in cells.iter().enumerate() {
            if m.mass < EMPTY_MASS {
                empty.push(i);
                continue;
            }
            let lo = if i == 0 { f64::NEG_INFINITY } else { cutlines[i - 1] };
            let hi = cutlines.get(i).copied().unwrap_or(f64::INFINITY);
            next[i] = (m.first / m.mass).clamp(lo, hi);
        }

        if !empty.is_empty() {
            reseeds += empty.len();
            if reseeds > kappa {
                return Err(Error::EmptyCell { cell: empty[0] });
            }
            // split the heaviest cell: its centroid and the empty ones move to
            // evenly spaced conditional quantiles of that cell's mass
            let heaviest = (0..kappa)
                .filter(|i| !empty.contains(i))
                .max_by(|&a, &b| cells[a].mass.total_cmp(&cells[b].mass))
                .ok_or(Error::EmptyCell { cell: empty[0] })?;
            let lo = if heaviest == 0 { range_lo } else { cutlines[heaviest - 1] };
            let hi = cutlines.get(heaviest).copied().unwrap_or(range_hi);
            let parts = empty.len() + 1;
            let spots: Vec<f64> = (0..parts)
                .map(|k| cell_quantile(density, lo, hi, (k as f64 + 0.5) / parts as f64))
                .collect();
            next[heaviest] = spots[0];
            for (&i, &spot) in empty.iter().zip(&spots[1..]) {
                next[i] = spot;
            }
            next.sort_by(f64::total_cmp);
            if !strictly_increasing(&next) {
                return Err(Error::EmptyCell { cell: empty[0] });
            }
        }

        max_update = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history.push(distortion_of(&cells, &next));
        centroids = next;
        if !strictly_increasing(&centroids) {
            return Err(Error::EmptyCell { cell: 0 });
        }
        if max_update < options.tol && empty.is_empty() {
            break;
        }
    }

    let cutlines = midpoints(&centroids);
    let distortion = distortion_of(&cell_moments(density, &cutlines), &centroids);
    let codebook = Codebook::new(CodebookMethod::LloydMax, cutlines, centroids)?;
    let report = LloydMaxReport {
        iterations,
        max_update,
        distortion,
        history,
        reseeds,
    };
    if max_update < options.tol {
        Ok((codebook, report))
    } else {
        Err(Error::LloydMaxNoConvergence {
            codebook: Box::new(codebook),
            report,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::KernelKind;
    use approx::assert_abs_diff_eq;

    /// Standard normal CDF by Simpson quadrature of the pdf from 0, an oracle
    /// independent of the erfc-based implementation.
    fn cdf_oracle(x: f64) -> f64 {
        let n = 20_000;
        let h = x / n as f64;
        let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(0.0) + f(x);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        0.5 + s * h / 3.0
    }

    fn quantile_oracle(p: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if cdf_oracle(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn equiprobable_kappa_two() {
        let cb = gaussian_equiprobable_codebook(2).unwrap();
        assert_eq!(cb.cutlines(), &[0.0]);
        let half_normal_mean = (2.0 / std::f64::consts::PI).sqrt();
        assert_abs_diff_eq!(cb.centroids()[0], -half_normal_mean, epsilon = 1e-15);
        assert_abs_diff_eq!(cb.centroids()[1], half_normal_mean, epsilon = 1e-15);
        assert_abs_diff_eq!(cb.reconstruct(1).unwrap(), 0.7978846, epsilon = 1e-7);
    }

    #[test]
    fn equiprobable_quartiles_match_oracle() {
        let cb = gaussian_equiprobable_codebook(4).unwrap();
        let expected = [-0.6744898, 0.0, 0.6744898];
        for (i, (&got, &want)) in cb.cutlines().iter().zip(&expected).enumerate() {
            assert_abs_diff_eq!(got, want, epsilon = 1e-6);
            assert_abs_diff_eq!(got, quantile_oracle((i + 1) as f64 / 4.0), epsilon = 1e-9);
        }
    }

    #[test]
    fn equiprobable_intervals_have_equal_mass() {
        for kappa in [3, 5, 10, 16, 256] {
            let cb = gaussian_equiprobable_codebook(kappa).unwrap();
            let mut prev = 0.0;
            for &b in cb.cutlines() {
                let p = standard_normal_cdf(b);
                assert_abs_diff_eq!(p - prev, 1.0 / kappa as f64, epsilon = 1e-12);
                prev = p;
            }
        }
        let big = gaussian_equiprobable_codebook(MAX_ALPHABET).unwrap();
        assert_eq!(big.kappa(), MAX_ALPHABET);
        assert!(matches!(gaussian_equiprobable_codebook(1), Err(Error::AlphabetTooSmall(1))));
        assert!(gaussian_equiprobable_codebook(MAX_ALPHABET + 1).is_err());
    }

    #[test]
    fn inverse_normal_round_trips() {
        for &p in &[1e-12, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0 - 1e-9] {
            let x = inverse_normal_cdf(p);
            assert!((standard_normal_cdf(x) - p).abs() <= 1e-15 + 1e-13 * p);
        }
    }

    #[test]
    fn quantize_conventions() {
        let cb = gaussian_equiprobable_codebook(4).unwrap();
        assert_eq!(cb.quantize(-1.0), 0);
        for (i, &b) in cb.cutlines().iter().enumerate() {
            assert_eq!(cb.quantize(b), i as u32 + 1);
        }
        let cb2 = gaussian_equiprobable_codebook(2).unwrap();
        assert_eq!(cb2.quantize(3.0), 1);
        for s in 0..4 {
            assert_eq!(cb.quantize(cb.reconstruct(s).unwrap()), s);
        }
        assert!(matches!(cb.reconstruct(4), Err(Error::SymbolOutOfRange { symbol: 4, kappa: 4 })));
    }

    #[test]
    fn kmeans_pp_examples() {
        for seed in 0..20 {
            let mut got = kmeans_pp_init(&[0.0, 0.0, 0.0, 10.0], 2, seed).unwrap();
            got.sort_by(f64::total_cmp);
            assert_eq!(got, vec![0.0, 10.0]);

            let mut got = kmeans_pp_init(&[3.0, 1.0, 2.0, 2.0, 1.0], 3, seed).unwrap();
            got.sort_by(f64::total_cmp);
            assert_eq!(got, vec![1.0, 2.0, 3.0]);

            let one = kmeans_pp_init(&[4.0, 5.0, 6.0], 1, seed).unwrap();
            assert!([4.0, 5.0, 6.0].contains(&one[0]));
        }
        assert_eq!(
            kmeans_pp_init(&[1.0, 2.0, 3.0], 2, 9).unwrap(),
            kmeans_pp_init(&[1.0, 2.0, 3.0], 2, 9).unwrap()
        );
        assert!(matches!(
            kmeans_pp_init(&[1.0, 1.0], 2, 0),
            Err(Error::InsufficientDistinctValues { needed: 2, found: 1 })
        ));
    }

    /// Enumerates every contiguous split of sorted samples into two groups.
    fn best_two_split(samples: &[f64]) -> (f64, f64) {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for k in 1..s.len() {
            let (a, b) = s.split_at(k);
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let sse: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>()
                + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
            if sse < best.0 {
                best = (sse, ma, mb);
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn kmeans_examples() {
        let cb = kmeans_codebook(&[0.0, 0.0, 10.0, 10.0], 2, 1).unwrap();
        assert_eq!(cb.centroids(), &[0.0, 10.0]);
        assert_eq!(cb.cutlines(), &[5.0]);
        assert_eq!(cb.method(), CodebookMethod::KMeans);

        let samples = [0.0, 1.0, 9.0, 10.0];
        let (a, b) = best_two_split(&samples);
        for seed in 0..10 {
            let cb = kmeans_codebook(&samples, 2, seed).unwrap();
            assert_eq!(cb.centroids(), &[a, b]);
            assert_eq!(cb.cutlines(), &[5.0]);
        }
        assert!(matches!(
            kmeans_codebook(&[1.0, 2.0, 3.0, 4.0], 1, 0),
            Err(Error::AlphabetTooSmall(1))
        ));
    }

    #[test]
    fn lloyd_max_standard_normal_two_levels() {
        let density = DensityModel::new(vec![0.0], KernelKind::Gaussian, 1.0).unwrap();
        let (cb, report) =
            lloyd_max(&density, 2, &[-1.0, 1.0], LloydMaxOptions::default()).unwrap();
        let r = (2.0 / std::f64::consts::PI).sqrt();
        assert_abs_diff_eq!(cb.centroids()[0], -r, epsilon = 1e-4);
        assert_abs_diff_eq!(cb.centroids()[1], r, epsilon = 1e-4);
        assert_abs_diff_eq!(cb.cutlines()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.distortion, 1.0 - 2.0 / std::f64::consts::PI, epsilon = 1e-8);
        for w in report.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn lloyd_max_keeps_symmetry() {
        let density =
            DensityModel::new(vec![-2.0, -0.5, 0.5, 2.0], KernelKind::Epanechnikov, 0.8).unwrap();
        let opts = LloydMaxOptions {
            tol: 1e-10,
            max_iter: 3,
        };
        let init = [-3.0, -1.0, 1.0, 3.0];
        let cb = match lloyd_max(&density, 4, &init, opts) {
            Ok((cb, _)) => cb,
            Err(Error::LloydMaxNoConvergence { codebook, .. }) => *codebook,
            Err(e) => panic!("{e}"),
        };
        let c = cb.centroids();
        for i in 0..2 {
            assert_abs_diff_eq!(c[i], -c[3 - i], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(cb.cutlines()[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lloyd_max_uniform_two_levels() {
        let grid: Vec<f64> = (0..=2000).map(|i| i as f64 / 2000.0).collect();
        let density = DensityModel::new(grid, KernelKind::Epanechnikov, 1e-4).unwrap();
        let (cb, _) = lloyd_max(&density, 2, &[0.1, 0.2], LloydMaxOptions::default()).unwrap();
        assert_abs_diff_eq!(cb.cutlines()[0], 0.5, epsilon = 1e-3);
        assert_abs_diff_eq!(cb.centroids()[0], 0.25, epsilon = 1e-3);
        assert_abs_diff_eq!(cb.centroids()[1], 0.75, epsilon = 1e-3);
    }

    #[test]
    fn lloyd_max_reseeds_empty_cells() {
        let density =
            DensityModel::new(vec![0.0, 0.1, 0.2, 5.0, 5.1], KernelKind::Epanechnikov, 0.05).unwrap();
        // the two right-most initial centroids sit in a region with no mass
        let (cb, report) =
            lloyd_max(&density, 3, &[0.0, 20.0, 30.0], LloydMaxOptions::default()).unwrap();
        assert!(report.reseeds >= 1);
        assert_eq!(cb.kappa(), 3);
    }

    #[test]
    fn lloyd_max_rejects_bad_init() {
        let density = DensityModel::new(vec![0.0], KernelKind::Gaussian, 1.0).unwrap();
        let opts = LloydMaxOptions::default();
        assert!(lloyd_max(&density, 2, &[1.0, -1.0], opts).is_err());
        assert!(lloyd_max(&density, 3, &[-1.0, 1.0], opts).is_err());
        assert!(lloyd_max(&density, 1, &[0.0], opts).is_err());
    }

    #[test]
    fn codebook_validation_and_json() {
        assert!(Codebook::new(CodebookMethod::KMeans, vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(Codebook::new(CodebookMethod::KMeans, vec![1.0, 0.0], vec![-1.0, 0.5, 2.0]).is_err());
        assert!(Codebook::new(CodebookMethod::KMeans, vec![0.0], vec![-1.0]).is_err());

        let cb = gaussian_equiprobable_codebook(8).unwrap();
        let json = cb.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["method"], "GaussianEquiprobable");
        assert_eq!(value["kappa"], 8);
        let back = Codebook::from_json(&json).unwrap();
        assert_eq!(back, cb);
        assert_eq!(back.id(), cb.id());

        let bad = r#"{"method":"KMeans","kappa":3,"cutlines":[0.0],"centroids":[-1.0,1.0]}"#;
        assert!(Codebook::from_json(bad).is_err());
    }
}
