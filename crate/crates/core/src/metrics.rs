//! Distances between raw, reduced and symbolic series, and the
//! information-loss diagnostic.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{SymbolicSequence, TrainedEncoder};
use crate::density::{BandwidthRule, DensityModel, KernelKind};
use crate::error::{Error, Result};
use crate::series::{mean_std, paa_values, PaaSeries, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceKind {
    Euclidean,
    MinDist,
    MinDistPaa,
    Symbolic,
    ReconstructionError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub value: f64,
    pub kind: DistanceKind,
}

impl fmt::Display for DistanceResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}={}", self.kind, self.value)
    }
}

/// Unit of the information-loss estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum EntropyUnit {
    #[default]
    Nats,
    Bits,
}

/// `ln sqrt(2 pi e)`, the differential entropy of a standard normal.
pub const STD_GAUSSIAN_ENTROPY: f64 = 1.418_938_533_204_672_7;

pub fn euclidean(u: &TimeSeries, s: &TimeSeries) -> Result<f64> {
    euclidean_values(u.values(), s.values())
}

pub fn euclidean_values(u: &[f64], s: &[f64]) -> Result<f64> {
    if u.len() != s.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: s.len(),
        });
    }
    Ok(u.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

fn check_pair(c: &SymbolicSequence, q: &SymbolicSequence) -> Result<()> {
    if !c.same_codebook(q) {
        return Err(Error::CodebookMismatch);
    }
    if c.segments() != q.segments() {
        return Err(Error::LengthMismatch {
            left: c.segments(),
            right: q.segments(),
        });
    }
    if c.source_len() != q.source_len() {
        return Err(Error::LengthMismatch {
            left: c.source_len(),
            right: q.source_len(),
        });
    }
    Ok(())
}

/// Lower-bounding distance between two symbolic sequences.
///
/// Identical or adjacent symbols contribute nothing; otherwise the gap
/// between the facing cutlines of the two intervals.
pub fn mindist(c: &SymbolicSequence, q: &SymbolicSequence) -> Result<f64> {
    check_pair(c, q)?;
    let cb = c.codebook();
    let sum: f64 = c
        .symbols()
        .iter()
        .zip(q.symbols())
        .map(|(&a, &b)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if hi - lo <= 1 {
                0.0
            } else {
                let gap = cb.lower_cutline(hi) - cb.upper_cutline(lo);
                gap * gap
            }
        })
        .sum();
    Ok((c.segment_size() as f64 * sum).sqrt())
}

/// Lower-bounding distance between segment means and a symbolic sequence.
pub fn mindist_paa(y: &PaaSeries, q: &SymbolicSequence) -> Result<f64> {
    if y.segments() != q.segments() {
        return Err(Error::LengthMismatch {
            left: y.segments(),
            right: q.segments(),
        });
    }
    if y.source_len() != q.source_len() {
        return Err(Error::LengthMismatch {
            left: y.source_len(),
            right: q.source_len(),
        });
    }
    let cb = q.codebook();
    let sum: f64 = y
        .values()
        .iter()
        .zip(q.symbols())
        .map(|(&v, &s)| {
            let lo = cb.lower_cutline(s);
            let hi = cb.upper_cutline(s);
            if lo > v {
                (lo - v) * (lo - v)
            } else if hi < v {
                (v - hi) * (v - hi)
            } else {
                0.0
            }
        })
        .sum();
    Ok((q.segment_size() as f64 * sum).sqrt())
}

/// Parts of a tightness-of-lower-bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlbParts {
    pub mindist_paa: f64,
    /// Euclidean distance between the two series as they enter PAA.
    pub euclidean: f64,
}

impl TlbParts {
    pub fn ratio(&self) -> f64 {
        self.mindist_paa / self.euclidean
    }
}

/// Numerator and denominator of the TLB. Both are measured in the space the
/// encoder quantizes, i.e. after its normalization step.
pub fn tlb_parts(u: &TimeSeries, s: &TimeSeries, enc: &TrainedEncoder) -> Result<TlbParts> {
    let (u_norm, y) = enc.project(u)?;
    let (s_norm, s_paa) = enc.project(s)?;
    let d = euclidean(&u_norm, &s_norm)?;
    if d == 0.0 {
        return Err(Error::ZeroDistance);
    }
    let q = enc.encode_paa(&s_paa);
    Ok(TlbParts {
        mindist_paa: mindist_paa(&y, &q)?,
        euclidean: d,
    })
}

pub fn tlb(u: &TimeSeries, s: &TimeSeries, enc: &TrainedEncoder) -> Result<f64> {
    Ok(tlb_parts(u, s, enc)?.ratio())
}

/// Distance between the centroid values of two symbolic sequences.
pub fn dist_symbolic(q: &SymbolicSequence, c: &SymbolicSequence) -> Result<f64> {
    check_pair(q, c)?;
    let centroids = q.codebook().centroids();
    let sum: f64 = q
        .symbols()
        .iter()
        .zip(c.symbols())
        .map(|(&a, &b)| {
            let d = centroids[a as usize] - centroids[b as usize];
            d * d
        })
        .sum();
    Ok((q.segment_size() as f64 * sum).sqrt())
}

/// RMSE between a series and the piecewise-constant reconstruction of `c`.
pub fn dist_error(u: &TimeSeries, c: &SymbolicSequence) -> Result<f64> {
    let n = u.len();
    if n != c.source_len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: c.source_len(),
        });
    }
    let m = c.segment_size();
    let centroids = c.codebook().centroids();
    let sum: f64 = u
        .values()
        .chunks_exact(m)
        .zip(c.symbols())
        .map(|(chunk, &s)| {
            let cv = centroids[s as usize];
            chunk.iter().map(|&v| (v - cv) * (v - cv)).sum::<f64>()
        })
        .sum();
    Ok((sum / n as f64).sqrt())
}

/// Minimum sample count accepted by [`info_loss_to_std_gaussian`].
pub const INFO_LOSS_MIN_SAMPLES: usize = 1000;

/// KL divergence from the sample density to the standard normal.
///
/// The entropy is estimated by resubstitution over a Gaussian-kernel KDE.
pub fn info_loss_to_std_gaussian(samples: &[f64], unit: EntropyUnit) -> Result<f64> {
    if samples.len() < INFO_LOSS_MIN_SAMPLES {
        return Err(Error::TooShort {
            len: samples.len(),
            min: INFO_LOSS_MIN_SAMPLES,
        });
    }
    if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let (mean, std) = mean_std(samples);
    let variance = std * std;
    if mean.abs() > 0.01 || (variance - 1.0).abs() > 0.01 {
        return Err(Error::NotNormalized { mean, variance });
    }
    let density =
        DensityModel::with_rule(samples.to_vec(), KernelKind::Gaussian, BandwidthRule::Silverman)?;
    let values = density.evaluate_many(samples);
    let entropy = -values.iter().map(|f| f.ln()).sum::<f64>() / samples.len() as f64;
    let nats = STD_GAUSSIAN_ENTROPY - entropy;
    Ok(match unit {
        EntropyUnit::Nats => nats,
        EntropyUnit::Bits => nats / std::f64::consts::LN_2,
    })
}

/// Variance of the segment means of a Z-normalized series, a quick check of
/// the shrink that PAA applies to correlated or independent samples.
pub fn paa_variance(x: &TimeSeries, segments: usize) -> Result<f64> {
    let y = paa_values(x.values(), segments)?;
    let (_, std) = mean_std(&y);
    Ok(std * std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{fit, EncoderSpec, Method, Normalization};
    use crate::discretize::gaussian_equiprobable_codebook;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn ts(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    fn seq(symbols: &[u32], n: usize, kappa: usize) -> SymbolicSequence {
        let cb = Arc::new(gaussian_equiprobable_codebook(kappa).unwrap());
        SymbolicSequence::new(symbols.to_vec(), n, cb).unwrap()
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean(&ts(&[0.0, 0.0]), &ts(&[3.0, 4.0])).unwrap(), 5.0);
        assert_eq!(euclidean(&ts(&[1.0, 2.0]), &ts(&[1.0, 2.0])).unwrap(), 0.0);
        assert!(matches!(
            euclidean(&ts(&[1.0]), &ts(&[1.0, 2.0])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mindist_examples() {
        let q = 0.674_489_750_196_081_7;
        assert_abs_diff_eq!(mindist(&seq(&[0], 1, 4), &seq(&[3], 1, 4)).unwrap(), 2.0 * q, epsilon = 1e-9);
        assert_eq!(mindist(&seq(&[0, 1, 2], 3, 4), &seq(&[1, 2, 3], 3, 4)).unwrap(), 0.0);
        assert_eq!(mindist(&seq(&[2, 1], 4, 4), &seq(&[2, 1], 4, 4)).unwrap(), 0.0);
        // scale factor sqrt(N/M)
        let d = mindist(&seq(&[0], 4, 4), &seq(&[3], 4, 4)).unwrap();
        assert_abs_diff_eq!(d, 4.0 * q, epsilon = 1e-9);
        assert!(matches!(
            mindist(&seq(&[0], 1, 4), &seq(&[0], 1, 8)),
            Err(Error::CodebookMismatch)
        ));
    }

    #[test]
    fn mindist_paa_examples() {
        let y = PaaSeries::new(vec![-1.0], 1).unwrap();
        let d = mindist_paa(&y, &seq(&[3], 1, 4)).unwrap();
        assert_abs_diff_eq!(d, 1.674_489_750_196_081_7, epsilon = 1e-9);
        let y = PaaSeries::new(vec![-1.0, 0.3], 2).unwrap();
        assert_eq!(mindist_paa(&y, &seq(&[0, 2], 2, 4)).unwrap(), 0.0);
        // the infinite end of the bottom interval never contributes
        let y = PaaSeries::new(vec![-50.0], 1).unwrap();
        assert_eq!(mindist_paa(&y, &seq(&[0], 1, 4)).unwrap(), 0.0);
    }

    #[test]
    fn symbolic_and_error_examples() {
        let c = (2.0 / std::f64::consts::PI).sqrt();
        let d = dist_symbolic(&seq(&[0], 1, 2), &seq(&[1], 1, 2)).unwrap();
        assert_abs_diff_eq!(d, 2.0 * c, epsilon = 1e-12);
        let e = dist_error(&ts(&[0.5]), &seq(&[1], 1, 2)).unwrap();
        assert_abs_diff_eq!(e, c - 0.5, epsilon = 1e-12);
        let e = dist_error(&ts(&[c, c, -c, -c]), &seq(&[1, 0], 4, 2)).unwrap();
        assert_abs_diff_eq!(e, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn tlb_rejects_identical_series() {
        let enc = fit(EncoderSpec::new(Method::Sax, 2, 4), &[]).unwrap();
        let u = ts(&[1.0, 2.0, 3.0, 5.0]);
        assert!(matches!(tlb(&u, &u, &enc), Err(Error::ZeroDistance)));
        let s = ts(&[5.0, 1.0, 2.0, 2.0]);
        let t = tlb(&u, &s, &enc).unwrap();
        assert!((0.0..=1.0 + 1e-9).contains(&t));
    }

    #[test]
    fn encoding_minimizes_error_for_trained_codebooks() {
        let training: Vec<f64> = (0..400).map(|i| ((i * 7919) % 400) as f64 / 100.0 - 2.0).collect();
        for method in [Method::Asax, Method::Psax] {
            let enc = fit(
                EncoderSpec::new(method, 3, 3).with_normalization(Normalization::None),
                &training,
            )
            .unwrap();
            let u = ts(&[-1.7, 0.2, 1.1]);
            let best = dist_error(&u, &enc.encode(&u).unwrap()).unwrap();
            for a in 0..3u32 {
                for b in 0..3u32 {
                    for c in 0..3u32 {
                        let other =
                            SymbolicSequence::new(vec![a, b, c], 3, Arc::clone(enc.codebook())).unwrap();
                        assert!(best <= dist_error(&u, &other).unwrap() + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn info_loss_validation() {
        assert!(matches!(
            info_loss_to_std_gaussian(&[0.0; 10], EntropyUnit::Nats),
            Err(Error::TooShort { .. })
        ));
        let shifted: Vec<f64> = (0..2000).map(|i| if i % 2 == 0 { 1.5 } else { 0.5 }).collect();
        assert!(matches!(
            info_loss_to_std_gaussian(&shifted, EntropyUnit::Nats),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn info_loss_of_uniform() {
        // evenly spread points on [-sqrt 3, sqrt 3] have mean 0 and variance ~1
        let n = 20_000;
        let r = 3f64.sqrt();
        let mut x: Vec<f64> = (0..n).map(|i| -r + 2.0 * r * (i as f64 + 0.5) / n as f64).collect();
        let (m, s) = mean_std(&x);
        x.iter_mut().for_each(|v| *v = (*v - m) / s);
        let nats = info_loss_to_std_gaussian(&x, EntropyUnit::Nats).unwrap();
        let expected = STD_GAUSSIAN_ENTROPY - (2.0 * r).ln();
        assert!((nats - expected).abs() < 0.05, "{nats} vs {expected}");
        let bits = info_loss_to_std_gaussian(&x, EntropyUnit::Bits).unwrap();
        assert_abs_diff_eq!(bits, nats / std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn entropy_constant() {
        let e = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert_abs_diff_eq!(STD_GAUSSIAN_ENTROPY, e, epsilon = 1e-15);
    }
}
