use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::data::LabeledStream;
use crate::error::{Error, Result};

/// Length of each injected level-shift segment.
pub const LEVEL_SHIFT_SEGMENT: usize = 20;
/// Size of each level shift, in units of the noise standard deviation.
pub const LEVEL_SHIFT_MAGNITUDE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    GaussianIid,
    Ar1 { phi: f64 },
    /// Weight `weight` on `N(mu1, sd^2)`, the rest on `N(mu2, sd^2)`.
    BimodalMixture {
        mu1: f64,
        mu2: f64,
        weight: f64,
        sd: f64,
    },
    /// Standard-normal noise with labeled shifted segments covering about
    /// `rate` of the stream.
    LevelShiftAnomalies { rate: f64 },
}

impl SyntheticKind {
    pub fn name(&self) -> &'static str {
        match self {
            SyntheticKind::GaussianIid => "gaussian_iid",
            SyntheticKind::Ar1 { .. } => "ar1",
            SyntheticKind::BimodalMixture { .. } => "bimodal_mixture",
            SyntheticKind::LevelShiftAnomalies { .. } => "level_shift_anomalies",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SyntheticKind::GaussianIid => Ok(()),
            SyntheticKind::Ar1 { phi } if phi.abs() < 1.0 => Ok(()),
            SyntheticKind::Ar1 { phi } => Err(Error::InvalidParams(format!("ar1 needs |phi| < 1, got {phi}"))),
            SyntheticKind::BimodalMixture { mu1, mu2, weight, sd } => {
                if !(weight > 0.0 && weight < 1.0) {
                    return Err(Error::InvalidParams(format!("mixture weight must be in (0,1), got {weight}")));
                }
                if !(sd > 0.0 && sd.is_finite() && mu1.is_finite() && mu2.is_finite()) {
                    return Err(Error::InvalidParams("mixture needs finite means and sd > 0".into()));
                }
                Ok(())
            }
            SyntheticKind::LevelShiftAnomalies { rate } if rate > 0.0 && rate < 1.0 => Ok(()),
            SyntheticKind::LevelShiftAnomalies { rate } => {
                Err(Error::InvalidParams(format!("anomaly rate must be in (0,1), got {rate}")))
            }
        }
    }
}

/// Reproducible synthetic stream; labels are all false except for the
/// level-shift generator.
pub fn generate_synthetic(kind: SyntheticKind, length: usize, seed: u64) -> Result<LabeledStream> {
    kind.validate()?;
    if length == 0 {
        return Err(Error::InvalidParams("length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![false; length];
    let values = match kind {
        SyntheticKind::GaussianIid => (0..length).map(|_| normal(&mut rng)).collect(),
        SyntheticKind::Ar1 { phi } => {
            let mut x = normal(&mut rng) / (1.0 - phi * phi).sqrt();
            let mut v = Vec::with_capacity(length);
            for _ in 0..length {
                v.push(x);
                x = phi * x + normal(&mut rng);
            }
            v
        }
        SyntheticKind::BimodalMixture { mu1, mu2, weight, sd } => {
            let mut v = Vec::with_capacity(length);
            for _ in 0..length {
                let mu = if rng.random::<f64>() < weight { mu1 } else { mu2 };
                v.push(mu + sd * normal(&mut rng));
            }
            v
        }
        SyntheticKind::LevelShiftAnomalies { rate } => {
            let mut v: Vec<f64> = (0..length).map(|_| normal(&mut rng)).collect();
            let segments = ((rate * length as f64) / LEVEL_SHIFT_SEGMENT as f64).round().max(1.0) as usize;
            let slot = length / segments;
            if slot < 2 * LEVEL_SHIFT_SEGMENT {
                return Err(Error::InvalidParams(format!(
                    "stream of {length} samples is too short for anomaly rate {rate}"
                )));
            }
            let mut placer = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_A5A5);
            for k in 0..segments {
                // keep the first quarter of every slot clean
                let lo = slot / 4;
                let start = k * slot + placer.random_range(lo..=slot - LEVEL_SHIFT_SEGMENT);
                let sign = if placer.random_bool(0.5) { 1.0 } else { -1.0 };
                for i in start..start + LEVEL_SHIFT_SEGMENT {
                    v[i] += sign * LEVEL_SHIFT_MAGNITUDE;
                    labels[i] = true;
                }
            }
            v
        }
    };
    LabeledStream::new(kind.name(), values, labels)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}
