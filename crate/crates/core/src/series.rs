//! Time-series containers, Z-normalization and piecewise aggregate approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, non-empty real-valued sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeSeries(Vec<f64>);

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        check_finite(&values)?;
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for TimeSeries {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<TimeSeries> for Vec<f64> {
    fn from(series: TimeSeries) -> Self {
        series.0
    }
}

/// Segment means of a series of length `source_len` split into `values.len()` equal pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaaSeries {
    values: Vec<f64>,
    source_len: usize,
}

impl PaaSeries {
    pub fn new(values: Vec<f64>, source_len: usize) -> Result<Self> {
        let segments = values.len();
        if segments == 0 {
            return Err(Error::EmptySeries);
        }
        if segments > source_len || !source_len.is_multiple_of(segments) {
            return Err(Error::IndivisibleLength {
                len: source_len,
                segments,
            });
        }
        check_finite(&values)?;
        Ok(Self { values, source_len })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of segments, M.
    pub fn segments(&self) -> usize {
        self.values.len()
    }

    /// Samples per segment, N / M.
    pub fn segment_size(&self) -> usize {
        self.source_len / self.values.len()
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: f64,
    pub std: f64,
}

impl NormalizationStats {
    /// Population mean and standard deviation; fails on constant input.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooShort {
                len: values.len(),
                min: 2,
            });
        }
        let (mean, std) = mean_std(values);
        if std <= 0.0 || !std.is_finite() {
            return Err(Error::ConstantSeries);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }
}

/// Population mean and standard deviation (two-pass).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Z-normalize with the population standard deviation.
pub fn znormalize(x: &TimeSeries) -> Result<(TimeSeries, NormalizationStats)> {
    let stats = NormalizationStats::of(x.values())?;
    let values = x.values().iter().map(|&v| stats.apply(v)).collect();
    Ok((TimeSeries(values), stats))
}

/// Segment means over a slice; `segments` must divide the length.
pub fn paa_values(x: &[f64], segments: usize) -> Result<Vec<f64>> {
    if segments == 0 || !x.len().is_multiple_of(segments) || segments > x.len() {
        return Err(Error::IndivisibleLength {
            len: x.len(),
            segments,
        });
    }
    let m = x.len() / segments;
    Ok(x.chunks_exact(m)
        .map(|chunk| chunk.iter().sum::<f64>() / m as f64)
        .collect())
}

pub fn paa(x: &TimeSeries, segments: usize) -> Result<PaaSeries> {
    let values = paa_values(x.values(), segments)?;
    Ok(PaaSeries {
        values,
        source_len: x.len(),
    })
}

/// PAA on the raw series followed by Z-normalization of the segment means,
/// which restores unit variance of the reduced representation.
pub fn paa_then_znormalize(
    x: &TimeSeries,
    segments: usize,
) -> Result<(PaaSeries, NormalizationStats)> {
    let reduced = paa(x, segments)?;
    let stats = NormalizationStats::of(&reduced.values)?;
    let values = reduced.values.iter().map(|&v| stats.apply(v)).collect();
    Ok((
        PaaSeries {
            values,
            source_len: reduced.source_len,
        },
        stats,
    ))
}

/// Variance of the mean of `segment_size` unit-variance jointly Gaussian samples
/// whose distinct pairs have average correlation `rho_bar`.
pub fn paa_variance_prediction(segment_size: usize, rho_bar: f64) -> Result<f64> {
    if segment_size == 0 {
        return Err(Error::OutOfRange {
            what: "segment size",
            value: 0.0,
        });
    }
    let m = segment_size as f64;
    let lower = if segment_size > 1 { -1.0 / (m - 1.0) } else { -1.0 };
    if !rho_bar.is_finite() || rho_bar < lower || rho_bar > 1.0 {
        return Err(Error::OutOfRange {
            what: "average correlation",
            value: rho_bar,
        });
    }
    Ok((1.0 + (m - 1.0) * rho_bar) / m)
}
