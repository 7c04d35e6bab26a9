//! End-to-end symbolic encoders: SAX, aSAX, pSAX and cSAX.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{BandwidthRule, DensityModel, KernelKind};
use crate::discretize::{
    gaussian_equiprobable_codebook, kmeans_codebook, kmeans_pp_init, lloyd_max, Codebook,
    CodebookMethod, LloydMaxOptions, Symbol,
};
use crate::error::{Error, Result};
use crate::meanshift::mean_shift_codebook;
use crate::series::{paa, paa_then_znormalize, znormalize, NormalizationStats, PaaSeries, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SAX")]
    Sax,
    #[serde(rename = "ASAX")]
    Asax,
    #[serde(rename = "PSAX")]
    Psax,
    #[serde(rename = "CSAX")]
    Csax,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sax, Method::Asax, Method::Psax, Method::Csax];

    pub fn codebook_method(self) -> CodebookMethod {
        match self {
            Method::Sax => CodebookMethod::GaussianEquiprobable,
            Method::Asax => CodebookMethod::KMeans,
            Method::Psax => CodebookMethod::LloydMax,
            Method::Csax => CodebookMethod::MeanShift,
        }
    }

    pub fn default_normalization(self) -> Normalization {
        match self {
            Method::Sax | Method::Asax => Normalization::PaaZNorm,
            Method::Psax | Method::Csax => Normalization::None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Sax => "SAX",
            Method::Asax => "aSAX",
            Method::Psax => "pSAX",
            Method::Csax => "cSAX",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sax" => Ok(Method::Sax),
            "asax" => Ok(Method::Asax),
            "psax" => Ok(Method::Psax),
            "csax" => Ok(Method::Csax),
            other => Err(Error::InvalidParams(format!("unknown method {other:?}"))),
        }
    }
}

/// How a series is normalized before (or after) the PAA step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Normalization {
    /// Z-normalize the raw series, then PAA.
    RawZNorm,
    /// PAA on the raw series, then Z-normalize the segment means.
    PaaZNorm,
    None,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "rawznorm" | "raw" => Ok(Normalization::RawZNorm),
            "paaznorm" | "paa" => Ok(Normalization::PaaZNorm),
            "none" => Ok(Normalization::None),
            other => Err(Error::InvalidParams(format!("unknown normalization {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub method: Method,
    /// Number of PAA segments, M.
    pub segments: usize,
    /// Alphabet size; ignored by cSAX, which picks it from the data.
    pub alphabet: usize,
    pub normalization: Normalization,
    pub seed: u64,
}

impl EncoderSpec {
    pub fn new(method: Method, segments: usize, alphabet: usize) -> Self {
        Self {
            method,
            segments,
            alphabet,
            normalization: method.default_normalization(),
            seed: 0,
        }
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::InvalidParams("segment count must be at least 1".into()));
        }
        if self.method != Method::Csax && self.alphabet < 2 {
            return Err(Error::AlphabetTooSmall(self.alphabet));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedEncoder {
    spec: EncoderSpec,
    codebook: Arc<Codebook>,
    /// Mean and spread of the training samples, when they have any spread.
    training_stats: Option<NormalizationStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    density: Option<DensityModel>,
}

/// Trains an encoder on PAA samples.
pub fn fit(spec: EncoderSpec, training: &[f64]) -> Result<TrainedEncoder> {
    spec.validate()?;
    if spec.method != Method::Sax && training.is_empty() {
        return Err(Error::EmptyTraining);
    }
    if let Some(index) = training.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let training_stats = NormalizationStats::of(training).ok();
    let (codebook, density) = match spec.method {
        Method::Sax => (gaussian_equiprobable_codebook(spec.alphabet)?, None),
        Method::Asax => (kmeans_codebook(training, spec.alphabet, spec.seed)?, None),
        Method::Psax => {
            let density = DensityModel::with_rule(
                training.to_vec(),
                KernelKind::Epanechnikov,
                BandwidthRule::Silverman,
            )?;
            let mut init = kmeans_pp_init(training, spec.alphabet, spec.seed)?;
            init.sort_by(f64::total_cmp);
            let codebook =
                match lloyd_max(&density, spec.alphabet, &init, LloydMaxOptions::default()) {
                    Ok((cb, _)) => cb,
                    // the partial codebook satisfies every codebook invariant
                    Err(Error::LloydMaxNoConvergence { codebook, .. }) => *codebook,
                    Err(e) => return Err(e),
                };
            (codebook, Some(density))
        }
        Method::Csax => {
            let fit = mean_shift_codebook(training)?;
            (fit.codebook, Some(fit.density))
        }
    };
    Ok(TrainedEncoder {
        spec,
        codebook: Arc::new(codebook),
        training_stats,
        density,
    })
}

impl TrainedEncoder {
    /// Wraps an existing codebook, e.g. one loaded from disk.
    pub fn from_codebook(spec: EncoderSpec, codebook: Codebook) -> Result<Self> {
        spec.validate()?;
        if codebook.method() != spec.method.codebook_method() {
            return Err(Error::InvalidParams(format!(
                "codebook method {} does not match encoder method {}",
                codebook.method(),
                spec.method
            )));
        }
        Ok(Self {
            spec,
            codebook: Arc::new(codebook),
            training_stats: None,
            density: None,
        })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn codebook(&self) -> &Arc<Codebook> {
        &self.codebook
    }

    pub fn training_stats(&self) -> Option<NormalizationStats> {
        self.training_stats
    }

    pub fn density(&self) -> Option<&DensityModel> {
        self.density.as_ref()
    }

    /// The series in the space entering PAA, and its PAA.
    ///
    /// Under `PaaZNorm` the first component is the raw series mapped through
    /// the affine transform that normalizes its segment means, so its PAA is
    /// the normalized PAA.
    pub fn project(&self, x: &TimeSeries) -> Result<(TimeSeries, PaaSeries)> {
        let m = self.spec.segments;
        match self.spec.normalization {
            Normalization::RawZNorm => {
                let (z, _) = znormalize(x)?;
                let p = paa(&z, m)?;
                Ok((z, p))
            }
            Normalization::PaaZNorm => {
                let (p, stats) = paa_then_znormalize(x, m)?;
                let z = TimeSeries::new(x.values().iter().map(|&v| stats.apply(v)).collect())?;
                Ok((z, p))
            }
            Normalization::None => {
                let p = paa(x, m)?;
                Ok((x.clone(), p))
            }
        }
    }

    /// Normalization and PAA only.
    pub fn reduce(&self, x: &TimeSeries) -> Result<PaaSeries> {
        let m = self.spec.segments;
        match self.spec.normalization {
            Normalization::RawZNorm => paa(&znormalize(x)?.0, m),
            Normalization::PaaZNorm => Ok(paa_then_znormalize(x, m)?.0),
            Normalization::None => paa(x, m),
        }
    }

    pub fn encode(&self, x: &TimeSeries) -> Result<SymbolicSequence> {
        Ok(self.encode_paa(&self.reduce(x)?))
    }

    /// Quantizes already-reduced segment means.
    pub fn encode_paa(&self, y: &PaaSeries) -> SymbolicSequence {
        SymbolicSequence {
            symbols: y.values().iter().map(|&v| self.codebook.quantize(v)).collect(),
            source_len: y.source_len(),
            codebook: Arc::clone(&self.codebook),
        }
    }

    /// Piecewise-constant reconstruction from centroids, in normalized space.
    pub fn decode(&self, s: &SymbolicSequence) -> Result<TimeSeries> {
        if s.codebook.id() != self.codebook.id() {
            return Err(Error::CodebookMismatch);
        }
        s.reconstruct()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let enc: TrainedEncoder = serde_json::from_str(json)?;
        if enc.codebook.method() != enc.spec.method.codebook_method() {
            return Err(Error::InvalidParams("codebook method disagrees with spec".into()));
        }
        Ok(enc)
    }
}

/// Symbols of a reduced series together with the codebook that produced them.
#[derive(Debug, Clone)]
pub struct SymbolicSequence {
    symbols: Vec<Symbol>,
    source_len: usize,
    codebook: Arc<Codebook>,
}

/// Wire form of a [`SymbolicSequence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicRecord {
    #[serde(rename = "N")]
    pub source_len: usize,
    #[serde(rename = "M")]
    pub segments: usize,
    pub kappa: usize,
    pub codebook_id: String,
    pub symbols: Vec<Symbol>,
}

impl SymbolicSequence {
    pub fn new(symbols: Vec<Symbol>, source_len: usize, codebook: Arc<Codebook>) -> Result<Self> {
        let m = symbols.len();
        if m == 0 {
            return Err(Error::EmptySeries);
        }
        if !source_len.is_multiple_of(m) || source_len < m {
            return Err(Error::IndivisibleLength {
                len: source_len,
                segments: m,
            });
        }
        let kappa = codebook.kappa();
        if let Some(&bad) = symbols.iter().find(|&&s| s as usize >= kappa) {
            return Err(Error::SymbolOutOfRange { symbol: bad, kappa });
        }
        Ok(Self {
            symbols,
            source_len,
            codebook,
        })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn segments(&self) -> usize {
        self.symbols.len()
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn segment_size(&self) -> usize {
        self.source_len / self.symbols.len()
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn same_codebook(&self, other: &SymbolicSequence) -> bool {
        Arc::ptr_eq(&self.codebook, &other.codebook) || self.codebook.id() == other.codebook.id()
    }

    /// Centroid value of each symbol.
    pub fn centroid_values(&self) -> Vec<f64> {
        let c = self.codebook.centroids();
        self.symbols.iter().map(|&s| c[s as usize]).collect()
    }

    pub fn reconstruct(&self) -> Result<TimeSeries> {
        let m = self.segment_size();
        let values = self
            .centroid_values()
            .into_iter()
            .flat_map(|c| std::iter::repeat_n(c, m))
            .collect();
        TimeSeries::new(values)
    }

    pub fn to_record(&self) -> SymbolicRecord {
        SymbolicRecord {
            source_len: self.source_len,
            segments: self.symbols.len(),
            kappa: self.codebook.kappa(),
            codebook_id: self.codebook.id(),
            symbols: self.symbols.clone(),
        }
    }

    /// Re-attaches a record to its codebook; the fingerprint must match.
    pub fn from_record(record: SymbolicRecord, codebook: Arc<Codebook>) -> Result<Self> {
        if record.codebook_id != codebook.id() || record.kappa != codebook.kappa() {
            return Err(Error::CodebookMismatch);
        }
        if record.segments != record.symbols.len() {
            return Err(Error::LengthMismatch {
                left: record.segments,
                right: record.symbols.len(),
            });
        }
        Self::new(record.symbols, record.source_len, codebook)
    }
}

pub fn encode(enc: &TrainedEncoder, x: &TimeSeries) -> Result<SymbolicSequence> {
    enc.encode(x)
}

pub fn decode(enc: &TrainedEncoder, s: &SymbolicSequence) -> Result<TimeSeries> {
    enc.decode(s)
}
