//! Goodness-of-fit anomaly detection over symbol streams.
//!
//! A rolling window's empirical pmf is compared with every stored
//! null-hypothesis component through the G-statistic `2 n KL(P || Q)`. The
//! window is normal if it fits at least one component below the chi-squared
//! threshold; otherwise it is flagged and stored as a new component.

use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::discretize::{Codebook, Symbol};
use crate::error::{Error, Result};
use crate::meanshift::{dynamic_update_check, DynamicClusterState};
use crate::series::paa_values;

/// Component scans at least this long run in parallel.
const PARALLEL_SCAN: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalPmf {
    counts: Vec<u32>,
    n: u32,
}

impl EmpiricalPmf {
    pub fn from_counts(counts: Vec<u32>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::AlphabetTooSmall(counts.len()));
        }
        let n: u32 = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptySeries);
        }
        Ok(Self { counts, n })
    }

    pub fn kappa(&self) -> usize {
        self.counts.len()
    }

    pub fn window_len(&self) -> usize {
        self.n as usize
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn mass(&self, symbol: usize) -> f64 {
        f64::from(self.counts[symbol]) / f64::from(self.n)
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|s| self.mass(s)).collect()
    }
}

pub fn empirical_pmf(symbols: &[Symbol], kappa: usize) -> Result<EmpiricalPmf> {
    if symbols.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut counts = vec![0u32; kappa];
    for &s in symbols {
        *counts
            .get_mut(s as usize)
            .ok_or(Error::SymbolOutOfRange { symbol: s, kappa })? += 1;
    }
    EmpiricalPmf::from_counts(counts)
}

/// `KL(P || Q)` in nats; `+inf` if `Q` misses a symbol that `P` has.
pub fn kl_divergence(p: &EmpiricalPmf, q: &EmpiricalPmf) -> Result<f64> {
    if p.kappa() != q.kappa() {
        return Err(Error::AlphabetMismatch {
            left: p.kappa(),
            right: q.kappa(),
        });
    }
    Ok(kl_counts(p, q))
}

fn kl_counts(p: &EmpiricalPmf, q: &EmpiricalPmf) -> f64 {
    let (np, nq) = (f64::from(p.n), f64::from(q.n));
    let mut total = 0.0;
    for (&cp, &cq) in p.counts.iter().zip(&q.counts) {
        if cp == 0 {
            continue;
        }
        if cq == 0 {
            return f64::INFINITY;
        }
        let (cp, cq) = (f64::from(cp), f64::from(cq));
        total += cp / np * ((cp * nq) / (cq * np)).ln();
    }
    // rounding can leave a tiny negative value for equal pmfs
    total.max(0.0)
}

/// The G-statistic `2 n KL(P_X || P_Q)`.
pub fn gof_statistic(x: &EmpiricalPmf, q: &EmpiricalPmf) -> Result<f64> {
    if x.n != q.n {
        return Err(Error::WindowLengthMismatch {
            left: x.window_len(),
            right: q.window_len(),
        });
    }
    Ok(2.0 * f64::from(x.n) * kl_divergence(x, q)?)
}

/// Inverse CDF of the chi-squared distribution by bisection on the
/// regularized lower incomplete gamma function.
pub fn chi2_quantile(p: f64, dof: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfRange {
            what: "probability",
            value: p,
        });
    }
    if dof == 0 {
        return Err(Error::OutOfRange {
            what: "degrees of freedom",
            value: 0.0,
        });
    }
    let k = dof as f64 / 2.0;
    let cdf = |x: f64| gamma_lr(k, x / 2.0);
    let mut lo = 0.0;
    let mut hi = dof as f64 + 10.0 * (2.0 * dof as f64).sqrt() + 10.0;
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Window length in symbols.
    pub window: usize,
    /// Significance level.
    pub alpha: f64,
    /// Alphabet size; ignored by the cSAX detector.
    pub alphabet: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window: 50,
            alpha: 0.05,
            alphabet: 10,
        }
    }
}

impl DetectorConfig {
    fn validate(&self, check_alphabet: bool) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidParams(format!(
                "window length must be at least 2, got {}",
                self.window
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::OutOfRange {
                what: "alpha",
                value: self.alpha,
            });
        }
        if check_alphabet && self.alphabet < 2 {
            return Err(Error::AlphabetTooSmall(self.alphabet));
        }
        Ok(())
    }

    /// Rejection threshold for an alphabet of size `kappa`.
    pub fn threshold(&self, kappa: usize) -> Result<f64> {
        chi2_quantile(1.0 - self.alpha, kappa.saturating_sub(1).max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flag {
    Anomalous,
    Normal,
}

impl Flag {
    pub fn is_anomalous(self) -> bool {
        self == Flag::Anomalous
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    /// Position of the last symbol of the window.
    pub index: usize,
    pub flag: Flag,
    /// `+inf` when no component can explain the window.
    pub min_statistic: f64,
    pub threshold: f64,
    /// Stored components after this step.
    pub components: usize,
    /// Whether the codebook was rebuilt after this window (cSAX only).
    pub rebuilt: bool,
}

/// The stored null-hypothesis components.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NullHypothesisSet {
    components: Vec<EmpiricalPmf>,
}

impl NullHypothesisSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[EmpiricalPmf] {
        &self.components
    }

    /// Stores a component without testing it.
    pub fn push(&mut self, pmf: EmpiricalPmf) -> Result<()> {
        if let Some(first) = self.components.first() {
            if first.kappa() != pmf.kappa() {
                return Err(Error::AlphabetMismatch {
                    left: first.kappa(),
                    right: pmf.kappa(),
                });
            }
            if first.n != pmf.n {
                return Err(Error::WindowLengthMismatch {
                    left: first.window_len(),
                    right: pmf.window_len(),
                });
            }
        }
        self.components.push(pmf);
        Ok(())
    }

    /// Smallest statistic over all components, `+inf` for an empty set.
    pub fn min_statistic(&self, window: &EmpiricalPmf) -> Result<f64> {
        let Some(first) = self.components.first() else {
            return Ok(f64::INFINITY);
        };
        if first.kappa() != window.kappa() {
            return Err(Error::AlphabetMismatch {
                left: first.kappa(),
                right: window.kappa(),
            });
        }
        if first.n != window.n {
            return Err(Error::WindowLengthMismatch {
                left: first.window_len(),
                right: window.window_len(),
            });
        }
        let scale = 2.0 * f64::from(window.n);
        let stat = |q: &EmpiricalPmf| scale * kl_counts(window, q);
        let min = if self.components.len() >= PARALLEL_SCAN {
            self.components
                .par_iter()
                .map(stat)
                .reduce(|| f64::INFINITY, f64::min)
        } else {
            self.components.iter().map(stat).fold(f64::INFINITY, f64::min)
        };
        Ok(min)
    }

    fn replace(&mut self, components: Vec<EmpiricalPmf>) {
        self.components = components;
    }
}

/// One detector step: tests `window` and stores it if no component fits.
pub fn gof_step(
    state: &mut NullHypothesisSet,
    window: &EmpiricalPmf,
    threshold: f64,
    index: usize,
) -> Result<DetectionEvent> {
    let min_statistic = state.min_statistic(window)?;
    let flag = if min_statistic < threshold {
        Flag::Normal
    } else {
        state.push(window.clone())?;
        Flag::Anomalous
    };
    Ok(DetectionEvent {
        index,
        flag,
        min_statistic,
        threshold,
        components: state.len(),
        rebuilt: false,
    })
}

/// Runs the detector over a fixed-alphabet symbol stream, one event per
/// window position.
pub fn run_detector(symbols: &[Symbol], cfg: &DetectorConfig) -> Result<Vec<DetectionEvent>> {
    cfg.validate(true)?;
    let n = cfg.window;
    if symbols.len() < n {
        return Err(Error::StreamTooShort {
            len: symbols.len(),
            window: n,
        });
    }
    let kappa = cfg.alphabet;
    if let Some(&bad) = symbols.iter().find(|&&s| s as usize >= kappa) {
        return Err(Error::SymbolOutOfRange { symbol: bad, kappa });
    }
    let threshold = cfg.threshold(kappa)?;
    let mut state = NullHypothesisSet::new();
    let mut counts = vec![0u32; kappa];
    for &s in &symbols[..n - 1] {
        counts[s as usize] += 1;
    }
    let mut events = Vec::with_capacity(symbols.len() + 1 - n);
    for i in n - 1..symbols.len() {
        counts[symbols[i] as usize] += 1;
        if i >= n {
            counts[symbols[i - n] as usize] -= 1;
        }
        let window = EmpiricalPmf {
            counts: counts.clone(),
            n: n as u32,
        };
        events.push(gof_step(&mut state, &window, threshold, i)?);
    }
    Ok(events)
}

/// Streaming detector whose codebook is re-estimated by mean-shift while the
/// stream runs.
#[derive(Debug, Clone)]
pub struct CsaxDetector {
    cfg: DetectorConfig,
    segment_size: usize,
    clusters: Option<DynamicClusterState>,
    /// Reduced values waiting for the first codebook.
    bootstrap: Vec<f64>,
    /// Raw values of the current partial PAA segment.
    segment: Vec<f64>,
    window: VecDeque<f64>,
    null_set: NullHypothesisSet,
    /// Reduced windows behind each stored component.
    stored_windows: Vec<Vec<f64>>,
    threshold: f64,
    /// Index of the next reduced value.
    position: usize,
    flagged: bool,
    rebuilds: usize,
}

impl CsaxDetector {
    /// `segment_size` raw samples are averaged into each symbol; 1 disables
    /// the reduction. `pretraining` is raw data and may be empty.
    pub fn new(cfg: DetectorConfig, pretraining: &[f64], segment_size: usize) -> Result<Self> {
        cfg.validate(false)?;
        if segment_size == 0 {
            return Err(Error::InvalidParams("segment size must be at least 1".into()));
        }
        if let Some(index) = pretraining.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let usable = pretraining.len() - pretraining.len() % segment_size;
        let clusters = if usable == 0 {
            None
        } else {
            let reduced = paa_values(&pretraining[..usable], usable / segment_size)?;
            Some(DynamicClusterState::new(reduced)?)
        };
        let threshold = match &clusters {
            Some(c) => cfg.threshold(c.codebook().kappa())?,
            None => f64::INFINITY,
        };
        Ok(Self {
            cfg,
            segment_size,
            clusters,
            bootstrap: Vec::new(),
            segment: Vec::with_capacity(segment_size),
            window: VecDeque::with_capacity(cfg.window + 1),
            null_set: NullHypothesisSet::new(),
            stored_windows: Vec::new(),
            threshold,
            position: 0,
            flagged: false,
            rebuilds: 0,
        })
    }

    pub fn codebook(&self) -> Option<&Codebook> {
        self.clusters.as_ref().map(|c| c.codebook())
    }

    pub fn null_set(&self) -> &NullHypothesisSet {
        &self.null_set
    }

    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    /// Feeds one raw sample; returns an event when a full window closes.
    pub fn push(&mut self, x: f64) -> Result<Option<DetectionEvent>> {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                index: self.position * self.segment_size + self.segment.len(),
            });
        }
        self.segment.push(x);
        if self.segment.len() < self.segment_size {
            return Ok(None);
        }
        let v = self.segment.iter().sum::<f64>() / self.segment_size as f64;
        self.segment.clear();
        let index = self.position;
        self.position += 1;
        self.push_reduced(v, index)
    }

    fn push_reduced(&mut self, v: f64, index: usize) -> Result<Option<DetectionEvent>> {
        let n = self.cfg.window;
        self.window.push_back(v);
        if self.window.len() > n {
            self.window.pop_front();
        }

        let Some(clusters) = self.clusters.as_mut() else {
            self.bootstrap.push(v);
            if self.bootstrap.len() < n {
                return Ok(None);
            }
            let state = DynamicClusterState::new(std::mem::take(&mut self.bootstrap))?;
            self.threshold = self.cfg.threshold(state.codebook().kappa())?;
            self.clusters = Some(state);
            let mut event = self.evaluate(index)?;
            // the bootstrap samples are already part of the history
            if event.flag.is_anomalous() {
                event.rebuilt = self.rebuild()?;
            }
            self.flagged = event.flag.is_anomalous();
            return Ok(Some(event));
        };

        if self.window.len() < n {
            clusters.observe(v);
            return Ok(None);
        }
        let mut event = self.evaluate(index)?;
        let clusters = self.clusters.as_mut().expect("codebook present");
        let rebuild = dynamic_update_check(clusters, event.flag.is_anomalous(), v);
        clusters.observe(v);
        if rebuild {
            event.rebuilt = self.rebuild()?;
        }
        self.flagged = event.flag.is_anomalous();
        Ok(Some(event))
    }

    fn window_pmf(&self, codebook: &Codebook, values: &[f64]) -> Result<EmpiricalPmf> {
        let mut counts = vec![0u32; codebook.kappa()];
        for &v in values {
            counts[codebook.quantize(v) as usize] += 1;
        }
        EmpiricalPmf::from_counts(counts)
    }

    fn evaluate(&mut self, index: usize) -> Result<DetectionEvent> {
        let codebook = self.clusters.as_ref().expect("codebook present").codebook();
        let values: Vec<f64> = self.window.iter().copied().collect();
        let pmf = self.window_pmf(codebook, &values)?;
        let event = gof_step(&mut self.null_set, &pmf, self.threshold, index)?;
        if event.flag.is_anomalous() {
            self.stored_windows.push(values);
        }
        Ok(event)
    }

    /// Re-estimates the clusters and re-expresses every stored component.
    fn rebuild(&mut self) -> Result<bool> {
        let clusters = self.clusters.as_mut().expect("codebook present");
        if !clusters.rebuild()? {
            return Ok(false);
        }
        self.rebuilds += 1;
        let codebook = self.clusters.as_ref().expect("codebook present").codebook();
        let components = self
            .stored_windows
            .iter()
            .map(|w| self.window_pmf(codebook, w))
            .collect::<Result<Vec<_>>>()?;
        self.threshold = self.cfg.threshold(codebook.kappa())?;
        self.null_set.replace(components);
        Ok(true)
    }

    /// Whether the last window was flagged.
    pub fn last_flagged(&self) -> bool {
        self.flagged
    }
}

/// Runs the cSAX detector over a raw stream. Event indices count reduced
/// values (symbols), not raw samples.
pub fn run_csax_detector(
    raw: &[f64],
    cfg: &DetectorConfig,
    pretraining: &[f64],
    segment_size: usize,
) -> Result<Vec<DetectionEvent>> {
    let symbols = raw.len() / segment_size.max(1);
    if symbols < cfg.window {
        return Err(Error::StreamTooShort {
            len: symbols,
            window: cfg.window,
        });
    }
    let mut detector = CsaxDetector::new(*cfg, pretraining, segment_size)?;
    let mut events = Vec::with_capacity(symbols);
    for &x in raw {
        if let Some(event) = detector.push(x)? {
            events.push(event);
        }
    }
    Ok(events)
}

/// Writes events as CSV with columns
/// `index,flag,min_statistic,threshold,components_count,rebuild_flag`.
pub fn write_events_csv<W: Write>(writer: W, events: &[DetectionEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "index",
        "flag",
        "min_statistic",
        "threshold",
        "components_count",
        "rebuild_flag",
    ])?;
    for e in events {
        w.write_record([
            e.index.to_string(),
            match e.flag {
                Flag::Anomalous => "anomalous".to_string(),
                Flag::Normal => "normal".to_string(),
            },
            e.min_statistic.to_string(),
            e.threshold.to_string(),
            e.components.to_string(),
            u8::from(e.rebuilt).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
