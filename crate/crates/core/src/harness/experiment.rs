use std::io::{Read, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::substream_seed;
use crate::codec::{fit, EncoderSpec, Method, Normalization, TrainedEncoder};
use crate::error::{Error, Result};
use crate::metrics::{dist_error, tlb};
use crate::series::TimeSeries;

/// Give up on a pair after this many draws of identical or flat windows.
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentGrid {
    /// Subsequence lengths N.
    pub lengths: Vec<usize>,
    /// Storage budgets per subsequence, in bytes.
    pub bytes: Vec<usize>,
    pub alphabets: Vec<usize>,
    /// Random pairs per grid cell.
    pub trials: usize,
    pub seed: u64,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            lengths: vec![480, 960, 1440, 1920],
            bytes: vec![8, 16, 24, 40],
            alphabets: vec![16, 256],
            trials: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridCell {
    pub length: usize,
    pub bytes: usize,
    pub alphabet: usize,
    pub segments: usize,
}

/// Segments affordable with `bytes` of storage at `log2(kappa)` bits each.
pub fn segments_for_budget(bytes: usize, kappa: usize) -> Result<usize> {
    if kappa < 2 {
        return Err(Error::AlphabetTooSmall(kappa));
    }
    let m = (bytes as f64 * 8.0 / (kappa as f64).log2()).round() as usize;
    if m == 0 {
        return Err(Error::GridInfeasible(format!(
            "{bytes} bytes cannot hold one symbol of a {kappa}-letter alphabet"
        )));
    }
    Ok(m)
}

impl ExperimentGrid {
    /// All cells in row-major order (length, bytes, alphabet).
    pub fn cells(&self) -> Result<Vec<GridCell>> {
        let mut cells = Vec::new();
        for &length in &self.lengths {
            for &bytes in &self.bytes {
                for &alphabet in &self.alphabets {
                    let segments = segments_for_budget(bytes, alphabet)?;
                    if length % segments != 0 {
                        return Err(Error::GridInfeasible(format!(
                            "N={length} is not divisible by M={segments} (bytes={bytes}, kappa={alphabet})"
                        )));
                    }
                    cells.push(GridCell {
                        length,
                        bytes,
                        alphabet,
                        segments,
                    });
                }
            }
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(rename = "N")]
    pub length: usize,
    pub bytes: usize,
    pub kappa: usize,
    #[serde(rename = "M")]
    pub segments: usize,
    pub method: Method,
    /// Alphabet size actually used; differs from `kappa` for cSAX.
    pub fitted_kappa: usize,
    pub trials: usize,
    pub mean_tlb: f64,
    pub mean_rmse: f64,
}

const HEADER: [&str; 9] = [
    "N",
    "bytes",
    "kappa",
    "M",
    "method",
    "fitted_kappa",
    "trials",
    "mean_tlb",
    "mean_rmse",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        w.write_record(HEADER)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn row(&self, length: usize, bytes: usize, kappa: usize, method: Method) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.length == length && r.bytes == bytes && r.kappa == kappa && r.method == method)
    }
}

/// Prefix sums giving O(1) window statistics over the corpus.
struct Corpus<'a> {
    values: &'a [f64],
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl<'a> Corpus<'a> {
    fn new(values: &'a [f64]) -> Self {
        let mut sum = Vec::with_capacity(values.len() + 1);
        let mut sum_sq = Vec::with_capacity(values.len() + 1);
        let (mut s, mut q) = (0.0, 0.0);
        sum.push(0.0);
        sum_sq.push(0.0);
        for &v in values {
            s += v;
            q += v * v;
            sum.push(s);
            sum_sq.push(q);
        }
        Self { values, sum, sum_sq }
    }

    /// Mean and population standard deviation of `values[start..start+len]`;
    /// `None` for a flat window.
    fn stats(&self, start: usize, len: usize) -> Option<(f64, f64)> {
        let n = len as f64;
        let mean = (self.sum[start + len] - self.sum[start]) / n;
        let var = (self.sum_sq[start + len] - self.sum_sq[start]) / n - mean * mean;
        (var > 1e-12 * mean.abs().max(1.0).powi(2)).then(|| (mean, var.sqrt()))
    }

    fn normalized(&self, start: usize, len: usize) -> Option<Vec<f64>> {
        let window = &self.values[start..start + len];
        let n = len as f64;
        let mean = window.iter().sum::<f64>() / n;
        let var = window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var <= 0.0 || self.stats(start, len).is_none() {
            return None;
        }
        let sd = var.sqrt();
        Some(window.iter().map(|v| (v - mean) / sd).collect())
    }
}

/// Normalized segment means drawn without replacement from the `L` segment
/// means of all subsequences, `ceil(sqrt(L))` of them.
fn training_sample(corpus: &Corpus, cell: &GridCell, seed: u64) -> Vec<f64> {
    let n = cell.length;
    let m = cell.segments;
    let seg = n / m;
    let starts = corpus.values.len() - n + 1;
    let total = starts * m;
    let k = (total as f64).sqrt().ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    index::sample(&mut rng, total, k.min(total))
        .into_iter()
        .filter_map(|idx| {
            let (start, segment) = (idx / m, idx % m);
            let (mean, sd) = corpus.stats(start, n)?;
            let a = start + segment * seg;
            let seg_mean = (corpus.sum[a + seg] - corpus.sum[a]) / seg as f64;
            Some((seg_mean - mean) / sd)
        })
        .collect()
}

struct TrialResult {
    tlb: Vec<f64>,
    rmse: Vec<f64>,
}

fn run_trial(corpus: &Corpus, cell: &GridCell, encoders: &[TrainedEncoder], seed: u64) -> Result<TrialResult> {
    let n = cell.length;
    let starts = corpus.values.len() - n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REDRAWS {
        let i = rng.random_range(0..starts);
        let j = rng.random_range(0..starts);
        let (Some(u), Some(s)) = (corpus.normalized(i, n), corpus.normalized(j, n)) else {
            continue;
        };
        if u == s {
            continue;
        }
        let u = TimeSeries::new(u)?;
        let s = TimeSeries::new(s)?;
        let mut result = TrialResult {
            tlb: Vec::with_capacity(encoders.len()),
            rmse: Vec::with_capacity(encoders.len()),
        };
        for enc in encoders {
            match tlb(&u, &s, enc) {
                Ok(t) => result.tlb.push(t),
                // identical after normalization
                Err(Error::ZeroDistance) => break,
                Err(e) => return Err(e),
            }
            result.rmse.push(dist_error(&u, &enc.encode(&u)?)?);
        }
        if result.tlb.len() == encoders.len() {
            return Ok(result);
        }
    }
    Err(Error::InvalidParams(
        "corpus has too few distinct non-flat subsequences".into(),
    ))
}

/// Average TLB and RMSE of each method over random subsequence pairs, for
/// every cell of the grid. Subsequences are Z-normalized individually.
pub fn run_tlb_rmse_experiment(
    corpus: &TimeSeries,
    grid: &ExperimentGrid,
    methods: &[Method],
) -> Result<ResultTable> {
    let cells = grid.cells()?;
    let max_len = cells.iter().map(|c| c.length).max().unwrap_or(0);
    if corpus.len() < max_len {
        return Err(Error::TooShort {
            len: corpus.len(),
            min: max_len,
        });
    }
    let data = Corpus::new(corpus.values());
    let mut table = ResultTable::default();
    if grid.trials == 0 {
        return Ok(table);
    }
    for (cell_id, cell) in cells.iter().enumerate() {
        let cell_seed = substream_seed(grid.seed, cell_id as u64, 0);
        let training = training_sample(&data, cell, cell_seed);
        let encoders = methods
            .iter()
            .map(|&method| {
                let spec = EncoderSpec::new(method, cell.segments, cell.alphabet)
                    .with_normalization(Normalization::None)
                    .with_seed(cell_seed);
                fit(spec, &training)
            })
            .collect::<Result<Vec<_>>>()?;
        let trials = (0..grid.trials)
            .into_par_iter()
            .map(|t| {
                run_trial(
                    &data,
                    cell,
                    &encoders,
                    substream_seed(grid.seed, cell_id as u64, t as u64 + 1),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        for (k, (&method, enc)) in methods.iter().zip(&encoders).enumerate() {
            let count = trials.len() as f64;
            table.rows.push(ResultRow {
                length: cell.length,
                bytes: cell.bytes,
                kappa: cell.alphabet,
                segments: cell.segments,
                method,
                fitted_kappa: enc.codebook().kappa(),
                trials: trials.len(),
                mean_tlb: trials.iter().map(|t| t.tlb[k]).sum::<f64>() / count,
                mean_rmse: trials.iter().map(|t| t.rmse[k]).sum::<f64>() / count,
            });
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{generate_synthetic, SyntheticKind};

    #[test]
    fn budget_arithmetic_matches_the_published_grids() {
        let m256: Vec<usize> = [8, 16, 24, 40].iter().map(|&b| segments_for_budget(b, 256).unwrap()).collect();
        assert_eq!(m256, vec![8, 16, 24, 40]);
        let m16: Vec<usize> = [8, 16, 24, 40].iter().map(|&b| segments_for_budget(b, 16).unwrap()).collect();
        assert_eq!(m16, vec![16, 32, 48, 80]);
        assert!(ExperimentGrid::default().cells().is_ok());
        let bad = ExperimentGrid {
            lengths: vec![100],
            bytes: vec![24],
            alphabets: vec![16],
            ..Default::default()
        };
        assert!(matches!(bad.cells(), Err(Error::GridInfeasible(_))));
    }

    fn small_grid(trials: usize) -> ExperimentGrid {
        ExperimentGrid {
            lengths: vec![64],
            bytes: vec![4],
            alphabets: vec![16],
            trials,
            seed: 3,
        }
    }

    #[test]
    fn zero_trials_gives_header_only() {
        let corpus = generate_synthetic(SyntheticKind::GaussianIid, 1000, 1).unwrap().series().unwrap();
        let table = run_tlb_rmse_experiment(&corpus, &small_grid(0), &Method::ALL).unwrap();
        assert!(table.rows.is_empty());
        assert_eq!(table.to_csv_string().unwrap(), "N,bytes,kappa,M,method,fitted_kappa,trials,mean_tlb,mean_rmse\n");
    }

    #[test]
    fn table_round_trips_and_is_deterministic() {
        let corpus = generate_synthetic(SyntheticKind::Ar1 { phi: 0.8 }, 3000, 2).unwrap().series().unwrap();
        let a = run_tlb_rmse_experiment(&corpus, &small_grid(20), &Method::ALL).unwrap();
        let b = run_tlb_rmse_experiment(&corpus, &small_grid(20), &Method::ALL).unwrap();
        assert_eq!(a.rows.len(), 4);
        let text = a.to_csv_string().unwrap();
        assert_eq!(text, b.to_csv_string().unwrap());
        let back = ResultTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, a);
        for row in &a.rows {
            assert!(row.mean_tlb > 0.0 && row.mean_tlb <= 1.0 + 1e-9, "{row:?}");
        }
    }

    #[test]
    fn flat_windows_are_redrawn() {
        let mut v = vec![1.0; 2000];
        v.extend((0..2000).map(|i| ((i * 17) % 23) as f64));
        let corpus = TimeSeries::new(v).unwrap();
        let table = run_tlb_rmse_experiment(&corpus, &small_grid(10), &[Method::Sax]).unwrap();
        assert_eq!(table.rows[0].trials, 10);
    }

    #[test]
    fn corpus_too_short() {
        let corpus = TimeSeries::new(vec![0.0, 1.0]).unwrap();
        assert!(run_tlb_rmse_experiment(&corpus, &small_grid(1), &[Method::Sax]).is_err());
    }
}
