use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use psax::anomaly::{run_csax_detector, run_detector, write_events_csv, DetectionEvent, DetectorConfig};
use psax::codec::{fit, EncoderSpec, Method, Normalization, TrainedEncoder};
use psax::discretize::gaussian_equiprobable_codebook;
use psax::harness::{
    default_alpha_sweep, detector_roc, generate_synthetic, load_labeled_csv, load_series_csv,
    run_tlb_rmse_experiment, write_labeled_csv, DetectorKind, ExperimentGrid, SyntheticKind,
};
use psax::metrics::{info_loss_to_std_gaussian, EntropyUnit};
use psax::series::{paa_values, NormalizationStats, TimeSeries};

#[derive(Parser)]
#[command(name = "psax", version, about = "Symbolic time-series representations and streaming anomaly detection")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON file with an experiment grid (tlb-rmse) or detector settings (detect, roc).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sax,
    Asax,
    Psax,
    Csax,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Sax => Method::Sax,
            MethodArg::Asax => Method::Asax,
            MethodArg::Psax => Method::Psax,
            MethodArg::Csax => Method::Csax,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Raw,
    Paa,
    None,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Raw => Normalization::RawZNorm,
            NormArg::Paa => Normalization::PaaZNorm,
            NormArg::None => Normalization::None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Sax,
    Csax,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    GaussianIid,
    Ar1,
    BimodalMixture,
    LevelShiftAnomalies,
}

#[derive(Subcommand)]
enum Command {
    /// Train an encoder on the subsequences of a series and write it as JSON.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Segments per subsequence (M).
        #[arg(long)]
        segments: usize,
        /// Alphabet size; ignored by csax.
        #[arg(long, default_value_t = 8)]
        alphabet: usize,
        /// Subsequence length N; the whole series when omitted.
        #[arg(long)]
        length: Option<usize>,
        #[arg(long, value_enum)]
        normalization: Option<NormArg>,
    },
    /// Encode a series with a trained encoder.
    Encode {
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Average TLB and RMSE over random subsequence pairs for a parameter grid.
    TlbRmse {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Sax, MethodArg::Asax, MethodArg::Psax])]
        methods: Vec<MethodArg>,
        /// Pairs per grid cell, overriding the config.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Run the goodness-of-fit detector and write one event per window.
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = DetectorArg::Csax)]
        detector: DetectorArg,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        alphabet: Option<usize>,
        /// Raw samples averaged into each symbol.
        #[arg(long, default_value_t = 1)]
        segment_size: usize,
        /// Leading fraction of the stream used to train the csax clusters.
        #[arg(long, default_value_t = 0.0)]
        pretrain_fraction: f64,
        /// Write events as JSON instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// ROC curve of a detector over a labeled stream ("value,label" CSV).
    Roc {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = DetectorArg::Csax)]
        detector: DetectorArg,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        alphabet: Option<usize>,
        #[arg(long, default_value_t = 1)]
        segment_size: usize,
        #[arg(long, default_value_t = 0.0)]
        pretrain_fraction: f64,
        /// Significance levels to sweep.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// KL divergence from the sample distribution to a standard normal.
    InfoLoss {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        bits: bool,
    },
    /// Generate a synthetic stream as CSV.
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        #[arg(long, default_value_t = 10_000)]
        length: usize,
        #[arg(long, default_value_t = 0.9)]
        phi: f64,
        #[arg(long, default_value_t = -2.0)]
        mu1: f64,
        #[arg(long, default_value_t = 2.0)]
        mu2: f64,
        #[arg(long, default_value_t = 0.5)]
        weight: f64,
        #[arg(long, default_value_t = 0.5)]
        sd: f64,
        #[arg(long, default_value_t = 0.01)]
        rate: f64,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn load_series(path: &Path) -> Result<TimeSeries> {
    load_series_csv(path).with_context(|| format!("cannot load {}", path.display()))
}

fn detector_config(cli: &Cli, window: Option<usize>, alpha: Option<f64>, alphabet: Option<usize>) -> Result<DetectorConfig> {
    let mut cfg = match &cli.config {
        Some(p) => read_json(p)?,
        None => DetectorConfig::default(),
    };
    if let Some(w) = window {
        cfg.window = w;
    }
    if let Some(a) = alpha {
        cfg.alpha = a;
    }
    if let Some(k) = alphabet {
        cfg.alphabet = k;
    }
    Ok(cfg)
}

/// Segment means of consecutive non-overlapping windows of `length`.
fn training_values(x: &TimeSeries, length: usize, segments: usize, normalization: Normalization) -> Result<Vec<f64>> {
    if length == 0 || length > x.len() {
        bail!("subsequence length {length} does not fit a series of {} samples", x.len());
    }
    let reducer = fit(EncoderSpec::new(Method::Sax, segments, 2).with_normalization(normalization), &[])?;
    let mut values = Vec::new();
    for chunk in x.values().chunks_exact(length) {
        match reducer.reduce(&TimeSeries::new(chunk.to_vec())?) {
            Ok(p) => values.extend_from_slice(p.values()),
            // flat windows carry no shape information
            Err(psax::Error::ConstantSeries) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(values)
}

fn events_json(events: &[DetectionEvent]) -> serde_json::Value {
    serde_json::Value::Array(
        events
            .iter()
            .map(|e| {
                serde_json::json!({
                    "index": e.index,
                    "flag": format!("{:?}", e.flag).to_lowercase(),
                    "min_statistic": if e.min_statistic.is_finite() { serde_json::json!(e.min_statistic) } else { serde_json::json!("inf") },
                    "threshold": e.threshold,
                    "components_count": e.components,
                    "rebuild_flag": e.rebuilt,
                })
            })
            .collect(),
    )
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Fit {
            input,
            method,
            segments,
            alphabet,
            length,
            normalization,
        } => {
            let method = Method::from(*method);
            let mut spec = EncoderSpec::new(method, *segments, *alphabet).with_seed(cli.seed);
            if let Some(n) = normalization {
                spec = spec.with_normalization((*n).into());
            }
            let x = load_series(input)?;
            let training = training_values(&x, length.unwrap_or(x.len()), *segments, spec.normalization)?;
            let enc = fit(spec, &training)?;
            let mut w = output(&cli.out)?;
            writeln!(w, "{}", enc.to_json()?)?;
        }
        Command::Encode { encoder, input } => {
            let enc = TrainedEncoder::from_json(&std::fs::read_to_string(encoder)?)?;
            let s = enc.encode(&load_series(input)?)?;
            let mut w = output(&cli.out)?;
            writeln!(w, "{}", serde_json::to_string(&s.to_record())?)?;
        }
        Command::TlbRmse { input, methods, trials } => {
            let mut grid: ExperimentGrid = match &cli.config {
                Some(p) => read_json(p)?,
                None => ExperimentGrid::default(),
            };
            grid.seed = cli.seed;
            if let Some(t) = trials {
                grid.trials = *t;
            }
            let methods: Vec<Method> = methods.iter().map(|&m| m.into()).collect();
            let table = run_tlb_rmse_experiment(&load_series(input)?, &grid, &methods)?;
            table.write_csv(output(&cli.out)?)?;
        }
        Command::Detect {
            input,
            detector,
            window,
            alpha,
            alphabet,
            segment_size,
            pretrain_fraction,
            json,
        } => {
            let cfg = detector_config(&cli, *window, *alpha, *alphabet)?;
            let x = load_series(input)?;
            let events = match detector {
                DetectorArg::Sax => {
                    let stats = NormalizationStats::of(x.values())?;
                    let usable = x.len() - x.len() % segment_size;
                    let z: Vec<f64> = x.values()[..usable].iter().map(|&v| stats.apply(v)).collect();
                    let reduced = paa_values(&z, usable / segment_size)?;
                    let cb = gaussian_equiprobable_codebook(cfg.alphabet)?;
                    let symbols: Vec<u32> = reduced.iter().map(|&v| cb.quantize(v)).collect();
                    run_detector(&symbols, &cfg)?
                }
                DetectorArg::Csax => {
                    let split = ((pretrain_fraction * x.len() as f64) as usize) / segment_size * segment_size;
                    let (pre, rest) = x.values().split_at(split);
                    run_csax_detector(rest, &cfg, pre, *segment_size)?
                }
            };
            let mut w = output(&cli.out)?;
            if *json {
                writeln!(w, "{}", serde_json::to_string_pretty(&events_json(&events))?)?;
            } else {
                write_events_csv(w, &events)?;
            }
        }
        Command::Roc {
            input,
            detector,
            window,
            alphabet,
            segment_size,
            pretrain_fraction,
            alphas,
        } => {
            let cfg = detector_config(&cli, *window, None, *alphabet)?;
            let stream = load_labeled_csv(input).with_context(|| format!("cannot load {}", input.display()))?;
            let kind = match detector {
                DetectorArg::Sax => DetectorKind::SaxGof { alphabet: cfg.alphabet },
                DetectorArg::Csax => DetectorKind::CsaxGof {
                    pretrain_fraction: *pretrain_fraction,
                },
            };
            let alphas = alphas.clone().unwrap_or_else(default_alpha_sweep);
            let curve = detector_roc(&stream, kind, cfg.window, *segment_size, &alphas)?;
            let mut w = output(&cli.out)?;
            writeln!(w, "fpr,tpr")?;
            for (f, t) in &curve.points {
                writeln!(w, "{f},{t}")?;
            }
            eprintln!("auc={}", curve.auc);
        }
        Command::InfoLoss { input, bits } => {
            let x = load_series(input)?;
            let stats = NormalizationStats::of(x.values())?;
            let z: Vec<f64> = x.values().iter().map(|&v| stats.apply(v)).collect();
            let unit = if *bits { EntropyUnit::Bits } else { EntropyUnit::Nats };
            let loss = info_loss_to_std_gaussian(&z, unit)?;
            let mut w = output(&cli.out)?;
            writeln!(w, "{loss}")?;
        }
        Command::Gen {
            kind,
            length,
            phi,
            mu1,
            mu2,
            weight,
            sd,
            rate,
        } => {
            let kind = match kind {
                GenKind::GaussianIid => SyntheticKind::GaussianIid,
                GenKind::Ar1 => SyntheticKind::Ar1 { phi: *phi },
                GenKind::BimodalMixture => SyntheticKind::BimodalMixture {
                    mu1: *mu1,
                    mu2: *mu2,
                    weight: *weight,
                    sd: *sd,
                },
                GenKind::LevelShiftAnomalies => SyntheticKind::LevelShiftAnomalies { rate: *rate },
            };
            let stream = generate_synthetic(kind, *length, cli.seed)?;
            write_labeled_csv(output(&cli.out)?, &stream)?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
