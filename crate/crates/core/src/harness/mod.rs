//! Experiment plumbing: data ingestion, synthetic corpora, the TLB/RMSE
//! grid experiment and ROC evaluation of the detectors.

mod data;
mod experiment;
mod roc;
mod synth;

pub use data::{
    load_labeled_csv, load_series_csv, parse_labeled_csv, parse_series_csv, write_labeled_csv,
    write_series_csv, LabeledStream,
};
pub use experiment::{
    run_tlb_rmse_experiment, segments_for_budget, ExperimentGrid, GridCell, ResultRow, ResultTable,
};
pub use roc::{
    default_alpha_sweep, detector_roc, roc_from_decisions, roc_from_events, window_labels,
    DetectorKind, RocCurve,
};
pub use synth::{generate_synthetic, SyntheticKind, LEVEL_SHIFT_MAGNITUDE, LEVEL_SHIFT_SEGMENT};

/// Derives an independent seed for one unit of work, so parallel and serial
/// runs draw identical random numbers.
pub fn substream_seed(seed: u64, cell: u64, trial: u64) -> u64 {
    let mut z = seed;
    for part in [cell, trial] {
        z = splitmix(z ^ splitmix(part.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    z
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
