//! Data-driven symbolic representations of time series.
//!
//! Four discretization schemes share one pipeline (normalization, piecewise
//! aggregate approximation, scalar quantization):
//!
//! * SAX: equiprobable intervals of the standard normal,
//! * aSAX: k-means on the reduced samples,
//! * pSAX: Lloyd-Max quantization of an Epanechnikov kernel density estimate,
//! * cSAX: mean-shift modes of a Gaussian kernel density estimate, with an
//!   alphabet size picked by the data.
//!
//! [`metrics`] provides the lower-bounding distances and reconstruction
//! errors, [`anomaly`] a streaming goodness-of-fit detector over symbol
//! streams, and [`harness`] the experiment protocols behind the `psax` CLI.

pub mod anomaly;
pub mod codec;
pub mod density;
pub mod discretize;
pub mod error;
mod gauss_sum;
pub mod harness;
pub mod meanshift;
pub mod metrics;
pub mod series;

pub use error::{Error, Result};
