//! Mean-shift mode seeking in one dimension and the codebooks built from it.
//!
//! The kernel is Gaussian throughout, so the mean-shift weights use the
//! profile `g(u) = exp(-u / 2)` and the implied density estimate is the
//! Gaussian KDE with the same bandwidth.

use serde::{Deserialize, Serialize};

use crate::density::{bandwidth_silverman, BandwidthRule, DensityModel, KernelKind};
use crate::discretize::{Codebook, CodebookMethod};
use crate::error::{Error, Result};
use crate::series::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    modes: Vec<f64>,
    bandwidth: f64,
    source_count: usize,
}

impl ModeSet {
    pub fn modes(&self) -> &[f64] {
        &self.modes
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftOptions {
    /// Convergence threshold on |shift|, in units of the bandwidth.
    pub tol_factor: f64,
    pub max_iter: usize,
    /// Endpoints closer than this (in bandwidths) collapse into one mode.
    pub merge_factor: f64,
}

impl Default for MeanShiftOptions {
    fn default() -> Self {
        Self {
            tol_factor: 1e-6,
            max_iter: 1000,
            merge_factor: 0.5,
        }
    }
}

/// Mean-shift vector at `x`: Gaussian-weighted mean of the samples minus `x`.
pub fn mean_shift_vector(samples: &[f64], h: f64, x: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::NonPositiveScale(h));
    }
    if samples.is_empty() {
        return Err(Error::EmptyNeighborhood);
    }
    // shift exponents by the nearest sample so the weights cannot all underflow
    let nearest = samples
        .iter()
        .map(|&xi| ((xi - x) / h).powi(2))
        .fold(f64::INFINITY, f64::min);
    let (mut w, mut wx) = (0.0, 0.0);
    for &xi in samples {
        let u = ((xi - x) / h).powi(2);
        let g = (-(u - nearest) / 2.0).exp();
        w += g;
        wx += g * xi;
    }
    Ok(wx / w - x)
}

struct Ascent<'a> {
    model: &'a DensityModel,
    tol: f64,
    max_iter: usize,
}

impl Ascent<'_> {
    /// Returns the end point and whether it converged.
    fn run(&self, mut x: f64) -> (f64, bool) {
        for _ in 0..self.max_iter {
            let sums = self.model.gauss_sums(x).expect("gaussian model");
            let Some(mean) = sums.mean() else {
                return (x, false);
            };
            let shift = mean - x;
            x = mean;
            if shift.abs() < self.tol {
                return (x, true);
            }
        }
        (x, false)
    }
}

/// Points visited by the mean-shift ascent started at `x0`, including `x0`.
pub fn mean_shift_trajectory(
    samples: &[f64],
    h: f64,
    x0: f64,
    options: MeanShiftOptions,
) -> Result<Vec<f64>> {
    let model = DensityModel::new(samples.to_vec(), KernelKind::Gaussian, h)?;
    let tol = options.tol_factor * h;
    let mut path = vec![x0];
    let mut x = x0;
    for _ in 0..options.max_iter {
        let mean = model
            .gauss_sums(x)
            .and_then(|s| s.mean())
            .ok_or(Error::EmptyNeighborhood)?;
        let shift = mean - x;
        x = mean;
        path.push(x);
        if shift.abs() < tol {
            break;
        }
    }
    Ok(path)
}

/// Runs the ascent from every sample and merges the end points into modes.
///
/// In one dimension the Gaussian mean-shift map is non-decreasing, so
/// trajectories never cross: when the ascents from two starts end at the same
/// point, every start between them ends there too. Distinct starts are
/// therefore resolved by bisection rather than one by one.
pub fn mean_shift_modes(samples: &[f64], h: f64, options: MeanShiftOptions) -> Result<ModeSet> {
    if samples.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let model = DensityModel::new(samples.to_vec(), KernelKind::Gaussian, h)?;
    let ascent = Ascent {
        model: &model,
        tol: options.tol_factor * h,
        max_iter: options.max_iter,
    };

    let mut starts: Vec<(f64, usize)> = Vec::new();
    for &x in model.samples() {
        match starts.last_mut() {
            Some((v, count)) if *v == x => *count += 1,
            _ => starts.push((x, 1)),
        }
    }

    let same = 1e-4 * h;
    let (first, ok_first) = ascent.run(starts[0].0);
    let last_idx = starts.len() - 1;
    let (last, ok_last) = ascent.run(starts[last_idx].0);
    let mut ends = vec![(first, starts[0].1)];
    let mut converged = ok_first && ok_last;
    if last_idx > 0 {
        let (inner, ok) = fill(&ascent, &starts, 0, last_idx, first, last, same);
        converged &= ok;
        ends.extend(inner);
        ends.push((last, starts[last_idx].1));
    }

    ends.sort_by(|a, b| a.0.total_cmp(&b.0));
    let radius = options.merge_factor * h;
    let mut modes = Vec::new();
    let (mut sum, mut weight, mut prev) = (0.0, 0usize, f64::NEG_INFINITY);
    for (x, w) in ends {
        if weight > 0 && x - prev > radius {
            modes.push(sum / weight as f64);
            sum = 0.0;
            weight = 0;
        }
        sum += x * w as f64;
        weight += w;
        prev = x;
    }
    modes.push(sum / weight as f64);

    let set = ModeSet {
        modes,
        bandwidth: h,
        source_count: samples.len(),
    };
    if converged {
        Ok(set)
    } else {
        Err(Error::MeanShiftNoConvergence {
            partial: set,
            max_iter: options.max_iter,
        })
    }
}

/// End points (with multiplicities) of the starts strictly between `lo` and `hi`.
fn fill(
    ascent: &Ascent<'_>,
    starts: &[(f64, usize)],
    lo: usize,
    hi: usize,
    end_lo: f64,
    end_hi: f64,
    same: f64,
) -> (Vec<(f64, usize)>, bool) {
    if hi - lo <= 1 {
        return (Vec::new(), true);
    }
    if (end_hi - end_lo).abs() <= same {
        let count = starts[lo + 1..hi].iter().map(|s| s.1).sum();
        return (vec![(0.5 * (end_lo + end_hi), count)], true);
    }
    let mid = lo + (hi - lo) / 2;
    let (end_mid, ok) = ascent.run(starts[mid].0);
    let ((mut left, ok_l), (right, ok_r)) = rayon::join(
        || fill(ascent, starts, lo, mid, end_lo, end_mid, same),
        || fill(ascent, starts, mid, hi, end_mid, end_hi, same),
    );
    left.push((end_mid, starts[mid].1));
    left.extend(right);
    (left, ok && ok_l && ok_r)
}

/// Spatial scale of the kernel: the standard deviation of a Gaussian kernel
/// with the density-estimation bandwidth rule applied to `samples`.
pub fn kernel_scale(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let (_, sigma) = mean_std(samples);
    bandwidth_silverman(KernelKind::Gaussian, sigma, samples.len()).unwrap_or(0.0)
}

const GRID_POINTS: usize = 1024;
const GOLDEN_TOL: f64 = 1e-6;

/// Codebook whose centroids are the modes and whose cutlines are the density
/// minima between adjacent modes.
pub fn modes_to_codebook(modes: &ModeSet, density: &DensityModel) -> Result<Codebook> {
    let m = modes.modes();
    if m.len() == 1 {
        let mut scale = kernel_scale(density.samples());
        if !(scale > 0.0) {
            scale = density.bandwidth();
        }
        let c = m[0];
        return Ok(Codebook::new(CodebookMethod::MeanShift, vec![c], vec![c - scale, c + scale])?
            .with_modes(m.to_vec()));
    }
    let cutlines = m
        .windows(2)
        .map(|w| density_minimum(density, w[0], w[1]))
        .collect();
    Ok(Codebook::new(CodebookMethod::MeanShift, cutlines, m.to_vec())?.with_modes(m.to_vec()))
}

/// Argmin of the density on `(a, b)`: grid scan then golden-section refinement.
fn density_minimum(density: &DensityModel, a: f64, b: f64) -> f64 {
    let step = (b - a) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| a + step * i as f64).collect();
    let values = density.evaluate_many(&grid);
    let best = (1..GRID_POINTS - 1)
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .unwrap_or(GRID_POINTS / 2);
    let (mut lo, mut hi) = (grid[best - 1], grid[best + 1]);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (density.evaluate(x1), density.evaluate(x2));
    while hi - lo > GOLDEN_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = density.evaluate(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = density.evaluate(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    if x > a && x < b {
        x
    } else {
        0.5 * (a + b)
    }
}

/// Everything the cSAX discretization produces from one training set.
#[derive(Debug, Clone)]
pub struct MeanShiftFit {
    pub codebook: Codebook,
    pub density: DensityModel,
    pub modes: ModeSet,
}

/// Smallest spread used when the training samples are all equal.
fn scale_floor(samples: &[f64]) -> f64 {
    let (mean, _) = mean_std(samples);
    1e-9 * mean.abs().max(1.0)
}

/// Gaussian KDE with the gradient bandwidth rule, mean-shift modes, and the
/// density-minimum codebook. A non-converged ascent keeps its partial modes.
pub fn mean_shift_codebook(samples: &[f64]) -> Result<MeanShiftFit> {
    if samples.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let density = match DensityModel::with_rule(
        samples.to_vec(),
        KernelKind::Gaussian,
        BandwidthRule::Gradient,
    ) {
        Err(Error::NonPositiveScale(_)) => {
            let h = crate::density::bandwidth_gradient(
                KernelKind::Gaussian,
                scale_floor(samples),
                samples.len(),
            )?;
            DensityModel::new(samples.to_vec(), KernelKind::Gaussian, h)?
        }
        other => other?,
    };
    let modes = match mean_shift_modes(samples, density.bandwidth(), MeanShiftOptions::default())
    {
        Ok(m) => m,
        Err(Error::MeanShiftNoConvergence { partial, .. }) => partial,
        Err(e) => return Err(e),
    };
    let codebook = modes_to_codebook(&modes, &density)?;
    Ok(MeanShiftFit {
        codebook,
        density,
        modes,
    })
}

/// Bookkeeping for re-estimating the clusters on a live stream.
#[derive(Debug, Clone)]
pub struct DynamicClusterState {
    samples: Vec<f64>,
    codebook: Codebook,
    min: f64,
    max: f64,
    mean: f64,
    m2: f64,
    /// Number of samples the current codebook was estimated from.
    fitted_on: usize,
}

impl DynamicClusterState {
    /// Estimates the initial clusters from `samples`.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        let fit = mean_shift_codebook(&samples)?;
        let mut state = Self {
            samples: Vec::with_capacity(samples.len()),
            codebook: fit.codebook,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            mean: 0.0,
            m2: 0.0,
            fitted_on: samples.len(),
        };
        for x in samples {
            state.observe(x);
        }
        Ok(state)
    }

    /// Adds a sample to the history without touching the codebook.
    pub fn observe(&mut self, x: f64) {
        self.samples.push(x);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        let n = self.samples.len() as f64;
        let delta = x - self.mean;
        self.mean += delta / n;
        self.m2 += delta * (x - self.mean);
    }

    /// Re-runs mean-shift on every sample seen so far. Returns whether the
    /// codebook was rebuilt (a rebuild on unchanged data is skipped).
    pub fn rebuild(&mut self) -> Result<bool> {
        if self.fitted_on == self.samples.len() {
            return Ok(false);
        }
        self.codebook = mean_shift_codebook(&self.samples)?.codebook;
        self.fitted_on = self.samples.len();
        Ok(true)
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn observed_range(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    /// Standard deviation of the Gaussian kernel, i.e. its bandwidth under
    /// the density-estimation rule over the samples seen so far.
    pub fn sigma_k(&self) -> f64 {
        let n = self.samples.len();
        if n == 0 {
            return 0.0;
        }
        let sigma = (self.m2 / n as f64).max(0.0).sqrt();
        bandwidth_silverman(KernelKind::Gaussian, sigma, n).unwrap_or(0.0)
    }
}

/// Whether the clusters must be re-estimated before the next sample.
pub fn dynamic_update_check(
    state: &DynamicClusterState,
    window_flagged_anomalous: bool,
    new_sample: f64,
) -> bool {
    let (min, max) = state.observed_range();
    let sigma_k = state.sigma_k();
    window_flagged_anomalous || new_sample < min - sigma_k || new_sample > max + sigma_k
}

/// Pure form of the spatial/statistical criterion for callers that track the
/// range and scale themselves.
pub fn needs_rebuild(flagged: bool, sample: f64, min: f64, max: f64, sigma_k: f64) -> bool {
    flagged || sample < min - sigma_k || sample > max + sigma_k
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vector_examples() {
        assert_abs_diff_eq!(mean_shift_vector(&[5.0], 0.3, 3.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mean_shift_vector(&[-1.0, 1.0], 0.7, 0.0).unwrap(), 0.0, epsilon = 1e-15);
        // direct sum of g(u) = exp(-u/2) weights
        let w0 = 1.0;
        let w2 = (-2.0f64).exp();
        let expected = 2.0 * w2 / (w0 + w2);
        assert_abs_diff_eq!(mean_shift_vector(&[0.0, 2.0], 1.0, 0.0).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.2384058, epsilon = 1e-7);
        // far from every sample the weights would underflow without the shift
        assert_abs_diff_eq!(mean_shift_vector(&[0.0], 0.01, 100.0).unwrap(), -100.0, epsilon = 1e-9);
        assert!(mean_shift_vector(&[], 1.0, 0.0).is_err());
        assert!(mean_shift_vector(&[1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn modes_examples() {
        let opts = MeanShiftOptions::default();
        let one = mean_shift_modes(&[-0.1, 0.0, 0.1], 1.0, opts).unwrap();
        assert_eq!(one.len(), 1);
        assert_abs_diff_eq!(one.modes()[0], 0.0, epsilon = 1e-6);

        let two = mean_shift_modes(&[0.0, 0.1, -0.1, 10.0, 9.9, 10.1], 0.5, opts).unwrap();
        assert_eq!(two.len(), 2);
        assert_abs_diff_eq!(two.modes()[0], 0.0, epsilon = 0.05);
        assert_abs_diff_eq!(two.modes()[1], 10.0, epsilon = 0.05);

        let single = mean_shift_modes(&[7.0], 2.0, opts).unwrap();
        assert_eq!(single.modes(), &[7.0]);
        assert!(mean_shift_modes(&[], 1.0, opts).is_err());
    }

    #[test]
    fn bisection_agrees_with_exhaustive_ascent() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..400)
            .map(|i| [0.0, 3.0, 7.0][i % 3] + rng.random::<f64>() - 0.5)
            .collect();
        let h = 0.4;
        let opts = MeanShiftOptions::default();
        let fast = mean_shift_modes(&samples, h, opts).unwrap();
        // every start ascended independently
        let mut ends: Vec<f64> = samples
            .iter()
            .map(|&x| *mean_shift_trajectory(&samples, h, x, opts).unwrap().last().unwrap())
            .collect();
        ends.sort_by(f64::total_cmp);
        let mut groups: Vec<Vec<f64>> = vec![vec![ends[0]]];
        for w in ends.windows(2) {
            if w[1] - w[0] > 0.5 * h {
                groups.push(Vec::new());
            }
            groups.last_mut().unwrap().push(w[1]);
        }
        assert_eq!(groups.len(), fast.len());
        for (g, &m) in groups.iter().zip(fast.modes()) {
            let mean = g.iter().sum::<f64>() / g.len() as f64;
            assert_abs_diff_eq!(mean, m, epsilon = 1e-4 * h);
        }
    }

    #[test]
    fn codebook_from_symmetric_modes() {
        let samples: Vec<f64> = (0..50)
            .flat_map(|i| {
                let t = (i as f64 - 25.0) / 25.0;
                [-5.0 + t, 5.0 - t]
            })
            .collect();
        let density = DensityModel::new(samples.clone(), KernelKind::Gaussian, 0.5).unwrap();
        let modes = mean_shift_modes(&samples, 0.5, MeanShiftOptions::default()).unwrap();
        assert_eq!(modes.len(), 2);
        let cb = modes_to_codebook(&modes, &density).unwrap();
        assert_eq!(cb.kappa(), modes.len());
        assert_eq!(cb.method(), CodebookMethod::MeanShift);
        assert_abs_diff_eq!(cb.cutlines()[0], 0.0, epsilon = 1e-5);
        assert_eq!(cb.modes().unwrap(), modes.modes());
    }

    #[test]
    fn cutline_is_density_minimum_of_asymmetric_mixture() {
        // heavy narrow cluster near 0, light wide cluster near 10
        let mut samples: Vec<f64> = (0..200).map(|i| (i as f64 - 100.0) / 100.0).collect();
        samples.extend((0..40).map(|i| 10.0 + 1.2 * crate::discretize::inverse_normal_cdf((i as f64 + 0.5) / 40.0)));
        let h = 0.6;
        let density = DensityModel::new(samples.clone(), KernelKind::Gaussian, h).unwrap();
        let modes = mean_shift_modes(&samples, h, MeanShiftOptions::default()).unwrap();
        assert_eq!(modes.len(), 2);
        let cb = modes_to_codebook(&modes, &density).unwrap();

        // oracle: dense scan with the direct kernel sum
        let direct = |x: f64| -> f64 {
            samples
                .iter()
                .map(|&xi| (-0.5 * ((x - xi) / h).powi(2)).exp())
                .sum::<f64>()
        };
        let (a, b) = (modes.modes()[0], modes.modes()[1]);
        let n = 200_000;
        let best = (1..n)
            .map(|i| a + (b - a) * i as f64 / n as f64)
            .min_by(|&x, &y| direct(x).total_cmp(&direct(y)))
            .unwrap();
        assert_abs_diff_eq!(cb.cutlines()[0], best, epsilon = 1e-4);
        assert!(cb.cutlines()[0] > 1.0 && cb.cutlines()[0] < 9.0);
    }

    #[test]
    fn single_mode_fallback() {
        let samples = vec![-0.2, -0.1, 0.0, 0.1, 0.2];
        let fit = mean_shift_codebook(&samples).unwrap();
        assert_eq!(fit.modes.len(), 1);
        assert_eq!(fit.codebook.kappa(), 2);
        let m = fit.modes.modes()[0];
        assert_eq!(fit.codebook.cutlines(), &[m]);
        let s = kernel_scale(&samples);
        assert_abs_diff_eq!(fit.codebook.centroids()[0], m - s, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.codebook.centroids()[1], m + s, epsilon = 1e-12);
    }

    #[test]
    fn constant_training_still_yields_codebook() {
        let fit = mean_shift_codebook(&[3.0; 10]).unwrap();
        assert_eq!(fit.codebook.kappa(), 2);
        assert_eq!(fit.codebook.cutlines(), &[3.0]);
    }

    #[test]
    fn update_check_examples() {
        let state = DynamicClusterState::new(vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert!(dynamic_update_check(&state, true, 0.5));
        assert!(!dynamic_update_check(&state, false, 0.5));
        let sk = state.sigma_k();
        assert!(sk > 0.0);
        assert!(dynamic_update_check(&state, false, 1.0 + sk * 1.01));
        assert!(!dynamic_update_check(&state, false, 1.0 + sk * 0.99));
        assert!(dynamic_update_check(&state, false, -sk * 1.01));

        assert!(needs_rebuild(false, 1.5, 0.0, 1.0, 0.2));
        assert!(!needs_rebuild(false, 1.1, 0.0, 1.0, 0.2));
    }

    #[test]
    fn sigma_k_uses_density_rule() {
        let samples: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let mut state = DynamicClusterState::new(samples.clone()).unwrap();
        let (_, sigma) = mean_std(&samples);
        assert_abs_diff_eq!(state.sigma_k(), 1.0492 * sigma / 2.0, epsilon = 1e-9);
        assert!(!state.rebuild().unwrap());
        state.observe(40.0);
        assert!(state.rebuild().unwrap());
    }
}
