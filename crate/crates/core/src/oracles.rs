//! Independent references for the analytic design: Monte-Carlo distortion,
//! the Lloyd–Max quantizer, and companding with the exact optimal compressor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::design::{
    granular_distortion_sum, overload_distortion_at, sqnr_db, DistortionReport, ScalarQuantizer,
};
use crate::error::{Error, Result};
use crate::gauss::SourceModel;
use crate::quadrature::{integrate, QuadratureSpec};

/// Samples per Monte-Carlo shard. Shard `i` draws from its own ChaCha8
/// stream, so estimates do not depend on how many threads run.
pub const MC_SHARD_SIZE: u64 = 1 << 16;

pub const LLOYD_MAX_ITERATIONS: usize = 10_000;
pub const LLOYD_MAX_TOLERANCE: f64 = 1e-12;

/// Relative slack allowed on the per-iteration distortion decrease, for quadrature roundoff.
const MONOTONE_SLACK: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean_distortion: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl McEstimate {
    /// `|analytic - mean|` in units of the standard error.
    pub fn z_score(&self, analytic: f64) -> f64 {
        (analytic - self.mean_distortion).abs() / self.std_error
    }
}

/// Mean squared error of `q` over Gaussian samples from `source`.
///
/// Samples come from `ChaCha8Rng` seeded with `seed`, stream = shard index,
/// converted with the ziggurat `StandardNormal` sampler.
pub fn mc_distortion<Q: ScalarQuantizer + Sync>(
    q: &Q,
    source: &SourceModel,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(Error::Domain(
            "Monte-Carlo estimate needs at least one sample".into(),
        ));
    }
    let shards = n_samples.div_ceil(MC_SHARD_SIZE);
    let sigma = source.sigma();
    let partial: Vec<(f64, f64)> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let count = MC_SHARD_SIZE.min(n_samples - shard * MC_SHARD_SIZE);
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..count {
                let z: f64 = StandardNormal.sample(&mut rng);
                let x = sigma * z;
                let e = x - q.quantize(x);
                let e2 = e * e;
                sum += e2;
                sum_sq += e2 * e2;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), (s, s2)| (a + s, b + s2));
    let n = n_samples as f64;
    let mean = sum / n;
    let std_error = if n_samples > 1 {
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(McEstimate {
        mean_distortion: mean,
        std_error,
        n_samples,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LloydMax {
    /// All `N` reproduction levels, ascending.
    pub levels: Vec<f64>,
    /// The `N - 1` decision thresholds, ascending.
    pub thresholds: Vec<f64>,
    pub distortion: f64,
    pub sqnr_db: f64,
    pub iterations: usize,
}

/// `∫ (x - y)² p(x) dx` over one cell; `None` bounds are infinite.
fn cell_distortion(
    source: &SourceModel,
    lo: Option<f64>,
    hi: Option<f64>,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    match (lo, hi) {
        (Some(a), Some(b)) => integrate(|x| (x - y) * (x - y) * source.pdf(x), a, b, quad),
        (Some(a), None) => Ok(0.5 * overload_distortion_at(source, a, y, quad)?),
        (None, Some(b)) => Ok(0.5 * overload_distortion_at(source, -b, -y, quad)?),
        (None, None) => Ok(source.variance() + y * y),
    }
}

fn cell_centroid(source: &SourceModel, lo: Option<f64>, hi: Option<f64>) -> f64 {
    match (lo, hi) {
        (Some(a), Some(b)) => source.first_moment(a, b) / source.probability(a, b),
        (Some(a), None) => source.variance() * source.pdf(a) / source.upper_tail(a),
        (None, Some(b)) => -source.variance() * source.pdf(b) / source.upper_tail(-b),
        (None, None) => 0.0,
    }
}

fn bounds(thresholds: &[f64], cell: usize) -> (Option<f64>, Option<f64>) {
    let lo = if cell == 0 {
        None
    } else {
        Some(thresholds[cell - 1])
    };
    let hi = thresholds.get(cell).copied();
    (lo, hi)
}

fn total_distortion(
    source: &SourceModel,
    levels: &[f64],
    thresholds: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    levels.iter().enumerate().try_fold(0.0, |acc, (i, &y)| {
        let (lo, hi) = bounds(thresholds, i);
        Ok(acc + cell_distortion(source, lo, hi, y, quad)?)
    })
}

fn midpoints(levels: &[f64]) -> Vec<f64> {
    levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Starting levels: the exact-compressor companding quantizer for even
/// `N >= 4`, otherwise an evenly spaced symmetric set.
fn initial_levels(source: &SourceModel, n_levels: usize) -> Result<Vec<f64>> {
    if n_levels >= 4 && n_levels.is_multiple_of(2) {
        let (positive, _, y_max) = exact_compressor_levels(source, n_levels)?;
        let mut levels: Vec<f64> = std::iter::once(-y_max)
            .chain(positive.iter().rev().map(|y| -y))
            .collect();
        levels.extend_from_slice(&positive);
        levels.push(y_max);
        Ok(levels)
    } else {
        let n = n_levels as f64;
        Ok((0..n_levels)
            .map(|i| source.sigma() * 2.0 * ((i as f64 + 0.5) / n - 0.5) * 2.0)
            .collect())
    }
}

/// Lloyd–Max quantizer: alternate nearest-neighbour thresholds and centroid
/// levels until the relative distortion change drops below `tolerance`.
pub fn lloyd_max(source: &SourceModel, n_levels: usize, tolerance: f64) -> Result<LloydMax> {
    if n_levels < 2 {
        return Err(Error::Domain(format!(
            "Lloyd–Max needs at least 2 levels, got {n_levels}"
        )));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let quad = QuadratureSpec::tight();
    let mut levels = initial_levels(source, n_levels)?;
    let mut thresholds = midpoints(&levels);
    let mut distortion = total_distortion(source, &levels, &thresholds, &quad)?;

    for iteration in 1..=LLOYD_MAX_ITERATIONS {
        levels = (0..n_levels)
            .map(|i| {
                let (lo, hi) = bounds(&thresholds, i);
                cell_centroid(source, lo, hi)
            })
            .collect();
        thresholds = midpoints(&levels);
        let next = total_distortion(source, &levels, &thresholds, &quad)?;
        if next > distortion * (1.0 + MONOTONE_SLACK) {
            return Err(Error::DistortionIncreased {
                iteration,
                previous: distortion,
                current: next,
            });
        }
        let change = (distortion - next).abs() / next;
        distortion = next;
        if change < tolerance {
            return Ok(LloydMax {
                sqnr_db: sqnr_db(source.variance(), distortion),
                levels,
                thresholds,
                distortion,
                iterations: iteration,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: LLOYD_MAX_ITERATIONS,
    })
}

/// Positive-half levels and slopes of the companding quantizer driven by the
/// exact compressor, plus the overload level.
fn exact_compressor_levels(
    source: &SourceModel,
    n_levels: usize,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let x_max = source.support_threshold(n_levels)?;
    let step = 2.0 * x_max / (n_levels - 2) as f64;
    let mut levels = Vec::new();
    let mut slopes = Vec::new();
    for k in 1..=(n_levels - 2) / 2 {
        let y = source.compressor_inverse(x_max, (k as f64 - 0.5) * step)?;
        slopes.push(source.compressor_slope(x_max, y)?);
        levels.push(y);
    }
    Ok((levels, slopes, source.tail_centroid(x_max)?))
}

/// Companding report for compressor levels `levels` with slopes `slopes` on `[0, x_max]`.
pub fn companding_report(
    source: &SourceModel,
    n_levels: usize,
    x_max: f64,
    levels: &[f64],
    slopes: &[f64],
) -> Result<DistortionReport> {
    let granular = granular_distortion_sum(source, x_max, n_levels, levels, slopes);
    let s = source.sigma();
    let overload = s * s * crate::design::overload_distortion_closed(x_max / s);
    let y_max = source.tail_centroid(x_max)?;
    let overload_exact = overload_distortion_at(source, x_max, y_max, &QuadratureSpec::default())?;
    Ok(DistortionReport::new(
        source.variance(),
        granular,
        overload,
        overload_exact,
    ))
}

/// The same analytic pipeline as the spline design, with the exact compressor
/// standing in for the fitted spline.
pub fn exact_compressor_sqnr(source: &SourceModel, n_levels: usize) -> Result<DistortionReport> {
    if n_levels < 4 || !n_levels.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "N must be even and at least 4, got {n_levels}"
        )));
    }
    let (levels, slopes, _) = exact_compressor_levels(source, n_levels)?;
    companding_report(
        source,
        n_levels,
        source.support_threshold(n_levels)?,
        &levels,
        &slopes,
    )
}
