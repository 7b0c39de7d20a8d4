//! Companding quantizer built from a fitted piecewise-quadratic compressor,
//! and its analytic distortion.
//!
//! The positive half of the compressed axis `[0, x_max]` is cut into
//! `K = (N - 2) / 2` uniform cells of width `Δ = 2 x_max / (N - 2)`. Level `k`
//! is the pre-image of the cell midpoint `(k - 1/2) Δ` and decision threshold
//! `k` the pre-image of `k Δ`. Each grid point is inverted on the segment whose
//! compressed range `[h(x_{i-1}), h(x_i))` contains it, so one global grid is
//! shared by all segments and the per-segment counts always sum to `K`. Two
//! overload cells `[x_max, ∞)` and `(-∞, -x_max)` reproduce at `±y_max`, the
//! tail centroid, for `N` cells in total.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::SourceModel;
use crate::quadrature::{integrate, QuadratureSpec};
use crate::spline::{fit, KnotVector, QuadraticSpline};

/// Largest remainder tolerated when truncating the overload integral.
pub const TAIL_REMAINDER_LIMIT: f64 = 1e-14;

/// Points per segment at which monotonicity is checked before building.
const MONOTONE_GRID: usize = 100;

/// Anything that maps an input sample to a reproduction value.
pub trait ScalarQuantizer {
    fn quantize(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> ScalarQuantizer for F {
    fn quantize(&self, x: f64) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    n_levels: usize,
    knots: KnotVector,
    source: SourceModel,
}

impl DesignConfig {
    pub fn new(source: SourceModel, n_levels: usize, knots: KnotVector) -> Result<Self> {
        if n_levels < 4 || !n_levels.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "N must be even and at least 4, got {n_levels}"
            )));
        }
        let segments = knots.segment_count();
        if n_levels - 2 < 2 * segments {
            return Err(Error::InvalidConfig(format!(
                "N - 2 = {} granular levels cannot cover {segments} segments per side",
                n_levels - 2
            )));
        }
        Ok(Self {
            n_levels,
            knots,
            source,
        })
    }

    /// Knots `0, interior..., x_max` with `x_max` from the support-threshold formula.
    pub fn standard(source: SourceModel, n_levels: usize, interior: &[f64]) -> Result<Self> {
        let x_max = source.support_threshold(n_levels)?;
        let knots: Vec<f64> = std::iter::once(0.0)
            .chain(interior.iter().copied())
            .chain(std::iter::once(x_max))
            .collect();
        Self::new(source, n_levels, KnotVector::new(knots)?)
    }

    /// Two segments per side split at `x1`.
    pub fn two_segment(source: SourceModel, n_levels: usize, x1: f64) -> Result<Self> {
        Self::standard(source, n_levels, &[x1])
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn source(&self) -> SourceModel {
        self.source
    }

    pub fn x_max(&self) -> f64 {
        self.knots.last()
    }

    /// Granular levels on the positive half, `(N - 2) / 2`.
    pub fn levels_per_side(&self) -> usize {
        (self.n_levels - 2) / 2
    }

    pub fn step(&self) -> f64 {
        step_size(self)
    }
}

/// `Δ = 2 x_max / (N - 2)`.
pub fn step_size(config: &DesignConfig) -> f64 {
    2.0 * config.x_max() / (config.n_levels - 2) as f64
}

/// How compressed-domain targets are offset within each segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OffsetRule {
    /// One global grid `(k - 1/2) Δ` shared by every segment.
    #[default]
    CumulativeGrid,
    /// Segment `i >= 2` starts its targets at `h_i(x_i)`, the value at its
    /// right knot. Kept for comparison; it places targets beyond the segment's
    /// compressed range and fails to build.
    LiteralRightEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub granular: f64,
    /// Asymptotic closed-form overload distortion.
    pub overload: f64,
    pub total: f64,
    pub sqnr_db: f64,
    /// Overload distortion by integrating the tail with the centroid level.
    pub overload_exact: f64,
    pub total_exact: f64,
    pub sqnr_exact_db: f64,
}

impl DistortionReport {
    pub fn new(variance: f64, granular: f64, overload: f64, overload_exact: f64) -> Self {
        let total = granular + overload;
        let total_exact = granular + overload_exact;
        Self {
            granular,
            overload,
            total,
            sqnr_db: sqnr_db(variance, total),
            overload_exact,
            total_exact,
            sqnr_exact_db: sqnr_db(variance, total_exact),
        }
    }
}

pub fn sqnr_db(variance: f64, distortion: f64) -> f64 {
    10.0 * (variance / distortion).log10()
}

/// Closed-form asymptotic overload distortion for a unit-variance source.
pub fn overload_distortion_closed(x_max: f64) -> f64 {
    (2.0 / std::f64::consts::PI).sqrt() * x_max.powi(-3) * (-0.5 * x_max * x_max).exp()
}

/// Overload distortion `2 ∫_{x_max}^∞ (x - y)² p(x) dx` by quadrature,
/// truncated `TAIL_SPAN_SIGMAS` standard deviations past `x_max`.
pub fn overload_distortion_at(
    source: &SourceModel,
    x_max: f64,
    y: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let end = source.tail_end(x_max);
    let remainder = source.tail_squared_error(end, y);
    if remainder > TAIL_REMAINDER_LIMIT {
        return Err(Error::Domain(format!(
            "tail truncation remainder {remainder:e} exceeds {TAIL_REMAINDER_LIMIT:e}"
        )));
    }
    let body = integrate(|x| (x - y) * (x - y) * source.pdf(x), x_max, end, quad)?;
    Ok(2.0 * body)
}

/// Granular distortion in slope form, `2 x_max² / (3 (N-2)²) Σ p(y) / h'(y)² · Δ/h'(y)`.
///
/// `levels` and `slopes` describe the positive half only.
pub fn granular_distortion_sum(
    source: &SourceModel,
    x_max: f64,
    n_levels: usize,
    levels: &[f64],
    slopes: &[f64],
) -> f64 {
    let denom = (n_levels - 2) as f64;
    let step = 2.0 * x_max / denom;
    let scale = 2.0 * x_max * x_max / (3.0 * denom * denom);
    scale
        * levels
            .iter()
            .zip(slopes)
            .map(|(&y, &d)| source.pdf(y) / (d * d) * (step / d))
            .sum::<f64>()
}

/// Same quantity written as `2 Σ p(y) Δ_y³ / 12` with `Δ_y = Δ / h'(y)`.
pub fn granular_distortion_cells(
    source: &SourceModel,
    levels: &[f64],
    cell_lengths: &[f64],
) -> f64 {
    2.0 * levels
        .iter()
        .zip(cell_lengths)
        .map(|(&y, &c)| source.pdf(y) * c * c * c / 12.0)
        .sum::<f64>()
}

fn check_monotone(spline: &QuadraticSpline) -> Result<()> {
    for (i, s) in spline.segments().iter().enumerate() {
        for k in 0..=MONOTONE_GRID {
            let x = s.lo + (s.hi - s.lo) * k as f64 / MONOTONE_GRID as f64;
            let slope = s.slope(x);
            if !(slope > 0.0) {
                return Err(Error::NonMonotone {
                    segment: i,
                    x,
                    slope,
                });
            }
        }
    }
    Ok(())
}

/// Compressed-domain segment boundaries `h(x_0), h_1(x_1), ..., h_L(x_L)`.
fn compressed_bounds(spline: &QuadraticSpline) -> Vec<f64> {
    let segs = spline.segments();
    std::iter::once(segs[0].value(segs[0].lo))
        .chain(segs.iter().map(|s| s.value(s.hi)))
        .collect()
}

/// Segment whose compressed range `[b_{i-1}, b_i)` holds `t`; the last range is closed.
fn owning_segment(bounds: &[f64], t: f64) -> Result<usize> {
    let lo = bounds[0];
    let hi = *bounds.last().expect("at least two bounds");
    if !(t >= lo && t <= hi) {
        return Err(Error::UnreachableTarget { target: t, lo, hi });
    }
    let segments = bounds.len() - 1;
    Ok(bounds[1..segments].partition_point(|&b| b <= t))
}

fn check_alignment(spline: &QuadraticSpline, config: &DesignConfig) -> Result<()> {
    let knots = spline.knots();
    if knots != config.knots.as_slice() {
        return Err(Error::KnotMismatch(format!(
            "spline knots {knots:?} differ from design knots {:?}",
            config.knots.as_slice()
        )));
    }
    Ok(())
}

/// Number of granular levels each segment receives on the positive half.
pub fn allocate_levels(spline: &QuadraticSpline, config: &DesignConfig) -> Result<Vec<usize>> {
    check_alignment(spline, config)?;
    check_monotone(spline)?;
    let bounds = compressed_bounds(spline);
    let step = config.step();
    let mut counts = vec![0; spline.segments().len()];
    for k in 1..=config.levels_per_side() {
        counts[owning_segment(&bounds, (k as f64 - 0.5) * step)?] += 1;
    }
    Ok(counts)
}

/// Real-valued share `K (h_i(x_i) - h_{i-1}(x_{i-1})) / h_L(x_L)` of each segment.
pub fn allocation_ratio(spline: &QuadraticSpline, config: &DesignConfig) -> Vec<f64> {
    let bounds = compressed_bounds(spline);
    let total = *bounds.last().expect("non-empty");
    let k = config.levels_per_side() as f64;
    bounds
        .windows(2)
        .map(|w| k * (w[1] - w[0]) / total)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompandingQuantizer {
    config: DesignConfig,
    spline: QuadraticSpline,
    step: f64,
    /// Positive-half reproduction levels, ascending.
    levels: Vec<f64>,
    /// Segment that produced each level.
    level_segments: Vec<usize>,
    /// Positive-half upper cell boundaries; the last is `x_max`.
    thresholds: Vec<f64>,
    counts: Vec<usize>,
    y_max: f64,
    /// `Δ / h'(y)` per level.
    cell_lengths: Vec<f64>,
    /// Threshold differences per level.
    cell_lengths_exact: Vec<f64>,
    /// `h'(y)` per level.
    slopes: Vec<f64>,
}

/// Fits the optimal compressor on the configured knots and builds the quantizer.
pub fn design(config: &DesignConfig) -> Result<CompandingQuantizer> {
    design_with(config, &QuadratureSpec::default())
}

pub fn design_with(config: &DesignConfig, quad: &QuadratureSpec) -> Result<CompandingQuantizer> {
    let target = config.source.compressor_fn(config.x_max());
    let spline = fit(target, &config.knots, quad)?;
    build(spline, config)
}

pub fn build(spline: QuadraticSpline, config: &DesignConfig) -> Result<CompandingQuantizer> {
    build_with_rule(spline, config, OffsetRule::CumulativeGrid)
}

pub fn build_with_rule(
    spline: QuadraticSpline,
    config: &DesignConfig,
    rule: OffsetRule,
) -> Result<CompandingQuantizer> {
    check_alignment(&spline, config)?;
    check_monotone(&spline)?;
    let step = config.step();
    let per_side = config.levels_per_side();
    let bounds = compressed_bounds(&spline);
    if bounds[0] >= 0.5 * step {
        return Err(Error::UnreachableTarget {
            target: 0.5 * step,
            lo: bounds[0],
            hi: *bounds.last().expect("non-empty"),
        });
    }
    let counts = allocate_levels(&spline, config)?;

    let mut levels = Vec::with_capacity(per_side);
    let mut level_segments = Vec::with_capacity(per_side);
    match rule {
        OffsetRule::CumulativeGrid => {
            for k in 1..=per_side {
                let t = (k as f64 - 0.5) * step;
                let seg = owning_segment(&bounds, t)?;
                levels.push(spline.invert_segment(seg, t)?);
                level_segments.push(seg);
            }
        }
        OffsetRule::LiteralRightEnd => {
            for (seg, &count) in counts.iter().enumerate() {
                let offset = if seg == 0 { 0.0 } else { bounds[seg + 1] };
                for j in 1..=count {
                    let t = offset + (j as f64 - 0.5) * step;
                    let s = spline.segments()[seg];
                    let (lo, hi) = (s.value(s.lo), s.value(s.hi));
                    if t < lo || t > hi {
                        return Err(Error::UnreachableTarget { target: t, lo, hi });
                    }
                    levels.push(spline.invert_segment(seg, t)?);
                    level_segments.push(seg);
                }
            }
        }
    }

    let mut thresholds = Vec::with_capacity(per_side);
    for k in 1..per_side {
        let t = k as f64 * step;
        let seg = owning_segment(&bounds, t)?;
        thresholds.push(spline.invert_segment(seg, t)?);
    }
    thresholds.push(config.x_max());

    let mut slopes = Vec::with_capacity(per_side);
    for (&y, &seg) in levels.iter().zip(&level_segments) {
        let slope = spline.segments()[seg].slope(y);
        if !(slope > 0.0) {
            return Err(Error::NonMonotone {
                segment: seg,
                x: y,
                slope,
            });
        }
        slopes.push(slope);
    }

    let mut lower = 0.0;
    for (k, (&y, &upper)) in levels.iter().zip(&thresholds).enumerate() {
        if !(lower < y && y < upper) {
            return Err(Error::Domain(format!(
                "level {k} = {y} not strictly inside its cell [{lower}, {upper})"
            )));
        }
        lower = upper;
    }

    let cell_lengths = slopes.iter().map(|d| step / d).collect();
    let cell_lengths_exact = std::iter::once(0.0)
        .chain(thresholds.iter().copied())
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect();
    let y_max = config.source.tail_centroid(config.x_max())?;

    Ok(CompandingQuantizer {
        config: config.clone(),
        spline,
        step,
        levels,
        level_segments,
        thresholds,
        counts,
        y_max,
        cell_lengths,
        cell_lengths_exact,
        slopes,
    })
}

impl CompandingQuantizer {
    pub fn config(&self) -> &DesignConfig {
        &self.config
    }

    pub fn spline(&self) -> &QuadraticSpline {
        &self.spline
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level_segments(&self) -> &[usize] {
        &self.level_segments
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn x_max(&self) -> f64 {
        self.config.x_max()
    }

    pub fn cell_lengths(&self) -> &[f64] {
        &self.cell_lengths
    }

    pub fn cell_lengths_exact(&self) -> &[f64] {
        &self.cell_lengths_exact
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Total number of cells, `N`.
    pub fn cell_count(&self) -> usize {
        self.config.n_levels
    }

    pub fn granular_distortion(&self) -> f64 {
        granular_distortion_sum(
            &self.config.source,
            self.x_max(),
            self.config.n_levels,
            &self.levels,
            &self.slopes,
        )
    }

    /// The `Σ p(y) Δ_y³ / 12` form of [`Self::granular_distortion`].
    pub fn granular_distortion_by_cells(&self) -> f64 {
        granular_distortion_cells(&self.config.source, &self.levels, &self.cell_lengths)
    }

    pub fn overload_distortion_exact(&self) -> Result<f64> {
        overload_distortion_at(
            &self.config.source,
            self.x_max(),
            self.y_max,
            &QuadratureSpec::default(),
        )
    }

    /// Closed-form overload distortion, rescaled for the source variance.
    pub fn overload_distortion_closed(&self) -> f64 {
        let s = self.config.source.sigma();
        s * s * overload_distortion_closed(self.x_max() / s)
    }

    pub fn sqnr(&self) -> Result<DistortionReport> {
        Ok(DistortionReport::new(
            self.config.source.variance(),
            self.granular_distortion(),
            self.overload_distortion_closed(),
            self.overload_distortion_exact()?,
        ))
    }

    /// All `N - 1` decision boundaries in ascending order, including 0 and `±x_max`.
    pub fn full_thresholds(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.thresholds.iter().rev().map(|t| -t).collect();
        out.push(0.0);
        out.extend_from_slice(&self.thresholds);
        out
    }

    /// All `N` reproduction values in ascending order, overload levels at both ends.
    pub fn full_levels(&self) -> Vec<f64> {
        let mut out = vec![-self.y_max];
        out.extend(self.levels.iter().rev().map(|y| -y));
        out.extend_from_slice(&self.levels);
        out.push(self.y_max);
        out
    }

    /// Cell index of `x` with half-open cells `[t_j, t_{j+1})`.
    ///
    /// Index 0 is the negative overload cell and `N - 1` the positive one.
    pub fn encode(&self, x: f64) -> usize {
        let k = self.thresholds.len();
        let mag = x.abs();
        // Index among positive boundaries 0 < t_1 < ... < t_K = x_max.
        if x >= 0.0 {
            k + 1 + self.thresholds.partition_point(|&t| t <= mag)
        } else {
            // Negative boundaries are -t_K < ... < -t_1 < 0; -t <= x iff t >= |x|.
            k - self.thresholds.partition_point(|&t| t < mag)
        }
    }

    pub fn decode(&self, index: usize) -> Result<f64> {
        let k = self.levels.len();
        let n = self.cell_count();
        if index >= n {
            return Err(Error::IndexOutOfRange { index, cells: n });
        }
        Ok(if index == 0 {
            -self.y_max
        } else if index == n - 1 {
            self.y_max
        } else if index <= k {
            -self.levels[k - index]
        } else {
            self.levels[index - k - 1]
        })
    }

    /// Index of the cell mirrored through the origin.
    pub fn mirror(&self, index: usize) -> usize {
        self.cell_count() - 1 - index
    }
}

impl ScalarQuantizer for CompandingQuantizer {
    fn quantize(&self, x: f64) -> f64 {
        self.decode(self.encode(x))
            .expect("encode returns a valid index")
    }
}
