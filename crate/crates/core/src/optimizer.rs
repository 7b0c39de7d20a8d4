//! Search for the interior segment threshold `x1` that maximises SQNR.
//!
//! [`sweep`] evaluates a uniform grid starting at `x_max / 2`; [`refine`]
//! polishes the grid optimum with golden-section search.

use rayon::prelude::*;
use serde::Serialize;

use crate::design::{design_with, DesignConfig, DistortionReport};
use crate::error::{Error, Result};
use crate::gauss::SourceModel;
use crate::quadrature::QuadratureSpec;

pub const DEFAULT_GRID_STEP: f64 = 0.01;

/// Everything of a two-segment design except the free threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepTemplate {
    pub source: SourceModel,
    pub n_levels: usize,
    pub quad: QuadratureSpec,
}

impl SweepTemplate {
    pub fn new(source: SourceModel, n_levels: usize) -> Self {
        Self {
            source,
            n_levels,
            quad: QuadratureSpec::default(),
        }
    }

    pub fn x_max(&self) -> Result<f64> {
        self.source.support_threshold(self.n_levels)
    }

    pub fn config(&self, x1: f64) -> Result<DesignConfig> {
        DesignConfig::two_segment(self.source, self.n_levels, x1)
    }

    /// Fit, build and evaluate the design with threshold `x1`.
    pub fn evaluate(&self, x1: f64) -> Result<DistortionReport> {
        design_with(&self.config(x1)?, &self.quad)?.sqnr()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCandidate {
    pub x1: f64,
    /// `None` when the design at this threshold could not be built.
    pub report: Option<DistortionReport>,
    pub invalid_reason: Option<String>,
}

impl SweepCandidate {
    pub fn sqnr_db(&self) -> Option<f64> {
        self.report.map(|r| r.sqnr_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub n_levels: usize,
    pub x_max: f64,
    pub grid_step: f64,
    pub candidates: Vec<SweepCandidate>,
    pub best_index: usize,
    pub best_x1: f64,
    pub best_sqnr_db: f64,
}

impl SweepResult {
    pub fn best(&self) -> &SweepCandidate {
        &self.candidates[self.best_index]
    }

    /// The `x1 = x_max / 2` candidate.
    pub fn midpoint(&self) -> &SweepCandidate {
        &self.candidates[0]
    }

    /// Indices of local peaks that rise more than `margin_db` above both
    /// neighbours while staying below the global maximum.
    pub fn spurious_peaks(&self, margin_db: f64) -> Vec<usize> {
        let v: Vec<Option<f64>> = self.candidates.iter().map(|c| c.sqnr_db()).collect();
        (1..v.len().saturating_sub(1))
            .filter(|&i| match (v[i - 1], v[i], v[i + 1]) {
                (Some(a), Some(b), Some(c)) => {
                    b - a > margin_db && b - c > margin_db && b < self.best_sqnr_db
                }
                _ => false,
            })
            .collect()
    }
}

/// Index of the largest value, earliest on ties; `None` entries are skipped.
pub fn argmax_first(values: &[Option<f64>]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, v)| match (best, v) {
            (_, None) => best,
            (None, Some(v)) => Some((i, *v)),
            (Some((_, bv)), Some(v)) if *v > bv => Some((i, *v)),
            _ => best,
        })
        .map(|(i, _)| i)
}

/// Grid points `x_max/2 + i·step` strictly below `x_max`.
pub fn sweep_grid(x_max: f64, grid_step: f64) -> Result<Vec<f64>> {
    if !(grid_step > 0.0) || grid_step >= x_max / 2.0 {
        return Err(Error::InvalidConfig(format!(
            "grid step must lie in (0, x_max/2 = {}), got {grid_step}",
            x_max / 2.0
        )));
    }
    let start = x_max / 2.0;
    Ok((0..)
        .map(|i| start + i as f64 * grid_step)
        .take_while(|&x| x < x_max)
        .collect())
}

/// Evaluates every grid threshold (in parallel) and picks the SQNR maximiser.
pub fn sweep(template: &SweepTemplate, grid_step: f64) -> Result<SweepResult> {
    let x_max = template.x_max()?;
    let grid = sweep_grid(x_max, grid_step)?;
    let candidates: Vec<SweepCandidate> = grid
        .par_iter()
        .map(|&x1| match template.evaluate(x1) {
            Ok(report) => SweepCandidate {
                x1,
                report: Some(report),
                invalid_reason: None,
            },
            Err(e) => SweepCandidate {
                x1,
                report: None,
                invalid_reason: Some(e.to_string()),
            },
        })
        .collect();

    let values: Vec<Option<f64>> = candidates.iter().map(|c| c.sqnr_db()).collect();
    let best_index = argmax_first(&values).ok_or(Error::AllCandidatesInvalid)?;
    let result = SweepResult {
        n_levels: template.n_levels,
        x_max,
        grid_step,
        best_x1: candidates[best_index].x1,
        best_sqnr_db: values[best_index].expect("argmax picks a valid candidate"),
        best_index,
        candidates,
    };
    let peaks = result.spurious_peaks(0.05);
    if !peaks.is_empty() {
        log::warn!(
            "N = {}: SQNR curve has secondary peaks at candidates {peaks:?}",
            template.n_levels
        );
    }
    Ok(result)
}

/// Golden-section search for the maximum of `f` on `[a, b]`.
///
/// Evaluations returning `None` count as `-inf`. Stops once the bracket is no
/// wider than `tolerance` and returns the best point evaluated.
pub fn golden_section_max<F: FnMut(f64) -> Option<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    tolerance: f64,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut g = |x: f64| f(x).unwrap_or(f64::NEG_INFINITY);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (g(x1), g(x2));
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    while hi - lo > tolerance {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = g(x1);
            if f1 > best.1 {
                best = (x1, f1);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = g(x2);
            if f2 > best.1 {
                best = (x2, f2);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Refinement {
    pub x1: f64,
    pub sqnr_db: f64,
    /// False when the grid maximum sat on the grid boundary and was returned as is.
    pub interior: bool,
}

/// Golden-section refinement within one grid step either side of the grid optimum.
///
/// The result never scores below the grid optimum.
pub fn refine(
    result: &SweepResult,
    template: &SweepTemplate,
    tolerance: f64,
) -> Result<Refinement> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let grid_best = Refinement {
        x1: result.best_x1,
        sqnr_db: result.best_sqnr_db,
        interior: false,
    };
    if result.best_index == 0 || result.best_index + 1 == result.candidates.len() {
        return Ok(grid_best);
    }
    let lo = result.candidates[result.best_index - 1].x1;
    let hi = result.candidates[result.best_index + 1].x1;
    let (x1, sqnr_db) = golden_section_max(
        |x| template.evaluate(x).ok().map(|r| r.sqnr_db),
        lo,
        hi,
        tolerance,
    );
    Ok(if sqnr_db >= grid_best.sqnr_db {
        Refinement {
            x1,
            sqnr_db,
            interior: true,
        }
    } else {
        Refinement {
            interior: true,
            ..grid_best
        }
    })
}
