//! Piecewise-quadratic approximation `h(x) = r_i + p_i x + q_i x²` of a
//! target function over a knot vector.
//!
//! Each segment is an independent least-squares problem: the coefficients
//! minimise `∫ (c(x) - h_i(x))² dx` over the segment. Nothing ties adjacent
//! segments together, so `h` is in general discontinuous at interior knots;
//! [`QuadraticSpline::knot_jumps`] reports by how much.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};

/// Root-acceptance widening for [`QuadraticSpline::invert_segment`].
pub const ROOT_DOMAIN_SLACK: f64 = 1e-9;

/// Below `LINEAR_FALLBACK * |p|` the quadratic term is dropped when inverting.
pub const LINEAR_FALLBACK: f64 = 1e-12;

/// Ordered knots `0 = x_0 < x_1 < ... < x_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector(Vec<f64>);

impl KnotVector {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "a knot vector needs at least two knots, got {}",
                knots.len()
            )));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "first knot must be 0, got {}",
                knots[0]
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) || knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "knots must be finite and strictly increasing: {knots:?}"
            )));
        }
        Ok(Self(knots))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn segment_count(&self) -> usize {
        self.0.len() - 1
    }

    pub fn last(&self) -> f64 {
        *self.0.last().expect("knot vector is never empty")
    }

    /// `(lo, hi)` pairs for every segment.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSegment {
    pub r: f64,
    pub p: f64,
    pub q: f64,
    pub lo: f64,
    pub hi: f64,
}

impl QuadSegment {
    pub fn value(&self, x: f64) -> f64 {
        self.r + x * (self.p + x * self.q)
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.p + 2.0 * self.q * x
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn coefficients(&self) -> [f64; 3] {
        [self.r, self.p, self.q]
    }

    fn with_coefficients(&self, c: [f64; 3]) -> Self {
        Self {
            r: c[0],
            p: c[1],
            q: c[2],
            ..*self
        }
    }

    /// Smallest slope on the segment. The slope is linear, so an endpoint attains it.
    pub fn min_slope(&self) -> f64 {
        self.slope(self.lo).min(self.slope(self.hi))
    }
}

/// Segments tiling `[x_0, x_L]` in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSpline {
    segments: Vec<QuadSegment>,
}

/// Output of [`fit_with_report`]: the spline plus per-segment diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub spline: QuadraticSpline,
    /// 1-norm condition number of each segment's normal-equation matrix.
    pub condition_numbers: Vec<f64>,
}

impl QuadraticSpline {
    pub fn from_segments(segments: Vec<QuadSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::KnotMismatch("spline has no segments".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.lo < s.hi) {
                return Err(Error::KnotMismatch(format!(
                    "segment {i} has lo >= hi ({}, {})",
                    s.lo, s.hi
                )));
            }
        }
        if let Some(w) = segments.windows(2).find(|w| w[0].hi != w[1].lo) {
            return Err(Error::KnotMismatch(format!(
                "segments do not tile: hi {} followed by lo {}",
                w[0].hi, w[1].lo
            )));
        }
        Ok(Self { segments })
    }

    /// `h(x) = x` on every interval of `knots`.
    pub fn identity_on(knots: &KnotVector) -> Self {
        let segments = knots
            .intervals()
            .map(|(lo, hi)| QuadSegment {
                r: 0.0,
                p: 1.0,
                q: 0.0,
                lo,
                hi,
            })
            .collect();
        Self { segments }
    }

    /// Single-segment identity on `[lo, hi]`.
    pub fn identity(lo: f64, hi: f64) -> Self {
        Self {
            segments: vec![QuadSegment {
                r: 0.0,
                p: 1.0,
                q: 0.0,
                lo,
                hi,
            }],
        }
    }

    pub fn segments(&self) -> &[QuadSegment] {
        &self.segments
    }

    pub fn lo(&self) -> f64 {
        self.segments[0].lo
    }

    pub fn hi(&self) -> f64 {
        self.segments[self.segments.len() - 1].hi
    }

    pub fn knots(&self) -> Vec<f64> {
        std::iter::once(self.lo())
            .chain(self.segments.iter().map(|s| s.hi))
            .collect()
    }

    /// Index of the segment owning `x`. Interior knots belong to the left segment.
    pub fn segment_index(&self, x: f64) -> Result<usize> {
        if !(x >= self.lo() && x <= self.hi()) {
            return Err(Error::Domain(format!(
                "x = {x} outside spline domain [{}, {}]",
                self.lo(),
                self.hi()
            )));
        }
        Ok(self.segments.partition_point(|s| s.hi < x))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.segments[self.segment_index(x)?].value(x))
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        Ok(self.segments[self.segment_index(x)?].slope(x))
    }

    /// `h_{i+1}(x_i) - h_i(x_i)` at each interior knot.
    pub fn knot_jumps(&self) -> Vec<f64> {
        self.segments
            .windows(2)
            .map(|w| w[1].value(w[0].hi) - w[0].value(w[0].hi))
            .collect()
    }

    /// Solves `h_i(y) = target` on segment `i`.
    ///
    /// Uses the cancellation-free form of the quadratic formula and accepts a
    /// root lying within [`ROOT_DOMAIN_SLACK`] of the segment; the returned
    /// value is clamped into `[lo, hi]`.
    pub fn invert_segment(&self, segment: usize, target: f64) -> Result<f64> {
        let s = self.segments.get(segment).ok_or(Error::IndexOutOfRange {
            index: segment,
            cells: self.segments.len(),
        })?;
        let c = s.r - target;
        let in_domain = |y: f64| y >= s.lo - ROOT_DOMAIN_SLACK && y <= s.hi + ROOT_DOMAIN_SLACK;
        let no_root = Error::NoRootInDomain {
            segment,
            target,
            lo: s.lo,
            hi: s.hi,
        };

        let roots: Vec<f64> = if s.q.abs() < LINEAR_FALLBACK * s.p.abs() {
            vec![-c / s.p]
        } else if s.q == 0.0 {
            // p == 0 as well: constant segment.
            return Err(Error::NoRealRoot { segment, target });
        } else {
            let disc = s.p * s.p - 4.0 * s.q * c;
            if disc < 0.0 {
                return Err(Error::NoRealRoot { segment, target });
            }
            let t = -0.5 * (s.p + s.p.signum() * disc.sqrt());
            if t == 0.0 {
                vec![0.0]
            } else {
                vec![t / s.q, c / t]
            }
        };

        let mut inside = roots.into_iter().filter(|y| in_domain(*y));
        let root = inside.next().ok_or(no_root)?;
        if let Some(other) = inside.next() {
            if (other - root).abs() > ROOT_DOMAIN_SLACK {
                return Err(Error::AmbiguousRoot { segment, target });
            }
        }
        Ok(root.clamp(s.lo, s.hi))
    }

    fn check_alignment(&self, knots: &KnotVector) -> Result<()> {
        let k = knots.as_slice();
        if self.segments.len() != knots.segment_count() {
            return Err(Error::KnotMismatch(format!(
                "{} segments for {} knot intervals",
                self.segments.len(),
                knots.segment_count()
            )));
        }
        for (i, (s, (lo, hi))) in self.segments.iter().zip(knots.intervals()).enumerate() {
            if s.lo != lo || s.hi != hi {
                return Err(Error::KnotMismatch(format!(
                    "segment {i} spans [{}, {}] but knots give [{lo}, {hi}]; knots {k:?}",
                    s.lo, s.hi
                )));
            }
        }
        Ok(())
    }

    /// Copy with segment `i`'s coefficients replaced.
    pub fn with_segment_coefficients(&self, segment: usize, coefficients: [f64; 3]) -> Self {
        let mut out = self.clone();
        out.segments[segment] = out.segments[segment].with_coefficients(coefficients);
        out
    }
}

fn monomial_moment(power: usize, lo: f64, hi: f64) -> f64 {
    let n = power as i32 + 1;
    (hi.powi(n) - lo.powi(n)) / n as f64
}

/// 3x3 LU factorisation with partial pivoting.
struct Lu3 {
    lu: [[f64; 3]; 3],
    perm: [usize; 3],
}

impl Lu3 {
    #[allow(clippy::needless_range_loop)]
    fn factor(mut a: [[f64; 3]; 3]) -> Option<Self> {
        let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut perm = [0, 1, 2];
        for col in 0..3 {
            let pivot = (col..3)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .expect("non-empty range");
            if a[pivot][col].abs() <= f64::EPSILON * scale {
                return None;
            }
            a.swap(col, pivot);
            perm.swap(col, pivot);
            for row in col + 1..3 {
                let factor = a[row][col] / a[col][col];
                a[row][col] = factor;
                for k in col + 1..3 {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
        Some(Self { lu: a, perm })
    }

    fn solve(&self, b: [f64; 3]) -> [f64; 3] {
        let mut y = [b[self.perm[0]], b[self.perm[1]], b[self.perm[2]]];
        for i in 1..3 {
            for k in 0..i {
                y[i] -= self.lu[i][k] * y[k];
            }
        }
        for i in (0..3).rev() {
            for k in i + 1..3 {
                y[i] -= self.lu[i][k] * y[k];
            }
            y[i] /= self.lu[i][i];
        }
        y
    }

    fn condition_number(&self, a: &[[f64; 3]; 3]) -> f64 {
        let norm1 = |m: &[[f64; 3]; 3]| {
            (0..3)
                .map(|c| (0..3).map(|r| m[r][c].abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let mut inv = [[0.0; 3]; 3];
        for c in 0..3 {
            let mut e = [0.0; 3];
            e[c] = 1.0;
            let col = self.solve(e);
            for r in 0..3 {
                inv[r][c] = col[r];
            }
        }
        norm1(a) * norm1(&inv)
    }
}

/// Least-squares quadratic fit of `target` on every knot interval.
pub fn fit<F: Fn(f64) -> f64>(
    target: F,
    knots: &KnotVector,
    quad: &QuadratureSpec,
) -> Result<QuadraticSpline> {
    Ok(fit_with_report(target, knots, quad)?.spline)
}

pub fn fit_with_report<F: Fn(f64) -> f64>(
    target: F,
    knots: &KnotVector,
    quad: &QuadratureSpec,
) -> Result<FitReport> {
    let mut segments = Vec::with_capacity(knots.segment_count());
    let mut condition_numbers = Vec::with_capacity(knots.segment_count());
    for (lo, hi) in knots.intervals() {
        let mut gram = [[0.0; 3]; 3];
        for (j, row) in gram.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = monomial_moment(j + k, lo, hi);
            }
        }
        let mut rhs = [0.0; 3];
        for (k, v) in rhs.iter_mut().enumerate() {
            *v = integrate(|x| x.powi(k as i32) * target(x), lo, hi, quad)?;
        }
        let lu = Lu3::factor(gram).ok_or(Error::SingularSystem { lo, hi })?;
        let [r, p, q] = lu.solve(rhs);
        let cond = lu.condition_number(&gram);
        log::debug!("segment [{lo}, {hi}]: normal-equation condition number {cond:.3e}");
        condition_numbers.push(cond);
        segments.push(QuadSegment { r, p, q, lo, hi });
    }
    Ok(FitReport {
        spline: QuadraticSpline { segments },
        condition_numbers,
    })
}

/// Length-weighted squared fitting error `Σ 1/(x_i - x_{i-1}) ∫ (c - h)² dx`.
pub fn fit_objective<F: Fn(f64) -> f64>(
    target: F,
    spline: &QuadraticSpline,
    knots: &KnotVector,
    quad: &QuadratureSpec,
) -> Result<f64> {
    spline.check_alignment(knots)?;
    spline.segments.iter().try_fold(0.0, |acc, s| {
        let sq = integrate(
            |x| {
                let e = target(x) - s.value(x);
                e * e
            },
            s.lo,
            s.hi,
            quad,
        )?;
        Ok(acc + sq / s.length())
    })
}
