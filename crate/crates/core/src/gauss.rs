//! Gaussian source model: density, tail statistics, the MSE-optimal
//! compressor and the support-region threshold.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};

/// Tail integrals over `[x_max, inf)` are truncated at `x_max + TAIL_SPAN_SIGMAS * sigma`.
pub const TAIL_SPAN_SIGMAS: f64 = 12.0;

/// Above this many standard deviations the upper-tail probability is too
/// close to underflow for a tail centroid to be meaningful.
pub const TAIL_CUTOFF_SIGMAS: f64 = 37.0;

/// Zero-mean Gaussian source with standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    sigma: f64,
}

impl Default for SourceModel {
    fn default() -> Self {
        Self::unit()
    }
}

impl SourceModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    /// The unit-variance reference source.
    pub const fn unit() -> Self {
        Self { sigma: 1.0 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let t = x / self.sigma;
        (-0.5 * t * t).exp() / (self.sigma * (2.0 * PI).sqrt())
    }

    /// `P(X > x)`, through `erfc` so that large `x` does not cancel.
    pub fn upper_tail(&self, x: f64) -> f64 {
        0.5 * libm::erfc(x / (self.sigma * SQRT_2))
    }

    /// `P(a <= X < b)`.
    pub fn probability(&self, a: f64, b: f64) -> f64 {
        if a >= 0.0 {
            self.upper_tail(a) - self.upper_tail(b)
        } else if b <= 0.0 {
            self.upper_tail(-b) - self.upper_tail(-a)
        } else {
            1.0 - self.upper_tail(-a) - self.upper_tail(b)
        }
    }

    /// `∫_a^b x p(x) dx`.
    pub fn first_moment(&self, a: f64, b: f64) -> f64 {
        self.variance() * (self.pdf(a) - self.pdf(b))
    }

    fn erf_scale(&self) -> f64 {
        self.sigma * 6f64.sqrt()
    }

    fn check_compressor_args(&self, x_max: f64, x: f64) -> Result<()> {
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::Domain(format!(
                "x_max must be positive, got {x_max}"
            )));
        }
        if !(x.abs() <= x_max) {
            return Err(Error::Domain(format!(
                "|x| = {} exceeds x_max = {x_max}",
                x.abs()
            )));
        }
        Ok(())
    }

    /// Optimal compressor `c(x)` on `[-x_max, x_max]`.
    ///
    /// `∫_0^|x| p^{1/3}(t) dt` is proportional to `erf(|x| / (σ√6))`, which
    /// gives the closed form used here. [`Self::compressor_by_quadrature`]
    /// evaluates the defining integral instead.
    pub fn compressor(&self, x_max: f64, x: f64) -> Result<f64> {
        self.check_compressor_args(x_max, x)?;
        let s = self.erf_scale();
        Ok(x_max * libm::erf(x / s) / libm::erf(x_max / s))
    }

    /// Unchecked closed-form compressor for use as a fitting target.
    pub fn compressor_fn(&self, x_max: f64) -> impl Fn(f64) -> f64 + Copy + Send + Sync {
        let s = self.erf_scale();
        let norm = x_max / libm::erf(x_max / s);
        move |x| norm * libm::erf(x / s)
    }

    /// `c(x)` computed by integrating `p^{1/3}` numerically.
    pub fn compressor_by_quadrature(
        &self,
        x_max: f64,
        x: f64,
        spec: &QuadratureSpec,
    ) -> Result<f64> {
        self.check_compressor_args(x_max, x)?;
        let cube_root = |t: f64| self.pdf(t).cbrt();
        let numerator = integrate(cube_root, 0.0, x.abs(), spec)?;
        let denominator = integrate(cube_root, 0.0, x_max, spec)?;
        Ok(x_max * x.signum() * numerator / denominator)
    }

    /// `c'(x)`.
    pub fn compressor_slope(&self, x_max: f64, x: f64) -> Result<f64> {
        self.check_compressor_args(x_max, x)?;
        let s = self.erf_scale();
        let t = x / s;
        Ok(x_max * 2.0 / PI.sqrt() * (-t * t).exp() / (s * libm::erf(x_max / s)))
    }

    /// Solves `c(x) = y` for `x` by safeguarded Newton iteration.
    pub fn compressor_inverse(&self, x_max: f64, y: f64) -> Result<f64> {
        self.check_compressor_args(x_max, y)?;
        let target = y.abs();
        let (mut lo, mut hi) = (0.0, x_max);
        let mut x = target;
        for _ in 0..200 {
            let residual = self.compressor(x_max, x)? - target;
            if residual == 0.0 {
                break;
            }
            if residual > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - residual / self.compressor_slope(x_max, x)?;
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 4.0 * f64::EPSILON * x_max {
                x = next;
                break;
            }
            x = next;
        }
        Ok(y.signum() * x)
    }

    /// Support-region threshold `x_max` for an `n_levels`-level quantizer.
    pub fn support_threshold(&self, n_levels: usize) -> Result<f64> {
        if n_levels < 4 {
            return Err(Error::Domain(format!(
                "support threshold needs N >= 4, got {n_levels}"
            )));
        }
        let ln_n = (n_levels as f64).ln();
        let bracket = 1.0 - ln_n.ln() / (4.0 * ln_n) - (3.0 * PI.sqrt()).ln() / (2.0 * ln_n);
        Ok(self.sigma * (6.0 * ln_n).sqrt() * bracket)
    }

    /// Conditional mean of the source beyond `x_max`.
    pub fn tail_centroid(&self, x_max: f64) -> Result<f64> {
        if !(x_max >= 0.0) {
            return Err(Error::Domain(format!(
                "tail centroid needs x_max >= 0, got {x_max}"
            )));
        }
        if x_max > TAIL_CUTOFF_SIGMAS * self.sigma {
            return Err(Error::TailUnderflow {
                x_max,
                cutoff: TAIL_CUTOFF_SIGMAS,
            });
        }
        Ok(self.variance() * self.pdf(x_max) / self.upper_tail(x_max))
    }

    /// `∫_b^∞ (x - y)² p(x) dx` in closed form.
    pub fn tail_squared_error(&self, b: f64, y: f64) -> f64 {
        let var = self.variance();
        let q = self.upper_tail(b);
        let pb = self.pdf(b);
        let second = var * (b * pb + q);
        let first = var * pb;
        second - 2.0 * y * first + y * y * q
    }

    /// Upper truncation point for tail integrals starting at `x_max`.
    pub fn tail_end(&self, x_max: f64) -> f64 {
        x_max + TAIL_SPAN_SIGMAS * self.sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: SourceModel = SourceModel::unit();

    #[test]
    fn pdf_values() {
        assert!((UNIT.pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((UNIT.pdf(1.0) - 0.241_970_724_519_143_37).abs() < 1e-15);
        assert_eq!(UNIT.pdf(-1.0), UNIT.pdf(1.0));
    }

    #[test]
    fn pdf_integrates_to_one() {
        for sigma in [0.5, 1.0, 3.0] {
            let m = SourceModel::new(sigma).unwrap();
            let v = integrate(
                |x| m.pdf(x),
                -10.0 * sigma,
                10.0 * sigma,
                &QuadratureSpec::default(),
            )
            .unwrap();
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        assert!(SourceModel::new(0.0).is_err());
        assert!(SourceModel::new(-1.0).is_err());
        assert!(SourceModel::new(f64::NAN).is_err());
    }

    #[test]
    fn compressor_endpoints_and_domain() {
        let xm = 2.4744;
        assert_eq!(UNIT.compressor(xm, 0.0).unwrap(), 0.0);
        assert!((UNIT.compressor(xm, xm).unwrap() - xm).abs() < 1e-14);
        assert!((UNIT.compressor(xm, -xm).unwrap() + xm).abs() < 1e-14);
        assert!(UNIT.compressor(xm, 2.5).is_err());
    }

    #[test]
    fn compressor_matches_quadrature_at_one() {
        let xm = 2.4744;
        let closed = UNIT.compressor(xm, 1.0).unwrap();
        let quad = UNIT
            .compressor_by_quadrature(xm, 1.0, &QuadratureSpec::tight())
            .unwrap();
        assert!((closed - quad).abs() < 1e-9, "{closed} vs {quad}");
        let expected = xm * libm::erf(1.0 / 6f64.sqrt()) / libm::erf(xm / 6f64.sqrt());
        assert_eq!(closed, expected);
    }

    #[test]
    fn compressor_inverse_round_trip() {
        let xm = 3.05;
        for i in 0..=50 {
            let y = -xm + 2.0 * xm * i as f64 / 50.0;
            let x = UNIT.compressor_inverse(xm, y).unwrap();
            assert!((UNIT.compressor(xm, x).unwrap() - y).abs() < 1e-12);
        }
    }

    #[test]
    fn compressor_slope_matches_difference() {
        let xm = 2.47;
        let h = 1e-6;
        for x in [0.1, 0.8, 1.7, 2.3] {
            let fd = (UNIT.compressor(xm, x + h).unwrap() - UNIT.compressor(xm, x - h).unwrap())
                / (2.0 * h);
            assert!((fd - UNIT.compressor_slope(xm, x).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn support_threshold_values() {
        // Direct evaluation of the threshold formula (checked with an
        // independent calculator): 2.474565 and 3.051935.
        assert!((UNIT.support_threshold(16).unwrap() - 2.474_564_876).abs() < 1e-8);
        assert!((UNIT.support_threshold(32).unwrap() - 3.051_934_948).abs() < 1e-8);
        let two = SourceModel::new(2.0).unwrap();
        for n in [8, 16, 64] {
            assert_eq!(
                two.support_threshold(n).unwrap(),
                2.0 * UNIT.support_threshold(n).unwrap()
            );
        }
        assert!(UNIT.support_threshold(3).is_err());
    }

    #[test]
    fn support_threshold_increasing() {
        let xs: Vec<f64> = [8, 16, 32, 64, 128]
            .iter()
            .map(|&n| UNIT.support_threshold(n).unwrap())
            .collect();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tail_centroid_values() {
        assert!((UNIT.tail_centroid(0.0).unwrap() - (2.0 / PI).sqrt()).abs() < 1e-15);
        // Oracle: both tail integrals by quadrature on [x_max, x_max + 12].
        let xm = 2.4744;
        let spec = QuadratureSpec::tight();
        let num = integrate(|x| x * UNIT.pdf(x), xm, xm + 12.0, &spec).unwrap();
        let den = integrate(|x| UNIT.pdf(x), xm, xm + 12.0, &spec).unwrap();
        let c = UNIT.tail_centroid(xm).unwrap();
        assert!((c - num / den).abs() < 1e-9);
        assert!((c - 2.80).abs() < 0.005);
    }

    #[test]
    fn tail_centroid_gap_positive_and_decreasing() {
        let gaps: Vec<f64> = (0..=50)
            .map(|i| {
                let x = i as f64 * 0.1;
                UNIT.tail_centroid(x).unwrap() - x
            })
            .collect();
        assert!(gaps.iter().all(|&g| g > 0.0));
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn tail_centroid_guard() {
        assert!(UNIT.tail_centroid(36.0).unwrap().is_finite());
        assert!(matches!(
            UNIT.tail_centroid(40.0),
            Err(Error::TailUnderflow { .. })
        ));
        assert!(UNIT.tail_centroid(-1.0).is_err());
    }

    #[test]
    fn tail_squared_error_matches_quadrature() {
        for (b, y) in [(2.0, 2.4), (0.5, 1.0), (3.0, 3.3)] {
            let q = integrate(
                |x| (x - y) * (x - y) * UNIT.pdf(x),
                b,
                b + 14.0,
                &QuadratureSpec::tight(),
            )
            .unwrap();
            assert!((UNIT.tail_squared_error(b, y) - q).abs() < 1e-14);
        }
    }

    #[test]
    fn probability_splits() {
        assert!((UNIT.probability(-1.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-14);
        assert!((UNIT.probability(-2.0, -1.0) - UNIT.probability(1.0, 2.0)).abs() < 1e-16);
    }
}
