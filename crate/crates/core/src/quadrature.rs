//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! error estimate meets `max(absolute_tolerance, relative_tolerance * |I|)`.
//! Error estimates follow the QUADPACK `qk15` heuristic. Selection ties go to
//! the leftmost interval, so the result is a deterministic function of the
//! inputs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    /// Maximum number of subintervals held at once.
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-10,
            absolute_tolerance: 1e-12,
            max_subdivisions: 500,
        }
    }
}

impl QuadratureSpec {
    pub fn new(
        relative_tolerance: f64,
        absolute_tolerance: f64,
        max_subdivisions: usize,
    ) -> Result<Self> {
        let spec = Self {
            relative_tolerance,
            absolute_tolerance,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Tighter settings used by test oracles and objective evaluations.
    pub fn tight() -> Self {
        Self {
            relative_tolerance: 1e-13,
            absolute_tolerance: 1e-17,
            max_subdivisions: 2000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relative_tolerance > 0.0) || !(self.absolute_tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "quadrature tolerances must be positive (rel {}, abs {})",
                self.relative_tolerance, self.absolute_tolerance
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidConfig(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs_sum = WGK[7] * fc.abs();
    let mut values = [(0.0, 0.0); 7];
    for (j, node) in XGK[..7].iter().enumerate() {
        let dx = half * node;
        let (f1, f2) = (f(center - dx), f(center + dx));
        values[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }

    let value = kronrod * half;
    let abs_value = abs_sum * half.abs();
    let asc = asc * half.abs();
    if !value.is_finite() {
        return Err(Error::Domain(format!(
            "integrand is not finite on [{a}, {b}]"
        )));
    }
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * abs_value;
    if abs_value > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(roundoff);
    }
    Ok(Panel { a, b, value, error })
}

/// Integrates `f` over `[a, b]`.
///
/// Returns [`Error::QuadratureDiverged`] (carrying the best estimate) when
/// the tolerance is not met within `spec.max_subdivisions` panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Domain(format!(
            "integration bounds [{a}, {b}] are not a finite interval"
        )));
    }
    if a == b {
        return Ok(0.0);
    }

    let mut panels = vec![kronrod15(&f, a, b)?];
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let target = spec
            .absolute_tolerance
            .max(spec.relative_tolerance * total.abs());
        if error <= target {
            return Ok(total);
        }
        if panels.len() >= spec.max_subdivisions {
            return Err(Error::QuadratureDiverged {
                estimate: total,
                error_estimate: error,
                subdivisions: panels.len(),
            });
        }

        let (worst, _) =
            panels
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, be), (i, p)| {
                    if p.error > be {
                        (i, p.error)
                    } else {
                        (bi, be)
                    }
                });
        let panel = panels[worst];
        let mid = 0.5 * (panel.a + panel.b);
        if mid <= panel.a || mid >= panel.b {
            // Interval can no longer be split in floating point.
            return Err(Error::QuadratureDiverged {
                estimate: total,
                error_estimate: error,
                subdivisions: panels.len(),
            });
        }
        panels[worst] = kronrod15(&f, panel.a, mid)?;
        panels.insert(worst + 1, kronrod15(&f, mid, panel.b)?);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn std_pdf(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }

    #[test]
    fn constant_on_unit_interval() {
        let v = integrate(|_| 1.0, 0.0, 1.0, &QuadratureSpec::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_normalization() {
        let v = integrate(std_pdf, -8.0, 8.0, &QuadratureSpec::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn gaussian_unit_variance() {
        let v = integrate(
            |x| x * x * std_pdf(x),
            -8.0,
            8.0,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(
            integrate(|x| x, 2.0, 2.0, &QuadratureSpec::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn reversed_bounds_rejected() {
        assert!(matches!(
            integrate(|x| x, 1.0, 0.0, &QuadratureSpec::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn exhausted_budget_keeps_estimate() {
        let spec = QuadratureSpec::new(1e-14, 1e-300, 1).unwrap();
        match integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, &spec) {
            Err(Error::QuadratureDiverged {
                estimate,
                subdivisions,
                ..
            }) => {
                assert_eq!(subdivisions, 1);
                assert!((estimate - 4.0 / 3.0).abs() < 0.05);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(QuadratureSpec::new(0.0, 1e-12, 10).is_err());
        assert!(QuadratureSpec::new(1e-10, 1e-12, 0).is_err());
    }

    #[test]
    fn deterministic() {
        let f = |x: f64| (3.0 * x).sin() * (-x).exp();
        let s = QuadratureSpec::default();
        assert_eq!(
            integrate(f, 0.0, 5.0, &s).unwrap().to_bits(),
            integrate(f, 0.0, 5.0, &s).unwrap().to_bits()
        );
    }

    #[test]
    fn kink_converges() {
        let v = integrate(
            |x: f64| (x - 0.3).abs(),
            0.0,
            1.0,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-10);
    }
}
