//! Uniform linear arrays, sine-space intervals and beamformers.
//!
//! Directions are handled as directional cosines `s = sin θ`. With
//! half-wavelength spacing a contiguous block of `N_a` co-phased elements has
//! a main lobe of sine width `2 / N_a`, which is what
//! [`synthesize_deactivation`] relies on.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformLinearArray {
    num_elements: usize,
    spacing_wavelengths: f64,
}

impl UniformLinearArray {
    /// Half-wavelength array with `num_elements` antennas.
    pub fn new(num_elements: usize) -> Result<Self> {
        Self::with_spacing(num_elements, 0.5)
    }

    pub fn with_spacing(num_elements: usize, spacing_wavelengths: f64) -> Result<Self> {
        if num_elements == 0 {
            return Err(invalid("array needs at least one element"));
        }
        if spacing_wavelengths <= 0.0 || !spacing_wavelengths.is_finite() {
            return Err(invalid(format!(
                "element spacing must be positive, got {spacing_wavelengths}"
            )));
        }
        Ok(Self {
            num_elements,
            spacing_wavelengths,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing_wavelengths(&self) -> f64 {
        self.spacing_wavelengths
    }

    /// Unnormalized steering vector, entry `m = exp(j 2π d m sin θ)`.
    pub fn steering_vector(&self, angle_deg: f64) -> Vec<Complex64> {
        self.steering_vector_sine(angle_deg.to_radians().sin())
    }

    pub fn steering_vector_sine(&self, sine: f64) -> Vec<Complex64> {
        let step = 2.0 * PI * self.spacing_wavelengths * sine;
        (0..self.num_elements)
            .map(|m| Complex64::from_polar(1.0, step * m as f64))
            .collect()
    }

    /// `v(s) · w†` for weights `w`.
    pub fn response_sine(&self, weights: &[Complex64], sine: f64) -> Complex64 {
        let step = 2.0 * PI * self.spacing_wavelengths * sine;
        weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != Complex64::new(0.0, 0.0))
            .map(|(m, w)| Complex64::from_polar(1.0, step * m as f64) * w.conj())
            .sum()
    }
}

/// Half-open interval `[lo, hi)` of directional cosines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleInterval {
    lo: f64,
    hi: f64,
}

impl AngleInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(-1.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(invalid(format!(
                "sine interval must satisfy -1 <= lo < hi <= 1, got [{lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Interval spanned by two physical angles in `[-90, 90]` degrees.
    pub fn from_degrees(lo_deg: f64, hi_deg: f64) -> Result<Self> {
        Self::new(lo_deg.to_radians().sin(), hi_deg.to_radians().sin())
    }

    /// The whole visible region `[-1, 1]`.
    pub fn full() -> Self {
        Self { lo: -1.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, sine: f64) -> bool {
        self.lo <= sine && sine < self.hi
    }

    /// Splits into `parts` equal-width sub-intervals, left to right. The
    /// outer end points are copied, not recomputed.
    pub fn split(&self, parts: usize) -> Vec<AngleInterval> {
        let w = self.width() / parts as f64;
        (0..parts)
            .map(|i| AngleInterval {
                lo: if i == 0 { self.lo } else { self.lo + w * i as f64 },
                hi: if i + 1 == parts {
                    self.hi
                } else {
                    self.lo + w * (i + 1) as f64
                },
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beamformer {
    pub weights: Vec<Complex64>,
    pub coverage: AngleInterval,
    pub level: usize,
    pub index: usize,
}

impl Beamformer {
    pub fn active_elements(&self) -> usize {
        self.weights.iter().filter(|w| w.norm_sqr() > 0.0).count()
    }
}

/// `|v(θ) · w†|²`.
pub fn beam_gain(beam: &Beamformer, array: &UniformLinearArray, angle_deg: f64) -> f64 {
    array
        .response_sine(&beam.weights, angle_deg.to_radians().sin())
        .norm_sqr()
}

/// Number of active elements used for a beam of sine width `width`,
/// `round(2 / width)` for half-wavelength spacing.
pub fn active_count(array: &UniformLinearArray, width: f64) -> Result<usize> {
    let exact = 1.0 / (array.spacing_wavelengths() * width);
    let n_a = ((exact + 0.5 + 1e-9).floor() as usize).max(1);
    if n_a > array.num_elements() {
        return Err(Error::BeamTooNarrow {
            required: n_a,
            available: array.num_elements(),
        });
    }
    Ok(n_a)
}

/// Beam steered to the middle of `coverage` using a centered block of
/// `round(2 / width)` active elements; the other weights are zero.
pub fn synthesize_deactivation(
    array: &UniformLinearArray,
    coverage: AngleInterval,
) -> Result<Beamformer> {
    let n = array.num_elements();
    let n_a = active_count(array, coverage.width())?;
    let start = (n - n_a) / 2;
    let step = 2.0 * PI * array.spacing_wavelengths() * coverage.center();
    let amp = 1.0 / (n_a as f64).sqrt();
    let weights = (0..n)
        .map(|m| {
            if (start..start + n_a).contains(&m) {
                Complex64::from_polar(amp, step * m as f64)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(Beamformer {
        weights,
        coverage,
        level: 0,
        index: 0,
    })
}

/// Flat-top gain of an ideal transmit/receive beam pair: the product
/// `(N_T L_T / L_T_max)(N_R L_R / L_R_max)` when both angles fall inside the
/// beams, otherwise zero. The finest level gets the full array gains.
pub fn ideal_gain(
    level_sizes: (usize, usize),
    top_sizes: (usize, usize),
    arrays: (usize, usize),
    aod_inside: bool,
    aoa_inside: bool,
) -> f64 {
    if !(aod_inside && aoa_inside) {
        return 0.0;
    }
    ideal_single(level_sizes.0, top_sizes.0, arrays.0) * ideal_single(level_sizes.1, top_sizes.1, arrays.1)
}

/// One-sided ideal gain `N L / L_max`.
pub fn ideal_single(level_size: usize, top_size: usize, num_elements: usize) -> f64 {
    num_elements as f64 * level_size as f64 / top_size as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn steering_examples() {
        let a4 = UniformLinearArray::new(4).unwrap();
        assert!(a4.steering_vector(0.0).iter().all(|v| close(*v, Complex64::new(1.0, 0.0))));
        let a2 = UniformLinearArray::new(2).unwrap();
        let v = a2.steering_vector(90.0);
        assert!(close(v[0], Complex64::new(1.0, 0.0)));
        assert!(close(v[1], Complex64::new(-1.0, 0.0)));
    }

    #[test]
    fn matched_beam_has_full_gain() {
        let a = UniformLinearArray::new(64).unwrap();
        let angle = 17.0;
        let w: Vec<_> = a.steering_vector(angle).iter().map(|v| v / 8.0).collect();
        let beam = Beamformer {
            weights: w,
            coverage: AngleInterval::full(),
            level: 0,
            index: 0,
        };
        assert!((beam_gain(&beam, &a, angle) - 64.0).abs() < 1e-9);
    }

    #[test]
    fn deactivation_examples() {
        let a = UniformLinearArray::new(64).unwrap();
        let fine = synthesize_deactivation(&a, AngleInterval::new(0.0, 1.0 / 32.0).unwrap()).unwrap();
        assert_eq!(fine.active_elements(), 64);
        let center = (1.0f64 / 64.0).asin().to_degrees();
        assert!((beam_gain(&fine, &a, center) - 64.0).abs() < 1e-9);

        let wide = synthesize_deactivation(&a, AngleInterval::new(0.0, 0.5).unwrap()).unwrap();
        assert_eq!(wide.active_elements(), 4);
        let center = 0.25f64.asin().to_degrees();
        assert!((beam_gain(&wide, &a, center) - 4.0).abs() < 0.2);

        let a4 = UniformLinearArray::new(4).unwrap();
        let omni = synthesize_deactivation(&a4, AngleInterval::full()).unwrap();
        assert_eq!(omni.active_elements(), 1);
        for deg in [-80.0, -10.0, 0.0, 45.0, 89.0] {
            assert!((beam_gain(&omni, &a4, deg) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_narrow_is_rejected() {
        let a = UniformLinearArray::new(16).unwrap();
        let err = synthesize_deactivation(&a, AngleInterval::new(0.0, 1.0 / 32.0).unwrap());
        assert!(matches!(
            err,
            Err(Error::BeamTooNarrow {
                required: 64,
                available: 16
            })
        ));
    }

    #[test]
    fn ideal_gain_ladder() {
        assert_eq!(ideal_gain((32, 4), (32, 4), (64, 4), true, true), 256.0);
        assert_eq!(ideal_gain((2, 4), (32, 4), (64, 4), true, true), 16.0);
        assert_eq!(ideal_gain((2, 4), (32, 4), (64, 4), false, true), 0.0);
        // Gain times sine width of one beam is the same at every level.
        let sector = 1.0;
        let products: Vec<f64> = (1..=5)
            .map(|k| {
                let size = 1usize << k;
                ideal_single(size, 32, 64) * sector / size as f64
            })
            .collect();
        assert!(products.windows(2).all(|p| (p[0] - p[1]).abs() < 1e-12));
    }

    /// Midpoint-rule quadrature of the pattern over the visible region. For a
    /// half-wavelength array the pattern is a trigonometric polynomial of
    /// degree < N in π s, so the rule with more than N nodes is exact.
    fn mean_pattern(a: &UniformLinearArray, w: &[Complex64]) -> f64 {
        let nodes = 4 * a.num_elements() + 7;
        let h = 2.0 / nodes as f64;
        (0..nodes)
            .map(|i| a.response_sine(w, -1.0 + h * (i as f64 + 0.5)).norm_sqr())
            .sum::<f64>()
            * h
            / 2.0
    }

    proptest! {
        #[test]
        fn synthesized_beams_are_unit_norm_constant_modulus(
            n_pow in 0u32..7, lo in -1.0f64..0.9, frac in 0.01f64..1.0,
        ) {
            let a = UniformLinearArray::new(1 << n_pow).unwrap();
            let hi = (lo + frac * (1.0 - lo)).min(1.0);
            prop_assume!(hi > lo);
            let iv = AngleInterval::new(lo, hi).unwrap();
            if let Ok(beam) = synthesize_deactivation(&a, iv) {
                let norm: f64 = beam.weights.iter().map(|w| w.norm_sqr()).sum();
                prop_assert!((norm - 1.0).abs() < 1e-12);
                let n_a = beam.active_elements() as f64;
                for w in &beam.weights {
                    let m = w.norm();
                    prop_assert!(m == 0.0 || (m - n_a.sqrt().recip()).abs() < 1e-12);
                }
                prop_assert!((mean_pattern(&a, &beam.weights) - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn pattern_energy_is_conserved_for_any_unit_weights(
            re in proptest::collection::vec(-1.0f64..1.0, 1..20),
            im in proptest::collection::vec(-1.0f64..1.0, 20),
        ) {
            let n = re.len();
            let mut w: Vec<Complex64> = (0..n).map(|i| Complex64::new(re[i], im[i])).collect();
            let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            w.iter_mut().for_each(|x| *x /= norm);
            let a = UniformLinearArray::new(n).unwrap();
            prop_assert!((mean_pattern(&a, &w) - 1.0).abs() < 1e-6);
        }
    }
}
