//! Free-space channel coefficients and antenna gain / aperture models.
//!
//! A one-hop coefficient has amplitude sqrt(G_src * A_dst / 4pi) / r and
//! phase -2*pi*r/lambda. Effective apertures derive from gain patterns via
//! A = G * lambda^2 / 4pi; the element's angular rolloff is carried once,
//! by the amplitude pattern, so cascading a hop through an element does not
//! count the pattern twice.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

/// Directional gain model for a terminal antenna or for the array element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AntennaPattern {
    /// Unit gain in every direction.
    Isotropic,
    /// gain(theta) = peak_gain * cos^q(theta) on the front hemisphere,
    /// zero behind.
    CosinePower { exponent: f64, peak_gain: f64 },
}

impl AntennaPattern {
    /// Cosine-power pattern with the lossless normalization
    /// peak_gain = 2(q+1), which makes the hemispheric radiated power
    /// integrate to 4pi.
    pub fn cosine_auto(exponent: f64) -> Result<Self> {
        if !(exponent >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cosine pattern exponent must be >= 0, got {exponent}"
            )));
        }
        Ok(AntennaPattern::CosinePower {
            exponent,
            peak_gain: 2.0 * (exponent + 1.0),
        })
    }

    pub fn cosine_with_peak(exponent: f64, peak_gain: f64) -> Result<Self> {
        if !(exponent >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cosine pattern exponent must be >= 0, got {exponent}"
            )));
        }
        if !(peak_gain >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "peak gain must be >= 1 (linear), got {peak_gain}"
            )));
        }
        Ok(AntennaPattern::CosinePower {
            exponent,
            peak_gain,
        })
    }

    /// Linear gain toward a direction `zenith` radians off boresight.
    pub fn gain(&self, zenith: f64) -> f64 {
        match *self {
            AntennaPattern::Isotropic => 1.0,
            AntennaPattern::CosinePower {
                exponent,
                peak_gain,
            } => {
                if zenith >= std::f64::consts::FRAC_PI_2 {
                    0.0
                } else {
                    peak_gain * zenith.cos().powf(exponent)
                }
            }
        }
    }

    /// Boresight (peak) linear gain.
    pub fn peak_gain(&self) -> f64 {
        match *self {
            AntennaPattern::Isotropic => 1.0,
            AntennaPattern::CosinePower { peak_gain, .. } => peak_gain,
        }
    }

    /// Normalized amplitude rolloff in [0, 1]: cos^q(theta) for the
    /// cosine-power pattern, 1 everywhere for isotropic.
    pub fn amplitude(&self, zenith: f64) -> f64 {
        match *self {
            AntennaPattern::Isotropic => 1.0,
            AntennaPattern::CosinePower { exponent, .. } => {
                if zenith >= std::f64::consts::FRAC_PI_2 {
                    0.0
                } else {
                    zenith.cos().powf(exponent)
                }
            }
        }
    }
}

/// Amplitude and carrier phase of one free-space hop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelCoefficient {
    /// Dimensionless amplitude attenuation (>= 0).
    pub amplitude: f64,
    /// Propagation phase in [0, 2pi).
    pub phase: f64,
}

impl ChannelCoefficient {
    pub fn as_complex(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }
}

/// Effective aperture of a gain: A = G * lambda^2 / 4pi.
pub fn effective_aperture(gain: f64, wavelength: f64) -> f64 {
    gain * wavelength * wavelength / (4.0 * PI)
}

/// Electrical path length +2*pi*r/lambda reduced to [0, 2pi).
///
/// The reduction happens in the cycle domain (fractional part of
/// r/lambda) before the multiplication by 2pi, which keeps the error below
/// 1e-9 rad out to at least 1e4 wavelengths.
pub fn path_phase(distance: f64, wavelength: f64) -> f64 {
    let cycles = distance / wavelength;
    let frac = cycles - cycles.floor();
    let phase = frac * TAU;
    if phase >= TAU {
        0.0
    } else {
        phase
    }
}

/// Propagation phase -2*pi*r/lambda reduced to [0, 2pi).
pub fn propagation_phase(distance: f64, wavelength: f64) -> f64 {
    let p = path_phase(distance, wavelength);
    if p == 0.0 {
        0.0
    } else {
        TAU - p
    }
}

/// One-hop free-space channel coefficient between a source with gain
/// `src_gain` toward the destination and a destination presenting
/// effective aperture `dst_aperture`.
pub fn free_space_coeff(
    src_gain: f64,
    dst_aperture: f64,
    distance: f64,
    wavelength: f64,
) -> Result<ChannelCoefficient> {
    if !(distance > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "hop distance must be positive, got {distance} m"
        )));
    }
    Ok(ChannelCoefficient {
        amplitude: (src_gain * dst_aperture / (4.0 * PI)).sqrt() / distance,
        phase: propagation_phase(distance, wavelength),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Directivity of a cos^q pattern by hemisphere quadrature:
    /// D = 4pi / integral(cos^q(theta) * sin(theta) dtheta dphi).
    fn directivity_by_quadrature(q: f64) -> f64 {
        let steps = 200_000;
        let dt = std::f64::consts::FRAC_PI_2 / steps as f64;
        let mut integral = 0.0;
        for i in 0..steps {
            let theta = (i as f64 + 0.5) * dt;
            integral += theta.cos().powf(q) * theta.sin() * dt;
        }
        4.0 * PI / (TAU * integral)
    }

    #[test]
    fn cosine_auto_boresight_gain() {
        let p = AntennaPattern::cosine_auto(1.0).unwrap();
        assert_eq!(p.gain(0.0), 4.0);
        let d = directivity_by_quadrature(1.0);
        assert!((p.gain(0.0) - d).abs() / d < 1e-9, "quadrature gave {d}");
    }

    #[test]
    fn cosine_auto_matches_quadrature_for_other_exponents() {
        for q in [0.5, 2.0, 3.0] {
            let p = AntennaPattern::cosine_auto(q).unwrap();
            let d = directivity_by_quadrature(q);
            assert!(
                (p.gain(0.0) - d).abs() / d < 1e-8,
                "q={q}: pattern {} vs quadrature {d}",
                p.gain(0.0)
            );
        }
    }

    #[test]
    fn cosine_sixty_degrees_is_half() {
        let p = AntennaPattern::cosine_auto(1.0).unwrap();
        let g = p.gain(60f64.to_radians());
        assert!((g - 2.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_everywhere_one() {
        let p = AntennaPattern::Isotropic;
        for z in [0.0, 0.7, 1.5, 3.0] {
            assert_eq!(p.gain(z), 1.0);
            assert_eq!(p.amplitude(z), 1.0);
        }
    }

    #[test]
    fn back_hemisphere_is_dark() {
        let p = AntennaPattern::cosine_auto(1.0).unwrap();
        assert_eq!(p.gain(std::f64::consts::FRAC_PI_2), 0.0);
        assert_eq!(p.gain(2.0), 0.0);
        assert_eq!(p.amplitude(2.0), 0.0);
    }

    #[test]
    fn aperture_at_2_6_ghz() {
        // lambda^2 / 4pi near the 2.6 GHz carrier; frozen from direct evaluation
        let a = effective_aperture(1.0, 0.11534);
        assert!((a - 1.0586e-3).abs() / 1.0586e-3 < 1e-3, "got {a}");
        assert!((a - 0.11534 * 0.11534 / (4.0 * PI)).abs() < 1e-18);
    }

    #[test]
    fn aperture_scaling() {
        assert_eq!(effective_aperture(0.0, 0.1), 0.0);
        let a1 = effective_aperture(1.0, 0.1);
        let a2 = effective_aperture(1.0, 0.2);
        assert!((a2 / a1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn coeff_at_one_wavelength() {
        let lambda = 0.115;
        let aperture = effective_aperture(1.0, lambda);
        let c = free_space_coeff(1.0, aperture, lambda, lambda).unwrap();
        assert!((c.amplitude - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert_eq!(c.phase, 0.0);
        let c2 = free_space_coeff(1.0, aperture, 2.0 * lambda, lambda).unwrap();
        assert!((c2.amplitude - 1.0 / (8.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn zero_distance_rejected() {
        assert!(matches!(
            free_space_coeff(1.0, 1e-3, 0.0, 0.1),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(free_space_coeff(1.0, 1e-3, -1.0, 0.1).is_err());
    }

    proptest! {
        /// Friis consistency: with isotropic ends, |f|^2 equals the one-hop
        /// Friis factor rebuilt from the aperture.
        #[test]
        fn friis_consistency(r in 0.5f64..100.0, lambda in 0.01f64..1.0) {
            let aperture = effective_aperture(1.0, lambda);
            let c = free_space_coeff(1.0, aperture, r, lambda).unwrap();
            let friis = (lambda / (4.0 * PI * r)).powi(2);
            let lhs = c.amplitude * c.amplitude;
            let rhs = friis * (4.0 * PI / (lambda * lambda)) * aperture;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs, "lhs {lhs} rhs {rhs}");
        }

        /// Phase reduction accuracy out to 1e4 wavelengths. The reference
        /// fractional cycle count is exact by construction.
        #[test]
        fn phase_reduction_accuracy(whole in 0u32..10_000, frac in 0.0f64..1.0, lambda in 0.01f64..1.0) {
            let cycles = whole as f64 + frac;
            let r = cycles * lambda;
            let got = propagation_phase(r, lambda);
            // reference: -2pi * frac(cycles) mod 2pi, with frac(cycles) recovered
            // from the rounded product/quotient chain
            let ref_frac = (r / lambda).fract();
            let expect = if ref_frac == 0.0 { 0.0 } else { (1.0 - ref_frac) * TAU };
            let diff = (got - expect).abs();
            let circ = diff.min(TAU - diff);
            prop_assert!(circ < 1e-9, "phase error {circ} at {cycles} cycles");
            // cross-check against the exact fractional part of the intended cycles
            let true_expect = if frac == 0.0 { 0.0 } else { (1.0 - frac) * TAU };
            let d2 = (got - true_expect).abs();
            let circ2 = d2.min(TAU - d2);
            prop_assert!(circ2 < 1e-9, "phase error vs true cycles {circ2}");
        }

        /// Swapping source gain with the gain implied by the destination
        /// aperture leaves the amplitude unchanged.
        #[test]
        fn reciprocity(g_src in 1.0f64..100.0, g_dst in 1.0f64..100.0, r in 0.5f64..50.0) {
            let lambda = 0.115;
            let fwd = free_space_coeff(g_src, effective_aperture(g_dst, lambda), r, lambda).unwrap();
            let rev = free_space_coeff(g_dst, effective_aperture(g_src, lambda), r, lambda).unwrap();
            prop_assert!((fwd.amplitude - rev.amplitude).abs() <= 1e-15 * fwd.amplitude);
        }

        /// Amplitude decreases strictly as 1/r.
        #[test]
        fn inverse_distance(r in 0.1f64..100.0, k in 1.1f64..10.0) {
            let lambda = 0.115;
            let a = effective_aperture(1.0, lambda);
            let c1 = free_space_coeff(1.0, a, r, lambda).unwrap();
            let c2 = free_space_coeff(1.0, a, k * r, lambda).unwrap();
            prop_assert!(c2.amplitude < c1.amplitude);
            prop_assert!((c1.amplitude / c2.amplitude - k).abs() < 1e-9 * k);
        }
    }
}
