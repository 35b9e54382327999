//! Wavelength-local two-path polarization state: projection probabilities,
//! the angle of maximum coincidence, visibility, and entanglement entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::path_amplitudes;

/// Tolerance on the normalization a^2 + b^2 = 1.
const NORM_TOL: f64 = 1e-9;

/// A pure superposition of the two decay paths with real amplitudes `a`
/// (H1V2 path) and `b` (V1H2 path) and relative phase `phase_rad` between
/// them. Always normalized to within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPathState {
    a: f64,
    b: f64,
    phase_rad: f64,
}

impl TwoPathState {
    pub fn new(a: f64, b: f64, phase_rad: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || !phase_rad.is_finite() {
            return Err(Error::InvalidState(format!(
                "amplitudes must lie in [0, 1] and the phase must be finite, got ({a}, {b}, {phase_rad})"
            )));
        }
        if (a * a + b * b - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "a^2 + b^2 = {} is not 1 within {NORM_TOL}",
                a * a + b * b
            )));
        }
        Ok(TwoPathState { a, b, phase_rad })
    }

    /// State built from the local joint spectral rates of the two paths.
    pub fn from_path_rates(g_hv: f64, g_vh: f64, phase_rad: f64) -> Result<Self> {
        let (a, b) = path_amplitudes(g_hv, g_vh)?;
        TwoPathState::new(a, b, phase_rad)
    }

    /// Maximally entangled state with the given relative phase.
    pub fn balanced(phase_rad: f64) -> Self {
        TwoPathState {
            a: std::f64::consts::FRAC_1_SQRT_2,
            b: std::f64::consts::FRAC_1_SQRT_2,
            phase_rad,
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn phase_rad(&self) -> f64 {
        self.phase_rad
    }

    /// Probability of a joint transmission through both linear analyzers:
    ///
    /// |a cos(a1) cos(a2) + b e^{i phase} sin(a1) sin(a2)|^2
    ///
    /// The setting (0, 0) selects the H1V2 path and returns a^2; (90, 90)
    /// selects V1H2 and returns b^2.
    pub fn coincidence_prob(&self, setting: &AnalyzerSetting) -> f64 {
        let a1 = setting.alpha1_deg.to_radians();
        let a2 = setting.alpha2_deg.to_radians();
        let (c1, s1) = (a1.cos(), a1.sin());
        let (c2, s2) = (a2.cos(), a2.sin());
        let p = self.a * self.a * c1 * c1 * c2 * c2
            + self.b * self.b * s1 * s1 * s2 * s2
            + 2.0 * self.a * self.b * self.phase_rad.cos() * c1 * s1 * c2 * s2;
        p.clamp(0.0, 1.0)
    }

    /// Analyzer-2 angle maximizing the coincidence rate at analyzer 1 fixed to
    /// +45 degrees, in the principal range (-90, 90].
    ///
    /// The scan C(alpha2) is a pure second-harmonic sinusoid, so the argmax is
    /// atan2 of its two Fourier coefficients. For a real relative phase this
    /// reduces to -atan(b/a) when cos(phase) < 0 and +atan(b/a) when
    /// cos(phase) > 0. Errors when the scan is constant and no maximum exists.
    pub fn max_coincidence_angle_deg(&self) -> Result<f64> {
        let cos_d = self.phase_rad.cos();
        let p1 = (self.a * self.a - self.b * self.b) / 4.0;
        let p2 = self.a * self.b * cos_d / 2.0;
        let amplitude = p1.hypot(p2);
        let offset = (self.a * self.a + self.b * self.b) / 4.0;
        if amplitude <= 1e-12 * offset {
            return Err(Error::UndefinedMaxAngle);
        }
        // atan2(-0.0, x < 0) would land on -180 instead of +180; keep the
        // principal range's closed end at +90.
        let p2 = if p2 == 0.0 { 0.0 } else { p2 };
        Ok((0.5 * p2.atan2(p1)).to_degrees())
    }

    /// Von Neumann entanglement entropy of either photon's reduced state, in
    /// bits: -a^2 log2(a^2) - b^2 log2(b^2) with 0 log 0 = 0.
    pub fn entropy_bits(&self) -> f64 {
        let s = xlog2x(self.a * self.a) + xlog2x(self.b * self.b);
        (-s).clamp(0.0, 1.0)
    }

    /// Visibility of the coincidence scan over analyzer 2 with analyzer 1
    /// fixed to +45 degrees:
    ///
    /// V = sqrt((a^2 - b^2)^2 + 4 a^2 b^2 cos^2(phase)) / (a^2 + b^2)
    ///
    /// Equal to 1 whenever the relative phase is real (cos^2 = 1) or one path
    /// is absent.
    pub fn visibility_45(&self) -> f64 {
        let a2 = self.a * self.a;
        let b2 = self.b * self.b;
        let cos_d = self.phase_rad.cos();
        let num = ((a2 - b2) * (a2 - b2) + 4.0 * a2 * b2 * cos_d * cos_d).sqrt();
        (num / (a2 + b2)).clamp(0.0, 1.0)
    }
}

fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// Linear analyzer orientations for the two arms.
///
/// Convention: the arm-1 angle is measured from the H axis, the arm-2 angle
/// from the V axis, both interpreted modulo 180 degrees. Under this
/// bookkeeping (0, 0) transmits the H1V2 decay path, (90, 90) its mirror, and
/// a balanced state with phase pi peaks at (45, -45).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerSetting {
    pub alpha1_deg: f64,
    pub alpha2_deg: f64,
}

impl AnalyzerSetting {
    pub fn new(alpha1_deg: f64, alpha2_deg: f64) -> Self {
        AnalyzerSetting {
            alpha1_deg,
            alpha2_deg,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn state(a2: f64, phase: f64) -> TwoPathState {
        TwoPathState::new(a2.sqrt(), (1.0 - a2).sqrt(), phase).unwrap()
    }

    #[test]
    fn singlet_peaks_at_minus_45() {
        let s = TwoPathState::balanced(PI);
        let p = s.coincidence_prob(&AnalyzerSetting::new(45.0, -45.0));
        assert!((p - 0.5).abs() < 1e-12, "got {p}");
    }

    #[test]
    fn singlet_vanishes_at_plus_45() {
        let s = TwoPathState::balanced(PI);
        let p = s.coincidence_prob(&AnalyzerSetting::new(45.0, 45.0));
        assert!(p < 1e-12, "got {p}");
    }

    #[test]
    fn single_path_transmits_fully_in_natural_basis() {
        let s = TwoPathState::new(1.0, 0.0, 0.7).unwrap();
        assert_eq!(s.coincidence_prob(&AnalyzerSetting::new(0.0, 0.0)), 1.0);
    }

    #[test]
    fn natural_basis_selects_path_probabilities() {
        let s = state(0.8, PI);
        let p00 = s.coincidence_prob(&AnalyzerSetting::new(0.0, 0.0));
        let p99 = s.coincidence_prob(&AnalyzerSetting::new(90.0, 90.0));
        assert!((p00 - 0.8).abs() < 1e-12);
        assert!((p99 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn max_angle_balanced_is_minus_45() {
        let s = TwoPathState::balanced(PI);
        assert_eq!(s.max_coincidence_angle_deg().unwrap(), -45.0);
    }

    #[test]
    fn max_angle_pure_hv_is_zero() {
        let s = TwoPathState::new(1.0, 0.0, PI).unwrap();
        assert_eq!(s.max_coincidence_angle_deg().unwrap(), 0.0);
    }

    #[test]
    fn max_angle_pure_vh_is_plus_90() {
        let s = TwoPathState::new(0.0, 1.0, PI).unwrap();
        assert_eq!(s.max_coincidence_angle_deg().unwrap(), 90.0);
    }

    #[test]
    fn max_angle_matches_arctan_ratio_for_phase_pi() {
        for a2 in [0.1, 0.3, 0.5, 0.7, 0.95] {
            let s = state(a2, PI);
            let expected = -(s.b() / s.a()).atan().to_degrees();
            let got = s.max_coincidence_angle_deg().unwrap();
            assert!((got - expected).abs() < 1e-12, "a2={a2}: {got} vs {expected}");
        }
    }

    #[test]
    fn max_angle_undefined_for_balanced_quarter_phase() {
        let s = TwoPathState::balanced(PI / 2.0);
        assert!(matches!(
            s.max_coincidence_angle_deg(),
            Err(Error::UndefinedMaxAngle)
        ));
    }

    #[test]
    fn max_angle_agrees_with_scan_argmax() {
        // Numerical argmax over the analyzer-2 scan at 0.01 degree resolution.
        let s = state(0.73, PI);
        let mut best = (f64::MIN, 0.0);
        let mut alpha = -90.0;
        while alpha < 90.0 {
            let p = s.coincidence_prob(&AnalyzerSetting::new(45.0, alpha));
            if p > best.0 {
                best = (p, alpha);
            }
            alpha += 0.01;
        }
        let formula = s.max_coincidence_angle_deg().unwrap();
        assert!((best.1 - formula).abs() <= 0.01, "{} vs {formula}", best.1);
    }

    #[test]
    fn entropy_extremes() {
        assert!((TwoPathState::balanced(PI).entropy_bits() - 1.0).abs() < 1e-15);
        assert_eq!(TwoPathState::new(1.0, 0.0, 0.0).unwrap().entropy_bits(), 0.0);
    }

    #[test]
    fn entropy_of_four_to_one_split() {
        // Binary entropy oracle at a^2 = 0.8.
        let oracle = -(0.8f64 * 0.8f64.log2() + 0.2 * 0.2f64.log2());
        let s = state(0.8, 0.0);
        assert!((s.entropy_bits() - oracle).abs() < 1e-12);
        assert!((oracle - 0.7219).abs() < 1e-4);
    }

    #[test]
    fn visibility_is_unity_for_real_phase() {
        assert!((TwoPathState::balanced(PI).visibility_45() - 1.0).abs() < 1e-12);
        assert!((state(0.9, 0.0).visibility_45() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn visibility_vanishes_for_balanced_quarter_phase() {
        let s = TwoPathState::balanced(PI / 2.0);
        assert!(s.visibility_45() < 1e-15);
        // Oracle: the scan itself is constant.
        let probs: Vec<f64> = (0..36)
            .map(|k| s.coincidence_prob(&AnalyzerSetting::new(45.0, -90.0 + 5.0 * k as f64)))
            .collect();
        let spread = probs.iter().cloned().fold(f64::MIN, f64::max)
            - probs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-15, "scan should be flat, spread {spread}");
    }

    #[test]
    fn visibility_of_imbalanced_quarter_phase() {
        // sqrt((0.9 - 0.1)^2) = 0.8; numeric oracle from the scan extrema.
        let s = state(0.9, PI / 2.0);
        assert!((s.visibility_45() - 0.8).abs() < 1e-12);
        let probs: Vec<f64> = (0..3600)
            .map(|k| s.coincidence_prob(&AnalyzerSetting::new(45.0, -90.0 + 0.05 * k as f64)))
            .collect();
        let max = probs.iter().cloned().fold(f64::MIN, f64::max);
        let min = probs.iter().cloned().fold(f64::MAX, f64::min);
        assert!(((max - min) / (max + min) - 0.8).abs() < 1e-6);
    }

    #[test]
    fn scan_is_a_three_coefficient_sinusoid() {
        // Fit p0 + p1 cos 2a + p2 sin 2a at three angles, predict a fourth.
        let s = state(0.62, 1.3);
        let angles = [-60.0f64, 10.0, 55.0];
        let mut m = [[0.0f64; 3]; 3];
        let mut rhs = [0.0f64; 3];
        for (r, &ang) in angles.iter().enumerate() {
            let t = 2.0 * ang.to_radians();
            m[r] = [1.0, t.cos(), t.sin()];
            rhs[r] = s.coincidence_prob(&AnalyzerSetting::new(45.0, ang));
        }
        // Direct 3x3 solve by elimination.
        let det = |m: &[[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(&m);
        let mut p = [0.0f64; 3];
        for c in 0..3 {
            let mut mc = m;
            for r in 0..3 {
                mc[r][c] = rhs[r];
            }
            p[c] = det(&mc) / d;
        }
        let probe = 27.0f64;
        let t = 2.0 * probe.to_radians();
        let predicted = p[0] + p[1] * t.cos() + p[2] * t.sin();
        let actual = s.coincidence_prob(&AnalyzerSetting::new(45.0, probe));
        assert!((predicted - actual).abs() < 1e-12);
    }

    #[test]
    fn state_rejects_unnormalized_amplitudes() {
        assert!(TwoPathState::new(0.9, 0.9, 0.0).is_err());
        assert!(TwoPathState::new(-0.1, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn natural_basis_probabilities_sum_to_one(a2 in 0.0..1.0f64, phase in -7.0..7.0f64) {
            let s = state(a2, phase);
            let sum = s.coincidence_prob(&AnalyzerSetting::new(0.0, 0.0))
                + s.coincidence_prob(&AnalyzerSetting::new(90.0, 90.0));
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }

        #[test]
        fn entropy_is_symmetric_and_maximal_only_when_balanced(a2 in 0.0..=1.0f64) {
            let s = state(a2, 0.0);
            let swapped = state(1.0 - a2, 0.0);
            prop_assert!((s.entropy_bits() - swapped.entropy_bits()).abs() < 1e-12);
            if (a2 - 0.5).abs() > 1e-3 {
                prop_assert!(s.entropy_bits() < 1.0 - 1e-7);
            }
        }

        #[test]
        fn real_phase_states_have_unit_visibility(a2 in 0.0..=1.0f64, flip in proptest::bool::ANY) {
            let phase = if flip { PI } else { 0.0 };
            prop_assert!((state(a2, phase).visibility_45() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn probabilities_stay_in_range(
            a2 in 0.0..=1.0f64,
            phase in -7.0..7.0f64,
            alpha1 in -180.0..180.0f64,
            alpha2 in -180.0..180.0f64,
        ) {
            let p = state(a2, phase).coincidence_prob(&AnalyzerSetting::new(alpha1, alpha2));
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
