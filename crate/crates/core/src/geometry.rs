//! Air-gap geometry under static, dynamic and mixed eccentricity.
//!
//! The rotor centre is the vector sum of a static displacement (fixed in the
//! stator frame) and a dynamic displacement that turns with the rotor. The gap
//! permeance `P(φ) = P0 / (1 - δ cos(φ - α))` is carried as its first three
//! Fourier terms `P0 (A + B cos(φ-α) + C cos 2(φ-α))`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Vacuum permeability (H/m).
pub const MU0: f64 = 4.0e-7 * PI;

/// Below this composite eccentricity the gap is treated as exactly uniform.
pub const UNIFORM_GAP_THRESHOLD: f64 = 1e-12;

/// Static and dynamic eccentricity degrees (fractions of the uniform gap)
/// with their initial angles.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EccentricityConfig {
    #[serde(default)]
    pub delta_s: f64,
    #[serde(default)]
    pub delta_d: f64,
    #[serde(default)]
    pub alpha_s0: f64,
    #[serde(default)]
    pub alpha_d0: f64,
}

impl EccentricityConfig {
    pub fn healthy() -> Self {
        Self::default()
    }

    pub fn static_only(delta_s: f64) -> Self {
        Self {
            delta_s,
            ..Self::default()
        }
    }

    pub fn dynamic_only(delta_d: f64) -> Self {
        Self {
            delta_d,
            ..Self::default()
        }
    }

    pub fn mixed(delta_s: f64, delta_d: f64) -> Self {
        Self {
            delta_s,
            delta_d,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.delta_s, self.delta_d, self.alpha_s0, self.alpha_d0]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidEccentricity("non-finite value".into()));
        }
        if self.delta_s < 0.0 || self.delta_d < 0.0 {
            return Err(Error::InvalidEccentricity(format!(
                "degrees must be non-negative (delta_s = {}, delta_d = {})",
                self.delta_s, self.delta_d
            )));
        }
        if self.delta_s + self.delta_d >= 1.0 {
            return Err(Error::RotorContact(self.delta_s + self.delta_d));
        }
        Ok(())
    }

    pub fn is_healthy(&self) -> bool {
        self.delta_s == 0.0 && self.delta_d == 0.0
    }
}

/// Radial dimensions of the air gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapGeometry {
    /// Stator bore radius (m).
    pub stator_radius: f64,
    /// Rotor outer radius (m).
    pub rotor_radius: f64,
}

impl GapGeometry {
    pub fn from_rotor(rotor_radius: f64, g0: f64) -> Self {
        Self {
            stator_radius: rotor_radius + g0,
            rotor_radius,
        }
    }

    /// Uniform gap length `R_s - R_r`.
    pub fn g0(&self) -> f64 {
        self.stator_radius - self.rotor_radius
    }

    /// Mean gap radius.
    pub fn r0(&self) -> f64 {
        0.5 * (self.stator_radius + self.rotor_radius)
    }

    /// Uniform-gap permeance per unit length, `μ0 r0 / g0`.
    pub fn p0(&self) -> f64 {
        MU0 * self.r0() / self.g0()
    }
}

/// Polar form `(δ, α)` of the static vector `δs∠αs0` plus the dynamic vector
/// `δd∠(αd0 + θ)`.
pub fn composite_eccentricity(cfg: &EccentricityConfig, theta: f64) -> (f64, f64) {
    let ad = cfg.alpha_d0 + theta;
    let x = cfg.delta_s * cfg.alpha_s0.cos() + cfg.delta_d * ad.cos();
    let y = cfg.delta_s * cfg.alpha_s0.sin() + cfg.delta_d * ad.sin();
    (x.hypot(y), y.atan2(x))
}

/// Three-term permeance series coefficients, normalized by `P0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermeanceCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// `A = 1/√(1-δ²)`, `B = 2Aq`, `C = 2Aq²` with `q = (1-√(1-δ²))/δ`.
pub fn permeance_coefficients(delta: f64) -> Result<PermeanceCoefficients> {
    if !(delta < 1.0) {
        return Err(Error::RotorContact(delta));
    }
    if delta.abs() < UNIFORM_GAP_THRESHOLD {
        return Ok(PermeanceCoefficients {
            a: 1.0,
            b: 0.0,
            c: 0.0,
        });
    }
    let s = (1.0 - delta * delta).sqrt();
    let a = 1.0 / s;
    // Same as (1 - s)/δ without the cancellation near δ = 0.
    let q = delta / (1.0 + s);
    Ok(PermeanceCoefficients {
        a,
        b: 2.0 * a * q,
        c: 2.0 * a * q * q,
    })
}

/// Simplified gap length `g0 (1 - δ cos(φ - α))`.
pub fn gap_length(geom: &GapGeometry, delta: f64, alpha: f64, phi: f64) -> f64 {
    geom.g0() * (1.0 - delta * (phi - alpha).cos())
}

/// Gap length from the exact intersection of the two displaced circles.
/// Only used to check that the simplified form is adequate.
pub fn exact_gap_length(geom: &GapGeometry, delta: f64, alpha: f64, phi: f64) -> f64 {
    let e = delta * geom.g0();
    let x = phi - alpha;
    let sin = x.sin();
    geom.stator_radius - e * x.cos() - (geom.rotor_radius.powi(2) - e * e * sin * sin).sqrt()
}

/// Everything the inductance closed forms need about the gap at one rotor
/// angle, with exact θ-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapState {
    pub theta: f64,
    pub delta: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d_delta: f64,
    pub d_alpha: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub d_c: f64,
}

impl GapState {
    pub fn uniform(theta: f64) -> Self {
        Self {
            theta,
            delta: 0.0,
            alpha: 0.0,
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d_delta: 0.0,
            d_alpha: 0.0,
            d_a: 0.0,
            d_b: 0.0,
            d_c: 0.0,
        }
    }

    pub fn new(cfg: &EccentricityConfig, theta: f64) -> Result<Self> {
        cfg.validate()?;
        let (delta, alpha) = composite_eccentricity(cfg, theta);
        let coeffs = permeance_coefficients(delta)?;
        if delta < UNIFORM_GAP_THRESHOLD {
            return Ok(Self {
                alpha,
                ..Self::uniform(theta)
            });
        }

        let rel = theta + cfg.alpha_d0 - cfg.alpha_s0;
        let sd = cfg.delta_s * cfg.delta_d;
        let d_delta = -sd * rel.sin() / delta;
        let d_alpha = (cfg.delta_d * cfg.delta_d + sd * rel.cos()) / (delta * delta);

        let s = (1.0 - delta * delta).sqrt();
        let q = delta / (1.0 + s);
        let a = coeffs.a;
        let d_a = delta / (s * s * s) * d_delta;
        let d_q = d_delta / (s * (1.0 + s));
        let d_b = 2.0 * (d_a * q + a * d_q);
        let d_c = 2.0 * (d_a * q * q + 2.0 * a * q * d_q);

        Ok(Self {
            theta,
            delta,
            alpha,
            a,
            b: coeffs.b,
            c: coeffs.c,
            d_delta,
            d_alpha,
            d_a,
            d_b,
            d_c,
        })
    }

    /// Normalized three-term permeance `P(φ)/P0`.
    pub fn permeance(&self, phi: f64) -> f64 {
        let x = phi - self.alpha;
        self.a + self.b * x.cos() + self.c * (2.0 * x).cos()
    }

    /// Exact (untruncated) normalized permeance `1/(1 - δ cos(φ-α))`.
    pub fn exact_permeance(&self, phi: f64) -> f64 {
        1.0 / (1.0 - self.delta * (phi - self.alpha).cos())
    }
}

/// Convenience wrapper matching the operation name used across the crate.
pub fn gap_state(cfg: &EccentricityConfig, theta: f64) -> Result<GapState> {
    GapState::new(cfg, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn collinear_and_anticollinear() {
        let cfg = EccentricityConfig::mixed(0.3, 0.2);
        let (d, a) = composite_eccentricity(&cfg, 0.0);
        assert_relative_eq!(d, 0.5, epsilon = 1e-15);
        assert_eq!(a, 0.0);
        let (d, a) = composite_eccentricity(&cfg, PI);
        assert_relative_eq!(d, 0.1, epsilon = 1e-15);
        assert!(a.abs() < 1e-14);
    }

    #[test]
    fn quarter_turn_matches_planar_sum() {
        // Oracle: add the two vectors in Cartesian form by hand.
        let cfg = EccentricityConfig::mixed(0.2, 0.15);
        let (d, a) = composite_eccentricity(&cfg, PI / 2.0);
        let (x, y) = (0.2 + 0.15 * (PI / 2.0).cos(), 0.15 * (PI / 2.0).sin());
        assert_relative_eq!(d, (x * x + y * y).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(d, 0.25, epsilon = 1e-15);
        assert_relative_eq!(a, 0.643_501_108_793_284_4, epsilon = 1e-12);
    }

    #[test]
    fn alpha_uses_full_quadrant() {
        // δs + δd cos θ < 0: the composite vector points into the left half plane.
        let cfg = EccentricityConfig::mixed(0.1, 0.3);
        let (_, a) = composite_eccentricity(&cfg, 2.5);
        let x = 0.1 + 0.3 * 2.5f64.cos();
        assert!(x < 0.0);
        assert!(a > PI / 2.0);
    }

    #[test]
    fn permeance_coefficients_values() {
        let p = permeance_coefficients(0.0).unwrap();
        assert_eq!((p.a, p.b, p.c), (1.0, 0.0, 0.0));
        let p = permeance_coefficients(0.5).unwrap();
        assert_relative_eq!(p.a, 1.154_701, epsilon = 1e-6);
        assert_relative_eq!(p.b, 0.618_802, epsilon = 1e-6);
        assert_relative_eq!(p.c, 0.165_808, epsilon = 1e-6);
        let p = permeance_coefficients(0.9).unwrap();
        assert_relative_eq!(p.a, 2.294_157, epsilon = 1e-6);
    }

    #[test]
    fn permeance_b_c_match_numerical_fourier_coefficients() {
        // Fourier cosine coefficients of 1/(1 - δ cos x) by trapezoid rule
        // (spectrally accurate for smooth periodic integrands).
        for &delta in &[0.1, 0.5, 0.9] {
            let n = 4096;
            let (mut c0, mut c1, mut c2) = (0.0, 0.0, 0.0);
            for k in 0..n {
                let x = 2.0 * PI * k as f64 / n as f64;
                let f = 1.0 / (1.0 - delta * x.cos());
                c0 += f;
                c1 += f * x.cos();
                c2 += f * (2.0 * x).cos();
            }
            let p = permeance_coefficients(delta).unwrap();
            assert_relative_eq!(p.a, c0 / n as f64, max_relative = 1e-10);
            assert_relative_eq!(p.b, 2.0 * c1 / n as f64, max_relative = 1e-10);
            assert_relative_eq!(p.c, 2.0 * c2 / n as f64, max_relative = 1e-10);
        }
    }

    #[test]
    fn contact_is_an_error() {
        assert!(matches!(
            permeance_coefficients(1.0),
            Err(Error::RotorContact(_))
        ));
        assert!(EccentricityConfig::mixed(0.6, 0.4).validate().is_err());
        assert!(EccentricityConfig::mixed(-0.1, 0.0).validate().is_err());
    }

    #[test]
    fn gap_length_extremes() {
        let g = GapGeometry::from_rotor(0.082, 0.0008);
        assert_relative_eq!(gap_length(&g, 0.0, 0.3, 1.7), 0.0008, epsilon = 1e-15);
        assert_relative_eq!(gap_length(&g, 0.5, 0.3, 0.3), 0.0004, epsilon = 1e-15);
        assert_relative_eq!(gap_length(&g, 0.5, 0.3, 0.3 + PI), 0.0012, epsilon = 1e-15);
    }

    #[test]
    fn simplified_gap_is_close_to_exact() {
        let g = GapGeometry::from_rotor(0.082, 0.0008);
        for k in 0..360 {
            let phi = k as f64 * PI / 180.0;
            let simple = gap_length(&g, 0.5, 0.2, phi);
            let exact = exact_gap_length(&g, 0.5, 0.2, phi);
            // Second-order term e² sin²x / (2 R_r) is what the simple form drops.
            let bound = (0.5 * g.g0()).powi(2) / (2.0 * g.rotor_radius);
            assert!((simple - exact).abs() <= bound * 1.001, "{phi}: {simple} vs {exact}");
        }
    }

    #[test]
    fn pure_static_state_is_frozen() {
        let cfg = EccentricityConfig::static_only(0.5);
        for &th in &[0.0, 1.0, 4.0] {
            let s = GapState::new(&cfg, th).unwrap();
            assert_relative_eq!(s.delta, 0.5, epsilon = 1e-15);
            assert_eq!(s.alpha, 0.0);
            assert_eq!((s.d_delta, s.d_alpha, s.d_a, s.d_b, s.d_c), (0.0, 0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn pure_dynamic_state_corotates() {
        let cfg = EccentricityConfig {
            delta_d: 0.5,
            alpha_d0: 0.25,
            ..Default::default()
        };
        let s = GapState::new(&cfg, 1.0).unwrap();
        assert_relative_eq!(s.delta, 0.5, epsilon = 1e-15);
        assert_relative_eq!(s.alpha, 1.25, epsilon = 1e-15);
        assert_relative_eq!(s.d_alpha, 1.0, epsilon = 1e-15);
        assert_eq!((s.d_a, s.d_b, s.d_c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn mixed_d_delta_matches_finite_difference() {
        let cfg = EccentricityConfig::mixed(0.3, 0.2);
        let th = PI / 2.0;
        let h = 1e-6;
        let fd = (composite_eccentricity(&cfg, th + h).0 - composite_eccentricity(&cfg, th - h).0)
            / (2.0 * h);
        let s = GapState::new(&cfg, th).unwrap();
        assert!((s.d_delta - fd).abs() < 1e-6);
    }

    #[test]
    fn uniform_gap_threshold() {
        // δs = δd at θ = π cancels exactly.
        let cfg = EccentricityConfig::mixed(0.2, 0.2);
        let s = GapState::new(&cfg, PI).unwrap();
        assert!(s.delta < 1e-12);
        assert_eq!((s.a, s.b, s.c), (1.0, 0.0, 0.0));
        assert_eq!((s.d_a, s.d_b, s.d_c), (0.0, 0.0, 0.0));
    }
}
