//! Turn functions of the stator phases and rotor loops.
//!
//! The stator is a 3-phase, 4-pole winding whose basic turn function `AS`
//! rises linearly over each slot group to a plateau of `2N`. A rotor loop is a
//! trapezoid of unit height spanning one bar pitch, with linear rises of width
//! `γ` where it crosses a bar. `BS`, `CS`, `BR` and `CR` are the square and
//! adjacent-product functions that appear in the inductance integrals.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::GapState;
use crate::quadrature::QuadratureGrid;

/// Stator and rotor winding dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindingLayout {
    /// Turns such that the stator turn function peaks at `2N`.
    pub turns: f64,
    pub pole_pairs: u32,
    pub bars: usize,
    /// Angle over which a rotor loop turn function rises across a bar (rad).
    pub gamma_bar: f64,
    /// Rotor skew angle (rad); 0 disables skew.
    pub gamma_skew: f64,
}

impl WindingLayout {
    pub fn validate(&self) -> Result<()> {
        if self.pole_pairs != 2 {
            return Err(Error::Unsupported(format!(
                "only 4-pole (pole_pairs = 2) stator layouts are modeled, got {}",
                self.pole_pairs
            )));
        }
        if self.bars < 3 {
            return Err(Error::InvalidParameter {
                field: "n".into(),
                reason: format!("at least 3 rotor bars required, got {}", self.bars),
            });
        }
        if !(self.turns >= 1.0) {
            return Err(Error::InvalidParameter {
                field: "ns".into(),
                reason: "turn count must be >= 1".into(),
            });
        }
        if !(self.gamma_bar > 0.0 && self.gamma_bar < self.bar_pitch()) {
            return Err(Error::InvalidParameter {
                field: "gama".into(),
                reason: format!(
                    "bar view angle must lie in (0, 2π/n) = (0, {:.6}), got {}",
                    self.bar_pitch(),
                    self.gamma_bar
                ),
            });
        }
        if !(self.gamma_skew >= 0.0) {
            return Err(Error::InvalidParameter {
                field: "gamma_skew".into(),
                reason: "skew angle must be >= 0".into(),
            });
        }
        Ok(())
    }

    /// Angular pitch of the rotor bars, `2π/n`.
    pub fn bar_pitch(&self) -> f64 {
        TAU / self.bars as f64
    }
}

/// The six basic functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasicFunction {
    As,
    Bs,
    Cs,
    Ar,
    Br,
    Cr,
}

impl BasicFunction {
    pub const ALL: [BasicFunction; 6] = [Self::As, Self::Bs, Self::Cs, Self::Ar, Self::Br, Self::Cr];

    pub fn is_stator(self) -> bool {
        matches!(self, Self::As | Self::Bs | Self::Cs)
    }

    /// Angular multiplier of the Fourier series: stator functions have period π.
    pub fn angular_multiplier(self) -> u32 {
        if self.is_stator() {
            2
        } else {
            1
        }
    }

    /// Period of the function in φ.
    pub fn period(self) -> f64 {
        if self.is_stator() {
            PI
        } else {
            TAU
        }
    }
}

fn reduce(phi: f64, period: f64) -> f64 {
    let r = phi.rem_euclid(period);
    // rem_euclid can round up to exactly `period`.
    if r >= period {
        0.0
    } else {
        r
    }
}

fn stator_turn(n: f64, x: f64) -> f64 {
    if x < PI / 6.0 {
        12.0 * n / PI * x
    } else if x < PI / 2.0 {
        2.0 * n
    } else if x < 2.0 * PI / 3.0 {
        8.0 * n - 12.0 * n / PI * x
    } else {
        0.0
    }
}

fn rotor_turn(pitch: f64, gamma: f64, x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else if x < gamma {
        x / gamma
    } else if x < pitch {
        1.0
    } else if x < pitch + gamma {
        1.0 - (x - pitch) / gamma
    } else {
        0.0
    }
}

/// Exact piecewise value of a basic function.
pub fn basic_function_value(kind: BasicFunction, layout: &WindingLayout, phi: f64) -> f64 {
    let n = layout.turns;
    let g = layout.gamma_bar;
    let pitch = layout.bar_pitch();
    let x = reduce(phi, kind.period());
    match kind {
        BasicFunction::As => stator_turn(n, x),
        BasicFunction::Bs => stator_turn(n, x).powi(2),
        BasicFunction::Cs => {
            if x < PI / 6.0 {
                24.0 * n * n / PI * x
            } else if x < PI / 3.0 {
                8.0 * n * n - 24.0 * n * n / PI * x
            } else {
                0.0
            }
        }
        BasicFunction::Ar => rotor_turn(pitch, g, x),
        BasicFunction::Br => rotor_turn(pitch, g, x).powi(2),
        BasicFunction::Cr => {
            if x < g {
                x / g - x * x / (g * g)
            } else {
                0.0
            }
        }
    }
}

/// Truncated Fourier series `a0 + Σ a_k cos(mkφ) + b_k sin(mkφ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeriesSet {
    pub kind: BasicFunction,
    pub a0: f64,
    /// `(k, a_k, b_k)` for k = 1..=K_max.
    pub harmonics: Vec<(u32, f64, f64)>,
    pub angular_multiplier: u32,
}

impl FourierSeriesSet {
    pub fn evaluate(&self, phi: f64) -> f64 {
        let m = self.angular_multiplier as f64;
        self.a0
            + self
                .harmonics
                .iter()
                .map(|&(k, a, b)| {
                    let arg = m * k as f64 * phi;
                    a * arg.cos() + b * arg.sin()
                })
                .sum::<f64>()
    }

    pub fn coefficient(&self, k: u32) -> Option<(f64, f64)> {
        self.harmonics
            .iter()
            .find(|h| h.0 == k)
            .map(|&(_, a, b)| (a, b))
    }
}

/// Closed-form Fourier coefficients of a basic function.
pub fn fourier_set(kind: BasicFunction, layout: &WindingLayout, k_max: u32) -> FourierSeriesSet {
    let n = layout.turns;
    let n2 = n * n;
    let g = layout.gamma_bar;
    let nb = layout.bars as f64;
    let a0 = match kind {
        BasicFunction::As => n,
        BasicFunction::Bs => 16.0 / 9.0 * n2,
        BasicFunction::Cs => 2.0 / 3.0 * n2,
        BasicFunction::Ar => 1.0 / nb,
        BasicFunction::Br => 1.0 / nb - g / (6.0 * PI),
        BasicFunction::Cr => g / (12.0 * PI),
    };
    let harmonics = (1..=k_max.max(2))
        .map(|k| {
            let kf = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let (c3, s3) = ((kf * PI / 3.0).cos(), (kf * PI / 3.0).sin());
            let (a, b) = match kind {
                BasicFunction::As => {
                    let f = -6.0 * n / (PI * kf).powi(2) * (1.0 - sign);
                    (f * (1.0 - c3), -f * s3)
                }
                BasicFunction::Bs => {
                    let f2 = 24.0 * n2 / (PI * kf).powi(2);
                    let f3 = 72.0 * n2 / (PI * kf).powi(3) * (1.0 + sign);
                    (f2 * (c3 + sign) - f3 * s3, f2 * s3 - f3 * (1.0 - c3))
                }
                BasicFunction::Cs => {
                    let f = -12.0 * n2 / (PI * kf).powi(2);
                    let (c23, s23) = ((2.0 * kf * PI / 3.0).cos(), (2.0 * kf * PI / 3.0).sin());
                    (f * (1.0 - 2.0 * c3 + c23), f * (-2.0 * s3 + s23))
                }
                BasicFunction::Ar => {
                    let f = 4.0 / (PI * kf * kf * g) * (kf * g / 2.0).sin() * (kf * PI / nb).sin();
                    let c = kf * PI / nb + kf * g / 2.0;
                    (f * c.cos(), f * c.sin())
                }
                BasicFunction::Br => {
                    let f = 4.0 / (PI * kf * kf * g)
                        * ((kf * PI / nb - kf * g / 2.0).cos()
                            - 2.0 / (kf * g) * (kf * PI / nb).cos() * (kf * g / 2.0).sin());
                    let c = kf * PI / nb + kf * g / 2.0;
                    (f * c.cos(), f * c.sin())
                }
                BasicFunction::Cr => {
                    let h = kf * g / 2.0;
                    let f = 2.0 / (PI * g * kf * kf) * (2.0 / (kf * g) * h.sin() - h.cos());
                    (f * h.cos(), f * h.sin())
                }
            };
            (k, a, b)
        })
        .collect();
    FourierSeriesSet {
        kind,
        a0,
        harmonics,
        angular_multiplier: kind.angular_multiplier(),
    }
}

/// Argument shift of the indexed phase (`i`), phase pair (`i`, `j`) or loop
/// (`i`) version of a basic function.
pub fn shift_angle(kind: BasicFunction, i: usize, j: Option<usize>, layout: &WindingLayout) -> Result<f64> {
    let check = |what: &'static str, idx: usize, max: usize| {
        if idx == 0 || idx > max {
            Err(Error::IndexOutOfRange { what, index: idx, max })
        } else {
            Ok(())
        }
    };
    match kind {
        BasicFunction::As | BasicFunction::Bs => {
            check("phase", i, 3)?;
            Ok(TAU * (i - 1) as f64 / 3.0)
        }
        BasicFunction::Cs => {
            check("phase", i, 3)?;
            let j = j.ok_or_else(|| Error::Unsupported("CS needs a second phase index".into()))?;
            check("phase", j, 3)?;
            if i == j {
                return Err(Error::Unsupported("CS needs two distinct phases".into()));
            }
            Ok((i + j) as f64 * PI / 3.0 - PI)
        }
        BasicFunction::Ar | BasicFunction::Br | BasicFunction::Cr => {
            check("loop", i, layout.bars)?;
            Ok(layout.bar_pitch() * (i - 1) as f64)
        }
    }
}

/// Indexed phase/loop function evaluated by argument shift.
pub fn shifted(
    kind: BasicFunction,
    i: usize,
    j: Option<usize>,
    layout: &WindingLayout,
    phi: f64,
) -> Result<f64> {
    let shift = shift_angle(kind, i, j, layout)?;
    Ok(basic_function_value(kind, layout, phi - shift))
}

/// Rotor loop turn function with its first and second running integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnIntegrals {
    pub n: f64,
    pub k: f64,
    pub m: f64,
}

/// `n_r`, `k_r = ∫n_r` and `m_r = ∫k_r` of the first rotor loop, taken as 0
/// for φ ≤ 0 and continued with constant `k_r = 2π/n` past the loop.
pub fn rotor_turn_integrals(layout: &WindingLayout, phi: f64) -> TurnIntegrals {
    let g = layout.gamma_bar;
    let a = layout.bar_pitch();
    if phi <= 0.0 {
        return TurnIntegrals { n: 0.0, k: 0.0, m: 0.0 };
    }
    if phi <= g {
        return TurnIntegrals {
            n: phi / g,
            k: phi * phi / (2.0 * g),
            m: phi.powi(3) / (6.0 * g),
        };
    }
    let m_g = g * g / 6.0;
    if phi <= a {
        let u = phi - g;
        return TurnIntegrals {
            n: 1.0,
            k: 0.5 * g + u,
            m: m_g + 0.5 * g * u + 0.5 * u * u,
        };
    }
    let m_a = m_g + 0.5 * g * (a - g) + 0.5 * (a - g).powi(2);
    let k_a = a - 0.5 * g;
    if phi <= a + g {
        let u = phi - a;
        return TurnIntegrals {
            n: 1.0 - u / g,
            k: k_a + u - u * u / (2.0 * g),
            m: m_a + k_a * u + 0.5 * u * u - u.powi(3) / (6.0 * g),
        };
    }
    let m_end = m_a + k_a * g + 0.5 * g * g - g * g / 6.0;
    TurnIntegrals {
        n: 0.0,
        k: a,
        m: m_end + a * (phi - a - g),
    }
}

/// How a rotor loop turn function crosses a bar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rise {
    #[default]
    Linear,
    /// Ideal step at the bar centre; kept for comparison with older models.
    Step,
}

/// A winding described by its turn function in the stator frame.
pub trait TurnFunction {
    fn value(&self, phi: f64) -> f64;
    /// Angles in [0, 2π) where the function has a kink or jump.
    fn breakpoints(&self) -> Vec<f64>;
}

/// Stator phase `i` (1-based).
#[derive(Debug, Clone, Copy)]
pub struct StatorPhase {
    pub layout: WindingLayout,
    pub index: usize,
}

impl TurnFunction for StatorPhase {
    fn value(&self, phi: f64) -> f64 {
        let shift = TAU * (self.index - 1) as f64 / 3.0;
        basic_function_value(BasicFunction::As, &self.layout, phi - shift)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let shift = TAU * (self.index - 1) as f64 / 3.0;
        [0.0, PI / 6.0, PI / 2.0, 2.0 * PI / 3.0]
            .iter()
            .flat_map(|b| [b + shift, b + shift + PI])
            .map(|b| b.rem_euclid(TAU))
            .collect()
    }
}

/// Rotor loop `index` (1-based) at rotor angle `theta`.
#[derive(Debug, Clone, Copy)]
pub struct RotorLoop {
    pub layout: WindingLayout,
    pub index: usize,
    pub theta: f64,
    pub rise: Rise,
}

impl RotorLoop {
    pub fn new(layout: WindingLayout, index: usize, theta: f64) -> Self {
        Self {
            layout,
            index,
            theta,
            rise: Rise::Linear,
        }
    }

    fn origin(&self) -> f64 {
        self.layout.bar_pitch() * (self.index - 1) as f64 + self.theta
    }
}

impl TurnFunction for RotorLoop {
    fn value(&self, phi: f64) -> f64 {
        let x = (phi - self.origin()).rem_euclid(TAU);
        match self.rise {
            Rise::Linear => basic_function_value(BasicFunction::Ar, &self.layout, x),
            Rise::Step => {
                let h = 0.5 * self.layout.gamma_bar;
                if x >= h && x < self.layout.bar_pitch() + h {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let g = self.layout.gamma_bar;
        let a = self.layout.bar_pitch();
        let pts: Vec<f64> = match self.rise {
            Rise::Linear => vec![0.0, g, a, a + g],
            Rise::Step => vec![0.5 * g, a + 0.5 * g],
        };
        pts.into_iter().map(|p| (p + self.origin()).rem_euclid(TAU)).collect()
    }
}

/// Sum of several turn functions, e.g. adjacent loops merged around broken bars.
pub struct SumOf<T: TurnFunction>(pub Vec<T>);

impl<T: TurnFunction> TurnFunction for SumOf<T> {
    fn value(&self, phi: f64) -> f64 {
        self.0.iter().map(|t| t.value(phi)).sum()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.0.iter().flat_map(|t| t.breakpoints()).collect()
    }
}

impl<T: TurnFunction + ?Sized> TurnFunction for &T {
    fn value(&self, phi: f64) -> f64 {
        (**self).value(phi)
    }

    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
}

/// Quadrature grid over one revolution with panel edges at the kinks of the
/// given turn functions.
pub fn grid_for(turns: &[&dyn TurnFunction], min_panels: usize) -> QuadratureGrid {
    let bps: Vec<f64> = turns.iter().flat_map(|t| t.breakpoints()).collect();
    QuadratureGrid::with_breakpoints(0.0, TAU, &bps, min_panels, 4)
}

/// `⟨P·n⟩ / ⟨P⟩`, the permeance-weighted mean of a turn function.
pub fn weighted_mean(turn: &dyn TurnFunction, gap: &GapState, grid: &QuadratureGrid) -> f64 {
    let pn = grid.integrate(|phi| gap.permeance(phi) * turn.value(phi));
    pn / (TAU * gap.a)
}

/// Generalized winding function `n(φ) - ⟨P·n⟩/⟨P⟩`. With a uniform gap this
/// is the classical `n(φ) - ⟨n⟩`.
pub fn generalized_winding_function(turn: &dyn TurnFunction, gap: &GapState, phi: f64) -> f64 {
    let grid = grid_for(&[turn], 4096);
    turn.value(phi) - weighted_mean(turn, gap, &grid)
}

/// Winding function that ignores the gap shape (plain mean removal). Wrong
/// under eccentricity; kept to demonstrate the resulting asymmetry.
pub fn uniform_winding_function(turn: &dyn TurnFunction, phi: f64) -> f64 {
    let grid = grid_for(&[turn], 4096);
    turn.value(phi) - grid.integrate(|x| turn.value(x)) / TAU
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EccentricityConfig;
    use approx::assert_relative_eq;

    pub(crate) fn layout() -> WindingLayout {
        WindingLayout {
            turns: 56.0,
            pole_pairs: 2,
            bars: 40,
            gamma_bar: PI / 86.0,
            gamma_skew: 0.0,
        }
    }

    #[test]
    fn point_values() {
        let l = layout();
        assert_eq!(basic_function_value(BasicFunction::As, &l, PI / 3.0), 112.0);
        assert_eq!(basic_function_value(BasicFunction::Bs, &l, PI / 3.0), 4.0 * 56.0 * 56.0);
        let g = l.gamma_bar;
        assert_relative_eq!(basic_function_value(BasicFunction::Ar, &l, g / 2.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(basic_function_value(BasicFunction::Cr, &l, g / 2.0), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn a0_values() {
        let l = layout();
        assert_eq!(fourier_set(BasicFunction::As, &l, 5).a0, 56.0);
        assert_relative_eq!(fourier_set(BasicFunction::Br, &l, 5).a0, 0.023_062_0, epsilon = 1e-7);
        assert_relative_eq!(fourier_set(BasicFunction::Cr, &l, 5).a0, 9.6899e-4, epsilon = 1e-8);
    }

    #[test]
    fn a0_matches_numerical_mean() {
        let l = layout();
        for kind in BasicFunction::ALL {
            let period = kind.period();
            let bps: Vec<f64> = if kind.is_stator() {
                vec![PI / 6.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0]
            } else {
                vec![l.gamma_bar, l.bar_pitch(), l.bar_pitch() + l.gamma_bar]
            };
            let grid = QuadratureGrid::with_breakpoints(0.0, period, &bps, 64, 6);
            let mean = grid.integrate(|x| basic_function_value(kind, &l, x)) / period;
            let set = fourier_set(kind, &l, 2);
            assert_relative_eq!(set.a0, mean, max_relative = 1e-12);
        }
    }

    #[test]
    fn coefficients_match_numerical_projection() {
        let l = layout();
        for kind in BasicFunction::ALL {
            let period = kind.period();
            let m = kind.angular_multiplier() as f64;
            let bps: Vec<f64> = if kind.is_stator() {
                vec![PI / 6.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0]
            } else {
                vec![l.gamma_bar, l.bar_pitch(), l.bar_pitch() + l.gamma_bar]
            };
            let grid = QuadratureGrid::with_breakpoints(0.0, period, &bps, 256, 8);
            let set = fourier_set(kind, &l, 12);
            let scale = set.harmonics.iter().map(|h| h.1.hypot(h.2)).fold(0.0, f64::max);
            for &(k, a, b) in &set.harmonics {
                let w = m * k as f64;
                let an = 2.0 / period * grid.integrate(|x| basic_function_value(kind, &l, x) * (w * x).cos());
                let bn = 2.0 / period * grid.integrate(|x| basic_function_value(kind, &l, x) * (w * x).sin());
                assert!((a - an).abs() < 1e-9 * scale, "{kind:?} a_{k}: {a} vs {an}");
                assert!((b - bn).abs() < 1e-9 * scale, "{kind:?} b_{k}: {b} vs {bn}");
            }
        }
    }

    fn reconstruction_error(kind: BasicFunction, k_max: u32) -> f64 {
        let l = layout();
        let set = fourier_set(kind, &l, k_max);
        let period = kind.period();
        let pts = 20_000;
        let (mut err, mut norm) = (0.0, 0.0);
        for k in 0..pts {
            let x = period * (k as f64 + 0.5) / pts as f64;
            let f = basic_function_value(kind, &l, x);
            err += (set.evaluate(x) - f).powi(2);
            norm += f * f;
        }
        (err / norm).sqrt()
    }

    #[test]
    fn reconstruction_error_at_300_harmonics() {
        use BasicFunction::*;
        for kind in [As, Bs, Cs, Ar] {
            let e = reconstruction_error(kind, 300);
            assert!(e < 0.01, "{kind:?}: {e}");
        }
        // The narrow bar ramps need more harmonics than that.
        let br = reconstruction_error(Br, 300);
        let cr = reconstruction_error(Cr, 300);
        assert!(br > 0.01 && br < 0.02, "{br}");
        assert!(cr > 0.05 && cr < 0.1, "{cr}");
        for kind in [Br, Cr] {
            let e = reconstruction_error(kind, 3000);
            assert!(e < 0.01, "{kind:?}: {e}");
        }
    }

    #[test]
    fn partition_of_unity_and_squares() {
        let l = layout();
        for k in 0..10_000 {
            let phi = TAU * k as f64 / 10_000.0;
            let sum: f64 = (1..=l.bars)
                .map(|i| shifted(BasicFunction::Ar, i, None, &l, phi).unwrap())
                .sum();
            assert!((sum - 1.0).abs() < 1e-12, "phi = {phi}: {sum}");
            let a = basic_function_value(BasicFunction::As, &l, phi);
            assert_relative_eq!(basic_function_value(BasicFunction::Bs, &l, phi), a * a, max_relative = 1e-14);
            let r = basic_function_value(BasicFunction::Ar, &l, phi);
            assert_relative_eq!(basic_function_value(BasicFunction::Br, &l, phi), r * r, max_relative = 1e-14);
            // CR is the product of loop 1 and its left neighbour.
            let left = basic_function_value(BasicFunction::Ar, &l, phi + l.bar_pitch());
            assert_relative_eq!(basic_function_value(BasicFunction::Cr, &l, phi), r * left, epsilon = 1e-14);
            if phi > l.gamma_bar {
                assert_eq!(basic_function_value(BasicFunction::Cr, &l, phi), 0.0);
            }
            // Loops two apart never overlap.
            let two = basic_function_value(BasicFunction::Ar, &l, phi + 2.0 * l.bar_pitch());
            assert_eq!(r * two, 0.0);
        }
    }

    #[test]
    fn stator_series_has_only_odd_terms() {
        let set = fourier_set(BasicFunction::As, &layout(), 30);
        for &(k, a, b) in &set.harmonics {
            if k % 2 == 0 {
                assert!(a.abs() < 1e-12 && b.abs() < 1e-12, "k = {k}: {a} {b}");
            } else {
                assert!(a.hypot(b) > 1e-6, "k = {k}");
            }
        }
    }

    #[test]
    fn shifts() {
        let l = layout();
        let v = shifted(BasicFunction::As, 2, None, &l, 2.0 * PI / 3.0 + PI / 3.0).unwrap();
        assert_eq!(v, 112.0);
        for k in 0..50 {
            let phi = k as f64 * 0.13;
            assert_eq!(
                shifted(BasicFunction::Ar, 1, None, &l, phi).unwrap(),
                basic_function_value(BasicFunction::Ar, &l, phi)
            );
        }
        assert!(shifted(BasicFunction::As, 4, None, &l, 0.0).is_err());
        assert!(shifted(BasicFunction::Ar, 41, None, &l, 0.0).is_err());
        assert!(shifted(BasicFunction::Cs, 1, Some(1), &l, 0.0).is_err());
    }

    #[test]
    fn cs_pairs_are_phase_products() {
        let l = layout();
        for (i, j) in [(1, 2), (1, 3), (2, 3), (2, 1), (3, 1), (3, 2)] {
            for k in 0..400 {
                let phi = k as f64 * TAU / 400.0 + 1e-3;
                let cs = shifted(BasicFunction::Cs, i, Some(j), &l, phi).unwrap();
                let ai = shifted(BasicFunction::As, i, None, &l, phi).unwrap();
                let aj = shifted(BasicFunction::As, j, None, &l, phi).unwrap();
                assert_relative_eq!(cs, ai * aj, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn turn_integrals() {
        let l = layout();
        let g = l.gamma_bar;
        let a = l.bar_pitch();
        assert_relative_eq!(rotor_turn_integrals(&l, g).k, g / 2.0, epsilon = 1e-15);
        assert_relative_eq!(rotor_turn_integrals(&l, g).m, g * g / 6.0, epsilon = 1e-15);
        assert_relative_eq!(rotor_turn_integrals(&l, a + g + 0.5).k, a, epsilon = 1e-15);
        assert_eq!(rotor_turn_integrals(&l, -0.2), TurnIntegrals { n: 0.0, k: 0.0, m: 0.0 });
        // Continuity at every joint, and m' = k, k' = n by finite differences.
        for x in [g, a, a + g] {
            let lo = rotor_turn_integrals(&l, x - 1e-12);
            let hi = rotor_turn_integrals(&l, x + 1e-12);
            assert!((lo.k - hi.k).abs() < 1e-10 && (lo.m - hi.m).abs() < 1e-10);
        }
        let h = 1e-6;
        for k in 1..60 {
            let x = k as f64 * (a + 2.0 * g) / 60.0;
            let p = rotor_turn_integrals(&l, x + h);
            let q = rotor_turn_integrals(&l, x - h);
            let c = rotor_turn_integrals(&l, x);
            assert!(((p.m - q.m) / (2.0 * h) - c.k).abs() < 1e-8);
            assert!(((p.k - q.k) / (2.0 * h) - c.n).abs() < 1e-6);
        }
        // Total loop area by quadrature.
        let grid = QuadratureGrid::with_breakpoints(0.0, a + g, &[g, a], 8, 4);
        let area = grid.integrate(|x| basic_function_value(BasicFunction::Ar, &l, x));
        assert_relative_eq!(area, a, max_relative = 1e-13);
    }

    #[test]
    fn uniform_gap_rotor_winding_function() {
        let l = layout();
        let gap = GapState::uniform(0.0);
        let lp = RotorLoop::new(l, 1, 0.0);
        for &phi in &[0.01, 0.1, 1.0, 3.0] {
            let v = generalized_winding_function(&lp, &gap, phi);
            assert_relative_eq!(v, lp.value(phi) - 1.0 / 40.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn winding_function_has_zero_weighted_mean() {
        let l = layout();
        let gap = GapState::new(&EccentricityConfig::static_only(0.5), 0.0).unwrap();
        let ph = StatorPhase { layout: l, index: 1 };
        let grid = grid_for(&[&ph], 8192);
        let mean = weighted_mean(&ph, &gap, &grid);
        let pn = grid.integrate(|x| gap.permeance(x) * (ph.value(x) - mean));
        assert!(pn.abs() < 1e-10 * grid.integrate(|x| gap.permeance(x) * ph.value(x)));
        // Uniform gap: weighted mean is the plain mean N.
        let u = GapState::uniform(0.0);
        assert_relative_eq!(weighted_mean(&ph, &u, &grid), 56.0, max_relative = 1e-12);
    }
}
