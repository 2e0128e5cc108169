//! Inductance matrices of the machine and their derivatives with respect to
//! the mechanical rotor angle.
//!
//! Every inductance follows `L_xy = 2πl P0 (⟨p·n_x·n_y⟩ - ⟨p·n_x⟩⟨p·n_y⟩/⟨p⟩)`
//! with `p = P/P0` the normalized three-term permeance. The weighted averages
//! of the basic functions have closed forms. The stator–rotor product is
//! integrated piecewise in closed form, or optionally approximated by freezing
//! the permeance at the centre of the rotor loop.
//! A composite Gauss–Legendre evaluation of the same integrals is provided as
//! an independent check.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{EccentricityConfig, GapGeometry, GapState};
use crate::winding::{
    grid_for, rotor_turn_integrals, RotorLoop, StatorPhase, TurnFunction, WindingLayout,
};

/// Value with its θ-derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diff {
    pub v: f64,
    pub d: f64,
}

impl Diff {
    fn new(v: f64, d: f64) -> Self {
        Self { v, d }
    }
}

/// `k · X · cos(m·arg)` and its derivative, for a permeance coefficient `X`
/// with derivative `dx` and an angle argument with derivative `darg`.
fn harmonic(k: f64, x: f64, dx: f64, m: f64, arg: f64, darg: f64) -> Diff {
    let (s, c) = (m * arg).sin_cos();
    Diff::new(k * x * c, k * (dx * c - x * m * darg * s))
}

fn add(terms: &[Diff]) -> Diff {
    terms.iter().fold(Diff::default(), |acc, t| Diff::new(acc.v + t.v, acc.d + t.d))
}

/// Normalized permeance-weighted averages of the stator functions.
pub mod stator {
    use super::*;

    /// `⟨p·AS_i⟩`.
    pub fn as_i(layout: &WindingLayout, gap: &GapState, i: usize) -> Diff {
        let n = layout.turns;
        let arg = gap.alpha - (2.0 * i as f64 - 1.0) * PI / 3.0;
        add(&[
            Diff::new(gap.a * n, gap.d_a * n),
            harmonic(6.0 * n / (PI * PI), gap.c, gap.d_c, 2.0, arg, gap.d_alpha),
        ])
    }

    /// `⟨p·BS_i⟩`.
    pub fn bs_i(layout: &WindingLayout, gap: &GapState, i: usize) -> Diff {
        let n2 = layout.turns * layout.turns;
        let arg = gap.alpha - (2.0 * i as f64 - 1.0) * PI / 3.0;
        add(&[
            Diff::new(16.0 / 9.0 * gap.a * n2, 16.0 / 9.0 * gap.d_a * n2),
            harmonic(12.0 * n2 / (PI * PI), gap.c, gap.d_c, 2.0, arg, gap.d_alpha),
        ])
    }

    /// `⟨p·CS_ij⟩`, `i ≠ j`.
    pub fn cs_ij(layout: &WindingLayout, gap: &GapState, i: usize, j: usize) -> Diff {
        let n2 = layout.turns * layout.turns;
        let arg = gap.alpha - (i as f64 + j as f64 - 1.0) * PI / 3.0;
        add(&[
            Diff::new(2.0 / 3.0 * gap.a * n2, 2.0 / 3.0 * gap.d_a * n2),
            harmonic(-6.0 * n2 / (PI * PI), gap.c, gap.d_c, 2.0, arg, gap.d_alpha),
        ])
    }
}

/// Normalized permeance-weighted averages of the rotor functions. Angles are
/// measured in the rotor frame, so the gap angle enters as `α - θ`.
pub mod rotor {
    use super::*;

    fn frame(gap: &GapState) -> (f64, f64) {
        (gap.alpha - gap.theta, gap.d_alpha - 1.0)
    }

    /// `⟨p·AR_i⟩`.
    pub fn ar_i(layout: &WindingLayout, gap: &GapState, i: usize) -> Diff {
        let g = layout.gamma_bar;
        let nb = layout.bars as f64;
        let (beta, dbeta) = frame(gap);
        let psi = beta - 2.0 * (i as f64 - 1.0) * PI / nb - PI / nb - g / 2.0;
        let k1 = 2.0 / (PI * g) * (g / 2.0).sin() * (PI / nb).sin();
        let k2 = 1.0 / (2.0 * PI * g) * g.sin() * (2.0 * PI / nb).sin();
        add(&[
            Diff::new(gap.a / nb, gap.d_a / nb),
            harmonic(k1, gap.b, gap.d_b, 1.0, psi, dbeta),
            harmonic(k2, gap.c, gap.d_c, 2.0, psi, dbeta),
        ])
    }

    /// `⟨p·BR_i⟩`.
    pub fn br_i(layout: &WindingLayout, gap: &GapState, i: usize) -> Diff {
        let g = layout.gamma_bar;
        let nb = layout.bars as f64;
        let (beta, dbeta) = frame(gap);
        let psi = beta - 2.0 * (i as f64 - 1.0) * PI / nb - PI / nb - g / 2.0;
        let a0 = 1.0 / nb - g / (6.0 * PI);
        let k1 = 2.0 / (PI * g)
            * ((PI / nb - g / 2.0).cos() - 2.0 / g * (PI / nb).cos() * (g / 2.0).sin());
        let k2 = 1.0 / (2.0 * PI * g)
            * ((2.0 * PI / nb - g).cos() - 1.0 / g * (2.0 * PI / nb).cos() * g.sin());
        add(&[
            Diff::new(gap.a * a0, gap.d_a * a0),
            harmonic(k1, gap.b, gap.d_b, 1.0, psi, dbeta),
            harmonic(k2, gap.c, gap.d_c, 2.0, psi, dbeta),
        ])
    }

    /// `⟨p·CR_i⟩`, the average of the product of loops `i` and `i-1`.
    pub fn cr_i(layout: &WindingLayout, gap: &GapState, i: usize) -> Diff {
        let g = layout.gamma_bar;
        let nb = layout.bars as f64;
        let (beta, dbeta) = frame(gap);
        let chi = beta - 2.0 * (i as f64 - 1.0) * PI / nb - g / 2.0;
        let a0 = g / (12.0 * PI);
        let k1 = 1.0 / (PI * g) * (2.0 / g * (g / 2.0).sin() - (g / 2.0).cos());
        let k2 = 1.0 / (4.0 * PI * g) * (1.0 / g * g.sin() - g.cos());
        add(&[
            Diff::new(gap.a * a0, gap.d_a * a0),
            harmonic(k1, gap.b, gap.d_b, 1.0, chi, dbeta),
            harmonic(k2, gap.c, gap.d_c, 2.0, chi, dbeta),
        ])
    }
}

/// `X(θ') = ∫ AS(u)·AR(u - θ') du` over one revolution for the first phase and
/// a loop displaced by `θ'`, with its derivative. π-periodic in `θ'`.
pub fn healthy_overlap(layout: &WindingLayout, theta_rel: f64) -> Diff {
    let t = theta_rel.rem_euclid(PI);
    let slope = 12.0 * layout.turns / PI;
    // (start, end, sign of the AS slope) for the four sloped segments.
    const SEGMENTS: [(f64, f64, f64); 4] = [
        (0.0, PI / 6.0, 1.0),
        (PI / 2.0, 2.0 * PI / 3.0, -1.0),
        (PI, 7.0 * PI / 6.0, 1.0),
        (3.0 * PI / 2.0, 5.0 * PI / 3.0, -1.0),
    ];
    let mut v = 0.0;
    let mut d = 0.0;
    for (a, b, s) in SEGMENTS {
        let hi = rotor_turn_integrals(layout, b - t);
        let lo = rotor_turn_integrals(layout, a - t);
        v -= s * slope * (hi.m - lo.m);
        d += s * slope * (hi.k - lo.k);
    }
    Diff::new(v, d)
}

/// `⟨p·AS_i·AR_j⟩` with the permeance frozen at the centre of loop `j`.
pub fn stator_rotor_product(layout: &WindingLayout, gap: &GapState, i: usize, j: usize) -> Diff {
    let pitch = layout.bar_pitch();
    let theta_rel = gap.theta + (j as f64 - 1.0) * pitch - (i as f64 - 1.0) * TAU / 3.0;
    let x = healthy_overlap(layout, theta_rel);
    let centre = gap.theta + (2.0 * j as f64 - 1.0) * PI / layout.bars as f64 + layout.gamma_bar / 2.0;
    let darg = 1.0 - gap.d_alpha;
    let local = add(&[
        Diff::new(gap.a, gap.d_a),
        harmonic(1.0, gap.b, gap.d_b, 1.0, centre - gap.alpha, darg),
        harmonic(1.0, gap.c, gap.d_c, 2.0, centre - gap.alpha, darg),
    ]);
    Diff::new(x.v * local.v / TAU, (x.d * local.v + x.v * local.d) / TAU)
}

/// Value and slope of the stator turn function at `x`, reduced to one period.
fn stator_piece(turns: f64, x: f64) -> (f64, f64) {
    let x = x.rem_euclid(PI);
    let s = 12.0 * turns / PI;
    if x < PI / 6.0 {
        (s * x, s)
    } else if x < PI / 2.0 {
        (2.0 * turns, 0.0)
    } else if x < 2.0 * PI / 3.0 {
        (8.0 * turns - s * x, -s)
    } else {
        (0.0, 0.0)
    }
}

/// `∫ e^{ikφ} AS_i(φ)·AR_j(φ)` and the same integral with `AR_j` replaced by
/// `∂AR_j/∂θ`, for `k = 0, 1, 2`.
fn loop_moments(layout: &WindingLayout, theta: f64, i: usize, j: usize) -> ([Complex64; 3], [Complex64; 3]) {
    let g = layout.gamma_bar;
    let pitch = layout.bar_pitch();
    let start = theta + (j as f64 - 1.0) * pitch;
    let span = pitch + g;
    // Work in the loop coordinate u = φ - start.
    let x0 = (start - TAU * (i as f64 - 1.0) / 3.0).rem_euclid(PI);
    let mut cuts = [span; 20];
    cuts[..3].copy_from_slice(&[0.0, g, pitch]);
    let mut len = 4;
    for m in 0..4 {
        for c in [0.0, PI / 6.0, PI / 2.0, 2.0 * PI / 3.0] {
            let u = c + m as f64 * PI - x0;
            if u > 0.0 && u < span {
                cuts[len] = u;
                len += 1;
            }
        }
    }
    let cuts = &mut cuts[..len];
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut value = [Complex64::new(0.0, 0.0); 3];
    let mut deriv = value;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        if h <= 1e-15 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let (sv, p1) = stator_piece(layout.turns, x0 + mid);
        let p0 = sv - 0.5 * h * p1;
        let (q0, q1) = if mid < g {
            (a / g, 1.0 / g)
        } else if mid < pitch {
            (1.0, 0.0)
        } else {
            (1.0 - (a - pitch) / g, -1.0 / g)
        };
        let prod = [p0 * q0, p0 * q1 + p1 * q0, p1 * q1];
        let dprod = [-p0 * q1, -p1 * q1];
        let (sa, ca) = a.sin_cos();
        let (sh, ch) = h.sin_cos();
        let unit_a = Complex64::new(ca, sa);
        let unit_h = Complex64::new(ch, sh);
        let mut phase = Complex64::new(1.0, 0.0);
        let mut eh = Complex64::new(1.0, 0.0);
        for k in 0..3 {
            let mom = if k == 0 {
                [h, h * h / 2.0, h * h * h / 3.0].map(|v| Complex64::new(v, 0.0))
            } else {
                phase *= unit_a;
                eh *= unit_h;
                let ik = Complex64::new(0.0, k as f64);
                let j0 = (eh - 1.0) / ik;
                let j1 = (eh * h - j0) / ik;
                let j2 = (eh * (h * h) - j1 * 2.0) / ik;
                [j0, j1, j2]
            };
            value[k] += phase * (mom[0] * prod[0] + mom[1] * prod[1] + mom[2] * prod[2]);
            deriv[k] += phase * (mom[0] * dprod[0] + mom[1] * dprod[1]);
        }
    }
    let (ss, cs) = start.sin_cos();
    let unit = Complex64::new(cs, ss);
    let mut shift = Complex64::new(1.0, 0.0);
    for k in 1..3 {
        shift *= unit;
        value[k] *= shift;
        deriv[k] *= shift;
    }
    (value, deriv)
}

/// `⟨p·AS_i·AR_j⟩` evaluated exactly for the three-term permeance.
pub fn stator_rotor_product_exact(layout: &WindingLayout, gap: &GapState, i: usize, j: usize) -> Diff {
    let (mom, dmom) = loop_moments(layout, gap.theta, i, j);
    // ∫ cos(k(φ-α)) f = Re(e^{-ikα} ∫ e^{ikφ} f).
    let coef = [(gap.a, gap.d_a), (gap.b, gap.d_b), (gap.c, gap.d_c)];
    let mut v = 0.0;
    let mut d = 0.0;
    for k in 0..3 {
        let kf = k as f64;
        let rot = Complex64::new(0.0, -kf * gap.alpha).exp();
        let drot = rot * Complex64::new(0.0, -kf * gap.d_alpha);
        let (x, dx) = coef[k];
        v += x * (rot * mom[k]).re;
        d += dx * (rot * mom[k]).re + x * (drot * mom[k] + rot * dmom[k]).re;
    }
    Diff::new(v / TAU, d / TAU)
}

/// How the stator–rotor average `⟨p·AS·AR⟩` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutualModel {
    /// Piecewise-analytic integral of the full three-term permeance.
    #[default]
    Exact,
    /// Permeance frozen at the loop centre.
    LoopCentre,
}

/// `2π (⟨p·xy⟩ - ⟨p·x⟩⟨p·y⟩/⟨p⟩)` with derivative, in units of `P0·l`.
fn combine(pxy: Diff, px: Diff, py: Diff, gap: &GapState) -> Diff {
    let a = gap.a;
    let prod = px.v * py.v;
    let dprod = px.d * py.v + px.v * py.d;
    Diff::new(
        TAU * (pxy.v - prod / a),
        TAU * (pxy.d - dprod / a + prod * gap.d_a / (a * a)),
    )
}

fn cross(px: Diff, py: Diff, gap: &GapState) -> Diff {
    combine(Diff::default(), px, py, gap)
}

/// Which rotor-angle-dependent blocks receive the three-point skew average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkewMode {
    Off,
    /// Stator–rotor block only.
    #[default]
    Mutual,
    /// Every block.
    All,
}

/// Leakage inductances (H).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leakage {
    pub stator: f64,
    pub bar: f64,
    pub end_ring: f64,
}

/// Machine inductances at one rotor angle.
#[derive(Debug, Clone, PartialEq)]
pub struct InductanceBundle {
    pub theta: f64,
    pub ls: DMatrix<f64>,
    pub lr: DMatrix<f64>,
    pub lsr: DMatrix<f64>,
    pub d_ls: DMatrix<f64>,
    pub d_lr: DMatrix<f64>,
    pub d_lsr: DMatrix<f64>,
}

impl InductanceBundle {
    /// Rotor-stator block; reciprocity makes it the transpose of `lsr`.
    pub fn lrs(&self) -> DMatrix<f64> {
        self.lsr.transpose()
    }

    /// Full `(3+n) × (3+n)` matrix `[[Ls, Lsr], [Lsrᵀ, Lr]]`.
    pub fn assemble(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (
            block(&self.ls, &self.lsr, &self.lr),
            block(&self.d_ls, &self.d_lsr, &self.d_lr),
        )
    }

    fn scaled_sum(parts: [(&Self, f64); 3], theta: f64) -> Self {
        let comb = |f: &dyn Fn(&Self) -> &DMatrix<f64>| {
            parts
                .iter()
                .map(|(b, w)| f(b) * *w)
                .reduce(|a, b| a + b)
                .unwrap()
        };
        Self {
            theta,
            ls: comb(&|b| &b.ls),
            lr: comb(&|b| &b.lr),
            lsr: comb(&|b| &b.lsr),
            d_ls: comb(&|b| &b.d_ls),
            d_lr: comb(&|b| &b.d_lr),
            d_lsr: comb(&|b| &b.d_lsr),
        }
    }
}

fn block(ls: &DMatrix<f64>, lsr: &DMatrix<f64>, lr: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = lsr.shape();
    let mut out = DMatrix::zeros(m + n, m + n);
    out.view_mut((0, 0), (m, m)).copy_from(ls);
    out.view_mut((0, m), (m, n)).copy_from(lsr);
    out.view_mut((m, 0), (n, m)).copy_from(&lsr.transpose());
    out.view_mut((m, m), (n, n)).copy_from(lr);
    out
}

/// Selects one inductance entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Ls,
    Lr,
    Lsr,
}

impl std::str::FromStr for Block {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls" => Ok(Block::Ls),
            "lr" => Ok(Block::Lr),
            "lsr" => Ok(Block::Lsr),
            other => Err(Error::Config(format!("unknown inductance block `{other}` (Ls, Lr, Lsr)"))),
        }
    }
}

/// Closed-form inductance evaluator for one machine.
#[derive(Debug, Clone, PartialEq)]
pub struct InductanceModel {
    pub layout: WindingLayout,
    /// `μ0 r0 l / g0` (H).
    pub l0: f64,
    pub leakage: Leakage,
    pub skew: SkewMode,
    pub mutual: MutualModel,
}

impl InductanceModel {
    pub fn new(
        layout: WindingLayout,
        geometry: &GapGeometry,
        stack_length: f64,
        leakage: Leakage,
        skew: SkewMode,
    ) -> Result<Self> {
        layout.validate()?;
        if !(geometry.g0() > 0.0) {
            return Err(Error::InvalidParameter {
                field: "g".into(),
                reason: "air gap must be positive".into(),
            });
        }
        Ok(Self {
            layout,
            l0: geometry.p0() * stack_length,
            leakage,
            skew,
            mutual: MutualModel::Exact,
        })
    }

    fn mutual_product(&self, gap: &GapState, i: usize, j: usize) -> Diff {
        match self.mutual {
            MutualModel::Exact => stator_rotor_product_exact(&self.layout, gap, i, j),
            MutualModel::LoopCentre => stator_rotor_product(&self.layout, gap, i, j),
        }
    }

    pub fn bars(&self) -> usize {
        self.layout.bars
    }

    fn skew_active(&self) -> bool {
        self.skew != SkewMode::Off && self.layout.gamma_skew > 0.0
    }

    /// All blocks at rotor angle `theta`, with the configured skew applied.
    pub fn bundle(&self, cfg: &EccentricityConfig, theta: f64) -> Result<InductanceBundle> {
        let centre = self.unskewed(&GapState::new(cfg, theta)?);
        if !self.skew_active() {
            return Ok(centre);
        }
        let h = 0.5 * self.layout.gamma_skew;
        let before = GapState::new(cfg, theta - h)?;
        let after = GapState::new(cfg, theta + h)?;
        if self.skew == SkewMode::All {
            return Ok(InductanceBundle::scaled_sum(
                [(&self.unskewed(&before), 0.25), (&centre, 0.5), (&self.unskewed(&after), 0.25)],
                theta,
            ));
        }
        let mut out = centre;
        out.lsr *= 0.5;
        out.d_lsr *= 0.5;
        for gap in [before, after] {
            let (m, dm) = self.mutual_block(&gap, &self.stator_means(&gap), &self.rotor_means(&gap));
            out.lsr += m * 0.25;
            out.d_lsr += dm * 0.25;
        }
        Ok(out)
    }

    /// Stator–rotor block alone, with the configured skew applied.
    pub fn mutual(&self, cfg: &EccentricityConfig, theta: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let eval = |th: f64| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
            let gap = GapState::new(cfg, th)?;
            Ok(self.mutual_block(&gap, &self.stator_means(&gap), &self.rotor_means(&gap)))
        };
        let (mut m, mut dm) = eval(theta)?;
        if self.skew_active() {
            let h = 0.5 * self.layout.gamma_skew;
            m *= 0.5;
            dm *= 0.5;
            for th in [theta - h, theta + h] {
                let (a, da) = eval(th)?;
                m += a * 0.25;
                dm += da * 0.25;
            }
        }
        Ok((m, dm))
    }

    fn stator_means(&self, gap: &GapState) -> Vec<Diff> {
        (1..=3).map(|i| stator::as_i(&self.layout, gap, i)).collect()
    }

    fn rotor_means(&self, gap: &GapState) -> Vec<Diff> {
        (1..=self.bars()).map(|i| rotor::ar_i(&self.layout, gap, i)).collect()
    }

    fn mutual_block(&self, gap: &GapState, pas: &[Diff], par: &[Diff]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.bars();
        let mut lsr = DMatrix::zeros(3, n);
        let mut d_lsr = DMatrix::zeros(3, n);
        for i in 0..3 {
            for j in 0..n {
                let e = combine(self.mutual_product(gap, i + 1, j + 1), pas[i], par[j], gap);
                lsr[(i, j)] = self.l0 * e.v;
                d_lsr[(i, j)] = self.l0 * e.d;
            }
        }
        (lsr, d_lsr)
    }

    /// All blocks for a given gap state, without skew.
    pub fn unskewed(&self, gap: &GapState) -> InductanceBundle {
        let l = &self.layout;
        let n = l.bars;
        let l0 = self.l0;

        let pas = self.stator_means(gap);
        let mut ls = DMatrix::zeros(3, 3);
        let mut d_ls = DMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j {
                    combine(stator::bs_i(l, gap, i + 1), pas[i], pas[j], gap)
                } else {
                    combine(stator::cs_ij(l, gap, i + 1, j + 1), pas[i], pas[j], gap)
                };
                ls[(i, j)] = l0 * e.v;
                d_ls[(i, j)] = l0 * e.d;
            }
            ls[(i, i)] += self.leakage.stator;
        }

        let par = self.rotor_means(gap);
        let lb = self.leakage.bar;
        let le = self.leakage.end_ring;
        // Start from the cross-mean term shared by every pair, then add the
        // overlap averages on the diagonal and the two neighbours.
        let mut lr = DMatrix::zeros(n, n);
        let mut d_lr = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let e = cross(par[i], par[j], gap);
                lr[(i, j)] = l0 * e.v;
                d_lr[(i, j)] = l0 * e.d;
            }
        }
        for i in 0..n {
            let self_avg = rotor::br_i(l, gap, i + 1);
            lr[(i, i)] += l0 * TAU * self_avg.v + 2.0 * (lb + le);
            d_lr[(i, i)] += l0 * TAU * self_avg.d;
            let prev = (i + n - 1) % n;
            let overlap = rotor::cr_i(l, gap, i + 1);
            for (r, c) in [(i, prev), (prev, i)] {
                lr[(r, c)] += l0 * TAU * overlap.v - lb;
                d_lr[(r, c)] += l0 * TAU * overlap.d;
            }
        }

        let (lsr, d_lsr) = self.mutual_block(gap, &pas, &par);

        InductanceBundle {
            theta: gap.theta,
            ls,
            lr,
            lsr,
            d_ls,
            d_lr,
            d_lsr,
        }
    }

    /// One entry with its derivative, evaluated on its own (1-based indices).
    /// `(Lsr, i, j)` is stator phase `i` to loop `j`; swapping the roles of the
    /// windings is exposed through [`InductanceModel::rotor_stator_entry`].
    pub fn entry(&self, cfg: &EccentricityConfig, theta: f64, which: Block, i: usize, j: usize) -> Result<Diff> {
        self.check_indices(which, i, j)?;
        let eval = |th: f64| -> Result<Diff> {
            let gap = GapState::new(cfg, th)?;
            Ok(self.raw_entry(&gap, which, i, j))
        };
        let skewed = self.skew_active() && (which == Block::Lsr || self.skew == SkewMode::All);
        if !skewed {
            return eval(theta);
        }
        let h = 0.5 * self.layout.gamma_skew;
        let (a, b, c) = (eval(theta - h)?, eval(theta)?, eval(theta + h)?);
        Ok(Diff::new(
            0.25 * a.v + 0.5 * b.v + 0.25 * c.v,
            0.25 * a.d + 0.5 * b.d + 0.25 * c.d,
        ))
    }

    /// Loop `j` to stator phase `i`, assembled with the rotor winding first.
    pub fn rotor_stator_entry(&self, cfg: &EccentricityConfig, theta: f64, j: usize, i: usize) -> Result<Diff> {
        self.check_indices(Block::Lsr, i, j)?;
        let gap = GapState::new(cfg, theta)?;
        let l = &self.layout;
        let e = combine(
            self.mutual_product(&gap, i, j),
            rotor::ar_i(l, &gap, j),
            stator::as_i(l, &gap, i),
            &gap,
        );
        Ok(Diff::new(self.l0 * e.v, self.l0 * e.d))
    }

    fn check_indices(&self, which: Block, i: usize, j: usize) -> Result<()> {
        let (mi, mj) = match which {
            Block::Ls => (3, 3),
            Block::Lr => (self.bars(), self.bars()),
            Block::Lsr => (3, self.bars()),
        };
        let what_i = if which == Block::Lr { "loop" } else { "phase" };
        let what_j = if which == Block::Ls { "phase" } else { "loop" };
        if i == 0 || i > mi {
            return Err(Error::IndexOutOfRange { what: what_i, index: i, max: mi });
        }
        if j == 0 || j > mj {
            return Err(Error::IndexOutOfRange { what: what_j, index: j, max: mj });
        }
        Ok(())
    }

    fn raw_entry(&self, gap: &GapState, which: Block, i: usize, j: usize) -> Diff {
        let l = &self.layout;
        let n = l.bars;
        let lb = self.leakage.bar;
        let le = self.leakage.end_ring;
        let (e, leak) = match which {
            Block::Ls => {
                let (pi, pj) = (stator::as_i(l, gap, i), stator::as_i(l, gap, j));
                if i == j {
                    (combine(stator::bs_i(l, gap, i), pi, pj, gap), self.leakage.stator)
                } else {
                    (combine(stator::cs_ij(l, gap, i, j), pi, pj, gap), 0.0)
                }
            }
            Block::Lr => {
                let (pi, pj) = (rotor::ar_i(l, gap, i), rotor::ar_i(l, gap, j));
                let (i0, j0) = (i - 1, j - 1);
                if i == j {
                    (combine(rotor::br_i(l, gap, i), pi, pj, gap), 2.0 * (lb + le))
                } else if j0 == (i0 + n - 1) % n {
                    (combine(rotor::cr_i(l, gap, i), pi, pj, gap), -lb)
                } else if j0 == (i0 + 1) % n {
                    (combine(rotor::cr_i(l, gap, j), pi, pj, gap), -lb)
                } else {
                    (cross(pi, pj, gap), 0.0)
                }
            }
            Block::Lsr => (
                combine(
                    self.mutual_product(gap, i, j),
                    stator::as_i(l, gap, i),
                    rotor::ar_i(l, gap, j),
                    gap,
                ),
                0.0,
            ),
        };
        Diff::new(self.l0 * e.v + leak, self.l0 * e.d)
    }

    /// Profile of one entry over `points` equally spaced angles in [0, 2π).
    pub fn profile(
        &self,
        cfg: &EccentricityConfig,
        which: Block,
        i: usize,
        j: usize,
        points: usize,
    ) -> Result<Vec<(f64, f64)>> {
        (0..points)
            .map(|k| {
                let th = TAU * k as f64 / points as f64;
                self.entry(cfg, th, which, i, j).map(|d| (th, d.v))
            })
            .collect()
    }
}

/// Three-point trapezoidal skew average `[L(θ-γ/2) + 2L(θ) + L(θ+γ/2)] / 4`.
pub fn skew_correct<F: Fn(f64) -> f64>(profile: F, gamma_skew: f64) -> impl Fn(f64) -> f64 {
    let h = 0.5 * gamma_skew;
    move |th| 0.25 * (profile(th - h) + 2.0 * profile(th) + profile(th + h))
}

/// Uniform-gap closed forms (H, leakage excluded).
pub mod uniform {
    use super::*;

    pub fn stator_self(layout: &WindingLayout, l0: f64) -> f64 {
        14.0 * PI / 9.0 * l0 * layout.turns * layout.turns
    }

    pub fn stator_mutual(layout: &WindingLayout, l0: f64) -> f64 {
        -2.0 * PI / 3.0 * l0 * layout.turns * layout.turns
    }

    pub fn rotor_self(layout: &WindingLayout, l0: f64) -> f64 {
        let n = layout.bars as f64;
        (TAU / n - TAU / (n * n) - layout.gamma_bar / 3.0) * l0
    }

    pub fn rotor_adjacent(layout: &WindingLayout, l0: f64) -> f64 {
        let n = layout.bars as f64;
        (-TAU / (n * n) + layout.gamma_bar / 6.0) * l0
    }

    pub fn rotor_distant(layout: &WindingLayout, l0: f64) -> f64 {
        let n = layout.bars as f64;
        -TAU / (n * n) * l0
    }

    /// Self inductance of `m + 1` adjacent loops merged into one.
    pub fn merged_self(layout: &WindingLayout, l0: f64, m: usize) -> f64 {
        let n = layout.bars as f64;
        let f = (m as f64 + 1.0) / n;
        (TAU * f * (1.0 - f) - layout.gamma_bar / 3.0) * l0
    }

    /// Merged loop to either neighbouring loop.
    pub fn merged_adjacent(layout: &WindingLayout, l0: f64, m: usize) -> f64 {
        let n = layout.bars as f64;
        (-TAU * (m as f64 + 1.0) / (n * n) + layout.gamma_bar / 6.0) * l0
    }

    /// Merged loop to any non-neighbouring loop.
    pub fn merged_distant(layout: &WindingLayout, l0: f64, m: usize) -> f64 {
        let n = layout.bars as f64;
        -TAU * (m as f64 + 1.0) / (n * n) * l0
    }
}

/// Independent numerical evaluation of magnetizing inductances by
/// Gauss–Legendre quadrature of the winding-function integrals.
pub mod oracle {
    use super::*;
    use crate::quadrature::QuadratureGrid;

    /// Minimum panel count over one revolution.
    pub const PANELS: usize = 20_000;

    /// `l0 ∫ p N_x n_y dφ` with the generalized winding function of `x`.
    pub fn mutual(x: &dyn TurnFunction, y: &dyn TurnFunction, gap: &GapState, l0: f64) -> f64 {
        let grid = grid_for(&[x, y], PANELS);
        let mean_x = grid.integrate(|p| gap.permeance(p) * x.value(p)) / (TAU * gap.a);
        l0 * grid.integrate(|p| gap.permeance(p) * (x.value(p) - mean_x) * y.value(p))
    }

    /// Same integral with the uniform-gap winding function `n_x - ⟨n_x⟩`,
    /// which is not symmetric in `x` and `y` once the gap is uneven.
    pub fn legacy_mutual(x: &dyn TurnFunction, y: &dyn TurnFunction, gap: &GapState, l0: f64) -> f64 {
        let grid = grid_for(&[x, y], PANELS);
        let mean_x = grid.integrate(|p| x.value(p)) / TAU;
        l0 * grid.integrate(|p| gap.permeance(p) * (x.value(p) - mean_x) * y.value(p))
    }

    /// All magnetizing inductances of the healthy machine at one gap state,
    /// ordered as 3 phases then `n` loops.
    pub fn matrix(layout: &WindingLayout, gap: &GapState, l0: f64) -> DMatrix<f64> {
        let n = layout.bars;
        let mut windings: Vec<Box<dyn TurnFunction>> = Vec::with_capacity(3 + n);
        for i in 1..=3 {
            windings.push(Box::new(StatorPhase { layout: *layout, index: i }));
        }
        for j in 1..=n {
            windings.push(Box::new(RotorLoop::new(*layout, j, gap.theta)));
        }
        let refs: Vec<&dyn TurnFunction> = windings.iter().map(|w| w.as_ref()).collect();
        let grid: QuadratureGrid = grid_for(&refs, PANELS);
        let q = grid.len();
        let m = windings.len();
        // Samples weighted by sqrt of (w·p) so that the Gram matrix is ∫ p n_x n_y.
        let mut samples = DMatrix::zeros(q, m);
        let mut pw = vec![0.0; q];
        for (r, (&phi, &w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
            let p = gap.permeance(phi);
            pw[r] = w * p;
            let s = (w * p).max(0.0).sqrt();
            for (c, wd) in windings.iter().enumerate() {
                samples[(r, c)] = s * wd.value(phi);
            }
        }
        let gram = samples.transpose() * &samples;
        let mut means = vec![0.0; m];
        for (c, wd) in windings.iter().enumerate() {
            means[c] = grid
                .nodes
                .iter()
                .zip(&pw)
                .map(|(&phi, &w)| w * wd.value(phi))
                .sum();
        }
        let total_p: f64 = pw.iter().sum();
        DMatrix::from_fn(m, m, |a, b| l0 * (gram[(a, b)] - means[a] * means[b] / total_p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model(skew: SkewMode) -> InductanceModel {
        let layout = WindingLayout {
            turns: 56.0,
            pole_pairs: 2,
            bars: 40,
            gamma_bar: PI / 86.0,
            gamma_skew: TAU / 40.0,
        };
        InductanceModel::new(
            layout,
            &GapGeometry::from_rotor(0.082, 0.0008),
            0.11,
            Leakage {
                stator: 0.009,
                bar: 95e-9,
                end_ring: 18e-9,
            },
            skew,
        )
        .unwrap()
    }

    #[test]
    fn uniform_gap_averages_collapse_to_means() {
        let m = model(SkewMode::Off);
        let gap = GapState::uniform(0.4);
        for i in 1..=3 {
            assert_eq!(stator::as_i(&m.layout, &gap, i).v, 56.0);
        }
        let g = m.layout.gamma_bar;
        assert_relative_eq!(rotor::br_i(&m.layout, &gap, 7).v, 1.0 / 40.0 - g / (6.0 * PI), epsilon = 1e-16);
    }

    #[test]
    fn weighted_averages_match_quadrature() {
        use crate::quadrature::QuadratureGrid;
        use crate::winding::{basic_function_value, shift_angle, BasicFunction};
        let m = model(SkewMode::Off);
        let l = m.layout;
        let cfg = EccentricityConfig::mixed(0.3, 0.25);
        for &th in &[0.0, 0.7, 2.2, 4.0] {
            let gap = GapState::new(&cfg, th).unwrap();
            let mut bps: Vec<f64> = (0..24).map(|k| k as f64 * PI / 12.0).collect();
            for j in 0..40 {
                let o = j as f64 * l.bar_pitch() + th;
                bps.extend([o, o + l.gamma_bar, o + l.bar_pitch(), o + l.bar_pitch() + l.gamma_bar]
                    .map(|x| x.rem_euclid(TAU)));
            }
            let grid = QuadratureGrid::with_breakpoints(0.0, TAU, &bps, 20_000, 4);
            let avg = |kind: BasicFunction, shift: f64, frame: f64| {
                grid.integrate(|p| gap.permeance(p) * basic_function_value(kind, &l, p - shift - frame)) / TAU
            };
            for i in 1..=3 {
                let s = shift_angle(BasicFunction::As, i, None, &l).unwrap();
                assert_relative_eq!(stator::as_i(&l, &gap, i).v, avg(BasicFunction::As, s, 0.0), max_relative = 1e-9);
                assert_relative_eq!(stator::bs_i(&l, &gap, i).v, avg(BasicFunction::Bs, s, 0.0), max_relative = 1e-9);
                for j in 1..=3 {
                    if i != j {
                        let s = shift_angle(BasicFunction::Cs, i, Some(j), &l).unwrap();
                        assert_relative_eq!(
                            stator::cs_ij(&l, &gap, i, j).v,
                            avg(BasicFunction::Cs, s, 0.0),
                            max_relative = 1e-9
                        );
                    }
                }
            }
            for i in [1, 2, 17, 40] {
                let s = shift_angle(BasicFunction::Ar, i, None, &l).unwrap();
                assert_relative_eq!(rotor::ar_i(&l, &gap, i).v, avg(BasicFunction::Ar, s, th), max_relative = 1e-9);
                assert_relative_eq!(rotor::br_i(&l, &gap, i).v, avg(BasicFunction::Br, s, th), max_relative = 1e-9);
                assert_relative_eq!(rotor::cr_i(&l, &gap, i).v, avg(BasicFunction::Cr, s, th), max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn healthy_overlap_matches_quadrature() {
        use crate::quadrature::QuadratureGrid;
        use crate::winding::{basic_function_value, BasicFunction};
        let m = model(SkewMode::Off);
        let l = m.layout;
        for k in 0..25 {
            let t = k as f64 * 0.137;
            let lp = RotorLoop::new(l, 1, t);
            let mut bps = lp.breakpoints();
            bps.extend((0..12).map(|k| k as f64 * PI / 6.0));
            let grid = QuadratureGrid::with_breakpoints(0.0, TAU, &bps, 2000, 4);
            let q = grid.integrate(|p| basic_function_value(BasicFunction::As, &l, p) * lp.value(p));
            assert_relative_eq!(healthy_overlap(&l, t).v, q, max_relative = 1e-11, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_gap_matches_textbook_forms() {
        let m = model(SkewMode::Off);
        let b = m.bundle(&EccentricityConfig::healthy(), 0.3).unwrap();
        let l0 = m.l0;
        assert_relative_eq!(b.ls[(0, 0)], uniform::stator_self(&m.layout, l0) + 0.009, max_relative = 1e-14);
        assert_relative_eq!(b.ls[(0, 1)], uniform::stator_mutual(&m.layout, l0), max_relative = 1e-14);
        assert_relative_eq!(
            b.lr[(4, 4)],
            uniform::rotor_self(&m.layout, l0) + 2.0 * (95e-9 + 18e-9),
            max_relative = 1e-13
        );
        assert_relative_eq!(b.lr[(4, 5)], uniform::rotor_adjacent(&m.layout, l0) - 95e-9, max_relative = 1e-12);
        assert_relative_eq!(b.lr[(0, 39)], uniform::rotor_adjacent(&m.layout, l0) - 95e-9, max_relative = 1e-12);
        assert_relative_eq!(b.lr[(4, 9)], uniform::rotor_distant(&m.layout, l0), max_relative = 1e-12);
    }

    #[test]
    fn static_eccentricity_freezes_stator_block() {
        let m = model(SkewMode::Mutual);
        let cfg = EccentricityConfig::static_only(0.5);
        let a = m.bundle(&cfg, 0.1).unwrap();
        for k in 1..20 {
            let b = m.bundle(&cfg, 0.1 + k as f64 * 0.31).unwrap();
            assert!((&a.ls - &b.ls).amax() < 1e-12);
        }
    }

    #[test]
    fn mutual_reduces_to_shifted_healthy_profile() {
        let m = model(SkewMode::Off);
        let l = m.layout;
        let cfg = EccentricityConfig::healthy();
        for (i, j, th) in [(1, 1, 0.2), (2, 5, 1.3), (3, 40, 2.9)] {
            let e = m.entry(&cfg, th, Block::Lsr, i, j).unwrap();
            let rel = th - (i as f64 - 1.0) * TAU / 3.0 + (j as f64 - 1.0) * TAU / 40.0;
            let healthy = m.l0 * (healthy_overlap(&l, rel).v - TAU * 56.0 / 40.0);
            assert_relative_eq!(e.v, healthy, max_relative = 1e-12);
        }
    }

    #[test]
    fn mutual_is_pi_periodic() {
        let m = model(SkewMode::Mutual);
        let cfg = EccentricityConfig::healthy();
        for k in 0..30 {
            let th = k as f64 * 0.21;
            let a = m.entry(&cfg, th, Block::Lsr, 2, 7).unwrap().v;
            let b = m.entry(&cfg, th + PI, Block::Lsr, 2, 7).unwrap().v;
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn skew_of_cosine_and_constant() {
        let g = 0.3;
        let f = skew_correct(|th: f64| th.cos(), g);
        for k in 0..10 {
            let th = k as f64 * 0.5;
            assert_relative_eq!(f(th), th.cos() * (1.0 + (g / 2.0).cos()) / 2.0, epsilon = 1e-15);
        }
        let c = skew_correct(|_| 2.5, g);
        assert_eq!(c(1.0), 2.5);
        let id = skew_correct(|th: f64| th.sin(), 0.0);
        assert_eq!(id(0.7), 0.7f64.sin());
    }

    #[test]
    fn bundle_matches_entries() {
        let m = model(SkewMode::Mutual);
        let cfg = EccentricityConfig::mixed(0.2, 0.15);
        let b = m.bundle(&cfg, 1.1).unwrap();
        for (blk, i, j) in [(Block::Ls, 1, 2), (Block::Lr, 3, 4), (Block::Lr, 40, 1), (Block::Lr, 2, 9), (Block::Lsr, 3, 11)] {
            let e = m.entry(&cfg, 1.1, blk, i, j).unwrap();
            let (v, d) = match blk {
                Block::Ls => (b.ls[(i - 1, j - 1)], b.d_ls[(i - 1, j - 1)]),
                Block::Lr => (b.lr[(i - 1, j - 1)], b.d_lr[(i - 1, j - 1)]),
                Block::Lsr => (b.lsr[(i - 1, j - 1)], b.d_lsr[(i - 1, j - 1)]),
            };
            assert_relative_eq!(e.v, v, max_relative = 1e-12);
            assert_relative_eq!(e.d, d, max_relative = 1e-9, epsilon = 1e-18);
        }
    }

    #[test]
    fn closed_forms_match_oracle_under_mixed_eccentricity() {
        let m = model(SkewMode::Off);
        let cfg = EccentricityConfig::mixed(0.3, 0.2);
        let gap = GapState::new(&cfg, 0.9).unwrap();
        let o = oracle::matrix(&m.layout, &gap, m.l0);
        let leak = InductanceModel { leakage: Leakage { stator: 0.0, bar: 0.0, end_ring: 0.0 }, ..m.clone() };
        let (full, _) = leak.unskewed(&gap).assemble();
        let err = (&full - &o).amax() / o.amax();
        assert!(err < 1e-10, "{err}");

        // Freezing the permeance at the loop centre is only approximate.
        let approx = InductanceModel { mutual: MutualModel::LoopCentre, ..leak };
        let lsr = approx.unskewed(&gap).lsr;
        let scale = o.view((0, 3), (3, 40)).amax();
        let err = (&lsr - o.view((0, 3), (3, 40))).amax() / scale;
        assert!(err > 1e-4 && err < 1e-2, "{err}");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for model in [model(SkewMode::Mutual), InductanceModel { mutual: MutualModel::LoopCentre, ..model(SkewMode::All) }] {
            let cfg = EccentricityConfig::mixed(0.25, 0.2);
            for &th in &[0.3, 1.7, 4.4] {
                let b = model.bundle(&cfg, th).unwrap();
                let h = 1e-5;
                let p = model.bundle(&cfg, th + h).unwrap();
                let q = model.bundle(&cfg, th - h).unwrap();
                for (hi, lo, d) in [(&p.ls, &q.ls, &b.d_ls), (&p.lr, &q.lr, &b.d_lr), (&p.lsr, &q.lsr, &b.d_lsr)] {
                    let fd = (hi - lo) / (2.0 * h);
                    assert!((&fd - d).amax() <= 1e-6 * d.amax(), "{}", (&fd - d).amax() / d.amax());
                }
            }
        }
    }

    #[test]
    fn index_errors() {
        let m = model(SkewMode::Off);
        let cfg = EccentricityConfig::healthy();
        assert!(m.entry(&cfg, 0.0, Block::Ls, 4, 1).is_err());
        assert!(m.entry(&cfg, 0.0, Block::Lsr, 1, 41).is_err());
        assert!(m.entry(&cfg, 0.0, Block::Lr, 0, 1).is_err());
    }
}
