//! Coupled-circuit model of the cage motor and its time integration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{EccentricityConfig, GapGeometry};
use crate::inductance::{InductanceModel, Leakage, MutualModel, SkewMode};
use crate::ode::{self, Stats, Tolerances};
use crate::record::SimulationRecord;
use crate::winding::WindingLayout;

/// Electrical, magnetic, geometric and mechanical constants of the motor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotorParameters {
    /// Pole pairs.
    pub p: u32,
    /// Rotor bars.
    pub n: usize,
    /// Stator phase resistance (Ω).
    pub rst: f64,
    /// Bar resistance (Ω).
    pub r_bar: f64,
    /// End-ring segment resistance (Ω).
    pub r_end: f64,
    /// Stator leakage inductance (H).
    pub lls: f64,
    /// Bar leakage inductance (H).
    pub l_bar: f64,
    /// End-ring segment leakage inductance (H).
    pub l_end: f64,
    /// Stator turns per coil group.
    pub ns: f64,
    /// Bar view angle (rad).
    pub gama: f64,
    /// Skew angle (rad); the bar pitch when absent.
    pub gama_skew: Option<f64>,
    /// Rotor radius (m).
    pub rot_rad: f64,
    /// Stack length (m).
    pub stack_length: f64,
    /// Uniform air gap (m).
    pub g: f64,
    /// Rotor inertia (kg·m²).
    pub j: f64,
}

impl Default for MotorParameters {
    fn default() -> Self {
        Self {
            p: 2,
            n: 40,
            rst: 1.75,
            r_bar: 31e-6,
            r_end: 2.2e-6,
            lls: 0.009,
            l_bar: 95e-9,
            l_end: 18e-9,
            ns: 56.0,
            gama: PI / 86.0,
            gama_skew: None,
            rot_rad: 0.082,
            stack_length: 0.11,
            g: 0.0008,
            j: 0.05,
        }
    }
}

impl MotorParameters {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rst", self.rst),
            ("r_bar", self.r_bar),
            ("r_end", self.r_end),
            ("lls", self.lls),
            ("l_bar", self.l_bar),
            ("l_end", self.l_end),
            ("rot_rad", self.rot_rad),
            ("stack_length", self.stack_length),
            ("g", self.g),
            ("j", self.j),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    field: field.into(),
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if let Some(s) = self.gama_skew {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter {
                    field: "gama_skew".into(),
                    reason: format!("must be non-negative, got {s}"),
                });
            }
        }
        self.layout().validate()
    }

    pub fn layout(&self) -> WindingLayout {
        WindingLayout {
            turns: self.ns,
            pole_pairs: self.p,
            bars: self.n,
            gamma_bar: self.gama,
            gamma_skew: self.gama_skew.unwrap_or(TAU / self.n as f64),
        }
    }

    pub fn inductance_model(&self, skew: SkewMode, mutual: MutualModel) -> Result<InductanceModel> {
        self.validate()?;
        let mut m = InductanceModel::new(
            self.layout(),
            &GapGeometry::from_rotor(self.rot_rad, self.g),
            self.stack_length,
            Leakage {
                stator: self.lls,
                bar: self.l_bar,
                end_ring: self.l_end,
            },
            skew,
        )?;
        m.mutual = mutual;
        Ok(m)
    }
}

/// Balanced three-phase sinusoidal supply and constant load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Supply {
    /// Peak phase voltage (V).
    pub amplitude: f64,
    /// Supply frequency (Hz).
    pub frequency: f64,
    /// Load torque (N·m).
    pub load_torque: f64,
    /// Star point not connected, so the phase currents sum to zero.
    pub isolated_neutral: bool,
}

impl Default for Supply {
    fn default() -> Self {
        Self {
            amplitude: 380.0,
            frequency: 50.0,
            load_torque: 20.0,
            isolated_neutral: true,
        }
    }
}

impl Supply {
    pub fn omega(&self) -> f64 {
        TAU * self.frequency
    }

    /// Phase voltages at time `t`. The phase order makes the field turn
    /// towards positive θ.
    pub fn voltages(&self, t: f64) -> [f64; 3] {
        let w = self.omega() * t;
        std::array::from_fn(|i| self.amplitude * (w + TAU * i as f64 / 3.0).sin())
    }
}

/// How broken bars are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarModel {
    /// Broken bar resistance multiplied by `broken_factor`.
    #[default]
    Scale,
    /// Loops on either side of the broken bars merged into one.
    Eliminate,
}

/// Eccentricity and broken bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultSpec {
    pub eccentricity: EccentricityConfig,
    /// 1-based bar indices; bar `k` separates loop `k` from loop `k+1`.
    pub broken_bars: Vec<usize>,
    pub bar_model: BarModel,
    pub broken_factor: f64,
}

impl Default for FaultSpec {
    fn default() -> Self {
        Self {
            eccentricity: EccentricityConfig::healthy(),
            broken_bars: Vec::new(),
            bar_model: BarModel::Scale,
            broken_factor: 1000.0,
        }
    }
}

impl FaultSpec {
    pub fn healthy() -> Self {
        Self::default()
    }

    pub fn eccentric(eccentricity: EccentricityConfig) -> Self {
        Self {
            eccentricity,
            ..Self::default()
        }
    }

    /// `count` adjacent broken bars starting at bar 1.
    pub fn broken(count: usize, bar_model: BarModel) -> Self {
        Self {
            broken_bars: (1..=count).collect(),
            bar_model,
            ..Self::default()
        }
    }

    pub fn validate(&self, bars: usize) -> Result<()> {
        self.eccentricity.validate()?;
        let mut seen = vec![false; bars + 1];
        for &b in &self.broken_bars {
            if b == 0 || b > bars {
                return Err(Error::IndexOutOfRange { what: "broken bar", index: b, max: bars });
            }
            if seen[b] {
                return Err(Error::InvalidParameter {
                    field: "broken_bars".into(),
                    reason: format!("bar {b} listed twice"),
                });
            }
            seen[b] = true;
        }
        if !(self.broken_factor >= 1.0 && self.broken_factor.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "broken_factor".into(),
                reason: format!("must be at least 1, got {}", self.broken_factor),
            });
        }
        Ok(())
    }
}

/// Stator and rotor resistance matrices. Broken bars are scaled when the
/// fault uses [`BarModel::Scale`]; otherwise the healthy cage is returned.
pub fn resistance_matrices(params: &MotorParameters, fault: &FaultSpec) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = params.n;
    let rs = DMatrix::from_diagonal_element(3, 3, params.rst);
    let mut bar = vec![params.r_bar; n];
    if fault.bar_model == BarModel::Scale {
        for &b in &fault.broken_bars {
            bar[b - 1] *= fault.broken_factor;
        }
    }
    let mut rr = DMatrix::zeros(n, n);
    for i in 0..n {
        let prev = (i + n - 1) % n;
        rr[(i, i)] = bar[prev] + bar[i] + 2.0 * params.r_end;
        rr[(i, (i + 1) % n)] = -bar[i];
        rr[((i + 1) % n, i)] = -bar[i];
    }
    (rs, rr)
}

/// Groups of original rotor loops that act as one circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopGrouping {
    pub loops: usize,
    pub groups: Vec<Vec<usize>>,
}

impl LoopGrouping {
    pub fn identity(loops: usize) -> Self {
        Self {
            loops,
            groups: (0..loops).map(|i| vec![i]).collect(),
        }
    }

    /// Merges the loops on both sides of a cyclically contiguous run of
    /// broken bars (1-based). The merged loop comes first.
    pub fn eliminate(loops: usize, broken: &[usize]) -> Result<Self> {
        let m = broken.len();
        if m == 0 {
            return Ok(Self::identity(loops));
        }
        if m + 3 > loops {
            return Err(Error::Unsupported(format!(
                "loop elimination needs at least 3 remaining loops; {m} broken of {loops}"
            )));
        }
        let mut is_broken = vec![false; loops];
        for &b in broken {
            is_broken[b - 1] = true;
        }
        // The run starts at a broken bar whose predecessor is intact.
        let starts: Vec<usize> = (0..loops)
            .filter(|&b| is_broken[b] && !is_broken[(b + loops - 1) % loops])
            .collect();
        if starts.len() != 1 {
            return Err(Error::Unsupported(
                "loop elimination requires the broken bars to be adjacent".into(),
            ));
        }
        // Bar b (0-based) separates loop b from loop b+1.
        let first = starts[0];
        let merged: Vec<usize> = (0..=m).map(|k| (first + k) % loops).collect();
        let mut groups = vec![merged.clone()];
        for k in m + 1..loops {
            groups.push(vec![(first + k) % loops]);
        }
        Ok(Self { loops, groups })
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.groups.iter().enumerate().all(|(k, g)| g.len() == 1 && g[0] == k)
    }

    /// `Tᵀ M T` for a loop-by-loop matrix.
    pub fn reduce_square(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let k = self.len();
        DMatrix::from_fn(k, k, |a, b| {
            let mut s = 0.0;
            for &i in &self.groups[a] {
                for &j in &self.groups[b] {
                    s += m[(i, j)];
                }
            }
            s
        })
    }

    /// `M T` for a matrix whose columns are loops.
    pub fn reduce_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), self.len(), |r, b| self.groups[b].iter().map(|&j| m[(r, j)]).sum())
    }

    /// Original loop currents from reduced ones.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.loops];
        for (g, &v) in self.groups.iter().zip(reduced) {
            for &i in g {
                out[i] = v;
            }
        }
        out
    }
}

/// Mechanical boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedMode {
    #[default]
    Free,
    /// Rotor held at a fixed speed (rad/s).
    Locked(f64),
}

/// The assembled machine: inductance model, resistances, supply and fault.
#[derive(Debug, Clone)]
pub struct Machine {
    pub params: MotorParameters,
    pub fault: FaultSpec,
    pub supply: Supply,
    pub model: InductanceModel,
    pub grouping: LoopGrouping,
    rs: DMatrix<f64>,
    rr: DMatrix<f64>,
    /// Reduced `Ls` and `Lr` when they do not depend on θ.
    constant: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl Machine {
    pub fn new(params: MotorParameters, fault: FaultSpec, supply: Supply, model: InductanceModel) -> Result<Self> {
        params.validate()?;
        fault.validate(params.n)?;
        if !(supply.amplitude.is_finite() && supply.frequency > 0.0 && supply.load_torque.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "supply".into(),
                reason: "amplitude and load must be finite and frequency positive".into(),
            });
        }
        let grouping = match fault.bar_model {
            BarModel::Eliminate => LoopGrouping::eliminate(params.n, &fault.broken_bars)?,
            BarModel::Scale => LoopGrouping::identity(params.n),
        };
        let (rs, rr_full) = resistance_matrices(&params, &fault);
        let rr = grouping.reduce_square(&rr_full);
        let constant = if fault.eccentricity.is_healthy() && model.skew != SkewMode::All {
            let b = model.bundle(&fault.eccentricity, 0.0)?;
            Some((b.ls, grouping.reduce_square(&b.lr)))
        } else {
            None
        };
        Ok(Self {
            params,
            fault,
            supply,
            model,
            grouping,
            rs,
            rr,
            constant,
        })
    }

    /// Builds the inductance model from the parameters.
    pub fn from_parts(params: MotorParameters, fault: FaultSpec, supply: Supply, skew: SkewMode) -> Result<Self> {
        let model = params.inductance_model(skew, MutualModel::Exact)?;
        Self::new(params, fault, supply, model)
    }

    /// Rotor circuits after any loop elimination.
    pub fn rotor_circuits(&self) -> usize {
        self.grouping.len()
    }

    /// Currents, then ω and θ.
    pub fn state_len(&self) -> usize {
        3 + self.rotor_circuits() + 2
    }

    pub fn resistance(&self) -> DMatrix<f64> {
        let k = 3 + self.rotor_circuits();
        let mut r = DMatrix::zeros(k, k);
        r.view_mut((0, 0), (3, 3)).copy_from(&self.rs);
        r.view_mut((3, 3), (k - 3, k - 3)).copy_from(&self.rr);
        r
    }

    /// Reduced inductance matrix and its θ-derivative.
    pub fn inductances(&self, theta: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let g = &self.grouping;
        let k = 3 + g.len();
        let (ls, lr, lsr, d_ls, d_lr, d_lsr) = match &self.constant {
            Some((ls, lr)) => {
                let (lsr, d_lsr) = self.model.mutual(&self.fault.eccentricity, theta)?;
                let z = k - 3;
                (
                    ls.clone(),
                    lr.clone(),
                    g.reduce_columns(&lsr),
                    DMatrix::zeros(3, 3),
                    DMatrix::zeros(z, z),
                    g.reduce_columns(&d_lsr),
                )
            }
            None => {
                let b = self.model.bundle(&self.fault.eccentricity, theta)?;
                (
                    b.ls,
                    g.reduce_square(&b.lr),
                    g.reduce_columns(&b.lsr),
                    b.d_ls,
                    g.reduce_square(&b.d_lr),
                    g.reduce_columns(&b.d_lsr),
                )
            }
        };
        let assemble = |s: &DMatrix<f64>, r: &DMatrix<f64>, sr: &DMatrix<f64>| {
            let mut m = DMatrix::zeros(k, k);
            m.view_mut((0, 0), (3, 3)).copy_from(s);
            m.view_mut((0, 3), (3, k - 3)).copy_from(sr);
            m.view_mut((3, 0), (k - 3, 3)).copy_from(&sr.transpose());
            m.view_mut((3, 3), (k - 3, k - 3)).copy_from(r);
            m
        };
        Ok((assemble(&ls, &lr, &lsr), assemble(&d_ls, &d_lr, &d_lsr)))
    }

    /// Electromagnetic torque `½ iᵀ (dL/dθ) i` for a state vector.
    pub fn torque(&self, state: &[f64]) -> Result<f64> {
        let k = 3 + self.rotor_circuits();
        let (_, dl) = self.inductances(state[k + 1])?;
        let i = DVector::from_column_slice(&state[..k]);
        Ok(0.5 * i.dot(&(&dl * &i)))
    }

    /// Magnetic field energy `½ iᵀ L i`.
    pub fn field_energy(&self, state: &[f64]) -> Result<f64> {
        let k = 3 + self.rotor_circuits();
        let (l, _) = self.inductances(state[k + 1])?;
        let i = DVector::from_column_slice(&state[..k]);
        Ok(0.5 * i.dot(&(&l * &i)))
    }

    /// Time derivative of the state.
    pub fn derivative(&self, t: f64, x: &[f64], dx: &mut [f64], speed: SpeedMode) -> Result<()> {
        let k = 3 + self.rotor_circuits();
        let omega = x[k];
        let theta = x[k + 1];
        let (l, dl) = self.inductances(theta)?;
        let i = DVector::from_column_slice(&x[..k]);
        let dli = &dl * &i;
        let mut rhs = -(&self.resistance_times(&i)) - &dli * omega;
        let v = self.supply.voltages(t);
        for p in 0..3 {
            rhs[p] += v[p];
        }
        let chol = l.cholesky().ok_or(Error::SingularInductance { t, theta })?;
        let mut di = chol.solve(&rhs);
        if self.supply.isolated_neutral {
            // Star-point voltage chosen so that the current sum stays constant.
            let mut c = DVector::zeros(k);
            c.rows_mut(0, 3).fill(1.0);
            let lc = chol.solve(&c);
            let lambda = -(di[0] + di[1] + di[2]) / (lc[0] + lc[1] + lc[2]);
            di += lc * lambda;
        }
        dx[..k].copy_from_slice(di.as_slice());
        match speed {
            SpeedMode::Free => {
                let torque = 0.5 * i.dot(&dli);
                dx[k] = (torque - self.supply.load_torque) / self.params.j;
                dx[k + 1] = omega;
            }
            SpeedMode::Locked(w) => {
                dx[k] = 0.0;
                dx[k + 1] = w;
            }
        }
        Ok(())
    }

    fn resistance_times(&self, i: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(i.len());
        for p in 0..3 {
            out[p] = self.params.rst * i[p];
        }
        let ir = i.rows(3, i.len() - 3);
        out.rows_mut(3, i.len() - 3).copy_from(&(&self.rr * ir));
        out
    }

    /// Slip for a mechanical speed.
    pub fn slip(&self, omega: f64) -> f64 {
        1.0 - self.params.p as f64 * omega / self.supply.omega()
    }
}

/// Integration settings for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    /// End time (s).
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Largest step (s).
    pub h_max: f64,
    /// Uniform output rate (Hz).
    pub sample_rate: f64,
    #[serde(skip)]
    pub speed: SpeedMode,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            t_end: 3.0,
            rtol: 1e-6,
            atol: 1e-6,
            h_max: 1e-3,
            sample_rate: 3200.0,
            speed: SpeedMode::Free,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("t_end", self.t_end),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("h_max", self.h_max),
            ("sample_rate", self.sample_rate),
        ];
        for (field, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    field: field.into(),
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Runs the machine from standstill with zero currents and records the
/// uniformly resampled trajectory.
pub fn simulate(machine: &Machine, opts: &SimOptions) -> Result<SimulationRecord> {
    opts.validate()?;
    let k = 3 + machine.rotor_circuits();
    let samples = (opts.t_end * opts.sample_rate).floor() as usize + 1;
    let times: Vec<f64> = (0..samples).map(|s| s as f64 / opts.sample_rate).collect();
    let mut record = SimulationRecord::with_capacity(opts.sample_rate, machine.rotor_circuits(), samples);
    let mut x0 = vec![0.0; k + 2];
    if let SpeedMode::Locked(w) = opts.speed {
        x0[k] = w;
    }
    let tol = Tolerances {
        rtol: opts.rtol,
        atol: opts.atol,
        h_max: opts.h_max,
        ..Tolerances::default()
    };
    let stats: Stats = ode::integrate(
        |t, x, dx| machine.derivative(t, x, dx, opts.speed),
        0.0,
        &x0,
        opts.t_end,
        &times,
        &tol,
        |t, x| {
            let torque = machine.torque(x)?;
            record.push(t, x, torque);
            Ok(())
        },
    )?;
    record.stats = stats;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> MotorParameters {
        MotorParameters::default()
    }

    #[test]
    fn healthy_resistance_values() {
        let (rs, rr) = resistance_matrices(&params(), &FaultSpec::healthy());
        assert_eq!(rs[(1, 1)], 1.75);
        assert_relative_eq!(rr[(0, 0)], 6.64e-5, max_relative = 1e-12);
        assert_eq!(rr[(0, 1)], -3.1e-5);
        assert_eq!(rr[(0, 39)], -3.1e-5);
        assert_eq!(rr[(0, 2)], 0.0);
        assert_eq!(rr, rr.transpose());
    }

    #[test]
    fn broken_bar_scaling() {
        let fault = FaultSpec::broken(1, BarModel::Scale);
        let (_, rr) = resistance_matrices(&params(), &fault);
        let rb = 31e-6 * 1000.0;
        assert_eq!(rr, rr.transpose());
        assert_relative_eq!(rr[(0, 0)], rb + 31e-6 + 4.4e-6, max_relative = 1e-12);
        assert_relative_eq!(rr[(1, 1)], rb + 31e-6 + 4.4e-6, max_relative = 1e-12);
        assert_relative_eq!(rr[(0, 1)], -rb, max_relative = 1e-12);
        assert_relative_eq!(rr[(5, 5)], 6.64e-5, max_relative = 1e-12);
        // Every row of a cage sums to twice the end-ring resistance.
        for i in 0..40 {
            assert_relative_eq!(rr.row(i).sum(), 4.4e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn elimination_grouping() {
        assert!(LoopGrouping::eliminate(40, &[]).unwrap().is_identity());
        let g = LoopGrouping::eliminate(40, &[40, 1]).unwrap();
        assert_eq!(g.groups[0], vec![39, 0, 1]);
        assert_eq!(g.len(), 38);
        assert!(matches!(LoopGrouping::eliminate(40, &[3, 7]), Err(Error::Unsupported(_))));
        assert!(LoopGrouping::eliminate(5, &[1, 2, 3]).is_err());
        assert!(LoopGrouping::eliminate(5, &[1, 2]).is_ok());
    }

    #[test]
    fn merged_loop_resistance_and_leakage() {
        let p = params();
        for m in 1..=4 {
            let fault = FaultSpec::broken(m, BarModel::Eliminate);
            let g = LoopGrouping::eliminate(40, &fault.broken_bars).unwrap();
            let (_, rr) = resistance_matrices(&p, &fault);
            let red = g.reduce_square(&rr);
            assert_relative_eq!(red[(0, 0)], 2.0 * p.r_bar + 2.0 * (m as f64 + 1.0) * p.r_end, max_relative = 1e-12);
            assert_relative_eq!(red[(0, 1)], -p.r_bar, max_relative = 1e-12);
        }
    }

    #[test]
    fn merged_loop_inductances_match_closed_forms() {
        use crate::inductance::uniform;
        let p = params();
        let model = p.inductance_model(SkewMode::Off, MutualModel::Exact).unwrap();
        let b = model.bundle(&EccentricityConfig::healthy(), 0.4).unwrap();
        let layout = p.layout();
        for m in 1..=3 {
            let g = LoopGrouping::eliminate(40, &(1..=m).collect::<Vec<_>>()).unwrap();
            let lr = g.reduce_square(&b.lr);
            let leak = 2.0 * (p.l_bar + m as f64 * p.l_end + p.l_end);
            assert_relative_eq!(lr[(0, 0)], uniform::merged_self(&layout, model.l0, m) + leak, max_relative = 1e-11);
            assert_relative_eq!(lr[(0, 1)], uniform::merged_adjacent(&layout, model.l0, m) - p.l_bar, max_relative = 1e-11);
            assert_relative_eq!(lr[(0, 5)], uniform::merged_distant(&layout, model.l0, m), max_relative = 1e-11);
        }
    }

    #[test]
    fn merged_mutual_is_sum_of_absorbed_loops() {
        let p = params();
        let m = Machine::from_parts(p.clone(), FaultSpec::broken(2, BarModel::Eliminate), Supply::default(), SkewMode::Mutual).unwrap();
        let full = p.inductance_model(SkewMode::Mutual, MutualModel::Exact).unwrap();
        let b = full.bundle(&EccentricityConfig::healthy(), 0.77).unwrap();
        let (l, _) = m.inductances(0.77).unwrap();
        for ph in 0..3 {
            assert_relative_eq!(l[(ph, 3)], b.lsr[(ph, 0)] + b.lsr[(ph, 1)] + b.lsr[(ph, 2)], max_relative = 1e-12);
            assert_relative_eq!(l[(ph, 4)], b.lsr[(ph, 3)], max_relative = 1e-12);
        }
    }

    #[test]
    fn equilibrium_at_rest() {
        let supply = Supply { amplitude: 0.0, load_torque: 0.0, ..Supply::default() };
        let m = Machine::from_parts(params(), FaultSpec::eccentric(EccentricityConfig::mixed(0.2, 0.1)), supply, SkewMode::Mutual).unwrap();
        let x = vec![0.0; m.state_len()];
        let mut dx = vec![1.0; m.state_len()];
        m.derivative(0.3, &x, &mut dx, SpeedMode::Free).unwrap();
        assert!(dx.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn supply_sequence() {
        let s = Supply::default();
        let v = s.voltages(0.0);
        assert_eq!(v[0], 0.0);
        assert_relative_eq!(v[1], 380.0 * (TAU / 3.0).sin(), max_relative = 1e-12);
        let v = s.voltages(0.0123);
        assert!(v.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn invalid_inputs() {
        let mut p = params();
        p.j = 0.0;
        assert!(p.validate().is_err());
        let f = FaultSpec { broken_bars: vec![41], ..FaultSpec::default() };
        assert!(f.validate(40).is_err());
        let f = FaultSpec { broken_bars: vec![2, 2], ..FaultSpec::default() };
        assert!(f.validate(40).is_err());
        let f = FaultSpec { broken_bars: vec![2, 9], bar_model: BarModel::Eliminate, ..FaultSpec::default() };
        assert!(matches!(
            Machine::from_parts(params(), f, Supply::default(), SkewMode::Mutual),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn locked_rotor_current_sum() {
        let run = |isolated: bool| {
            let supply = Supply { isolated_neutral: isolated, ..Supply::default() };
            let m = Machine::from_parts(params(), FaultSpec::healthy(), supply, SkewMode::Mutual).unwrap();
            let opts = SimOptions { t_end: 0.05, sample_rate: 2000.0, speed: SpeedMode::Locked(0.0), ..SimOptions::default() };
            let rec = simulate(&m, &opts).unwrap();
            let peak = rec.ia.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let worst = (0..rec.len()).map(|k| (rec.ia[k] + rec.ib[k] + rec.ic[k]).abs()).fold(0.0, f64::max);
            (peak, worst)
        };
        let (peak, worst) = run(true);
        assert!(peak > 10.0);
        assert!(worst < 1e-6 * peak, "{worst}");
        // With the star point connected the triplen space harmonics drive a
        // small zero-sequence current.
        let (peak, worst) = run(false);
        assert!(worst > 1e-5 * peak && worst < 1e-2 * peak, "{worst} of {peak}");
    }
}
