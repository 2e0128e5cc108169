//! Uniformly sampled simulation output and its on-disk formats.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::Stats;

pub const CSV_HEADER: &str = "# wfsim timeseries v1";
pub const CSV_COLUMNS: &str = "t,ia,ib,ic,omega,torque,theta";
const MAGIC: &[u8; 4] = b"WFSR";
const BINARY_VERSION: u32 = 1;

/// Trajectory resampled at a fixed rate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationRecord {
    pub sample_rate: f64,
    pub rotor_circuits: usize,
    pub t: Vec<f64>,
    pub ia: Vec<f64>,
    pub ib: Vec<f64>,
    pub ic: Vec<f64>,
    pub omega: Vec<f64>,
    pub torque: Vec<f64>,
    pub theta: Vec<f64>,
    /// Rotor circuit currents per sample; not part of the file formats.
    pub rotor: Vec<Vec<f64>>,
    pub stats: Stats,
}

impl SimulationRecord {
    pub fn with_capacity(sample_rate: f64, rotor_circuits: usize, n: usize) -> Self {
        Self {
            sample_rate,
            rotor_circuits,
            t: Vec::with_capacity(n),
            ia: Vec::with_capacity(n),
            ib: Vec::with_capacity(n),
            ic: Vec::with_capacity(n),
            omega: Vec::with_capacity(n),
            torque: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
            rotor: Vec::with_capacity(n),
            stats: Stats::default(),
        }
    }

    /// Appends one sample of a `[i_s, i_r, ω, θ]` state.
    pub fn push(&mut self, t: f64, state: &[f64], torque: f64) {
        let k = 3 + self.rotor_circuits;
        self.t.push(t);
        self.ia.push(state[0]);
        self.ib.push(state[1]);
        self.ic.push(state[2]);
        self.rotor.push(state[3..k].to_vec());
        self.omega.push(state[k]);
        self.theta.push(state[k + 1]);
        self.torque.push(torque);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Full state vector at sample `k`.
    pub fn state(&self, k: usize) -> Vec<f64> {
        let mut s = vec![self.ia[k], self.ib[k], self.ic[k]];
        s.extend_from_slice(&self.rotor[k]);
        s.push(self.omega[k]);
        s.push(self.theta[k]);
        s
    }

    fn columns(&self) -> [&Vec<f64>; 7] {
        [&self.t, &self.ia, &self.ib, &self.ic, &self.omega, &self.torque, &self.theta]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{CSV_HEADER} sample_rate={}", self.sample_rate)?;
        writeln!(w, "{CSV_COLUMNS}")?;
        let cols = self.columns();
        for k in 0..self.len() {
            let row: Vec<String> = cols.iter().map(|c| format!("{:e}", c[k])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads the CSV columns back; rotor currents are not stored there.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let r = BufReader::new(std::fs::File::open(path)?);
        let mut lines = r.lines();
        let head = lines.next().transpose()?.unwrap_or_default();
        let rate = head
            .strip_prefix(CSV_HEADER)
            .and_then(|rest| rest.trim().strip_prefix("sample_rate="))
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("not a timeseries v1 file: {}", path.display())))?;
        if lines.next().transpose()?.as_deref() != Some(CSV_COLUMNS) {
            return Err(Error::Config(format!("unexpected columns in {}", path.display())));
        }
        let mut rec = Self::with_capacity(rate, 0, 0);
        for (n, line) in lines.enumerate() {
            let line = line?;
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Config(format!("line {}: {e}", n + 3)))?;
            if vals.len() != 7 {
                return Err(Error::Config(format!("line {}: expected 7 columns", n + 3)));
            }
            rec.t.push(vals[0]);
            rec.ia.push(vals[1]);
            rec.ib.push(vals[2]);
            rec.ic.push(vals[3]);
            rec.omega.push(vals[4]);
            rec.torque.push(vals[5]);
            rec.theta.push(vals[6]);
        }
        Ok(rec)
    }

    /// Compact little-endian form: magic, version, sample count, rate, then
    /// the seven columns one after another.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&BINARY_VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.sample_rate.to_le_bytes())?;
        for c in self.columns() {
            for v in c {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Config("bad magic in binary record".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != BINARY_VERSION {
            return Err(Error::Config(format!("unsupported binary record version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let rate = f64::from_le_bytes(b8);
        let mut read_col = |r: &mut R| -> Result<Vec<f64>> {
            (0..n)
                .map(|_| {
                    r.read_exact(&mut b8)?;
                    Ok(f64::from_le_bytes(b8))
                })
                .collect()
        };
        let mut rec = Self::with_capacity(rate, 0, 0);
        rec.t = read_col(r)?;
        rec.ia = read_col(r)?;
        rec.ib = read_col(r)?;
        rec.ic = read_col(r)?;
        rec.omega = read_col(r)?;
        rec.torque = read_col(r)?;
        rec.theta = read_col(r)?;
        Ok(rec)
    }

    /// Index range of the last `fraction` of the run.
    pub fn tail(&self, fraction: f64) -> std::ops::Range<usize> {
        let n = self.len();
        let start = n - ((n as f64 * fraction).round() as usize).min(n);
        start..n
    }

    /// Speed summary with the steady level taken over the last `fraction`.
    pub fn speed_metrics(&self, fraction: f64, band: f64) -> SpeedMetrics {
        let r = self.tail(fraction);
        let w = &self.omega[r.clone()];
        let mean = w.iter().sum::<f64>() / w.len().max(1) as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len().max(1) as f64;
        let torque = self.torque[r].iter().sum::<f64>() / w.len().max(1) as f64;
        let first_overshoot = self.omega.iter().position(|&v| v > mean).map(|k| self.t[k]);
        let settle = self
            .omega
            .iter()
            .rposition(|&v| (v - mean).abs() > band * mean.abs())
            .map(|k| self.t[(k + 1).min(self.len() - 1)])
            .unwrap_or(0.0);
        SpeedMetrics {
            mean_speed: mean,
            speed_std: var.sqrt(),
            mean_torque: torque,
            first_overshoot,
            settle_time: settle,
        }
    }
}

/// Settling behaviour of the speed trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedMetrics {
    /// Mean speed over the steady window (rad/s).
    pub mean_speed: f64,
    pub speed_std: f64,
    /// Mean electromagnetic torque over the steady window (N·m).
    pub mean_torque: f64,
    /// First time the speed exceeds its steady mean (s).
    pub first_overshoot: Option<f64>,
    /// Time after which the speed stays inside the band around the mean (s).
    pub settle_time: f64,
}
