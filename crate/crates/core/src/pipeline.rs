//! Single runs and sweeps: simulate, analyse the settled current, and write
//! the artifacts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dynamics::{simulate, BarModel, FaultSpec, Machine};
use crate::error::{Error, Result};
use crate::ode::Stats;
use crate::record::{SimulationRecord, SpeedMetrics};
use crate::spectrum::{
    compute_spectrum, fault_harmonics, steady_window, Family, Peak, SpectrumOptions, SpectrumRecord, SteadyWindow,
};

pub const MANIFEST_FORMAT: &str = "wfsim manifest v1";
pub const SWEEP_FORMAT: &str = "wfsim sweep v1";

/// Relative speed band used for the settle time.
pub const SETTLE_BAND: f64 = 0.02;

/// Families reported in the peaks file.
pub const REPORTED: [Family; 4] = [Family::Ecc0, Family::Psh, Family::Ecc1, Family::BrokenBar];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub load_torque: f64,
    pub slip: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationStatus {
    NotRequested,
    WithinTolerance,
    Adjusted,
    NotConverged,
    /// Faulted runs keep the configured load so that faults compare at equal load.
    SkippedFaulted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub status: CalibrationStatus,
    pub target_slip: Option<f64>,
    pub tolerance: f64,
    pub steps: Vec<CalibrationStep>,
}

/// Quantities measured from a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub slip: f64,
    pub rotor_circuits: usize,
    pub metrics: SpeedMetrics,
    pub steady_window: SteadyWindow,
    pub window_start_s: f64,
    pub resolution_hz: f64,
    pub phase_rms: [f64; 3],
    pub stats: Stats,
    pub calibration: CalibrationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    /// Effective configuration, including defaults and any calibrated load.
    pub config: RunConfig,
    pub derived: Derived,
    pub peaks: Vec<Peak>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub record: SimulationRecord,
    pub spectrum: SpectrumRecord,
}

pub fn build_machine(cfg: &RunConfig) -> Result<Machine> {
    let model = cfg.motor.inductance_model(cfg.model.skew, cfg.model.mutual)?;
    Machine::new(cfg.motor.clone(), cfg.fault.clone(), cfg.supply, model)
}

/// Measured slip over the steady window.
fn measured_slip(cfg: &RunConfig, record: &SimulationRecord, window: &SteadyWindow) -> f64 {
    let w = &record.omega[window.start..window.start + window.len];
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    1.0 - cfg.motor.p as f64 * mean / cfg.supply.omega()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Predicted fault lines of the reported families at slip `s`.
pub fn predicted_lines(cfg: &RunConfig, s: f64) -> Vec<crate::spectrum::Harmonic> {
    fault_harmonics(cfg.supply.frequency, s, cfg.motor.p, cfg.motor.n, 0, 1)
        .into_iter()
        .filter(|h| REPORTED.contains(&h.family))
        .collect()
}

/// Simulates once and runs the calibration loop when requested.
fn simulate_calibrated(cfg: &mut RunConfig) -> Result<(SimulationRecord, SteadyWindow, f64, CalibrationReport)> {
    let cal = cfg.calibration;
    let mut report = CalibrationReport {
        status: CalibrationStatus::NotRequested,
        target_slip: cal.target_slip,
        tolerance: cal.tolerance,
        steps: Vec::new(),
    };
    let healthy = cfg.fault.eccentricity.is_healthy() && cfg.fault.broken_bars.is_empty();
    loop {
        let machine = build_machine(cfg)?;
        let record = simulate(&machine, &cfg.sim)?;
        let window = steady_window(&record)?;
        let slip = measured_slip(cfg, &record, &window);
        report.steps.push(CalibrationStep {
            load_torque: cfg.supply.load_torque,
            slip,
        });
        let target = match cal.target_slip {
            None => return Ok((record, window, slip, report)),
            Some(_) if !healthy => {
                report.status = CalibrationStatus::SkippedFaulted;
                return Ok((record, window, slip, report));
            }
            Some(t) => t,
        };
        if (slip - target).abs() <= cal.tolerance {
            report.status = if report.steps.len() == 1 {
                CalibrationStatus::WithinTolerance
            } else {
                CalibrationStatus::Adjusted
            };
            return Ok((record, window, slip, report));
        }
        if report.steps.len() > cal.max_iterations || slip <= 0.0 {
            report.status = CalibrationStatus::NotConverged;
            return Ok((record, window, slip, report));
        }
        cfg.supply.load_torque *= target / slip;
    }
}

/// Spectrum of phase `a` over a window, with the reported lines measured at slip `s`.
pub fn analyse(cfg: &RunConfig, record: &SimulationRecord, window: &SteadyWindow, s: f64) -> Result<SpectrumRecord> {
    let x = &record.ia[window.start..window.start + window.len];
    let mut spec = compute_spectrum(
        x,
        record.sample_rate,
        cfg.supply.frequency,
        SpectrumOptions { hann: cfg.spectrum.hann },
    )?;
    spec.labeled_peaks = spec.measure_family(&predicted_lines(cfg, s), cfg.spectrum.tolerance_bins);
    Ok(spec)
}

/// Runs one configuration end to end without touching the disk.
pub fn run_case(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    let (record, window, slip, calibration) = simulate_calibrated(&mut cfg)?;
    let spectrum = analyse(&cfg, &record, &window, slip)?;
    let fraction = window.len as f64 / record.len() as f64;
    let r = window.start..window.start + window.len;
    let derived = Derived {
        slip,
        rotor_circuits: record.rotor_circuits,
        metrics: record.speed_metrics(fraction, SETTLE_BAND),
        steady_window: window,
        window_start_s: record.t[window.start],
        resolution_hz: spectrum.resolution,
        phase_rms: [rms(&record.ia[r.clone()]), rms(&record.ib[r.clone()]), rms(&record.ic[r])],
        stats: record.stats,
        calibration,
    };
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        peaks: spectrum.labeled_peaks.clone(),
        config: cfg,
        derived,
    };
    Ok(RunOutcome {
        manifest,
        record,
        spectrum,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Peak entry of the peaks file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub family: Family,
    pub label: String,
    pub predicted_hz: f64,
    pub measured_hz: f64,
    pub mag_db: f64,
    pub present: bool,
}

impl From<&Peak> for PeakReport {
    fn from(p: &Peak) -> Self {
        Self {
            family: p.family,
            label: p.label.clone(),
            predicted_hz: p.predicted_hz,
            measured_hz: p.measured_hz,
            mag_db: p.mag_db,
            present: p.present,
        }
    }
}

/// Writes the timeseries, spectrum, peaks and manifest files into `dir`.
pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let out = outcome.manifest.config.output;
    if out.timeseries_csv {
        outcome.record.write_csv(&dir.join("timeseries.csv"))?;
    }
    if out.timeseries_binary {
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("timeseries.bin"))?);
        outcome.record.write_binary(&mut w)?;
        std::io::Write::flush(&mut w)?;
    }
    outcome.spectrum.write_csv(&dir.join("spectrum.csv"))?;
    let peaks: Vec<PeakReport> = outcome.spectrum.labeled_peaks.iter().map(PeakReport::from).collect();
    write_json(&dir.join("peaks.json"), &peaks)?;
    write_json(&dir.join("manifest.json"), &outcome.manifest)?;
    Ok(())
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    DeltaS,
    DeltaD,
    BrokenBars,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta_s" => Ok(Self::DeltaS),
            "delta_d" => Ok(Self::DeltaD),
            "broken_bars" => Ok(Self::BrokenBars),
            other => Err(Error::Config(format!(
                "unknown sweep axis `{other}` (delta_s, delta_d, broken_bars)"
            ))),
        }
    }
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::DeltaS => "delta_s",
            Self::DeltaD => "delta_d",
            Self::BrokenBars => "broken_bars",
        }
    }

    /// Configuration of one sweep point.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut cfg = base.clone();
        match self {
            Self::DeltaS => cfg.fault.eccentricity.delta_s = value,
            Self::DeltaD => cfg.fault.eccentricity.delta_d = value,
            Self::BrokenBars => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(Error::InvalidParameter {
                        field: "broken_bars".into(),
                        reason: format!("sweep value must be a whole number, got {value}"),
                    });
                }
                let model = cfg.fault.bar_model;
                let factor = cfg.fault.broken_factor;
                cfg.fault = FaultSpec {
                    eccentricity: cfg.fault.eccentricity,
                    broken_factor: factor,
                    ..FaultSpec::broken(value as usize, model)
                };
                if value == 0.0 {
                    cfg.fault.bar_model = BarModel::Scale;
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One row of a sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub directory: String,
    pub error: Option<String>,
    pub slip: Option<f64>,
    pub first_overshoot: Option<f64>,
    pub settle_time: Option<f64>,
    pub mean_torque: Option<f64>,
    pub peaks: Vec<PeakReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub format: String,
    pub axis: SweepAxis,
    pub base: RunConfig,
    pub points: Vec<SweepPoint>,
}

impl SweepPoint {
    fn failed(value: f64, directory: String, e: &Error) -> Self {
        Self {
            value,
            directory,
            error: Some(e.to_string()),
            slip: None,
            first_overshoot: None,
            settle_time: None,
            mean_torque: None,
            peaks: Vec::new(),
        }
    }

    fn from_outcome(value: f64, directory: String, o: &RunOutcome) -> Self {
        let d = &o.manifest.derived;
        Self {
            value,
            directory,
            error: None,
            slip: Some(d.slip),
            first_overshoot: d.metrics.first_overshoot,
            settle_time: Some(d.metrics.settle_time),
            mean_torque: Some(d.metrics.mean_torque),
            peaks: o.manifest.peaks.iter().map(PeakReport::from).collect(),
        }
    }
}

/// Runs every point of a sweep on `jobs` threads. Points are independent;
/// a failing point is reported in its row and the others continue. When
/// `out` is given each point writes its artifacts into its own directory
/// and the summary goes to `sweep.json`.
pub fn sweep(base: &RunConfig, axis: SweepAxis, values: &[f64], jobs: usize, out: Option<&Path>) -> Result<SweepManifest> {
    use rayon::prelude::*;
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let points: Vec<SweepPoint> = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(k, &v)| {
                let directory = format!("point-{k:03}");
                let result = axis.apply(base, v).and_then(|cfg| run_case(&cfg)).and_then(|o| {
                    if let Some(dir) = out {
                        write_artifacts(&o, &dir.join(&directory))?;
                    }
                    Ok(o)
                });
                match result {
                    Ok(o) => SweepPoint::from_outcome(v, directory, &o),
                    Err(e) => SweepPoint::failed(v, directory, &e),
                }
            })
            .collect()
    });
    let manifest = SweepManifest {
        format: SWEEP_FORMAT.into(),
        axis,
        base: base.clone(),
        points,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("sweep.json"), &manifest)?;
    }
    Ok(manifest)
}
