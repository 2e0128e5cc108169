//! Stator-current spectra and fault-harmonic bookkeeping.

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::record::SimulationRecord;

/// Magnitudes below this are clamped before taking the logarithm.
pub const DB_FLOOR_LINEAR: f64 = 1e-12;

/// Harmonic family of a predicted line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `(1 ± (1-s)/p) f0`.
    Ecc0,
    /// Principal slot harmonics `((1-s)R/p ± 1) f0`.
    Psh,
    /// `((R ± 1)(1-s)/p ± 1) f0`.
    Ecc1,
    /// `(1 ± 2s) f0`.
    BrokenBar,
    /// Any other member of the general eccentricity family.
    General,
}

/// A predicted line with a sign label such as `"-"` or `"+-"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub family: Family,
    pub label: String,
    pub hz: f64,
}

/// Fault frequencies for supply `f0`, slip `s`, `p` pole pairs and `r` bars.
/// The general family `[(kR ± n_d)(1-s)/p ± η] f0` is listed for
/// `k = 0..=k_max`, `n_d = 0..=1`, `η = 1..=eta_max`, odd.
pub fn fault_harmonics(f0: f64, s: f64, p: u32, r: usize, k_max: u32, eta_max: u32) -> Vec<Harmonic> {
    let p = p as f64;
    let r = r as f64;
    let m = (1.0 - s) / p;
    let mut out = Vec::new();
    let mut push = |family, label: &str, hz: f64| {
        if hz > 0.0 && hz.is_finite() {
            out.push(Harmonic { family, label: label.to_string(), hz });
        }
    };
    push(Family::Ecc0, "-", (1.0 - m) * f0);
    push(Family::Ecc0, "+", (1.0 + m) * f0);
    push(Family::Psh, "-", (m * r - 1.0) * f0);
    push(Family::Psh, "+", (m * r + 1.0) * f0);
    push(Family::Ecc1, "--", ((r - 1.0) * m - 1.0) * f0);
    push(Family::Ecc1, "+-", ((r + 1.0) * m - 1.0) * f0);
    push(Family::Ecc1, "-+", ((r - 1.0) * m + 1.0) * f0);
    push(Family::Ecc1, "++", ((r + 1.0) * m + 1.0) * f0);
    push(Family::BrokenBar, "-", (1.0 - 2.0 * s) * f0);
    push(Family::BrokenBar, "+", (1.0 + 2.0 * s) * f0);
    for k in 0..=k_max {
        for nd in 0..=1 {
            for eta in (1..=eta_max).step_by(2) {
                let kr = k as f64 * r;
                for (sn, a) in [("+", kr + nd as f64), ("-", kr - nd as f64)] {
                    for (se, e) in [("+", eta as f64), ("-", -(eta as f64))] {
                        let hz = (a * m + e) * f0;
                        push(Family::General, &format!("k{k}n{nd}{sn}e{eta}{se}"), hz.abs());
                    }
                }
            }
        }
    }
    let mut seen: Vec<Harmonic> = Vec::new();
    for h in out {
        let dup = seen.iter().any(|x| (x.hz - h.hz).abs() < 1e-9 && x.family <= h.family);
        if !dup {
            seen.push(h);
        }
    }
    seen
}

/// Amplitude spectrum of one current trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub f: Vec<f64>,
    /// Single-sided amplitude `2|X_k|/N`.
    pub mag: Vec<f64>,
    pub mag_db: Vec<f64>,
    pub resolution: f64,
    pub sample_rate: f64,
    pub labeled_peaks: Vec<Peak>,
}

/// Measured line near a predicted frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub family: Family,
    pub label: String,
    pub predicted_hz: f64,
    pub measured_hz: f64,
    pub mag_db: f64,
    /// Height above the surrounding floor (dB).
    pub prominence_db: f64,
    pub present: bool,
}

/// Options for [`compute_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Apply a Hann window (amplitude-corrected).
    pub hann: bool,
}

/// Amplitude spectrum of `x` sampled at `sample_rate`. The length must be a
/// power of two spanning at least 20 periods of `f0`.
pub fn compute_spectrum(x: &[f64], sample_rate: f64, f0: f64, opts: SpectrumOptions) -> Result<SpectrumRecord> {
    let n = x.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::WindowTooShort(format!("length {n} is not a power of two >= 2")));
    }
    let span = n as f64 / sample_rate;
    if span * f0 < 20.0 {
        return Err(Error::WindowTooShort(format!(
            "{span:.4} s covers {:.1} periods of {f0} Hz; at least 20 needed",
            span * f0
        )));
    }
    let (window, gain): (Vec<f64>, f64) = if opts.hann {
        let w: Vec<f64> = (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos()).collect();
        (w, 0.5)
    } else {
        (vec![1.0; n], 1.0)
    };
    let mut buf: Vec<Complex64> = x.iter().zip(&window).map(|(v, w)| Complex64::new(v * w, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let resolution = sample_rate / n as f64;
    let f = (0..=half).map(|k| k as f64 * resolution).collect();
    let mag: Vec<f64> = (0..=half)
        .map(|k| {
            let scale = if k == 0 || k == half { 1.0 } else { 2.0 };
            scale * buf[k].norm() / (n as f64 * gain)
        })
        .collect();
    let mag_db = mag.iter().map(|m| to_db(*m)).collect();
    Ok(SpectrumRecord {
        f,
        mag,
        mag_db,
        resolution,
        sample_rate,
        labeled_peaks: Vec::new(),
    })
}

pub fn to_db(m: f64) -> f64 {
    20.0 * m.max(DB_FLOOR_LINEAR).log10()
}

/// Prominence a line needs over its surroundings to count as present (dB).
pub const PRESENCE_DB: f64 = 6.0;

impl SpectrumRecord {
    pub fn bin_of(&self, hz: f64) -> usize {
        ((hz / self.resolution).round() as usize).min(self.f.len() - 1)
    }

    /// Median level of the bins `4..=20` away from `centre` on both sides.
    fn floor_db(&self, centre: usize) -> f64 {
        let mut v: Vec<f64> = (4..=20)
            .flat_map(|d| [centre.checked_sub(d), Some(centre + d)])
            .flatten()
            .filter(|&k| k > 0 && k < self.f.len())
            .map(|k| self.mag_db[k])
            .collect();
        if v.is_empty() {
            return to_db(0.0);
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }

    /// Largest local maximum within `tolerance_bins` of each prediction. A
    /// line counts as present when it is a local maximum standing at least
    /// [`PRESENCE_DB`] above the local floor; absent lines report the floor.
    pub fn measure_family(&self, predicted: &[Harmonic], tolerance_bins: usize) -> Vec<Peak> {
        predicted
            .iter()
            .map(|h| {
                let c = self.bin_of(h.hz);
                let lo = c.saturating_sub(tolerance_bins).max(1);
                let hi = (c + tolerance_bins).min(self.f.len() - 2);
                let floor = self.floor_db(c);
                let best = (lo..=hi)
                    .filter(|&k| self.mag[k] >= self.mag[k - 1] && self.mag[k] >= self.mag[k + 1])
                    .max_by(|&a, &b| self.mag[a].partial_cmp(&self.mag[b]).unwrap());
                match best {
                    Some(k) if self.mag_db[k] - floor >= PRESENCE_DB => Peak {
                        family: h.family,
                        label: h.label.clone(),
                        predicted_hz: h.hz,
                        measured_hz: self.f[k],
                        mag_db: self.mag_db[k],
                        prominence_db: self.mag_db[k] - floor,
                        present: true,
                    },
                    other => Peak {
                        family: h.family,
                        label: h.label.clone(),
                        predicted_hz: h.hz,
                        measured_hz: other.map(|k| self.f[k]).unwrap_or(h.hz),
                        mag_db: floor,
                        prominence_db: other.map(|k| self.mag_db[k] - floor).unwrap_or(0.0),
                        present: false,
                    },
                }
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# wfsim spectrum v1 resolution_hz={}", self.resolution)?;
        writeln!(w, "f_hz,mag_db")?;
        for (f, m) in self.f.iter().zip(&self.mag_db) {
            writeln!(w, "{f:e},{m:e}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Steady-state analysis window of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyWindow {
    pub start: usize,
    pub len: usize,
    /// Speed standard deviation over the window relative to its mean.
    pub speed_spread: f64,
    /// Whether the spread is below 0.1%.
    pub steady: bool,
}

/// Largest power-of-two block ending at the last sample and lying inside
/// the last half of the run.
pub fn steady_window(record: &SimulationRecord) -> Result<SteadyWindow> {
    let half = record.len() / 2;
    if half < 2 {
        return Err(Error::WindowTooShort(format!("{} samples", record.len())));
    }
    let len = 1usize << (usize::BITS - 1 - half.leading_zeros());
    let start = record.len() - len;
    let w = &record.omega[start..];
    let mean = w.iter().sum::<f64>() / len as f64;
    let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len as f64).sqrt();
    let spread = if mean != 0.0 { sd / mean.abs() } else { f64::INFINITY };
    Ok(SteadyWindow {
        start,
        len,
        speed_spread: spread,
        steady: spread < 1e-3,
    })
}

/// Sum of squared samples versus the matching sum over the unwindowed
/// spectrum; equal up to roundoff.
pub fn parseval_sides(x: &[f64], spec: &SpectrumRecord) -> (f64, f64) {
    let n = x.len() as f64;
    let time: f64 = x.iter().map(|v| v * v).sum();
    let last = spec.mag.len() - 1;
    let freq: f64 = spec
        .mag
        .iter()
        .enumerate()
        .map(|(k, m)| if k == 0 || k == last { n * m * m } else { n * m * m / 2.0 })
        .sum();
    (time, freq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tone(n: usize, fs: f64, parts: &[(f64, f64)]) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = k as f64 / fs;
                parts.iter().map(|(a, f)| a * (2.0 * PI * f * t).sin()).sum()
            })
            .collect()
    }

    #[test]
    fn reference_frequencies() {
        let h = fault_harmonics(50.0, 0.015, 2, 40, 1, 1);
        let get = |fam, label: &str| h.iter().find(|x| x.family == fam && x.label == label).unwrap().hz;
        assert_relative_eq!(get(Family::Ecc0, "-"), 25.375, epsilon = 1e-9);
        assert_relative_eq!(get(Family::Ecc0, "+"), 74.625, epsilon = 1e-9);
        assert_relative_eq!(get(Family::Psh, "-"), 935.0, epsilon = 1e-9);
        assert_relative_eq!(get(Family::Psh, "+"), 1035.0, epsilon = 1e-9);
        assert!((get(Family::Ecc1, "--") - 910.37).abs() < 0.5);
        assert!((get(Family::Ecc1, "+-") - 959.62).abs() < 0.5);
        assert!((get(Family::Ecc1, "-+") - 1010.37).abs() < 0.5);
        assert!((get(Family::Ecc1, "++") - 1059.62).abs() < 0.5);
        assert_relative_eq!(get(Family::BrokenBar, "-"), 48.5, epsilon = 1e-9);
        assert_relative_eq!(get(Family::BrokenBar, "+"), 51.5, epsilon = 1e-9);
        // Named lines win over the general listing of the same frequency.
        assert!(!h.iter().any(|x| x.family == Family::General && (x.hz - 935.0).abs() < 1e-9));
    }

    #[test]
    fn zero_slip_is_finite() {
        let h = fault_harmonics(50.0, 0.0, 2, 40, 2, 3);
        assert!(h.iter().all(|x| x.hz.is_finite() && x.hz > 0.0));
        assert!(h.iter().any(|x| x.family == Family::BrokenBar && x.hz == 50.0));
    }

    #[test]
    fn unit_sinusoid_is_zero_db() {
        let x = tone(4096, 3000.0, &[(1.0, 50.0)]);
        let s = compute_spectrum(&x, 3000.0, 50.0, SpectrumOptions::default()).unwrap();
        let k = (1..s.mag.len()).max_by(|&a, &b| s.mag[a].partial_cmp(&s.mag[b]).unwrap()).unwrap();
        assert_eq!(k, s.bin_of(50.0));
        // 50 Hz sits 0.27 bin off the grid here, so the rectangular window
        // loses about 1 dB.
        assert!(s.mag_db[k].abs() < 1.5, "{}", s.mag_db[k]);
        // Exactly on a bin the level is exact.
        let x = tone(4096, 3200.0, &[(1.0, 50.0)]);
        let s = compute_spectrum(&x, 3200.0, 50.0, SpectrumOptions::default()).unwrap();
        assert!(s.mag_db[s.bin_of(50.0)].abs() < 1e-9);
    }

    #[test]
    fn two_tone_ratio() {
        // 74.6 Hz is off-bin; the Hann window keeps the scalloping loss small.
        let x = tone(8192, 3200.0, &[(1.0, 50.0), (0.01, 74.6)]);
        let s = compute_spectrum(&x, 3200.0, 50.0, SpectrumOptions { hann: true }).unwrap();
        let p = s.measure_family(
            &[
                Harmonic { family: Family::Ecc0, label: "f".into(), hz: 50.0 },
                Harmonic { family: Family::Ecc0, label: "g".into(), hz: 74.6 },
            ],
            2,
        );
        assert!(p.iter().all(|x| x.present));
        let ratio = p[1].mag_db - p[0].mag_db;
        assert!((ratio + 40.0).abs() < 0.5, "{ratio}");
        let x = tone(8192, 3200.0, &[(1.0, 50.0), (0.01, 75.0)]);
        let s = compute_spectrum(&x, 3200.0, 50.0, SpectrumOptions::default()).unwrap();
        assert_relative_eq!(s.mag_db[s.bin_of(75.0)] - s.mag_db[s.bin_of(50.0)], -40.0, epsilon = 1e-6);
    }

    #[test]
    fn absent_line_reports_floor() {
        let x = tone(4096, 3200.0, &[(1.0, 50.0), (1e-7, 300.0)]);
        let s = compute_spectrum(&x, 3200.0, 50.0, SpectrumOptions::default()).unwrap();
        let p = s.measure_family(&[Harmonic { family: Family::Ecc0, label: "x".into(), hz: 600.0 }], 2);
        assert!(!p[0].present);
        assert!(p[0].mag_db < -150.0);
    }

    #[test]
    fn short_windows_rejected() {
        assert!(compute_spectrum(&[0.0; 1000], 3200.0, 50.0, SpectrumOptions::default()).is_err());
        assert!(compute_spectrum(&[0.0; 512], 3200.0, 50.0, SpectrumOptions::default()).is_err());
        assert!(compute_spectrum(&[0.0; 2048], 3200.0, 50.0, SpectrumOptions::default()).is_ok());
    }

    #[test]
    fn parseval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..4096).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = compute_spectrum(&x, 3200.0, 50.0, SpectrumOptions::default()).unwrap();
        let (a, b) = parseval_sides(&x, &s);
        assert_relative_eq!(a, b, max_relative = 1e-9);
    }

    #[test]
    fn window_selection() {
        let mut r = SimulationRecord::with_capacity(100.0, 0, 0);
        for k in 0..1000 {
            r.push(k as f64 / 100.0, &[0.0, 0.0, 0.0, 150.0 + if k < 400 { 5.0 } else { 0.0 }, 0.0], 0.0);
        }
        let w = steady_window(&r).unwrap();
        assert_eq!((w.start, w.len), (744, 256));
        assert!(w.steady);
    }
}
