//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::dynamics::BarModel;
use crate::error::{Error, Result};
use crate::inductance::{Block, SkewMode};
use crate::pipeline::{self, SweepAxis};

pub const PROFILE_HEADER: &str = "# wfsim inductance-profile v1";

#[derive(Debug, Parser)]
#[command(name = "wfsim", version, about = "Induction motor fault simulation and current-signature analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configuration and write its artifacts.
    Run(RunArgs),
    /// Run one simulation per value of a fault parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BarModelArg {
    Scale,
    Eliminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    #[value(name = "delta_s")]
    DeltaS,
    #[value(name = "delta_d")]
    DeltaD,
    #[value(name = "broken_bars")]
    BrokenBars,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration; the built-in 40-bar reference profile when omitted.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "wfsim-out")]
    pub out: PathBuf,
    /// Disable the skew correction.
    #[arg(long)]
    pub no_skew: bool,
    /// Broken-bar representation.
    #[arg(long, value_enum)]
    pub bar_model: Option<BarModelArg>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Write one inductance entry over a θ grid instead of simulating.
    #[arg(long, num_args = 3, value_names = ["BLOCK", "I", "J"])]
    pub inductance_profile: Option<Vec<String>>,
    /// Grid points for --inductance-profile.
    #[arg(long, default_value_t = 720)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub values: Vec<f64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

impl Common {
    pub fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::reference(),
        };
        if self.no_skew {
            cfg.model.skew = SkewMode::Off;
        }
        if let Some(m) = self.bar_model {
            cfg.fault.bar_model = match m {
                BarModelArg::Scale => BarModel::Scale,
                BarModelArg::Eliminate => BarModel::Eliminate,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_index(s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Config(format!("{what} must be a positive integer, got `{s}`")))
}

/// Writes one inductance entry over `points` angles in [0, 2π).
pub fn write_inductance_profile(cfg: &RunConfig, block: Block, i: usize, j: usize, points: usize, path: &Path) -> Result<()> {
    let model = cfg.motor.inductance_model(cfg.model.skew, cfg.model.mutual)?;
    let rows = model.profile(&cfg.fault.eccentricity, block, i, j, points)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{PROFILE_HEADER} block={block:?} i={i} j={j}")?;
    writeln!(w, "theta_rad,value_H")?;
    for (th, v) in rows {
        writeln!(w, "{th:e},{v:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.common.config()?;
            std::fs::create_dir_all(&args.common.out)?;
            if let Some(p) = &args.inductance_profile {
                let block: Block = p[0].parse()?;
                let i = parse_index(&p[1], "I")?;
                let j = parse_index(&p[2], "J")?;
                let path = args.common.out.join("inductance_profile.csv");
                write_inductance_profile(&cfg, block, i, j, args.points, &path)?;
                eprintln!("wrote {}", path.display());
                return Ok(());
            }
            let outcome = pipeline::run_case(&cfg)?;
            pipeline::write_artifacts(&outcome, &args.common.out)?;
            let d = &outcome.manifest.derived;
            eprintln!(
                "slip {:.5}  mean torque {:.3} N·m  settle {:.3} s  -> {}",
                d.slip,
                d.metrics.mean_torque,
                d.metrics.settle_time,
                args.common.out.display()
            );
            Ok(())
        }
        Command::Sweep(args) => {
            let cfg = args.common.config()?;
            let axis = match args.axis {
                AxisArg::DeltaS => SweepAxis::DeltaS,
                AxisArg::DeltaD => SweepAxis::DeltaD,
                AxisArg::BrokenBars => SweepAxis::BrokenBars,
            };
            let m = pipeline::sweep(&cfg, axis, &args.values, args.jobs, Some(&args.common.out))?;
            for p in &m.points {
                match (&p.error, p.slip) {
                    (Some(e), _) => eprintln!("{} = {}: failed: {e}", axis.name(), p.value),
                    (None, Some(s)) => eprintln!("{} = {}: slip {s:.5}", axis.name(), p.value),
                    _ => {}
                }
            }
            let failed = m.points.iter().filter(|p| p.error.is_some()).count();
            if failed == m.points.len() {
                return Err(Error::Config(format!("all {failed} sweep points failed")));
            }
            Ok(())
        }
    }
}
