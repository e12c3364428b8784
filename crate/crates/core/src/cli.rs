//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::SimConfig;
use crate::error::Error;
use crate::sim::{self, Axis, Summary};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "beamsched", version, about = "Multi-beam OFDMA scheduling simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write trace.csv and summary.json.
    Run(Common),
    /// Run one simulation per value of an axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// K, t, tbar or SNR.
        #[arg(long)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Two-user average rates for several target splits.
    RateRegion {
        #[command(flatten)]
        common: Common,
        /// Target share of user 1; user 2 gets the rest.
        #[arg(long, value_delimiter = ',', required = true)]
        phi1: Vec<f64>,
    },
    /// Check oracles and invariants on small instances.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override a configuration value, e.g. `--set K=8` or `--set dual.beta0=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub slots: Option<u64>,
    /// Record wall-clock time in the summary.
    #[arg(long)]
    pub timing: bool,
}

impl Common {
    pub fn load(&self) -> crate::Result<SimConfig> {
        let base = match &self.config {
            Some(path) => SimConfig::load(path)?,
            None => SimConfig::default(),
        };
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("run.seed={seed}"));
        }
        if let Some(slots) = self.slots {
            overrides.push(format!("run.slots={slots}"));
        }
        base.with_overrides(&overrides)
    }
}

impl std::str::FromStr for Cli {
    type Err = clap::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Cli::try_parse_from(std::iter::once("beamsched").chain(s.split_whitespace()))
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::SearchSpace { .. } => EXIT_CONFIG,
        Error::Sweep { source, .. } => exit_code(source),
        _ => EXIT_USAGE,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> crate::Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn execute(cmd: Command) -> crate::Result<i32> {
    match cmd {
        Command::Run(common) => {
            let config = common.load()?;
            let start = Instant::now();
            let (resolved, log) = sim::run(&config)?;
            let mut summary = Summary::new(&resolved, &log);
            if common.timing {
                summary.elapsed_seconds = Some(start.elapsed().as_secs_f64());
            }
            sim::write_outputs(&common.out, &log, &summary)?;
            if let Some(rate) = summary.cumulative.mean_sum_rate {
                eprintln!("{} slots, mean sum rate {rate:.4} bits/slot", summary.slots);
            }
            Ok(EXIT_OK)
        }
        Command::Sweep { common, axis, values } => {
            let config = common.load()?;
            let points = sim::sweep(&config, axis, &values)?;
            let dir = &common.out;
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let csv_path = dir.join("sweep.csv");
            let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
            sim::write_sweep_csv(axis, &points, file).map_err(|e| Error::io(&csv_path, e))?;
            write_json(&dir.join("sweep.json"), &points)?;
            let best = points.iter().max_by(|a, b| {
                let rate = |p: &sim::SweepPoint| p.summary.cumulative.mean_sum_rate.unwrap_or(f64::NEG_INFINITY);
                rate(a).total_cmp(&rate(b))
            });
            if let Some(best) = best {
                eprintln!("best {axis} = {}", best.value);
            }
            Ok(EXIT_OK)
        }
        Command::RateRegion { common, phi1 } => {
            let config = common.load()?;
            if let Some(bad) = phi1.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
                return Err(Error::Config(format!("phi1 values must lie in (0, 1), got {bad}")));
            }
            let phis: Vec<[f64; 2]> = phi1.iter().map(|&p| [p, 1.0 - p]).collect();
            let points = sim::rate_region(&config, &phis)?;
            let dir = &common.out;
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join("rate_region.csv");
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, e.into()))?;
            let io = |e: csv::Error| Error::io(&path, e.into());
            w.write_record(["phi_1", "phi_2", "R_1", "R_2"]).map_err(io)?;
            for p in &points {
                w.write_record([p.phi[0], p.phi[1], p.rates[0], p.rates[1]].map(|x| x.to_string()))
                    .map_err(io)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            Ok(EXIT_OK)
        }
        Command::Verify { seed } => {
            let checks = verify::run_suite(seed);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_VERIFY })
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
