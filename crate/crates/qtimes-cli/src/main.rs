//! Command-line front end for the time-distribution sweeps.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 validation failure,
//! 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qtimes::experiments::{
    run_current_profile, run_fig2, run_rabi, run_validate, run_zero_crossing, ExperimentConfig,
};
use qtimes::Error;

#[derive(Parser)]
#[command(
    name = "qtimes",
    about = "Time-of-flow and stroboscopic time distributions for Rabi dynamics and barrier tunneling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Plain-text config file: `key = value` lines, `#` comments
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for CSV tables and plot scripts
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Override one config key (repeatable), e.g. --set sigma_k=0.1
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Comma list of pipelines to run: spectral,time,grid
    #[arg(long)]
    pipelines: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Mean flow/occupation times versus barrier width, with the
    /// above-barrier fraction column
    Fig2(CommonOpts),
    /// First sign change of the entrance current across a width sweep
    ZeroCrossing(CommonOpts),
    /// Dense entrance-current trace at one width
    CurrentProfile {
        #[command(flatten)]
        common: CommonOpts,
        /// Barrier width for the trace
        #[arg(long, default_value_t = 5.0)]
        l: f64,
    },
    /// Rabi model: numeric pipeline against the closed forms
    Rabi(CommonOpts),
    /// Cross-pipeline oracle suite; nonzero exit on any failed check
    Validate(CommonOpts),
}

fn load_config(opts: &CommonOpts) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &opts.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    for item in &opts.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{item}'")))?;
        cfg.apply(key.trim(), value.trim())?;
    }
    if let Some(p) = &opts.pipelines {
        cfg.apply("pipelines", p)?;
    }
    Ok(cfg)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParams(_) => 1,
        Error::ValidationFailed(_) => 2,
        _ => 3,
    }
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Fig2(opts) => {
            let cfg = load_config(&opts)?;
            let rows = run_fig2(&cfg, &opts.out)?;
            println!(
                "wrote {} rows to {}",
                rows.len(),
                opts.out.join("fig2.csv").display()
            );
            for r in &rows {
                if !r.error.is_empty() {
                    eprintln!("L={}: {}", r.l, r.error);
                }
            }
        }
        Command::ZeroCrossing(opts) => {
            let cfg = load_config(&opts)?;
            let rows = run_zero_crossing(&cfg, &opts.out)?;
            for r in &rows {
                match r.t_zero {
                    Some(tz) => {
                        println!("L={}: peak {:.3}, first zero {:.3}", r.l, r.peak_time, tz)
                    }
                    None => println!(
                        "L={}: peak {:.3}, censored (no sign change)",
                        r.l, r.peak_time
                    ),
                }
            }
            println!("wrote {}", opts.out.join("zero_crossing.csv").display());
        }
        Command::CurrentProfile { common, l } => {
            let cfg = load_config(&common)?;
            let (crossing, net) = run_current_profile(&cfg, l, &common.out)?;
            match crossing.t_zero {
                Some(tz) => println!(
                    "L={l}: peak {:.3}, first zero {:.3}",
                    crossing.peak_time, tz
                ),
                None => println!(
                    "L={l}: peak {:.3}, no sign change in window",
                    crossing.peak_time
                ),
            }
            println!("signed integral of j(0,t): {net:.6e}");
        }
        Command::Rabi(opts) => {
            let cfg = load_config(&opts)?;
            let report = run_rabi(&cfg, &opts.out)?;
            println!(
                "arrival mean: numeric {:.8} vs exact {:.8}",
                report.toa_mean_numeric, report.toa_mean_exact
            );
            println!(
                "stroboscopic mean: numeric {:.8} vs exact {:.8}",
                report.qs_mean_numeric, report.qs_mean_exact
            );
            println!(
                "max pointwise deviation: arrival {:.3e}, stroboscopic {:.3e}",
                report.max_pointwise_toa, report.max_pointwise_qs
            );
        }
        Command::Validate(opts) => {
            let cfg = load_config(&opts)?;
            match run_validate(&cfg) {
                Ok(report) => print!("{}", report.render()),
                Err(Error::ValidationFailed(rendered)) => {
                    print!("{rendered}");
                    return Err(Error::ValidationFailed(String::new()));
                }
                Err(other) => return Err(other),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let msg = err.to_string();
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}
