//! `fibair` command-line front end.
//!
//! Exit codes: 0 success, 1 partial (some grid points failed or are
//! missing), 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fibair::harness::{self, ExperimentConfig, ExperimentSummary, Receiver, RunRecord};
use fibair::Error;

#[derive(Parser)]
#[command(name = "fibair", version, about = "Fiber channel AIR experiments with DBP and SDBP receivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every grid point of a config (resuming from earlier records)
    /// and write the tables.
    Run(ConfigArgs),
    /// Rewrite the tables from existing records without simulating.
    Report(ConfigArgs),
    /// Run quick oracle checks.
    Selftest,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated receiver subset: dbp-iidg, dbp-cg, sbs-sdbp, gmp-sdbp.
    #[arg(long, value_delimiter = ',')]
    receivers: Option<Vec<String>>,
    /// Small-scale preset: K = 1024, N_MC = 8, N_p = 100.
    #[arg(long)]
    desk: bool,
    /// Override the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load(args: &ConfigArgs) -> fibair::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.run.master_seed = s;
    }
    if let Some(list) = &args.receivers {
        cfg.receivers.enabled = list.iter().map(|r| r.parse::<Receiver>()).collect::<fibair::Result<_>>()?;
    }
    if args.desk {
        cfg.apply_desk_preset();
    }
    if let Some(dir) = &args.output {
        cfg.output.dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn progress(r: &RunRecord) {
    let airs: Vec<String> = r
        .per_run
        .iter()
        .map(|(rx, v)| format!("{rx}={:.4}", v.iter().sum::<f64>() / v.len().max(1) as f64))
        .collect();
    let axis = r.axis_value.map(|a| format!(" axis={a}")).unwrap_or_default();
    match &r.error {
        Some(e) => eprintln!("point {}{axis} P={:.2} dBm FAILED: {e}", r.point_index, r.power_dbm),
        None => eprintln!(
            "point {}{axis} P={:.2} dBm SNR={:.2} dB [{}] {:.1}s",
            r.point_index,
            r.power_dbm,
            r.snr_proxy_db,
            airs.join(" "),
            r.elapsed_s
        ),
    }
}

fn summarize(cfg: &ExperimentConfig, s: &ExperimentSummary) -> ExitCode {
    for f in &s.files {
        println!("wrote {}", f.display());
    }
    let failed = s.failed();
    let missing = s.missing(cfg);
    println!(
        "config {} ({} computed, {} reused, {failed} failed, {missing} missing)",
        &s.config_hash[..16],
        s.computed,
        s.reused
    );
    if failed + missing > 0 {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}

fn with_config(args: &ConfigArgs, f: impl FnOnce(&ExperimentConfig) -> fibair::Result<ExperimentSummary>) -> ExitCode {
    let cfg = match load(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match f(&cfg) {
        Ok(s) => summarize(&cfg, &s),
        Err(e @ Error::Config { .. }) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_PARTIAL)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => with_config(&args, |cfg| harness::run_experiment(cfg, progress)),
        Command::Report(args) => with_config(&args, harness::report),
        Command::Selftest => {
            let checks = harness::selftest();
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_PARTIAL)
            }
        }
    }
}
