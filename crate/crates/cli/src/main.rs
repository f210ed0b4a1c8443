use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use paclab::exact::EnumerationBudget;
use paclab::experiment::{run_buckets, run_exact, run_sweep, BucketsConfig, ExactConfig, ExperimentConfig};
use paclab::verify::{run_verify, VerifyOptions};
use paclab::{Error, Execution};

const EXIT_VERIFICATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;

/// Experiment runner and verification driver for bagging, ERM and the
/// sub-sampling learner in the realizable PAC setting.
#[derive(Parser, Debug)]
#[command(name = "paclab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file (a sweep manifest is accepted for replay)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding the config
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR", default_value = "paclab-out")]
    out: PathBuf,

    /// Cap on enumerated index vectors
    #[arg(long, global = true, value_name = "N", default_value_t = EnumerationBudget::default().max_vectors)]
    budget: u64,

    /// Only print errors
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Loss-versus-m sweep: writes sweep.csv and manifest.json
    Sweep,
    /// Exhaustive g_S analysis on a small sample: writes exact.json
    Exact,
    /// Bucket-family checks: writes buckets.json
    Buckets,
    /// Runs every invariant suite; exit 0 iff all pass
    Verify {
        /// Force the named suite to fail
        #[arg(long, value_name = "SUITE")]
        inject_failure: Option<String>,
    },
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::Config(_)) => EXIT_CONFIG,
            Some(Error::BudgetExceeded { .. }) => EXIT_BUDGET,
            _ => EXIT_VERIFICATION,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

fn read_config(path: &Path) -> std::result::Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

fn thread_count() -> std::result::Result<usize, Error> {
    match std::env::var("PACLAB_THREADS") {
        Err(_) => Ok(0),
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("PACLAB_THREADS=`{v}` is not a thread count"))),
    }
}

fn configure_threads(threads: usize) -> Result<usize> {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().context("building thread pool")?;
        }
        Ok(rayon::current_num_threads())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(1)
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let threads = configure_threads(thread_count()?)?;
    let budget = EnumerationBudget::new(cli.budget);
    let exec = Execution::Parallel;
    let config_text = cli.config.as_deref().map(read_config).transpose()?;
    let say = |line: String| {
        if !cli.quiet {
            println!("{line}");
        }
    };
    match &cli.command {
        Command::Sweep => {
            let mut cfg = match &config_text {
                Some(text) => ExperimentConfig::from_json(text)?,
                None => ExperimentConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.master_seed = seed;
            }
            let outcome = run_sweep(&cfg, exec)?;
            let csv = write_out(&cli.out, "sweep.csv", &outcome.csv())?;
            let manifest = write_out(&cli.out, "manifest.json", &to_json(&outcome.manifest(threads))?)?;
            for (arm, s) in &outcome.slope_fits {
                match &s.fit {
                    Some(f) => say(format!("{:8} slope {:+.3} (r2 {:.3})", arm.name(), f.slope, f.r2)),
                    None => say(format!("{:8} no slope: {}", arm.name(), s.error.as_deref().unwrap_or("-"))),
                }
            }
            say(format!("wrote {} and {}", csv.display(), manifest.display()));
        }
        Command::Exact => {
            let mut cfg = match &config_text {
                Some(text) => ExactConfig::from_json(text)?,
                None => ExactConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.master_seed = seed;
            }
            let report = run_exact(&cfg, budget, exec)?;
            let path = write_out(&cli.out, "exact.json", &to_json(&report)?)?;
            for g in &report.margin_losses {
                say(format!("L^{}(g_S) = {}", g.gamma, g.loss));
            }
            say(format!(
                "loss transfer: {} violations in {} draws (rate {}, allowed {:.4}); pmf exact match: {}",
                report.loss_transfer.violations,
                report.loss_transfer.trials,
                report.loss_transfer.violation_rate,
                report.loss_transfer.allowed_rate,
                report.pmf_check.exact_match
            ));
            say(format!("wrote {}", path.display()));
            if !report.pass {
                return Err(Failure { code: EXIT_VERIFICATION, error: anyhow::anyhow!("exact analysis checks failed") });
            }
        }
        Command::Buckets => {
            let cfg = match &config_text {
                Some(text) => BucketsConfig::from_json(text)?,
                None => BucketsConfig::default(),
            };
            let report = run_buckets(&cfg, budget, exec)?;
            let path = write_out(&cli.out, "buckets.json", &to_json(&report)?)?;
            for e in &report.p0 {
                say(format!("P(0) m={:5} n={:5} = {:.3e}  <= 1/6: {}", e.m, e.n, e.p0_value, e.at_most_one_sixth));
            }
            for t in &report.tiny {
                say(format!("{}: two-stage uniform {}, symmetric {}", t.name, t.two_stage_uniform, t.symmetric));
            }
            for s in &report.structure {
                say(format!("C={} j={}: {} leaves (expected {})", s.branching, s.level, s.leaves, s.expected_leaves));
            }
            say(format!("wrote {}", path.display()));
            if !report.pass {
                return Err(Failure { code: EXIT_VERIFICATION, error: anyhow::anyhow!("bucket checks failed") });
            }
        }
        Command::Verify { inject_failure } => {
            if config_text.is_some() {
                return Err(Error::Config("verify takes no config file".into()).into());
            }
            let mut opts =
                VerifyOptions { budget, inject_failure: inject_failure.clone(), exec, ..VerifyOptions::default() };
            if let Some(seed) = cli.seed {
                opts.seed = seed;
            }
            let report = run_verify(&opts)?;
            for s in &report.suites {
                say(format!("{:20} {}  {:.2}s  {}", s.name, if s.passed { "ok  " } else { "FAIL" }, s.seconds, s.detail));
            }
            write_out(&cli.out, "verify.json", &to_json(&report)?)?;
            if !report.passed {
                let names: Vec<&str> = report.failed().map(|s| s.name.as_str()).collect();
                for s in report.failed() {
                    eprintln!("suite {} failed: {}", s.name, s.detail);
                }
                return Err(Failure {
                    code: EXIT_VERIFICATION,
                    error: anyhow::anyhow!("failing suites: {}", names.join(", ")),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
