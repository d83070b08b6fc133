use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hvac_disagg::commands::{self, EXIT_CONFIG, EXIT_OK};
use hvac_disagg::config::PipelineConfig;
use hvac_disagg::Error;

/// HVAC load disaggregation from 15-minute smart-meter data.
///
/// Exit codes: 0 success, 2 configuration error, 3 data error, 4 some hot
/// days have no feasible fine-tuned result (outputs are still written).
#[derive(Debug, Parser)]
#[command(name = "hvac-disagg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with ground truth.
    Synth(Common),
    /// Classify days, run ICA and fine-tune every hot day.
    Disaggregate(Common),
    /// Score disaggregation results against ground truth.
    Evaluate(Common),
    /// Render report.md and plots from the evaluation CSVs.
    Report(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config; defaults are used for anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory; overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for per-customer processing.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Global seed; overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<(PipelineConfig, PathBuf), Error> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.workers == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        let out = self.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
        Ok((cfg, out))
    }
}

fn run(cli: &Cli) -> Result<i32, Error> {
    match &cli.command {
        Command::Synth(c) => {
            let (cfg, out) = c.resolve()?;
            let s = commands::synth(&cfg, &out)?;
            println!("wrote {} households × {} days to {}", s.households, s.days, out.display());
            Ok(EXIT_OK)
        }
        Command::Disaggregate(c) => {
            let (cfg, out) = c.resolve()?;
            let s = commands::disaggregate(&cfg, &out, c.workers)?;
            println!(
                "{} customers, {} hot days: {} feasible, {} without a feasible result",
                s.customers, s.hot_days, s.feasible, s.not_feasible
            );
            Ok(s.exit_code())
        }
        Command::Evaluate(c) => {
            let (cfg, out) = c.resolve()?;
            let ev = commands::evaluate(&cfg, &out)?;
            for r in &ev.reports {
                println!(
                    "{:<11} nMAE {:8.2} ± {:7.2}  nEE {:6.2}",
                    r.method, r.nmae_mean, r.nmae_std, r.nee_mean
                );
            }
            Ok(EXIT_OK)
        }
        Command::Report(c) => {
            let (_, out) = c.resolve()?;
            let md = commands::report(&out)?;
            print!("{md}");
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = run(&cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        commands::exit_code(&e)
    });
    log::debug!("exit code {code}");
    ExitCode::from(code as u8)
}
