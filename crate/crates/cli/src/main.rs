use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scls_cli::selftest::{self, Suite};
use scls_cli::{compare_traps, run_ensemble, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "scls", version, about = "Stochastic Aedes albopictus population simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<u32>,
    #[arg(long)]
    maxtime: Option<f64>,
    #[arg(long)]
    sample_interval: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        if let Some(m) = self.maxtime {
            cfg.maxtime = m;
        }
        if let Some(i) = self.sample_interval {
            cfg.sample_interval = i;
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble and write trajectory, summary and metadata files.
    Run(Overrides),
    /// Check a config, its climate file and its model without simulating.
    Validate(Overrides),
    /// Compare the mean adult series of a trajectory with trap counts.
    Compare {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        traps: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a statistical self-test: exp-times, selection, ctmc-oracle,
    /// death-decay or all.
    Selftest {
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run(o) => {
            let cfg = o.load()?;
            let out = run_ensemble(&cfg)?;
            println!(
                "{} replicates to day {} in {:.1} s: {}, {}, {}",
                cfg.replicates,
                cfg.maxtime,
                out.wall_time_s,
                out.trajectory.display(),
                out.summary.display(),
                out.metadata.display()
            );
        }
        Command::Validate(o) => {
            let cfg = o.load()?;
            let prepared = scls_cli::ensemble::Prepared::new(&cfg)?;
            println!(
                "ok: {} rules, {} containers, {} scheduled events, config sha256 {}",
                prepared.ecosystem.rules.len(),
                cfg.containers.len(),
                prepared.ecosystem.events.len(),
                cfg.hash()
            );
        }
        Command::Compare { trajectory, traps, out } => {
            let cmp = compare_traps(&trajectory, &traps, &out)?;
            match cmp.pearson {
                Some(r) => println!("{} rows, pearson {r:.4}", cmp.rows.len()),
                None => println!("{} rows, pearson undefined", cmp.rows.len()),
            }
        }
        Command::Selftest { suite, seed } => {
            let suites = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite.parse()?]
            };
            let mut passed = true;
            for s in suites {
                let report = selftest::run(s, seed)?;
                println!("{report}");
                passed &= report.passed;
            }
            return Ok(passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
