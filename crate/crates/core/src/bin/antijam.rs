use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use antijam::harness::{
    compare_convergence, random_fh_oracle, run_experiment, ConvergenceInput, ExperimentConfig,
    JammerSpec, Overrides, Scale,
};
use antijam::nn::gradcheck::{run_suite, TOLERANCE};
use antijam::{Error, Result};

#[derive(Parser)]
#[command(
    name = "antijam",
    version,
    about = "Anti-jamming channel access experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its metrics.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        scale: Option<Scale>,
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Compare episodes-to-target of two metrics files.
    Compare { a: PathBuf, b: PathBuf },
    /// Finite-difference gradient checks for every layer kind and loss.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seeds per kind.
        #[arg(long, default_value_t = 20)]
        trials: u64,
    },
    /// Random hopping throughput against the configured fixed jammers.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        hops: u64,
        #[arg(long)]
        scale: Option<Scale>,
    },
}

fn load(config: Option<PathBuf>, overrides: &Overrides) -> Result<ExperimentConfig> {
    match config {
        Some(p) => ExperimentConfig::load(&p, overrides),
        None => ExperimentConfig::from_toml_str_with("", overrides),
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            scale,
            trials,
        } => {
            let overrides = Overrides {
                scale,
                base_seed: seed,
                trials,
                output_path: out,
            };
            let cfg = load(config, &overrides)?;
            if cfg.output_path.is_none() {
                return Err(Error::config(
                    "output_path",
                    "set it in the config or pass --out",
                ));
            }
            let result = run_experiment(&cfg)?;
            for t in &result.trials {
                let last = t
                    .episodes
                    .last()
                    .map(|e| e.normalized_throughput)
                    .unwrap_or(0.0);
                println!(
                    "trial {} seed {}: {} episodes, final throughput {}, episodes to target {}",
                    t.trial,
                    t.seed,
                    t.episodes.len(),
                    last,
                    t.episodes_to_target(cfg.target_throughput)
                        .map_or("never".to_string(), |e| e.to_string())
                );
            }
            Ok(true)
        }
        Command::Compare { a, b } => {
            let report =
                compare_convergence(&ConvergenceInput::load(&a)?, &ConvergenceInput::load(&b)?)?;
            println!("{report}");
            Ok(true)
        }
        Command::Gradcheck { seed, trials } => {
            let results = run_suite(seed, trials);
            let mut ok = true;
            for r in &results {
                ok &= r.passed();
                println!(
                    "{:<16} seed {:>4}  entries {:>5}  max relative error {:.3e}  {}",
                    r.kind.to_string(),
                    r.seed,
                    r.entries,
                    r.max_rel_error,
                    if r.passed() { "ok" } else { "FAIL" }
                );
            }
            println!(
                "tolerance {TOLERANCE:e}: {}",
                if ok { "all passed" } else { "failures" }
            );
            Ok(ok)
        }
        Command::Oracle {
            config,
            seed,
            hops,
            scale,
        } => {
            let overrides = Overrides {
                scale,
                ..Default::default()
            };
            let cfg = load(config, &overrides)?;
            let fixed = cfg
                .jammers
                .iter()
                .map(|j| match j {
                    JammerSpec::Fixed(f) => Ok(f.clone()),
                    JammerSpec::Intelligent(_) => Err(Error::config(
                        "jammers",
                        "the oracle covers fixed jammers only",
                    )),
                })
                .collect::<Result<Vec<_>>>()?;
            let r = random_fh_oracle(&cfg.env, &fixed, hops, seed)?;
            println!("hops {}", r.hops);
            println!("monte carlo throughput {}", r.monte_carlo);
            match r.exact {
                Some(e) => println!("schedule-period throughput {e}"),
                None => println!("schedule-period throughput unavailable (period too long)"),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
