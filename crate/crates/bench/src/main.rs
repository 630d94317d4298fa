use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geoaccel_bench::config::ExperimentConfig;
use geoaccel_bench::error::{BenchError, Result};
use geoaccel_bench::experiment::run_experiment;
use geoaccel_bench::sweep::{parse_epsilons, run_sweep};
use geoaccel_bench::verify::{verify_all, VerifyOptions};

#[derive(Parser)]
#[command(name = "bench", about = "Runs, sweeps and checks the geoaccel solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        solver: Option<String>,
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        output: Option<String>,
        /// Extra `key=value` overrides, applied after the other flags.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run one experiment per accuracy and fit the rate exponent.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated accuracies, e.g. `1e-2,1e-3,1e-4,1e-5`.
        #[arg(long)]
        epsilons: String,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Run the property suites and print the worst slack of every check.
    Verify {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1_000)]
        fd_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            solver,
            epsilon,
            seed,
            output,
            set,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            for (key, value) in [("solver", solver), ("epsilon", epsilon), ("seed", seed), ("output", output)] {
                if let Some(v) = value {
                    cfg.set(key, &v)?;
                }
            }
            for kv in &set {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| BenchError::Config {
                        line: None,
                        field: kv.clone(),
                        message: "expected KEY=VALUE".into(),
                    })?;
                cfg.set(k.trim(), v.trim())?;
            }
            let report = run_experiment(&cfg)?;
            for line in report.summary_lines() {
                println!("{line}");
            }
            if let Some(p) = &cfg.output {
                println!("csv={}", p.display());
            }
        }
        Command::Sweep {
            config,
            epsilons,
            output_dir,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let eps = parse_epsilons(&epsilons)?;
            let sweep = run_sweep(&cfg, &eps, Some(&output_dir))?;
            for (e, n) in sweep.series() {
                println!("epsilon={e:e} grad_evals={n}");
            }
            match sweep.exponent {
                Some(p) => println!("exponent={p:.4}"),
                None => println!("exponent=none (need 4 accuracies spanning 2 decades)"),
            }
        }
        Command::Verify {
            samples,
            fd_samples,
            seed,
        } => {
            let reports = verify_all(&VerifyOptions {
                samples,
                fd_samples,
                seed,
            })?;
            let mut failed = 0;
            for rep in &reports {
                println!(
                    "{}: ratio in [{:.6}, {:.6}], bounds [{:.6}, {:.6}]",
                    rep.cell,
                    rep.ratio_min,
                    rep.ratio_max,
                    rep.gamma_p,
                    1.0 / rep.gamma_n
                );
                for c in &rep.checks {
                    println!(
                        "  {:<22} samples={:<6} violations={:<4} worst_slack={:.3e}",
                        c.name, c.samples, c.violations, c.worst_slack
                    );
                    failed += c.violations;
                }
            }
            if failed > 0 {
                return Err(BenchError::Verify(format!("{failed} violated samples")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::FAILURE
        }
    }
}
