use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semap_sim::bench::{bench_csv, bench_resolution_scaling, BenchSettings};
use semap_sim::{
    run_to_dir, verify, BoxWorld, ConfigError, ExperimentConfig, RunError, StrategyName,
};

const CONFIG_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "semap", version, about = "Semantic exploration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one exploration experiment and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<StrategyName>,
        /// Output directory; defaults to `output_dir` from the config, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time dense vs run-length MI across octree resolutions.
    Bench {
        #[arg(long, default_value = "boxworld")]
        env: String,
        #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1,0.05")]
        resolutions: Vec<f64>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun the experiment in a manifest and compare artifact hashes.
    Verify {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn parse_strategy(s: &str) -> Result<StrategyName, String> {
    match s {
        "semantic" => Ok(StrategyName::Semantic),
        "binary" => Ok(StrategyName::Binary),
        "frontier" => Ok(StrategyName::Frontier),
        _ => Err(format!(
            "unknown strategy `{s}` (semantic, binary, frontier)"
        )),
    }
}

fn fail(err: RunError) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        RunError::Config(_) => ExitCode::from(CONFIG_ERROR),
        RunError::Runtime(_) => ExitCode::from(RUNTIME_ERROR),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seed,
            strategy,
            out,
        } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e.into()),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(s) = strategy {
                cfg.strategy = s;
            }
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            match run_to_dir(&cfg, &dir) {
                Ok((result, _)) => {
                    println!(
                        "{}: {} scans, distance {:.3} m, final entropy {:.3} nats{} -> {}",
                        cfg.strategy.as_str(),
                        result.rows.len(),
                        result.distance(),
                        result.final_entropy(),
                        if result.exhausted { ", explored" } else { "" },
                        dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Bench {
            env,
            resolutions,
            out,
        } => {
            if env != "boxworld" {
                return fail(
                    ConfigError::invalid("env", format!("`{env}` has no 3-D octree; use boxworld"))
                        .into(),
                );
            }
            if resolutions.iter().any(|r| !(*r > 0.0 && *r <= 12.8)) {
                return fail(ConfigError::invalid("resolutions", "must be in (0, 12.8]").into());
            }
            let rows = bench_resolution_scaling(
                &BoxWorld::standard(),
                &resolutions,
                &BenchSettings::default(),
            );
            let csv = bench_csv(&rows);
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, csv) {
                        return fail(RunError::Runtime(format!(
                            "cannot write {}: {e}",
                            path.display()
                        )));
                    }
                }
                None => print!("{csv}"),
            }
            ExitCode::SUCCESS
        }
        Command::Verify { manifest } => match verify(&manifest) {
            Ok(problems) if problems.is_empty() => {
                println!("ok: every artifact reproduces");
                ExitCode::SUCCESS
            }
            Ok(problems) => {
                for p in &problems {
                    eprintln!("mismatch: {p}");
                }
                ExitCode::from(RUNTIME_ERROR)
            }
            Err(e) => fail(e),
        },
    }
}
