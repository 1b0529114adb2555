use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use valab_bench::config::{Algorithm, ConfigError, ExperimentConfig, Mode};
use valab_bench::demo::{render_demo, run_demo};
use valab_bench::experiment::{run_experiment, run_sweep, write_run, write_sweep, BenchError};
use valab_bench::generate::Bundle;
use valab_bench::verify::{run_verify, Level};

#[derive(Parser)]
#[command(name = "valab", version, about = "Tabular VA-learning laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single seed, or the first seed when combined with --seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long, global = true)]
    seeds: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// `eval` or `control`.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Comma-separated algorithm names.
    #[arg(long, global = true, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    #[arg(long, global = true)]
    iterations: Option<u64>,
    /// `fast` or `full`.
    #[arg(long, global = true, default_value = "fast")]
    level: String,
}

#[derive(Subcommand)]
enum Command {
    /// Write an MDP + policy bundle per seed.
    Generate,
    /// Train all configured algorithms and write metric CSVs.
    Run,
    /// Final-performance summary over the epsilon grid.
    Sweep,
    /// Run the certification suite.
    Verify,
    /// Print the two-state walkthrough.
    Demo,
}

fn build_config(c: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &c.mode {
        cfg.mode = Mode::parse(m)?;
    }
    if let Some(e) = c.epsilon {
        cfg.epsilon = Some(e);
    }
    if let Some(algs) = &c.algorithms {
        cfg.algorithms = algs.iter().map(|a| Algorithm::parse(a.trim())).collect::<Result<_, _>>()?;
    }
    if let Some(n) = c.iterations {
        cfg.iterations = n;
    }
    match (c.seed, c.seeds) {
        (Some(s), Some(n)) => cfg.seeds = (s..s + n).collect(),
        (Some(s), None) => cfg.seeds = vec![s],
        (None, Some(n)) => cfg.seeds = (0..n).collect(),
        (None, None) => {}
    }
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fail(err: BenchError) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        BenchError::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify => {
            let Some(level) = Level::parse(&cli.common.level) else {
                eprintln!("error: unknown level {:?}", cli.common.level);
                return ExitCode::from(2);
            };
            let outcomes = run_verify(level, cli.common.seed.unwrap_or(0));
            for o in &outcomes {
                println!("{o}");
            }
            if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Demo => {
            print!("{}", render_demo(&run_demo(4, cli.common.seed.unwrap_or(0))));
            ExitCode::SUCCESS
        }
        command => {
            let cfg = match build_config(&cli.common) {
                Ok(c) => c,
                Err(e) => return fail(e.into()),
            };
            let result = match command {
                Command::Generate => cfg.seeds.iter().try_for_each(|&seed| {
                    let path = Bundle::generate(&cfg, seed)?.write(&cfg.out)?;
                    println!("{}", path.display());
                    Ok(())
                }),
                Command::Run => run_experiment(&cfg).and_then(|records| {
                    let manifest = write_run(&cfg, &records, &cfg.out)?;
                    println!("wrote {} files to {}", manifest.artifacts.len(), cfg.out.display());
                    Ok(())
                }),
                Command::Sweep => run_sweep(&cfg).and_then(|output| {
                    write_sweep(&cfg, &output, &cfg.out)?;
                    for row in &output.summary {
                        println!(
                            "eps {:<4} {:<17} {} mean {:.4} std {:.4} n {} plateaued {}",
                            row.epsilon, row.algorithm, row.metric, row.mean, row.std, row.n, row.plateaued
                        );
                    }
                    Ok(())
                }),
                Command::Verify | Command::Demo => unreachable!(),
            };
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
    }
}
