use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dpogd::error::{Error, Result};
use dpogd::harness::{
    emit_plot, load_config, run_experiment, run_sweep, validate_config, write_outputs,
    ExperimentConfig, PlotStyle,
};

#[derive(Parser)]
#[command(
    name = "dpogd",
    version,
    about = "Distributed proximal online gradient descent experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Replace the configured seed list with a single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the configured one).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured algorithm on every seed.
    Run { config: PathBuf },
    /// Grid over graph families and consensus step counts.
    Sweep { config: PathBuf },
    /// Check graph and step-size assumptions without running.
    Validate { config: PathBuf },
    /// Draw log-log figures from median metric CSVs.
    Plot {
        dir: PathBuf,
        #[arg(long, value_enum, default_value = "fig1")]
        style: PlotStyle,
    },
}

fn configure(path: &Path, cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = load_config(path)?;
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = configure(config, cli)?;
            let result = run_experiment(&cfg)?;
            write_outputs(&result, &cfg.output)?;
            for a in &result.summary.algorithms {
                println!(
                    "{:<12} Reg_T/T = {:.6e}  slope = {}",
                    a.algorithm.as_str(),
                    a.final_regret_over_t,
                    a.slope.map_or("-".into(), |s| format!("{s:.3}"))
                );
            }
            println!("C_T/T = {:.6e}", result.summary.final_path_over_t);
            println!("wrote {}", cfg.output.display());
        }
        Command::Sweep { config } => {
            let cfg = configure(config, cli)?;
            for p in run_sweep(&cfg, &cfg.output)? {
                println!("{}", p.dir.display());
            }
        }
        Command::Validate { config } => {
            let cfg = configure(config, cli)?;
            let v = validate_config(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&v)?);
            if !v.passed() {
                return Err(Error::InvalidNetwork(format!(
                    "{} of {} mixing matrices failed validation, window {:?}",
                    v.matrices_failed.len(),
                    v.matrices_checked,
                    v.window
                )));
            }
            if !(v.alpha > 0.0 && v.alpha < v.alpha_limit) {
                eprintln!(
                    "warning: step {} lies outside (0, 2mu/L^2) = (0, {:.3e})",
                    v.alpha, v.alpha_limit
                );
            }
        }
        Command::Plot { dir, style } => {
            println!("{}", emit_plot(dir, *style)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
