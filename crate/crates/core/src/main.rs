//! Command-line front end: training runs, analytic bounds, sweeps and
//! baseline evaluation.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use comp_marl::baselines::BaselineKind;
use comp_marl::harness::tools::{relative_spread, FED_SWEEP_HEADER};
use comp_marl::harness::{
    evaluate_baseline, gradient_audit, run_experiment, sweep_fed, write_outputs, BaselineSummary, BoundRequest,
    ExperimentConfig, HarnessError,
};
use comp_marl::info::{linspace, sweep, InfoParams, SWEEP_HEADER};

#[derive(Parser)]
#[command(name = "comp-marl", version, about = "Federated multi-agent actor-critic for CoMP clustering")]
struct Cli {
    /// Overrides the seed of the loaded configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the agents and write metrics, events and a checkpoint.
    Run {
        /// JSON configuration; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for config, metrics, events, summary and checkpoint.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the analytic convergence bounds from a parameter file.
    Bound {
        /// JSON bound request (params, k_star, f_values); defaults give the reference grid.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Output CSV path; `-` writes to stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Tabulate the bounds over an evenly spaced `k_star` grid.
    Sweep {
        /// JSON info-model parameters; defaults when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Smallest `k_star` on the grid.
        #[arg(long, default_value_t = 0.001)]
        k_min: f64,
        /// Largest `k_star` on the grid.
        #[arg(long, default_value_t = 0.02)]
        k_max: f64,
        /// Number of grid points.
        #[arg(long, default_value_t = 20)]
        k_points: usize,
        /// Comma-separated federation periods.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u32, 10, 100])]
        f_values: Vec<u32>,
        /// Output CSV path; `-` writes to stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Rerun one configuration per federation period.
    SweepFed {
        /// JSON configuration; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated federation periods to compare.
        #[arg(long, value_delimiter = ',', required = true)]
        f_values: Vec<u64>,
        /// Output CSV path; `-` writes to stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Evaluate a non-learning policy over sampled worlds.
    Baseline {
        /// Policy to evaluate.
        #[arg(long, value_enum)]
        kind: BaselineKind,
        /// Number of independently sampled worlds.
        #[arg(long, default_value_t = 100)]
        worlds: usize,
        /// JSON configuration; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        /// Number of random evaluation points per network.
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Print the default configuration with every field spelled out.
    InitConfig,
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(out: &Path, text: &str) -> Result<(), HarnessError> {
    if out.as_os_str() == "-" {
        std::io::stdout().write_all(text.as_bytes())?;
    } else {
        std::fs::write(out, text)?;
    }
    Ok(())
}

fn load_info(path: Option<&Path>) -> Result<InfoParams, HarnessError> {
    match path {
        Some(p) => Ok(BoundRequest::load(p)?.params),
        None => Ok(InfoParams::default()),
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(config.as_deref(), cli.seed)?;
            let result = run_experiment(&cfg)?;
            write_outputs(&result, &out)?;
            eprintln!(
                "{} steps, final-10% mean reward {:.6}, {} sync events",
                result.steps_run(),
                result.tail_mean(0.1),
                result.events.len()
            );
        }
        Command::Bound { params, out } => {
            let req = match params {
                Some(p) => BoundRequest::load(&p)?,
                None => BoundRequest::default(),
            };
            let mut text = format!("{SWEEP_HEADER}\n");
            for row in req.rows()? {
                text.push_str(&row.to_csv());
                text.push('\n');
            }
            emit(&out, &text)?;
        }
        Command::Sweep { params, k_min, k_max, k_points, f_values, out } => {
            let base = load_info(params.as_deref())?;
            let rows = sweep(&base, &linspace(k_min, k_max, k_points), &f_values)?;
            let mut text = format!("{SWEEP_HEADER}\n");
            for row in rows {
                text.push_str(&row.to_csv());
                text.push('\n');
            }
            emit(&out, &text)?;
        }
        Command::SweepFed { config, f_values, out } => {
            let cfg = load_config(config.as_deref(), cli.seed)?;
            let rows = sweep_fed(&cfg, &f_values)?;
            let mut text = format!("{FED_SWEEP_HEADER}\n");
            for r in &rows {
                text.push_str(&format!("{},{},{}\n", r.period_f, r.final_reward, r.sync_events));
            }
            emit(&out, &text)?;
            let spread = relative_spread(&rows);
            let verdict = if spread <= 0.25 { "within" } else { "outside" };
            eprintln!("final rewards spread {:.1}%, {verdict} the 25% band", 100.0 * spread);
        }
        Command::Baseline { kind, worlds, config } => {
            let cfg = load_config(config.as_deref(), cli.seed)?;
            let summary = evaluate_baseline(&cfg, kind, worlds)?;
            println!("{}\n{}", BaselineSummary::HEADER, summary.to_csv());
        }
        Command::Gradcheck { points } => {
            let audit = gradient_audit(cli.seed.unwrap_or(0), points, 13)?;
            println!("approximator,points,max_rel_error,tolerance,pass");
            let lin_ok = audit.linear_max < 1e-10;
            let mlp_ok = audit.mlp_max < 1e-4;
            println!("linear,{},{:e},1e-10,{lin_ok}", audit.points, audit.linear_max);
            println!("mlp,{},{:e},1e-4,{mlp_ok}", audit.points, audit.mlp_max);
            if !(lin_ok && mlp_ok) {
                return Err(HarnessError::Runtime("gradient check exceeded tolerance".into()));
            }
        }
        Command::InitConfig => println!("{}", ExperimentConfig::default().to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
