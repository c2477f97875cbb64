use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sa_ood::datasets::{load_labeled_csv, load_unlabeled_csv};
use sa_ood::runner::{
    cmd_ablate, cmd_eval, cmd_sweep, cmd_train, cmd_trend, cmd_verify, prepare_data,
    ExperimentConfig, Method, SweepParam,
};
use sa_ood::{Error, Result};

/// Supervision-adaptation training and max-softmax OOD evaluation.
#[derive(Parser, Debug)]
#[command(name = "sa-ood", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model and evaluate it.
    Train(RunArgs),
    /// Evaluate a checkpoint on ID and OOD test sets.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Labeled ID test CSV; without it the config's test data is used.
        #[arg(long)]
        id_test: Option<PathBuf>,
        /// Comma-separated OOD test CSVs.
        #[arg(long, value_delimiter = ',')]
        ood_test: Vec<PathBuf>,
    },
    /// Train one run per (value, seed) cell.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `epsilon` or `alpha`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
    },
    /// Compare SA, MSMI and MBCE per seed.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
    },
    /// Trace mean confidences per epoch.
    Trend(RunArgs),
    /// Run the numerical oracle checks.
    Verify {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn load_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.out {
        cfg.output_dir = o.clone();
    }
    if let Some(m) = &a.method {
        cfg.method = m.parse::<Method>()?;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn name_of(p: &Path) -> String {
    p.file_stem()
        .map_or_else(|| "ood".into(), |s| s.to_string_lossy().into_owned())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train(a) => {
            let cfg = load_config(&a)?;
            let res = cmd_train(&cfg)?;
            print!("{}", serde_json::to_string_pretty(&res.report.to_json())?);
            println!();
            if let Some(t) = res.report.throughput {
                println!("throughput: {t:.1} samples/s");
            }
        }
        Command::Eval {
            run,
            checkpoint,
            id_test,
            ood_test,
        } => {
            let cfg = load_config(&run)?;
            let out = run.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
            let report = match id_test {
                Some(path) => {
                    if ood_test.is_empty() {
                        return Err(Error::Config("--ood-test is required with --id-test".into()));
                    }
                    let id = load_labeled_csv(&path, None)?;
                    let ood = ood_test
                        .iter()
                        .map(|p| Ok((name_of(p), load_unlabeled_csv(p)?)))
                        .collect::<Result<Vec<_>>>()?;
                    cmd_eval(&checkpoint, &id, &ood, &out)?
                }
                None => {
                    let data = prepare_data(&cfg)?;
                    cmd_eval(&checkpoint, &data.id_test, &data.ood_test, &out)?
                }
            };
            println!("{}", serde_json::to_string_pretty(&report.to_json())?);
        }
        Command::Sweep {
            run,
            param,
            values,
            seeds,
        } => {
            let cfg = load_config(&run)?;
            let p: SweepParam = param.parse()?;
            let cells = cmd_sweep(&cfg, p, &values, &seeds, &cfg.output_dir)?;
            for c in cells {
                println!(
                    "{}={} seed={} acc={:.4} auroc_mean={:.4}",
                    p.name(),
                    c.key,
                    c.seed,
                    c.report.acc,
                    c.report.auroc_mean
                );
            }
        }
        Command::Ablate { run, seeds } => {
            let cfg = load_config(&run)?;
            for c in cmd_ablate(&cfg, &seeds, &cfg.output_dir)? {
                println!(
                    "{} seed={} acc={:.4} auroc_mean={:.4}",
                    c.key, c.seed, c.report.acc, c.report.auroc_mean
                );
            }
        }
        Command::Trend(a) => {
            let cfg = load_config(&a)?;
            let rows = cmd_trend(&cfg)?;
            println!(
                "wrote {} rows to {}",
                rows.len(),
                cfg.output_dir.join("trend.csv").display()
            );
        }
        Command::Verify { trials, seed, out } => {
            let report = cmd_verify(trials, seed, &out)?;
            print!("{}", report.to_text());
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
