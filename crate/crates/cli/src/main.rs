//! Command-line driver: dataset generation, training, evaluation, and the
//! verification suite.
//!
//! Every command echoes its fully-resolved configuration (defaults included)
//! to an adjacent `.resolved.json`, so reruns from that file reproduce the
//! outputs byte for byte. Exit codes: 0 success, 1 verification failure,
//! 2 config error, 3 numeric failure, 4 compatibility error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use realpg::env::{load_dataset, make_dataset, save_dataset};
use realpg::error::Error;
use realpg::infer::{evaluate_dataset_with_tau, predictions_csv, InferMode};
use realpg::oracle::{run_verification, VerifyScale};
use realpg::trainer::{load_checkpoint, logs_to_csv, save_checkpoint, train_run_with_probe};
use realpg::RunConfig;

#[derive(Parser)]
#[command(
    name = "realpg",
    about = "Regression-aware policy-gradient training engine",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rail,
    Greedy,
    RailAvgN,
}

impl From<ModeArg> for InferMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rail => InferMode::Rail,
            ModeArg::Greedy => InferMode::Greedy,
            ModeArg::RailAvgN => InferMode::RailAvgN,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Quick,
    Full,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration JSON (missing keys take defaults).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path overrides: --key.path=value (repeatable, after other flags).
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset file from the environment config.
    GenData {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output path for the line-delimited dataset.
        #[arg(long)]
        out: PathBuf,
        /// Which split's size and seed to use.
        #[arg(long, value_enum, default_value = "train")]
        split: Split,
    },
    /// Train a policy and evaluate it on the held-out split.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate a checkpoint on a dataset.
    Eval {
        /// Checkpoint produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset file to score.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "rail")]
        mode: ModeArg,
        /// Sample count for rail-avg-n.
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the numeric verification suite.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        scale: ScaleArg,
        /// Where to write the JSON report.
        #[arg(long, default_value = "verify_report.json")]
        report: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Dataset(_) | Error::Io(_) => 2,
        Error::NonFiniteLogits
        | Error::Numeric(_)
        | Error::ZeroProbability(_)
        | Error::Degenerate(_)
        | Error::EnumerationBound(_) => 3,
        Error::Checkpoint(_) => 4,
    }
}

fn load_config(args: &ConfigArgs) -> realpg::Result<RunConfig> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => "{}".to_string(),
    };
    RunConfig::from_json(&text, &args.overrides)
}

fn write_resolved(config: &RunConfig, path: &Path) -> realpg::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, config.to_resolved_json())?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(suffix);
    PathBuf::from(os)
}

fn cmd_gen_data(args: &ConfigArgs, out: &Path, split: Split) -> realpg::Result<()> {
    let config = load_config(args)?;
    let (n, seed) = match split {
        Split::Train => (config.data.n_train, config.seeds.data_train),
        Split::Test => (config.data.n_test, config.seeds.data_test),
    };
    let dataset = make_dataset(config.env, n, seed)?;
    save_dataset(&dataset, out)?;
    write_resolved(&config, &with_suffix(out, ".resolved.json"))?;
    println!("wrote {} records to {}", dataset.len(), out.display());
    Ok(())
}

fn cmd_train(args: &ConfigArgs) -> realpg::Result<()> {
    let config = load_config(args)?;
    let trainer_cfg = config.trainer_config()?;
    let train_data = load_dataset(&config.paths.train_data)?;
    let test_data = load_dataset(&config.paths.test_data)?;
    let init = match &config.paths.init_checkpoint {
        Some(path) => Some(load_checkpoint(path, Some(&trainer_cfg.policy))?),
        None => None,
    };

    let out_dir = PathBuf::from(&config.paths.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    write_resolved(&config, &out_dir.join("config.resolved.json"))?;

    // Correlation curves on the held-out split, sampled every eval_every
    // steps with a fixed evaluation stream so curves stay smooth.
    let mut curves = String::from("step,r,rho,tau,rmse,mae,mean_entropy,mean_resp_len\n");
    let out = train_run_with_probe(
        &trainer_cfg,
        &train_data,
        init.as_ref(),
        config.train.eval_every,
        |step, params| {
            let eval = evaluate_dataset_with_tau(
                params,
                &trainer_cfg.policy,
                &test_data,
                InferMode::Rail,
                1,
                config.seeds.eval,
                config.infer.tau_variant,
            )?;
            let r = &eval.report;
            curves.push_str(&format!(
                "{step},{},{},{},{},{},{},{}\n",
                r.r, r.rho, r.tau, r.rmse, r.mae, r.mean_entropy, r.mean_resp_len
            ));
            Ok(())
        },
    )?;
    if config.train.eval_every > 0 {
        std::fs::write(out_dir.join("curves.csv"), &curves)?;
    }
    std::fs::write(out_dir.join("steps.csv"), logs_to_csv(&out.logs))?;
    save_checkpoint(&out.checkpoint, out_dir.join("checkpoint.bin"))?;

    let golds = test_data.golds();
    for (mode, n) in [
        (InferMode::Greedy, 1),
        (InferMode::Rail, 1),
        (InferMode::RailAvgN, config.infer.n),
    ] {
        let eval = evaluate_dataset_with_tau(
            &out.checkpoint.params,
            &trainer_cfg.policy,
            &test_data,
            mode,
            n,
            config.seeds.eval,
            config.infer.tau_variant,
        )?;
        std::fs::write(
            out_dir.join(format!("report_{}.json", mode.label())),
            eval.report.to_json_pretty(),
        )?;
        std::fs::write(
            out_dir.join(format!("predictions_{}.csv", mode.label())),
            predictions_csv(&eval.predictions, &golds),
        )?;
        println!(
            "{}: pearson {:.4} spearman {:.4} tau {:.4} rmse {:.4} mae {:.4}",
            mode.label(),
            eval.report.r,
            eval.report.rho,
            eval.report.tau,
            eval.report.rmse,
            eval.report.mae
        );
    }
    println!(
        "trained {} steps; artifacts in {}",
        trainer_cfg.steps,
        out_dir.display()
    );
    Ok(())
}

fn cmd_eval(
    checkpoint: &Path,
    dataset: &Path,
    mode: InferMode,
    n: usize,
    seed: u64,
    out_dir: &Path,
) -> realpg::Result<()> {
    let ckpt = load_checkpoint(checkpoint, None)?;
    let data = load_dataset(dataset)?;
    if let Some(example) = data.examples.first() {
        if example.features.len() != ckpt.policy.prompt_dim {
            return Err(Error::Checkpoint(format!(
                "checkpoint prompt_dim {} does not match dataset features {}",
                ckpt.policy.prompt_dim,
                example.features.len()
            )));
        }
    }
    std::fs::create_dir_all(out_dir)?;
    let eval = evaluate_dataset_with_tau(
        &ckpt.params,
        &ckpt.policy,
        &data,
        mode,
        n,
        seed,
        Default::default(),
    )?;
    let golds = data.golds();
    std::fs::write(
        out_dir.join("predictions.csv"),
        predictions_csv(&eval.predictions, &golds),
    )?;
    std::fs::write(out_dir.join("report.json"), eval.report.to_json_pretty())?;
    let resolved = serde_json::json!({
        "checkpoint": checkpoint.display().to_string(),
        "dataset": dataset.display().to_string(),
        "mode": mode.label(),
        "n": n,
        "seed": seed,
    });
    std::fs::write(
        out_dir.join("eval.resolved.json"),
        serde_json::to_string_pretty(&resolved).expect("json"),
    )?;
    println!(
        "{}: pearson {:.4} spearman {:.4} tau {:.4} rmse {:.4} mae {:.4} (n={})",
        mode.label(),
        eval.report.r,
        eval.report.rho,
        eval.report.tau,
        eval.report.rmse,
        eval.report.mae,
        eval.report.n
    );
    Ok(())
}

fn cmd_verify(scale: ScaleArg, report_path: &Path) -> Result<(), u8> {
    let scale = match scale {
        ScaleArg::Quick => VerifyScale::Quick,
        ScaleArg::Full => VerifyScale::Full,
    };
    let report = run_verification(scale);
    for check in &report.checks {
        let status = if check.passed {
            "PASS"
        } else if check.hard {
            "FAIL"
        } else {
            "WARN"
        };
        println!(
            "{status} [{}] max_error={:.3e} {}",
            check.name, check.max_error, check.detail
        );
    }
    if let Some(parent) = report_path.parent() {
        if !parent.as_os_str().is_empty() {
            let _ = std::fs::create_dir_all(parent);
        }
    }
    if let Err(e) = std::fs::write(report_path, report.to_json_pretty()) {
        eprintln!("error: could not write report: {e}");
        return Err(2);
    }
    println!("report written to {}", report_path.display());
    if report.passed() {
        Ok(())
    } else {
        eprintln!(
            "verification failed: {} hard failure(s)",
            report.hard_failures
        );
        Err(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), u8> = match &cli.command {
        Command::GenData { config, out, split } => cmd_gen_data(config, out, *split).map_err(|e| {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }),
        Command::Train { config } => cmd_train(config).map_err(|e| {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }),
        Command::Eval {
            checkpoint,
            dataset,
            mode,
            n,
            seed,
            out_dir,
        } => cmd_eval(checkpoint, dataset, (*mode).into(), *n, *seed, out_dir).map_err(|e| {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }),
        Command::Verify { scale, report } => cmd_verify(*scale, report),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
