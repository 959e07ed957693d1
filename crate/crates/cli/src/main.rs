//! `metric-knn-lab list` and `metric-knn-lab run <experiment> --seed N`.
//!
//! Exit status: 0 on a clean run, 2 when the run finished but an asserted
//! bound failed, 1 for configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metric_knn_lab::experiments::{
    list_experiments, parse_grid, run_experiment, write_artifacts, ExperimentError, ModelConfig,
};
use serde_json::{json, Map, Value};

#[derive(Parser, Debug)]
#[command(name = "metric-knn-lab", version, about = "Seeded k-NN and metric-measure experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the experiments with a one-line description each.
    List,
    /// Run one experiment and write `<outdir>/<experiment>-<seed>.csv`
    /// plus a `.manifest.json` next to it.
    Run(Box<RunArgs>),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    experiment: String,
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (required).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    outdir: PathBuf,
    #[arg(long, env = "METRIC_KNN_LAB_THREADS")]
    threads: Option<usize>,
    /// Model shorthand: nested, cantor, interval, square, two-gaussians, dirac.
    #[arg(long)]
    model: Option<String>,
    /// Alpha grid such as `2^-3..2^-10` or `0.1,0.05`.
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Override any config field: `--set n_grid=[100,200]`,
    /// `--set problem.eta.kind=first-coordinate`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn config_error(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), ExperimentError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(config_error(format!("bad key `{path}`")));
        }
        if !cur.is_object() {
            *cur = Value::Object(Map::new());
        }
        let obj = cur.as_object_mut().expect("object");
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn only_for(flag: &str, experiment: &str, allowed: &[&str]) -> Result<(), ExperimentError> {
    if allowed.contains(&experiment) {
        Ok(())
    } else {
        Err(config_error(format!("--{flag} does not apply to {experiment}")))
    }
}

fn build_params(args: &RunArgs) -> Result<Value, ExperimentError> {
    let exp = args.experiment.as_str();
    let mut params = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
        }
        None => json!({}),
    };
    if !params.is_object() {
        return Err(config_error("the config must be a JSON object"));
    }
    if let Some(name) = &args.model {
        let model = serde_json::to_value(ModelConfig::from_name(name)?)?;
        match exp {
            "dgkl-sweep" => set_path(&mut params, "model", model)?,
            "weak-consistency" | "strong-path" | "lb-check" | "concentration" => {
                // a new model takes its own default regression function
                set_path(&mut params, "problem", json!({ "model": model }))?
            }
            _ => return Err(config_error(format!("--model does not apply to {exp}"))),
        }
    }
    if let Some(grid) = &args.alphas {
        only_for("alphas", exp, &["dgkl-sweep"])?;
        set_path(&mut params, "alphas", json!(parse_grid(grid)?))?;
    }
    if let Some(p) = args.p {
        only_for("p", exp, &["prop12"])?;
        set_path(&mut params, "p", json!(p))?;
    }
    if let Some(h) = args.horizon {
        only_for("horizon", exp, &["prop12"])?;
        set_path(&mut params, "horizon", json!(h))?;
    }
    if let Some(t) = args.trials {
        only_for("trials", exp, &["weak-consistency", "prop12", "concentration"])?;
        set_path(&mut params, "trials", json!(t))?;
    }
    for s in &args.sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| config_error(format!("--set expects KEY=VALUE, got `{s}`")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut params, key.trim(), value)?;
    }
    Ok(params)
}

fn run(args: RunArgs) -> Result<ExitCode, ExperimentError> {
    let seed = args
        .seed
        .ok_or_else(|| config_error("--seed is required; runs are never seeded from the clock"))?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(config_error("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_error(e.to_string()))?;
    }
    let params = build_params(&args)?;
    let result = run_experiment(&args.experiment, params, seed)?;
    let (csv, manifest) = write_artifacts(&result, &args.outdir)?;
    println!("{}", csv.display());
    println!("{}", manifest.display());
    if result.violations.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for v in &result.violations {
            eprintln!("violation: {v}");
        }
        Ok(ExitCode::from(2))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::List => {
            for (name, about) in list_experiments() {
                println!("{name:<18}{about}");
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(*args) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
