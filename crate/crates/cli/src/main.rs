use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlirl::estimators::EstimatorKind;
use mlirl::harness::{
    emit_outputs, read_config, ExperimentConfig, ExperimentOutput, PreparedEnv, RawConfig, Scale,
    SummaryRow,
};
use mlirl::irl::Algorithm;
use mlirl::oracle::run_oracle_suite;
use mlirl::IrlError;

#[derive(Parser)]
#[command(name = "mlirl", version, about = "Maximum-likelihood IRL workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Sailing: every algorithm with every estimator.
    Table1 {
        #[command(flatten)]
        flags: Overrides,
    },
    /// Both grid-world layouts with every estimator.
    Gridworlds {
        #[command(flatten)]
        flags: Overrides,
    },
    /// Finite-difference, FP/IA and Monte Carlo checks.
    Oracle,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["desk", "paper"])]
    scale: Option<String>,
    /// Number of repeats.
    #[arg(long)]
    repeats: Option<usize>,
}

impl Overrides {
    fn apply(&self, raw: &mut RawConfig) -> mlirl::Result<()> {
        let pairs = [
            ("env", self.env.clone()),
            ("algorithm", self.algo.clone()),
            ("estimator", self.estimator.clone()),
            ("iterations", self.iters.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("scale", self.scale.clone()),
            ("repeats", self.repeats.map(|v| v.to_string())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                raw.set(key, v)?;
            }
        }
        Ok(())
    }

    fn scale(&self) -> mlirl::Result<Scale> {
        self.scale.as_deref().map_or(Ok(Scale::Desk), str::parse)
    }
}

fn exit_code(e: &IrlError) -> u8 {
    match e.root() {
        IrlError::Config(_) | IrlError::Parse { .. } | IrlError::NotFound(_) => 2,
        IrlError::NonConvergence { .. } => 3,
        IrlError::Io { .. } => 4,
        _ => 1,
    }
}

fn print_summary(env: &str, summary: &[SummaryRow]) {
    println!("{env}");
    println!(
        "  {:<6} {:<4} {:>16} {:>12} {:>10} {:>10} {:>5} {:>5}",
        "algo", "est", "value_true", "sd", "agree", "total_s", "runs", "fail"
    );
    for s in summary {
        println!(
            "  {:<6} {:<4} {:>16.6} {:>12.3e} {:>10.4} {:>10.3} {:>5} {:>5}",
            s.algorithm.to_string(),
            s.estimator.to_string(),
            s.mean_value_true,
            s.sd_value_true,
            s.mean_agreement,
            s.mean_total_s,
            s.n_repeats,
            s.failures
        );
    }
}

fn finish(output: &ExperimentOutput, out_dir: &Path) -> mlirl::Result<u8> {
    let files = emit_outputs(output, out_dir)?;
    println!("wrote {} files to {}", files.len(), out_dir.display());
    for f in &output.failures {
        eprintln!(
            "{}-{} run {} failed{}: {}",
            f.algorithm,
            f.estimator,
            f.run_id,
            f.iteration.map(|i| format!(" at iteration {i}")).unwrap_or_default(),
            f.message
        );
    }
    Ok(match output.failures.iter().find(|f| f.non_convergence) {
        Some(_) => 3,
        None if output.failures.is_empty() => 0,
        None => 1,
    })
}

/// Runs every `(algorithm, estimator)` combination on `env`, narrowed by
/// `--algo` and `--estimator` when given.
fn sweep(envs: &[String], flags: &Overrides, default_out: &str) -> mlirl::Result<u8> {
    let algorithms = match &flags.algo {
        Some(a) => vec![a.parse::<Algorithm>().map_err(|e| IrlError::Config(e.to_string()))?],
        None => Algorithm::ALL.to_vec(),
    };
    let estimators = match &flags.estimator {
        Some(e) => vec![e.parse::<EstimatorKind>().map_err(|e| IrlError::Config(e.to_string()))?],
        None => EstimatorKind::ALL.to_vec(),
    };
    let out_dir = flags.out.clone().unwrap_or_else(|| PathBuf::from(default_out));
    let mut all = ExperimentOutput::default();
    for env in envs {
        let prepared = PreparedEnv::named(env)?;
        let mut per_env = ExperimentOutput::default();
        for &alg in &algorithms {
            for &est in &estimators {
                let mut raw = RawConfig::default();
                flags.apply(&mut raw)?;
                raw.set("env", env.as_str())?;
                raw.set("algorithm", alg.to_string())?;
                raw.set("estimator", est.to_string())?;
                let cfg = ExperimentConfig::resolve(&raw)?;
                per_env.extend(mlirl::harness::run_experiment_on(&prepared, &cfg)?);
            }
        }
        print_summary(env, &per_env.summary());
        if envs.len() > 1 {
            emit_outputs(&per_env, &out_dir.join(env))?;
        }
        all.extend(per_env);
    }
    if envs.len() > 1 {
        println!("per-environment outputs in {}", out_dir.display());
        return Ok(if all.failures.is_empty() { 0 } else { 1 });
    }
    finish(&all, &out_dir)
}

fn run(cli: Cli) -> mlirl::Result<u8> {
    match cli.command {
        Command::Run { config, flags } => {
            let mut raw = read_config(&config)?;
            flags.apply(&mut raw)?;
            let cfg = ExperimentConfig::resolve(&raw)?;
            let output = mlirl::harness::run_experiment(&cfg)?;
            print_summary(&cfg.env, &output.summary());
            let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            finish(&output, &out_dir)
        }
        Command::Table1 { flags } => {
            let env = match (&flags.env, flags.scale()?) {
                (Some(e), _) => e.clone(),
                (None, Scale::Desk) => "sailing-small".to_string(),
                (None, Scale::Paper) => "sailing-paper".to_string(),
            };
            sweep(&[env], &flags, "out/table1")
        }
        Command::Gridworlds { flags } => {
            let envs = match &flags.env {
                Some(e) => vec![e.clone()],
                None => vec!["narrow-passage-2x2".to_string(), "paths-10x10".to_string()],
            };
            sweep(&envs, &flags, "out/gridworlds")
        }
        Command::Oracle => {
            let reports = run_oracle_suite()?;
            for r in &reports {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            Ok(if reports.iter().all(|r| r.passed) { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
