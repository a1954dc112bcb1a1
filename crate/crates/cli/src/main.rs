use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use imbalance_core::datagen::{calibrate_to_fdr, generate, save_csv, CsvSchema, GenSpec};
use imbalance_core::harness::{emit_charts, read_rows_csv, run_benchmark, write_outputs, BenchConfig};
use imbalance_core::{compute_fdr, Error};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ALL_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "bench", version, about = "Class-imbalance mitigation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dataset × technique × repetition matrix and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; BENCH_THREADS takes precedence.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Generate a synthetic dataset from a JSON spec and write it as CSV.
    Datagen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Skip FDR calibration even when the generator spec sets a target.
        #[arg(long)]
        no_calibrate: bool,
    },
    /// Print a report CSV, optionally rendering its charts next to it.
    Report {
        #[arg(long)]
        rows: PathBuf,
        #[arg(long)]
        charts: bool,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
    AllFailed,
}

fn threads_override() -> Result<Option<usize>, Failure> {
    match std::env::var("BENCH_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Config(Error::Config(format!("BENCH_THREADS={v:?} is not a number")))),
        Err(_) => Ok(None),
    }
}

fn run(
    config: &Path,
    out: &Path,
    reps: Option<usize>,
    seed: Option<u64>,
    parallel: Option<usize>,
) -> Result<(), Failure> {
    let mut cfg = BenchConfig::from_path(config).map_err(Failure::Config)?;
    if let Some(r) = reps {
        cfg.repetitions = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(p) = threads_override()?.or(parallel) {
        cfg.parallel = p;
    }
    cfg.validate().map_err(Failure::Config)?;
    let outcome = run_benchmark(&cfg).map_err(|e| match e {
        Error::Io(_) => Failure::Runtime(e),
        other => Failure::Config(other),
    })?;
    write_outputs(&outcome, out).map_err(Failure::Runtime)?;
    for r in &outcome.rows {
        println!(
            "{:<16} {:<24} f1={:<10} status={}",
            r.dataset,
            r.technique,
            r.mean_f1.map_or("n/a".to_string(), |v| format!("{v:.4}")),
            r.status
        );
    }
    if outcome.all_failed() {
        return Err(Failure::AllFailed);
    }
    Ok(())
}

fn datagen(spec_path: &Path, out: &Path, no_calibrate: bool) -> Result<(), Failure> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| Failure::Config(e.into()))?;
    let spec: GenSpec = serde_json::from_str(&text).map_err(|e| Failure::Config(e.into()))?;
    let spec = if spec.target_fdr.is_some() && !no_calibrate {
        calibrate_to_fdr(&spec).map_err(Failure::Config)?
    } else {
        spec
    };
    let ds = generate(&spec).map_err(Failure::Config)?;
    let names: Vec<&str> = spec.feature_names.iter().map(String::as_str).collect();
    save_csv(&ds, &CsvSchema::new(&names, "label"), out).map_err(Failure::Runtime)?;
    let fdr = compute_fdr(&ds).map(|f| f.mean).unwrap_or(f64::NAN);
    println!(
        "wrote {} rows ({:?} per class), separation {:.6}, FDR {:.4}",
        ds.n_samples(),
        ds.class_counts(),
        spec.separation,
        fdr
    );
    Ok(())
}

fn report(rows_path: &Path, charts: bool) -> Result<(), Failure> {
    let rows = read_rows_csv(rows_path).map_err(Failure::Config)?;
    if rows.is_empty() {
        return Err(Failure::Config(Error::Config("report has no rows".into())));
    }
    for r in &rows {
        println!(
            "{:<16} {:<24} f1={:<10} improvement={:<10} status={}",
            r.dataset,
            r.technique,
            r.mean_f1.map_or("n/a".to_string(), |v| format!("{v:.4}")),
            r.improvement_pct.map_or("n/a".to_string(), |v| format!("{v:.2}%")),
            r.status
        );
    }
    if charts {
        let dir = rows_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        emit_charts(&rows, dir).map_err(Failure::Runtime)?;
        println!("charts written to {}", dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            config,
            out,
            reps,
            seed,
            parallel,
        } => run(config, out, *reps, *seed, *parallel),
        Command::Datagen {
            spec,
            out,
            no_calibrate,
        } => datagen(spec, out, *no_calibrate),
        Command::Report { rows, charts } => report(rows, *charts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error [{}]: {e}", e.id());
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error [{}]: {e}", e.id());
            ExitCode::from(EXIT_FAILURE)
        }
        Err(Failure::AllFailed) => {
            eprintln!("every benchmark cell failed");
            ExitCode::from(EXIT_ALL_FAILED)
        }
    }
}
