//! `bsca`: generate instances, run solvers, compare variants, and repeat
//! recorded runs.
//!
//! Exit codes: 0 ok, 2 usage (bad flags, unreadable inputs), 3 runtime
//! (solver or write failure).

mod bench;
mod manifest;
mod options;
mod runner;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsca_core::applications::anomaly::generate_anomaly_instance;
use bsca_core::applications::phase_retrieval::generate_pr_instance;
use bsca_core::io::{load_instance, save_anomaly_instance, save_pr_instance, Instance};
use bsca_core::model::RunTrace;
use clap::{Parser, Subcommand};

use manifest::{unix_now, RunManifest, VariantRecord, RUN_MANIFEST};
use options::SolveOptions;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "bsca", version, about = "Block successive convex approximation solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic instance directory.
    Generate {
        #[command(subcommand)]
        app: GenerateApp,
    },
    /// Solve one instance and write `trace.csv` plus `run.toml`.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        options: SolveOptions,
        /// TOML file with the same keys as the flags; flags win.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "bsca-run")]
        out: PathBuf,
    },
    /// Run every variant of a bench spec on one instance.
    Bench {
        instance: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        /// Applied to every variant, over the spec's own settings.
        #[command(flatten)]
        options: SolveOptions,
        #[arg(long, default_value = "bsca-bench")]
        out: PathBuf,
    },
    /// Repeat a recorded run and check the traces match.
    Reproduce {
        /// A `run.toml`, or the directory holding one.
        manifest: PathBuf,
        /// Defaults to `reproduce/` next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum GenerateApp {
    /// Sparse phase retrieval: `I` unknowns, `N` measurements.
    Pr {
        #[arg(long = "I")]
        unknowns: usize,
        #[arg(long = "N")]
        measurements: usize,
        #[arg(long, default_value_t = 0.01)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replaces the data-derived sparsity weight.
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value = "instance")]
        out: PathBuf,
    },
    /// Low-rank plus sparse: `Y` is `N x K`, `D` is `N x I`.
    Anomaly {
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "K")]
        k: usize,
        #[arg(long = "I")]
        i: usize,
        #[arg(long)]
        rho: usize,
        #[arg(long, default_value_t = 0.05)]
        density: f64,
        #[arg(long, default_value_t = 1e-4)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value = "instance")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate { app } => cmd_generate(app),
        Command::Solve {
            instance,
            options,
            config,
            out,
        } => {
            let file = match config {
                Some(path) => SolveOptions::from_file(&path)?,
                None => SolveOptions::default(),
            };
            let resolved = options.over(&file).resolve()?;
            let trace = cmd_solve(&instance, &resolved, &out)?;
            println!("{}", summary(&trace));
            Ok(())
        }
        Command::Bench {
            instance,
            spec,
            options,
            out,
        } => cmd_bench(&instance, &spec, &options, &out),
        Command::Reproduce { manifest, out } => cmd_reproduce(&manifest, out),
    }
}

fn summary(trace: &RunTrace) -> String {
    format!(
        "final_objective={} iters={} seconds={:.6}",
        trace.final_objective(),
        trace.iterations(),
        trace.elapsed()
    )
}

fn runtime_io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

fn cmd_generate(app: GenerateApp) -> Result<(), CliError> {
    let usage = |e: bsca_core::Error| CliError::Usage(e.to_string());
    let runtime = |e: bsca_core::Error| CliError::Runtime(e.to_string());
    match app {
        GenerateApp::Pr {
            unknowns,
            measurements,
            density,
            seed,
            mu,
            out,
        } => {
            let mut inst = generate_pr_instance(unknowns, measurements, density, 1, seed).map_err(usage)?;
            if let Some(mu) = mu {
                if !(mu >= 0.0) {
                    return Err(CliError::Usage(format!("mu must be nonnegative, got {mu}")));
                }
                inst.mu = mu;
            }
            let params = BTreeMap::from([
                ("unknowns".to_string(), unknowns as f64),
                ("measurements".to_string(), measurements as f64),
                ("density".to_string(), density),
            ]);
            save_pr_instance(&out, &inst, seed, params).map_err(runtime)?;
        }
        GenerateApp::Anomaly {
            n,
            k,
            i,
            rho,
            density,
            noise,
            seed,
            mu,
            lambda,
            out,
        } => {
            let mut inst = generate_anomaly_instance(n, k, i, rho, density, noise, seed).map_err(usage)?;
            if let Some(mu) = mu {
                inst.mu = mu;
            }
            if let Some(lambda) = lambda {
                inst.lambda = lambda;
            }
            let params = BTreeMap::from([
                ("n".to_string(), n as f64),
                ("k".to_string(), k as f64),
                ("i".to_string(), i as f64),
                ("density".to_string(), density),
                ("noise_var".to_string(), noise),
            ]);
            save_anomaly_instance(&out, &inst, seed, params).map_err(runtime)?;
        }
    }
    Ok(())
}

fn load(path: &Path, blocks: usize) -> Result<Instance, CliError> {
    load_instance(path, blocks)
        .map(|(inst, _)| inst)
        .map_err(|e| CliError::Usage(format!("cannot load instance {}: {e}", path.display())))
}

fn write_trace(path: &Path, trace: &RunTrace) -> Result<(), CliError> {
    fs::write(path, trace.to_csv()).map_err(runtime_io(path))
}

fn cmd_solve(instance: &Path, opts: &options::Resolved, out: &Path) -> Result<RunTrace, CliError> {
    let started = unix_now();
    let inst = load(instance, 1)?;
    let trace = runner::run(&inst, opts)?;
    fs::create_dir_all(out).map_err(runtime_io(out))?;
    write_trace(&out.join("trace.csv"), &trace)?;
    let mut manifest = RunManifest::new("solve", instance, started);
    manifest.seeds = vec![opts.seed];
    manifest.outputs = vec!["trace.csv".into()];
    manifest.variants = vec![VariantRecord {
        name: "solve".into(),
        trace: Some("trace.csv".into()),
        options: opts.clone(),
        error: None,
    }];
    manifest.write(out)?;
    Ok(trace)
}

fn cmd_bench(instance: &Path, spec_path: &Path, overrides: &SolveOptions, out: &Path) -> Result<(), CliError> {
    let started = unix_now();
    let spec = bench::read_spec(spec_path, overrides)?;
    let inst = load(instance, 1)?;
    let results = bench::run_variants(&inst, &spec.variants);

    fs::create_dir_all(out).map_err(runtime_io(out))?;
    let mut manifest = RunManifest::new("bench", instance, started);
    manifest.bench_tol = Some(spec.tol);
    for (v, r) in spec.variants.iter().zip(&results) {
        manifest.seeds.push(v.options.seed);
        let record = match r {
            Ok(trace) => {
                let dir = out.join(&v.name);
                fs::create_dir_all(&dir).map_err(runtime_io(&dir))?;
                write_trace(&dir.join("trace.csv"), trace)?;
                let rel = format!("{}/trace.csv", v.name);
                manifest.outputs.push(rel.clone());
                VariantRecord {
                    name: v.name.clone(),
                    trace: Some(rel),
                    options: v.options.clone(),
                    error: None,
                }
            }
            Err(e) => {
                eprintln!("variant {} failed: {}", v.name, e.message());
                VariantRecord {
                    name: v.name.clone(),
                    trace: None,
                    options: v.options.clone(),
                    error: Some(e.message().to_string()),
                }
            }
        };
        manifest.variants.push(record);
    }
    let csv_path = out.join("comparison.csv");
    fs::write(&csv_path, bench::comparison_csv(&spec.variants, &results, spec.tol)).map_err(runtime_io(&csv_path))?;
    manifest.outputs.push("comparison.csv".into());
    manifest.write(out)?;

    let ok = results.iter().filter(|r| r.is_ok()).count();
    println!("variants={} succeeded={} comparison={}", results.len(), ok, csv_path.display());
    if ok == 0 {
        return Err(CliError::Runtime("every bench variant failed".into()));
    }
    Ok(())
}

/// Trace rows without the wall-clock column.
fn timing_free(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

fn cmd_reproduce(path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let manifest_path = if path.is_dir() { path.join(RUN_MANIFEST) } else { path.to_path_buf() };
    let recorded = RunManifest::read(&manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out = out.unwrap_or_else(|| base.join("reproduce"));
    let inst = load(&recorded.instance, 1)?;
    fs::create_dir_all(&out).map_err(runtime_io(&out))?;

    let mut mismatches = Vec::new();
    let mut checked = 0;
    for v in &recorded.variants {
        let Some(rel) = &v.trace else { continue };
        let original = fs::read_to_string(base.join(rel))
            .map_err(|e| CliError::Usage(format!("cannot read recorded trace {rel}: {e}")))?;
        let trace = runner::run(&inst, &v.options)?;
        let target = out.join(rel);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(runtime_io(parent))?;
        }
        write_trace(&target, &trace)?;
        checked += 1;
        if timing_free(&original) != timing_free(&trace.to_csv()) {
            mismatches.push(v.name.clone());
        }
    }
    if !mismatches.is_empty() {
        return Err(CliError::Runtime(format!("traces differ for: {}", mismatches.join(", "))));
    }
    println!("reproduced {checked} trace(s): identical apart from elapsed_s");
    Ok(())
}
