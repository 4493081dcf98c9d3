//! Runs a list of solver variants on one instance and tabulates them.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use bsca_core::io::Instance;
use bsca_core::model::RunTrace;
use serde::Deserialize;

use crate::options::{Resolved, SolveOptions};
use crate::{runner, CliError};

#[derive(Debug, Clone)]
pub struct Variant {
    pub name: String,
    pub options: Resolved,
}

#[derive(Debug, Deserialize)]
struct RawSpec {
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default)]
    defaults: SolveOptions,
    #[serde(default)]
    variant: Vec<toml::Table>,
}

fn default_tol() -> f64 {
    1e-6
}

/// A parsed bench file: the gap used for `iters_to_tol` and the variants.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub tol: f64,
    pub variants: Vec<Variant>,
}

impl BenchSpec {
    /// `[defaults]` fills options a `[[variant]]` leaves unset; `overrides`
    /// (command-line flags) win over both.
    pub fn parse(text: &str, overrides: &SolveOptions) -> Result<Self, CliError> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| CliError::Usage(format!("bad bench spec: {e}")))?;
        if raw.variant.is_empty() {
            return Err(CliError::Usage("bench spec lists no variants".into()));
        }
        if !(raw.tol >= 0.0) {
            return Err(CliError::Usage("bench tol must be nonnegative".into()));
        }
        let mut variants = Vec::new();
        for (i, mut table) in raw.variant.into_iter().enumerate() {
            let name = match table.remove("name") {
                Some(toml::Value::String(s)) => s,
                Some(_) => return Err(CliError::Usage(format!("variant {i}: name must be a string"))),
                None => format!("variant{i}"),
            };
            if name.is_empty() || name.contains(['/', '\\']) || variants.iter().any(|v: &Variant| v.name == name) {
                return Err(CliError::Usage(format!("variant name {name:?} is empty, a path, or repeated")));
            }
            let own: SolveOptions = table
                .try_into()
                .map_err(|e| CliError::Usage(format!("variant {name}: {e}")))?;
            let options = overrides.over(&own.over(&raw.defaults)).resolve()?;
            variants.push(Variant { name, options });
        }
        Ok(Self { tol: raw.tol, variants })
    }
}

/// Thread count from `BSCA_THREADS`, else the available parallelism.
pub fn thread_budget(jobs: usize) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var("BSCA_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(available);
    cap.min(jobs).max(1)
}

/// Runs every variant; results come back in spec order.
pub fn run_variants(instance: &Instance, variants: &[Variant]) -> Vec<Result<RunTrace, CliError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunTrace, CliError>>>> = variants.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..thread_budget(variants.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= variants.len() {
                    break;
                }
                let result = runner::run(instance, &variants[i].options);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every slot filled"))
        .collect()
}

/// First iteration whose objective is within `tol` (relative) of `best`.
pub fn iters_to_tol(trace: &RunTrace, best: f64, tol: f64) -> Option<usize> {
    let target = best + tol * best.abs();
    trace
        .entries
        .iter()
        .find(|e| e.objective <= target)
        .map(|e| e.iteration)
}

pub const COMPARISON_HEADER: &str = "variant,final_objective,iters_to_tol,seconds";

/// `comparison.csv` rows; failed variants get empty numeric fields.
pub fn comparison_csv(variants: &[Variant], results: &[Result<RunTrace, CliError>], tol: f64) -> String {
    let best = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(RunTrace::final_objective)
        .fold(f64::INFINITY, f64::min);
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for (v, r) in variants.iter().zip(results) {
        match r {
            Ok(trace) => {
                let iters = iters_to_tol(trace, best, tol).map_or(String::new(), |n| n.to_string());
                out.push_str(&format!(
                    "{},{:.17e},{},{:.6}\n",
                    v.name,
                    trace.final_objective(),
                    iters,
                    trace.elapsed()
                ));
            }
            Err(_) => out.push_str(&format!("{},,,\n", v.name)),
        }
    }
    out
}

pub fn read_spec(path: &Path, overrides: &SolveOptions) -> Result<BenchSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read bench spec {}: {e}", path.display())))?;
    BenchSpec::parse(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::options::Algorithm;

    #[test]
    fn spec_layers_defaults_and_overrides() {
        let text = r#"
tol = 1e-4
[defaults]
max_iters = 50
blocks = 2
[[variant]]
name = "a"
algorithm = "bgd"
[[variant]]
name = "b"
blocks = 10
"#;
        let spec = BenchSpec::parse(text, &SolveOptions::default()).unwrap();
        assert_eq!(spec.tol, 1e-4);
        assert_eq!(spec.variants[0].options.algorithm, Algorithm::Bgd);
        assert_eq!(spec.variants[0].options.blocks, 2);
        assert_eq!(spec.variants[1].options.blocks, 10);
        assert_eq!(spec.variants[1].options.max_iters, 50);
        let flags = SolveOptions {
            max_iters: Some(7),
            ..Default::default()
        };
        let spec = BenchSpec::parse(text, &flags).unwrap();
        assert!(spec.variants.iter().all(|v| v.options.max_iters == 7));
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(BenchSpec::parse("tol = 1e-3", &SolveOptions::default()).is_err());
        assert!(BenchSpec::parse("[[variant]]\nname = \"a\"\nbogus = 1", &SolveOptions::default()).is_err());
        assert!(BenchSpec::parse("[[variant]]\nname = \"a\"\n[[variant]]\nname = \"a\"", &SolveOptions::default()).is_err());
    }
}
