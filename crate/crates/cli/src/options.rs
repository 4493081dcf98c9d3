//! Solver options: command-line flags layered over an optional TOML file
//! layered over built-in defaults.

use std::path::Path;

use bsca_core::model::{BlockRuleConfig, LineSearch, SolverConfig};
use bsca_core::surrogates::SurrogateKind;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Bsca,
    InexactBsca,
    ParallelSca,
    Bgd,
    Bpgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Cyclic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineSearchKind {
    Exact,
    Armijo,
}

/// Every field is optional so that flags, file and defaults can be merged.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    #[arg(long, value_enum)]
    pub algorithm: Option<Algorithm>,
    /// Number of contiguous coordinate blocks (phase retrieval).
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long, value_enum)]
    pub rule: Option<Rule>,
    /// Inner iterations per outer step of the inexact solvers.
    #[arg(long)]
    pub inner_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub line_search: Option<LineSearchKind>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Proximal weight of the surrogates.
    #[arg(long)]
    pub c: Option<f64>,
    /// Relative objective decrease per sweep at which a run stops.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Maximum number of outer iterations (block updates).
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Seeds the initial point and the random block rule.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Surrogate for the generic solvers, e.g. `hybrid` or `quadratic`.
    #[arg(long)]
    pub surrogate: Option<String>,
    /// Discount on the Bregman constant (bpgd only).
    #[arg(long)]
    pub discount: Option<f64>,
    /// Overrides the instance's sparsity weight.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Overrides the instance's ridge weight (anomaly only).
    #[arg(long)]
    pub lambda: Option<f64>,
}

macro_rules! layer {
    ($top:expr, $bottom:expr, $($field:ident),*) => {
        SolveOptions { $($field: $top.$field.clone().or_else(|| $bottom.$field.clone())),* }
    };
}

impl SolveOptions {
    /// Fields set in `self` win over those in `below`.
    pub fn over(&self, below: &SolveOptions) -> SolveOptions {
        layer!(
            self, below, algorithm, blocks, rule, inner_iters, line_search, alpha, beta, c, tol,
            max_iters, seed, surrogate, discount, mu, lambda
        )
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let surrogate = match &self.surrogate {
            None => None,
            Some(name) => Some(parse_surrogate(name)?),
        };
        Ok(Resolved {
            algorithm: self.algorithm.unwrap_or(Algorithm::Bsca),
            blocks: self.blocks.unwrap_or(1),
            rule: self.rule.unwrap_or(Rule::Cyclic),
            inner_iters: self.inner_iters.unwrap_or(1),
            line_search: self.line_search.unwrap_or(LineSearchKind::Exact),
            alpha: self.alpha.unwrap_or(0.1),
            beta: self.beta.unwrap_or(0.5),
            c: self.c.unwrap_or(1e-4),
            tol: self.tol.unwrap_or(1e-8),
            max_iters: self.max_iters.unwrap_or(10_000),
            seed: self.seed.unwrap_or(0),
            surrogate,
            discount: self.discount.unwrap_or(1.0),
            mu: self.mu,
            lambda: self.lambda,
        })
    }
}

fn parse_surrogate(name: &str) -> Result<SurrogateKind, CliError> {
    let wanted = name.replace('-', "_");
    SurrogateKind::ALL.into_iter().find(|k| k.name() == wanted).ok_or_else(|| {
        let names: Vec<_> = SurrogateKind::ALL.iter().map(|k| k.name()).collect();
        CliError::Usage(format!("unknown surrogate {name:?}; expected one of {}", names.join(", ")))
    })
}

/// Fully specified options, as recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub algorithm: Algorithm,
    pub blocks: usize,
    pub rule: Rule,
    pub inner_iters: usize,
    pub line_search: LineSearchKind,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateKind>,
    pub discount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl Resolved {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            block_rule: match self.rule {
                Rule::Cyclic => BlockRuleConfig::Cyclic,
                Rule::Random => BlockRuleConfig::Random {
                    probabilities: None,
                    seed: self.seed,
                },
            },
            line_search: match self.line_search {
                LineSearchKind::Exact => LineSearch::Exact,
                LineSearchKind::Armijo => LineSearch::Successive {
                    alpha: self.alpha,
                    beta: self.beta,
                    max_exponent: 60,
                },
            },
            max_outer_iterations: self.max_iters,
            inner_iterations: self.inner_iters,
            stop_tol: self.tol,
            regularizer: self.c,
            ..SolverConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let file: SolveOptions = toml::from_str("blocks = 4\ntol = 1e-3\nalgorithm = \"inexact-bsca\"").unwrap();
        let flags = SolveOptions {
            blocks: Some(10),
            ..Default::default()
        };
        let r = flags.over(&file).resolve().unwrap();
        assert_eq!(r.blocks, 10);
        assert_eq!(r.tol, 1e-3);
        assert_eq!(r.algorithm, Algorithm::InexactBsca);
        assert_eq!(r.max_iters, 10_000);
    }

    #[test]
    fn unknown_keys_and_surrogates_are_rejected() {
        assert!(toml::from_str::<SolveOptions>("bloks = 4").is_err());
        let opts = SolveOptions {
            surrogate: Some("cubic".into()),
            ..Default::default()
        };
        assert!(opts.resolve().is_err());
        let opts = SolveOptions {
            surrogate: Some("partial-linearization".into()),
            ..Default::default()
        };
        assert_eq!(opts.resolve().unwrap().surrogate, Some(SurrogateKind::PartialLinearization));
    }
}
