//! Partitioned variables, the composite problem interface, solver
//! configuration and run telemetry shared by every solver.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Arc;

use ndarray::{s, Array1, ArrayView1, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line_search::ScalarProfile;
use crate::surrogates::{QuadraticForm, SmoothComposition};

/// Split of the flat variable into `K` contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    total: usize,
}

impl BlockPartition {
    pub fn new(block_sizes: &[usize]) -> Result<Self> {
        if block_sizes.is_empty() {
            return Err(Error::InvalidPartition("no blocks given".into()));
        }
        if let Some(k) = block_sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidPartition(format!("block {k} has size 0")));
        }
        let mut offsets = Vec::with_capacity(block_sizes.len());
        let mut total = 0;
        for &n in block_sizes {
            offsets.push(total);
            total += n;
        }
        Ok(Self {
            sizes: block_sizes.to_vec(),
            offsets,
            total,
        })
    }

    /// `blocks` contiguous groups over `total` coordinates; the remainder
    /// is spread one-per-block over the leading blocks.
    pub fn even(total: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 || blocks > total {
            return Err(Error::InvalidPartition(format!(
                "cannot split {total} coordinates into {blocks} nonempty blocks"
            )));
        }
        let base = total / blocks;
        let extra = total % blocks;
        let sizes: Vec<usize> = (0..blocks).map(|k| base + usize::from(k < extra)).collect();
        Self::new(&sizes)
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn block_size(&self, k: usize) -> usize {
        self.sizes[k]
    }

    pub fn range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k] + self.sizes[k]
    }
}

/// Convenience wrapper matching the partition constructor.
pub fn make_partition(block_sizes: &[usize]) -> Result<BlockPartition> {
    BlockPartition::new(block_sizes)
}

/// A point of the partitioned variable space.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPoint {
    values: Array1<f64>,
    partition: Arc<BlockPartition>,
}

impl BlockPoint {
    pub fn new(partition: Arc<BlockPartition>, values: Array1<f64>) -> Result<Self> {
        if values.len() != partition.total() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} entries, partition expects {}",
                values.len(),
                partition.total()
            )));
        }
        Ok(Self { values, partition })
    }

    pub fn zeros(partition: Arc<BlockPartition>) -> Self {
        let values = Array1::zeros(partition.total());
        Self { values, partition }
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array1<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array1<f64> {
        self.values
    }

    pub fn block(&self, k: usize) -> ArrayView1<'_, f64> {
        let r = self.partition.range(k);
        self.values.slice(s![r.start..r.end])
    }

    pub fn block_mut(&mut self, k: usize) -> ArrayViewMut1<'_, f64> {
        let r = self.partition.range(k);
        self.values.slice_mut(s![r.start..r.end])
    }

    pub fn set_block(&mut self, k: usize, block: ArrayView1<f64>) {
        self.block_mut(k).assign(&block);
    }

    /// Copy of `self` with block `k` replaced.
    pub fn with_block(&self, k: usize, block: ArrayView1<f64>) -> Self {
        let mut out = self.clone();
        out.set_block(k, block);
        out
    }
}

/// Per-block feasible set.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    Unconstrained,
    Box { lower: Array1<f64>, upper: Array1<f64> },
}

impl Constraint {
    pub fn bounds(lower: Array1<f64>, upper: Array1<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch("box bounds differ in length".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("box requires lower <= upper".into()));
        }
        Ok(Constraint::Box { lower, upper })
    }

    pub fn contains(&self, xk: ArrayView1<f64>) -> bool {
        match self {
            Constraint::Unconstrained => xk.iter().all(|v| v.is_finite()),
            Constraint::Box { lower, upper } => xk
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (l, u))| l <= v && v <= u),
        }
    }

    /// Elementwise projection; only meaningful for separable sets.
    pub fn clip(&self, xk: &mut Array1<f64>) {
        if let Constraint::Box { lower, upper } = self {
            for ((v, l), u) in xk.iter_mut().zip(lower.iter()).zip(upper.iter()) {
                *v = v.clamp(*l, *u);
            }
        }
    }
}

/// The nonsmooth convex term `g_k` of a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Penalty {
    Zero,
    L1(f64),
}

impl Penalty {
    pub fn value(&self, xk: ArrayView1<f64>) -> f64 {
        match *self {
            Penalty::Zero => 0.0,
            Penalty::L1(mu) => mu * xk.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    pub fn weight(&self) -> f64 {
        match *self {
            Penalty::Zero => 0.0,
            Penalty::L1(mu) => mu,
        }
    }
}

/// `h(x) = f(x) + sum_k g_k(x_k)` over a product of per-block sets.
///
/// Implementations must be pure: identical inputs give bit-identical
/// outputs. Coercivity of `h` (which guarantees limit points exist) is the
/// implementor's obligation and is not checked.
pub trait CompositeProblem {
    fn partition(&self) -> &Arc<BlockPartition>;

    fn smooth_value(&self, x: &BlockPoint) -> f64;

    fn block_gradient(&self, x: &BlockPoint, k: usize) -> Array1<f64>;

    fn penalty(&self, k: usize) -> Penalty;

    fn constraint(&self, k: usize) -> &Constraint;

    fn nonsmooth_value(&self, k: usize, xk: ArrayView1<f64>) -> f64 {
        self.penalty(k).value(xk)
    }

    /// Exact quadratic model of `f` in block `k` with the other blocks
    /// frozen at `x`, when `f` is quadratic in that block.
    fn block_quadratic_form(&self, _x: &BlockPoint, _k: usize) -> Option<QuadraticForm> {
        None
    }

    /// `f = f1(f2(x))` structure used by the partial linearization surrogates.
    fn composition(&self) -> Option<&dyn SmoothComposition> {
        None
    }

    /// Polynomial coefficients of `gamma -> f(x + gamma * direction) - f(x)`
    /// when that function is a polynomial of degree at most four.
    fn joint_profile(&self, _x: &BlockPoint, _direction: &BlockPoint) -> Option<ScalarProfile> {
        None
    }

    /// Same as [`CompositeProblem::joint_profile`] for a direction supported on one block.
    fn block_profile(
        &self,
        x: &BlockPoint,
        k: usize,
        delta: ArrayView1<f64>,
    ) -> Option<ScalarProfile> {
        let mut dir = BlockPoint::zeros(x.partition().clone());
        dir.set_block(k, delta);
        self.joint_profile(x, &dir)
    }
}

/// `h(x)`; fails when `x` leaves a block's feasible set.
pub fn objective<P: CompositeProblem + ?Sized>(problem: &P, x: &BlockPoint) -> Result<f64> {
    check_feasible(problem, x)?;
    Ok(objective_unchecked(problem, x))
}

pub(crate) fn objective_unchecked<P: CompositeProblem + ?Sized>(problem: &P, x: &BlockPoint) -> f64 {
    let k_total = problem.partition().num_blocks();
    problem.smooth_value(x)
        + (0..k_total)
            .map(|k| problem.nonsmooth_value(k, x.block(k)))
            .sum::<f64>()
}

pub fn check_feasible<P: CompositeProblem + ?Sized>(problem: &P, x: &BlockPoint) -> Result<()> {
    for k in 0..problem.partition().num_blocks() {
        if !problem.constraint(k).contains(x.block(k)) {
            return Err(Error::Infeasible {
                block: k,
                detail: "block lies outside its feasible set".into(),
            });
        }
    }
    Ok(())
}

/// Max-abs deviation between the analytic block gradient and central
/// differences with step `eps`.
pub fn block_gradient_check<P: CompositeProblem + ?Sized>(
    problem: &P,
    x: &BlockPoint,
    k: usize,
    eps: f64,
) -> f64 {
    let analytic = problem.block_gradient(x, k);
    let numeric = crate::oracles::finite_diff_block_gradient(|p| problem.smooth_value(p), x, k, eps);
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockRuleConfig {
    Cyclic,
    Random {
        /// `None` means uniform `1/K`.
        probabilities: Option<Vec<f64>>,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LineSearch {
    Exact,
    Successive {
        alpha: f64,
        beta: f64,
        max_exponent: u32,
    },
}

impl LineSearch {
    pub fn armijo() -> Self {
        LineSearch::Successive {
            alpha: 0.1,
            beta: 0.5,
            max_exponent: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub block_rule: BlockRuleConfig,
    pub line_search: LineSearch,
    /// Upper bound on block updates `t` (one parallel step counts as one).
    pub max_outer_iterations: usize,
    /// Inner iterations per outer step of the inexact solvers.
    pub inner_iterations: usize,
    /// Relative objective decrease over one sweep below which a run stops.
    pub stop_tol: f64,
    /// Proximal weight `c_k` shared by all blocks unless overridden.
    pub regularizer: f64,
    pub block_regularizers: Option<Vec<f64>>,
    /// Take unit steps for surrogates that are global upper bounds.
    pub unit_step_for_upper_bounds: bool,
    pub min_probability: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            block_rule: BlockRuleConfig::Cyclic,
            line_search: LineSearch::Exact,
            max_outer_iterations: 1000,
            inner_iterations: 1,
            stop_tol: 1e-8,
            regularizer: 1e-4,
            block_regularizers: None,
            unit_step_for_upper_bounds: true,
            min_probability: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn regularizer_for(&self, k: usize) -> f64 {
        self.block_regularizers
            .as_ref()
            .and_then(|c| c.get(k).copied())
            .unwrap_or(self.regularizer)
    }

    pub fn validate(&self, num_blocks: usize) -> Result<()> {
        if let LineSearch::Successive { alpha, beta, .. } = self.line_search {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::InvalidConfig(format!("alpha = {alpha} not in (0, 1)")));
            }
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::InvalidConfig(format!("beta = {beta} not in (0, 1)")));
            }
        }
        if self.inner_iterations == 0 {
            return Err(Error::InvalidConfig("inner iterations must be >= 1".into()));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidConfig("stop_tol must be nonnegative".into()));
        }
        for k in 0..num_blocks {
            let c = self.regularizer_for(k);
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "surrogate regularizer for block {k} must be positive, got {c}"
                )));
            }
        }
        if let Some(c) = &self.block_regularizers {
            if c.len() != num_blocks {
                return Err(Error::InvalidConfig("one regularizer per block expected".into()));
            }
        }
        if let BlockRuleConfig::Random {
            probabilities: Some(p),
            ..
        } = &self.block_rule
        {
            if p.len() != num_blocks {
                return Err(Error::InvalidConfig("one probability per block expected".into()));
            }
            if !(self.min_probability > 0.0) {
                return Err(Error::InvalidConfig("p_min must be positive".into()));
            }
            if p.iter().any(|&pk| !(pk >= self.min_probability)) {
                return Err(Error::InvalidConfig(format!(
                    "every block probability must be >= p_min = {}",
                    self.min_probability
                )));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("probabilities sum to {sum}, not 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Tolerance,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// 1-based block index; 0 for the initial row and for joint steps.
    pub block: usize,
    pub stepsize: f64,
    /// Backtracking exponent, or -1 for exact/unit steps.
    pub armijo_exponent: i64,
    pub objective: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub entries: Vec<TraceEntry>,
    pub final_point: BlockPoint,
    pub termination: TerminationReason,
}

pub const TRACE_HEADER: &str = "iter,block,stepsize,armijo_m,objective,elapsed_s";

impl RunTrace {
    pub fn final_objective(&self) -> f64 {
        self.entries.last().map(|e| e.objective).unwrap_or(f64::NAN)
    }

    /// Number of block updates performed (the initial row excluded).
    pub fn iterations(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.objective).collect()
    }

    pub fn elapsed(&self) -> f64 {
        self.entries.last().map(|e| e.elapsed_s).unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.entries.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{:.16e},{},{:.16e},{:.16e}",
                e.iteration, e.block, e.stepsize, e.armijo_exponent, e.objective, e.elapsed_s
            );
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Parse a trace CSV back into entries.
pub fn read_trace_csv<R: BufRead>(reader: R) -> Result<Vec<TraceEntry>> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != TRACE_HEADER {
        return Err(Error::Format {
            path: "<trace>".into(),
            detail: format!("unexpected header {header:?}"),
        });
    }
    let bad = |detail: String| Error::Format {
        path: "<trace>".into(),
        detail,
    };
    let mut entries = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(format!("expected 6 fields in {line:?}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
        let int = |s: &str| s.parse::<i64>().map_err(|e| bad(format!("{s:?}: {e}")));
        entries.push(TraceEntry {
            iteration: int(f[0])? as usize,
            block: int(f[1])? as usize,
            stepsize: num(f[2])?,
            armijo_exponent: int(f[3])?,
            objective: num(f[4])?,
            elapsed_s: num(f[5])?,
        });
    }
    Ok(entries)
}
