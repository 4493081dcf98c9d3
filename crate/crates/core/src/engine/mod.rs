//! Outer loops: block SCA with exact or inexact subproblem solves, the
//! parallel (Jacobi) SCA baseline, block gradient descent, and the
//! Bregman proximal gradient baseline in [`bpgd`].
//!
//! Every solver shares the same step guard: a step is kept only when the
//! objective strictly decreases; otherwise it is recorded as `gamma = 0`.
//! In exact arithmetic the guard never fires, it only absorbs rounding
//! near a fixed point.

pub mod bpgd;

use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::line_search::{
    descent_quantity, exact_quadratic_step, exact_step, successive_step, StepResult,
};
use crate::linalg::norm2;
use crate::model::{
    check_feasible, objective, objective_unchecked, BlockPoint, BlockRuleConfig, CompositeProblem,
    Constraint, LineSearch, Penalty, RunTrace, SolverConfig, TerminationReason, TraceEntry,
};
use crate::surrogates::{make_surrogate, solve_surrogate, InnerSurrogateModel, QuadraticForm, SurrogateKind};

pub use bpgd::{bpgd_step, run_bpgd, BregmanBaselineSpec};

/// Relative size below which a candidate counts as the current block.
pub const STATIONARITY_EPS: f64 = 1e-12;

/// Relative width of the band in which objective values are
/// indistinguishable from rounding.
pub const ROUNDING_SLACK: f64 = 1e3 * f64::EPSILON;

/// Block selection state. Owns its RNG under the random rule.
#[derive(Debug, Clone)]
pub struct BlockRule {
    num_blocks: usize,
    random: Option<(WeightedIndex<f64>, ChaCha8Rng)>,
}

impl BlockRule {
    pub fn new(config: &BlockRuleConfig, num_blocks: usize) -> Result<Self> {
        if num_blocks == 0 {
            return Err(Error::InvalidArgument("block rule needs K >= 1".into()));
        }
        let random = match config {
            BlockRuleConfig::Cyclic => None,
            BlockRuleConfig::Random { probabilities, seed } => {
                let p = probabilities
                    .clone()
                    .unwrap_or_else(|| vec![1.0 / num_blocks as f64; num_blocks]);
                if p.len() != num_blocks {
                    return Err(Error::InvalidConfig("one probability per block expected".into()));
                }
                let dist = WeightedIndex::new(&p)
                    .map_err(|e| Error::InvalidConfig(format!("block probabilities: {e}")))?;
                Some((dist, ChaCha8Rng::seed_from_u64(*seed)))
            }
        };
        Ok(Self { num_blocks, random })
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    /// 0-based block for iteration `t`.
    pub fn next_block(&mut self, t: usize) -> usize {
        match &mut self.random {
            None => t % self.num_blocks,
            Some((dist, rng)) => rng.sample(&*dist),
        }
    }
}

/// 1-based block index `k = mod(t, K) + 1` under the cyclic rule, a draw
/// from the block distribution under the random rule.
pub fn select_block(rule: &mut BlockRule, t: usize) -> usize {
    rule.next_block(t) + 1
}

/// Surrogate kind per block; a single entry applies to all blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateCatalog {
    kinds: Vec<SurrogateKind>,
}

impl SurrogateCatalog {
    pub fn uniform(kind: SurrogateKind) -> Self {
        Self { kinds: vec![kind] }
    }

    pub fn per_block(kinds: Vec<SurrogateKind>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::InvalidConfig("empty surrogate catalog".into()));
        }
        Ok(Self { kinds })
    }

    pub fn kind(&self, k: usize) -> SurrogateKind {
        if self.kinds.len() == 1 {
            self.kinds[0]
        } else {
            self.kinds[k]
        }
    }

    fn validate(&self, num_blocks: usize) -> Result<()> {
        if self.kinds.len() != 1 && self.kinds.len() != num_blocks {
            return Err(Error::InvalidConfig(format!(
                "catalog lists {} kinds for {num_blocks} blocks",
                self.kinds.len()
            )));
        }
        Ok(())
    }
}

/// Inner-layer settings of the inexact solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InexactSpec {
    pub inner_iterations: usize,
    pub inner_line_search: LineSearch,
}

impl InexactSpec {
    pub fn from_config(config: &SolverConfig) -> Self {
        Self {
            inner_iterations: config.inner_iterations,
            inner_line_search: config.line_search,
        }
    }
}

/// Result of the inner loop on one outer subproblem.
#[derive(Debug, Clone)]
pub struct InnerOutcome {
    /// `x~_k^t`
    pub point: Array1<f64>,
    /// `h~(x_k^{t,tau}; x^t)` for every inner iterate, starting at `tau = 0`.
    pub chain: Vec<f64>,
    pub steps: Vec<StepResult>,
}

fn is_negligible(delta: ArrayView1<f64>, xk: ArrayView1<f64>) -> bool {
    norm2(delta) <= STATIONARITY_EPS * (1.0 + norm2(xk))
}

/// Inner iterations on `min f~(x_k; x^t) + g_k(x_k)` over `X_k` with the
/// elementwise best response of `f~` as inner approximation.
///
/// Stops early once the inner candidate coincides with the inner iterate.
pub fn inner_loop(
    outer: &QuadraticForm,
    start: ArrayView1<f64>,
    penalty: &Penalty,
    constraint: &Constraint,
    spec: &InexactSpec,
) -> Result<InnerOutcome> {
    if spec.inner_iterations == 0 {
        return Err(Error::InvalidConfig("inner iterations must be >= 1".into()));
    }
    let h_tilde = |z: ArrayView1<f64>| outer.value(z) + penalty.value(z);
    let mut z = start.to_owned();
    let mut chain = vec![h_tilde(z.view())];
    let mut steps = Vec::new();
    for _ in 0..spec.inner_iterations {
        let inner = InnerSurrogateModel::new(outer, z.view())?;
        let b = inner.minimize(penalty, constraint);
        let delta = &b - &z;
        if is_negligible(delta.view(), z.view()) {
            break;
        }
        let grad = outer.gradient(z.view());
        let dg = penalty.value(b.view()) - penalty.value(z.view());
        let step = match spec.inner_line_search {
            LineSearch::Exact => {
                let a2 = outer.curvature(delta.view());
                exact_quadratic_step(a2, grad.dot(&delta) + dg)?
            }
            LineSearch::Successive {
                alpha,
                beta,
                max_exponent,
            } => {
                let d = descent_quantity(grad.view(), b.view(), z.view(), penalty.value(b.view()), penalty.value(z.view()));
                if !(d < 0.0) {
                    break;
                }
                let phi = |g: f64| outer.value((&z + &(&delta * g)).view());
                successive_step(phi, dg, d, alpha, beta, max_exponent)?
            }
        };
        if step.gamma == 0.0 {
            break;
        }
        let next = &z + &(&delta * step.gamma);
        let value = h_tilde(next.view());
        let last = *chain.last().unwrap();
        // an exact step's profile value bounds the true change from above,
        // so a negative one is a decrease even when rounding hides it
        let certified = matches!(spec.inner_line_search, LineSearch::Exact)
            && step.profile_value < 0.0
            && value - last <= ROUNDING_SLACK * last.abs();
        if !(value < last || certified) {
            break;
        }
        z = next;
        chain.push(value);
        steps.push(step);
    }
    Ok(InnerOutcome {
        point: z,
        chain,
        steps,
    })
}

/// Candidate `B_k x^t` (or its inexact version `x~_k^t`).
#[derive(Debug, Clone)]
pub struct BlockCandidate {
    pub point: Array1<f64>,
    pub upper_bound: bool,
    pub inner: Option<InnerOutcome>,
}

/// How a candidate is obtained when the surrogate has no closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMode {
    /// Closed form only.
    Exact,
    /// Always run the inner loop on the outer quadratic form.
    Inexact(InexactSpec),
    /// Closed form when available, inner loop otherwise.
    Fallback(InexactSpec),
}

pub fn block_candidate(
    problem: &dyn CompositeProblem,
    catalog: &SurrogateCatalog,
    x: &BlockPoint,
    k: usize,
    config: &SolverConfig,
    mode: SolveMode,
) -> Result<BlockCandidate> {
    let model = make_surrogate(problem, catalog.kind(k), x, k, config.regularizer_for(k))?;
    let penalty = problem.penalty(k);
    let constraint = problem.constraint(k);
    let run_inner = |spec: &InexactSpec| -> Result<BlockCandidate> {
        let form = model.quadratic_form().ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{} surrogate has no quadratic form, so the inner closed form is unavailable",
                model.kind().name()
            ))
        })?;
        let outcome = inner_loop(form, x.block(k), &penalty, constraint, spec)?;
        Ok(BlockCandidate {
            point: outcome.point.clone(),
            upper_bound: model.is_global_upper_bound(),
            inner: Some(outcome),
        })
    };
    match mode {
        SolveMode::Inexact(spec) => run_inner(&spec),
        SolveMode::Exact | SolveMode::Fallback(_) => match solve_surrogate(&model, &penalty, constraint) {
            Ok(point) => Ok(BlockCandidate {
                point,
                upper_bound: model.is_global_upper_bound(),
                inner: None,
            }),
            Err(Error::NoClosedForm(_)) if matches!(mode, SolveMode::Fallback(_)) => {
                let SolveMode::Fallback(spec) = mode else { unreachable!() };
                run_inner(&spec)
            }
            Err(e) => Err(e),
        },
    }
}

/// Outcome of one block update.
#[derive(Debug, Clone)]
pub struct BlockStep {
    pub point: BlockPoint,
    pub objective: f64,
    pub step: StepResult,
    /// `d_k(x^t)`; zero for skipped steps.
    pub descent: f64,
    /// False for skips and reverted steps.
    pub effective: bool,
}

impl BlockStep {
    fn skipped(x: &BlockPoint, h: f64, descent: f64) -> Self {
        Self {
            point: x.clone(),
            objective: h,
            step: StepResult::zero(),
            descent,
            effective: false,
        }
    }
}

/// Moves block `k` from `x_k` towards `candidate` with the configured
/// stepsize rule. `h_x` must be `h(x)`.
pub fn apply_direction(
    problem: &dyn CompositeProblem,
    x: &BlockPoint,
    h_x: f64,
    k: usize,
    candidate: ArrayView1<f64>,
    line_search: LineSearch,
    unit_step: bool,
) -> Result<BlockStep> {
    let xk = x.block(k);
    let delta = &candidate - &xk;
    if is_negligible(delta.view(), xk) {
        return Ok(BlockStep::skipped(x, h_x, 0.0));
    }
    let grad = problem.block_gradient(x, k);
    let g_b = problem.nonsmooth_value(k, candidate);
    let g_x = problem.nonsmooth_value(k, xk);
    let d = descent_quantity(grad.view(), candidate, xk, g_b, g_x);
    if !d.is_finite() {
        return Err(Error::NonFinite(format!("descent quantity of block {}", k + 1)));
    }
    if !(d < 0.0) {
        return Ok(BlockStep::skipped(x, h_x, d));
    }
    let dg = g_b - g_x;
    let step = if unit_step {
        StepResult::unit(f64::NAN)
    } else {
        match line_search {
            LineSearch::Exact => {
                let profile = problem
                    .block_profile(x, k, delta.view())
                    .ok_or(Error::ExactLineSearchUnavailable)?;
                exact_step(&profile.with_nonsmooth_slope(dg))?
            }
            LineSearch::Successive {
                alpha,
                beta,
                max_exponent,
            } => {
                let phi = |g: f64| {
                    problem.smooth_value(&x.with_block(k, (&xk + &(&delta * g)).view()))
                };
                successive_step(phi, dg, d, alpha, beta, max_exponent)?
            }
        }
    };
    if step.gamma == 0.0 {
        return Ok(BlockStep::skipped(x, h_x, d));
    }
    let new_block = &xk + &(&delta * step.gamma);
    if !problem.constraint(k).contains(new_block.view()) {
        return Err(Error::Infeasible {
            block: k,
            detail: "update left the feasible set".into(),
        });
    }
    let point = x.with_block(k, new_block.view());
    let h_new = objective_unchecked(problem, &point);
    if !h_new.is_finite() {
        return Err(Error::NonFinite(format!("objective after updating block {}", k + 1)));
    }
    if !(h_new < h_x) {
        return Ok(BlockStep::skipped(x, h_x, d));
    }
    Ok(BlockStep {
        point,
        objective: h_new,
        step,
        descent: d,
        effective: true,
    })
}

/// One exact block SCA update of block `k` (0-based).
pub fn bsca_step(
    problem: &dyn CompositeProblem,
    catalog: &SurrogateCatalog,
    x: &BlockPoint,
    k: usize,
    config: &SolverConfig,
) -> Result<BlockStep> {
    let h_x = objective(problem, x)?;
    let cand = block_candidate(problem, catalog, x, k, config, SolveMode::Exact)?;
    let unit = config.unit_step_for_upper_bounds && cand.upper_bound;
    apply_direction(problem, x, h_x, k, cand.point.view(), config.line_search, unit)
}

/// Trace bookkeeping and the sweep-level stopping rule.
pub(crate) struct Recorder {
    start: Instant,
    entries: Vec<TraceEntry>,
    sweep_len: usize,
    sweep_start: f64,
    stop_tol: f64,
    in_sweep: usize,
}

impl Recorder {
    pub(crate) fn new(h0: f64, sweep_len: usize, stop_tol: f64) -> Self {
        let start = Instant::now();
        let entries = vec![TraceEntry {
            iteration: 0,
            block: 0,
            stepsize: 0.0,
            armijo_exponent: -1,
            objective: h0,
            elapsed_s: 0.0,
        }];
        Self {
            start,
            entries,
            sweep_len: sweep_len.max(1),
            sweep_start: h0,
            stop_tol,
            in_sweep: 0,
        }
    }

    /// Appends one update; returns true when the stopping rule fires.
    pub(crate) fn record(&mut self, block: usize, step: &StepResult, objective: f64) -> bool {
        let iteration = self.entries.len();
        self.entries.push(TraceEntry {
            iteration,
            block,
            stepsize: step.gamma,
            armijo_exponent: step.armijo_exponent.map_or(-1, i64::from),
            objective,
            elapsed_s: self.start.elapsed().as_secs_f64(),
        });
        self.in_sweep += 1;
        if self.in_sweep < self.sweep_len {
            return false;
        }
        self.in_sweep = 0;
        let decrease = self.sweep_start - objective;
        self.sweep_start = objective;
        decrease <= self.stop_tol * objective.abs()
    }

    pub(crate) fn finish(self, final_point: BlockPoint, termination: TerminationReason) -> RunTrace {
        RunTrace {
            entries: self.entries,
            final_point,
            termination,
        }
    }
}

fn prepare(
    problem: &dyn CompositeProblem,
    catalog: &SurrogateCatalog,
    x0: &BlockPoint,
    config: &SolverConfig,
) -> Result<(BlockRule, f64)> {
    let k_total = problem.partition().num_blocks();
    if x0.partition().as_ref() != problem.partition().as_ref() {
        return Err(Error::DimensionMismatch("initial point partition differs from the problem's".into()));
    }
    config.validate(k_total)?;
    catalog.validate(k_total)?;
    check_feasible(problem, x0)?;
    let rule = BlockRule::new(&config.block_rule, k_total)?;
    Ok((rule, objective_unchecked(problem, x0)))
}

fn run_blockwise(
    problem: &dyn CompositeProblem,
    catalog: &SurrogateCatalog,
    x0: &BlockPoint,
    config: &SolverConfig,
    mode: SolveMode,
) -> Result<RunTrace> {
    let (mut rule, h0) = prepare(problem, catalog, x0, config)?;
    let mut rec = Recorder::new(h0, rule.num_blocks(), config.stop_tol);
    let mut x = x0.clone();
    let mut h = h0;
    for t in 0..config.max_outer_iterations {
        let k = rule.next_block(t);
        let cand = block_candidate(problem, catalog, &x, k, config, mode)?;
        let unit = config.unit_step_for_upper_bounds && cand.upper_bound;
        let step = apply_direction(problem, &x, h, k, cand.point.view(), config.line_search, unit)?;
        x = step.point;
        h = step.objective;
        if rec.record(k + 1, &step.step, h) {
            return Ok(rec.finish(x, TerminationReason::Tolerance));
        }
    }
    Ok(rec.finish(x, TerminationReason::MaxIterations))
}

/// Block SCA with closed-form subproblem solutions.
pub fn run_bsca(
    problem: &dyn CompositeProblem,
    catalog: &SurrogateCatalog,
    x0: &BlockPoint,
    config: &SolverConfig,
) -> Result<RunTrace> {
    run_blockwise(problem, catalog, x0, config, SolveMode::Exact)
}

/// Inexact block SCA: the outer subproblem is approximated by
/// `config.inner_iterations` inner steps, then the outer line search
/// runs along `x~_k^t - x_k^t`.
pub fn run_inexact_bsca(
    problem: &dyn CompositeProblem,
    catalog: &SurrogateCatalog,
    x0: &BlockPoint,
    config: &SolverConfig,
    spec: &InexactSpec,
) -> Result<RunTrace> {
    if spec.inner_iterations == 0 {
        return Err(Error::InvalidConfig("inner iterations must be >= 1".into()));
    }
    run_blockwise(problem, catalog, x0, config, SolveMode::Inexact(*spec))
}

/// Block gradient descent: block SCA with the quadratic surrogate.
pub fn run_bgd(problem: &dyn CompositeProblem, x0: &BlockPoint, config: &SolverConfig) -> Result<RunTrace> {
    run_bsca(problem, &SurrogateCatalog::uniform(SurrogateKind::Quadratic), x0, config)
}

/// One Jacobi step: every block solved against the same anchor, then a
/// joint line search along the stacked direction.
pub fn parallel_sca_step(
    problem: &dyn CompositeProblem,
    catalog: &SurrogateCatalog,
    x: &BlockPoint,
    h_x: f64,
    config: &SolverConfig,
) -> Result<BlockStep> {
    let k_total = problem.partition().num_blocks();
    let mode = SolveMode::Fallback(InexactSpec::from_config(config));
    let mut direction = BlockPoint::zeros(x.partition().clone());
    let mut d = 0.0;
    let mut dg = 0.0;
    let mut moving = false;
    for k in 0..k_total {
        let cand = block_candidate(problem, catalog, x, k, config, mode)?;
        let xk = x.block(k);
        let delta = &cand.point - &xk;
        if is_negligible(delta.view(), xk) {
            continue;
        }
        moving = true;
        let g_b = problem.nonsmooth_value(k, cand.point.view());
        let g_x = problem.nonsmooth_value(k, xk);
        d += descent_quantity(problem.block_gradient(x, k).view(), cand.point.view(), xk, g_b, g_x);
        dg += g_b - g_x;
        direction.set_block(k, delta.view());
    }
    if !moving || !(d < 0.0) {
        return Ok(BlockStep::skipped(x, h_x, if moving { d } else { 0.0 }));
    }
    let along = |g: f64| {
        let mut p = x.clone();
        p.values_mut().scaled_add(g, direction.values());
        p
    };
    let step = match config.line_search {
        LineSearch::Exact => {
            let profile = problem
                .joint_profile(x, &direction)
                .ok_or(Error::ExactLineSearchUnavailable)?;
            exact_step(&profile.with_nonsmooth_slope(dg))?
        }
        LineSearch::Successive {
            alpha,
            beta,
            max_exponent,
        } => successive_step(|g| problem.smooth_value(&along(g)), dg, d, alpha, beta, max_exponent)?,
    };
    if step.gamma == 0.0 {
        return Ok(BlockStep::skipped(x, h_x, d));
    }
    let point = along(step.gamma);
    check_feasible(problem, &point)?;
    let h_new = objective_unchecked(problem, &point);
    if !h_new.is_finite() {
        return Err(Error::NonFinite("objective after a parallel step".into()));
    }
    if !(h_new < h_x) {
        return Ok(BlockStep::skipped(x, h_x, d));
    }
    Ok(BlockStep {
        point,
        objective: h_new,
        step,
        descent: d,
        effective: true,
    })
}

/// Parallel SCA. Subproblems without a closed form are solved by the
/// inner loop with `config.inner_iterations` steps. Each iteration is one
/// sweep; trace rows carry block 0.
pub fn run_parallel_sca(
    problem: &dyn CompositeProblem,
    catalog: &SurrogateCatalog,
    x0: &BlockPoint,
    config: &SolverConfig,
) -> Result<RunTrace> {
    let (_, h0) = prepare(problem, catalog, x0, config)?;
    let mut rec = Recorder::new(h0, 1, config.stop_tol);
    let mut x = x0.clone();
    let mut h = h0;
    for _ in 0..config.max_outer_iterations {
        let step = parallel_sca_step(problem, catalog, &x, h, config)?;
        x = step.point;
        h = step.objective;
        if rec.record(0, &step.step, h) {
            return Ok(rec.finish(x, TerminationReason::Tolerance));
        }
    }
    Ok(rec.finish(x, TerminationReason::MaxIterations))
}

/// `||B_k x - x_k||` with `B_k` from the catalog surrogate; subproblems
/// without a closed form use the inner loop with `config.inner_iterations`.
pub fn block_residual(
    problem: &dyn CompositeProblem,
    catalog: &SurrogateCatalog,
    x: &BlockPoint,
    k: usize,
    config: &SolverConfig,
) -> Result<f64> {
    let mode = SolveMode::Fallback(InexactSpec::from_config(config));
    let cand = block_candidate(problem, catalog, x, k, config, mode)?;
    Ok(norm2((&cand.point - &x.block(k)).view()))
}
