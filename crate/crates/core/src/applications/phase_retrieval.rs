//! Sparse phase retrieval
//! `min 1/4 sum_n ((a_n^T x)^2 - y_n)^2 + mu ||x||_1`
//! with `A = [a_1 ... a_N]` of shape `I x N`, split row-wise into blocks.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::engine::{inner_loop, InexactSpec, Recorder, BlockRule, STATIONARITY_EPS};
use crate::error::{Error, Result};
use crate::line_search::{
    descent_quantity, exact_quadratic_step, exact_step, successive_step, ScalarProfile, StepResult,
};
use crate::linalg::{norm1, norm2};
use crate::model::{
    BlockPartition, BlockPoint, CompositeProblem, Constraint, LineSearch, Penalty, RunTrace,
    SolverConfig, TerminationReason,
};
use crate::surrogates::{Hessian, HessianOperator, InnerSurrogateModel, QuadraticForm, SmoothComposition};

#[derive(Debug, Clone)]
pub struct PhaseRetrievalInstance {
    /// `I x N`, column `n` is the sampling vector `a_n`.
    pub a: Array2<f64>,
    pub y: Array1<f64>,
    pub mu: f64,
    pub x_true: Option<Array1<f64>>,
    partition: Arc<BlockPartition>,
}

impl PhaseRetrievalInstance {
    pub fn new(a: Array2<f64>, y: Array1<f64>, mu: f64, blocks: usize) -> Result<Self> {
        if a.ncols() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} columns but y has {} entries",
                a.ncols(),
                y.len()
            )));
        }
        if y.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument("measurements y must be nonnegative".into()));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!("mu must be nonnegative, got {mu}")));
        }
        let partition = Arc::new(BlockPartition::even(a.nrows(), blocks)?);
        Ok(Self {
            a,
            y,
            mu,
            x_true: None,
            partition,
        })
    }

    /// Same data, contiguous equal-size blocks.
    pub fn with_blocks(&self, blocks: usize) -> Result<Self> {
        let mut out = self.clone();
        out.partition = Arc::new(BlockPartition::even(self.a.nrows(), blocks)?);
        Ok(out)
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn num_unknowns(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_measurements(&self) -> usize {
        self.a.ncols()
    }

    /// `A_k`, the rows of block `k`.
    pub fn block_rows(&self, k: usize) -> ArrayView2<'_, f64> {
        let r = self.partition.range(k);
        self.a.slice(s![r.start..r.end, ..])
    }

    /// `A^T x`
    pub fn measurements_of(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.a.t().dot(&x)
    }

    pub fn smooth_value_at(&self, x: ArrayView1<f64>) -> f64 {
        let u = self.measurements_of(x);
        0.25 * u
            .iter()
            .zip(self.y.iter())
            .map(|(&ui, &yi)| (ui * ui - yi).powi(2))
            .sum::<f64>()
    }

    pub fn objective_at(&self, x: ArrayView1<f64>) -> f64 {
        self.smooth_value_at(x) + self.mu * norm1(x)
    }

    /// Full gradient `A (u o l)`.
    pub fn gradient_at(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let u = self.measurements_of(x);
        self.a.dot(&weighted_residual(&u, &self.y))
    }

    /// Seeded `N(0, 1/I)` starting point.
    pub fn initial_point(&self, seed: u64) -> BlockPoint {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (self.num_unknowns() as f64).sqrt();
        let values = Array1::from_shape_fn(self.num_unknowns(), |_| {
            scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        BlockPoint::new(self.partition.clone(), values).expect("length matches partition")
    }
}

/// `u o l(x)` with `l = u^2 - y`.
fn weighted_residual(u: &Array1<f64>, y: &Array1<f64>) -> Array1<f64> {
    Array1::from_iter(u.iter().zip(y.iter()).map(|(&ui, &yi)| ui * (ui * ui - yi)))
}

/// The phase retrieval objective as a [`CompositeProblem`], with
/// `f = f1(f2(x))`, `f1(v) = 1/4 ||v||^2` and `f2 = l`.
#[derive(Debug, Clone)]
pub struct PhaseRetrievalProblem<'a> {
    inst: &'a PhaseRetrievalInstance,
    constraints: Vec<Constraint>,
}

impl<'a> PhaseRetrievalProblem<'a> {
    pub fn new(inst: &'a PhaseRetrievalInstance) -> Self {
        let k = inst.partition().num_blocks();
        Self {
            inst,
            constraints: vec![Constraint::Unconstrained; k],
        }
    }

    /// Same problem with per-block boxes.
    pub fn with_constraints(inst: &'a PhaseRetrievalInstance, constraints: Vec<Constraint>) -> Result<Self> {
        if constraints.len() != inst.partition().num_blocks() {
            return Err(Error::InvalidConfig("one constraint per block expected".into()));
        }
        Ok(Self { inst, constraints })
    }

    pub fn instance(&self) -> &PhaseRetrievalInstance {
        self.inst
    }
}

impl CompositeProblem for PhaseRetrievalProblem<'_> {
    fn partition(&self) -> &Arc<BlockPartition> {
        self.inst.partition()
    }

    fn smooth_value(&self, x: &BlockPoint) -> f64 {
        self.inst.smooth_value_at(x.values().view())
    }

    fn block_gradient(&self, x: &BlockPoint, k: usize) -> Array1<f64> {
        let u = self.inst.measurements_of(x.values().view());
        self.inst.block_rows(k).dot(&weighted_residual(&u, &self.inst.y))
    }

    fn penalty(&self, _k: usize) -> Penalty {
        Penalty::L1(self.inst.mu)
    }

    fn constraint(&self, k: usize) -> &Constraint {
        &self.constraints[k]
    }

    fn composition(&self) -> Option<&dyn SmoothComposition> {
        Some(self)
    }

    fn joint_profile(&self, x: &BlockPoint, direction: &BlockPoint) -> Option<ScalarProfile> {
        let u = self.inst.measurements_of(x.values().view());
        let w = self.inst.measurements_of(direction.values().view());
        Some(quartic_coefficients(&u, &w, &self.inst.y, 0.0))
    }

    fn block_profile(&self, x: &BlockPoint, k: usize, delta: ArrayView1<f64>) -> Option<ScalarProfile> {
        let u = self.inst.measurements_of(x.values().view());
        let w = self.inst.block_rows(k).t().dot(&delta);
        Some(quartic_coefficients(&u, &w, &self.inst.y, 0.0))
    }
}

impl SmoothComposition for PhaseRetrievalProblem<'_> {
    fn inner_map(&self, x: &BlockPoint) -> Array1<f64> {
        let u = self.inst.measurements_of(x.values().view());
        &u * &u - &self.inst.y
    }

    fn inner_block_jacobian(&self, x: &BlockPoint, k: usize) -> Array2<f64> {
        let u = self.inst.measurements_of(x.values().view());
        let mut j = self.inst.block_rows(k).t().to_owned();
        for (mut row, &un) in j.axis_iter_mut(Axis(0)).zip(u.iter()) {
            row *= 2.0 * un;
        }
        j
    }

    fn outer_value(&self, v: ArrayView1<f64>) -> f64 {
        0.25 * v.dot(&v)
    }

    fn outer_gradient(&self, v: ArrayView1<f64>) -> Array1<f64> {
        v.mapv(|t| 0.5 * t)
    }

    fn outer_hessian(&self) -> Option<Array2<f64>> {
        Some(Array2::eye(self.inst.num_measurements()) * 0.5)
    }
}

/// `v4..v1` of `gamma -> f(x + gamma dx) - f(x) + gamma dg` with
/// `u = A^T x` and `w = A^T dx`.
fn quartic_coefficients(u: &Array1<f64>, w: &Array1<f64>, y: &Array1<f64>, dg: f64) -> ScalarProfile {
    let (mut v4, mut v3, mut v2, mut v1) = (0.0, 0.0, 0.0, 0.0);
    for ((&un, &wn), &yn) in u.iter().zip(w.iter()).zip(y.iter()) {
        let w2 = wn * wn;
        v4 += w2 * w2;
        v3 += un * w2 * wn;
        v2 += (3.0 * un * un - yn) * w2;
        v1 += wn * (un * un * un - un * yn);
    }
    ScalarProfile::Quartic {
        v4,
        v3: 3.0 * v3,
        v2,
        v1: v1 + dg,
    }
}

/// `D = 2 A_k diag(u^2) A_k^T + c I`, applied without forming it.
#[derive(Debug, Clone)]
pub struct GaussNewtonHessian {
    a_k: Array2<f64>,
    /// `2 u^2`
    weights: Array1<f64>,
    c: f64,
}

impl HessianOperator for GaussNewtonHessian {
    fn dim(&self) -> usize {
        self.a_k.nrows()
    }

    fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let t = self.a_k.t().dot(&v) * &self.weights;
        self.a_k.dot(&t) + &(&v * self.c)
    }

    fn diagonal(&self) -> Array1<f64> {
        let sq = self.a_k.mapv(|v| v * v);
        sq.dot(&self.weights) + self.c
    }
}

/// Outer approximation `1/2 x_k^T D x_k - x_k^T b` of block `k` at `x^t`.
#[derive(Debug, Clone)]
pub struct PROuterModel {
    pub form: QuadraticForm,
    pub anchor: Array1<f64>,
    pub block: usize,
    pub c: f64,
}

impl PROuterModel {
    pub fn dense_hessian(&self) -> Array2<f64> {
        self.form.hessian.to_dense(self.anchor.len())
    }

    pub fn linear(&self) -> &Array1<f64> {
        &self.form.linear
    }
}

pub fn pr_outer_model(
    inst: &PhaseRetrievalInstance,
    x: &BlockPoint,
    k: usize,
    c: f64,
) -> Result<PROuterModel> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    let u = inst.measurements_of(x.values().view());
    let a_k = inst.block_rows(k).to_owned();
    let grad = a_k.dot(&weighted_residual(&u, &inst.y));
    let op = GaussNewtonHessian {
        a_k,
        weights: u.mapv(|v| 2.0 * v * v),
        c,
    };
    let anchor = x.block(k).to_owned();
    let linear = op.apply(anchor.view()) - &grad;
    Ok(PROuterModel {
        form: QuadraticForm::new(Hessian::Operator(Arc::new(op)), linear),
        anchor,
        block: k,
        c,
    })
}

/// Soft-thresholded Jacobi step: minimizer of the elementwise best
/// response of the outer model at `z` plus `mu ||.||_1`.
pub fn pr_inner_solve(model: &PROuterModel, z: ArrayView1<f64>, mu: f64) -> Result<Array1<f64>> {
    let inner = InnerSurrogateModel::new(&model.form, z)?;
    Ok(inner.minimize(&Penalty::L1(mu), &Constraint::Unconstrained))
}

/// Exact inner stepsize along `B - z` on the outer model.
pub fn pr_inner_stepsize(
    model: &PROuterModel,
    z: ArrayView1<f64>,
    b: ArrayView1<f64>,
    mu: f64,
) -> Result<StepResult> {
    let delta = &b - &z;
    if norm2(delta.view()) <= STATIONARITY_EPS * (1.0 + norm2(z)) {
        return Ok(StepResult::zero());
    }
    let a2 = model.form.curvature(delta.view());
    let a1 = model.form.gradient(z).dot(&delta) + mu * (norm1(b) - norm1(z));
    exact_quadratic_step(a2, a1)
}

/// Quartic profile of the outer step along `x~_k - x_k`, including the
/// linearized l1 term.
pub fn pr_outer_profile(
    inst: &PhaseRetrievalInstance,
    x: &BlockPoint,
    candidate: ArrayView1<f64>,
    k: usize,
    mu: f64,
) -> ScalarProfile {
    let u = inst.measurements_of(x.values().view());
    let delta = &candidate - &x.block(k);
    let w = inst.block_rows(k).t().dot(&delta);
    let dg = mu * (norm1(candidate) - norm1(x.block(k)));
    quartic_coefficients(&u, &w, &inst.y, dg)
}

const AUDIT_PROBES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Checks the quartic profile against direct objective differences.
pub fn audit_outer_profile(
    inst: &PhaseRetrievalInstance,
    x: &BlockPoint,
    candidate: ArrayView1<f64>,
    k: usize,
    mu: f64,
    profile: &ScalarProfile,
    probes: &[f64],
) -> Result<()> {
    let f0 = inst.smooth_value_at(x.values().view());
    let g0 = mu * norm1(x.block(k));
    let g1 = mu * norm1(candidate);
    let xk = x.block(k);
    let mut probe = x.clone();
    for &gamma in probes {
        probe.set_block(k, (&xk + &((&candidate - &xk) * gamma)).view());
        let f1 = inst.smooth_value_at(probe.values().view());
        let direct = f1 - f0 + gamma * (g1 - g0);
        let model = profile.value(gamma);
        let scale = f0.abs() + f1.abs() + gamma * (g0.abs() + g1.abs());
        if !((direct - model).abs() <= 1e-8 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::ProfileMismatch(format!(
                "gamma = {gamma}: direct {direct:e}, polynomial {model:e}"
            )));
        }
    }
    Ok(())
}

/// Exact outer stepsize: minimizer of the audited quartic over `[0, 1]`.
pub fn pr_outer_stepsize(
    inst: &PhaseRetrievalInstance,
    x: &BlockPoint,
    candidate: ArrayView1<f64>,
    k: usize,
    mu: f64,
) -> Result<StepResult> {
    let profile = pr_outer_profile(inst, x, candidate, k, mu);
    audit_outer_profile(inst, x, candidate, k, mu, &profile, &AUDIT_PROBES)?;
    exact_step(&profile)
}

/// Inexact block SCA with the partial linearization outer model, the
/// soft-thresholded Jacobi inner model, and exact stepsizes in both layers.
pub fn run_phase_retrieval(
    inst: &PhaseRetrievalInstance,
    x0: &BlockPoint,
    config: &SolverConfig,
) -> Result<RunTrace> {
    let problem = PhaseRetrievalProblem::new(inst);
    let k_total = inst.partition().num_blocks();
    config.validate(k_total)?;
    if x0.partition().as_ref() != inst.partition().as_ref() {
        return Err(Error::DimensionMismatch("initial point partition differs from the instance's".into()));
    }
    if x0.values().iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument(
            "initial point must be nonzero: the origin is a stationary point of f".into(),
        ));
    }
    let spec = InexactSpec::from_config(config);
    let mut rule = BlockRule::new(&config.block_rule, k_total)?;
    let mu = inst.mu;
    let mut x = x0.clone();
    let mut h = inst.objective_at(x.values().view());
    let mut rec = Recorder::new(h, k_total, config.stop_tol);
    for t in 0..config.max_outer_iterations {
        let k = rule.next_block(t);
        let model = pr_outer_model(inst, &x, k, config.regularizer_for(k))?;
        let inner = inner_loop(&model.form, x.block(k), &Penalty::L1(mu), &Constraint::Unconstrained, &spec)?;
        let cand = inner.point;
        let step = outer_step(&problem, &x, h, k, cand.view(), config.line_search)?;
        if let Some((point, value, _)) = &step {
            x = point.clone();
            h = *value;
        }
        let result = step.map(|s| s.2).unwrap_or_else(StepResult::zero);
        if rec.record(k + 1, &result, h) {
            return Ok(rec.finish(x, TerminationReason::Tolerance));
        }
    }
    Ok(rec.finish(x, TerminationReason::MaxIterations))
}

/// `None` when the step is skipped or rejected by the decrease guard.
fn outer_step(
    problem: &PhaseRetrievalProblem<'_>,
    x: &BlockPoint,
    h: f64,
    k: usize,
    cand: ArrayView1<f64>,
    line_search: LineSearch,
) -> Result<Option<(BlockPoint, f64, StepResult)>> {
    let inst = problem.instance();
    let xk = x.block(k);
    let delta = &cand - &xk;
    if norm2(delta.view()) <= STATIONARITY_EPS * (1.0 + norm2(xk)) {
        return Ok(None);
    }
    let grad = problem.block_gradient(x, k);
    let (g_b, g_x) = (inst.mu * norm1(cand), inst.mu * norm1(xk));
    let d = descent_quantity(grad.view(), cand, xk, g_b, g_x);
    if !(d < 0.0) {
        return Ok(None);
    }
    let step = match line_search {
        LineSearch::Exact => pr_outer_stepsize(inst, x, cand, k, inst.mu)?,
        LineSearch::Successive {
            alpha,
            beta,
            max_exponent,
        } => {
            let phi = |g: f64| problem.smooth_value(&x.with_block(k, (&xk + &(&delta * g)).view()));
            successive_step(phi, g_b - g_x, d, alpha, beta, max_exponent)?
        }
    };
    if step.gamma == 0.0 {
        return Ok(None);
    }
    let point = x.with_block(k, (&xk + &(&delta * step.gamma)).view());
    let value = inst.objective_at(point.values().view());
    if !value.is_finite() {
        return Err(Error::NonFinite("phase retrieval objective".into()));
    }
    if !(value < h) {
        return Ok(None);
    }
    Ok(Some((point, value, step)))
}

/// Gaussian `A` whose rows (one per unknown) have unit norm, `ceil(density I)`-sparse Gaussian
/// `x_true`, `y = (A^T x_true)^2` and `mu = 0.05 ||A y||_inf`.
pub fn generate_pr_instance(
    unknowns: usize,
    measurements: usize,
    density: f64,
    blocks: usize,
    seed: u64,
) -> Result<PhaseRetrievalInstance> {
    if unknowns == 0 || measurements == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!("density must lie in (0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Array2::from_shape_fn((unknowns, measurements), |_| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    });
    for mut row in a.rows_mut() {
        let n = norm2(row.view());
        if n > 0.0 {
            row /= n;
        }
    }
    let support = ((density * unknowns as f64).ceil() as usize).clamp(1, unknowns);
    let mut x_true = Array1::zeros(unknowns);
    for i in sample(&mut rng, unknowns, support).into_iter() {
        x_true[i] = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
    }
    let y = a.t().dot(&x_true).mapv(|v| v * v);
    let mu = 0.05 * a.dot(&y).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut inst = PhaseRetrievalInstance::new(a, y, mu, blocks)?;
    inst.x_true = Some(x_true);
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::block_gradient_check;
    use crate::oracles;
    use ndarray::array;

    fn scalar_instance(y: f64, mu: f64) -> PhaseRetrievalInstance {
        PhaseRetrievalInstance::new(array![[1.0]], array![y], mu, 1).unwrap()
    }

    #[test]
    fn outer_model_scalar_toy() {
        let inst = scalar_instance(0.0, 0.0);
        let x = BlockPoint::new(inst.partition().clone(), array![1.0]).unwrap();
        let m = pr_outer_model(&inst, &x, 0, 0.1).unwrap();
        assert!((m.dense_hessian()[[0, 0]] - 2.1).abs() < 1e-15);
        assert!((m.linear()[0] - 1.1).abs() < 1e-15);
        let fd = oracles::finite_diff_gradient(|z| m.form.value(z), x.block(0), 1e-6);
        assert!((fd[0] - 1.0).abs() < 1e-6);

        let x = BlockPoint::zeros(inst.partition().clone());
        let m = pr_outer_model(&inst, &x, 0, 0.1).unwrap();
        assert_eq!(m.dense_hessian()[[0, 0]], 0.1);
        assert_eq!(m.linear()[0], 0.0);
    }

    #[test]
    fn outer_model_gradient_matches_finite_differences() {
        let inst = generate_pr_instance(12, 30, 0.25, 3, 5).unwrap();
        let p = PhaseRetrievalProblem::new(&inst);
        let x = inst.initial_point(1);
        for k in 0..3 {
            let m = pr_outer_model(&inst, &x, k, 1e-4).unwrap();
            let fd = oracles::finite_diff_block_gradient(|q| p.smooth_value(q), &x, k, 1e-6);
            let g = m.form.gradient(x.block(k));
            assert!(norm2((&g - &fd).view()) < 1e-5);
            assert!(block_gradient_check(&p, &x, k, 1e-6) < 1e-5);
        }
    }

    #[test]
    fn inner_solve_examples() {
        let inst = generate_pr_instance(6, 15, 0.3, 2, 2).unwrap();
        let x = inst.initial_point(4);
        let m = pr_outer_model(&inst, &x, 1, 1e-3).unwrap();
        // mu = 0: plain Jacobi step
        let z = x.block(1).to_owned();
        let b = pr_inner_solve(&m, z.view(), 0.0).unwrap();
        let jac = &z - &(m.form.gradient(z.view()) / &m.form.diagonal());
        assert!(norm2((&b - &jac).view()) < 1e-14);
        // per-coordinate scalar oracle with mu > 0
        let mu = 0.05;
        let b = pr_inner_solve(&m, z.view(), mu).unwrap();
        let inner = InnerSurrogateModel::new(&m.form, z.view()).unwrap();
        for i in 0..z.len() {
            let phi = |t: f64| {
                let mut v = z.clone();
                v[i] = t;
                inner.value(v.view()) + mu * t.abs()
            };
            let t = oracles::golden_section_on(phi, -10.0, 10.0, 1e-11);
            assert!((t - b[i]).abs() < 1e-6, "coordinate {i}: {t} vs {}", b[i]);
        }
    }

    #[test]
    fn inner_stepsize_example() {
        // D = 2, b = 0, z = 1, B = 0
        let form = QuadraticForm::new(Hessian::ScaledIdentity(2.0), array![0.0]);
        let m = PROuterModel {
            form,
            anchor: array![1.0],
            block: 0,
            c: 2.0,
        };
        let s = pr_inner_stepsize(&m, array![1.0].view(), array![0.0].view(), 0.0).unwrap();
        assert_eq!(s.gamma, 1.0);
        let g = oracles::golden_section(|t| (1.0 - t).powi(2), 1e-10).unwrap();
        assert!((g - 1.0).abs() < 1e-6);
        let s = pr_inner_stepsize(&m, array![1.0].view(), array![1.0].view(), 0.0).unwrap();
        assert_eq!(s.gamma, 0.0);
    }

    #[test]
    fn outer_stepsize_scalar_toy() {
        let inst = scalar_instance(1.0, 0.0);
        let x = BlockPoint::zeros(inst.partition().clone());
        let profile = pr_outer_profile(&inst, &x, array![1.0].view(), 0, 0.0);
        assert_eq!(profile, ScalarProfile::Quartic { v4: 1.0, v3: 0.0, v2: -1.0, v1: 0.0 });
        let s = pr_outer_stepsize(&inst, &x, array![1.0].view(), 0, 0.0).unwrap();
        assert_eq!(s.gamma, 1.0);
        // large mu with a longer l1 candidate: no descent
        let s = pr_outer_stepsize(&inst, &x, array![1.0].view(), 0, 1e3).unwrap();
        assert_eq!(s.gamma, 0.0);
    }

    #[test]
    fn rejects_zero_start() {
        let inst = generate_pr_instance(10, 20, 0.2, 2, 1).unwrap();
        let x0 = BlockPoint::zeros(inst.partition().clone());
        assert!(matches!(
            run_phase_retrieval(&inst, &x0, &SolverConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn generator_is_reproducible() {
        let a = generate_pr_instance(40, 25, 0.01, 4, 7).unwrap();
        let b = generate_pr_instance(40, 25, 0.01, 4, 7).unwrap();
        assert_eq!(a.a, b.a);
        assert_eq!(a.y, b.y);
        let support = a.x_true.as_ref().unwrap().iter().filter(|v| **v != 0.0).count();
        assert_eq!(support, 1);
        for col in a.a.rows() {
            assert!((norm2(col) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_tiny_instance_is_solved() {
        // 6x oversampling; at 2x this seed lands in a spurious local minimum
        let mut inst = generate_pr_instance(20, 120, 0.1, 2, 11).unwrap();
        inst.mu = 1e-9;
        let x0 = inst.initial_point(3);
        let config = SolverConfig {
            inner_iterations: 10,
            max_outer_iterations: 20_000,
            stop_tol: 0.0,
            ..SolverConfig::default()
        };
        let trace = run_phase_retrieval(&inst, &x0, &config).unwrap();
        assert!(trace.final_objective() < 1e-6, "{}", trace.final_objective());
        assert!(trace.objectives().windows(2).all(|w| w[1] <= w[0]));
    }
}
