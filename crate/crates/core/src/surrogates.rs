//! Strictly convex per-block approximations `f~(x_k; x^t)` of the smooth
//! term, their closed-form minimizers, and the elementwise inner-layer
//! approximation used by the inexact solvers.
//!
//! Every surrogate matches the block gradient of `f` at its anchor. Kinds
//! that are quadratic in the block expose a [`QuadraticForm`]
//! `1/2 x^T H x - x^T b`; only those can be minimized in closed form.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::model::{BlockPoint, CompositeProblem, Constraint, Penalty};

/// `S_a(b) = max(b - a, 0) - max(-b - a, 0)`.
#[inline]
pub fn shrink(b: f64, a: f64) -> f64 {
    (b - a).max(0.0) - (-b - a).max(0.0)
}

/// Elementwise soft-thresholding.
pub fn soft_threshold(b: ArrayView1<f64>, a: ArrayView1<f64>) -> Result<Array1<f64>> {
    if b.len() != a.len() {
        return Err(Error::DimensionMismatch(format!(
            "soft_threshold: {} values, {} thresholds",
            b.len(),
            a.len()
        )));
    }
    if a.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::InvalidArgument("soft_threshold needs nonnegative thresholds".into()));
    }
    Ok(Array1::from_iter(b.iter().zip(a.iter()).map(|(&bi, &ai)| shrink(bi, ai))))
}

/// A structured symmetric positive definite linear map.
pub trait HessianOperator: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: ArrayView1<f64>) -> Array1<f64>;
    fn diagonal(&self) -> Array1<f64>;
    /// `H^{-1} r` when the structure allows a direct solve.
    fn solve(&self, _rhs: ArrayView1<f64>) -> Option<Result<Array1<f64>>> {
        None
    }
}

#[derive(Debug, Clone)]
pub enum Hessian {
    ScaledIdentity(f64),
    Diagonal(Array1<f64>),
    Dense(Array2<f64>),
    Operator(Arc<dyn HessianOperator>),
}

impl Hessian {
    pub fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        match self {
            Hessian::ScaledIdentity(c) => v.mapv(|x| c * x),
            Hessian::Diagonal(d) => &v * d,
            Hessian::Dense(m) => m.dot(&v),
            Hessian::Operator(op) => op.apply(v),
        }
    }

    pub fn diagonal(&self, n: usize) -> Array1<f64> {
        match self {
            Hessian::ScaledIdentity(c) => Array1::from_elem(n, *c),
            Hessian::Diagonal(d) => d.clone(),
            Hessian::Dense(m) => m.diag().to_owned(),
            Hessian::Operator(op) => op.diagonal(),
        }
    }

    /// Dense copy, for tests and small blocks.
    pub fn to_dense(&self, n: usize) -> Array2<f64> {
        match self {
            Hessian::ScaledIdentity(c) => Array2::eye(n) * *c,
            Hessian::Diagonal(d) => Array2::from_diag(d),
            Hessian::Dense(m) => m.clone(),
            Hessian::Operator(op) => {
                let mut out = Array2::zeros((n, n));
                let mut e = Array1::zeros(n);
                for j in 0..n {
                    e[j] = 1.0;
                    out.column_mut(j).assign(&op.apply(e.view()));
                    e[j] = 0.0;
                }
                out
            }
        }
    }

    fn is_diagonal(&self) -> bool {
        matches!(self, Hessian::ScaledIdentity(_) | Hessian::Diagonal(_))
    }
}

/// `q(x) = 1/2 x^T H x - x^T b`.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub hessian: Hessian,
    pub linear: Array1<f64>,
}

impl QuadraticForm {
    pub fn new(hessian: Hessian, linear: Array1<f64>) -> Self {
        Self { hessian, linear }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        0.5 * x.dot(&self.hessian.apply(x)) - x.dot(&self.linear)
    }

    pub fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.hessian.apply(x) - &self.linear
    }

    pub fn diagonal(&self) -> Array1<f64> {
        self.hessian.diagonal(self.dim())
    }

    /// `v^T H v`.
    pub fn curvature(&self, v: ArrayView1<f64>) -> f64 {
        v.dot(&self.hessian.apply(v))
    }

    /// Unique minimizer of `q + penalty` over `constraint` for the pairings
    /// with a closed form: diagonal `H` with any separable penalty and box,
    /// or general `H` without penalty and constraint (direct solve).
    pub fn minimize(&self, penalty: &Penalty, constraint: &Constraint) -> Result<Array1<f64>> {
        if self.hessian.is_diagonal() {
            let d = self.diagonal();
            if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::DegenerateDiagonal(format!(
                    "diagonal entry {i} = {} is not positive",
                    d[i]
                )));
            }
            let mu = penalty.weight();
            let mut x = Array1::from_iter(
                self.linear
                    .iter()
                    .zip(d.iter())
                    .map(|(&b, &di)| shrink(b / di, mu / di)),
            );
            constraint.clip(&mut x);
            return Ok(x);
        }
        let unconstrained = matches!(constraint, Constraint::Unconstrained);
        let smooth = matches!(penalty, Penalty::Zero) || penalty.weight() == 0.0;
        if !(unconstrained && smooth) {
            return Err(Error::NoClosedForm(
                "non-diagonal quadratic with a penalty or a box".into(),
            ));
        }
        match &self.hessian {
            Hessian::Dense(m) => Ok(Cholesky::factor(m.view())?.solve(self.linear.view())),
            Hessian::Operator(op) => op.solve(self.linear.view()).unwrap_or_else(|| {
                Err(Error::NoClosedForm("operator Hessian without a direct solve".into()))
            }),
            _ => unreachable!(),
        }
    }
}

/// `f(x) = f1(f2(x))` with `f1` smooth convex and `f2` smooth.
pub trait SmoothComposition {
    /// `f2(x)`.
    fn inner_map(&self, x: &BlockPoint) -> Array1<f64>;
    /// Jacobian of `f2` with respect to block `k`, shape `(M, I_k)`.
    fn inner_block_jacobian(&self, x: &BlockPoint, k: usize) -> Array2<f64>;
    fn outer_value(&self, v: ArrayView1<f64>) -> f64;
    fn outer_gradient(&self, v: ArrayView1<f64>) -> Array1<f64>;
    /// Constant Hessian of `f1`, when `f1` is quadratic.
    fn outer_hessian(&self) -> Option<Array2<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    /// Linearization plus proximal term.
    Quadratic,
    /// Sum over elements of `f` with the rest of the point frozen.
    BestResponseElementwise,
    /// `f` itself with the other blocks frozen.
    BestResponseBlock,
    /// `f1` kept, `f2` linearized, plus proximal term.
    PartialLinearization,
    /// Elementwise version of the partial linearization.
    Hybrid,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 5] = [
        SurrogateKind::Quadratic,
        SurrogateKind::BestResponseElementwise,
        SurrogateKind::BestResponseBlock,
        SurrogateKind::PartialLinearization,
        SurrogateKind::Hybrid,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SurrogateKind::Quadratic => "quadratic",
            SurrogateKind::BestResponseElementwise => "best_response_elementwise",
            SurrogateKind::BestResponseBlock => "best_response_block",
            SurrogateKind::PartialLinearization => "partial_linearization",
            SurrogateKind::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearizationMode {
    Full,
    Hybrid,
}

enum Repr<'a> {
    Quadratic {
        grad: Array1<f64>,
    },
    BestResponse {
        problem: &'a dyn CompositeProblem,
        frozen: BlockPoint,
        elementwise: bool,
    },
    Linearized {
        comp: &'a dyn SmoothComposition,
        base: Array1<f64>,
        jacobian: Array2<f64>,
        mode: LinearizationMode,
    },
}

/// One block's approximation anchored at `x^t`.
pub struct SurrogateModel<'a> {
    kind: SurrogateKind,
    block: usize,
    anchor: Array1<f64>,
    c: f64,
    repr: Repr<'a>,
    form: Option<QuadraticForm>,
    /// `f(x^t)` for the best-response kinds (additive constant bookkeeping).
    anchor_f: f64,
}

impl fmt::Debug for SurrogateModel<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurrogateModel")
            .field("kind", &self.kind)
            .field("block", &self.block)
            .field("c", &self.c)
            .field("has_quadratic_form", &self.form.is_some())
            .finish()
    }
}

fn check_regularizer(c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "surrogate regularizer must be positive, got {c}"
        )));
    }
    Ok(())
}

pub fn make_quadratic_surrogate<'a>(
    problem: &'a dyn CompositeProblem,
    x: &BlockPoint,
    k: usize,
    c: f64,
) -> Result<SurrogateModel<'a>> {
    check_regularizer(c)?;
    let grad = problem.block_gradient(x, k);
    let anchor = x.block(k).to_owned();
    let linear = anchor.mapv(|v| c * v) - &grad;
    Ok(SurrogateModel {
        kind: SurrogateKind::Quadratic,
        block: k,
        anchor,
        c,
        form: Some(QuadraticForm::new(Hessian::ScaledIdentity(c), linear)),
        repr: Repr::Quadratic { grad },
        anchor_f: 0.0,
    })
}

/// Best-response approximations. Strict convexity of `f` in the block (or
/// in each of its elements) is the caller's obligation.
pub fn make_best_response_surrogate<'a>(
    problem: &'a dyn CompositeProblem,
    x: &BlockPoint,
    k: usize,
    elementwise: bool,
) -> Result<SurrogateModel<'a>> {
    let anchor = x.block(k).to_owned();
    let form = problem.block_quadratic_form(x, k).map(|qf| {
        if elementwise {
            // sum_i f(x_i, x^t_{-i}): keep H_ii, move the off-diagonal
            // coupling with the frozen entries into the linear term
            let d = qf.diagonal();
            let coupling = qf.hessian.apply(anchor.view()) - &(&d * &anchor);
            QuadraticForm::new(Hessian::Diagonal(d), &qf.linear - &coupling)
        } else {
            qf
        }
    });
    Ok(SurrogateModel {
        kind: if elementwise {
            SurrogateKind::BestResponseElementwise
        } else {
            SurrogateKind::BestResponseBlock
        },
        block: k,
        anchor,
        c: 0.0,
        form,
        anchor_f: problem.smooth_value(x),
        repr: Repr::BestResponse {
            problem,
            frozen: x.clone(),
            elementwise,
        },
    })
}

pub fn make_partial_linearization_surrogate<'a>(
    comp: &'a dyn SmoothComposition,
    x: &BlockPoint,
    k: usize,
    c: f64,
    mode: LinearizationMode,
) -> Result<SurrogateModel<'a>> {
    check_regularizer(c)?;
    let anchor = x.block(k).to_owned();
    let base = comp.inner_map(x);
    let jacobian = comp.inner_block_jacobian(x, k);
    let form = comp.outer_hessian().map(|h| {
        let g = jacobian.t().dot(&comp.outer_gradient(base.view()));
        let hessian = match mode {
            LinearizationMode::Full => {
                let mut m = jacobian.t().dot(&h.dot(&jacobian));
                m.diag_mut().mapv_inplace(|v| v + c);
                Hessian::Dense(m)
            }
            LinearizationMode::Hybrid => {
                let hj = h.dot(&jacobian);
                let d = (&jacobian * &hj).sum_axis(Axis(0)) + c;
                Hessian::Diagonal(d)
            }
        };
        let linear = hessian.apply(anchor.view()) - &g;
        QuadraticForm::new(hessian, linear)
    });
    Ok(SurrogateModel {
        kind: match mode {
            LinearizationMode::Full => SurrogateKind::PartialLinearization,
            LinearizationMode::Hybrid => SurrogateKind::Hybrid,
        },
        block: k,
        anchor,
        c,
        form,
        anchor_f: 0.0,
        repr: Repr::Linearized {
            comp,
            base,
            jacobian,
            mode,
        },
    })
}

/// Builds any catalog kind; the linearized kinds need a composition.
pub fn make_surrogate<'a>(
    problem: &'a dyn CompositeProblem,
    kind: SurrogateKind,
    x: &BlockPoint,
    k: usize,
    c: f64,
) -> Result<SurrogateModel<'a>> {
    match kind {
        SurrogateKind::Quadratic => make_quadratic_surrogate(problem, x, k, c),
        SurrogateKind::BestResponseElementwise => make_best_response_surrogate(problem, x, k, true),
        SurrogateKind::BestResponseBlock => make_best_response_surrogate(problem, x, k, false),
        SurrogateKind::PartialLinearization | SurrogateKind::Hybrid => {
            let comp = problem.composition().ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{} surrogate needs a problem with composite structure f1(f2(x))",
                    kind.name()
                ))
            })?;
            let mode = if kind == SurrogateKind::Hybrid {
                LinearizationMode::Hybrid
            } else {
                LinearizationMode::Full
            };
            make_partial_linearization_surrogate(comp, x, k, c, mode)
        }
    }
}

impl<'a> SurrogateModel<'a> {
    pub fn kind(&self) -> SurrogateKind {
        self.kind
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn anchor(&self) -> ArrayView1<'_, f64> {
        self.anchor.view()
    }

    pub fn quadratic_form(&self) -> Option<&QuadraticForm> {
        self.form.as_ref()
    }

    /// Best-response #2 majorizes `f` along the block trivially.
    pub fn is_global_upper_bound(&self) -> bool {
        self.kind == SurrogateKind::BestResponseBlock
    }

    pub fn value(&self, xk: ArrayView1<f64>) -> f64 {
        let delta = &xk - &self.anchor;
        match &self.repr {
            Repr::Quadratic { grad } => delta.dot(grad) + 0.5 * self.c * delta.dot(&delta),
            Repr::BestResponse {
                problem,
                frozen,
                elementwise,
            } => {
                if !elementwise {
                    return problem.smooth_value(&frozen.with_block(self.block, xk));
                }
                if let Some(form) = &self.form {
                    // exact since f is quadratic in the block
                    let g = form.gradient(self.anchor.view());
                    let d = form.diagonal();
                    let n = delta.len() as f64;
                    return n * self.anchor_f
                        + delta.dot(&g)
                        + 0.5 * (&d * &delta).dot(&delta);
                }
                let mut probe = frozen.clone();
                let mut total = 0.0;
                for i in 0..delta.len() {
                    probe.block_mut(self.block)[i] = xk[i];
                    total += problem.smooth_value(&probe);
                    probe.block_mut(self.block)[i] = self.anchor[i];
                }
                total
            }
            Repr::Linearized {
                comp,
                base,
                jacobian,
                mode,
            } => {
                let prox = 0.5 * self.c * delta.dot(&delta);
                match mode {
                    LinearizationMode::Full => comp.outer_value((base + &jacobian.dot(&delta)).view()) + prox,
                    LinearizationMode::Hybrid => {
                        let mut total = prox;
                        for (i, col) in jacobian.columns().into_iter().enumerate() {
                            total += comp.outer_value((base + &(&col * delta[i])).view());
                        }
                        total
                    }
                }
            }
        }
    }

    pub fn gradient(&self, xk: ArrayView1<f64>) -> Array1<f64> {
        let delta = &xk - &self.anchor;
        match &self.repr {
            Repr::Quadratic { grad } => grad + &(&delta * self.c),
            Repr::BestResponse {
                problem,
                frozen,
                elementwise,
            } => {
                if !elementwise {
                    return problem.block_gradient(&frozen.with_block(self.block, xk), self.block);
                }
                if let Some(form) = &self.form {
                    return form.gradient(xk);
                }
                let mut probe = frozen.clone();
                let mut out = Array1::zeros(delta.len());
                for i in 0..delta.len() {
                    probe.block_mut(self.block)[i] = xk[i];
                    out[i] = problem.block_gradient(&probe, self.block)[i];
                    probe.block_mut(self.block)[i] = self.anchor[i];
                }
                out
            }
            Repr::Linearized {
                comp,
                base,
                jacobian,
                mode,
            } => {
                let prox = &delta * self.c;
                match mode {
                    LinearizationMode::Full => {
                        let v = base + &jacobian.dot(&delta);
                        jacobian.t().dot(&comp.outer_gradient(v.view())) + prox
                    }
                    LinearizationMode::Hybrid => {
                        let mut out = prox;
                        for (i, col) in jacobian.columns().into_iter().enumerate() {
                            let v = base + &(&col * delta[i]);
                            out[i] += col.dot(&comp.outer_gradient(v.view()));
                        }
                        out
                    }
                }
            }
        }
    }
}

/// `B_k x^t`: the minimizer of the surrogate plus `g_k` over `X_k`.
pub fn solve_surrogate(
    model: &SurrogateModel<'_>,
    penalty: &Penalty,
    constraint: &Constraint,
) -> Result<Array1<f64>> {
    let form = model.quadratic_form().ok_or_else(|| {
        Error::NoClosedForm(format!(
            "{} surrogate without a quadratic form; use the inexact solver",
            model.kind().name()
        ))
    })?;
    form.minimize(penalty, constraint)
}

/// Elementwise best response of a quadratic outer surrogate, anchored at
/// the inner iterate `x^{t,tau}`:
/// `sum_i f~(x_i, x^{t,tau}_{-i}; x^t)`.
#[derive(Debug, Clone)]
pub struct InnerSurrogateModel {
    anchor: Array1<f64>,
    anchor_value: f64,
    /// gradient of the outer surrogate at the inner anchor
    residual: Array1<f64>,
    diag: Array1<f64>,
}

impl InnerSurrogateModel {
    pub fn new(outer: &QuadraticForm, anchor: ArrayView1<f64>) -> Result<Self> {
        let diag = outer.diagonal();
        if let Some(i) = diag.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::DegenerateDiagonal(format!(
                "outer surrogate diagonal entry {i} = {} is not positive",
                diag[i]
            )));
        }
        Ok(Self {
            anchor: anchor.to_owned(),
            anchor_value: outer.value(anchor),
            residual: outer.gradient(anchor),
            diag,
        })
    }

    pub fn anchor(&self) -> ArrayView1<'_, f64> {
        self.anchor.view()
    }

    pub fn value(&self, xk: ArrayView1<f64>) -> f64 {
        let delta = &xk - &self.anchor;
        delta.len() as f64 * self.anchor_value
            + delta.dot(&self.residual)
            + 0.5 * (&self.diag * &delta).dot(&delta)
    }

    pub fn gradient(&self, xk: ArrayView1<f64>) -> Array1<f64> {
        let delta = &xk - &self.anchor;
        &self.residual + &(&self.diag * &delta)
    }

    /// Closed-form minimizer of the inner model plus the penalty over the box.
    pub fn minimize(&self, penalty: &Penalty, constraint: &Constraint) -> Array1<f64> {
        let mu = penalty.weight();
        let mut x = Array1::from_iter(
            self.anchor
                .iter()
                .zip(self.residual.iter().zip(self.diag.iter()))
                .map(|(&a, (&r, &d))| shrink(a - r / d, mu / d)),
        );
        constraint.clip(&mut x);
        x
    }
}

/// Smoke test of strict convexity on random chords around the anchor.
/// Passing proves nothing; failing proves the surrogate is not convex.
pub fn probe_strict_convexity<R: Rng>(
    model: &SurrogateModel<'_>,
    rng: &mut R,
    trials: usize,
    radius: f64,
) -> bool {
    let n = model.anchor().len();
    for _ in 0..trials {
        let u = &model.anchor() + &Array1::from_shape_fn(n, |_| radius * rng.random_range(-1.0..1.0));
        let v = &model.anchor() + &Array1::from_shape_fn(n, |_| radius * rng.random_range(-1.0..1.0));
        let theta: f64 = rng.random_range(0.05..0.95);
        let mid = &u * theta + &(&v * (1.0 - theta));
        let lhs = model.value(mid.view());
        let rhs = theta * model.value(u.view()) + (1.0 - theta) * model.value(v.view());
        let scale = 1.0 + lhs.abs().max(rhs.abs());
        if lhs > rhs + 1e-12 * scale {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BlockPartition;
    use crate::oracles;
    use ndarray::array;

    /// f(x) = 1/2 x^T M x - r^T x on a partitioned vector.
    struct Quad {
        part: Arc<BlockPartition>,
        m: Array2<f64>,
        r: Array1<f64>,
        penalty: Penalty,
        cons: Vec<Constraint>,
    }

    impl CompositeProblem for Quad {
        fn partition(&self) -> &Arc<BlockPartition> {
            &self.part
        }
        fn smooth_value(&self, x: &BlockPoint) -> f64 {
            let v = x.values();
            0.5 * v.dot(&self.m.dot(v)) - self.r.dot(v)
        }
        fn block_gradient(&self, x: &BlockPoint, k: usize) -> Array1<f64> {
            let g = self.m.dot(x.values()) - &self.r;
            let rng = self.part.range(k);
            g.slice(ndarray::s![rng.start..rng.end]).to_owned()
        }
        fn penalty(&self, _k: usize) -> Penalty {
            self.penalty
        }
        fn constraint(&self, k: usize) -> &Constraint {
            &self.cons[k]
        }
        fn block_quadratic_form(&self, x: &BlockPoint, k: usize) -> Option<QuadraticForm> {
            let rng = self.part.range(k);
            let h = self.m.slice(ndarray::s![rng.start..rng.end, rng.start..rng.end]).to_owned();
            let g = self.block_gradient(x, k);
            let linear = h.dot(&x.block(k)) - &g;
            Some(QuadraticForm::new(Hessian::Dense(h), linear))
        }
    }

    fn shifted_identity(n: usize, shift: f64) -> Quad {
        Quad {
            part: Arc::new(BlockPartition::new(&[n]).unwrap()),
            m: Array2::eye(n),
            r: Array1::from_elem(n, shift),
            penalty: Penalty::Zero,
            cons: vec![Constraint::Unconstrained],
        }
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(shrink(2.5, 1.0), 1.5);
        assert_eq!(shrink(0.5, 1.0), 0.0);
        let out = soft_threshold(array![-3.0, 0.2].view(), array![1.0, 1.0].view()).unwrap();
        assert_eq!(out, array![-2.0, 0.0]);
        assert!(soft_threshold(array![1.0].view(), array![-0.1].view()).is_err());
        assert!(soft_threshold(array![1.0].view(), array![0.1, 0.2].view()).is_err());
    }

    #[test]
    fn quadratic_surrogate_examples() {
        // f = 1/2 (x + 2)^2 has gradient 2 at x = 0
        let p = shifted_identity(1, -2.0);
        let x = BlockPoint::zeros(p.part.clone());
        let s = make_quadratic_surrogate(&p, &x, 0, 1.0).unwrap();
        assert_eq!(s.value(x.block(0)), 0.0);
        assert_eq!(s.gradient(x.block(0)), array![2.0]);
        let b = solve_surrogate(&s, &Penalty::Zero, &Constraint::Unconstrained).unwrap();
        assert_eq!(b, array![-2.0]);
        assert!(make_quadratic_surrogate(&p, &x, 0, 0.0).is_err());
        assert!(make_quadratic_surrogate(&p, &x, 0, -1.0).is_err());
    }

    #[test]
    fn quadratic_surrogate_with_l1_is_prox_step() {
        let p = shifted_identity(3, 1.0);
        let x = BlockPoint::new(p.part.clone(), array![0.3, -2.0, 4.0]).unwrap();
        let c = 2.0;
        let mu = 0.7;
        let s = make_quadratic_surrogate(&p, &x, 0, c).unwrap();
        let b = solve_surrogate(&s, &Penalty::L1(mu), &Constraint::Unconstrained).unwrap();
        let grad = p.block_gradient(&x, 0);
        let z = x.block(0).to_owned() - &(&grad / c);
        let want = soft_threshold(z.view(), Array1::from_elem(3, mu / c).view()).unwrap();
        for (a, w) in b.iter().zip(want.iter()) {
            assert!((a - w).abs() < 1e-15);
        }
    }

    #[test]
    fn block_best_response_minimizes_f() {
        let p = shifted_identity(3, 1.0);
        let x = BlockPoint::new(p.part.clone(), array![5.0, -1.0, 0.25]).unwrap();
        let s = make_best_response_surrogate(&p, &x, 0, false).unwrap();
        assert!(s.is_global_upper_bound());
        let b = solve_surrogate(&s, &Penalty::Zero, &Constraint::Unconstrained).unwrap();
        for v in b.iter() {
            assert!((v - 1.0).abs() < 1e-14);
        }
        // elementwise equals block mode up to a constant on separable f
        let e = make_best_response_surrogate(&p, &x, 0, true).unwrap();
        let probe = array![0.1, 0.2, 0.3];
        let shift = e.value(x.block(0)) - s.value(x.block(0));
        assert!((e.value(probe.view()) - s.value(probe.view()) - shift).abs() < 1e-12);
    }

    #[test]
    fn diagonal_form_with_l1_matches_scalar_oracle() {
        let qf = QuadraticForm::new(Hessian::Diagonal(array![2.0, 2.0]), array![3.0, -1.0]);
        let b = qf.minimize(&Penalty::L1(1.0), &Constraint::Unconstrained).unwrap();
        assert_eq!(b, array![1.0, 0.0]);
        for i in 0..2 {
            let (d, lin) = (2.0, qf.linear[i]);
            let x = oracles::golden_section_on(|t| 0.5 * d * t * t - lin * t + t.abs(), -5.0, 5.0, 1e-10);
            assert!((x - b[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn dense_form_requires_smooth_unconstrained() {
        let qf = QuadraticForm::new(Hessian::Dense(array![[2.0, 0.5], [0.5, 1.0]]), array![1.0, 1.0]);
        assert!(qf.minimize(&Penalty::Zero, &Constraint::Unconstrained).is_ok());
        assert!(matches!(
            qf.minimize(&Penalty::L1(0.1), &Constraint::Unconstrained),
            Err(Error::NoClosedForm(_))
        ));
    }

    #[test]
    fn inner_model_matches_outer_gradient() {
        let qf = QuadraticForm::new(
            Hessian::Dense(array![[3.0, 1.0, 0.0], [1.0, 2.0, 0.5], [0.0, 0.5, 1.5]]),
            array![1.0, -2.0, 0.5],
        );
        let anchor = array![0.2, 0.4, -0.1];
        let inner = InnerSurrogateModel::new(&qf, anchor.view()).unwrap();
        let g_in = inner.gradient(anchor.view());
        let g_out = qf.gradient(anchor.view());
        for (a, b) in g_in.iter().zip(g_out.iter()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
