//! Bregman proximal gradient for sparse phase retrieval, with kernel
//! `omega(x) = 1/4 ||x||^4 + 1/2 ||x||^2`. Always updates all variables
//! at once.

use ndarray::{Array1, ArrayView1};

use crate::applications::phase_retrieval::PhaseRetrievalInstance;
use crate::error::{Error, Result};
use crate::line_search::{cubic_roots, StepResult};
use crate::model::{BlockPoint, RunTrace, SolverConfig, TerminationReason};
use crate::surrogates::shrink;

use super::Recorder;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BregmanBaselineSpec {
    /// Relative-smoothness constant before the discount.
    pub l: f64,
    /// Multiplies `l`; values below 1 give a more aggressive step.
    pub discount: f64,
}

impl BregmanBaselineSpec {
    /// `L = sum_n (3 ||a_n||^4 + ||a_n||^2 y_n)`.
    pub fn for_instance(inst: &PhaseRetrievalInstance) -> Self {
        let l = inst
            .a
            .columns()
            .into_iter()
            .zip(inst.y.iter())
            .map(|(a, &y)| {
                let sq = a.dot(&a);
                3.0 * sq * sq + sq * y
            })
            .sum();
        Self { l, discount: 1.0 }
    }

    pub fn with_discount(self, discount: f64) -> Self {
        Self { discount, ..self }
    }

    pub fn effective_l(&self) -> f64 {
        self.l * self.discount
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0) || !self.discount.is_finite() {
            return Err(Error::InvalidArgument(format!("discount must be positive, got {}", self.discount)));
        }
        let l = self.effective_l();
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidArgument(format!("L must be positive, got {l}")));
        }
        Ok(())
    }
}

/// `grad omega(x) = (||x||^2 + 1) x`
pub fn kernel_gradient(x: ArrayView1<f64>) -> Array1<f64> {
    let sq = x.dot(&x);
    x.mapv(|v| (sq + 1.0) * v)
}

/// Minimizer of `<grad f / L - grad omega(x), z> + omega(z) + g(z) / L`
/// for `g = mu ||.||_1`, given the gradient `grad` of `f` at `x`.
pub fn bpgd_step(x: ArrayView1<f64>, grad: ArrayView1<f64>, l: f64, mu: f64) -> Result<Array1<f64>> {
    if !(l > 0.0) {
        return Err(Error::InvalidArgument(format!("L must be positive, got {l}")));
    }
    if x.len() != grad.len() {
        return Err(Error::DimensionMismatch("bpgd_step".into()));
    }
    let p = kernel_gradient(x) - &grad.mapv(|g| g / l);
    let v = p.mapv(|pi| shrink(pi, mu / l));
    let vv = v.dot(&v);
    if vv == 0.0 {
        return Ok(v);
    }
    // theta (theta^2 ||v||^2 + 1) = 1 has exactly one real root, in (0, 1]
    let theta = cubic_roots(vv, 0.0, 1.0, -1.0)
        .into_iter()
        .filter(|r| *r > 0.0)
        .fold(f64::NAN, f64::max);
    if !theta.is_finite() {
        return Err(Error::NonFinite("Bregman step scale".into()));
    }
    Ok(v * theta)
}

/// Full-vector Bregman proximal gradient. Each iteration is one row of the
/// trace with block 0 and stepsize 1.
pub fn run_bpgd(
    inst: &PhaseRetrievalInstance,
    spec: &BregmanBaselineSpec,
    x0: &BlockPoint,
    config: &SolverConfig,
) -> Result<RunTrace> {
    spec.validate()?;
    config.validate(x0.partition().num_blocks())?;
    if x0.values().len() != inst.num_unknowns() {
        return Err(Error::DimensionMismatch("initial point length differs from the instance's".into()));
    }
    let l = spec.effective_l();
    let mut x = x0.clone();
    let mut h = inst.objective_at(x.values().view());
    if !h.is_finite() {
        return Err(Error::NonFinite("initial objective".into()));
    }
    let mut rec = Recorder::new(h, 1, config.stop_tol);
    for _ in 0..config.max_outer_iterations {
        let grad = inst.gradient_at(x.values().view());
        let next = bpgd_step(x.values().view(), grad.view(), l, inst.mu)?;
        let value = inst.objective_at(next.view());
        if !value.is_finite() {
            return Err(Error::NonFinite("objective".into()));
        }
        let step = if value < h {
            *x.values_mut() = next;
            h = value;
            StepResult::unit(value)
        } else {
            StepResult::zero()
        };
        if rec.record(0, &step, h) {
            return Ok(rec.finish(x, TerminationReason::Tolerance));
        }
    }
    Ok(rec.finish(x, TerminationReason::MaxIterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applications::phase_retrieval::generate_pr_instance;
    use crate::oracles;
    use ndarray::array;

    #[test]
    fn zero_prox_input_gives_zero() {
        let x = array![0.0, 0.0];
        assert_eq!(bpgd_step(x.view(), x.view(), 1.0, 0.0).unwrap(), x);
        // everything thresholded away
        let out = bpgd_step(array![0.1, -0.1].view(), array![0.0, 0.0].view(), 1.0, 10.0).unwrap();
        assert_eq!(out, array![0.0, 0.0]);
    }

    #[test]
    fn unit_norm_v_gives_cubic_root() {
        // x = 0, grad = -L e_1 gives p = v = e_1
        let out = bpgd_step(array![0.0, 0.0].view(), array![-2.0, 0.0].view(), 2.0, 0.0).unwrap();
        assert!((out[0] - 0.682327803828).abs() < 1e-11);
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn kernel_alone_is_a_fixed_point() {
        let x = array![0.4, -1.3, 2.0];
        let out = bpgd_step(x.view(), Array1::zeros(3).view(), 5.0, 0.0).unwrap();
        for (a, b) in out.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn step_minimizes_the_bregman_model() {
        let x = array![0.3, -0.2, 0.5];
        let grad = array![1.0, -2.0, 0.7];
        let (l, mu) = (4.0, 0.3);
        let out = bpgd_step(x.view(), grad.view(), l, mu).unwrap();
        let lin = &grad / l - &kernel_gradient(x.view());
        let model = |z: ArrayView1<f64>| {
            let sq = z.dot(&z);
            lin.dot(&z) + 0.25 * sq * sq + 0.5 * sq + mu / l * z.iter().map(|v| v.abs()).sum::<f64>()
        };
        let base = model(out.view());
        for i in 0..3 {
            for eps in [1e-4, -1e-4] {
                let mut probe = out.clone();
                probe[i] += eps;
                assert!(model(probe.view()) >= base - 1e-14);
            }
        }
        let fd = oracles::finite_diff_gradient(|z| model(z) - mu / l * z.iter().map(|v| v.abs()).sum::<f64>(), out.view(), 1e-6);
        for i in 0..3 {
            if out[i] != 0.0 {
                assert!((fd[i] + mu / l * out[i].signum()).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn objective_is_nonincreasing_with_full_l() {
        let inst = generate_pr_instance(12, 40, 0.25, 1, 4).unwrap();
        let spec = BregmanBaselineSpec::for_instance(&inst);
        let config = SolverConfig {
            max_outer_iterations: 200,
            stop_tol: 0.0,
            ..SolverConfig::default()
        };
        let trace = run_bpgd(&inst, &spec, &inst.initial_point(1), &config).unwrap();
        let objs = trace.objectives();
        assert!(objs.windows(2).all(|w| w[1] <= w[0]));
        assert!(trace.entries[1..].iter().all(|e| e.block == 0));
        assert!(objs.last().unwrap() < &objs[0]);
    }

    #[test]
    fn invalid_constant_is_rejected() {
        let inst = generate_pr_instance(4, 8, 0.5, 1, 0).unwrap();
        let spec = BregmanBaselineSpec { l: 0.0, discount: 1.0 };
        assert!(matches!(
            run_bpgd(&inst, &spec, &inst.initial_point(0), &SolverConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }
}
