//! Stepsize rules over the differentiable profile
//! `gamma -> f(x + gamma * dx) + gamma * (g(B) - g(x))` on `[0, 1]`.
//!
//! The nonsmooth part enters only through its linear interpolation, so the
//! profile stays a low-degree polynomial for the applications: quadratic
//! for least-squares type blocks and quartic for the phase retrieval loss.

use crate::error::{Error, Result};

/// Profile of the smooth part along a direction, shifted so that it
/// vanishes at `gamma = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarProfile {
    /// `a2/2 gamma^2 + a1 gamma`
    Quadratic { a2: f64, a1: f64 },
    /// `v4/4 gamma^4 + v3/3 gamma^3 + v2/2 gamma^2 + v1 gamma`
    Quartic { v4: f64, v3: f64, v2: f64, v1: f64 },
}

impl ScalarProfile {
    pub fn value(&self, gamma: f64) -> f64 {
        match *self {
            ScalarProfile::Quadratic { a2, a1 } => gamma * (0.5 * a2 * gamma + a1),
            ScalarProfile::Quartic { v4, v3, v2, v1 } => {
                gamma * (v1 + gamma * (0.5 * v2 + gamma * (v3 / 3.0 + gamma * 0.25 * v4)))
            }
        }
    }

    pub fn slope_at_zero(&self) -> f64 {
        match *self {
            ScalarProfile::Quadratic { a1, .. } => a1,
            ScalarProfile::Quartic { v1, .. } => v1,
        }
    }

    /// Folds `gamma * dg` into the linear coefficient.
    pub fn with_nonsmooth_slope(self, dg: f64) -> Self {
        match self {
            ScalarProfile::Quadratic { a2, a1 } => ScalarProfile::Quadratic { a2, a1: a1 + dg },
            ScalarProfile::Quartic { v4, v3, v2, v1 } => ScalarProfile::Quartic {
                v4,
                v3,
                v2,
                v1: v1 + dg,
            },
        }
    }

    fn as_quartic(&self) -> [f64; 4] {
        match *self {
            ScalarProfile::Quadratic { a2, a1 } => [0.0, 0.0, a2, a1],
            ScalarProfile::Quartic { v4, v3, v2, v1 } => [v4, v3, v2, v1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub gamma: f64,
    /// `m` of `gamma = beta^m` for backtracking steps.
    pub armijo_exponent: Option<u32>,
    pub profile_value: f64,
}

impl StepResult {
    pub fn zero() -> Self {
        Self {
            gamma: 0.0,
            armijo_exponent: None,
            profile_value: 0.0,
        }
    }

    pub fn unit(profile_value: f64) -> Self {
        Self {
            gamma: 1.0,
            armijo_exponent: None,
            profile_value,
        }
    }
}

/// Minimizer of `a2/2 gamma^2 + a1 gamma` over `[0, 1]`.
pub fn exact_quadratic_step(a2: f64, a1: f64) -> Result<StepResult> {
    if !(a2 > 0.0) || !a2.is_finite() || !a1.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "quadratic profile needs a2 > 0 and finite coefficients (a2 = {a2}, a1 = {a1})"
        )));
    }
    let gamma = (-a1 / a2).clamp(0.0, 1.0);
    Ok(StepResult {
        gamma,
        armijo_exponent: None,
        profile_value: ScalarProfile::Quadratic { a2, a1 }.value(gamma),
    })
}

/// Minimizer of `v4/4 g^4 + v3/3 g^3 + v2/2 g^2 + v1 g` over `[0, 1]`.
///
/// All real stationary points (roots of `v4 g^3 + v3 g^2 + v2 g + v1`) that
/// fall in `[0, 1]` are compared against both endpoints; ties go to the
/// smaller step.
pub fn exact_quartic_step(v4: f64, v3: f64, v2: f64, v1: f64) -> Result<StepResult> {
    if !(v4 > 0.0) || ![v4, v3, v2, v1].iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "quartic profile needs v4 > 0 and finite coefficients (v4 = {v4})"
        )));
    }
    let profile = ScalarProfile::Quartic { v4, v3, v2, v1 };
    let roots = cubic_roots(v4, v3, v2, v1);
    let scale = v4.abs() + v3.abs() + v2.abs() + v1.abs();
    let reliable = roots.iter().all(|&r| {
        let res = ((v4 * r + v3) * r + v2) * r + v1;
        res.abs() <= 1e-8 * scale * (1.0 + r.abs()).powi(3)
    });
    if !reliable {
        let gamma = golden_section_fallback(&profile);
        return Ok(best_of(&profile, [0.0, 1.0, gamma].into_iter()));
    }
    let candidates = roots
        .into_iter()
        .filter(|r| (0.0..=1.0).contains(r))
        .chain([0.0, 1.0]);
    Ok(best_of(&profile, candidates))
}

/// Exact minimization over `[0, 1]` for any profile, including the
/// degenerate cases (`a2 <= 0`, `v4 = 0`) that the dedicated closed forms reject.
pub fn exact_step(profile: &ScalarProfile) -> Result<StepResult> {
    match *profile {
        ScalarProfile::Quadratic { a2, a1 } if a2 > 0.0 => exact_quadratic_step(a2, a1),
        ScalarProfile::Quartic { v4, v3, v2, v1 } if v4 > 0.0 => exact_quartic_step(v4, v3, v2, v1),
        _ => {
            let [_, v3, v2, v1] = profile.as_quartic();
            if ![v3, v2, v1].iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite("line search profile".into()));
            }
            // derivative v3 g^2 + v2 g + v1
            let mut candidates = vec![0.0, 1.0];
            if v3 != 0.0 {
                let disc = v2 * v2 - 4.0 * v3 * v1;
                if disc >= 0.0 {
                    let q = -0.5 * (v2 + v2.signum() * disc.sqrt());
                    if q != 0.0 {
                        candidates.push(q / v3);
                        candidates.push(v1 / q);
                    } else {
                        candidates.push(0.0);
                    }
                }
            } else if v2 != 0.0 {
                candidates.push(-v1 / v2);
            }
            let inside = candidates.into_iter().filter(|g| (0.0..=1.0).contains(g));
            Ok(best_of(profile, inside))
        }
    }
}

fn best_of(profile: &ScalarProfile, candidates: impl Iterator<Item = f64>) -> StepResult {
    let mut best = StepResult::zero();
    let mut first = true;
    for g in candidates {
        let v = profile.value(g);
        if first || v < best.profile_value || (v == best.profile_value && g < best.gamma) {
            best = StepResult {
                gamma: g,
                armijo_exponent: None,
                profile_value: v,
            };
            first = false;
        }
    }
    best
}

fn golden_section_fallback(profile: &ScalarProfile) -> f64 {
    // coarse scan to isolate the basin, then golden section inside it
    let n = 1000;
    let (mut best_i, mut best_v) = (0usize, profile.value(0.0));
    for i in 1..=n {
        let v = profile.value(i as f64 / n as f64);
        if v < best_v {
            best_i = i;
            best_v = v;
        }
    }
    let mut lo = (best_i.saturating_sub(1)) as f64 / n as f64;
    let mut hi = ((best_i + 1).min(n)) as f64 / n as f64;
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (profile.value(a), profile.value(b));
    while hi - lo > 1e-12 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = profile.value(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = profile.value(b);
        }
    }
    0.5 * (lo + hi)
}

/// Real roots of `c3 x^3 + c2 x^2 + c1 x + c0`, ascending, repeated roots
/// reported once.
///
/// Cardano's formula in its cancellation-free form when the discriminant is
/// clearly positive, the trigonometric three-root form otherwise; every root
/// is polished by Newton steps on the original cubic.
pub fn cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    debug_assert!(c3 != 0.0);
    let a = c2 / c3;
    let b = c1 / c3;
    let c = c0 / c3;
    let shift = a / 3.0;
    // x^3 + a x^2 + b x + c with x = t - a/3:  t^3 + 3 q t - 2 r = 0
    let q = (3.0 * b - a * a) / 9.0;
    let r = (9.0 * a * b - 27.0 * c - 2.0 * a * a * a) / 54.0;
    let disc = r * r + q * q * q;
    let scale = (r * r).max((q * q * q).abs()).max(f64::MIN_POSITIVE);

    let mut roots: Vec<f64> = if disc > 1e-12 * scale {
        let sq = disc.sqrt();
        let s = (r + r.signum() * sq).cbrt();
        let t = if s != 0.0 { -q / s } else { 0.0 };
        vec![s + t - shift]
    } else if q >= 0.0 {
        // q == 0 and r == 0 up to rounding: triple root
        vec![(2.0 * r).cbrt() - shift]
    } else {
        let m = 2.0 * (-q).sqrt();
        let arg = (r / (-q * q * q).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos();
        let tau = std::f64::consts::TAU;
        (0..3)
            .map(|j| m * ((theta + tau * j as f64) / 3.0).cos() - shift)
            .collect()
    };

    for root in roots.iter_mut() {
        *root = newton_polish(a, b, c, *root);
    }
    roots.sort_by(|x, y| x.total_cmp(y));
    let tol = 1e-7 * (1.0 + a.abs() + b.abs().sqrt() + c.abs().cbrt());
    roots.dedup_by(|x, y| (*x - *y).abs() <= tol);
    roots
}

fn newton_polish(a: f64, b: f64, c: f64, mut x: f64) -> f64 {
    let p = |x: f64| ((x + a) * x + b) * x + c;
    for _ in 0..8 {
        let fx = p(x);
        let dfx = (3.0 * x + 2.0 * a) * x + b;
        if dfx == 0.0 || !fx.is_finite() {
            break;
        }
        let next = x - fx / dfx;
        if !next.is_finite() || p(next).abs() >= fx.abs() {
            break;
        }
        x = next;
    }
    x
}

/// Backtracking `gamma = beta^m` for the smallest `m` with
/// `phi(beta^m) + beta^m dg <= phi(0) + alpha beta^m d`.
///
/// `phi` is the smooth part along the direction, `dg` the nonsmooth
/// difference `g(B) - g(x)` and `d < 0` the descent quantity.
pub fn successive_step<F>(
    phi: F,
    dg: f64,
    d: f64,
    alpha: f64,
    beta: f64,
    max_exponent: u32,
) -> Result<StepResult>
where
    F: Fn(f64) -> f64,
{
    if !(d < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "successive line search needs a strict descent direction, got d = {d}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument("alpha and beta must lie in (0, 1)".into()));
    }
    let phi0 = phi(0.0);
    let mut gamma = 1.0;
    for m in 0..=max_exponent {
        let lhs = phi(gamma) + gamma * dg;
        if lhs <= phi0 + alpha * gamma * d {
            return Ok(StepResult {
                gamma,
                armijo_exponent: Some(m),
                profile_value: lhs - phi0,
            });
        }
        gamma *= beta;
    }
    Err(Error::LineSearchFailure { max_exponent })
}

/// `d = (B - x)^T grad + g(B) - g(x)`.
pub fn descent_quantity(
    grad: ndarray::ArrayView1<f64>,
    candidate: ndarray::ArrayView1<f64>,
    current: ndarray::ArrayView1<f64>,
    g_candidate: f64,
    g_current: f64,
) -> f64 {
    let lin: f64 = grad
        .iter()
        .zip(candidate.iter().zip(current.iter()))
        .map(|(g, (b, x))| g * (b - x))
        .sum();
    lin + g_candidate - g_current
}
