//! Slow, independent reference computations. Nothing here shares code with
//! the solver paths it is used to check.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::model::BlockPoint;

/// Golden-section minimization of `phi` on `[0, 1]`.
pub fn golden_section<F: Fn(f64) -> f64>(phi: F, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("golden_section needs tol > 0".into()));
    }
    Ok(golden_section_on(phi, 0.0, 1.0, tol))
}

/// Golden-section minimization on `[lo, hi]`, endpoints included.
pub fn golden_section_on<F: Fn(f64) -> f64>(phi: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let (lo0, hi0) = (lo, hi);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let mut fa = phi(a);
    let mut fb = phi(b);
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = phi(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = phi(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    // the interior search cannot land exactly on an endpoint minimum
    [lo0, hi0, mid]
        .into_iter()
        .min_by(|x, y| phi(*x).total_cmp(&phi(*y)))
        .unwrap()
}

/// Grid scan with pitch `1e-3` on `[0, 1]` to isolate the best basin, then
/// golden section within the neighbouring cells.
pub fn grid_golden_section<F: Fn(f64) -> f64>(phi: F, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("grid_golden_section needs tol > 0".into()));
    }
    let n = 1000usize;
    let mut best = (0usize, phi(0.0));
    for i in 1..=n {
        let v = phi(i as f64 / n as f64);
        if v < best.1 {
            best = (i, v);
        }
    }
    let lo = best.0.saturating_sub(1) as f64 / n as f64;
    let hi = (best.0 + 1).min(n) as f64 / n as f64;
    Ok(golden_section_on(&phi, lo, hi, tol))
}

/// Central differences of `f` over the coordinates of block `k`.
pub fn finite_diff_block_gradient<F>(f: F, x: &BlockPoint, k: usize, eps: f64) -> Array1<f64>
where
    F: Fn(&BlockPoint) -> f64,
{
    let n = x.block(k).len();
    let mut probe = x.clone();
    let mut out = Array1::zeros(n);
    for i in 0..n {
        let base = x.block(k)[i];
        probe.block_mut(k)[i] = base + eps;
        let up = f(&probe);
        probe.block_mut(k)[i] = base - eps;
        let down = f(&probe);
        probe.block_mut(k)[i] = base;
        out[i] = (up - down) / (2.0 * eps);
    }
    out
}

/// Central differences of a plain vector function.
pub fn finite_diff_gradient<F>(f: F, x: ArrayView1<f64>, eps: f64) -> Array1<f64>
where
    F: Fn(ArrayView1<f64>) -> f64,
{
    let mut probe = x.to_owned();
    let mut out = Array1::zeros(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let up = f(probe.view());
        probe[i] = x[i] - eps;
        let down = f(probe.view());
        probe[i] = x[i];
        out[i] = (up - down) / (2.0 * eps);
    }
    out
}

/// Real roots of a cubic by sign-change bracketing and bisection on
/// `[-R, R]`, `R = 1 + max |c_i / c3|`. Stationary points of the cubic
/// split the interval into monotone pieces, so touching (double) roots are
/// found as well.
pub fn real_cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Result<Vec<f64>> {
    if c3 == 0.0 {
        return Err(Error::InvalidArgument("leading coefficient is zero".into()));
    }
    let (a, b, c) = (c2 / c3, c1 / c3, c0 / c3);
    let p = |x: f64| ((x + a) * x + b) * x + c;
    let radius = 1.0 + a.abs().max(b.abs()).max(c.abs());

    // breakpoints: critical points of p, found from its derivative 3x^2 + 2ax + b
    let mut knots = vec![-radius, radius];
    let disc = 4.0 * a * a - 12.0 * b;
    if disc >= 0.0 {
        for s in [-1.0, 1.0] {
            let z = (-2.0 * a + s * disc.sqrt()) / 6.0;
            if z > -radius && z < radius {
                knots.push(z);
            }
        }
    }
    knots.sort_by(f64::total_cmp);

    let mut roots: Vec<f64> = Vec::new();
    let scale = 1.0 + a.abs() + b.abs() + c.abs();
    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (plo, phi) = (p(lo), p(hi));
        if plo == 0.0 {
            roots.push(lo);
        }
        if phi == 0.0 {
            roots.push(hi);
        }
        if plo * phi < 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if (p(mid) < 0.0) == (p(lo) < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    // a touching root sits on a critical point where p nearly vanishes
    for &z in &knots[1..knots.len() - 1] {
        if p(z).abs() <= 1e-12 * scale && !roots.iter().any(|r| (r - z).abs() < 1e-6) {
            roots.push(z);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    Ok(roots)
}

/// Unpivoted Gaussian elimination for a symmetric positive definite
/// system, with symmetry and pivot-sign checks.
pub fn dense_spd_solve(m: ArrayView2<f64>, r: ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = m.nrows();
    if m.ncols() != n || r.len() != n {
        return Err(Error::DimensionMismatch("dense_spd_solve".into()));
    }
    for i in 0..n {
        for j in 0..i {
            let tol = 1e-12 * (m[[i, j]].abs() + m[[j, i]].abs()).max(1.0);
            if (m[[i, j]] - m[[j, i]]).abs() > tol {
                return Err(Error::NotPositiveDefinite {
                    pivot: i,
                    value: f64::NAN,
                });
            }
        }
    }
    let mut a = m.to_owned();
    let mut rhs = r.to_owned();
    for col in 0..n {
        let piv = a[[col, col]];
        if !(piv > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: col, value: piv });
        }
        for row in col + 1..n {
            let factor = a[[row, col]] / piv;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[[row, j]] -= factor * a[[col, j]];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for j in row + 1..n {
            acc -= a[[row, j]] * x[j];
        }
        x[row] = acc / a[[row, row]];
    }
    Ok(x)
}

/// Reference vs candidate comparison for test diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub reference: f64,
    pub candidate: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, reference: f64, candidate: f64) -> Self {
        let abs_dev = (reference - candidate).abs();
        Self {
            quantity: quantity.into(),
            reference,
            candidate,
            abs_dev,
            rel_dev: abs_dev / reference.abs().max(f64::MIN_POSITIVE),
        }
    }

    pub fn within(&self, abs_tol: f64, rel_tol: f64) -> bool {
        self.abs_dev <= abs_tol || self.rel_dev <= rel_tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn golden_section_examples() {
        let g = golden_section(|t| (t - 0.3).powi(2), 1e-10).unwrap();
        assert!((g - 0.3).abs() < 1e-8);
        assert_eq!(golden_section(|t| t, 1e-10).unwrap(), 0.0);
        assert!(golden_section(|t| t, 0.0).is_err());
        // PR toy quartic 1/4 g^4 - 1/2 g^2
        let g = grid_golden_section(|t| 0.25 * t.powi(4) - 0.5 * t * t, 1e-10).unwrap();
        assert!((g - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cubic_root_examples() {
        assert_eq!(real_cubic_roots(1.0, 0.0, 0.0, -1.0).unwrap().len(), 1);
        let r = real_cubic_roots(1.0, 0.0, -1.0, 0.0).unwrap();
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        let r = real_cubic_roots(1.0, -3.0, 3.0, -1.0).unwrap();
        assert!(r.iter().all(|x| (x - 1.0).abs() < 1e-5), "{r:?}");
        assert!(real_cubic_roots(0.0, 1.0, 1.0, 1.0).is_err());
        // theta^3 + theta - 1
        let r = real_cubic_roots(1.0, 0.0, 1.0, -1.0).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.682327803828).abs() < 1e-11);
    }

    #[test]
    fn spd_solve_examples() {
        let r = array![1.0, -2.0, 3.0];
        assert_eq!(dense_spd_solve(Array2::eye(3).view(), r.view()).unwrap(), r);
        assert_eq!(dense_spd_solve(array![[2.0]].view(), array![4.0].view()).unwrap(), array![2.0]);
        assert!(dense_spd_solve(array![[1.0, 2.0], [2.0, 1.0]].view(), array![1.0, 1.0].view()).is_err());
        assert!(dense_spd_solve(array![[1.0, 0.5], [0.0, 1.0]].view(), array![1.0, 1.0].view()).is_err());
    }

    #[test]
    fn finite_difference_of_affine_is_exact() {
        use crate::model::BlockPartition;
        use std::sync::Arc;
        let part = Arc::new(BlockPartition::new(&[2, 1]).unwrap());
        let x = BlockPoint::new(part, array![0.3, -1.2, 4.0]).unwrap();
        let g = finite_diff_block_gradient(|p| 2.0 * p.values()[0] - 3.0 * p.values()[1] + 1.0, &x, 0, 1e-3);
        assert!((g[0] - 2.0).abs() < 1e-10 && (g[1] + 3.0).abs() < 1e-10);
    }
}
