//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use usm::Dictionary;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| rng.sample(StandardNormal))
}

pub fn gaussian_dict(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Dictionary<f64> {
    let a = Array2::from_shape_fn((m, k), |_| rng.sample(StandardNormal));
    Dictionary::normalized(a).unwrap()
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `∫_0^∞ f` by mapping geometric panels `[0, h], [h, 2h], [2h, 4h], …`.
pub fn integrate_half_line(f: &dyn Fn(f64) -> f64, h: f64, tol: f64) -> f64 {
    let mut total = simpson(f, 0.0, h, tol);
    let mut lo = h;
    for _ in 0..200 {
        let hi = lo * 2.0;
        let part = simpson(f, lo, hi, tol);
        total += part;
        lo = hi;
        if part.abs() < tol * 1e-3 && lo > 1e3 * h {
            break;
        }
    }
    total
}

/// Cyclic coordinate descent for `‖x − Da‖² + Σw_k|a_k|` with exact scalar updates.
pub fn cd_weighted_l1(d: &Array2<f64>, x: &Array1<f64>, w: &[f64], tol: f64) -> Array1<f64> {
    let k = d.ncols();
    let mut a = Array1::<f64>::zeros(k);
    let mut r = x.clone();
    let norms: Vec<f64> = (0..k).map(|j| d.column(j).dot(&d.column(j))).collect();
    for _ in 0..1_000_000 {
        let mut change = 0.0f64;
        for j in 0..k {
            if norms[j] == 0.0 {
                continue;
            }
            let col = d.column(j);
            let rho = col.dot(&r) + norms[j] * a[j];
            let new = if rho.abs() > w[j] / 2.0 {
                (rho.abs() - w[j] / 2.0).copysign(rho) / norms[j]
            } else {
                0.0
            };
            let delta = new - a[j];
            if delta != 0.0 {
                r.scaled_add(-delta, &col);
                a[j] = new;
                change = change.max(delta.abs());
            }
        }
        if change < tol {
            break;
        }
    }
    a
}

pub fn weighted_l1_objective(d: &Array2<f64>, x: &Array1<f64>, a: &Array1<f64>, w: &[f64]) -> f64 {
    let r = x - &d.dot(a);
    r.dot(&r) + a.iter().zip(w).map(|(v, wk)| wk * v.abs()).sum::<f64>()
}

/// Minimizer of `f` over the grid `lo, lo+h, …, hi`.
pub fn grid_argmin(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, h: f64) -> f64 {
    let n = ((hi - lo) / h).round() as usize;
    let mut best = (lo, f(lo));
    for i in 1..=n {
        let t = lo + h * i as f64;
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best.0
}

/// Central difference `(f(x+h) − f(x−h)) / 2h`.
pub fn central_difference(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
