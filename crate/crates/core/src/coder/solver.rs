//! Weighted-ℓ1 solver on the Gram form `‖x‖² − 2aᵀc + aᵀGa + Σw_k|a_k|`,
//! with `G = DᵀD` and `c = Dᵀx`.
//!
//! Accelerated proximal gradient runs on a working set of atoms that grows
//! with the KKT violators of the full problem. Convergence is certified by
//! the duality gap.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::linalg::{cholesky_solve, power_iteration};
use crate::{Error, Result, Scalar};

/// Per-sample data in Gram form.
pub(crate) struct Prepared<T> {
    pub c: Array1<T>,
    pub xx: T,
}

pub(crate) struct Solve<T> {
    pub a: Array1<T>,
    pub iterations: usize,
    pub converged: bool,
}

fn soft<T: Scalar>(v: T, t: T) -> T {
    let m = v.abs() - t;
    if m > T::zero() {
        m.copysign(v)
    } else {
        T::zero()
    }
}

/// Primal value and duality gap at `a`, given correlations `g = c − Ga`.
fn primal_and_gap<T: Scalar>(
    xx: T,
    a: ArrayView1<'_, T>,
    c: ArrayView1<'_, T>,
    g: ArrayView1<'_, T>,
    w: &[T],
) -> (T, T) {
    let ac = a.dot(&c);
    let rr = (xx - ac - a.dot(&g)).max(T::zero());
    let pen: T = a.iter().zip(w).map(|(&v, &wk)| wk * v.abs()).sum();
    let primal = rr + pen;
    let mut s = T::one();
    for (&gk, &wk) in g.iter().zip(w) {
        let m = T::lit(2.0) * gk.abs();
        if m > T::zero() && wk < s * m {
            s = wk / m;
        }
    }
    let dual = T::lit(2.0) * s * (xx - ac) - s * s * rr;
    (primal, (primal - dual).max(T::zero()))
}

fn converged<T: Scalar>(primal: T, gap: T, tol: T) -> bool {
    gap <= tol * (T::one() + primal.abs())
}

/// `c − G_{:,S} a_S` over the nonzeros of `a`.
pub(crate) fn correlations<T: Scalar>(
    gram: ArrayView2<'_, T>,
    c: ArrayView1<'_, T>,
    a: ArrayView1<'_, T>,
) -> Array1<T> {
    let mut g = c.to_owned();
    for (j, &aj) in a.iter().enumerate() {
        if aj != T::zero() {
            g.scaled_add(-aj, &gram.column(j));
        }
    }
    g
}

pub(crate) fn solve_weighted<T: Scalar>(
    gram: ArrayView2<'_, T>,
    p: &Prepared<T>,
    w: &[T],
    start: Option<ArrayView1<'_, T>>,
    tol: T,
    max_iters: usize,
) -> Result<Solve<T>> {
    let k = gram.nrows();
    let mut a = match start {
        Some(s) => s.to_owned(),
        None => Array1::zeros(k),
    };
    let mut in_ws = vec![false; k];
    for (j, &v) in a.iter().enumerate() {
        if v != T::zero() {
            in_ws[j] = true;
        }
    }
    let mut iterations = 0;
    let mut done = false;
    for _round in 0..(4 * k + 8) {
        let g = correlations(gram, p.c.view(), a.view());
        let (primal, gap) = primal_and_gap(p.xx, a.view(), p.c.view(), g.view(), w);
        if converged(primal, gap, tol) {
            done = true;
            break;
        }
        if iterations >= max_iters {
            break;
        }
        let mut viol: Vec<(T, usize)> = (0..k)
            .filter(|&j| !in_ws[j])
            .filter_map(|j| {
                let v = T::lit(2.0) * g[j].abs() - w[j];
                (v > T::zero()).then_some((v, j))
            })
            .collect();
        let current = in_ws.iter().filter(|&&b| b).count();
        if !viol.is_empty() {
            viol.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
            for &(_, j) in viol.iter().take(current.max(8)) {
                in_ws[j] = true;
            }
        }
        let ws: Vec<usize> = (0..k).filter(|&j| in_ws[j]).collect();
        if ws.is_empty() {
            // nothing violates and nothing is active: a = 0 is optimal up to rounding
            done = true;
            break;
        }
        let sub = subsolve(gram, p, w, &ws, &mut a, tol, max_iters - iterations)?;
        iterations += sub.0;
        if viol.is_empty() && sub.1 {
            done = true;
            break;
        }
        if viol.is_empty() && sub.0 == 0 {
            break;
        }
    }
    Ok(Solve {
        a,
        iterations,
        converged: done,
    })
}

struct Sub<T> {
    g: Array2<T>,
    c: Array1<T>,
    w: Vec<T>,
    xx: T,
}

impl<T: Scalar> Sub<T> {
    /// `vᵀGv − 2vᵀc`.
    fn smooth(&self, v: &Array1<T>) -> T {
        v.dot(&self.g.dot(v)) - T::lit(2.0) * v.dot(&self.c)
    }

    fn total(&self, v: &Array1<T>) -> T {
        let pen: T = v.iter().zip(&self.w).map(|(&x, &wk)| wk * x.abs()).sum();
        self.xx + self.smooth(v) + pen
    }

    fn grad(&self, v: &Array1<T>) -> Array1<T> {
        (self.g.dot(v) - &self.c) * T::lit(2.0)
    }

    /// Proximal step from `y` with backtracking on `l`.
    fn prox_step(&self, y: &Array1<T>, l: &mut T) -> Array1<T> {
        let grad = self.grad(y);
        let hy = self.smooth(y);
        let slack = T::lit(100.0) * T::epsilon() * (hy.abs() + self.xx);
        let mut z = y.clone();
        for _ in 0..64 {
            let inv = T::one() / *l;
            z = Array1::from_iter(
                y.iter()
                    .zip(grad.iter())
                    .zip(&self.w)
                    .map(|((&yj, &gj), &wj)| soft(yj - gj * inv, wj * inv)),
            );
            let d = &z - y;
            let bound = hy + grad.dot(&d) + *l * T::lit(0.5) * d.dot(&d) + slack;
            if self.smooth(&z) <= bound {
                break;
            }
            *l *= T::lit(2.0);
        }
        z
    }

    /// Exact solution on the current support with signs held fixed.
    fn polish(&self, x: &Array1<T>) -> Option<Array1<T>> {
        let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] != T::zero()).collect();
        if support.is_empty() {
            return None;
        }
        let n = support.len();
        let gs = Array2::from_shape_fn((n, n), |(i, j)| self.g[[support[i], support[j]]]);
        let rhs = Array1::from_shape_fn(n, |i| {
            let j = support[i];
            self.c[j] - T::lit(0.5) * self.w[j] * x[j].signum()
        });
        let z = cholesky_solve(gs.view(), rhs.view(), T::lit(1e-12))?;
        let mut out = Array1::zeros(x.len());
        for (i, &j) in support.iter().enumerate() {
            if z[i].signum() != x[j].signum() || !z[i].is_finite() {
                return None;
            }
            out[j] = z[i];
        }
        Some(out)
    }

    fn gap(&self, x: &Array1<T>) -> T {
        let corr = &self.c - &self.g.dot(x);
        primal_and_gap(self.xx, x.view(), self.c.view(), corr.view(), &self.w).1
    }
}

/// Runs APG on the working set `ws`, updating `a` in place. Returns the
/// iteration count and whether the working-set gap closed.
fn subsolve<T: Scalar>(
    gram: ArrayView2<'_, T>,
    p: &Prepared<T>,
    w: &[T],
    ws: &[usize],
    a: &mut Array1<T>,
    tol: T,
    budget: usize,
) -> Result<(usize, bool)> {
    let n = ws.len();
    let sub = Sub {
        g: Array2::from_shape_fn((n, n), |(i, j)| gram[[ws[i], ws[j]]]),
        c: Array1::from_shape_fn(n, |i| p.c[ws[i]]),
        w: ws.iter().map(|&j| w[j]).collect(),
        xx: p.xx,
    };
    let eig = power_iteration(sub.g.view(), 30, T::lit(1e-10));
    if !eig.is_finite() {
        return Err(Error::Numerical("step size estimation failed".into()));
    }
    let mut x = Array1::from_shape_fn(n, |i| a[ws[i]]);
    if !(eig > T::zero()) {
        // every atom in the set is zero; its coefficients do not matter
        x.fill(T::zero());
        for (i, &j) in ws.iter().enumerate() {
            a[j] = x[i];
        }
        return Ok((0, true));
    }
    let mut l = T::lit(2.0) * eig;
    let mut fx = sub.total(&x);
    let mut y = x.clone();
    let mut t = T::one();
    let mut it = 0;
    let mut closed = false;
    while it < budget {
        if it % 10 == 0 {
            if let Some(z) = sub.polish(&x) {
                let fz = sub.total(&z);
                if fz <= fx {
                    x = z;
                    fx = fz;
                    y = x.clone();
                    t = T::one();
                }
            }
        }
        if converged(fx, sub.gap(&x), tol) {
            closed = true;
            break;
        }
        it += 1;
        let z = sub.prox_step(&y, &mut l);
        let fz = sub.total(&z);
        if fz <= fx {
            let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) * T::lit(0.5);
            y = &z + &((&z - &x) * ((t - T::one()) / t_next));
            x = z;
            fx = fz;
            t = t_next;
        } else {
            let z = sub.prox_step(&x, &mut l);
            let fz = sub.total(&z);
            t = T::one();
            if fz < fx {
                x = z;
                fx = fz;
                y = x.clone();
            } else {
                // no further decrease at working precision
                closed = converged(fx, sub.gap(&x), tol);
                break;
            }
        }
    }
    for (i, &j) in ws.iter().enumerate() {
        a[j] = x[i];
    }
    Ok((it, closed))
}
