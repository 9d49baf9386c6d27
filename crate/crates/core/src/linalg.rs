//! Small dense helpers: Cholesky solves, power iteration, range basis.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::Scalar;

/// Solves `G z = b` for symmetric positive definite `G`. Returns `None` when
/// a pivot falls below `rel_tol · max(diag)`.
pub(crate) fn cholesky_solve<T: Scalar>(
    g: ArrayView2<'_, T>,
    b: ArrayView1<'_, T>,
    rel_tol: T,
) -> Option<Array1<T>> {
    let n = g.nrows();
    let scale = g.diag().iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    if n == 0 {
        return Some(Array1::zeros(0));
    }
    if !(scale > T::zero()) {
        return None;
    }
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = g[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > rel_tol * scale) {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in j + 1..n {
            let mut s = g[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    let mut y = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut z = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * z[k];
        }
        z[i] = s / l[[i, i]];
    }
    Some(z)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration from the all-ones vector.
pub(crate) fn power_iteration<T: Scalar>(g: ArrayView2<'_, T>, iters: usize, tol: T) -> T {
    let n = g.nrows();
    if n == 0 {
        return T::zero();
    }
    let mut v = Array1::from_elem(n, T::one() / T::of_count(n).sqrt());
    let mut eig = T::zero();
    for _ in 0..iters {
        let w = g.dot(&v);
        let norm = w.dot(&w).sqrt();
        if !(norm > T::zero()) {
            return T::zero();
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - eig).abs() <= tol * next.abs() {
            eig = next;
            break;
        }
        eig = next;
    }
    // the Rayleigh quotient never exceeds the top eigenvalue; the norm of
    // the last product is a slightly better bound from the same work
    let w = g.dot(&v);
    eig.max(w.dot(&w).sqrt())
}

/// Orthonormal basis of the column space, by modified Gram-Schmidt with one
/// reorthogonalization pass. Columns whose remainder drops below `rel_tol`
/// of their original norm are treated as dependent.
pub(crate) fn range_basis<T: Scalar>(a: ArrayView2<'_, T>, rel_tol: T) -> Array2<T> {
    let m = a.nrows();
    let mut basis: Vec<Array1<T>> = Vec::new();
    for col in a.axis_iter(Axis(1)) {
        if basis.len() == m {
            break;
        }
        let norm0 = col.dot(&col).sqrt();
        if !(norm0 > T::zero()) {
            continue;
        }
        let mut v = col.to_owned();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.scaled_add(-c, q);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > rel_tol * norm0 {
            basis.push(v / norm);
        }
    }
    let mut out = Array2::zeros((m, basis.len()));
    for (j, q) in basis.iter().enumerate() {
        out.column_mut(j).assign(q);
    }
    out
}

/// `‖x − QQᵀx‖²` for an orthonormal `Q`.
pub(crate) fn residual_outside<T: Scalar>(q: ArrayView2<'_, T>, x: ArrayView1<'_, T>) -> T {
    let coeffs = q.t().dot(&x);
    let proj = q.dot(&coeffs);
    let r = &x - &proj;
    r.dot(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_small_system() {
        let g = array![[4.0f64, 2.0], [2.0, 3.0]];
        let b = array![2.0, 1.0];
        let z = cholesky_solve(g.view(), b.view(), 1e-12).unwrap();
        let back = g.dot(&z);
        assert!((back[0] - 2.0).abs() < 1e-14 && (back[1] - 1.0).abs() < 1e-14);
        let singular = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(cholesky_solve(singular.view(), b.view(), 1e-12).is_none());
    }

    #[test]
    fn power_iteration_diagonal() {
        let g = array![[3.0f64, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]];
        let e = power_iteration(g.view(), 200, 1e-14);
        assert!((e - 3.0).abs() < 1e-9);
    }

    #[test]
    fn range_basis_rank() {
        let a = array![[1.0f64, 2.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]];
        let q = range_basis(a.view(), 1e-10);
        assert_eq!(q.ncols(), 2);
        let x = array![1.0, 2.0, 3.0];
        assert!((residual_outside(q.view(), x.view()) - 9.0).abs() < 1e-12);
    }
}
