use ndarray::{Array1, ArrayView1};

use crate::coder::CodeResult;
use crate::{ActiveSet, Dictionary, Error, Result, Scalar};

/// Stopping rule for [`omp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmpStop<T> {
    /// At most this many nonzeros.
    MaxNonzeros(usize),
    /// Stop once `‖x − Da‖² ≤ ε`.
    Residual(T),
}

/// Orthogonal matching pursuit. Each step adds the atom most correlated
/// with the residual (lowest index on ties) and refits all active
/// coefficients by least squares.
pub fn omp<T: Scalar>(
    x: ArrayView1<'_, T>,
    dict: &Dictionary<T>,
    stop: OmpStop<T>,
) -> Result<(CodeResult<T>, ActiveSet)> {
    let (m, k) = (dict.rows(), dict.atoms());
    if x.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} entries, dictionary has {m} rows",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("sample has non-finite entries".into()));
    }
    let (budget, eps) = match stop {
        OmpStop::MaxNonzeros(l) => {
            if l > m.min(k) {
                return Err(Error::InvalidParameter(format!(
                    "budget {l} exceeds min(M, K) = {}",
                    m.min(k)
                )));
            }
            (l, T::zero())
        }
        OmpStop::Residual(e) => {
            if !(e >= T::zero()) {
                return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {e}")));
            }
            (m.min(k), e)
        }
    };
    let d = dict.view();
    let xx = x.dot(&x);
    let floor = T::lit(1e-24).max(T::epsilon() * T::epsilon() * T::lit(256.0)) * xx;
    // Q holds an orthonormal basis of the selected atoms, R the triangular factor.
    let mut q: Vec<Array1<T>> = Vec::new();
    let mut r: Vec<Vec<T>> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut resid = x.to_owned();
    let mut rr = xx;
    let mut singular = false;
    while active.len() < budget && rr > eps.max(floor) {
        let corr = d.t().dot(&resid);
        let mut best: Option<(usize, T)> = None;
        for (j, &cj) in corr.iter().enumerate() {
            if active.contains(&j) {
                continue;
            }
            if best.is_none_or(|(_, b)| cj.abs() > b) {
                best = Some((j, cj.abs()));
            }
        }
        let Some((j, cmax)) = best else { break };
        if !(cmax > T::zero()) {
            break;
        }
        let atom = d.column(j);
        let norm0 = atom.dot(&atom).sqrt();
        let mut v = atom.to_owned();
        let mut coeffs = vec![T::zero(); q.len() + 1];
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = qi.dot(&v);
                coeffs[i] += c;
                v.scaled_add(-c, qi);
            }
        }
        let norm = v.dot(&v).sqrt();
        if !(norm > T::lit(1e-10) * norm0) {
            singular = true;
            break;
        }
        coeffs[q.len()] = norm;
        let qn = v / norm;
        let proj = qn.dot(&resid);
        resid.scaled_add(-proj, &qn);
        // one more sweep keeps the residual orthogonal to every selected atom
        for qi in q.iter().chain(std::iter::once(&qn)) {
            let c = qi.dot(&resid);
            resid.scaled_add(-c, qi);
        }
        q.push(qn);
        r.push(coeffs);
        active.push(j);
        rr = resid.dot(&resid);
    }
    // back-substitution R z = Qᵀx, R upper triangular stored by columns
    let n = active.len();
    let qtx: Vec<T> = q.iter().map(|qi| qi.dot(&x)).collect();
    let mut z = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = qtx[i];
        for (jj, zj) in z.iter().enumerate().skip(i + 1) {
            s -= r[jj][i] * *zj;
        }
        z[i] = s / r[i][i];
    }
    let mut coeffs = Array1::zeros(k);
    for (i, &j) in active.iter().enumerate() {
        coeffs[j] = z[i];
    }
    let recon = d.dot(&coeffs);
    let diff = &x - &recon;
    let residual_sq = diff.dot(&diff);
    let set = ActiveSet::new(active, k)?;
    Ok((
        CodeResult {
            coeffs,
            objective: residual_sq,
            iterations: vec![n],
            residual_sq,
            lambda: T::zero(),
            trace: Vec::new(),
            converged: !singular,
        },
        set,
    ))
}
