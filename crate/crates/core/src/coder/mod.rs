//! Sparse coding: thresholding, weighted-ℓ1, LLA for non-convex priors,
//! error-constrained coding and OMP.
//!
//! The fidelity term is `‖x − Da‖²` with no ½ factor.
//!
//! Constrained coding searches λ by bisection over LLA solutions, aiming for
//! a residual in `[0.95ε, ε]`. This is one defensible continuation scheme,
//! not the only one.

mod omp;
mod solver;
mod threshold;

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;

pub use omp::{omp, OmpStop};
pub use threshold::{scalar_threshold, soft_threshold};

use crate::linalg::{cholesky_solve, range_basis, residual_outside};
use crate::priors::MoeParams;
use crate::{CoeffMatrix, Dictionary, Error, PriorModel, Result, SampleMatrix, Scalar};
use solver::{solve_weighted, Prepared};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeOptions<T> {
    /// Regularization weight λ.
    pub lambda: T,
    /// LLA rounds.
    pub lla_iters: usize,
    /// Relative duality-gap tolerance of the inner solver.
    pub inner_tol: T,
    pub inner_max_iters: usize,
    /// ℓ2² budget; when set, coding is error-constrained and `lambda` is searched.
    pub epsilon: Option<T>,
}

impl<T: Scalar> Default for CodeOptions<T> {
    fn default() -> Self {
        Self {
            lambda: T::zero(),
            lla_iters: 5,
            inner_tol: T::lit(1e-8),
            inner_max_iters: 2000,
            epsilon: None,
        }
    }
}

impl<T: Scalar> CodeOptions<T> {
    pub fn with_lambda(lambda: T) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn with_epsilon(epsilon: T) -> Self {
        Self {
            epsilon: Some(epsilon),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.lla_iters == 0 || self.inner_max_iters == 0 {
            return Err(Error::InvalidParameter("iteration counts must be >= 1".into()));
        }
        if !(self.inner_tol > T::zero()) {
            return Err(Error::InvalidParameter("inner_tol must be > 0".into()));
        }
        if let Some(e) = self.epsilon {
            if !(e >= T::zero()) || !e.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "epsilon must be finite and >= 0, got {e}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeResult<T> {
    pub coeffs: Array1<T>,
    /// `‖x − Da‖² + λΣψ(|a_k|)` (for [`weighted_l1`], `Σλ_k|a_k|`).
    pub objective: T,
    /// Inner iterations per stage: per LLA round, or per λ tried when constrained.
    pub iterations: Vec<usize>,
    pub residual_sq: T,
    /// λ the returned coefficients were computed with.
    pub lambda: T,
    /// Objective after each LLA round, or `(λ, residual_sq)` pairs flattened
    /// in evaluation order for constrained coding.
    pub trace: Vec<T>,
    /// False when an iteration budget ran out or a system was singular.
    pub converged: bool,
}

impl<T: Scalar> CodeResult<T> {
    /// Bisection evaluations `(λ, residual_sq)` recorded by constrained coding.
    pub fn bisection(&self) -> Vec<(T, T)> {
        self.trace.chunks_exact(2).map(|c| (c[0], c[1])).collect()
    }
}

/// Starting point for LLA.
#[derive(Debug, Clone, Copy)]
pub enum LlaStart<'a, T> {
    /// First-round weights from the constant initial point.
    Default,
    /// Default weights, inner solver started at the given coefficients.
    Warm(ArrayView1<'a, T>),
    /// Weights and inner solver both taken from the given coefficients.
    Iterate(ArrayView1<'a, T>),
}

/// `‖x − Da‖² + λΣψ(|a_k|)`.
pub fn objective<T: Scalar>(
    x: ArrayView1<'_, T>,
    dict: &Dictionary<T>,
    a: ArrayView1<'_, T>,
    lambda: T,
    model: &PriorModel<T>,
) -> Result<T> {
    check_dims(x, dict)?;
    if a.len() != dict.atoms() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} atoms",
            a.len(),
            dict.atoms()
        )));
    }
    Ok(residual_sq(x, dict, a) + lambda * regularizer(a, model))
}

fn residual_sq<T: Scalar>(x: ArrayView1<'_, T>, dict: &Dictionary<T>, a: ArrayView1<'_, T>) -> T {
    let mut r = x.to_owned();
    for (k, &ak) in a.iter().enumerate() {
        if ak != T::zero() {
            r.scaled_add(-ak, &dict.atom(k));
        }
    }
    r.dot(&r)
}

fn regularizer<T: Scalar>(a: ArrayView1<'_, T>, model: &PriorModel<T>) -> T {
    a.iter().map(|v| model.psi(v.abs())).sum()
}

fn check_dims<T: Scalar>(x: ArrayView1<'_, T>, dict: &Dictionary<T>) -> Result<()> {
    if x.len() != dict.rows() {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} entries, dictionary has {} rows",
            x.len(),
            dict.rows()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("sample has non-finite entries".into()));
    }
    Ok(())
}

/// Approximation error ζ(a₀) of replacing the MOE regularizer by its tangent at a₀:
/// `log(a₀+β) + (β/(κ−1) − a₀)/(a₀+β) − log β − 1/κ`.
pub fn zeta_moe<T: Scalar>(a0: T, p: &MoeParams<T>) -> Result<T> {
    let (kappa, beta) = (p.kappa(), p.beta());
    if !(kappa > T::one()) {
        return Err(Error::InvalidParameter(format!(
            "zeta needs kappa > 1, got {kappa}"
        )));
    }
    if !(a0 >= T::zero()) {
        return Err(Error::InvalidParameter(format!("a0 must be >= 0, got {a0}")));
    }
    let mean = beta / (kappa - T::one());
    Ok((a0 + beta).ln() + (mean - a0) / (a0 + beta) - beta.ln() - T::one() / kappa)
}

/// Constant initial iterate for LLA: where the scaled regularizer slope
/// equals the expected rate of the prior. For MOE (scale κ+1) this is β/κ.
pub fn lla_initial_point<T: Scalar>(model: &PriorModel<T>) -> T {
    match model {
        PriorModel::Laplacian(_) => T::zero(),
        PriorModel::Moe(p) => p.beta() / p.kappa(),
        PriorModel::Joe(_) => {
            let target = model.expected_rate();
            let mut hi = T::one() / target;
            for _ in 0..200 {
                if model.dpsi(hi) < target {
                    break;
                }
                hi *= T::lit(2.0);
            }
            let mut lo = T::zero();
            for _ in 0..200 {
                let mid = (lo + hi) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                if model.dpsi(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo + hi) * T::lit(0.5)
        }
    }
}

/// Sparse coder bound to one dictionary, caching `DᵀD` and a basis of its range.
#[derive(Debug)]
pub struct Coder<'a, T> {
    dict: &'a Dictionary<T>,
    gram: Array2<T>,
    range: OnceLock<Array2<T>>,
}

impl<'a, T: Scalar> Coder<'a, T> {
    pub fn new(dict: &'a Dictionary<T>) -> Self {
        Self {
            dict,
            gram: dict.gram(),
            range: OnceLock::new(),
        }
    }

    pub fn dictionary(&self) -> &Dictionary<T> {
        self.dict
    }

    fn prepare(&self, x: ArrayView1<'_, T>) -> Result<Prepared<T>> {
        check_dims(x, self.dict)?;
        Ok(Prepared {
            c: self.dict.view().t().dot(&x),
            xx: x.dot(&x),
        })
    }

    /// Squared norm of the least-squares residual of `x` on the atoms.
    pub fn ls_residual_sq(&self, x: ArrayView1<'_, T>) -> Result<T> {
        check_dims(x, self.dict)?;
        let q = self
            .range
            .get_or_init(|| range_basis(self.dict.view(), T::lit(1e-10)));
        Ok(residual_outside(q.view(), x))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        x: ArrayView1<'_, T>,
        coeffs: Array1<T>,
        lambda: T,
        model: &PriorModel<T>,
        iterations: Vec<usize>,
        trace: Vec<T>,
        converged: bool,
    ) -> CodeResult<T> {
        let residual_sq = residual_sq(x, self.dict, coeffs.view());
        let objective = residual_sq + lambda * regularizer(coeffs.view(), model);
        CodeResult {
            coeffs,
            objective,
            iterations,
            residual_sq,
            lambda,
            trace,
            converged,
        }
    }

    /// `min ‖x − Da‖² + Σλ_k|a_k|`.
    pub fn weighted_l1(
        &self,
        x: ArrayView1<'_, T>,
        weights: &[T],
        opts: &CodeOptions<T>,
        start: Option<ArrayView1<'_, T>>,
    ) -> Result<CodeResult<T>> {
        opts.validate()?;
        let k = self.dict.atoms();
        if weights.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {k} atoms",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite and >= 0".into()));
        }
        if let Some(s) = start {
            if s.len() != k {
                return Err(Error::DimensionMismatch("start has wrong length".into()));
            }
        }
        let p = self.prepare(x)?;
        let s = solve_weighted(
            self.gram.view(),
            &p,
            weights,
            start,
            opts.inner_tol,
            opts.inner_max_iters,
        )?;
        let residual_sq = residual_sq(x, self.dict, s.a.view());
        let pen: T = s
            .a
            .iter()
            .zip(weights)
            .map(|(&v, &w)| w * v.abs())
            .sum();
        Ok(CodeResult {
            coeffs: s.a,
            objective: residual_sq + pen,
            iterations: vec![s.iterations],
            residual_sq,
            lambda: T::zero(),
            trace: Vec::new(),
            converged: s.converged,
        })
    }

    /// LLA: each round solves a weighted-ℓ1 problem with weights
    /// `λψ′(|a_k|)` at the previous iterate, warm-started from it.
    pub fn lla(
        &self,
        x: ArrayView1<'_, T>,
        model: &PriorModel<T>,
        opts: &CodeOptions<T>,
        start: LlaStart<'_, T>,
    ) -> Result<CodeResult<T>> {
        opts.validate()?;
        let p = self.prepare(x)?;
        self.lla_prepared(x, &p, model, opts.lambda, opts, start)
    }

    fn lla_prepared(
        &self,
        x: ArrayView1<'_, T>,
        p: &Prepared<T>,
        model: &PriorModel<T>,
        lambda: T,
        opts: &CodeOptions<T>,
        start: LlaStart<'_, T>,
    ) -> Result<CodeResult<T>> {
        let k = self.dict.atoms();
        let rounds = match model {
            PriorModel::Laplacian(_) => 1,
            _ => opts.lla_iters,
        };
        let weights_at = |a: ArrayView1<'_, T>| -> Vec<T> {
            a.iter().map(|v| lambda * model.dpsi(v.abs())).collect()
        };
        let (mut w, mut current): (Vec<T>, Option<Array1<T>>) = match start {
            LlaStart::Default => (vec![lambda * model.dpsi(lla_initial_point(model)); k], None),
            LlaStart::Warm(a) => (
                vec![lambda * model.dpsi(lla_initial_point(model)); k],
                Some(a.to_owned()),
            ),
            LlaStart::Iterate(a) => (weights_at(a), Some(a.to_owned())),
        };
        if let Some(a) = &current {
            if a.len() != k {
                return Err(Error::DimensionMismatch("start has wrong length".into()));
            }
        }
        let mut iterations = Vec::with_capacity(rounds);
        let mut trace = Vec::with_capacity(rounds);
        let mut converged = true;
        let mut a = Array1::zeros(k);
        for _ in 0..rounds {
            let s = solve_weighted(
                self.gram.view(),
                p,
                &w,
                current.as_ref().map(|a| a.view()),
                opts.inner_tol,
                opts.inner_max_iters,
            )?;
            converged &= s.converged;
            iterations.push(s.iterations);
            a = s.a;
            trace.push(residual_sq(x, self.dict, a.view()) + lambda * regularizer(a.view(), model));
            w = weights_at(a.view());
            current = Some(a.clone());
        }
        Ok(self.finish(x, a, lambda, model, iterations, trace, converged))
    }

    /// `min Σψ(|a_k|)` subject to `‖x − Da‖² ≤ ε`, by bisection over λ.
    pub fn constrained(
        &self,
        x: ArrayView1<'_, T>,
        model: &PriorModel<T>,
        epsilon: T,
        opts: &CodeOptions<T>,
    ) -> Result<CodeResult<T>> {
        opts.validate()?;
        if !(epsilon >= T::zero()) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        let p = self.prepare(x)?;
        let k = self.dict.atoms();
        if p.xx <= epsilon {
            return Ok(self.finish(x, Array1::zeros(k), T::zero(), model, vec![0], Vec::new(), true));
        }
        let floor = self.ls_residual_sq(x)?;
        let slack = T::lit(1e-12) * p.xx;
        if epsilon < floor - slack {
            return Err(Error::Infeasible(format!(
                "epsilon {epsilon} is below the least-squares residual {floor}"
            )));
        }
        // At or below the least-squares floor only an exact fit qualifies:
        // locate the support with a small residual, then refit on it.
        let exact = epsilon <= floor + slack;
        let (lower, upper) = if exact {
            (T::zero(), floor + T::lit(1e-6) * p.xx)
        } else {
            (T::lit(0.95) * epsilon, epsilon)
        };

        let mut trace = Vec::new();
        let mut iterations = Vec::new();
        let mut best: Option<(T, CodeResult<T>)> = None;
        let mut last: Option<Array1<T>> = None;
        let mut eval = |lam: T, last: &mut Option<Array1<T>>| -> Result<(T, bool)> {
            let start = match last {
                Some(a) => LlaStart::Warm(a.view()),
                None => LlaStart::Default,
            };
            let r = self.lla_prepared(x, &p, model, lam, opts, start)?;
            trace.push(lam);
            trace.push(r.residual_sq);
            iterations.push(r.iterations.iter().sum());
            let res = r.residual_sq;
            let in_window = res >= lower && res <= upper;
            *last = Some(r.coeffs.clone());
            if res <= upper {
                let reg = regularizer(r.coeffs.view(), model);
                if best.as_ref().is_none_or(|(b, _)| reg < *b) {
                    best = Some((reg, r));
                }
            }
            Ok((res, in_window))
        };

        let max_hi = T::lit(2f64.powi(40));
        let (mut lo, mut hi) = (T::zero(), T::one());
        let (res, hit) = eval(hi, &mut last)?;
        let mut done = hit;
        if !done && res < lower {
            loop {
                if hi >= max_hi {
                    return Err(Error::Numerical(
                        "lambda bracket not found below 2^40".into(),
                    ));
                }
                lo = hi;
                hi *= T::lit(2.0);
                let (res, hit) = eval(hi, &mut last)?;
                if hit {
                    done = true;
                    break;
                }
                if res > upper {
                    break;
                }
            }
        }
        if !done {
            for _ in 0..30 {
                let mid = if lo == T::zero() {
                    hi * T::lit(0.5)
                } else {
                    (lo * hi).sqrt()
                };
                let (res, hit) = eval(mid, &mut last)?;
                if hit {
                    break;
                }
                if res > upper {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        let Some((_, mut result)) = best else {
            return Err(Error::Numerical(format!(
                "no lambda reached residual <= {upper}"
            )));
        };
        if exact {
            if let Some(refit) = self.refit(&p, result.coeffs.view()) {
                let res = residual_sq(x, self.dict, refit.view());
                if res <= floor + slack {
                    result = self.finish(x, refit, result.lambda, model, Vec::new(), Vec::new(), true);
                }
            }
        }
        result.iterations = iterations;
        result.trace = trace;
        Ok(result)
    }

    /// Least-squares coefficients on the support of `a`.
    fn refit(&self, p: &Prepared<T>, a: ArrayView1<'_, T>) -> Option<Array1<T>> {
        let support: Vec<usize> = (0..a.len()).filter(|&j| a[j] != T::zero()).collect();
        if support.is_empty() || support.len() > self.dict.rows() {
            return None;
        }
        let gs = self
            .gram
            .select(Axis(0), &support)
            .select(Axis(1), &support);
        let cs = p.c.select(Axis(0), &support);
        let z = cholesky_solve(gs.view(), cs.view(), T::lit(1e-14))?;
        let mut out = Array1::zeros(a.len());
        for (i, &j) in support.iter().enumerate() {
            out[j] = z[i];
        }
        Some(out)
    }

    /// Constrained coding when `opts.epsilon` is set, LLA otherwise.
    pub fn code(
        &self,
        x: ArrayView1<'_, T>,
        model: &PriorModel<T>,
        opts: &CodeOptions<T>,
    ) -> Result<CodeResult<T>> {
        match opts.epsilon {
            Some(e) => self.constrained(x, model, e, opts),
            None => self.lla(x, model, opts, LlaStart::Default),
        }
    }
}

/// `min ‖x − Da‖² + Σλ_k|a_k|` by accelerated proximal gradient.
pub fn weighted_l1<T: Scalar>(
    x: ArrayView1<'_, T>,
    dict: &Dictionary<T>,
    weights: &[T],
    opts: &CodeOptions<T>,
) -> Result<CodeResult<T>> {
    Coder::new(dict).weighted_l1(x, weights, opts, None)
}

/// LLA coding with `opts.lambda`.
pub fn lla_code<T: Scalar>(
    x: ArrayView1<'_, T>,
    dict: &Dictionary<T>,
    model: &PriorModel<T>,
    opts: &CodeOptions<T>,
) -> Result<CodeResult<T>> {
    Coder::new(dict).lla(x, model, opts, LlaStart::Default)
}

/// `min Σψ(|a_k|)` subject to `‖x − Da‖² ≤ ε`.
pub fn constrained_code<T: Scalar>(
    x: ArrayView1<'_, T>,
    dict: &Dictionary<T>,
    model: &PriorModel<T>,
    epsilon: T,
    opts: &CodeOptions<T>,
) -> Result<CodeResult<T>> {
    Coder::new(dict).constrained(x, model, epsilon, opts)
}

/// Per-sample summary from [`code_batch`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats<T> {
    pub objective: T,
    pub residual_sq: T,
    pub lambda: T,
    pub converged: bool,
}

/// Codes every column of `samples` in parallel; output order follows the input.
pub fn code_batch<T: Scalar>(
    samples: &SampleMatrix<T>,
    dict: &Dictionary<T>,
    model: &PriorModel<T>,
    opts: &CodeOptions<T>,
) -> Result<(CoeffMatrix<T>, Vec<SampleStats<T>>)> {
    opts.validate()?;
    if samples.rows() != dict.rows() {
        return Err(Error::DimensionMismatch(format!(
            "samples have {} rows, dictionary has {}",
            samples.rows(),
            dict.rows()
        )));
    }
    let coder = Coder::new(dict);
    let results: Vec<CodeResult<T>> = (0..samples.cols())
        .into_par_iter()
        .map(|j| coder.code(samples.column(j), model, opts))
        .collect::<Result<_>>()?;
    Ok(collect_batch(dict.atoms(), results))
}

pub(crate) fn collect_batch<T: Scalar>(
    atoms: usize,
    results: Vec<CodeResult<T>>,
) -> (CoeffMatrix<T>, Vec<SampleStats<T>>) {
    let mut a = Array2::zeros((atoms, results.len()));
    let mut stats = Vec::with_capacity(results.len());
    for (j, r) in results.into_iter().enumerate() {
        a.column_mut(j).assign(&r.coeffs);
        stats.push(SampleStats {
            objective: r.objective,
            residual_sq: r.residual_sq,
            lambda: r.lambda,
            converged: r.converged,
        });
    }
    (CoeffMatrix::new(a), stats)
}
