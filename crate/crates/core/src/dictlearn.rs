//! Dictionary learning by alternate minimization of
//! `(1/N)Σ_j [‖x_j − Da_j‖² + λΣ_kψ(|a_kj|)] + μ‖DᵀD‖²_F` subject to `‖d_k‖ ≤ 1`.
//!
//! The coding step runs LLA on every column, warm-started from the previous
//! coefficients. The dictionary step is projected gradient descent with
//! Armijo backtracking.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::coder::{collect_batch, CodeOptions, Coder, LlaStart};
use crate::model::project_columns;
use crate::{CoeffMatrix, Dictionary, Error, PriorModel, Result, SampleMatrix, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOptions<T> {
    /// Number of atoms.
    pub k: usize,
    pub lambda: T,
    /// Incoherence weight.
    pub mu: T,
    pub outer_iters: usize,
    pub prior: PriorModel<T>,
    /// Initial dictionary step; `None` picks one from a Lipschitz estimate.
    pub dict_step: Option<T>,
    pub seed: u64,
    pub lla_iters: usize,
}

impl<T: Scalar> LearnOptions<T> {
    pub fn new(k: usize, prior: PriorModel<T>) -> Self {
        Self {
            k,
            lambda: T::lit(0.1),
            mu: T::one(),
            outer_iters: 30,
            prior,
            dict_step: None,
            seed: 0,
            lla_iters: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.outer_iters == 0 || self.lla_iters == 0 {
            return Err(Error::InvalidParameter(
                "k, outer_iters and lla_iters must be >= 1".into(),
            ));
        }
        if !(self.lambda >= T::zero()) || !(self.mu >= T::zero()) {
            return Err(Error::InvalidParameter("lambda and mu must be >= 0".into()));
        }
        if let Some(s) = self.dict_step {
            if !(s > T::zero()) {
                return Err(Error::InvalidParameter("dict_step must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Settings for [`dict_update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions<T> {
    pub step: Option<T>,
    pub max_steps: usize,
    pub rel_tol: T,
    pub armijo: T,
    pub max_halvings: usize,
}

impl<T: Scalar> Default for StepOptions<T> {
    fn default() -> Self {
        Self {
            step: None,
            max_steps: 100,
            rel_tol: T::lit(1e-8),
            armijo: T::lit(1e-4),
            max_halvings: 30,
        }
    }
}

/// Result of [`dict_update`]: the new dictionary and `f` before and after
/// every accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct DictUpdate<T> {
    pub dict: Dictionary<T>,
    pub values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Learned<T> {
    pub dict: Dictionary<T>,
    pub coeffs: CoeffMatrix<T>,
    /// Total objective after the first coding step, then after every iteration.
    pub trace: Vec<T>,
    /// Dictionary the run started from.
    pub initial: Dictionary<T>,
}

/// `K` distinct data columns picked at random and normalized. Zero columns
/// become random Gaussian directions.
pub fn init_dictionary<T: Scalar>(x: &SampleMatrix<T>, k: usize, seed: u64) -> Result<Dictionary<T>> {
    if k == 0 || k > x.cols() {
        return Err(Error::InvalidParameter(format!(
            "K = {k} must be in 1..={}",
            x.cols()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, x.cols(), k).into_vec();
    let mut atoms = Array2::zeros((x.rows(), k));
    for (dst, &src) in picks.iter().enumerate() {
        let mut col = x.column(src).to_owned();
        let mut norm = col.dot(&col).sqrt();
        while !(norm > T::zero()) {
            col = Array1::from_shape_fn(x.rows(), |_| T::lit(rng.sample(StandardNormal)));
            norm = col.dot(&col).sqrt();
        }
        atoms.column_mut(dst).assign(&(col / norm));
    }
    Dictionary::new(atoms)
}

/// `‖DᵀD‖²_F`, diagonal included.
pub fn incoherence<T: Scalar>(d: &Dictionary<T>) -> T {
    frob_sq(&d.gram())
}

fn frob_sq<T: Scalar>(m: &Array2<T>) -> T {
    m.iter().map(|&v| v * v).sum()
}

/// `(1/N)‖X − DA‖²_F + μ‖DᵀD‖²_F`.
pub fn dict_objective<T: Scalar>(d: ArrayView2<'_, T>, x: ArrayView2<'_, T>, a: ArrayView2<'_, T>, mu: T) -> T {
    let n = T::of_count(x.ncols());
    let r = &x - &d.dot(&a);
    frob_sq(&r) / n + mu * frob_sq(&d.t().dot(&d))
}

/// `(2/N)(DA − X)Aᵀ + 4μD(DᵀD)`.
pub fn dict_gradient<T: Scalar>(d: ArrayView2<'_, T>, x: ArrayView2<'_, T>, a: ArrayView2<'_, T>, mu: T) -> Array2<T> {
    let n = T::of_count(x.ncols());
    let r = &d.dot(&a) - &x;
    r.dot(&a.t()) * (T::lit(2.0) / n) + d.dot(&d.t().dot(&d)) * (T::lit(4.0) * mu)
}

fn check_shapes<T: Scalar>(d: &Dictionary<T>, x: &SampleMatrix<T>, a: &CoeffMatrix<T>) -> Result<()> {
    a.check_pair(d, x)
}

/// Projected gradient descent on the dictionary with coefficients fixed.
pub fn dict_update<T: Scalar>(
    d: &Dictionary<T>,
    x: &SampleMatrix<T>,
    a: &CoeffMatrix<T>,
    mu: T,
    opts: &StepOptions<T>,
) -> Result<DictUpdate<T>> {
    check_shapes(d, x, a)?;
    let (xv, av) = (x.view(), a.view());
    let mut cur = d.view().to_owned();
    let mut f = dict_objective(cur.view(), xv, av, mu);
    let mut values = vec![f];
    let mut step = match opts.step {
        Some(s) => s,
        None => {
            // 1/L for the fidelity part plus a bound for the quartic term
            let n = T::of_count(x.cols());
            let aat = av.dot(&av.t());
            let la = T::lit(2.0) / n * crate::linalg::power_iteration(aat.view(), 30, T::lit(1e-10));
            let lg = T::lit(12.0) * mu * crate::linalg::power_iteration(d.gram().view(), 30, T::lit(1e-10));
            let l = la + lg;
            if l > T::zero() {
                T::one() / l
            } else {
                T::one()
            }
        }
    };
    for _ in 0..opts.max_steps {
        let g = dict_gradient(cur.view(), xv, av, mu);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite dictionary gradient".into()));
        }
        let mut accepted = None;
        let mut s = step;
        for _ in 0..=opts.max_halvings {
            let mut trial = &cur - &(&g * s);
            project_columns(&mut trial);
            let ft = dict_objective(trial.view(), xv, av, mu);
            let decrease = (&g * &(&trial - &cur)).sum();
            if ft <= f + opts.armijo * decrease && ft <= f {
                accepted = Some((trial, ft));
                break;
            }
            s *= T::lit(0.5);
        }
        let Some((next, fnext)) = accepted else { break };
        let rel = (f - fnext) / f.abs().max(T::min_positive_value());
        cur = next;
        f = fnext;
        values.push(f);
        step = s * T::lit(2.0);
        if rel < opts.rel_tol {
            break;
        }
    }
    Ok(DictUpdate {
        dict: Dictionary::new(cur)?,
        values,
    })
}

/// `(1/N)Σ_j [‖x_j − Da_j‖² + λΣψ] + μ‖DᵀD‖²_F`.
pub fn learn_objective<T: Scalar>(
    d: &Dictionary<T>,
    x: &SampleMatrix<T>,
    a: &CoeffMatrix<T>,
    lambda: T,
    mu: T,
    prior: &PriorModel<T>,
) -> Result<T> {
    check_shapes(d, x, a)?;
    let n = T::of_count(x.cols());
    let reg: T = a.view().iter().map(|v| prior.psi(v.abs())).sum();
    Ok(dict_objective(d.view(), x.view(), a.view(), mu) + lambda * reg / n)
}

fn code_all<T: Scalar>(
    d: &Dictionary<T>,
    x: &SampleMatrix<T>,
    prev: Option<&CoeffMatrix<T>>,
    opts: &LearnOptions<T>,
) -> Result<CoeffMatrix<T>> {
    let coder = Coder::new(d);
    let copts = CodeOptions {
        lambda: opts.lambda,
        lla_iters: opts.lla_iters,
        ..CodeOptions::default()
    };
    let results = (0..x.cols())
        .into_par_iter()
        .map(|j| {
            let start = match prev {
                Some(a) => LlaStart::Iterate(a.column(j)),
                None => LlaStart::Default,
            };
            coder.lla(x.column(j), &opts.prior, &copts, start)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_batch(d.atoms(), results).0)
}

/// Replaces atoms whose coefficient row is all zero by the worst
/// reconstructed data columns.
fn reseed_unused<T: Scalar>(d: &Dictionary<T>, x: &SampleMatrix<T>, a: &CoeffMatrix<T>) -> Option<Dictionary<T>> {
    let unused: Vec<usize> = (0..d.atoms())
        .filter(|&k| a.row(k).iter().all(|&v| v == T::zero()))
        .collect();
    if unused.is_empty() {
        return None;
    }
    let r = &x.view() - &d.view().dot(&a.view());
    let mut errs: Vec<(T, usize)> = r
        .axis_iter(Axis(1))
        .enumerate()
        .map(|(j, c)| (c.dot(&c), j))
        .collect();
    errs.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap().then(p.1.cmp(&q.1)));
    let mut atoms = d.view().to_owned();
    let mut used = 0;
    for (&k, &(e, j)) in unused.iter().zip(errs.iter()) {
        if !(e > T::zero()) {
            break;
        }
        let col = r.column(j);
        let norm = col.dot(&col).sqrt();
        atoms.column_mut(k).assign(&(&col / norm));
        used += 1;
    }
    if used == 0 {
        return None;
    }
    Dictionary::new(atoms).ok()
}

/// Alternate minimization from a dictionary initialized from the data.
pub fn learn<T: Scalar>(x: &SampleMatrix<T>, opts: &LearnOptions<T>) -> Result<Learned<T>> {
    opts.validate()?;
    let d0 = init_dictionary(x, opts.k, opts.seed)?;
    learn_from(x, d0, opts)
}

/// Alternate minimization from a given dictionary.
pub fn learn_from<T: Scalar>(
    x: &SampleMatrix<T>,
    d0: Dictionary<T>,
    opts: &LearnOptions<T>,
) -> Result<Learned<T>> {
    opts.validate()?;
    if d0.rows() != x.rows() || d0.atoms() != opts.k {
        return Err(Error::DimensionMismatch(format!(
            "initial dictionary is {}x{}, expected {}x{}",
            d0.rows(),
            d0.atoms(),
            x.rows(),
            opts.k
        )));
    }
    let objective = |d: &Dictionary<T>, a: &CoeffMatrix<T>| {
        learn_objective(d, x, a, opts.lambda, opts.mu, &opts.prior)
    };
    let step = StepOptions {
        step: opts.dict_step,
        ..StepOptions::default()
    };
    let mut d = d0.clone();
    let mut a = code_all(&d, x, None, opts)?;
    let mut f = objective(&d, &a)?;
    let mut trace = vec![f];
    for _ in 0..opts.outer_iters {
        if let Some(alt) = reseed_unused(&d, x, &a) {
            // unused atoms carry no coefficients, so only the incoherence term moves
            let g = objective(&alt, &a)?;
            if g <= f {
                d = alt;
                f = g;
            }
        }
        let upd = dict_update(&d, x, &a, opts.mu, &step)?;
        d = upd.dict;
        a = code_all(&d, x, Some(&a), opts)?;
        let next = objective(&d, &a)?;
        let rel = (f - next) / f.abs().max(T::min_positive_value());
        f = next;
        trace.push(f);
        if rel < T::lit(1e-6) {
            break;
        }
    }
    Ok(Learned {
        dict: d,
        coeffs: a,
        trace,
        initial: d0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn incoherence_examples() {
        let d = Dictionary::new(Array2::<f64>::eye(3)).unwrap();
        assert!((incoherence(&d) - 3.0).abs() < 1e-15);
        let d = Dictionary::<f64>::new(array![[1.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!((incoherence(&d) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn init_is_a_permutation_of_orthonormal_columns() {
        let x = SampleMatrix::new(Array2::<f64>::eye(4)).unwrap();
        let d = init_dictionary(&x, 4, 7).unwrap();
        let mut seen = [false; 4];
        for k in 0..4 {
            let pos = d.atom(k).iter().position(|&v| v == 1.0).unwrap();
            assert!(!seen[pos]);
            seen[pos] = true;
        }
        assert_eq!(d, init_dictionary(&x, 4, 7).unwrap());
        assert!(init_dictionary(&x, 5, 7).is_err());
    }

    #[test]
    fn zero_columns_get_random_directions() {
        let x = SampleMatrix::new(Array2::<f64>::zeros((3, 2))).unwrap();
        let d = init_dictionary(&x, 2, 1).unwrap();
        for k in 0..2 {
            assert!((d.atom(k).dot(&d.atom(k)) - 1.0).abs() < 1e-12);
        }
    }
}
