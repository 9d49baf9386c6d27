use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{gaussian_dictionary, seeded, DEFAULT_C, SUPPORT_THRESHOLD};
use crate::coder::{omp, Coder, CodeOptions, OmpStop};
use crate::linalg::cholesky_solve;
use crate::model::psnr_from_mse;
use crate::{ActiveSet, CoeffMatrix, Dictionary, Error, PriorModel, Result, SampleMatrix};

const MAX_REDRAWS: usize = 100;

/// Coding method compared in [`run_recovery`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecoveryMethod {
    /// Error-constrained coding with this prior's regularizer.
    Prior(PriorModel<f64>),
    /// OMP run until the residual meets ε.
    Omp,
}

impl RecoveryMethod {
    /// `l1`, `moe`, `joe` or `l0`.
    pub fn name(&self) -> &'static str {
        match self {
            RecoveryMethod::Prior(PriorModel::Laplacian(_)) => "l1",
            RecoveryMethod::Prior(PriorModel::Moe(_)) => "moe",
            RecoveryMethod::Prior(PriorModel::Joe(_)) => "joe",
            RecoveryMethod::Omp => "l0",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryConfig {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    /// Planted sparsity.
    pub l: usize,
    pub sigmas: Vec<f64>,
    /// Largest support error still counted as a success.
    pub t: usize,
    pub c: f64,
    /// Standard deviation of the dense Gaussian targets the truth is fitted to.
    pub target_std: f64,
    pub methods: Vec<RecoveryMethod>,
    pub seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            m: 64,
            k: 256,
            n: 500,
            l: 5,
            sigmas: (1..=10).map(|i| i as f64 / 100.0).collect(),
            t: 2,
            c: DEFAULT_C,
            target_std: 0.125,
            methods: vec![
                RecoveryMethod::Prior(PriorModel::Laplacian(crate::LaplacianParams::new(1.0).unwrap())),
                RecoveryMethod::Prior(PriorModel::Moe(crate::MoeParams::new(2.8, 0.07).unwrap())),
            ],
            seed: 0,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.n == 0 || self.l == 0 {
            return Err(Error::InvalidParameter("M, K, N and L must be >= 1".into()));
        }
        if self.l > self.m.min(self.k) {
            return Err(Error::InvalidParameter(format!(
                "L = {} exceeds min(M, K) = {}",
                self.l,
                self.m.min(self.k)
            )));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.target_std > 0.0) {
            return Err(Error::InvalidParameter("target_std must be > 0".into()));
        }
        if self.sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter("sigmas must be finite and >= 0".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods to compare".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseInstances {
    pub dict: Dictionary<f64>,
    pub clean: SampleMatrix<f64>,
    pub truth: CoeffMatrix<f64>,
    pub supports: Vec<ActiveSet>,
}

/// Gaussian dictionary and exactly `L`-sparse truths obtained by running OMP
/// on dense Gaussian targets. Targets whose OMP fit is singular or has fewer
/// than `L` nonzeros are redrawn.
pub fn gen_sparse_instances(cfg: &RecoveryConfig) -> Result<SparseInstances> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed, 0);
    let dict = gaussian_dictionary(cfg.m, cfg.k, &mut rng)?;
    let mut truth = Array2::zeros((cfg.k, cfg.n));
    let mut supports = Vec::with_capacity(cfg.n);
    for j in 0..cfg.n {
        let mut found = None;
        for _ in 0..MAX_REDRAWS {
            let target =
                Array1::from_shape_fn(cfg.m, |_| cfg.target_std * rng.sample::<f64, _>(StandardNormal));
            let (res, _) = omp(target.view(), &dict, OmpStop::MaxNonzeros(cfg.l))?;
            let support = ActiveSet::from_coeffs(res.coeffs.view(), 0.0);
            if res.converged && support.len() == cfg.l {
                found = Some((res.coeffs, support));
                break;
            }
        }
        let Some((coeffs, support)) = found else {
            return Err(Error::Numerical(format!(
                "no {}-sparse instance after {MAX_REDRAWS} draws",
                cfg.l
            )));
        };
        truth.column_mut(j).assign(&coeffs);
        supports.push(support);
    }
    let clean = SampleMatrix::new(dict.view().dot(&truth))?;
    Ok(SparseInstances {
        dict,
        clean,
        truth: CoeffMatrix::new(truth),
        supports,
    })
}

/// Size of the symmetric difference of two supports.
pub fn support_error(truth: &ActiveSet, est: &ActiveSet) -> usize {
    truth.hamming(est)
}

/// Least-squares projection of `x` onto the span of the atoms in `support`.
pub fn ls_projection(x: ArrayView1<'_, f64>, dict: &Dictionary<f64>, support: &ActiveSet) -> Array1<f64> {
    let idx = support.indices();
    if idx.is_empty() {
        return Array1::zeros(x.len());
    }
    let d = dict.view();
    let sub = Array2::from_shape_fn((d.nrows(), idx.len()), |(i, c)| d[[i, idx[c]]]);
    let g = sub.t().dot(&sub);
    let b = sub.t().dot(&x);
    match cholesky_solve(g.view(), b.view(), 1e-12) {
        Some(coef) => sub.dot(&coef),
        None => {
            // dependent atoms: orthonormalize instead
            let q = crate::linalg::range_basis(sub.view(), 1e-10);
            q.dot(&q.t().dot(&x))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRow {
    pub sigma: f64,
    pub method: String,
    /// Fraction of samples with support error at most `T`.
    pub accuracy: f64,
    pub mean_support_error: f64,
    /// Mean PSNR of the least-squares projections against the clean samples.
    pub mean_psnr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub rows: Vec<RecoveryRow>,
}

impl RecoveryReport {
    pub fn accuracy(&self, sigma: f64, method: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.sigma == sigma && r.method == method)
            .map(|r| r.accuracy)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("sigma,method,accuracy,mean_support_error,mean_psnr\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{:.4}",
                r.sigma, r.method, r.accuracy, r.mean_support_error, r.mean_psnr
            );
        }
        s
    }
}

/// Adds noise, codes every sample with `ε = C·M·σ²`, and scores the
/// recovered supports and their least-squares projections.
pub fn run_recovery(cfg: &RecoveryConfig) -> Result<RecoveryReport> {
    let inst = gen_sparse_instances(cfg)?;
    run_recovery_on(cfg, &inst)
}

pub(crate) fn run_recovery_on(cfg: &RecoveryConfig, inst: &SparseInstances) -> Result<RecoveryReport> {
    let coder = Coder::new(&inst.dict);
    let opts = CodeOptions::<f64>::default();
    let m = cfg.m as f64;
    let mut rows = Vec::new();
    for (si, &sigma) in cfg.sigmas.iter().enumerate() {
        let mut rng = seeded(cfg.seed, 1 + si as u64);
        let clean = inst.clean.view();
        let noisy = &clean + &Array2::from_shape_fn(clean.dim(), |_| sigma * rng.sample::<f64, _>(StandardNormal));
        let eps = cfg.c * m * sigma * sigma;
        for method in &cfg.methods {
            let scores: Vec<(usize, f64)> = (0..cfg.n)
                .into_par_iter()
                .map(|j| {
                    let x = noisy.column(j);
                    let coeffs = match method {
                        RecoveryMethod::Prior(p) => coder.constrained(x, p, eps, &opts)?.coeffs,
                        RecoveryMethod::Omp => omp(x, &inst.dict, OmpStop::Residual(eps))?.0.coeffs,
                    };
                    let est = ActiveSet::from_coeffs(coeffs.view(), SUPPORT_THRESHOLD);
                    let proj = ls_projection(x, &inst.dict, &est);
                    let diff = &proj - &clean.column(j);
                    let mse = diff.dot(&diff) / m;
                    Ok((support_error(&inst.supports[j], &est), psnr_from_mse(mse)))
                })
                .collect::<Result<_>>()?;
            let n = cfg.n as f64;
            rows.push(RecoveryRow {
                sigma,
                method: method.name().to_string(),
                accuracy: scores.iter().filter(|(e, _)| *e <= cfg.t).count() as f64 / n,
                mean_support_error: scores.iter().map(|(e, _)| *e as f64).sum::<f64>() / n,
                mean_psnr: scores.iter().map(|(_, p)| p).sum::<f64>() / n,
            });
        }
    }
    Ok(RecoveryReport { rows })
}
