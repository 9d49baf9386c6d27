use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{gaussian_dictionary, seeded};
use crate::coder::{lla_code, CodeOptions};
use crate::{Dictionary, Error, PriorModel, Result, SampleMatrix, Scalar};

/// Class whose dictionary gives the lowest LLA energy
/// `‖x − D_c a‖² + λΣψ(|a_k|)`; ties go to the lowest index.
pub fn classify<T: Scalar>(
    x: ArrayView1<'_, T>,
    dicts: &[Dictionary<T>],
    lambda: T,
    prior: &PriorModel<T>,
) -> Result<usize> {
    if dicts.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 classes, got {}",
            dicts.len()
        )));
    }
    let opts = CodeOptions::with_lambda(lambda);
    let mut best = (0, T::infinity());
    for (c, d) in dicts.iter().enumerate() {
        let e = lla_code(x, d, prior, &opts)?.objective;
        if e < best.1 {
            best = (c, e);
        }
    }
    Ok(best.0)
}

/// [`classify`] for every column, in parallel.
pub fn classify_batch<T: Scalar>(
    samples: &SampleMatrix<T>,
    dicts: &[Dictionary<T>],
    lambda: T,
    prior: &PriorModel<T>,
) -> Result<Vec<usize>> {
    (0..samples.cols())
        .into_par_iter()
        .map(|j| classify(samples.column(j), dicts, lambda, prior))
        .collect()
}

pub fn error_rate(predicted: &[usize], labels: &[usize]) -> f64 {
    let wrong = predicted.iter().zip(labels).filter(|(p, l)| p != l).count();
    wrong as f64 / labels.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedClasses {
    pub dicts: Vec<Dictionary<f64>>,
    pub samples: SampleMatrix<f64>,
    pub labels: Vec<usize>,
}

/// Samples from `classes` Gaussian dictionaries: each column is an
/// `sparsity`-sparse combination of one class's atoms plus Gaussian noise.
/// Classes are interleaved so `labels[j] = j % classes`.
pub fn planted_classes(
    classes: usize,
    m: usize,
    k: usize,
    per_class: usize,
    sparsity: usize,
    sigma: f64,
    seed: u64,
) -> Result<PlantedClasses> {
    if classes < 2 || sparsity == 0 || sparsity > k || per_class == 0 {
        return Err(Error::InvalidParameter(
            "need >= 2 classes, per_class >= 1 and 1 <= sparsity <= K".into(),
        ));
    }
    let mut rng = seeded(seed, 0);
    let dicts = (0..classes)
        .map(|_| gaussian_dictionary(m, k, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let n = classes * per_class;
    let mut x = Array2::zeros((m, n));
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let c = j % classes;
        let mut a = Array1::<f64>::zeros(k);
        for idx in rand::seq::index::sample(&mut rng, k, sparsity) {
            let v: f64 = rng.sample(StandardNormal);
            a[idx] = v.signum() * (0.2 + v.abs());
        }
        let mut col = dicts[c].view().dot(&a);
        col.mapv_inplace(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));
        x.column_mut(j).assign(&col);
        labels.push(c);
    }
    Ok(PlantedClasses {
        dicts,
        samples: SampleMatrix::new(x)?,
        labels,
    })
}
