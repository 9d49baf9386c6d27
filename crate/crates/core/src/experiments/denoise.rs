use ndarray::Array2;

use super::DEFAULT_C;
use crate::coder::{code_batch, CodeOptions};
use crate::dictlearn::{dict_update, StepOptions};
use crate::model::{extract_patches, psnr, psnr_from_mse, reassemble};
use crate::{CoeffMatrix, Dictionary, Error, Image, PriorModel, Result, SampleMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseOptions {
    /// Patch side; patches are taken at stride 1.
    pub side: usize,
    pub c: f64,
    /// Rounds of dictionary adaptation on the noisy patches; 0 keeps `D0`.
    pub adapt_iters: usize,
    /// Incoherence weight used while adapting.
    pub mu: f64,
}

impl Default for DenoiseOptions {
    fn default() -> Self {
        Self {
            side: 8,
            c: DEFAULT_C,
            adapt_iters: 0,
            mu: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoised {
    pub image: Image<f64>,
    /// Dictionary the final coding used.
    pub dict: Dictionary<f64>,
    pub coeffs: CoeffMatrix<f64>,
    /// PSNR of the coded patches (DC restored, clamped) before averaging.
    pub patch_psnr: Option<f64>,
    pub image_psnr: Option<f64>,
}

/// Alternates error-constrained coding of `patches` with a dictionary update,
/// `iters` times.
pub fn adapt_dictionary(
    patches: &SampleMatrix<f64>,
    d0: &Dictionary<f64>,
    prior: &PriorModel<f64>,
    epsilon: f64,
    iters: usize,
    mu: f64,
) -> Result<Dictionary<f64>> {
    let opts = CodeOptions::with_epsilon(epsilon);
    let mut d = d0.clone();
    for _ in 0..iters {
        let (a, _) = code_batch(patches, &d, prior, &opts)?;
        d = dict_update(&d, patches, &a, mu, &StepOptions::default())?.dict;
    }
    Ok(d)
}

/// Denoises `noisy` by coding every DC-removed overlapping patch with
/// `ε = C·M·σ²` and averaging the overlaps. PSNRs are reported when a
/// reference is given.
pub fn denoise_image(
    noisy: &Image<f64>,
    sigma: f64,
    d0: &Dictionary<f64>,
    prior: &PriorModel<f64>,
    opts: &DenoiseOptions,
    reference: Option<&Image<f64>>,
) -> Result<Denoised> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    if !(opts.c > 0.0) || !(opts.mu >= 0.0) {
        return Err(Error::InvalidParameter("C must be > 0 and mu >= 0".into()));
    }
    if d0.rows() != opts.side * opts.side {
        return Err(Error::DimensionMismatch(format!(
            "dictionary has {} rows, {}x{} patches have {}",
            d0.rows(),
            opts.side,
            opts.side,
            opts.side * opts.side
        )));
    }
    if let Some(r) = reference {
        if r.width() != noisy.width() || r.height() != noisy.height() {
            return Err(Error::DimensionMismatch("reference and noisy image sizes differ".into()));
        }
    }
    let (patches, geom) = extract_patches(noisy, opts.side, 1, true)?;
    let eps = opts.c * patches.rows() as f64 * sigma * sigma;
    let dict = adapt_dictionary(&patches, d0, prior, eps, opts.adapt_iters, opts.mu)?;
    let (coeffs, _) = code_batch(&patches, &dict, prior, &CodeOptions::with_epsilon(eps))?;
    let coded = SampleMatrix::new(dict.view().dot(&coeffs.view()))?;
    let image = reassemble(&coded, &geom)?;

    let (patch_psnr, image_psnr) = match reference {
        Some(r) => {
            let (clean, _) = extract_patches(r, opts.side, 1, false)?;
            let dc = geom.dc.as_deref().unwrap_or_default();
            let mut est: Array2<f64> = coded.view().to_owned();
            for (j, mut col) in est.columns_mut().into_iter().enumerate() {
                let off = dc[j];
                col.mapv_inplace(|v| (v + off).clamp(0.0, 1.0));
            }
            let diff = &est - &clean.view();
            let mse = diff.iter().map(|v| v * v).sum::<f64>() / diff.len() as f64;
            (Some(psnr_from_mse(mse)), Some(psnr(&image, r)?))
        }
        None => (None, None),
    };
    Ok(Denoised {
        image,
        dict,
        coeffs,
        patch_psnr,
        image_psnr,
    })
}
