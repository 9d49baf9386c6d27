//! Seeded desk-scale experiment drivers and synthetic data.
//!
//! Every driver is deterministic given its configuration and seed.

mod classify;
mod denoise;
mod recovery;

pub use classify::{classify, classify_batch, error_rate, planted_classes, PlantedClasses};
pub use denoise::{adapt_dictionary, denoise_image, DenoiseOptions, Denoised};
pub use recovery::{
    gen_sparse_instances, ls_projection, run_recovery, support_error, RecoveryConfig, RecoveryMethod,
    RecoveryReport, RecoveryRow, SparseInstances,
};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CoeffMatrix, Dictionary, Error, Image, PriorModel, Result};

/// Coefficients whose magnitude is at most this count as zero.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;

/// Factor `C` in `ε = C·M·σ²`.
pub const DEFAULT_C: f64 = 1.32;

pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Dictionary with IID Gaussian columns scaled to unit norm.
pub fn gaussian_dictionary(m: usize, k: usize, rng: &mut impl Rng) -> Result<Dictionary<f64>> {
    let atoms = Array2::from_shape_fn((m, k), |_| rng.sample::<f64, _>(StandardNormal));
    Dictionary::normalized(atoms)
}

/// Separable overcomplete DCT for `side×side` patches with `per_axis²`
/// atoms. Non-constant atoms have their mean removed before normalizing.
pub fn overcomplete_dct(side: usize, per_axis: usize) -> Result<Dictionary<f64>> {
    if side == 0 || per_axis < side {
        return Err(Error::InvalidParameter(format!(
            "need per_axis >= side >= 1, got side {side}, per_axis {per_axis}"
        )));
    }
    let mut basis = Array2::<f64>::zeros((side, per_axis));
    for k in 0..per_axis {
        let mut v = Array1::from_shape_fn(side, |i| {
            (std::f64::consts::PI * i as f64 * k as f64 / per_axis as f64).cos()
        });
        if k > 0 {
            let mean = v.mean().unwrap();
            v -= mean;
        }
        let n = v.dot(&v).sqrt();
        basis.column_mut(k).assign(&(v / n));
    }
    let mut atoms = Array2::zeros((side * side, per_axis * per_axis));
    for a in 0..per_axis {
        for b in 0..per_axis {
            let mut col = atoms.column_mut(a * per_axis + b);
            for c in 0..side {
                for r in 0..side {
                    col[c * side + r] = basis[[r, a]] * basis[[c, b]];
                }
            }
        }
    }
    Dictionary::normalized(atoms)
}

/// Rows drawn from Laplacians with θ log-uniform in `[theta_lo, theta_hi]`.
pub fn heterogeneous_laplacian(
    rows: usize,
    cols: usize,
    theta_lo: f64,
    theta_hi: f64,
    seed: u64,
) -> Result<CoeffMatrix<f64>> {
    if !(theta_lo > 0.0 && theta_hi >= theta_lo) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < theta_lo <= theta_hi, got [{theta_lo}, {theta_hi}]"
        )));
    }
    let mut rng = seeded(seed, 0);
    let mut a = Array2::zeros((rows, cols));
    for k in 0..rows {
        let u: f64 = rng.random();
        let theta = (theta_lo.ln() + u * (theta_hi / theta_lo).ln()).exp();
        let model = PriorModel::laplacian(theta)?;
        for j in 0..cols {
            a[[k, j]] = model.sample(&mut rng);
        }
    }
    Ok(CoeffMatrix::new(a))
}

/// Piecewise-smooth test image in [0, 1]: a shaded background, a few flat
/// rectangles and disks, and one striped disk.
pub fn synthetic_image(size: usize, seed: u64) -> Result<Image<f64>> {
    if size < 8 {
        return Err(Error::InvalidParameter(format!("image size {size} is below 8")));
    }
    let mut rng = seeded(seed, 0);
    let s = size as f64;
    let (gx, gy, base): (f64, f64, f64) = (
        rng.random_range(-0.3..0.3),
        rng.random_range(-0.3..0.3),
        rng.random_range(0.35..0.65),
    );
    let mut px = Array2::from_shape_fn((size, size), |(r, c)| {
        base + gx * (c as f64 / s - 0.5) + gy * (r as f64 / s - 0.5)
    });
    for _ in 0..3 {
        let (r0, c0) = (rng.random_range(0.0..0.7 * s), rng.random_range(0.0..0.7 * s));
        let (h, w) = (rng.random_range(0.15 * s..0.45 * s), rng.random_range(0.15 * s..0.45 * s));
        let v: f64 = rng.random_range(0.05..0.95);
        for r in 0..size {
            for c in 0..size {
                let (y, x) = (r as f64, c as f64);
                if y >= r0 && y < r0 + h && x >= c0 && x < c0 + w {
                    px[[r, c]] = v;
                }
            }
        }
    }
    for striped in [false, true] {
        let (cy, cx) = (rng.random_range(0.2 * s..0.8 * s), rng.random_range(0.2 * s..0.8 * s));
        let rad: f64 = rng.random_range(0.12 * s..0.3 * s);
        let v: f64 = rng.random_range(0.1..0.9);
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let period: f64 = rng.random_range(4.0..9.0);
        for r in 0..size {
            for c in 0..size {
                let (dy, dx) = (r as f64 - cy, c as f64 - cx);
                if dy * dy + dx * dx <= rad * rad {
                    px[[r, c]] = if striped {
                        let t = dx * angle.cos() + dy * angle.sin();
                        0.5 + 0.35 * (2.0 * std::f64::consts::PI * t / period).sin()
                    } else {
                        v
                    };
                }
            }
        }
    }
    Image::new(px.mapv(|v| v.clamp(0.0, 1.0)))
}

/// Adds IID Gaussian noise of standard deviation `sigma`, without clamping.
pub fn add_noise(img: &Image<f64>, sigma: f64, seed: u64) -> Result<Image<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut rng = seeded(seed, 1);
    let px = img.pixels().mapv(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));
    Image::new(px)
}
