use ndarray::Array2;

use crate::model::{Image, SampleMatrix};
use crate::{Error, Result, Scalar};

/// Upper bound reported by [`psnr`] for identical images.
pub const PSNR_CAP_DB: f64 = 999.0;

/// Everything needed to put overlapping patches back into an image.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGeometry<T> {
    pub width: usize,
    pub height: usize,
    pub side: usize,
    pub stride: usize,
    /// Per-patch mean removed at extraction, in patch order.
    pub dc: Option<Vec<T>>,
}

/// Top-left offsets along one axis. When the stride does not land on the
/// last valid offset, that offset is appended so every pixel is covered.
fn offsets(len: usize, side: usize, stride: usize) -> Vec<usize> {
    let last = len - side;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().unwrap() != last {
        out.push(last);
    }
    out
}

impl<T: Scalar> PatchGeometry<T> {
    /// Patch origins `(row, col)` in scan-line order.
    pub fn origins(&self) -> Vec<(usize, usize)> {
        let rows = offsets(self.height, self.side, self.stride);
        let cols = offsets(self.width, self.side, self.stride);
        rows.iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .collect()
    }

    pub fn patch_count(&self) -> usize {
        offsets(self.height, self.side, self.stride).len()
            * offsets(self.width, self.side, self.stride).len()
    }

    pub fn patch_dim(&self) -> usize {
        self.side * self.side
    }
}

/// Vectorizes every `side×side` patch (column by column within the patch)
/// into one column of the returned matrix, patches in scan-line order.
pub fn extract_patches<T: Scalar>(
    img: &Image<T>,
    side: usize,
    stride: usize,
    remove_dc: bool,
) -> Result<(SampleMatrix<T>, PatchGeometry<T>)> {
    if side == 0 || side > img.width().min(img.height()) {
        return Err(Error::InvalidParameter(format!(
            "patch side {side} does not fit a {}x{} image",
            img.width(),
            img.height()
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let mut geom = PatchGeometry {
        width: img.width(),
        height: img.height(),
        side,
        stride,
        dc: None,
    };
    let origins = geom.origins();
    let m = side * side;
    let px = img.pixels();
    let mut values = Array2::zeros((m, origins.len()));
    let mut dc = Vec::with_capacity(if remove_dc { origins.len() } else { 0 });
    for (j, &(r0, c0)) in origins.iter().enumerate() {
        let mut col = values.column_mut(j);
        for c in 0..side {
            for r in 0..side {
                col[c * side + r] = px[[r0 + r, c0 + c]];
            }
        }
        if remove_dc {
            let mean = col.sum() / T::of_count(m);
            col.mapv_inplace(|v| v - mean);
            dc.push(mean);
        }
    }
    if remove_dc {
        geom.dc = Some(dc);
    }
    Ok((SampleMatrix::new(values)?, geom))
}

/// Averages overlapping patches back into an image without clamping.
pub fn reassemble_raw<T: Scalar>(
    patches: &SampleMatrix<T>,
    geom: &PatchGeometry<T>,
) -> Result<Image<T>> {
    let origins = geom.origins();
    if patches.rows() != geom.patch_dim() || patches.cols() != origins.len() {
        return Err(Error::DimensionMismatch(format!(
            "geometry expects {}x{} patches, got {}x{}",
            geom.patch_dim(),
            origins.len(),
            patches.rows(),
            patches.cols()
        )));
    }
    if let Some(dc) = &geom.dc {
        if dc.len() != origins.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} dc records for {} patches",
                dc.len(),
                origins.len()
            )));
        }
    }
    let side = geom.side;
    let mut sum = Array2::<T>::zeros((geom.height, geom.width));
    let mut count = Array2::<u32>::zeros((geom.height, geom.width));
    for (j, &(r0, c0)) in origins.iter().enumerate() {
        let col = patches.column(j);
        let offset = geom.dc.as_ref().map_or(T::zero(), |dc| dc[j]);
        for c in 0..side {
            for r in 0..side {
                sum[[r0 + r, c0 + c]] += col[c * side + r] + offset;
                count[[r0 + r, c0 + c]] += 1;
            }
        }
    }
    let pixels = ndarray::Zip::from(&sum)
        .and(&count)
        .map_collect(|&s, &n| s / T::lit(n as f64));
    Image::new(pixels)
}

/// Averages overlapping patches back into an image, clamped to [0, 1].
pub fn reassemble<T: Scalar>(patches: &SampleMatrix<T>, geom: &PatchGeometry<T>) -> Result<Image<T>> {
    Ok(reassemble_raw(patches, geom)?.clamped())
}

/// `10·log10(1/MSE)` for images in [0, 1], capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Scalar>(a: &Image<T>, b: &Image<T>) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let n = (a.width() * a.height()) as f64;
    let sse: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels().iter())
        .map(|(x, y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum();
    Ok(psnr_from_mse(sse / n))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
}
