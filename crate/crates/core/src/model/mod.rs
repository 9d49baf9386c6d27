//! Containers, file formats and image/patch plumbing.

mod image;
mod io;
mod matrix;
mod patches;

pub use image::{decode_pgm, encode_pgm, quantize, read_pgm, write_pgm, Image};
pub use io::{
    decode_matrix, encode_csv, encode_usm, read_matrix, write_matrix, MatrixFormat, USM_HEADER_LEN,
    USM_MAGIC,
};
pub use matrix::{ActiveSet, CoeffMatrix, Dictionary, SampleMatrix};
pub(crate) use matrix::project_columns;
pub use patches::{
    extract_patches, psnr, psnr_from_mse, reassemble, reassemble_raw, PatchGeometry, PSNR_CAP_DB,
};
