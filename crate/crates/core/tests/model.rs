mod common;

use common::*;
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::Rng;
use usm::model::*;
use usm::{Error, Image, SampleMatrix};

#[test]
fn csv_rows_are_samples_by_column() {
    let m: SampleMatrix<f64> = decode_matrix(b"1,2\n3,4").unwrap();
    assert_eq!(m.column(0).to_vec(), vec![1.0, 3.0]);
    assert_eq!(m.column(1).to_vec(), vec![2.0, 4.0]);
}

#[test]
fn usm_with_zero_rows_is_empty() {
    let mut bytes = USM_MAGIC.to_vec();
    bytes.extend_from_slice(&0u32.to_le_bytes());
    bytes.extend_from_slice(&3u32.to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    let err = decode_matrix::<f64>(&bytes).unwrap_err();
    assert!(matches!(err, Error::EmptyMatrix));
    assert!(err.to_string().contains("empty matrix"));
}

#[test]
fn usm_size_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let id = SampleMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
    let path = dir.path().join("id.usm");
    write_matrix(&id, &path, MatrixFormat::Usm).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 16 + 32);

    let mut r = rng(1);
    let m = SampleMatrix::new(Array2::from_shape_fn((8, 256), |_| r.random_range(-1e3f64..1e3))).unwrap();
    write_matrix(&m, &path, MatrixFormat::Usm).unwrap();
    let back: SampleMatrix<f64> = read_matrix(&path).unwrap();
    assert!(back.view().iter().zip(m.view().iter()).all(|(a, b): (&f64, &f64)| a.to_bits() == b.to_bits()));
}

#[test]
fn usm_keeps_subnormals_bit_exact() {
    let mut r = rng(2);
    let values: Vec<f64> = (0..10_000)
        .map(|i| match i % 4 {
            0 => f64::from_bits(r.random_range(1..(1u64 << 52))),
            1 => -f64::from_bits(r.random_range(1..(1u64 << 52))),
            _ => {
                let v = f64::from_bits(r.random::<u64>());
                if v.is_finite() { v } else { 0.0 }
            }
        })
        .collect();
    let m = SampleMatrix::from_column_major(100, 100, values.clone()).unwrap();
    let back: SampleMatrix<f64> = decode_matrix(&encode_usm(&m).unwrap()).unwrap();
    let got = back.to_column_major();
    assert!(got.iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn csv_round_trip_and_forms() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let one = SampleMatrix::new(array![[3.5]]).unwrap();
    write_matrix(&one, &path, MatrixFormat::Csv).unwrap();
    assert_eq!(read_matrix::<f64>(&path).unwrap().view()[[0, 0]], 3.5);
    let unit = encode_csv(&SampleMatrix::new(array![[1.0]]).unwrap());
    assert!(unit == "1\n" || unit == "1.0\n");
    for text in ["1\n", "1.0\n"] {
        assert_eq!(decode_matrix::<f64>(text.as_bytes()).unwrap().view()[[0, 0]], 1.0);
    }
    let mut r = rng(3);
    let m = SampleMatrix::new(Array2::from_shape_fn((5, 7), |_| r.random_range(-1.0..1.0))).unwrap();
    let back: SampleMatrix<f64> = decode_matrix(encode_csv(&m).as_bytes()).unwrap();
    for (a, b) in back.view().iter().zip(m.view().iter()) {
        assert!((a - b).abs() <= 1e-15 * b.abs());
    }
}

#[test]
fn malformed_inputs_name_a_position() {
    let err = decode_matrix::<f64>(b"1,2\n3,x\n").unwrap_err();
    assert!(matches!(err, Error::Malformed { .. }), "{err}");
    let err = decode_matrix::<f64>(b"1,2\n3,inf\n").unwrap_err();
    assert!(matches!(err, Error::NonFinite { .. } | Error::Malformed { .. }), "{err}");
    let err = read_matrix::<f64>("/nonexistent/m.usm").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/m.usm"));
}

#[test]
fn pgm_examples() {
    let img: Image<f64> = decode_pgm(b"P2 1 1 255 255").unwrap();
    assert_eq!(img.pixels()[[0, 0]], 1.0);
    let err = decode_pgm::<f64>(b"P6 1 1 255 \x00\x00\x00").unwrap_err();
    assert!(err.to_string().contains("unsupported format"));
    let mut r = rng(4);
    let mut bytes = b"P5\n7 5\n255\n".to_vec();
    let payload: Vec<u8> = (0..35).map(|_| r.random()).collect();
    bytes.extend_from_slice(&payload);
    let img: Image<f64> = decode_pgm(&bytes).unwrap();
    let again = encode_pgm(&img);
    assert_eq!(&again[again.len() - 35..], &payload[..]);
}

#[test]
fn patch_counts_and_dc() {
    let img = Image::new(Array2::from_elem((10, 10), 0.5)).unwrap();
    let (p, g) = extract_patches(&img, 8, 1, true).unwrap();
    assert_eq!((p.rows(), p.cols()), (64, 9));
    assert!(p.view().iter().all(|v| *v == 0.0));
    assert!(g.dc.unwrap().iter().all(|v| *v == 0.5));
    let img8 = Image::new(Array2::from_elem((8, 8), 0.25)).unwrap();
    assert_eq!(extract_patches(&img8, 8, 1, false).unwrap().0.cols(), 1);
    assert!(extract_patches(&img8, 9, 1, false).is_err());
}

#[test]
fn overlapping_patches_average() {
    let img = Image::new(Array2::<f64>::zeros((1, 3))).unwrap();
    let (_, g) = extract_patches(&img, 1, 1, false).unwrap();
    assert_eq!(g.patch_count(), 3);
    let img = Image::new(Array2::<f64>::zeros((2, 3))).unwrap();
    let (p, g) = extract_patches(&img, 2, 1, false).unwrap();
    let mut v = p.into_array();
    v.column_mut(0).fill(0.4);
    v.column_mut(1).fill(0.6);
    let out = reassemble(&SampleMatrix::new(v).unwrap(), &g).unwrap();
    assert!((out.pixels()[[0, 1]] - 0.5).abs() < 1e-15);
    assert_eq!(out.pixels()[[0, 0]], 0.4);
    assert_eq!(out.pixels()[[1, 2]], 0.6);
}

#[test]
fn psnr_examples() {
    let a = Image::new(Array2::from_elem((4, 4), 0.3)).unwrap();
    assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
    assert!((psnr_from_mse(1e-2) - 20.0).abs() < 1e-12);
    assert!((psnr_from_mse(1e-4) - 40.0).abs() < 1e-12);
    let b = Image::new(Array2::from_elem((4, 4), 0.4)).unwrap();
    assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    assert!(psnr(&a, &Image::new(Array2::zeros((2, 2))).unwrap()).is_err());
}

proptest! {
    #[test]
    fn extract_reassemble_identity(h in 4usize..14, w in 4usize..14, side in 1usize..5, seed in 0u64..1000, dc in any::<bool>()) {
        let side = side.min(h).min(w);
        let mut r = rng(seed);
        let img = Image::new(Array2::from_shape_fn((h, w), |_| r.random_range(0.0f64..1.0))).unwrap();
        for stride in 1..=side {
            let (p, g) = extract_patches(&img, side, stride, dc).unwrap();
            let out = reassemble_raw(&p, &g).unwrap();
            for (a, b) in out.pixels().iter().zip(img.pixels().iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
