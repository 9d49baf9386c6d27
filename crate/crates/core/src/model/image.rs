use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::{Error, Result, Scalar};

/// Grayscale image, pixels nominally in [0, 1]. Indexed `[[row, col]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    pixels: Array2<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(pixels: Array2<T>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if let Some(((row, col), _)) = pixels.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self { pixels })
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn pixels(&self) -> &Array2<T> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array2<T> {
        self.pixels
    }

    pub fn clamped(&self) -> Self {
        Self {
            pixels: self.pixels.mapv(|v| v.max(T::zero()).min(T::one())),
        }
    }
}

/// Reads a P2 or P5 PGM with maxval 255; pixel `p` becomes `p/255`.
pub fn read_pgm<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

struct Header {
    binary: bool,
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::malformed("byte 0", "truncated PGM header"));
    }
    let binary = match &bytes[..2] {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "magic {:?}, only P2/P5 grayscale PGM is supported",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::malformed(format!("byte {pos}"), "expected header integer"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::malformed(format!("byte {start}"), "header integer overflow"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "maxval {maxval}, only 255 is supported"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::EmptyMatrix);
    }
    // exactly one whitespace byte separates the header from binary data
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        None if !binary => {}
        _ => return Err(Error::malformed(format!("byte {pos}"), "missing header terminator")),
    }
    Ok(Header {
        binary,
        width,
        height,
        data_start: pos,
    })
}

pub fn decode_pgm<T: Scalar>(bytes: &[u8]) -> Result<Image<T>> {
    let h = parse_header(bytes)?;
    let count = h
        .width
        .checked_mul(h.height)
        .ok_or_else(|| Error::malformed("header", "dimension overflow"))?;
    let raw: Vec<u8> = if h.binary {
        let data = &bytes[h.data_start..];
        if data.len() < count {
            return Err(Error::malformed(
                format!("byte {}", bytes.len()),
                format!("truncated payload: {} of {count} pixels", data.len()),
            ));
        }
        data[..count].to_vec()
    } else {
        let text = std::str::from_utf8(&bytes[h.data_start..])
            .map_err(|_| Error::malformed("payload", "P2 payload is not ASCII"))?;
        let mut out = Vec::with_capacity(count);
        for (i, tok) in text.split_ascii_whitespace().take(count).enumerate() {
            let v: u16 = tok
                .parse()
                .map_err(|_| Error::malformed(format!("pixel {i}"), format!("bad value {tok:?}")))?;
            if v > 255 {
                return Err(Error::malformed(format!("pixel {i}"), "value exceeds maxval"));
            }
            out.push(v as u8);
        }
        if out.len() < count {
            return Err(Error::malformed(
                format!("pixel {}", out.len()),
                format!("truncated payload: {} of {count} pixels", out.len()),
            ));
        }
        out
    };
    let scale = T::lit(255.0);
    let pixels = Array2::from_shape_vec(
        (h.height, h.width),
        raw.into_iter().map(|p| T::lit(p as f64) / scale).collect(),
    )
    .expect("shape matches pixel count");
    Image::new(pixels)
}

/// Quantizes each pixel to `round(p·255)` clamped to [0, 255].
pub fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Binary (P5) encoding.
pub fn encode_pgm<T: Scalar>(img: &Image<T>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels.iter().map(|p| quantize(p.as_f64())));
    out
}

pub fn write_pgm<T: Scalar>(img: &Image<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}
