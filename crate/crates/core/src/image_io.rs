//! PNG/PPM loading and saving, replicate padding and cropping of
//! `[1, 3, h, w]` images with values in `[0, 1]`.

use std::path::Path;

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor};

pub fn from_rgb8<T: Float>(img: &RgbImage) -> Tensor<T> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    Tensor::from_fn(&[1, 3, h, w], |i| {
        let (c, p) = (i / (h * w), i % (h * w));
        T::of(raw[p * 3 + c] as f64 / 255.0)
    })
}

/// Round to 8 bits (values are clamped to `[0, 1]` first).
pub fn to_rgb8<T: Float>(x: &Tensor<T>) -> RgbImage {
    let (n, c, h, w) = x.dims4();
    assert!(n == 1 && c == 3, "expected a single RGB image, got {:?}", x.shape());
    let mut raw = vec![0u8; h * w * 3];
    for ch in 0..3 {
        for p in 0..h * w {
            let v = x.data()[ch * h * w + p].f64().clamp(0.0, 1.0);
            raw[p * 3 + ch] = (v * 255.0).round() as u8;
        }
    }
    RgbImage::from_raw(w as u32, h as u32, raw).expect("buffer matches dimensions")
}

pub fn load_image(path: &Path) -> Result<Tensor<f32>> {
    let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    Ok(from_rgb8(&img.to_rgb8()))
}

/// Save as PNG, or binary PPM when the extension is `.ppm`.
pub fn save_image<T: Float>(x: &Tensor<T>, path: &Path) -> Result<()> {
    let fmt = match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
        Some(e) if e == "ppm" || e == "pnm" => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    to_rgb8(x)
        .save_with_format(path, fmt)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Extend to `(h, w)` by repeating the last row and column.
pub fn pad_replicate<T: Float>(x: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    let (n, c, h0, w0) = x.dims4();
    assert!(h >= h0 && w >= w0 && h0 > 0 && w0 > 0, "padding must not shrink");
    Tensor::from_fn(&[n, c, h, w], |i| {
        let (plane, p) = (i / (h * w), i % (h * w));
        let (r, col) = ((p / w).min(h0 - 1), (p % w).min(w0 - 1));
        x.data()[plane * h0 * w0 + r * w0 + col]
    })
}

/// Top-left `h`×`w` window.
pub fn crop<T: Float>(x: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    crop_at(x, 0, 0, h, w)
}

pub fn crop_at<T: Float>(x: &Tensor<T>, top: usize, left: usize, h: usize, w: usize) -> Tensor<T> {
    let (n, c, h0, w0) = x.dims4();
    assert!(top + h <= h0 && left + w <= w0, "crop window outside the image");
    Tensor::from_fn(&[n, c, h, w], |i| {
        let (plane, p) = (i / (h * w), i % (h * w));
        x.data()[plane * h0 * w0 + (top + p / w) * w0 + left + p % w]
    })
}

/// Smallest multiple of `m` that is ≥ `v`.
pub fn round_up(v: usize, m: usize) -> usize {
    v.div_ceil(m) * m
}
