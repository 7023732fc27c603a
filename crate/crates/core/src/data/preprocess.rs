use super::idx::GrayImage;
use crate::error::{Error, Result};
use crate::models::IMAGE_SIDE;
use crate::tensor::Tensor;

const CIFAR_SIDE: usize = 32;

/// Maps a byte to `[−1, 1]`: `b / 127.5 − 1`.
#[inline]
pub fn byte_to_unit(b: u8) -> f32 {
    b as f32 / 127.5 - 1.0
}

/// Inverse of [`byte_to_unit`], rounding and clamping to a byte.
#[inline]
pub fn unit_to_byte(v: f32) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// MNIST-family image (28×28 bytes) to a `[1, 28, 28]` tensor in `[−1, 1]`.
pub fn preprocess_gray(image: &GrayImage) -> Result<Tensor> {
    if image.rows != IMAGE_SIDE || image.cols != IMAGE_SIDE || image.pixels.len() != IMAGE_SIDE * IMAGE_SIDE {
        return Err(Error::dim(
            "preprocess",
            "28x28 grayscale image",
            format!("{}x{} ({} bytes)", image.rows, image.cols, image.pixels.len()),
        ));
    }
    Tensor::new(
        [1, IMAGE_SIDE, IMAGE_SIDE],
        image.pixels.iter().map(|&b| byte_to_unit(b)).collect(),
    )
}

/// ITU-R BT.601 luma of planar 32×32 RGB, on the 0–255 scale.
pub fn luma(rgb: &[u8]) -> Vec<f64> {
    let n = CIFAR_SIDE * CIFAR_SIDE;
    (0..n)
        .map(|i| (299.0 * rgb[i] as f64 + 587.0 * rgb[n + i] as f64 + 114.0 * rgb[2 * n + i] as f64) / 1000.0)
        .collect()
}

/// Bilinear resize with half-pixel centers, edges clamped.
pub fn resize_bilinear(src: &[f64], src_side: usize, dst_side: usize) -> Vec<f64> {
    let scale = src_side as f64 / dst_side as f64;
    let coord = |d: usize| {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_side - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(src_side - 1);
        (lo, hi, s - lo as f64)
    };
    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
    let mut out = Vec::with_capacity(dst_side * dst_side);
    for dy in 0..dst_side {
        let (y0, y1, ty) = coord(dy);
        for dx in 0..dst_side {
            let (x0, x1, tx) = coord(dx);
            let top = lerp(src[y0 * src_side + x0], src[y0 * src_side + x1], tx);
            let bottom = lerp(src[y1 * src_side + x0], src[y1 * src_side + x1], tx);
            out.push(lerp(top, bottom, ty));
        }
    }
    out
}

/// CIFAR-10 record (planar 3×32×32 RGB) to a `[1, 28, 28]` grayscale tensor
/// in `[−1, 1]`: luma, bilinear 32→28, then the byte affine map.
pub fn preprocess_rgb(rgb: &[u8]) -> Result<Tensor> {
    if rgb.len() != 3 * CIFAR_SIDE * CIFAR_SIDE {
        return Err(Error::dim("preprocess", "3x32x32 RGB bytes", format!("{} bytes", rgb.len())));
    }
    let gray = resize_bilinear(&luma(rgb), CIFAR_SIDE, IMAGE_SIDE);
    Tensor::new(
        [1, IMAGE_SIDE, IMAGE_SIDE],
        gray.into_iter().map(|v| (v / 127.5 - 1.0) as f32).collect(),
    )
}
