//! Multiscale center/surround Retinex.
//!
//! Each channel is processed in the log domain as
//! `log(I + 1) - log(G_σ * I + 1)` for every surround scale, the scale
//! responses are averaged, and a single gain/offset stretch computed over
//! all three channels maps the response onto the output range.

use alloc::vec;
use alloc::vec::Vec;

use crate::image::RgbImage;
use crate::{Error, Result};

/// Below this log-domain spread the stretch is treated as degenerate.
const DEGENERATE_SPREAD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RetinexConfig {
    /// Gaussian surround scales in pixels.
    pub sigmas: Vec<f64>,
    pub output_low: f64,
    pub output_high: f64,
}

impl Default for RetinexConfig {
    fn default() -> Self {
        Self { sigmas: vec![5.0, 20.0], output_low: 0.0, output_high: 255.0 }
    }
}

impl RetinexConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return Err(Error::invalid("retinex needs at least one surround scale"));
        }
        if self.sigmas.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::invalid("retinex scales must be positive and finite"));
        }
        if self.output_low.is_nan()
            || self.output_high.is_nan()
            || self.output_low >= self.output_high
            || self.output_low < 0.0
            || self.output_high > 255.0
        {
            return Err(Error::invalid("retinex output range must satisfy 0 <= low < high <= 255"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetinexOutput {
    pub image: RgbImage,
    /// Set when the pooled response was flat and the output is mid-gray.
    pub degenerate_stretch: bool,
}

/// Normalized 1-D Gaussian taps of radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = libm::ceil(3.0 * sigma) as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| {
            let x = i as f64;
            libm::exp(-(x * x) / (2.0 * sigma * sigma))
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Separable convolution of a `width × height` plane with replicate borders.
fn blur_plane(plane: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as isize;
    let clamp = |i: isize, len: usize| i.clamp(0, len as isize - 1) as usize;

    let mut rows = vec![0.0; plane.len()];
    for y in 0..height {
        let src = &plane[y * width..(y + 1) * width];
        let dst = &mut rows[y * width..(y + 1) * width];
        for (x, out) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * src[clamp(x as isize + k as isize - radius, width)];
            }
            *out = acc;
        }
    }

    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        let dst = &mut out[y * width..(y + 1) * width];
        for (k, w) in kernel.iter().enumerate() {
            let sy = clamp(y as isize + k as isize - radius, height);
            let src = &rows[sy * width..(sy + 1) * width];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += w * s;
            }
        }
    }
    out
}

pub fn multiscale_retinex(img: &RgbImage, cfg: &RetinexConfig) -> Result<RetinexOutput> {
    cfg.validate()?;
    let (width, height) = (img.width(), img.height());
    let n = width * height;
    let kernels: Vec<Vec<f64>> = cfg.sigmas.iter().map(|&s| gaussian_kernel(s)).collect();
    let weight = 1.0 / kernels.len() as f64;

    let mut response = vec![[0.0f64; 3]; n];
    for c in 0..3 {
        let plane: Vec<f64> = img.pixels().iter().map(|p| p[c]).collect();
        for kernel in &kernels {
            let surround = blur_plane(&plane, width, height, kernel);
            for ((r, &v), &s) in response.iter_mut().zip(&plane).zip(&surround) {
                r[c] += weight * (libm::log(v + 1.0) - libm::log(s + 1.0));
            }
        }
    }

    let (lo, hi) = response
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));

    // The spread is finite here: responses are logs of values >= 1.
    if hi - lo <= DEGENERATE_SPREAD {
        let mid = 0.5 * (cfg.output_low + cfg.output_high);
        return Ok(RetinexOutput {
            image: RgbImage::filled(width, height, [mid; 3])?,
            degenerate_stretch: true,
        });
    }

    let gain = (cfg.output_high - cfg.output_low) / (hi - lo);
    let data = response
        .iter()
        .map(|r| r.map(|v| (cfg.output_low + (v - lo) * gain).clamp(cfg.output_low, cfg.output_high)))
        .collect();
    Ok(RetinexOutput { image: RgbImage::new(width, height, data)?, degenerate_stretch: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_image(w: usize, h: usize, seed: u64, lo: f64, hi: f64) -> RgbImage {
        let mut s = seed;
        let data = (0..w * h)
            .map(|_| {
                core::array::from_fn(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    lo + (hi - lo) * ((s >> 11) as f64 / (1u64 << 53) as f64)
                })
            })
            .collect();
        RgbImage::new(w, h, data).unwrap()
    }

    #[test]
    fn kernel_is_normalized() {
        for sigma in [0.5, 1.0, 5.0, 20.0, 33.3] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len(), 2 * libm::ceil(3.0 * sigma) as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_image_hits_degenerate_path() {
        let img = RgbImage::filled(20, 30, [80.0, 80.0, 80.0]).unwrap();
        let out = multiscale_retinex(&img, &RetinexConfig::default()).unwrap();
        assert!(out.degenerate_stretch);
        assert!(out.image.pixels().iter().all(|p| *p == [127.5; 3]));
    }

    #[test]
    fn output_spans_configured_range() {
        let img = noise_image(24, 40, 7, 0.0, 255.0);
        let cfg = RetinexConfig { output_low: 10.0, output_high: 200.0, ..Default::default() };
        let out = multiscale_retinex(&img, &cfg).unwrap();
        assert!(!out.degenerate_stretch);
        let flat: Vec<f64> = out.image.pixels().iter().flatten().copied().collect();
        let lo = flat.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = flat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((lo - 10.0).abs() < 1e-9 && (hi - 200.0).abs() < 1e-9);
    }

    #[test]
    fn half_gain_changes_little() {
        // log(v + 1) only cancels a global gain when v >> 1.
        let img = noise_image(32, 32, 11, 32.0, 255.0);
        let a = multiscale_retinex(&img, &RetinexConfig::default()).unwrap().image;
        let b = multiscale_retinex(&img.scaled(0.5), &RetinexConfig::default()).unwrap().image;
        let worst = a
            .pixels()
            .iter()
            .zip(b.pixels())
            .flat_map(|(p, q)| (0..3).map(move |k| (p[k] - q[k]).abs()))
            .fold(0.0, f64::max);
        assert!(worst <= 1.0, "worst = {worst}");
    }

    #[test]
    fn rejects_bad_config() {
        let img = noise_image(4, 4, 1, 0.0, 255.0);
        for cfg in [
            RetinexConfig { sigmas: vec![], ..Default::default() },
            RetinexConfig { sigmas: vec![0.0], ..Default::default() },
            RetinexConfig { output_low: 200.0, output_high: 100.0, ..Default::default() },
        ] {
            assert!(matches!(multiscale_retinex(&img, &cfg), Err(Error::InvalidArgument(_))));
        }
    }
}
