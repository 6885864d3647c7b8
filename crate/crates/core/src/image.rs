//! Raster types for the three pixel stages and the resampling primitives
//! shared by the Retinex and LOMO stages.
//!
//! All rasters are row-major. Channel values are `f64` in `[0, 255]`.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Color raster with per-pixel `[r, g, b]` in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

/// Single-channel raster in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// One HSV pixel: hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage {
    width: usize,
    height: usize,
    data: Vec<Hsv>,
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::geometry("image dimensions must be at least 1x1"));
    }
    Error::check_len(width * height, len)
}

impl RgbImage {
    /// Wraps row-major pixel data. Values are clamped into `[0, 255]`;
    /// NaN is rejected.
    pub fn new(width: usize, height: usize, mut data: Vec<[f64; 3]>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        for px in data.iter_mut() {
            for c in px.iter_mut() {
                if c.is_nan() {
                    return Err(Error::invalid("NaN channel value"));
                }
                *c = c.clamp(0.0, 255.0);
            }
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::new(width, height, alloc::vec![rgb; width * height])
    }

    /// Builds an image from interleaved 8-bit RGB bytes.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Error::check_len(width * height * 3, bytes.len())?;
        let data = bytes
            .chunks_exact(3)
            .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
            .collect();
        Self::new(width, height, data)
    }

    /// Interleaved 8-bit RGB, rounding to nearest.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .flat_map(|p| p.iter().map(|&c| libm::round(c) as u8))
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.data[y * self.width + x]
    }

    /// Multiplies every channel by `k`, clamping to `[0, 255]`.
    pub fn scaled(&self, k: f64) -> Self {
        let data = self
            .data
            .iter()
            .map(|p| p.map(|c| (c * k).clamp(0.0, 255.0)))
            .collect();
        Self { width: self.width, height: self.height, data }
    }

    /// Luminance plane `(r + g + b) / 3`.
    pub fn to_gray(&self) -> GrayImage {
        let data = self.data.iter().map(|p| (p[0] + p[1] + p[2]) / 3.0).collect();
        GrayImage { width: self.width, height: self.height, data }
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        for v in data.iter_mut() {
            if v.is_nan() {
                return Err(Error::invalid("NaN gray value"));
            }
            *v = v.clamp(0.0, 255.0);
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Multiplies every value by `k` without clamping.
    ///
    /// Used to probe gain invariance of the ternary coder, which does not
    /// care about the nominal 8-bit range.
    pub fn scaled_unclamped(&self, k: f64) -> Self {
        let data = self.data.iter().map(|v| v * k).collect();
        Self { width: self.width, height: self.height, data }
    }
}

impl HsvImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Hsv] {
        &self.data
    }

    pub fn from_pixels(width: usize, height: usize, data: Vec<Hsv>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        for p in &data {
            if !(0.0..360.0).contains(&p.h) || !(0.0..=1.0).contains(&p.s) || !(0.0..=1.0).contains(&p.v) {
                return Err(Error::invalid("HSV channel out of range"));
            }
        }
        Ok(Self { width, height, data })
    }
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_bilinear(img: &RgbImage, width: usize, height: usize) -> Result<RgbImage> {
    if width == 0 || height == 0 {
        return Err(Error::geometry("resize target must be at least 1x1"));
    }
    let sx = img.width as f64 / width as f64;
    let sy = img.height as f64 / height as f64;
    let taps = |dst: usize, scale: f64, len: usize| -> (usize, usize, f64) {
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let lo = libm::floor(pos) as usize;
        let hi = (lo + 1).min(len - 1);
        (lo, hi, pos - lo as f64)
    };
    let cols: Vec<_> = (0..width).map(|x| taps(x, sx, img.width)).collect();
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        let (y0, y1, fy) = taps(y, sy, img.height);
        for &(x0, x1, fx) in &cols {
            let (a, b) = (img.get(x0, y0), img.get(x1, y0));
            let (c, d) = (img.get(x0, y1), img.get(x1, y1));
            let mut px = [0.0; 3];
            for k in 0..3 {
                let top = a[k] + fx * (b[k] - a[k]);
                let bottom = c[k] + fx * (d[k] - c[k]);
                px[k] = (top + fy * (bottom - top)).clamp(0.0, 255.0);
            }
            data.push(px);
        }
    }
    Ok(RgbImage { width, height, data })
}

/// Hexcone RGB to HSV. Black maps to `(0, 0, 0)` and grays to hue 0.
pub fn rgb_pixel_to_hsv(rgb: [f64; 3]) -> Hsv {
    let [r, g, b] = rgb.map(|c| c / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        let h = 60.0 * ((g - b) / delta);
        if h < 0.0 {
            h + 360.0
        } else {
            h
        }
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    // -0.0 and rounding right below 360
    let h = if h >= 360.0 || h <= 0.0 { 0.0 } else { h };
    Hsv { h, s, v: max }
}

/// Inverse of [`rgb_pixel_to_hsv`], returning channels in `[0, 255]`.
pub fn hsv_pixel_to_rgb(hsv: Hsv) -> [f64; 3] {
    let c = hsv.v * hsv.s;
    let hp = hsv.h / 60.0;
    let x = c * (1.0 - libm::fabs(hp % 2.0 - 1.0));
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = hsv.v - c;
    [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
}

pub fn rgb_to_hsv(img: &RgbImage) -> HsvImage {
    HsvImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&p| rgb_pixel_to_hsv(p)).collect(),
    }
}

/// Non-overlapping 2×2 mean pooling. A trailing odd row or column is dropped.
pub fn average_pool_2x2(img: &RgbImage) -> Result<RgbImage> {
    if img.width < 2 || img.height < 2 {
        return Err(Error::geometry("average pooling needs at least a 2x2 image"));
    }
    let (width, height) = (img.width / 2, img.height / 2);
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (a, b) = (img.get(2 * x, 2 * y), img.get(2 * x + 1, 2 * y));
            let (c, d) = (img.get(2 * x, 2 * y + 1), img.get(2 * x + 1, 2 * y + 1));
            data.push(core::array::from_fn(|k| ((a[k] + b[k]) + (c[k] + d[k])) * 0.25));
        }
    }
    Ok(RgbImage { width, height, data })
}
