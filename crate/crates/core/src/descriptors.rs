//! Per-pixel pattern coding and windowed histograms.
//!
//! Two coders feed LOMO: the scale invariant local ternary pattern (SILTP)
//! over the luminance plane, and joint HSV binning over the color plane.

use alloc::vec;
use alloc::vec::Vec;

use crate::image::{GrayImage, Hsv, HsvImage};
use crate::{Error, Result};

/// Number of SILTP codes for the 4-neighbour ternary pattern.
pub const SILTP_CODES: usize = 81;

/// Default joint HSV quantization (hue, saturation, value).
pub const HSV_BINS: [usize; 3] = [8, 8, 8];

/// Raster of discrete pattern codes in `[0, n_codes)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeImage {
    width: usize,
    height: usize,
    codes: Vec<u16>,
    n_codes: usize,
}

impl CodeImage {
    pub fn new(width: usize, height: usize, codes: Vec<u16>, n_codes: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::geometry("code image must be at least 1x1"));
        }
        Error::check_len(width * height, codes.len())?;
        if n_codes == 0 || n_codes > u16::MAX as usize + 1 {
            return Err(Error::invalid("code alphabet size out of range"));
        }
        if codes.iter().any(|&c| c as usize >= n_codes) {
            return Err(Error::invalid("code exceeds alphabet size"));
        }
        Ok(Self { width, height, codes, n_codes })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_codes(&self) -> usize {
        self.n_codes
    }

    pub fn codes(&self) -> &[u16] {
        &self.codes
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.codes[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: Vec<f64>,
}

impl Histogram {
    pub fn zeros(n: usize) -> Self {
        Self { bins: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.bins.iter().sum()
    }
}

/// SILTP codes with the 4-neighbourhood at distance `radius`.
///
/// Neighbours are visited in the order right, down, left, up and the k-th
/// neighbour contributes `digit * 3^k`, where the digit is 1 when the
/// neighbour exceeds `(1 + tau) * center`, 2 when it falls below
/// `(1 - tau) * center` and 0 otherwise. Borders are replicate-padded.
pub fn siltp_codes(img: &GrayImage, radius: usize, tau: f64) -> Result<CodeImage> {
    if radius == 0 {
        return Err(Error::invalid("SILTP radius must be positive"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid("SILTP tolerance must lie in (0, 1)"));
    }
    let (w, h) = (img.width(), img.height());
    let px = img.pixels();
    let mut codes = Vec::with_capacity(w * h);
    for y in 0..h {
        let up = y.saturating_sub(radius);
        let down = (y + radius).min(h - 1);
        for x in 0..w {
            let left = x.saturating_sub(radius);
            let right = (x + radius).min(w - 1);
            let center = px[y * w + x];
            let upper = (1.0 + tau) * center;
            let lower = (1.0 - tau) * center;
            let neighbours = [px[y * w + right], px[down * w + x], px[y * w + left], px[up * w + x]];
            let mut code = 0u16;
            let mut weight = 1u16;
            for v in neighbours {
                if v > upper {
                    code += weight;
                } else if v < lower {
                    code += 2 * weight;
                }
                weight *= 3;
            }
            codes.push(code);
        }
    }
    Ok(CodeImage { width: w, height: h, codes, n_codes: SILTP_CODES })
}

#[inline]
fn bin(value: f64, bins: usize) -> usize {
    // NaN and negatives collapse to 0 through the saturating cast.
    (libm::floor(value * bins as f64) as usize).min(bins - 1)
}

/// Joint HSV bin of one pixel: `h_bin * (S * V) + s_bin * V + v_bin`.
#[inline]
pub fn hsv_pixel_code(p: Hsv, bins: [usize; 3]) -> usize {
    let [hb, sb, vb] = bins;
    bin(p.h / 360.0, hb) * sb * vb + bin(p.s, sb) * vb + bin(p.v, vb)
}

/// Joint HSV codes with the default 8×8×8 quantization.
pub fn hsv_bin_codes(img: &HsvImage) -> CodeImage {
    hsv_bin_codes_with(img, HSV_BINS).expect("default HSV bins are valid")
}

pub fn hsv_bin_codes_with(img: &HsvImage, bins: [usize; 3]) -> Result<CodeImage> {
    let n_codes = bins.iter().product::<usize>();
    if bins.contains(&0) || n_codes > u16::MAX as usize + 1 {
        return Err(Error::invalid("HSV bin counts must be positive with at most 65536 codes"));
    }
    let codes = img.pixels().iter().map(|&p| hsv_pixel_code(p, bins) as u16).collect();
    Ok(CodeImage { width: img.width(), height: img.height(), codes, n_codes })
}

/// Tally of codes inside the `w × h` window at `(x0, y0)`; divided by the
/// window area when `normalize` is set.
pub fn window_histogram(
    codes: &CodeImage,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    normalize: bool,
) -> Result<Histogram> {
    let mut hist = Histogram::zeros(codes.n_codes);
    accumulate_window(codes, x0, y0, w, h, &mut hist.bins)?;
    if normalize {
        let area = (w * h) as f64;
        hist.bins.iter_mut().for_each(|b| *b /= area);
    }
    Ok(hist)
}

pub(crate) fn accumulate_window(
    codes: &CodeImage,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    bins: &mut [f64],
) -> Result<()> {
    if w == 0 || h == 0 || x0 + w > codes.width || y0 + h > codes.height {
        return Err(Error::geometry("histogram window outside the code image"));
    }
    for y in y0..y0 + h {
        for &c in &codes.codes[y * codes.width + x0..y * codes.width + x0 + w] {
            bins[c as usize] += 1.0;
        }
    }
    Ok(())
}
