//! Local Maximal Occurrence (LOMO) descriptor.
//!
//! For every pyramid level the Retinex-enhanced image is coded into joint
//! HSV bins and one SILTP code plane per configured scale. Windows slide
//! across each horizontal band; their normalized histograms are max-pooled
//! bin-wise within the band. The band maxima of all levels are concatenated,
//! log-compressed, and the HSV and SILTP families are each scaled to unit
//! length.
//!
//! Layout: levels fine to coarse, bands top to bottom, and within a band the
//! HSV block followed by the SILTP blocks in configuration order.

use alloc::vec;
use alloc::vec::Vec;

use crate::descriptors::{
    accumulate_window, hsv_bin_codes_with, siltp_codes, CodeImage, Histogram, HSV_BINS,
    SILTP_CODES,
};
use crate::image::{average_pool_2x2, rgb_to_hsv, RgbImage};
use crate::retinex::{multiscale_retinex, RetinexConfig};
use crate::{Error, Result};

/// Image size in pixels. A "128×48" person image has `height = 128`,
/// `width = 48`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Geometry {
    pub width: usize,
    pub height: usize,
}

impl Geometry {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    /// Geometry after `level` rounds of 2×2 pooling.
    pub fn at_level(self, level: usize) -> Self {
        Self { width: self.width >> level, height: self.height >> level }
    }
}

impl Default for Geometry {
    fn default() -> Self {
        Self::new(48, 128)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LomoConfig {
    pub window: usize,
    pub stride: usize,
    pub pyramid_levels: usize,
    /// `(radius, tau)` per SILTP scale.
    pub siltp_scales: Vec<(usize, f64)>,
    pub hsv_bins: [usize; 3],
    pub retinex: RetinexConfig,
}

impl Default for LomoConfig {
    fn default() -> Self {
        Self {
            window: 10,
            stride: 5,
            pyramid_levels: 3,
            siltp_scales: vec![(3, 0.3), (5, 0.3)],
            hsv_bins: HSV_BINS,
            retinex: RetinexConfig::default(),
        }
    }
}

impl LomoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.window < self.stride {
            return Err(Error::invalid("LOMO needs window >= stride >= 1"));
        }
        if self.pyramid_levels == 0 {
            return Err(Error::invalid("LOMO needs at least one pyramid level"));
        }
        if self.hsv_bins.contains(&0) || self.hsv_bins.iter().product::<usize>() > 1 << 16 {
            return Err(Error::invalid("HSV bin counts must be positive with at most 65536 codes"));
        }
        for &(radius, tau) in &self.siltp_scales {
            if radius == 0 || !(tau > 0.0 && tau < 1.0) {
                return Err(Error::invalid("SILTP scales need radius >= 1 and tau in (0, 1)"));
            }
        }
        self.retinex.validate()
    }

    /// Length of one band's descriptor: HSV bins plus 81 per SILTP scale.
    pub fn band_len(&self) -> usize {
        self.hsv_bins.iter().product::<usize>() + SILTP_CODES * self.siltp_scales.len()
    }

    fn count(&self, extent: usize) -> usize {
        (extent - self.window) / self.stride + 1
    }

    /// Horizontal bands and windows per band at each level.
    pub fn grid(&self, geom: Geometry) -> Result<Vec<LevelGrid>> {
        self.validate()?;
        (0..self.pyramid_levels)
            .map(|level| {
                let g = geom.at_level(level);
                if g.width < self.window || g.height < self.window {
                    return Err(Error::geometry(alloc::format!(
                        "pyramid level {level} is {}x{} (w x h), smaller than the {} pixel window",
                        g.width,
                        g.height,
                        self.window
                    )));
                }
                Ok(LevelGrid { geometry: g, bands: self.count(g.height), windows: self.count(g.width) })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelGrid {
    pub geometry: Geometry,
    pub bands: usize,
    pub windows: usize,
}

pub fn lomo_dim(cfg: &LomoConfig, geom: Geometry) -> Result<usize> {
    let bands: usize = cfg.grid(geom)?.iter().map(|g| g.bands).sum();
    Ok(bands * cfg.band_len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Hsv,
    Siltp { radius: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub level: usize,
    pub band: usize,
    pub kind: BlockKind,
    pub offset: usize,
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Vec<Block>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn blocks(&self, kind: BlockKind) -> impl Iterator<Item = &Block> {
        self.layout.iter().filter(move |b| b.kind == kind)
    }

    /// Applies `v -> ln(v + 1)` and scales the HSV and SILTP families to
    /// unit L2 norm each.
    pub fn finalize(&mut self) {
        self.values.iter_mut().for_each(|v| *v = libm::log1p(*v));
        for hsv in [true, false] {
            let blocks: Vec<_> = self
                .layout
                .iter()
                .filter(|b| (b.kind == BlockKind::Hsv) == hsv)
                .map(Block::range)
                .collect();
            let norm = libm::sqrt(
                blocks.iter().flat_map(|r| &self.values[r.clone()]).map(|v| v * v).sum::<f64>(),
            );
            if norm > 0.0 {
                for r in blocks {
                    self.values[r].iter_mut().for_each(|v| *v /= norm);
                }
            }
        }
    }
}

/// Bin-wise maximum over equally sized histograms.
pub fn band_max_pool(histograms: &[Histogram]) -> Result<Histogram> {
    let (first, rest) = histograms
        .split_first()
        .ok_or_else(|| Error::invalid("max pooling needs at least one histogram"))?;
    let mut out = first.clone();
    for h in rest {
        Error::check_len(out.len(), h.len())?;
        out.bins.iter_mut().zip(&h.bins).for_each(|(o, &v)| *o = o.max(v));
    }
    Ok(out)
}

/// Code planes of one pyramid level: HSV first, then one per SILTP scale.
pub fn level_codes(img: &RgbImage, cfg: &LomoConfig) -> Result<Vec<CodeImage>> {
    let mut planes = Vec::with_capacity(1 + cfg.siltp_scales.len());
    planes.push(hsv_bin_codes_with(&rgb_to_hsv(img), cfg.hsv_bins)?);
    let gray = img.to_gray();
    for &(radius, tau) in &cfg.siltp_scales {
        planes.push(siltp_codes(&gray, radius, tau)?);
    }
    Ok(planes)
}

/// Retinex output followed by successive 2×2 poolings.
pub fn pyramid(img: &RgbImage, cfg: &LomoConfig) -> Result<Vec<RgbImage>> {
    let mut levels = Vec::with_capacity(cfg.pyramid_levels);
    levels.push(multiscale_retinex(img, &cfg.retinex)?.image);
    for _ in 1..cfg.pyramid_levels {
        let next = average_pool_2x2(levels.last().expect("non-empty"))?;
        levels.push(next);
    }
    Ok(levels)
}

/// Band maxima before the log transform and normalization.
pub fn extract_lomo_histograms(img: &RgbImage, cfg: &LomoConfig) -> Result<FeatureVector> {
    let geom = Geometry::new(img.width(), img.height());
    let grid = cfg.grid(geom)?;
    let dim = grid.iter().map(|g| g.bands).sum::<usize>() * cfg.band_len();
    let mut values = vec![0.0f64; dim];
    let mut layout = Vec::with_capacity(dim / cfg.band_len() * (1 + cfg.siltp_scales.len()));
    let area = (cfg.window * cfg.window) as f64;
    let mut scratch: Vec<f64> = Vec::new();
    let mut offset = 0;

    for (level, (image, g)) in pyramid(img, cfg)?.iter().zip(&grid).enumerate() {
        let planes = level_codes(image, cfg)?;
        for band in 0..g.bands {
            let y0 = band * cfg.stride;
            for (p, plane) in planes.iter().enumerate() {
                let len = plane.n_codes();
                let kind = match p {
                    0 => BlockKind::Hsv,
                    _ => BlockKind::Siltp { radius: cfg.siltp_scales[p - 1].0 },
                };
                let out = &mut values[offset..offset + len];
                for win in 0..g.windows {
                    scratch.clear();
                    scratch.resize(len, 0.0);
                    accumulate_window(plane, win * cfg.stride, y0, cfg.window, cfg.window, &mut scratch)?;
                    for (o, &count) in out.iter_mut().zip(&scratch) {
                        *o = o.max(count / area);
                    }
                }
                layout.push(Block { level, band, kind, offset, len });
                offset += len;
            }
        }
    }
    debug_assert_eq!(offset, dim);
    Ok(FeatureVector { values, layout })
}

/// Full LOMO descriptor for an image already resized to the target geometry.
pub fn extract_lomo(img: &RgbImage, cfg: &LomoConfig) -> Result<FeatureVector> {
    let mut fv = extract_lomo_histograms(img, cfg)?;
    fv.finalize();
    Ok(fv)
}
