//! Manifest-wide LOMO extraction.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use reid_core::{extract_lomo, lomo_dim, multiscale_retinex, resize_bilinear, RgbImage};

use crate::cache::{CacheRecord, FeatureCache};
use crate::config::RunConfig;
use crate::error::{Result, ToolError};
use crate::image_io::{load_image, save_image};
use crate::manifest::Manifest;

/// Resizes to the configured geometry (if needed) and extracts LOMO.
pub fn describe(img: &RgbImage, cfg: &RunConfig) -> Result<Vec<f32>> {
    let g = cfg.geometry;
    let resized;
    let img = if (img.width(), img.height()) == (g.width, g.height) {
        img
    } else {
        resized = resize_bilinear(img, g.width, g.height)?;
        &resized
    };
    let fv = extract_lomo(img, &cfg.lomo)?;
    Ok(fv.values.iter().map(|&v| v as f32).collect())
}

#[derive(Debug)]
pub struct ExtractOutcome {
    /// Present only when every image succeeded.
    pub cache: Option<FeatureCache>,
    /// Per-image resize + descriptor time, for successful images.
    pub timings: Vec<Duration>,
    /// One message per failed image, each naming its path.
    pub failures: Vec<String>,
}

/// Extracts every manifest image on the rayon pool. Records keep manifest
/// order regardless of completion order. With `dump_dir`, the Retinex image
/// of each resized input is also written there as PPM.
pub fn extract_manifest(manifest: &Manifest, cfg: &RunConfig, dump_dir: Option<&Path>) -> Result<ExtractOutcome> {
    let dim = lomo_dim(&cfg.lomo, cfg.geometry)?;
    let results: Vec<Result<(Vec<f32>, Duration)>> = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let img = load_image(&entry.image_path)?;
            let start = Instant::now();
            let values = describe(&img, cfg).map_err(|e| {
                ToolError::Data(format!("{}: {e}", entry.image_path.display()))
            })?;
            let elapsed = start.elapsed();
            if let Some(dir) = dump_dir {
                dump_retinex(dir, i, &entry.image_path, &img, cfg)?;
            }
            Ok((values, elapsed))
        })
        .collect();

    let mut records = Vec::with_capacity(results.len());
    let mut timings = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (entry, result) in manifest.entries.iter().zip(results) {
        match result {
            Ok((values, elapsed)) => {
                timings.push(elapsed);
                records.push(CacheRecord {
                    person_id: entry.person_id.clone(),
                    camera_id: entry.camera_id.clone(),
                    values,
                });
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    let cache = failures.is_empty().then(|| FeatureCache {
        geometry: cfg.geometry,
        digest: cfg.feature_digest(),
        dim,
        records,
    });
    Ok(ExtractOutcome { cache, timings, failures })
}

fn dump_retinex(dir: &Path, index: usize, source: &Path, img: &RgbImage, cfg: &RunConfig) -> Result<()> {
    let g = cfg.geometry;
    let resized = resize_bilinear(img, g.width, g.height)?;
    let out = multiscale_retinex(&resized, &cfg.lomo.retinex)?;
    let stem = source.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    let path: PathBuf = dir.join(format!("{index:05}_{stem}.ppm"));
    save_image(&path, &out.image).map_err(ToolError::io(path))
}

/// Mean and nearest-rank 95th percentile.
pub fn timing_summary(timings: &[Duration]) -> Option<(Duration, Duration)> {
    if timings.is_empty() {
        return None;
    }
    let mut sorted = timings.to_vec();
    sorted.sort_unstable();
    let mean = sorted.iter().sum::<Duration>() / sorted.len() as u32;
    let rank = (sorted.len() * 95).div_ceil(100).max(1);
    Some((mean, sorted[rank - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_uses_nearest_rank() {
        let t: Vec<Duration> = (1..=20).rev().map(Duration::from_millis).collect();
        let (mean, p95) = timing_summary(&t).unwrap();
        assert_eq!(mean, Duration::from_micros(10_500));
        assert_eq!(p95, Duration::from_millis(19));
        assert_eq!(timing_summary(&[Duration::from_millis(3)]).unwrap().1, Duration::from_millis(3));
        assert!(timing_summary(&[]).is_none());
    }
}
