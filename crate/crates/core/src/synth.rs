//! Synthetic two-view identity data with a known cross-view shift.
//!
//! Each identity has a center drawn from `N(0, I)`. View-1 samples are the
//! center plus noise; view-2 samples are the center passed through a fixed
//! random linear distortion plus noise. Noise is axis-aligned with a small
//! variance on most coordinates and a large one on the trailing few.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::eval::LabeledSamples;
use crate::image::RgbImage;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CrossViewBenchmark {
    pub identities: usize,
    pub dim: usize,
    pub samples_per_view: usize,
    /// Noise variance on the leading `dim - noisy_dims` coordinates.
    pub low_variance: f64,
    /// Noise variance on the trailing `noisy_dims` coordinates.
    pub high_variance: f64,
    pub noisy_dims: usize,
    /// Scale of the random part of the view-2 distortion `I + s·G/√d`.
    pub distortion: f64,
}

impl Default for CrossViewBenchmark {
    fn default() -> Self {
        Self {
            identities: 100,
            dim: 50,
            samples_per_view: 5,
            low_variance: 0.2,
            high_variance: 2.0,
            noisy_dims: 10,
            distortion: 2.0,
        }
    }
}

impl CrossViewBenchmark {
    /// Samples with cameras 0 and 1; columns are ordered identity-major.
    pub fn generate(&self, seed: u64) -> Result<LabeledSamples> {
        if self.identities < 2 || self.dim == 0 || self.samples_per_view == 0 {
            return Err(Error::invalid("benchmark needs >= 2 identities, dim >= 1, >= 1 sample"));
        }
        if self.noisy_dims > self.dim || self.low_variance < 0.0 || self.high_variance < 0.0 {
            return Err(Error::invalid("benchmark noise settings out of range"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim;
        let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

        let scale = self.distortion / libm::sqrt(d as f64);
        let distortion =
            DMatrix::identity(d, d) + DMatrix::from_fn(d, d, |_, _| scale * normal(&mut rng));
        let std_dev: Vec<f64> = (0..d)
            .map(|k| {
                let var = if k < d - self.noisy_dims { self.low_variance } else { self.high_variance };
                libm::sqrt(var)
            })
            .collect();

        let per_id = 2 * self.samples_per_view;
        let total = self.identities * per_id;
        let mut features = DMatrix::zeros(d, total);
        let mut person = Vec::with_capacity(total);
        let mut camera = Vec::with_capacity(total);
        for id in 0..self.identities {
            let center = DMatrix::from_fn(d, 1, |_, _| normal(&mut rng));
            let shifted = &distortion * &center;
            for view in 0..2 {
                let base = if view == 0 { &center } else { &shifted };
                for _ in 0..self.samples_per_view {
                    let col = person.len();
                    for k in 0..d {
                        features[(k, col)] = base[(k, 0)] + std_dev[k] * normal(&mut rng);
                    }
                    person.push(id);
                    camera.push(view);
                }
            }
        }
        LabeledSamples::new(features, person, camera)
    }
}

/// Random-texture RGB image, used for throughput and property checks.
pub fn random_image(width: usize, height: usize, seed: u64, low: f64, high: f64) -> Result<RgbImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height)
        .map(|_| core::array::from_fn(|_| rng.random_range(low..=high)))
        .collect();
    RgbImage::new(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let bench = CrossViewBenchmark { identities: 4, dim: 6, noisy_dims: 2, ..Default::default() };
        let a = bench.generate(1).unwrap();
        assert_eq!(a.features.shape(), (6, 40));
        assert_eq!(a.camera.iter().filter(|&&c| c == 1).count(), 20);
        assert_eq!(a, bench.generate(1).unwrap());
        assert_ne!(a, bench.generate(2).unwrap());
    }
}
