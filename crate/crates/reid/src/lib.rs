//! File formats, dataset plumbing and report rendering around `reid-core`.
//!
//! The `reid` binary wires these into `extract`, `train`, `eval`, `retinex`
//! and `bench` subcommands.

pub mod cache;
pub mod config;
pub mod error;
pub mod extract;
pub mod image_io;
pub mod manifest;
pub mod model_io;
pub mod report;

pub use cache::{CacheRecord, CachedSamples, FeatureCache};
pub use config::RunConfig;
pub use error::{Result, ToolError};
pub use image_io::{load_image, save_image, ImageError};
pub use manifest::{Manifest, ManifestEntry};
pub use model_io::SavedModel;
