//! Person re-identification building blocks: the Local Maximal Occurrence
//! (LOMO) descriptor, Cross-view Quadratic Discriminant Analysis (XQDA),
//! baseline metrics and CMC evaluation.
//!
//! The crate is `no_std` and only needs an allocator. File formats, image
//! decoding and the command line live in the `reid` crate.
//!
//! Matrices follow the column-per-sample convention: a `d × n` matrix holds
//! `n` feature vectors of dimension `d`.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

mod error;
mod linalg;

pub mod baselines;
pub mod descriptors;
pub mod eval;
pub mod image;
pub mod lomo;
pub mod retinex;
pub mod synth;
pub mod xqda;

pub use error::{Error, Result};

pub use baselines::{
    cosine_scores, euclidean_scores, pca_fit, train_kissme, train_mahalanobis_genuine,
    MetricKind, MetricModel, PcaModel,
};
pub use eval::{
    cmc, run_dimension_sweep, run_fixed_protocol, run_protocol, split_identities, CmcCurve,
    LabeledSamples, Method, ProtocolConfig, Report, ShotMode, SplitRule, Trained, Views,
};
pub use descriptors::{hsv_bin_codes, siltp_codes, window_histogram, CodeImage, Histogram};
pub use image::{average_pool_2x2, resize_bilinear, rgb_to_hsv, GrayImage, HsvImage, RgbImage};
pub use lomo::{band_max_pool, extract_lomo, lomo_dim, FeatureVector, Geometry, LomoConfig};
pub use retinex::{multiscale_retinex, RetinexConfig, RetinexOutput};
pub use xqda::{
    compute_covariances_fast, compute_covariances_naive, train_xqda, CovariancePair,
    CrossViewDataset, SpanSpectrum, XqdaConfig, XqdaModel, XqdaSpectrum,
};
