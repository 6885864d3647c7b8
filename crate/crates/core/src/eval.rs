//! Re-identification protocols: seeded identity splits, probe/gallery
//! construction, CMC curves and multi-trial averaging.
//!
//! Randomness comes from ChaCha8 seeded with the protocol seed, using the
//! trial index as the stream number, so every trial is reproducible on its
//! own and independent of execution order.

use alloc::string::String;
use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;
use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{
    cosine_scores, euclidean_scores, train_kissme, train_mahalanobis_genuine, MetricModel,
};
use crate::xqda::{CrossViewDataset, SpanSpectrum, XqdaConfig, XqdaModel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitRule {
    /// Fraction of identities used for training, rounded to nearest.
    TrainFraction(f64),
    TrainCount(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotMode {
    /// One randomly drawn image per identity on each side.
    Single,
    /// Every image; gallery identities are scored by their best image.
    Multi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub trials: usize,
    pub split: SplitRule,
    pub shot: ShotMode,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self { trials: 10, split: SplitRule::TrainFraction(0.5), shot: ShotMode::Single, seed: 0 }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("at least one trial is required"));
        }
        if let SplitRule::TrainFraction(f) = self.split {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::invalid("train fraction must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    fn rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        rng
    }
}

/// Disjoint train/test partition of the distinct identities in `ids`.
pub fn split_identities(
    ids: &[usize],
    cfg: &ProtocolConfig,
    trial: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    cfg.validate()?;
    let mut pool = ids.to_vec();
    pool.sort_unstable();
    pool.dedup();
    let n = pool.len();
    let train = match cfg.split {
        SplitRule::TrainFraction(f) => libm::round(f * n as f64) as usize,
        SplitRule::TrainCount(c) => c,
    };
    if train > n || n - train < 2 {
        return Err(Error::invalid(alloc::format!(
            "splitting {n} identities with {train} for training leaves fewer than 2 for testing"
        )));
    }
    pool.shuffle(&mut cfg.rng(trial));
    let mut test = pool.split_off(train);
    pool.sort_unstable();
    test.sort_unstable();
    Ok((pool, test))
}

/// Cumulative match characteristic; `rates[k - 1]` is the rank-k rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CmcCurve {
    pub rates: Vec<f64>,
}

impl CmcCurve {
    /// Identification rate at 1-based `rank`; ranks past the end are 1.
    pub fn rank(&self, rank: usize) -> f64 {
        assert!(rank >= 1, "ranks are 1-based");
        self.rates.get(rank - 1).copied().unwrap_or(1.0)
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// 1-based rank of each probe's true identity among gallery identities.
///
/// Lower scores are better. A gallery identity with several images is
/// scored by its minimum. Ties go to the identity whose first image comes
/// earlier in the gallery.
pub fn match_ranks(scores: &DMatrix<f64>, probe_ids: &[usize], gallery_ids: &[usize]) -> Result<Vec<usize>> {
    Error::check_len(scores.nrows(), probe_ids.len())?;
    Error::check_len(scores.ncols(), gallery_ids.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let mut identities: Vec<usize> = Vec::new();
    let slot: Vec<usize> = gallery_ids
        .iter()
        .map(|id| match identities.iter().position(|g| g == id) {
            Some(k) => k,
            None => {
                identities.push(*id);
                identities.len() - 1
            }
        })
        .collect();

    let mut best = alloc::vec![f64::INFINITY; identities.len()];
    probe_ids
        .iter()
        .enumerate()
        .map(|(i, pid)| {
            let truth = identities.iter().position(|g| g == pid).ok_or_else(|| {
                Error::dataset(alloc::format!("probe identity {pid} missing from gallery"))
            })?;
            best.iter_mut().for_each(|b| *b = f64::INFINITY);
            for (j, &k) in slot.iter().enumerate() {
                best[k] = best[k].min(scores[(i, j)]);
            }
            let target = best[truth];
            let ahead = best
                .iter()
                .enumerate()
                .filter(|&(k, &s)| s < target || (s == target && k < truth))
                .count();
            Ok(ahead + 1)
        })
        .collect()
}

pub fn cmc(scores: &DMatrix<f64>, probe_ids: &[usize], gallery_ids: &[usize]) -> Result<CmcCurve> {
    let ranks = match_ranks(scores, probe_ids, gallery_ids)?;
    let mut distinct = gallery_ids.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    Ok(curve_from_ranks(&ranks, distinct.len()))
}

fn curve_from_ranks(ranks: &[usize], gallery_size: usize) -> CmcCurve {
    let mut hits = alloc::vec![0usize; gallery_size];
    for &r in ranks {
        hits[r - 1] += 1;
    }
    let total = ranks.len().max(1) as f64;
    let mut acc = 0;
    let rates = hits
        .iter()
        .map(|h| {
            acc += h;
            acc as f64 / total
        })
        .collect();
    CmcCurve { rates }
}

/// Matching method applied inside each trial.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Xqda(XqdaConfig),
    Kissme { pca_dims: Option<usize>, regularizer: f64 },
    Mahalanobis { pca_dims: Option<usize>, regularizer: f64 },
    Euclidean,
    Cosine,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Xqda(_) => "xqda",
            Method::Kissme { .. } => "kissme",
            Method::Mahalanobis { .. } => "mahalanobis",
            Method::Euclidean => "euclidean",
            Method::Cosine => "cosine",
        }
    }

    pub fn needs_training(&self) -> bool {
        !matches!(self, Method::Euclidean | Method::Cosine)
    }

    pub fn train(&self, ds: &CrossViewDataset) -> Result<Trained> {
        Ok(match self {
            Method::Xqda(cfg) => Trained::Xqda(crate::xqda::train_xqda(ds, cfg)?),
            Method::Kissme { pca_dims, regularizer } => {
                Trained::Metric(train_kissme(ds, *pca_dims, *regularizer)?)
            }
            Method::Mahalanobis { pca_dims, regularizer } => {
                Trained::Metric(train_mahalanobis_genuine(ds, *pca_dims, *regularizer)?)
            }
            Method::Euclidean => Trained::Euclidean,
            Method::Cosine => Trained::Cosine,
        })
    }
}

/// A ready-to-score metric.
#[derive(Debug, Clone, PartialEq)]
pub enum Trained {
    Xqda(XqdaModel),
    Metric(MetricModel),
    Euclidean,
    Cosine,
}

impl Trained {
    /// `p × g` score matrix; lower means more similar.
    pub fn scores(&self, probes: &DMatrix<f64>, gallery: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Trained::Xqda(m) => m.pairwise_distances(probes, gallery),
            Trained::Metric(m) => m.pairwise_scores(probes, gallery),
            Trained::Euclidean => euclidean_scores(probes, gallery),
            Trained::Cosine => cosine_scores(probes, gallery),
        }
    }
}

/// Feature columns with their identity and camera labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSamples {
    pub features: DMatrix<f64>,
    pub person: Vec<usize>,
    pub camera: Vec<usize>,
}

impl LabeledSamples {
    pub fn new(features: DMatrix<f64>, person: Vec<usize>, camera: Vec<usize>) -> Result<Self> {
        Error::check_len(features.ncols(), person.len())?;
        Error::check_len(features.ncols(), camera.len())?;
        Ok(Self { features, person, camera })
    }

    fn columns(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.features.nrows(), idx.len(), |r, c| self.features[(r, idx[c])])
    }

    fn in_view(&self, cam: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.camera.len()).filter(move |&i| self.camera[i] == cam)
    }

    /// Sorted distinct identities seen by camera `cam`.
    pub fn identities(&self, cam: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = self.in_view(cam).map(|i| self.person[i]).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Sorted identities seen by both views.
    pub fn shared_identities(&self, views: Views) -> Vec<usize> {
        let gallery = self.identities(views.gallery);
        self.identities(views.probe).into_iter().filter(|id| gallery.binary_search(id).is_ok()).collect()
    }

    /// Cross-view dataset from the given identities.
    pub fn cross_view(&self, views: Views, ids: &[usize]) -> Result<CrossViewDataset> {
        let pick = |cam| -> Vec<usize> {
            self.in_view(cam).filter(|&i| ids.binary_search(&self.person[i]).is_ok()).collect()
        };
        let (xi, zi) = (pick(views.probe), pick(views.gallery));
        CrossViewDataset::new(
            self.columns(&xi),
            self.columns(&zi),
            xi.iter().map(|&i| self.person[i]).collect(),
            zi.iter().map(|&i| self.person[i]).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Views {
    pub probe: usize,
    pub gallery: usize,
}

/// Test-side samples of one trial.
#[derive(Debug, Clone)]
pub struct TrialSplit {
    pub train_ids: Vec<usize>,
    pub probes: Vec<usize>,
    pub gallery: Vec<usize>,
}

impl TrialSplit {
    pub fn gallery_hash(&self, samples: &LabeledSamples) -> u64 {
        let mut h = FnvHasher::default();
        for &g in &self.gallery {
            h.write_u64(samples.person[g] as u64);
        }
        h.finish()
    }
}

/// Identity split plus probe and gallery sample indices for `trial`.
///
/// Identities seen in both views are split; those only present in the
/// gallery view join every gallery as distractors.
pub fn trial_split(
    samples: &LabeledSamples,
    views: Views,
    cfg: &ProtocolConfig,
    trial: usize,
) -> Result<TrialSplit> {
    if views.probe == views.gallery {
        return Err(Error::invalid("probe and gallery views must differ"));
    }
    let probe_ids = samples.identities(views.probe);
    let gallery_ids = samples.identities(views.gallery);
    let shared: Vec<usize> =
        probe_ids.iter().copied().filter(|id| gallery_ids.binary_search(id).is_ok()).collect();
    let (train_ids, test_ids) = split_identities(&shared, cfg, trial)?;

    // Draws for single-shot selection continue the trial's stream past the shuffle.
    let mut rng = cfg.rng(trial);
    let mut scratch = shared.clone();
    scratch.shuffle(&mut rng);

    let mut select = |cam: usize, ids: &[usize]| -> Vec<usize> {
        let mut out = Vec::new();
        for &id in ids {
            let imgs: Vec<usize> =
                samples.in_view(cam).filter(|&i| samples.person[i] == id).collect();
            match cfg.shot {
                ShotMode::Multi => out.extend(imgs),
                ShotMode::Single => out.extend(imgs.choose(&mut rng).copied()),
            }
        }
        out
    };
    let probes = select(views.probe, &test_ids);
    let distractors: Vec<usize> =
        gallery_ids.iter().copied().filter(|id| probe_ids.binary_search(id).is_err()).collect();
    let mut gallery_side = test_ids.clone();
    gallery_side.extend(distractors);
    let gallery = select(views.gallery, &gallery_side);
    Ok(TrialSplit { train_ids, probes, gallery })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub method: String,
    pub curves: Vec<CmcCurve>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub gallery_hashes: Vec<u64>,
    /// Learned subspace size per trial (XQDA only).
    pub subspace_dims: Vec<usize>,
}

impl Report {
    fn from_curves(method: String, curves: Vec<CmcCurve>, gallery_hashes: Vec<u64>, subspace_dims: Vec<usize>) -> Result<Self> {
        let len = curves[0].len();
        if curves.iter().any(|c| c.len() != len) {
            return Err(Error::invalid("trials produced galleries of different sizes"));
        }
        let t = curves.len() as f64;
        let mean: Vec<f64> = (0..len).map(|k| curves.iter().map(|c| c.rates[k]).sum::<f64>() / t).collect();
        let std = (0..len)
            .map(|k| {
                if curves.len() < 2 {
                    return 0.0;
                }
                let ss: f64 = curves.iter().map(|c| (c.rates[k] - mean[k]) * (c.rates[k] - mean[k])).sum();
                libm::sqrt(ss / (t - 1.0))
            })
            .collect();
        Ok(Self { method, curves, mean, std, gallery_hashes, subspace_dims })
    }

    /// Mean rank-k rate (1-based); ranks past the gallery size are 1.
    pub fn mean_rank(&self, rank: usize) -> f64 {
        assert!(rank >= 1, "ranks are 1-based");
        self.mean.get(rank - 1).copied().unwrap_or(1.0)
    }
}

fn trial_scores(
    samples: &LabeledSamples,
    split: &TrialSplit,
    trained: &Trained,
) -> Result<CmcCurve> {
    let probes = samples.columns(&split.probes);
    let gallery = samples.columns(&split.gallery);
    let scores = trained.scores(&probes, &gallery)?;
    let pid: Vec<usize> = split.probes.iter().map(|&i| samples.person[i]).collect();
    let gid: Vec<usize> = split.gallery.iter().map(|&i| samples.person[i]).collect();
    cmc(&scores, &pid, &gid)
}

/// Runs `cfg.trials` split/train/score rounds and averages the CMC curves.
pub fn run_protocol(
    samples: &LabeledSamples,
    views: Views,
    method: &Method,
    cfg: &ProtocolConfig,
) -> Result<Report> {
    cfg.validate()?;
    let mut curves = Vec::with_capacity(cfg.trials);
    let mut hashes = Vec::with_capacity(cfg.trials);
    let mut dims = Vec::new();
    for trial in 0..cfg.trials {
        let split = trial_split(samples, views, cfg, trial)?;
        let trained = match method {
            Method::Euclidean => Trained::Euclidean,
            Method::Cosine => Trained::Cosine,
            _ => method.train(&samples.cross_view(views, &split.train_ids)?)?,
        };
        if let Trained::Xqda(m) = &trained {
            dims.push(m.subspace_dim());
        }
        curves.push(trial_scores(samples, &split, &trained)?);
        hashes.push(split.gallery_hash(samples));
    }
    Report::from_curves(method.name().into(), curves, hashes, dims)
}

/// Scores a fixed, already-trained metric on the test side of each trial.
///
/// Splits are drawn exactly as in [`run_protocol`], so reports from the two
/// are comparable; the training identities are simply left unused.
pub fn run_fixed_protocol(
    samples: &LabeledSamples,
    views: Views,
    trained: &Trained,
    name: &str,
    cfg: &ProtocolConfig,
) -> Result<Report> {
    cfg.validate()?;
    let mut curves = Vec::with_capacity(cfg.trials);
    let mut hashes = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let split = trial_split(samples, views, cfg, trial)?;
        curves.push(trial_scores(samples, &split, trained)?);
        hashes.push(split.gallery_hash(samples));
    }
    let dims = match trained {
        Trained::Xqda(m) => alloc::vec![m.subspace_dim(); cfg.trials],
        _ => Vec::new(),
    };
    Report::from_curves(String::from(name), curves, hashes, dims)
}

/// Re-runs XQDA at each requested subspace size, sharing one generalized
/// eigendecomposition per trial. Sizes above the number of available
/// directions are clamped to it. Returns `(requested size, report)` pairs.
pub fn run_dimension_sweep(
    samples: &LabeledSamples,
    views: Views,
    xqda: &XqdaConfig,
    dims: &[usize],
    cfg: &ProtocolConfig,
) -> Result<Vec<(usize, Report)>> {
    cfg.validate()?;
    xqda.validate()?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::invalid("sweep needs positive subspace sizes"));
    }
    let mut per_dim: Vec<(Vec<CmcCurve>, Vec<usize>)> = dims.iter().map(|_| (Vec::new(), Vec::new())).collect();
    let mut hashes = Vec::new();
    for trial in 0..cfg.trials {
        let split = trial_split(samples, views, cfg, trial)?;
        let ds = samples.cross_view(views, &split.train_ids)?;
        let solved = SpanSpectrum::solve(&ds, xqda.regularizer)?;
        for (slot, &r) in per_dim.iter_mut().zip(dims) {
            let model = solved.model(r.min(solved.len()))?;
            slot.1.push(model.subspace_dim());
            slot.0.push(trial_scores(samples, &split, &Trained::Xqda(model))?);
        }
        hashes.push(split.gallery_hash(samples));
    }
    dims.iter()
        .zip(per_dim)
        .map(|(&r, (curves, used))| {
            Ok((r, Report::from_curves(String::from("xqda"), curves, hashes.clone(), used)?))
        })
        .collect()
}
