//! Reference metrics sharing the zero-mean Gaussian difference model:
//! Euclidean and cosine scoring, Mahalanobis trained on genuine pairs, and
//! PCA followed by KISSME.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{pairwise_quadratic, sorted_eigen, spd_inverse, symmetrize};
use crate::xqda::{compute_covariances_fast, CrossViewDataset};
use crate::{Error, Result};

/// Eigenvalues below this fraction of the largest are treated as zero when
/// lifting Gram-matrix eigenvectors back to feature space.
const GRAM_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// Orthonormal columns, descending variance.
    pub basis: DMatrix<f64>,
    /// Variance captured by each basis column.
    pub variances: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `basisᵀ (x - mean)` for every column.
    pub fn project(&self, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Error::check_len(self.input_dim(), samples.nrows())?;
        let mut centered = samples.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        Ok(self.basis.transpose() * centered)
    }
}

/// Principal components of the columns of `samples`.
///
/// Uses the `d × d` covariance when `d <= N` and the `N × N` Gram matrix
/// otherwise, so very wide descriptors stay tractable.
pub fn pca_fit(samples: &DMatrix<f64>, p: usize) -> Result<PcaModel> {
    let (d, n) = samples.shape();
    if n < 2 {
        return Err(Error::invalid("PCA needs at least two samples"));
    }
    if p == 0 || p > d.min(n - 1) {
        return Err(Error::invalid(alloc::format!(
            "PCA dimension {p} outside 1..={}",
            d.min(n - 1)
        )));
    }
    let mean = samples.column_mean();
    let mut centered = samples.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let denom = (n - 1) as f64;

    let (variances, mut basis) = if d <= n {
        let mut cov = &centered * centered.transpose() / denom;
        symmetrize(&mut cov);
        let (values, vectors) = sorted_eigen(cov);
        (values.rows(0, p).iter().copied().collect::<Vec<_>>(), vectors.columns(0, p).into_owned())
    } else {
        let mut gram = centered.transpose() * &centered / denom;
        symmetrize(&mut gram);
        let (values, vectors) = sorted_eigen(gram);
        let top = values[0].max(0.0);
        let mut basis = DMatrix::zeros(d, p);
        for k in 0..p {
            let lambda = values[k];
            if lambda > GRAM_RANK_TOL * top && lambda > 0.0 {
                let lifted = &centered * vectors.column(k) / libm::sqrt(lambda * denom);
                basis.set_column(k, &lifted);
            }
        }
        (values.rows(0, p).iter().map(|v| v.max(0.0)).collect(), basis)
    };
    orthonormalize(&mut basis);
    Ok(PcaModel { mean, basis, variances })
}

/// Modified Gram-Schmidt; columns that vanish are replaced by the first
/// standard basis vectors that are not yet spanned.
fn orthonormalize(basis: &mut DMatrix<f64>) {
    let (d, p) = basis.shape();
    let mut fill = 0;
    for k in 0..p {
        for attempt in 0..=d {
            for j in 0..k {
                let proj = basis.column(j).dot(&basis.column(k));
                let prev = basis.column(j).into_owned();
                basis.column_mut(k).axpy(-proj, &prev, 1.0);
            }
            let norm = basis.column(k).norm();
            if norm > 1e-8 {
                basis.column_mut(k).unscale_mut(norm);
                break;
            }
            if attempt == d || fill >= d {
                break;
            }
            let mut e = DVector::zeros(d);
            e[fill] = 1.0;
            fill += 1;
            basis.set_column(k, &e);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Kissme,
    MahalanobisGenuine,
}

/// Quadratic metric `(x - z)ᵀ M (x - z)` evaluated after optional PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricModel {
    pub kind: MetricKind,
    pub pca: Option<PcaModel>,
    pub m: DMatrix<f64>,
    pub regularizer: f64,
}

impl MetricModel {
    pub fn input_dim(&self) -> usize {
        self.pca.as_ref().map_or(self.m.nrows(), PcaModel::input_dim)
    }

    fn reduce(&self, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.pca {
            Some(pca) => pca.project(samples),
            None => {
                Error::check_len(self.m.nrows(), samples.nrows())?;
                Ok(samples.clone())
            }
        }
    }

    pub fn distance(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        Error::check_len(self.input_dim(), x.len())?;
        Error::check_len(self.input_dim(), z.len())?;
        let px = self.reduce(&DMatrix::from_column_slice(x.len(), 1, x))?;
        let pz = self.reduce(&DMatrix::from_column_slice(z.len(), 1, z))?;
        let diff = px.column(0) - pz.column(0);
        Ok(diff.dot(&(&self.m * &diff)))
    }

    pub fn pairwise_scores(&self, probes: &DMatrix<f64>, gallery: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(pairwise_quadratic(&self.reduce(probes)?, &self.reduce(gallery)?, &self.m))
    }
}

fn pca_space(ds: &CrossViewDataset, p: Option<usize>) -> Result<(Option<PcaModel>, CrossViewDataset)> {
    match p {
        None => Ok((None, ds.clone())),
        Some(p) => {
            let joint = DMatrix::from_fn(ds.dim(), ds.x().ncols() + ds.z().ncols(), |r, c| {
                if c < ds.x().ncols() {
                    ds.x()[(r, c)]
                } else {
                    ds.z()[(r, c - ds.x().ncols())]
                }
            });
            let pca = pca_fit(&joint, p)?;
            let reduced = ds.map_features(|m| pca.project(m).expect("dimension checked"))?;
            Ok((Some(pca), reduced))
        }
    }
}

fn regularized(mut m: DMatrix<f64>, reg: f64) -> DMatrix<f64> {
    for k in 0..m.nrows() {
        m[(k, k)] += reg;
    }
    m
}

fn check_reg(reg: f64) -> Result<()> {
    if reg >= 0.0 && reg.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("regularizer must be finite and non-negative"))
    }
}

/// KISSME: `M = (Σ_I + reg·I)⁻¹ - (Σ_E + reg·I)⁻¹` in the PCA space fitted
/// on both views. `pca_dims = None` skips the PCA step.
pub fn train_kissme(ds: &CrossViewDataset, pca_dims: Option<usize>, reg: f64) -> Result<MetricModel> {
    check_reg(reg)?;
    let (pca, reduced) = pca_space(ds, pca_dims)?;
    let cov = compute_covariances_fast(&reduced)?;
    let mut m = spd_inverse(regularized(cov.sigma_i, reg), "regularized intrapersonal covariance")?
        - spd_inverse(regularized(cov.sigma_e, reg), "regularized extrapersonal covariance")?;
    symmetrize(&mut m);
    Ok(MetricModel { kind: MetricKind::Kissme, pca, m, regularizer: reg })
}

/// Mahalanobis metric from genuine pairs only: `M = (Σ_I + reg·I)⁻¹`.
pub fn train_mahalanobis_genuine(
    ds: &CrossViewDataset,
    pca_dims: Option<usize>,
    reg: f64,
) -> Result<MetricModel> {
    check_reg(reg)?;
    let (pca, reduced) = pca_space(ds, pca_dims)?;
    let cov = compute_covariances_fast(&reduced)?;
    let m = spd_inverse(regularized(cov.sigma_i, reg), "regularized intrapersonal covariance")?;
    Ok(MetricModel { kind: MetricKind::MahalanobisGenuine, pca, m, regularizer: reg })
}

/// Squared Euclidean distances between probe and gallery columns.
pub fn euclidean_scores(probes: &DMatrix<f64>, gallery: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Error::check_len(probes.nrows(), gallery.nrows())?;
    let sq_p: Vec<f64> = probes.column_iter().map(|c| c.dot(&c)).collect();
    let sq_g: Vec<f64> = gallery.column_iter().map(|c| c.dot(&c)).collect();
    Ok(DMatrix::from_fn(probes.ncols(), gallery.ncols(), |i, j| {
        (sq_p[i] + sq_g[j] - 2.0 * probes.column(i).dot(&gallery.column(j))).max(0.0)
    }))
}

/// `1 - cos(x, z)`; a zero vector has similarity 0 to everything.
pub fn cosine_scores(probes: &DMatrix<f64>, gallery: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Error::check_len(probes.nrows(), gallery.nrows())?;
    let norm_p: Vec<f64> = probes.column_iter().map(|c| c.norm()).collect();
    let norm_g: Vec<f64> = gallery.column_iter().map(|c| c.norm()).collect();
    Ok(DMatrix::from_fn(probes.ncols(), gallery.ncols(), |i, j| {
        let denom = norm_p[i] * norm_g[j];
        if denom > 0.0 {
            1.0 - probes.column(i).dot(&gallery.column(j)) / denom
        } else {
            1.0
        }
    }))
}
