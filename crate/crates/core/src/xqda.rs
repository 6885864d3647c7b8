//! Cross-view Quadratic Discriminant Analysis.
//!
//! Intrapersonal differences `x_i - z_j` (same identity) and extrapersonal
//! differences (different identities) are modelled as zero-mean Gaussians
//! with covariances `Σ_I` and `Σ_E`. XQDA picks the subspace `W` maximizing
//! `wᵀΣ_E w / wᵀΣ_I w` and learns the metric
//! `M' = (WᵀΣ_I W)⁻¹ - (WᵀΣ_E W)⁻¹` inside it.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::linalg::{pairwise_quadratic, sorted_eigen, spd_inverse, symmetrize};
use crate::{Error, Result};

/// Upper bound on explicitly enumerated pairs in the naive estimator.
pub const NAIVE_PAIR_LIMIT: usize = 1_000_000;

/// Two-view training data. Columns of `x` are view-1 samples labelled by
/// `y`; columns of `z` are view-2 samples labelled by `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossViewDataset {
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    y: Vec<usize>,
    l: Vec<usize>,
    classes: usize,
}

impl CrossViewDataset {
    pub fn new(x: DMatrix<f64>, z: DMatrix<f64>, y: Vec<usize>, l: Vec<usize>) -> Result<Self> {
        Error::check_len(x.nrows(), z.nrows())?;
        Error::check_len(x.ncols(), y.len())?;
        Error::check_len(z.ncols(), l.len())?;
        if x.nrows() == 0 {
            return Err(Error::dataset("feature dimension must be positive"));
        }
        if x.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(Error::dataset("features contain non-finite values"));
        }
        let mut in_x: Vec<usize> = y.clone();
        in_x.sort_unstable();
        in_x.dedup();
        let mut in_z: Vec<usize> = l.clone();
        in_z.sort_unstable();
        in_z.dedup();
        if in_x != in_z {
            return Err(Error::dataset("every identity must appear in both views"));
        }
        let classes = in_x.len();
        if classes < 2 {
            return Err(Error::dataset("at least two identities are required"));
        }
        Ok(Self { x, z, y, l, classes })
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn x_labels(&self) -> &[usize] {
        &self.y
    }

    pub fn z_labels(&self) -> &[usize] {
        &self.l
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Same dataset with both views mapped through `f` column by column.
    pub fn map_features(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Result<Self> {
        Self::new(f(&self.x), f(&self.z), self.y.clone(), self.l.clone())
    }

    /// Dense class index for each label, in ascending label order.
    fn class_index(&self) -> BTreeMap<usize, usize> {
        let mut ids: Vec<usize> = self.y.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePair {
    pub sigma_i: DMatrix<f64>,
    pub sigma_e: DMatrix<f64>,
    /// Number of intrapersonal pairs, `Σ_k n_k m_k`.
    pub n_i: usize,
    /// Number of extrapersonal pairs, `n m - n_I`.
    pub n_e: usize,
}

/// Covariances from class and global sums in `O(N d²)`.
pub fn compute_covariances_fast(ds: &CrossViewDataset) -> Result<CovariancePair> {
    let (d, n, m) = (ds.dim(), ds.x.ncols(), ds.z.ncols());
    let index = ds.class_index();
    let c = index.len();

    let mut n_k = alloc::vec![0usize; c];
    let mut m_k = alloc::vec![0usize; c];
    let x_class: Vec<usize> = ds.y.iter().map(|id| index[id]).collect();
    let z_class: Vec<usize> = ds.l.iter().map(|id| index[id]).collect();
    x_class.iter().for_each(|&k| n_k[k] += 1);
    z_class.iter().for_each(|&k| m_k[k] += 1);

    let n_i: usize = n_k.iter().zip(&m_k).map(|(a, b)| a * b).sum();
    let n_e = n * m - n_i;
    if n_e == 0 {
        return Err(Error::dataset("no extrapersonal pairs"));
    }

    // Columns scaled by the square root of the other view's class count.
    let mut x_tilde = ds.x.clone();
    for (j, &k) in x_class.iter().enumerate() {
        x_tilde.column_mut(j).scale_mut(libm::sqrt(m_k[k] as f64));
    }
    let mut z_tilde = ds.z.clone();
    for (j, &k) in z_class.iter().enumerate() {
        z_tilde.column_mut(j).scale_mut(libm::sqrt(n_k[k] as f64));
    }

    let mut s = DMatrix::<f64>::zeros(d, c);
    for (j, &k) in x_class.iter().enumerate() {
        let mut col = s.column_mut(k);
        col += ds.x.column(j);
    }
    let mut r = DMatrix::<f64>::zeros(d, c);
    for (j, &k) in z_class.iter().enumerate() {
        let mut col = r.column_mut(k);
        col += ds.z.column(j);
    }

    let s_rt = &s * r.transpose();
    let intra = &x_tilde * x_tilde.transpose() + &z_tilde * z_tilde.transpose()
        - &s_rt
        - s_rt.transpose();

    let s_all: DVector<f64> = s.column_sum();
    let r_all: DVector<f64> = r.column_sum();
    let sr = &s_all * r_all.transpose();
    let extra = (&ds.x * ds.x.transpose()) * m as f64 + (&ds.z * ds.z.transpose()) * n as f64
        - &sr
        - sr.transpose()
        - &intra;

    let mut sigma_i = intra / n_i as f64;
    let mut sigma_e = extra / n_e as f64;
    symmetrize(&mut sigma_i);
    symmetrize(&mut sigma_e);
    Ok(CovariancePair { sigma_i, sigma_e, n_i, n_e })
}

/// Covariances by explicit enumeration of every cross-view pair.
pub fn compute_covariances_naive(ds: &CrossViewDataset) -> Result<CovariancePair> {
    let (d, n, m) = (ds.dim(), ds.x.ncols(), ds.z.ncols());
    if n * m > NAIVE_PAIR_LIMIT {
        return Err(Error::invalid(alloc::format!(
            "{} pairs exceed the naive enumeration limit of {NAIVE_PAIR_LIMIT}",
            n * m
        )));
    }
    let mut sigma_i = DMatrix::<f64>::zeros(d, d);
    let mut sigma_e = DMatrix::<f64>::zeros(d, d);
    let (mut n_i, mut n_e) = (0usize, 0usize);
    let mut delta = DVector::<f64>::zeros(d);
    for i in 0..n {
        for j in 0..m {
            delta.copy_from(&ds.x.column(i));
            delta -= ds.z.column(j);
            if ds.y[i] == ds.l[j] {
                sigma_i.ger(1.0, &delta, &delta, 1.0);
                n_i += 1;
            } else {
                sigma_e.ger(1.0, &delta, &delta, 1.0);
                n_e += 1;
            }
        }
    }
    if n_e == 0 {
        return Err(Error::dataset("no extrapersonal pairs"));
    }
    sigma_i /= n_i as f64;
    sigma_e /= n_e as f64;
    Ok(CovariancePair { sigma_i, sigma_e, n_i, n_e })
}

#[derive(Debug, Clone, PartialEq)]
pub struct XqdaConfig {
    /// Added to the diagonal of `Σ_I`.
    pub regularizer: f64,
    pub max_dims: Option<usize>,
    /// Directions with generalized eigenvalue above this are kept.
    pub eigen_threshold: f64,
}

impl Default for XqdaConfig {
    fn default() -> Self {
        Self { regularizer: 0.001, max_dims: None, eigen_threshold: 1.0 }
    }
}

impl XqdaConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.regularizer.is_finite() || self.regularizer < 0.0 {
            return Err(Error::invalid("regularizer must be finite and non-negative"));
        }
        if self.max_dims == Some(0) {
            return Err(Error::invalid("max_dims must be at least 1"));
        }
        if self.eigen_threshold.is_nan() {
            return Err(Error::invalid("eigen threshold is NaN"));
        }
        Ok(())
    }

    /// Subspace size for a descending spectrum: eigenvalues above the
    /// threshold, capped by `max_dims`, never fewer than one.
    pub fn select_dims(&self, eigenvalues: &[f64]) -> usize {
        let above = eigenvalues.iter().take_while(|&&l| l > self.eigen_threshold).count();
        let capped = self.max_dims.map_or(above, |cap| above.min(cap));
        capped.clamp(1, eigenvalues.len().max(1))
    }
}

/// Full generalized eigendecomposition of `(Σ_E, Σ_I + reg·I)`, from which
/// models of any subspace size can be cut.
#[derive(Debug, Clone)]
pub struct XqdaSpectrum {
    /// Generalized eigenvectors as unit-norm columns, descending eigenvalue.
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    sigma_i: DMatrix<f64>,
    sigma_e: DMatrix<f64>,
    regularizer: f64,
}

impl XqdaSpectrum {
    /// Solves `Σ_E w = λ (Σ_I + reg·I) w` through the Cholesky factor
    /// `L` of the regularized `Σ_I`: the symmetric matrix `L⁻¹ Σ_E L⁻ᵀ`
    /// shares the eigenvalues, and `w = L⁻ᵀ u` maps its eigenvectors back.
    pub fn solve(cov: &CovariancePair, regularizer: f64) -> Result<Self> {
        let d = cov.sigma_i.nrows();
        let mut sigma_i = cov.sigma_i.clone();
        for k in 0..d {
            sigma_i[(k, k)] += regularizer;
        }
        let chol = Cholesky::new(sigma_i.clone()).ok_or_else(|| {
            Error::numeric(alloc::format!(
                "Cholesky factorization of the regularized intrapersonal covariance failed \
                 (regularizer {regularizer}); a regularizer such as 0.001 makes it definite"
            ))
        })?;
        let lower = chol.l();
        // Rounding in the covariance expansion can leave tiny positive pivots
        // where the matrix is really singular; treat those as failures too.
        let scale = (0..d).map(|k| sigma_i[(k, k)]).fold(0.0, f64::max);
        let floor = d as f64 * f64::EPSILON * scale;
        if (0..d).any(|k| lower[(k, k)] * lower[(k, k)] <= floor) {
            return Err(Error::numeric(alloc::format!(
                "regularized intrapersonal covariance is numerically singular \
                 (regularizer {regularizer}); a regularizer such as 0.001 makes it definite"
            )));
        }

        let mut half = cov.sigma_e.clone();
        if !lower.solve_lower_triangular_mut(&mut half) {
            return Err(Error::numeric("triangular solve against Σ_I failed"));
        }
        let mut reduced = half.transpose();
        if !lower.solve_lower_triangular_mut(&mut reduced) {
            return Err(Error::numeric("triangular solve against Σ_I failed"));
        }
        symmetrize(&mut reduced);

        let (values, mut basis) = sorted_eigen(reduced);
        if !lower.tr_solve_lower_triangular_mut(&mut basis) {
            return Err(Error::numeric("back-substitution of eigenvectors failed"));
        }
        for mut col in basis.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
        Ok(Self {
            basis,
            eigenvalues: values.iter().copied().collect(),
            sigma_i,
            sigma_e: cov.sigma_e.clone(),
            regularizer,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Regularized intrapersonal covariance.
    pub fn sigma_i(&self) -> &DMatrix<f64> {
        &self.sigma_i
    }

    pub fn sigma_e(&self) -> &DMatrix<f64> {
        &self.sigma_e
    }

    /// Model on the leading `r` directions.
    pub fn model(&self, r: usize) -> Result<XqdaModel> {
        if r == 0 || r > self.eigenvalues.len() {
            return Err(Error::invalid(alloc::format!(
                "subspace size {r} outside 1..={}",
                self.eigenvalues.len()
            )));
        }
        let w = self.basis.columns(0, r).into_owned();
        let wt = w.transpose();
        let proj_i = &wt * &self.sigma_i * &w;
        let proj_e = &wt * &self.sigma_e * &w;
        let mut m_prime = spd_inverse(proj_i, "projected intrapersonal covariance")?
            - spd_inverse(proj_e, "projected extrapersonal covariance")?;
        symmetrize(&mut m_prime);
        Ok(XqdaModel {
            w,
            m_prime,
            eigenvalues: self.eigenvalues[..r].to_vec(),
            regularizer: self.regularizer,
        })
    }
}

/// Generalized spectrum of a training set, solved in the span of its samples
/// when that span is smaller than the feature space.
///
/// Both covariances are built from sample differences, so off the span the
/// regularized problem only has λ = 0; every direction with λ > 0 lies in
/// the span and is recovered exactly by the reduced solve.
#[derive(Debug, Clone)]
pub struct SpanSpectrum {
    /// Orthonormal basis (`d × k`) of the sample span, if a reduction was made.
    pub span: Option<DMatrix<f64>>,
    pub spectrum: XqdaSpectrum,
}

impl SpanSpectrum {
    pub fn solve(ds: &CrossViewDataset, regularizer: f64) -> Result<Self> {
        let (nx, nz) = (ds.x().ncols(), ds.z().ncols());
        if ds.dim() <= nx + nz {
            let spectrum = XqdaSpectrum::solve(&compute_covariances_fast(ds)?, regularizer)?;
            return Ok(Self { span: None, spectrum });
        }
        let mut joint = DMatrix::zeros(ds.dim(), nx + nz);
        joint.columns_mut(0, nx).copy_from(ds.x());
        joint.columns_mut(nx, nz).copy_from(ds.z());
        let q = joint.qr().q();
        let qt = q.transpose();
        let reduced = ds.map_features(|m| &qt * m)?;
        let spectrum = XqdaSpectrum::solve(&compute_covariances_fast(&reduced)?, regularizer)?;
        Ok(Self { span: Some(q), spectrum })
    }

    /// Number of available directions.
    pub fn len(&self) -> usize {
        self.spectrum.eigenvalues().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Model on the leading `r` directions, expressed in the input space.
    pub fn model(&self, r: usize) -> Result<XqdaModel> {
        let model = self.spectrum.model(r)?;
        match &self.span {
            None => Ok(model),
            Some(q) => XqdaModel::from_parts(q * model.w, model.m_prime, model.eigenvalues, model.regularizer),
        }
    }
}

pub fn train_xqda(ds: &CrossViewDataset, cfg: &XqdaConfig) -> Result<XqdaModel> {
    cfg.validate()?;
    if ds.dim() < 2 {
        return Err(Error::dataset("XQDA needs feature dimension >= 2"));
    }
    let solved = SpanSpectrum::solve(ds, cfg.regularizer)?;
    solved.model(cfg.select_dims(solved.spectrum.eigenvalues()))
}

/// Learned subspace `W` (d × r) and metric kernel `M'` (r × r).
#[derive(Debug, Clone, PartialEq)]
pub struct XqdaModel {
    w: DMatrix<f64>,
    m_prime: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    regularizer: f64,
}

impl XqdaModel {
    /// Reassembles a model, e.g. after deserialization.
    pub fn from_parts(
        w: DMatrix<f64>,
        m_prime: DMatrix<f64>,
        eigenvalues: Vec<f64>,
        regularizer: f64,
    ) -> Result<Self> {
        let r = w.ncols();
        if r == 0 || w.nrows() == 0 {
            return Err(Error::invalid("empty projection basis"));
        }
        Error::check_len(r, m_prime.nrows())?;
        Error::check_len(r, m_prime.ncols())?;
        Error::check_len(r, eigenvalues.len())?;
        Ok(Self { w, m_prime, eigenvalues, regularizer })
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn m_prime(&self) -> &DMatrix<f64> {
        &self.m_prime
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn regularizer(&self) -> f64 {
        self.regularizer
    }

    /// `Wᵀ v`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        Error::check_len(self.input_dim(), v.len())?;
        Ok((0..self.subspace_dim()).map(|k| self.w.column(k).iter().zip(v).map(|(a, b)| a * b).sum()).collect())
    }

    /// `(x - z)ᵀ W M' Wᵀ (x - z)`. Not necessarily non-negative.
    pub fn distance(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        Error::check_len(self.input_dim(), x.len())?;
        Error::check_len(self.input_dim(), z.len())?;
        let diff: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
        let p = DVector::from_vec(self.project(&diff)?);
        Ok(p.dot(&(&self.m_prime * &p)))
    }

    /// Distances between every probe column and every gallery column.
    pub fn pairwise_distances(
        &self,
        probes: &DMatrix<f64>,
        gallery: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        Error::check_len(self.input_dim(), probes.nrows())?;
        Error::check_len(self.input_dim(), gallery.nrows())?;
        let wt = self.w.transpose();
        Ok(pairwise_quadratic(&(&wt * probes), &(&wt * gallery), &self.m_prime))
    }
}
