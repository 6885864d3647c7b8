use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Inverse of a symmetric positive definite matrix.
pub(crate) fn spd_inverse(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let mut inv = Cholesky::new(m)
        .ok_or_else(|| Error::numeric(alloc::format!("{what} is not positive definite")))?
        .inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Scores `(p_i - g_j)^T M (p_i - g_j)` for already projected columns,
/// expanded as `p^T M p + g^T M g - 2 p^T M g`.
///
/// Every term is a plain dot product against `M p` or `M g`, so passing the
/// same matrix as probes and gallery yields an exactly zero diagonal.
pub(crate) fn pairwise_quadratic(
    probes: &DMatrix<f64>,
    gallery: &DMatrix<f64>,
    metric: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mp = metric * probes;
    let mg = metric * gallery;
    let self_p: Vec<f64> = (0..probes.ncols()).map(|i| probes.column(i).dot(&mp.column(i))).collect();
    let self_g: Vec<f64> =
        (0..gallery.ncols()).map(|j| gallery.column(j).dot(&mg.column(j))).collect();
    DMatrix::from_fn(probes.ncols(), gallery.ncols(), |i, j| {
        let cross = probes.column(i).dot(&mg.column(j));
        self_p[i] + self_g[j] - 2.0 * cross
    })
}
