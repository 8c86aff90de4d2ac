//! Standard PCA baseline and the true-data oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::datagen::ContaminatedDataset;
use crate::error::{Error, Result};
use crate::fit::SubspaceModel;
use crate::matrix::{self, DataMatrix};
use crate::stiefel::Frame;

/// Least-squares subspace: column mean plus the top eigenvectors of the
/// empirical covariance (1/n normalization), with their eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub center: DVector<f64>,
    pub basis: Frame,
    /// Leading covariance eigenvalues, non-increasing, length `k`.
    pub spectrum: Vec<f64>,
}

impl PcaModel {
    pub fn subspace_model(&self) -> SubspaceModel {
        SubspaceModel::new(self.center.clone(), self.basis.clone())
            .expect("PCA model dimensions are consistent")
    }
}

/// Flips eigenvector signs so the first non-negligible entry is positive.
fn fix_sign(basis: &mut DMatrix<f64>) {
    for mut col in basis.column_iter_mut() {
        if let Some(lead) = col.iter().find(|v| v.abs() > 1e-12) {
            if *lead < 0.0 {
                col.neg_mut();
            }
        }
    }
}

fn sorted_eigenpairs(sym: SymmetricEigen<f64, nalgebra::Dyn>) -> (Vec<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..sym.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| sym.eigenvalues[b].total_cmp(&sym.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| sym.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(sym.eigenvectors.nrows(), order.len(), |i, j| {
        sym.eigenvectors[(i, order[j])]
    });
    (values, vectors)
}

fn centered(x: &DataMatrix, center: &DVector<f64>) -> DataMatrix {
    crate::fit::center_columns(x, center)
}

/// Top-`k` eigenpairs of the covariance via the `p x p` eigenproblem.
fn covariance_eigen(xc: &DataMatrix, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = xc.nrows() as f64;
    let cov = xc.transpose() * xc / n;
    let (values, vectors) = sorted_eigenpairs(SymmetricEigen::new(cov));
    (values[..k].to_vec(), vectors.columns(0, k).into_owned())
}

/// Top-`k` eigenpairs via the `n x n` Gram matrix; valid when the leading
/// eigenvalues are safely positive. `C (X^T v) = lambda (X^T v)` whenever
/// `(X X^T / n) v = lambda v`.
fn gram_eigen(xc: &DataMatrix, k: usize) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let n = xc.nrows() as f64;
    let gram = xc * xc.transpose() / n;
    let (values, vectors) = sorted_eigenpairs(SymmetricEigen::new(gram));
    let floor = values[0].abs().max(1.0) * 1e-9;
    if values.len() < k || values[..k].iter().any(|&l| l <= floor) {
        return None;
    }
    let mut basis = DMatrix::zeros(xc.ncols(), k);
    for (j, &value) in values.iter().enumerate().take(k) {
        let u = xc.transpose() * vectors.column(j) / (n * value).sqrt();
        basis.set_column(j, &u);
    }
    Some((values[..k].to_vec(), basis))
}

/// Standard PCA: minimizes the mean squared reconstruction error over all
/// centers and orthonormal rank-`k` bases.
pub fn pca_fit(x: &DataMatrix, k: usize) -> Result<PcaModel> {
    matrix::ensure_finite("data", x)?;
    let (n, p) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "PCA needs n >= 2 rows, got {n}"
        )));
    }
    if k == 0 || k >= p {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k < p, got k={k}, p={p}"
        )));
    }

    let center = matrix::column_mean(x);
    let xc = centered(x, &center);

    // The Gram route solves an n x n problem instead of p x p; fall back to
    // the covariance route when trailing eigenvalues make it ill-posed.
    let (spectrum, mut basis) = if p > n {
        gram_eigen(&xc, k).unwrap_or_else(|| covariance_eigen(&xc, k))
    } else {
        covariance_eigen(&xc, k)
    };
    fix_sign(&mut basis);

    Ok(PcaModel {
        center,
        basis: Frame::new(basis)?,
        spectrum,
    })
}

/// PCA of the true rows only: the ground-truth reference `{m_T, U_T}`.
pub fn true_pca(dataset: &ContaminatedDataset, k: usize) -> Result<PcaModel> {
    pca_fit(&dataset.true_rows(), k)
}
