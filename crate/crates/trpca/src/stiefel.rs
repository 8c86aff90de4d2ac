//! Orthonormal k-frames: polar decomposition, random sampling, validation.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Frobenius-norm tolerance for `U^T U = I`.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// A `p x k` matrix with orthonormal columns (`k <= p`).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    matrix: DMatrix<f64>,
}

impl Frame {
    /// Wraps `matrix`, verifying `k <= p` and `||U^T U - I||_F <= 1e-10`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (p, k) = (matrix.nrows(), matrix.ncols());
        if k == 0 || p == 0 {
            return Err(Error::Dimension("frame must be non-empty".into()));
        }
        if k > p {
            return Err(Error::Dimension(format!(
                "frame needs k <= p, got p={p}, k={k}"
            )));
        }
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("frame entries".into()));
        }
        let defect = orthonormality_defect(&matrix);
        if defect > ORTHONORMALITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "columns are not orthonormal: ||U^T U - I||_F = {defect:.3e}"
            )));
        }
        Ok(Frame { matrix })
    }

    /// Ambient dimension `p`.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of columns `k`.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Orthogonal projector `U U^T` onto the column span.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.matrix * self.matrix.transpose()
    }
}

/// `||U^T U - I||_F` for an arbitrary matrix.
pub fn orthonormality_defect(matrix: &DMatrix<f64>) -> f64 {
    let k = matrix.ncols();
    let gram = matrix.transpose() * matrix;
    (gram - DMatrix::<f64>::identity(k, k)).norm()
}

fn check_polar_input(g: &DMatrix<f64>) -> Result<()> {
    let (p, k) = (g.nrows(), g.ncols());
    if k == 0 || p == 0 {
        return Err(Error::Dimension("polar of an empty matrix".into()));
    }
    if k > p {
        return Err(Error::Dimension(format!(
            "polar needs k <= p, got p={p}, k={k}"
        )));
    }
    if !g.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("polar input".into()));
    }
    Ok(())
}

/// Thin SVD `G = W S V^T`; returns `(W V^T, sum of singular values)`.
fn polar_factor(g: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    check_polar_input(g)?;
    let svd = g.clone().svd(true, true);
    let w = svd
        .u
        .ok_or_else(|| Error::NonFinite("SVD factor U".into()))?;
    let vt = svd
        .v_t
        .ok_or_else(|| Error::NonFinite("SVD factor V^T".into()))?;
    Ok((w * vt, svd.singular_values.sum()))
}

/// Orthonormal factor of the polar decomposition `G = Q P`.
///
/// Computed from the thin SVD, so `Q` is orthonormal for any `G` with
/// `k <= p`, including rank-deficient inputs.
pub fn polar(g: &DMatrix<f64>) -> Result<Frame> {
    let (q, _) = polar_factor(g)?;
    Frame::new(q)
}

/// Minimizes `<G, U>` over orthonormal `U`.
///
/// Returns the minimizer `-Polar(G)` together with the attained value,
/// which equals minus the sum of the singular values of `G`.
pub fn stiefel_min_linear(g: &DMatrix<f64>) -> Result<(Frame, f64)> {
    let (q, sigma_sum) = polar_factor(g)?;
    Ok((Frame::new(-q)?, -sigma_sum))
}

/// Haar-distributed orthonormal `p x k` frame, deterministic in `seed`.
pub fn random_frame(p: usize, k: usize, seed: u64) -> Result<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_frame_from(p, k, &mut rng)
}

/// As [`random_frame`], drawing from a caller-supplied generator.
///
/// A Gaussian matrix is orthonormalized by QR; the sign of each column is
/// fixed so the triangular factor has a non-negative diagonal, which makes
/// the output independent of the factorization's sign convention.
pub fn random_frame_from<R: Rng + ?Sized>(p: usize, k: usize, rng: &mut R) -> Result<Frame> {
    if k == 0 || p == 0 || k > p {
        return Err(Error::Dimension(format!(
            "random frame needs 1 <= k <= p, got p={p}, k={k}"
        )));
    }
    let gauss: DMatrix<f64> = DMatrix::from_fn(p, k, |_, _| StandardNormal.sample(rng));
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Frame::new(q)
}
