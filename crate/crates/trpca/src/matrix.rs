//! Shared numeric types and small dense-matrix helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Data matrix with `n` observations as rows and `p` coordinates as columns.
pub type DataMatrix = DMatrix<f64>;

/// Column-wise arithmetic mean of `x`.
pub fn column_mean(x: &DataMatrix) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_fn(x.ncols(), |j, _| x.column(j).sum() / n)
}

/// Column-wise median of `x`. For an even number of rows the two middle
/// order statistics are averaged.
pub fn column_median(x: &DataMatrix) -> DVector<f64> {
    let n = x.nrows();
    assert!(n > 0, "median of an empty matrix");
    DVector::from_fn(x.ncols(), |j, _| {
        let mut col: Vec<f64> = x.column(j).iter().copied().collect();
        col.sort_by(f64::total_cmp);
        if n % 2 == 1 {
            col[n / 2]
        } else {
            0.5 * (col[n / 2 - 1] + col[n / 2])
        }
    })
}

/// Mean of the rows of `x` selected by `indices`.
pub fn mean_of_rows(x: &DataMatrix, indices: &[usize]) -> DVector<f64> {
    let mut acc = DVector::zeros(x.ncols());
    for j in 0..x.ncols() {
        let column = x.column(j);
        acc[j] = indices.iter().map(|&i| column[i]).sum::<f64>() / indices.len() as f64;
    }
    acc
}

/// Errors out if `x` contains a NaN or infinity.
pub fn ensure_finite(name: &str, x: &DataMatrix) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{name} contains NaN or infinity")))
    }
}

/// Builds an `n x p` matrix from parsed rows, checking shape consistency.
pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<DataMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Dimension("matrix with zero rows".into()));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Dimension("ragged rows".into()));
    }
    Ok(DataMatrix::from_row_iterator(
        n,
        p,
        rows.into_iter().flatten(),
    ))
}
