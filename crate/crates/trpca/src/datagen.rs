//! Synthetic contaminated datasets and a generic true/outlier mixer.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::stiefel::{random_frame_from, Frame};

/// Parameters shared by the synthetic generators.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub n: usize,
    pub p: usize,
    /// True subspace dimension.
    pub k: usize,
    /// Standard deviation of the Gaussian noise on true rows.
    pub sigma_t: f64,
    /// Outlier scale.
    pub sigma_o: f64,
    /// Outlier fraction `o / n` in `[0, 0.5)`.
    pub lambda: f64,
    pub seed: u64,
}

impl GeneratorParams {
    /// Number of outlier rows, `floor(lambda * n)`. A tiny slack guards the
    /// floor against binary round-off of products like `0.3 * 200`.
    pub fn outlier_count(&self) -> usize {
        (self.lambda * self.n as f64 + 1e-9).floor() as usize
    }

    /// Number of true rows, `n - outlier_count()`.
    pub fn true_count(&self) -> usize {
        self.n - self.outlier_count()
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in [0, 0.5), got {}",
                self.lambda
            )));
        }
        if self.k == 0 || self.k >= self.p {
            return Err(Error::InvalidParameter(format!(
                "k must satisfy 1 <= k < p, got k={}, p={}",
                self.k, self.p
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if !(self.sigma_t.is_finite() && self.sigma_t >= 0.0)
            || !(self.sigma_o.is_finite() && self.sigma_o >= 0.0)
        {
            return Err(Error::InvalidParameter(
                "sigma_t and sigma_o must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    fn provenance_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("n".into(), self.n.to_string()),
            ("p".into(), self.p.to_string()),
            ("k".into(), self.k.to_string()),
            ("sigma_t".into(), format!("{:e}", self.sigma_t)),
            ("sigma_o".into(), format!("{:e}", self.sigma_o)),
            ("lambda".into(), format!("{:e}", self.lambda)),
            ("outliers".into(), self.outlier_count().to_string()),
        ]
    }
}

/// How a dataset was produced: generator name, parameters, seed, notes.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub generator: String,
    pub parameters: Vec<(String, String)>,
    pub seed: u64,
    pub notes: Vec<String>,
}

/// A shuffled union of true rows and outlier rows with ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminatedDataset {
    pub x: DataMatrix,
    /// `labels[i]` is true iff row `i` comes from the true block.
    pub labels: Vec<bool>,
    /// Number of true rows.
    pub t_true: usize,
    /// Center of the generating subspace, when known.
    pub true_center: Option<DVector<f64>>,
    /// Basis of the generating subspace, when known.
    pub true_basis: Option<Frame>,
    /// Half-space normal of the Data2 outliers, when applicable.
    pub halfspace_normal: Option<DVector<f64>>,
    pub provenance: Provenance,
}

impl ContaminatedDataset {
    /// Rows labelled true, in their order of appearance in `x`.
    pub fn true_rows(&self) -> DataMatrix {
        self.select_rows(true)
    }

    /// Rows labelled outlier, in their order of appearance in `x`.
    pub fn outlier_rows(&self) -> DataMatrix {
        self.select_rows(false)
    }

    fn select_rows(&self, wanted: bool) -> DataMatrix {
        let idx: Vec<usize> = (0..self.x.nrows())
            .filter(|&i| self.labels[i] == wanted)
            .collect();
        DataMatrix::from_fn(idx.len(), self.x.ncols(), |i, j| self.x[(idx[i], j)])
    }
}

/// Noisy rows on a random subspace: `T = A U^T + E` with `A` uniform on
/// `[-1, 1]` and `E` Gaussian with standard deviation `sigma_t`.
fn true_block<R: Rng + ?Sized>(
    params: &GeneratorParams,
    rng: &mut R,
) -> Result<(DataMatrix, Frame)> {
    let t = params.true_count();
    let basis = random_frame_from(params.p, params.k, rng)?;
    let coeffs = DMatrix::from_fn(t, params.k, |_, _| rng.random_range(-1.0..=1.0));
    let mut block = coeffs * basis.matrix().transpose();
    for v in block.iter_mut() {
        let noise: f64 = StandardNormal.sample(rng);
        *v += params.sigma_t * noise;
    }
    Ok((block, basis))
}

/// Shuffles `[T; O]` with a seeded permutation and records labels.
fn assemble(
    true_block: DataMatrix,
    outlier_block: DataMatrix,
    rng: &mut ChaCha8Rng,
) -> (DataMatrix, Vec<bool>) {
    let t = true_block.nrows();
    let n = t + outlier_block.nrows();
    let p = true_block.ncols();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let x = DataMatrix::from_fn(n, p, |i, j| {
        let src = perm[i];
        if src < t {
            true_block[(src, j)]
        } else {
            outlier_block[(src - t, j)]
        }
    });
    let labels = perm.iter().map(|&src| src < t).collect();
    (x, labels)
}

/// Data1: true rows near a random subspace, outliers uniform on
/// `[0, sigma_o]^p`.
pub fn gen_data1(params: &GeneratorParams) -> Result<ContaminatedDataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (block_t, basis) = true_block(params, &mut rng)?;
    let o = params.outlier_count();
    let block_o = DMatrix::from_fn(o, params.p, |_, _| rng.random_range(0.0..=params.sigma_o));
    let (x, labels) = assemble(block_t, block_o, &mut rng);
    Ok(ContaminatedDataset {
        x,
        labels,
        t_true: params.true_count(),
        true_center: Some(DVector::zeros(params.p)),
        true_basis: Some(basis),
        halfspace_normal: None,
        provenance: Provenance {
            generator: "data1".into(),
            parameters: params.provenance_pairs(),
            seed: params.seed,
            notes: vec![],
        },
    })
}

/// Removes the positive part of the component of `x` along `w`.
fn drop_positive_halfspace(x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let along = x.dot(w).max(0.0);
    x - w * along
}

/// Data2: true rows as in Data1 but scaled by `0.5`; outliers are Gaussian
/// samples reflected out of a random half-space, so `<o_i, w> <= 0`.
pub fn gen_data2(params: &GeneratorParams) -> Result<ContaminatedDataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (block_t, basis) = true_block(params, &mut rng)?;
    let block_t = block_t * 0.5;

    let mut w = DVector::from_fn(params.p, |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v
    });
    let norm = w.norm();
    if norm > 0.0 {
        w /= norm;
    } else {
        w[0] = 1.0;
    }

    let o = params.outlier_count();
    let mut block_o = DMatrix::zeros(o, params.p);
    for i in 0..o {
        let sample = DVector::from_fn(params.p, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            params.sigma_o * v
        });
        block_o.set_row(i, &drop_positive_halfspace(&sample, &w).transpose());
    }

    let (x, labels) = assemble(block_t, block_o, &mut rng);
    Ok(ContaminatedDataset {
        x,
        labels,
        t_true: params.true_count(),
        true_center: Some(DVector::zeros(params.p)),
        true_basis: Some(basis),
        halfspace_normal: Some(w),
        provenance: Provenance {
            generator: "data2".into(),
            parameters: params.provenance_pairs(),
            seed: params.seed,
            notes: vec!["true block scaled by 0.5 after noise addition".into()],
        },
    })
}

/// Which synthetic generator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Data1,
    Data2,
}

impl GeneratorKind {
    pub fn generate(self, params: &GeneratorParams) -> Result<ContaminatedDataset> {
        match self {
            GeneratorKind::Data1 => gen_data1(params),
            GeneratorKind::Data2 => gen_data2(params),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Data1 => "data1",
            GeneratorKind::Data2 => "data2",
        }
    }
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "data1" => Ok(GeneratorKind::Data1),
            "data2" => Ok(GeneratorKind::Data2),
            other => Err(Error::InvalidParameter(format!(
                "unknown generator '{other}' (expected data1 or data2)"
            ))),
        }
    }
}

/// Shuffles user-supplied true and outlier blocks into a labelled dataset.
/// The subspace truth is unknown here; only the label split is recorded.
pub fn mix(block_t: &DataMatrix, block_o: &DataMatrix, seed: u64) -> Result<ContaminatedDataset> {
    if block_o.nrows() > 0 && block_t.ncols() != block_o.ncols() {
        return Err(Error::Dimension(format!(
            "true block has {} columns but outlier block has {}",
            block_t.ncols(),
            block_o.ncols()
        )));
    }
    if block_t.nrows() == 0 {
        return Err(Error::InvalidParameter("true block is empty".into()));
    }
    let mut notes = Vec::new();
    if block_o.nrows() > block_t.nrows() {
        notes.push(format!(
            "outlier block ({} rows) outnumbers true block ({} rows); breakdown assumption violated",
            block_o.nrows(),
            block_t.nrows()
        ));
    }
    let o = if block_o.nrows() == 0 {
        DMatrix::zeros(0, block_t.ncols())
    } else {
        block_o.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x, labels) = assemble(block_t.clone(), o, &mut rng);
    Ok(ContaminatedDataset {
        x,
        labels,
        t_true: block_t.nrows(),
        true_center: None,
        true_basis: None,
        halfspace_normal: None,
        provenance: Provenance {
            generator: "mix".into(),
            parameters: vec![
                ("true_rows".into(), block_t.nrows().to_string()),
                ("outlier_rows".into(), block_o.nrows().to_string()),
            ],
            seed,
            notes,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit;

    fn base_params(seed: u64) -> GeneratorParams {
        GeneratorParams {
            n: 200,
            p: 100,
            k: 5,
            sigma_t: 0.05,
            sigma_o: 2.0,
            lambda: 0.3,
            seed,
        }
    }

    #[test]
    fn data1_row_split_matches_floor_rule() {
        let ds = gen_data1(&base_params(0)).unwrap();
        assert_eq!(ds.t_true, 140);
        assert_eq!(ds.labels.iter().filter(|&&l| l).count(), 140);
        assert_eq!(ds.labels.iter().filter(|&&l| !l).count(), 60);
    }

    #[test]
    fn data1_outlier_entries_stay_in_range() {
        let ds = gen_data1(&base_params(1)).unwrap();
        let o = ds.outlier_rows();
        assert!(o.iter().all(|&v| (0.0..=2.0).contains(&v)));
    }

    #[test]
    fn data1_noiseless_rows_lie_in_the_true_span() {
        let params = GeneratorParams {
            sigma_t: 0.0,
            lambda: 0.0,
            n: 50,
            p: 12,
            ..base_params(7)
        };
        let ds = gen_data1(&params).unwrap();
        let model = fit::SubspaceModel::new(
            ds.true_center.clone().unwrap(),
            ds.true_basis.clone().unwrap(),
        )
        .unwrap();
        let res = fit::residuals(&ds.x, &model).unwrap();
        assert!(res.values().iter().all(|&v| v <= 1e-12));
    }

    #[test]
    fn data1_outlier_mean_is_near_half_sigma() {
        let params = GeneratorParams {
            n: 10_000,
            p: 20,
            lambda: 0.45,
            ..base_params(3)
        };
        let ds = gen_data1(&params).unwrap();
        let o = ds.outlier_rows();
        let mean = o.iter().sum::<f64>() / (o.nrows() * o.ncols()) as f64;
        assert!((mean - 1.0).abs() <= 0.02 * 2.0, "mean {mean}");
    }

    #[test]
    fn data2_outliers_avoid_the_positive_halfspace() {
        let params = GeneratorParams {
            sigma_o: 0.35,
            ..base_params(5)
        };
        let ds = gen_data2(&params).unwrap();
        assert_eq!(ds.t_true, 140);
        let w = ds.halfspace_normal.clone().unwrap();
        let o = ds.outlier_rows();
        for i in 0..o.nrows() {
            assert!(o.row(i).transpose().dot(&w) <= 1e-12);
        }
    }

    #[test]
    fn data2_leaves_nonpositive_samples_unchanged() {
        let w = DVector::from_vec(vec![1.0, 0.0]);
        let x = DVector::from_vec(vec![-2.0, 3.0]);
        assert_eq!(drop_positive_halfspace(&x, &w), x);
        let y = DVector::from_vec(vec![2.0, 3.0]);
        assert_eq!(
            drop_positive_halfspace(&y, &w),
            DVector::from_vec(vec![0.0, 3.0])
        );
    }

    #[test]
    fn data2_true_block_is_downscaled() {
        let clean = GeneratorParams {
            sigma_t: 0.0,
            lambda: 0.0,
            n: 30,
            p: 8,
            k: 2,
            ..base_params(9)
        };
        let d1 = gen_data1(&clean).unwrap();
        let d2 = gen_data2(&clean).unwrap();
        // Same seed, same block draws; the shuffle differs, so compare rows
        // in a canonical order: Data2 rows are exactly half the Data1 rows.
        let sorted_rows = |x: &DataMatrix| -> Vec<Vec<f64>> {
            let mut rows: Vec<Vec<f64>> = (0..x.nrows())
                .map(|i| x.row(i).iter().copied().collect())
                .collect();
            rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
            rows
        };
        let half: Vec<Vec<f64>> = sorted_rows(&d1.x)
            .into_iter()
            .map(|r| r.into_iter().map(|v| v * 0.5).collect())
            .collect();
        assert_eq!(sorted_rows(&d2.x), half);
    }

    #[test]
    fn labels_recover_the_true_block_exactly() {
        let params = base_params(13);
        let ds = gen_data1(&params).unwrap();
        let t = ds.true_rows();
        assert_eq!(t.nrows(), ds.t_true);
        // Regenerate with the same seed and compare as multisets of rows.
        let ds2 = gen_data1(&params).unwrap();
        assert_eq!(ds.x, ds2.x);
        assert_eq!(ds.labels, ds2.labels);
    }

    #[test]
    fn mix_with_empty_outliers_is_a_permutation() {
        let t = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let o = DMatrix::zeros(0, 2);
        let ds = mix(&t, &o, 4).unwrap();
        assert!(ds.labels.iter().all(|&l| l));
        let mut rows: Vec<Vec<f64>> = (0..3)
            .map(|i| ds.x.row(i).iter().copied().collect())
            .collect();
        rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
    }

    #[test]
    fn mix_counts_and_determinism() {
        let t = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let o = DMatrix::from_row_slice(1, 2, &[9.0, 9.0]);
        let a = mix(&t, &o, 8).unwrap();
        assert_eq!(a.x.nrows(), 4);
        assert_eq!(a.labels.iter().filter(|&&l| l).count(), 3);
        let b = mix(&t, &o, 8).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn mix_true_labels_recover_the_true_block_exactly() {
        let t = DMatrix::from_row_slice(4, 2, &[0.25, -1.0, 0.5, 3.0, 0.75, 0.125, 1.0, -2.5]);
        let o = DMatrix::from_row_slice(2, 2, &[9.0, 9.0, -9.0, 9.0]);
        let ds = mix(&t, &o, 21).unwrap();
        let recovered = ds.true_rows();
        let sort_rows = |x: &DataMatrix| -> Vec<Vec<f64>> {
            let mut rows: Vec<Vec<f64>> = (0..x.nrows())
                .map(|i| x.row(i).iter().copied().collect())
                .collect();
            rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
            rows
        };
        assert_eq!(sort_rows(&recovered), sort_rows(&t));
    }

    #[test]
    fn mix_rejects_column_mismatch() {
        let t = DMatrix::zeros(3, 2);
        let o = DMatrix::zeros(1, 3);
        assert!(mix(&t, &o, 0).is_err());
    }

    #[test]
    fn mix_notes_when_outliers_dominate() {
        let t = DMatrix::zeros(2, 2);
        let o = DMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let ds = mix(&t, &o, 0).unwrap();
        assert!(!ds.provenance.notes.is_empty());
    }

    #[test]
    fn generator_params_reject_bad_lambda() {
        let mut p = base_params(0);
        p.lambda = 0.5;
        assert!(gen_data1(&p).is_err());
        p.lambda = -0.1;
        assert!(gen_data1(&p).is_err());
    }
}
