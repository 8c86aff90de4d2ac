//! Evaluation metrics, the contamination sweep harness, and the
//! background/foreground decomposition.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::datagen::{ContaminatedDataset, GeneratorKind, GeneratorParams};
use crate::error::{Error, Result};
use crate::fit::{self, FitOptions, SubspaceModel, TrimmedSpec};
use crate::matrix::DataMatrix;
use crate::pca::{self, PcaModel};
use crate::stiefel::Frame;

/// Excess reconstruction error of `model` on the true rows, relative to the
/// oracle fitted on the true rows alone. Analytically non-negative; the raw
/// value is returned (tiny negatives can arise from solver tolerance).
pub fn tre(model: &SubspaceModel, dataset: &ContaminatedDataset, oracle: &PcaModel) -> Result<f64> {
    if model.rank() != oracle.basis.cols() {
        return Err(Error::Dimension(format!(
            "model has k={} but oracle has k={}",
            model.rank(),
            oracle.basis.cols()
        )));
    }
    let true_rows = dataset.true_rows();
    let r_model = fit::residuals(&true_rows, model)?;
    let r_oracle = fit::residuals(&true_rows, &oracle.subspace_model())?;
    let total: f64 = r_model
        .values()
        .iter()
        .zip(r_oracle.values())
        .map(|(a, b)| a - b)
        .sum();
    Ok(total / dataset.t_true as f64)
}

/// Canonical angles between the spans of `a` and `b`, ascending in
/// `[0, pi/2]`: arccos of the singular values of `A^T B` clamped to `[0, 1]`.
pub fn principal_angles(a: &Frame, b: &Frame) -> Result<Vec<f64>> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Dimension(format!(
            "frames are {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let product = a.matrix().transpose() * b.matrix();
    let mut sigmas: Vec<f64> = product
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sigmas.sort_by(|x, y| y.total_cmp(x));
    Ok(sigmas
        .into_iter()
        .map(|s| s.clamp(0.0, 1.0).acos())
        .collect())
}

/// Estimators compared by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMethod {
    /// TRPCA with the ground-truth `t = |T|`.
    Trpca,
    /// TRPCA with the default `t = ceil(n/2)`.
    TrpcaDefaultT,
    /// Standard PCA on all rows.
    Pca,
}

impl SweepMethod {
    pub fn name(self) -> &'static str {
        match self {
            SweepMethod::Trpca => "trpca",
            SweepMethod::TrpcaDefaultT => "trpca_default_t",
            SweepMethod::Pca => "pca",
        }
    }

    pub const ALL: [SweepMethod; 3] = [
        SweepMethod::Trpca,
        SweepMethod::TrpcaDefaultT,
        SweepMethod::Pca,
    ];
}

/// Sweep configuration: a lambda grid crossed with methods and repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub generator: GeneratorKind,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub sigma_t: f64,
    pub sigma_o: f64,
    pub lambdas: Vec<f64>,
    pub methods: Vec<SweepMethod>,
    /// Datasets sampled per lambda.
    pub reps: usize,
    pub restarts: usize,
    pub eps: f64,
    pub max_iter: usize,
    pub seed: u64,
}

/// Aggregated tre statistics for one `(lambda, method)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub lambda: f64,
    pub method: SweepMethod,
    pub mean_tre: f64,
    pub std_tre: f64,
    pub runs: usize,
}

/// All cells in grid order (lambda outer, method inner) plus a config echo.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub config: SweepConfig,
}

fn dataset_seed(seed: u64, lambda_index: usize, rep: usize) -> u64 {
    fit::derive_restart_seed(
        fit::derive_restart_seed(seed, lambda_index as u64),
        rep as u64,
    )
}

/// tre of every configured method on one sampled dataset.
fn evaluate_dataset(config: &SweepConfig, lambda: f64, seed: u64) -> Result<Vec<f64>> {
    let params = GeneratorParams {
        n: config.n,
        p: config.p,
        k: config.k,
        sigma_t: config.sigma_t,
        sigma_o: config.sigma_o,
        lambda,
        seed,
    };
    let dataset = config.generator.generate(&params)?;
    let oracle = pca::true_pca(&dataset, config.k)?;
    let opts = FitOptions {
        eps: config.eps,
        max_iter: config.max_iter,
        seed,
    };
    config
        .methods
        .iter()
        .map(|method| {
            let model = match method {
                SweepMethod::Trpca => {
                    let spec = TrimmedSpec::new(dataset.t_true, config.k);
                    fit::trpca_multistart(&dataset.x, &spec, config.restarts, &opts)?.model
                }
                SweepMethod::TrpcaDefaultT => {
                    let spec = TrimmedSpec::new(TrimmedSpec::default_t(config.n), config.k);
                    fit::trpca_multistart(&dataset.x, &spec, config.restarts, &opts)?.model
                }
                SweepMethod::Pca => pca::pca_fit(&dataset.x, config.k)?.subspace_model(),
            };
            tre(&model, &dataset, &oracle)
        })
        .collect()
}

/// Runs the full grid. Cells are independent and evaluated concurrently
/// when the `parallel` feature is on; results are reduced in grid order, so
/// the output is identical to a sequential run with the same seed.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    if config.reps == 0 {
        return Err(Error::InvalidParameter("reps must be >= 1".into()));
    }
    if config.lambdas.is_empty() || config.methods.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep needs at least one lambda and one method".into(),
        ));
    }

    let jobs: Vec<(usize, usize)> = (0..config.lambdas.len())
        .flat_map(|li| (0..config.reps).map(move |rep| (li, rep)))
        .collect();

    #[cfg(feature = "parallel")]
    let evaluated: Result<Vec<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(li, rep)| {
            evaluate_dataset(
                config,
                config.lambdas[li],
                dataset_seed(config.seed, li, rep),
            )
        })
        .collect();
    #[cfg(not(feature = "parallel"))]
    let evaluated: Result<Vec<Vec<f64>>> = jobs
        .iter()
        .map(|&(li, rep)| {
            evaluate_dataset(
                config,
                config.lambdas[li],
                dataset_seed(config.seed, li, rep),
            )
        })
        .collect();
    let evaluated = evaluated?;

    let mut cells = Vec::with_capacity(config.lambdas.len() * config.methods.len());
    for (li, &lambda) in config.lambdas.iter().enumerate() {
        for (mi, &method) in config.methods.iter().enumerate() {
            let samples: Vec<f64> = (0..config.reps)
                .map(|rep| evaluated[li * config.reps + rep][mi])
                .collect();
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            let var =
                samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / samples.len() as f64;
            cells.push(SweepCell {
                lambda,
                method,
                mean_tre: mean,
                std_tre: var.sqrt(),
                runs: config.reps,
            });
        }
    }
    Ok(SweepResult {
        cells,
        config: config.clone(),
    })
}

/// Additive decomposition of frames into background (projection onto the
/// model) and foreground (the remainder), with per-frame squared errors.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSplit {
    pub background: DataMatrix,
    pub foreground: DataMatrix,
    pub frame_errors: Vec<f64>,
}

/// Splits each row as `x = x_b + x_f` with
/// `x_b = m + U U^T (x - m)` and `x_f = x - x_b`.
pub fn split_background(x: &DataMatrix, model: &SubspaceModel) -> Result<BackgroundSplit> {
    if model.dim() != x.ncols() {
        return Err(Error::Dimension(format!(
            "frames have p={} but the model has p={}",
            x.ncols(),
            model.dim()
        )));
    }
    let n = x.nrows();
    let centered = fit::center_columns(x, &model.center);
    let scores = &centered * model.basis.matrix();
    let mut background = scores * model.basis.matrix().transpose();
    for j in 0..background.ncols() {
        let mj = model.center[j];
        for v in background.column_mut(j).iter_mut() {
            *v += mj;
        }
    }
    let foreground = x - &background;
    let mut frame_errors = vec![0.0; n];
    for j in 0..foreground.ncols() {
        for (i, v) in foreground.column(j).iter().enumerate() {
            frame_errors[i] += v * v;
        }
    }
    Ok(BackgroundSplit {
        background,
        foreground,
        frame_errors,
    })
}
