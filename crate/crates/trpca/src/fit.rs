//! Trimmed-reconstruction-error subspace estimation.
//!
//! The estimator alternates a polar-decomposition update of the basis with a
//! trimmed-mean update of the center, monotonically decreasing the mean of
//! the `t` smallest squared reconstruction errors.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{self, DataMatrix};
use crate::stiefel::{self, Frame};

/// Affine subspace: center `m` plus orthonormal basis `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceModel {
    pub center: DVector<f64>,
    pub basis: Frame,
}

impl SubspaceModel {
    pub fn new(center: DVector<f64>, basis: Frame) -> Result<Self> {
        if center.len() != basis.rows() {
            return Err(Error::Dimension(format!(
                "center has {} entries but basis has {} rows",
                center.len(),
                basis.rows()
            )));
        }
        Ok(SubspaceModel { center, basis })
    }

    /// Ambient dimension `p`.
    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    /// Subspace dimension `k`.
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }
}

/// Objective parameters: keep the `t` smallest errors, fit a rank-`k` subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrimmedSpec {
    pub t: usize,
    pub k: usize,
}

impl TrimmedSpec {
    pub fn new(t: usize, k: usize) -> Self {
        TrimmedSpec { t, k }
    }

    /// The default `t = ceil(n/2)`, the maximum-breakdown choice.
    pub fn default_t(n: usize) -> usize {
        n.div_ceil(2)
    }

    /// Checks `1 <= k < p` and `ceil(n/2) <= t <= n`.
    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        if self.k == 0 || self.k >= p {
            return Err(Error::InvalidParameter(format!(
                "k must satisfy 1 <= k < p, got k={}, p={p}",
                self.k
            )));
        }
        if self.t < Self::default_t(n) || self.t > n {
            return Err(Error::InvalidParameter(format!(
                "t must satisfy ceil(n/2) <= t <= n, got t={}, n={n}",
                self.t
            )));
        }
        Ok(())
    }
}

/// Iteration controls for [`trpca_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Relative-descent threshold for convergence.
    pub eps: f64,
    pub max_iter: usize,
    /// Seeds the tie-breaking generator (and, in multistart, the inits).
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            eps: 1e-9,
            max_iter: 1000,
            seed: 0,
        }
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative descent fell below `eps`.
    Converged,
    /// Iteration budget exhausted.
    MaxIter,
    /// The supergradient vanished exactly; the basis was kept as-is.
    Stalled,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::Stalled => "stalled",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(Termination::Converged),
            "max_iter" => Ok(Termination::MaxIter),
            "stalled" => Ok(Termination::Stalled),
            other => Err(Error::InvalidParameter(format!(
                "unknown termination '{other}'"
            ))),
        }
    }
}

/// Outcome of a fit: final model plus the full objective history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmedFitReport {
    pub model: SubspaceModel,
    /// Objective value before the first iteration and after each one.
    pub objective_trace: Vec<f64>,
    /// Indices of the `t` retained rows under the final model, ascending.
    pub selected_indices: Vec<usize>,
    pub iterations: usize,
    pub termination: Termination,
}

impl TrimmedFitReport {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace holds at least the initial value")
    }
}

/// Per-row squared reconstruction errors; entries are non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    values: Vec<f64>,
}

impl Residuals {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("residual values".into()));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(
                "residual values must be non-negative".into(),
            ));
        }
        Ok(Residuals { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Scratch buffers reused across iterations. The centered data and selected
/// rows are large (`n x p` and `t x p`); reallocating them every step would
/// dominate the iteration cost with page faults.
#[derive(Debug, Clone, Default)]
pub struct FitWorkspace {
    centered: DMatrix<f64>,
    scores: DMatrix<f64>,
    picked: DMatrix<f64>,
    projected: DMatrix<f64>,
    gradient: DMatrix<f64>,
}

fn ensure_shape(buf: &mut DMatrix<f64>, nrows: usize, ncols: usize) {
    if buf.shape() != (nrows, ncols) {
        *buf = DMatrix::zeros(nrows, ncols);
    }
}

/// `out[i][j] = x[i][j] - center[j]`, written in storage (column) order.
fn center_columns_into(out: &mut DMatrix<f64>, x: &DataMatrix, center: &DVector<f64>) {
    ensure_shape(out, x.nrows(), x.ncols());
    for j in 0..x.ncols() {
        let mj = center[j];
        let src = x.column(j);
        for (dst, v) in out.column_mut(j).iter_mut().zip(src.iter()) {
            *dst = v - mj;
        }
    }
}

/// Subtracts `center[j]` from every entry of column `j`.
pub(crate) fn center_columns(x: &DataMatrix, center: &DVector<f64>) -> DataMatrix {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    center_columns_into(&mut out, x, center);
    out
}

/// Row-wise squared norms accumulated column by column (storage order).
fn add_row_norms_squared(m: &DMatrix<f64>, acc: &mut [f64], sign: f64) {
    for j in 0..m.ncols() {
        for (i, v) in m.column(j).iter().enumerate() {
            acc[i] += sign * v * v;
        }
    }
}

/// `r~_i = ||x_i - m||^2 - ||B^T (x_i - m)||^2` for an arbitrary `p x k`
/// matrix `B`. Off the Stiefel manifold the values may be negative.
fn raw_residual_values_into(
    ws: &mut FitWorkspace,
    x: &DataMatrix,
    center: &DVector<f64>,
    basis: &DMatrix<f64>,
) -> Vec<f64> {
    center_columns_into(&mut ws.centered, x, center);
    ensure_shape(&mut ws.scores, x.nrows(), basis.ncols());
    ws.scores.gemm(1.0, &ws.centered, basis, 0.0);
    let mut values = vec![0.0; x.nrows()];
    add_row_norms_squared(&ws.centered, &mut values, 1.0);
    add_row_norms_squared(&ws.scores, &mut values, -1.0);
    values
}

fn raw_residual_values(x: &DataMatrix, center: &DVector<f64>, basis: &DMatrix<f64>) -> Vec<f64> {
    raw_residual_values_into(&mut FitWorkspace::default(), x, center, basis)
}

fn clamped_residuals_into(
    ws: &mut FitWorkspace,
    x: &DataMatrix,
    center: &DVector<f64>,
    basis: &DMatrix<f64>,
) -> Result<Residuals> {
    let values = raw_residual_values_into(ws, x, center, basis)
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    Residuals::new(values)
}

fn check_model_dims(x: &DataMatrix, center: &DVector<f64>, basis: &DMatrix<f64>) -> Result<()> {
    if basis.nrows() != x.ncols() || center.len() != x.ncols() {
        return Err(Error::Dimension(format!(
            "data has p={} columns but model has center length {} and basis {} rows",
            x.ncols(),
            center.len(),
            basis.nrows()
        )));
    }
    Ok(())
}

/// Squared distances of each row of `x` to the affine subspace of `model`.
///
/// Uses the centered form, `O(pk)` per row; tiny negative round-off is
/// clamped to zero.
pub fn residuals(x: &DataMatrix, model: &SubspaceModel) -> Result<Residuals> {
    check_model_dims(x, &model.center, model.basis.matrix())?;
    clamped_residuals_into(
        &mut FitWorkspace::default(),
        x,
        &model.center,
        model.basis.matrix(),
    )
}

/// Mean of the `t` smallest `r~` values at an arbitrary (not necessarily
/// orthonormal) basis matrix. Tie order does not affect the value.
pub fn trimmed_value(
    x: &DataMatrix,
    center: &DVector<f64>,
    basis: &DMatrix<f64>,
    t: usize,
) -> Result<f64> {
    check_model_dims(x, center, basis)?;
    if t == 0 || t > x.nrows() {
        return Err(Error::InvalidParameter(format!(
            "t must satisfy 1 <= t <= n, got t={t}, n={}",
            x.nrows()
        )));
    }
    let mut values = raw_residual_values(x, center, basis);
    values.sort_by(f64::total_cmp);
    Ok(values[..t].iter().sum::<f64>() / t as f64)
}

/// Mean of the `t` smallest residuals together with the retained indices.
///
/// Ties are broken randomly: a seeded shuffle is applied before a stable
/// sort on the values, so tied rows enter in shuffled order. The returned
/// indices are ascending.
pub fn trimmed_objective<R: Rng + ?Sized>(
    res: &Residuals,
    t: usize,
    rng: &mut R,
) -> Result<(f64, Vec<usize>)> {
    let n = res.len();
    if t == 0 || t > n {
        return Err(Error::InvalidParameter(format!(
            "t must satisfy 1 <= t <= n, got t={t}, n={n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| res.values[a].total_cmp(&res.values[b]));
    let mut selected = order[..t].to_vec();
    selected.sort_unstable();
    let mean = selected.iter().map(|&i| res.values[i]).sum::<f64>() / t as f64;
    Ok((mean, selected))
}

fn supergradient_into(
    ws: &mut FitWorkspace,
    x: &DataMatrix,
    center: &DVector<f64>,
    basis: &DMatrix<f64>,
    selection: &[usize],
) -> Result<()> {
    check_model_dims(x, center, basis)?;
    if selection.is_empty() {
        return Err(Error::InvalidParameter("empty selection".into()));
    }
    if let Some(&i) = selection.iter().find(|&&i| i >= x.nrows()) {
        return Err(Error::InvalidParameter(format!(
            "selected row {i} out of range (n={})",
            x.nrows()
        )));
    }
    let (p, k, t) = (x.ncols(), basis.ncols(), selection.len());
    ensure_shape(&mut ws.picked, t, p);
    for j in 0..p {
        let mj = center[j];
        let source = x.column(j);
        for (dst, &i) in ws.picked.column_mut(j).iter_mut().zip(selection) {
            *dst = source[i] - mj;
        }
    }
    ensure_shape(&mut ws.projected, t, k);
    ws.projected.gemm(1.0, &ws.picked, basis, 0.0);
    ensure_shape(&mut ws.gradient, p, k);
    ws.gradient
        .gemm_tr(-2.0 / t as f64, &ws.picked, &ws.projected, 0.0);
    Ok(())
}

/// Supergradient of the trimmed objective in the basis, at the given
/// selection: `G = -(2/t) * sum_{i in I} (x_i - m)(x_i - m)^T B`.
///
/// `basis` may be any `p x k` matrix; the objective is concave on all of
/// `R^{p x k}` and the supergradient inequality holds globally.
pub fn supergradient(
    x: &DataMatrix,
    center: &DVector<f64>,
    basis: &DMatrix<f64>,
    selection: &[usize],
) -> Result<DMatrix<f64>> {
    let mut ws = FitWorkspace::default();
    supergradient_into(&mut ws, x, center, basis, selection)?;
    Ok(ws.gradient)
}

/// Basis update `U <- -Polar(G)`, the Stiefel minimizer of `<G, U>`.
///
/// A vanishing supergradient leaves the basis unchanged (all selected rows
/// coincide with the center).
pub fn update_basis(g: &DMatrix<f64>, current: &Frame) -> Result<Frame> {
    if g.nrows() != current.rows() || g.ncols() != current.cols() {
        return Err(Error::Dimension(format!(
            "supergradient is {}x{} but basis is {}x{}",
            g.nrows(),
            g.ncols(),
            current.rows(),
            current.cols()
        )));
    }
    if g.iter().all(|&v| v == 0.0) {
        return Ok(current.clone());
    }
    Ok(stiefel::stiefel_min_linear(g)?.0)
}

/// Center update: arithmetic mean of the selected rows.
pub fn update_center(x: &DataMatrix, selection: &[usize]) -> Result<DVector<f64>> {
    if selection.is_empty() {
        return Err(Error::InvalidParameter("empty selection".into()));
    }
    if let Some(&i) = selection.iter().find(|&&i| i >= x.nrows()) {
        return Err(Error::InvalidParameter(format!(
            "selected row {i} out of range (n={})",
            x.nrows()
        )));
    }
    Ok(matrix::mean_of_rows(x, selection))
}

/// Result of one block-coordinate iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// Basis and center were updated; the new objective and selection refer
    /// to the updated model.
    Updated {
        objective: f64,
        selection: Vec<usize>,
    },
    /// The supergradient was exactly zero; the model was left untouched.
    Stalled,
}

/// One iteration of the descent: supergradient at the current selection,
/// polar update of the basis, trimmed-mean update of the center. Mutates
/// `model` in place and reports the objective of the updated model. The
/// workspace carries the large scratch buffers between iterations.
pub fn trpca_step<R: Rng + ?Sized>(
    x: &DataMatrix,
    model: &mut SubspaceModel,
    selection: &[usize],
    t: usize,
    rng: &mut R,
    workspace: &mut FitWorkspace,
) -> Result<StepOutcome> {
    supergradient_into(workspace, x, &model.center, model.basis.matrix(), selection)?;
    if workspace.gradient.iter().all(|&v| v == 0.0) {
        return Ok(StepOutcome::Stalled);
    }
    let new_basis = stiefel::stiefel_min_linear(&workspace.gradient)?.0;

    // Re-select under the new basis before moving the center.
    let mid = clamped_residuals_into(workspace, x, &model.center, new_basis.matrix())?;
    let (_, mid_selection) = trimmed_objective(&mid, t, rng)?;
    let new_center = matrix::mean_of_rows(x, &mid_selection);

    model.basis = new_basis;
    model.center = new_center;

    let res = clamped_residuals_into(workspace, x, &model.center, model.basis.matrix())?;
    let (objective, selection) = trimmed_objective(&res, t, rng)?;
    Ok(StepOutcome::Updated {
        objective,
        selection,
    })
}

/// Fits the trimmed-error subspace by monotone block-coordinate descent
/// from the given initial basis. The center starts at the coordinate-wise
/// median of `x`.
pub fn trpca_fit(
    x: &DataMatrix,
    spec: &TrimmedSpec,
    init_basis: &Frame,
    opts: &FitOptions,
) -> Result<TrimmedFitReport> {
    matrix::ensure_finite("data", x)?;
    let (n, p) = (x.nrows(), x.ncols());
    spec.validate(n, p)?;
    if init_basis.rows() != p || init_basis.cols() != spec.k {
        return Err(Error::Dimension(format!(
            "initial basis is {}x{} but data needs {}x{}",
            init_basis.rows(),
            init_basis.cols(),
            p,
            spec.k
        )));
    }
    if !(opts.eps.is_finite() && opts.eps >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must be finite and non-negative, got {}",
            opts.eps
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut model = SubspaceModel::new(matrix::column_median(x), init_basis.clone())?;
    let mut workspace = FitWorkspace::default();

    let res = clamped_residuals_into(&mut workspace, x, &model.center, model.basis.matrix())?;
    let (mut objective, mut selection) = trimmed_objective(&res, spec.t, &mut rng)?;
    let mut trace = vec![objective];
    let mut termination = Termination::MaxIter;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        match trpca_step(x, &mut model, &selection, spec.t, &mut rng, &mut workspace)? {
            StepOutcome::Stalled => {
                termination = Termination::Stalled;
                break;
            }
            StepOutcome::Updated {
                objective: next,
                selection: next_selection,
            } => {
                iterations += 1;
                trace.push(next);
                let previous = objective;
                objective = next;
                selection = next_selection;
                if (previous - next) / previous.max(1e-12) < opts.eps {
                    termination = Termination::Converged;
                    break;
                }
            }
        }
    }

    Ok(TrimmedFitReport {
        model,
        objective_trace: trace,
        selected_indices: selection,
        iterations,
        termination,
    })
}

/// Seed for restart `index` of a multistart run, derived by a splitmix64
/// scramble so neighboring restarts decorrelate.
pub fn derive_restart_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E3779B97F4A7C15)
        .wrapping_add(index.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn run_restart(
    x: &DataMatrix,
    spec: &TrimmedSpec,
    opts: &FitOptions,
    restart_seed: u64,
) -> Result<TrimmedFitReport> {
    let init = stiefel::random_frame(x.ncols(), spec.k, restart_seed)?;
    trpca_fit(
        x,
        spec,
        &init,
        &FitOptions {
            seed: restart_seed,
            ..*opts
        },
    )
}

fn best_report(reports: Vec<TrimmedFitReport>) -> TrimmedFitReport {
    reports
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            a.final_objective()
                .total_cmp(&b.final_objective())
                .then(ia.cmp(ib))
        })
        .map(|(_, report)| report)
        .expect("at least one restart")
}

fn check_restarts(restarts: usize) -> Result<()> {
    if restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be >= 1".into()));
    }
    Ok(())
}

/// Multistart driver: `restarts` independent fits from Haar-random initial
/// bases, returning the report with the smallest final objective (lowest
/// restart index wins ties). Restarts run in parallel when the `parallel`
/// feature is enabled; the result is identical either way.
pub fn trpca_multistart(
    x: &DataMatrix,
    spec: &TrimmedSpec,
    restarts: usize,
    opts: &FitOptions,
) -> Result<TrimmedFitReport> {
    check_restarts(restarts)?;
    let seeds: Vec<u64> = (0..restarts as u64)
        .map(|i| derive_restart_seed(opts.seed, i))
        .collect();

    #[cfg(feature = "parallel")]
    let reports: Result<Vec<TrimmedFitReport>> = seeds
        .par_iter()
        .map(|&s| run_restart(x, spec, opts, s))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let reports: Result<Vec<TrimmedFitReport>> = seeds
        .iter()
        .map(|&s| run_restart(x, spec, opts, s))
        .collect();

    Ok(best_report(reports?))
}

/// As [`trpca_multistart`], but always sequential regardless of features.
/// Exists so the two execution modes can be compared like-for-like.
pub fn trpca_multistart_serial(
    x: &DataMatrix,
    spec: &TrimmedSpec,
    restarts: usize,
    opts: &FitOptions,
) -> Result<TrimmedFitReport> {
    check_restarts(restarts)?;
    let reports: Result<Vec<TrimmedFitReport>> = (0..restarts as u64)
        .map(|i| run_restart(x, spec, opts, derive_restart_seed(opts.seed, i)))
        .collect();
    Ok(best_report(reports?))
}
