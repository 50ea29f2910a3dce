//! Ridge regression on a coreset, cross-validated regularization, risk over
//! the full dataset, and the variance/bias diagnostics of a selection.
//!
//! The ridge problem is `min_θ (1/n)‖Xθ − y‖² + α‖θ‖²`. When `r ≤ n` it is
//! solved primal-side, `(XᵀX/n + αI)θ = Xᵀy/n`; otherwise through the dual
//! identity `θ = Xᵀ(XXᵀ + nαI)⁻¹y`, which only touches `n×n` inner products.
//! Cross-validation diagonalizes each training fold once and then sweeps
//! the whole α grid in closed form.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::moments::{
    decompose_symmetric, diagonal_in_basis, intrinsic_dimension_from_spectrum, second_moment,
    spectral_decomposition, subset_moment, trace_ratio,
};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveRoute {
    Primal,
    Dual,
}

impl SolveRoute {
    /// Primal when `r ≤ n`, dual otherwise.
    pub fn for_shape(n: usize, r: usize) -> Self {
        if r <= n {
            SolveRoute::Primal
        } else {
            SolveRoute::Dual
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub theta: Vec<f64>,
    pub alpha: f64,
    pub route: SolveRoute,
}

impl RidgeModel {
    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        x.matvec(&self.theta)
    }
}

fn check_xy(x: &DenseMatrix, y: &[f64]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::invalid(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::invalid("ridge regression on an empty design"));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("ridge strength must be ≥ 0, got {alpha}")));
    }
    Ok(())
}

/// Solves `(A + shift·I) z = b` by Cholesky.
fn solve_shifted_spd(a: MatRef<'_, f64>, shift: f64, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut m = a.to_owned();
    for i in 0..n {
        m[(i, i)] += shift;
    }
    let llt = m
        .llt(Side::Lower)
        .map_err(|e| Error::numeric(format!("ridge system is singular: {e:?}")))?;
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let z = llt.solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| z[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("ridge solution is not finite"));
    }
    Ok(out)
}

/// Fits ridge regression, choosing the route from the shape.
pub fn ridge_fit(x: &DenseMatrix, y: &[f64], alpha: f64) -> Result<RidgeModel> {
    ridge_fit_with_route(x, y, alpha, SolveRoute::for_shape(x.rows(), x.cols()))
}

pub fn ridge_fit_with_route(
    x: &DenseMatrix,
    y: &[f64],
    alpha: f64,
    route: SolveRoute,
) -> Result<RidgeModel> {
    check_xy(x, y)?;
    check_alpha(alpha)?;
    let (n, r) = x.shape();
    let a = x.as_faer();
    let theta = match route {
        SolveRoute::Primal => {
            if alpha == 0.0 && n < r {
                return Err(Error::invalid(
                    "unregularized ridge needs at least as many samples as features",
                ));
            }
            let inv_n = 1.0 / n as f64;
            let gram = faer::Scale(inv_n) * (a.transpose() * a);
            if alpha == 0.0 {
                let eig = gram
                    .self_adjoint_eigenvalues(Side::Lower)
                    .map_err(|e| Error::numeric(format!("eigensolver failed: {e:?}")))?;
                let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                if !(min > 1e-12 * max) {
                    return Err(Error::numeric("unregularized ridge system is singular"));
                }
            }
            let rhs: Vec<f64> = (0..r)
                .map(|j| (0..n).map(|i| x.get(i, j) * y[i]).sum::<f64>() * inv_n)
                .collect();
            solve_shifted_spd(gram.as_ref(), alpha, &rhs)?
        }
        SolveRoute::Dual => {
            if alpha == 0.0 {
                return Err(Error::invalid("the dual ridge route needs α > 0"));
            }
            let k = a * a.transpose();
            let c = solve_shifted_spd(k.as_ref(), n as f64 * alpha, y)?;
            (0..r)
                .map(|j| (0..n).map(|i| x.get(i, j) * c[i]).sum())
                .collect()
        }
    };
    Ok(RidgeModel {
        theta,
        alpha,
        route,
    })
}

/// `(1/N)‖Xθ − y‖²`.
pub fn empirical_risk(model: &RidgeModel, x: &DenseMatrix, y: &[f64]) -> Result<f64> {
    check_xy(x, y)?;
    if model.theta.len() != x.cols() {
        return Err(Error::invalid(format!(
            "model has {} coefficients but the data has {} columns",
            model.theta.len(),
            x.cols()
        )));
    }
    let pred = model.predict(x)?;
    Ok(mean_squared_error(&pred, y))
}

fn mean_squared_error(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64
}

/// `count` linearly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count - 1) as f64;
            (0..count)
                .map(|i| if i + 1 == count { stop } else { start + step * i as f64 })
                .collect()
        }
    }
}

/// 100 linearly spaced values in `[1e-2, 1e2]`.
pub fn default_alpha_grid() -> Vec<f64> {
    linspace(1e-2, 1e2, 100)
}

pub const DEFAULT_FOLDS: usize = 2;

/// Splits a seeded permutation of `0..n` into `folds` contiguous groups;
/// the first `n mod folds` groups get one extra row.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::invalid(format!(
            "cannot split {n} rows into {folds} folds"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::main_stream(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(perm[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub alpha: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_alpha: f64,
    pub cv_grid: Vec<CvPoint>,
}

/// Inner products between coreset rows, either from features or from a
/// precomputed Gram matrix of the full dataset.
enum Design<'a> {
    Features(&'a DenseMatrix),
    Gram {
        gram: &'a DenseMatrix,
        subset: &'a [usize],
    },
}

impl Design<'_> {
    fn rows(&self) -> usize {
        match self {
            Design::Features(x) => x.rows(),
            Design::Gram { subset, .. } => subset.len(),
        }
    }

    fn route(&self) -> SolveRoute {
        match self {
            Design::Features(x) => SolveRoute::for_shape(x.rows(), x.cols()),
            Design::Gram { .. } => SolveRoute::Dual,
        }
    }

    /// `⟨x_a, x_b⟩` block for coreset-local row lists.
    fn kernel_block(&self, rows: &[usize], cols: &[usize]) -> Mat<f64> {
        match self {
            Design::Features(x) => {
                Mat::from_fn(rows.len(), cols.len(), |i, j| dot(x.row(rows[i]), x.row(cols[j])))
            }
            Design::Gram { gram, subset } => Mat::from_fn(rows.len(), cols.len(), |i, j| {
                gram.get(subset[rows[i]], subset[cols[j]])
            }),
        }
    }
}

/// Validation predictions for every α of one fold, in closed form.
fn fold_losses(
    design: &Design<'_>,
    y: &[f64],
    train: &[usize],
    val: &[usize],
    grid: &[f64],
) -> Result<Vec<f64>> {
    let nt = train.len() as f64;
    let y_val: Vec<f64> = val.iter().map(|&i| y[i]).collect();
    // pred(α) = P · (b ⊘ (λ + shift(α)))
    let (proj, b, lambdas, shift_scale) = match (design.route(), design) {
        (SolveRoute::Primal, Design::Features(x)) => {
            let xt = x.select_rows(train);
            let cov = second_moment(&xt)?;
            let spec = spectral_decomposition(&cov)?;
            let r = x.cols();
            let xty: Vec<f64> = (0..r)
                .map(|j| train.iter().map(|&i| x.get(i, j) * y[i]).sum::<f64>() / nt)
                .collect();
            let v = spec.eigenvectors.as_faer();
            let b: Vec<f64> = (0..r)
                .map(|k| (0..r).map(|j| v[(j, k)] * xty[j]).sum())
                .collect();
            let xv = x.select_rows(val);
            let proj = xv.as_faer() * v;
            (proj, b, spec.eigenvalues, 1.0)
        }
        _ => {
            let ktt = design.kernel_block(train, train);
            let spec = decompose_symmetric(&DenseMatrix::from_faer(ktt.as_ref()))?;
            let u = spec.eigenvectors.as_faer();
            let b: Vec<f64> = (0..train.len())
                .map(|k| train.iter().enumerate().map(|(t, &i)| u[(t, k)] * y[i]).sum())
                .collect();
            let kvt = design.kernel_block(val, train);
            let proj = kvt * u;
            (proj, b, spec.eigenvalues, nt)
        }
    };
    let mut losses = Vec::with_capacity(grid.len());
    let mut coef = vec![0.0; b.len()];
    for &alpha in grid {
        for (k, c) in coef.iter_mut().enumerate() {
            let denom = lambdas[k] + shift_scale * alpha;
            *c = if denom > 0.0 { b[k] / denom } else { 0.0 };
        }
        let mut sse = 0.0;
        for (i, &target) in y_val.iter().enumerate() {
            let mut pred = 0.0;
            for (k, c) in coef.iter().enumerate() {
                pred += proj[(i, k)] * c;
            }
            sse += (pred - target).powi(2);
        }
        losses.push(sse / y_val.len() as f64);
    }
    Ok(losses)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("the α grid is empty"));
    }
    if grid.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::invalid("every α in the grid must be positive and finite"));
    }
    Ok(())
}

fn cv_search(
    design: &Design<'_>,
    y: &[f64],
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    check_grid(grid)?;
    let n = design.rows();
    let groups = fold_assignment(n, folds, seed)?;
    let mut total = vec![0.0; grid.len()];
    for (f, val) in groups.iter().enumerate() {
        let train: Vec<usize> = groups
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        let losses = fold_losses(design, y, &train, val, grid)?;
        for (t, l) in total.iter_mut().zip(losses) {
            *t += l;
        }
    }
    let cv_grid: Vec<CvPoint> = grid
        .iter()
        .zip(&total)
        .map(|(&alpha, &sum)| CvPoint {
            alpha,
            loss: sum / folds as f64,
        })
        .collect();
    // argmin; ties go to the smaller α
    let best = cv_grid
        .iter()
        .copied()
        .reduce(|best, p| {
            if p.loss < best.loss || (p.loss == best.loss && p.alpha < best.alpha) {
                p
            } else {
                best
            }
        })
        .expect("grid is nonempty");
    if !best.loss.is_finite() {
        return Err(Error::numeric("cross-validation loss is not finite"));
    }
    Ok(CvResult {
        best_alpha: best.alpha,
        cv_grid,
    })
}

/// Mean validation MSE per α over a seeded fold partition.
pub fn cv_grid_search(
    x: &DenseMatrix,
    y: &[f64],
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    check_xy(x, y)?;
    cv_search(&Design::Features(x), y, grid, folds, seed)
}

/// [`cv_grid_search`] for the coreset `subset` of a dataset whose full Gram
/// matrix `XXᵀ` is given; `y_subset[k]` is the label of `subset[k]`.
pub fn cv_grid_search_gram(
    gram: &DenseMatrix,
    subset: &[usize],
    y_subset: &[f64],
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    check_gram_subset(gram, subset, y_subset)?;
    cv_search(&Design::Gram { gram, subset }, y_subset, grid, folds, seed)
}

fn check_gram_subset(gram: &DenseMatrix, subset: &[usize], y_subset: &[f64]) -> Result<()> {
    if gram.rows() != gram.cols() {
        return Err(Error::invalid("Gram matrix must be square"));
    }
    if subset.len() != y_subset.len() || subset.is_empty() {
        return Err(Error::invalid("subset and labels must be nonempty and equally long"));
    }
    if subset.iter().any(|&i| i >= gram.rows()) {
        return Err(Error::invalid("subset index out of range"));
    }
    Ok(())
}

/// Dual coefficients `c = (K_SS + nαI)⁻¹ y_S`, so that `θ = X_Sᵀc`.
pub fn dual_coefficients_gram(
    gram: &DenseMatrix,
    subset: &[usize],
    y_subset: &[f64],
    alpha: f64,
) -> Result<Vec<f64>> {
    check_gram_subset(gram, subset, y_subset)?;
    if !(alpha > 0.0) {
        return Err(Error::invalid("the dual ridge route needs α > 0"));
    }
    let kss = Mat::from_fn(subset.len(), subset.len(), |i, j| {
        gram.get(subset[i], subset[j])
    });
    solve_shifted_spd(kss.as_ref(), subset.len() as f64 * alpha, y_subset)
}

/// Full-data risk of the dual model `θ = X_Sᵀc`: predictions are `K[:, S]c`.
pub fn empirical_risk_gram(
    gram: &DenseMatrix,
    subset: &[usize],
    coefficients: &[f64],
    y: &[f64],
) -> Result<f64> {
    if y.len() != gram.rows() || coefficients.len() != subset.len() {
        return Err(Error::invalid("dimension mismatch in kernel risk"));
    }
    let pred: Vec<f64> = (0..gram.rows())
        .map(|i| {
            let row = gram.row(i);
            subset.iter().zip(coefficients).map(|(&s, c)| row[s] * c).sum()
        })
        .collect();
    Ok(mean_squared_error(&pred, y))
}

/// α grid as stored in configs: an explicit list or a linear range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaGrid {
    List(Vec<f64>),
    Linear { start: f64, stop: f64, count: usize },
}

impl Default for AlphaGrid {
    fn default() -> Self {
        AlphaGrid::Linear {
            start: 1e-2,
            stop: 1e2,
            count: 100,
        }
    }
}

impl AlphaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AlphaGrid::List(v) => v.clone(),
            AlphaGrid::Linear { start, stop, count } => linspace(*start, *stop, *count),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub grid: AlphaGrid,
    pub folds: usize,
    /// Seed of the fold partition.
    pub cv_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid: AlphaGrid::default(),
            folds: DEFAULT_FOLDS,
            cv_seed: 0,
        }
    }
}

/// Quantities from the variance/bias decomposition of a selection, computed
/// on sketched gradients. They are reported, never asserted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `tr(Σ̃⟨Σ̃_S⟩_k†)`.
    pub variance_term: f64,
    /// `‖Σ̃⟨Σ̃_S⟩_k†‖₂`.
    pub spectral_term: f64,
    /// `λ_k(Σ̃_S)`.
    pub gamma_s: f64,
    /// `tr(Σ̃)`.
    pub trace_sigma: f64,
    /// Intrinsic dimension of `Σ̃` at sample count `N`.
    pub intrinsic_dim: usize,
    /// `min_{λ_j > 0} q_j/λ_j` at the uniform weights on `S`.
    pub min_moment_ratio: f64,
    /// Whether `min_moment_ratio ≥ 1/c_S` for the probe `c_S`.
    pub relaxed_condition: bool,
    pub truncation: usize,
    pub c_s_probe: f64,
}

pub fn tradeoff_diagnostics(
    sketched: &DenseMatrix,
    subset: &[usize],
    k: usize,
    c_s_probe: f64,
) -> Result<Diagnostics> {
    if subset.is_empty() {
        return Err(Error::invalid("diagnostics need a nonempty selection"));
    }
    if subset.iter().any(|&i| i >= sketched.rows()) {
        return Err(Error::invalid("selection index out of range"));
    }
    if !(c_s_probe > 0.0) {
        return Err(Error::invalid("c_S probe must be positive"));
    }
    let m = sketched.cols();
    if k == 0 || k > m {
        return Err(Error::invalid(format!("truncation {k} outside [1, {m}]")));
    }
    let sigma = second_moment(sketched)?;
    let sigma_s = subset_moment(sketched, subset)?;
    let ratio = trace_ratio(&sigma, &sigma_s, Some(k))?;
    let spec = spectral_decomposition(&sigma)?;
    let spec_s = spectral_decomposition(&sigma_s)?;

    let q = diagonal_in_basis(sigma_s.entries(), &spec);
    let cut = spec.null_threshold();
    let min_ratio = q
        .iter()
        .zip(&spec.eigenvalues)
        .filter(|(_, &l)| l > cut)
        .map(|(qj, l)| qj / l)
        .fold(f64::INFINITY, f64::min);

    Ok(Diagnostics {
        variance_term: ratio.trace,
        spectral_term: ratio.spectral,
        gamma_s: spec_s.eigenvalues[k - 1],
        trace_sigma: sigma.trace(),
        intrinsic_dim: intrinsic_dimension_from_spectrum(&spec.eigenvalues, sketched.rows())?,
        min_moment_ratio: min_ratio,
        relaxed_condition: min_ratio >= 1.0 / c_s_probe,
        truncation: k,
        c_s_probe,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub empirical_risk: f64,
    pub chosen_alpha: f64,
    pub cv_grid: Vec<CvPoint>,
    pub route: SolveRoute,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

fn check_subset(total: usize, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::invalid("empty selection"));
    }
    if subset.iter().any(|&i| i >= total) {
        return Err(Error::invalid("selection index out of range"));
    }
    Ok(())
}

/// Tunes α by CV on the coreset, refits on the whole coreset, and reports
/// the risk over the full dataset.
pub fn evaluate_selection(
    x: &DenseMatrix,
    y: &[f64],
    subset: &[usize],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    check_xy(x, y)?;
    check_subset(x.rows(), subset)?;
    let xs = x.select_rows(subset);
    let ys: Vec<f64> = subset.iter().map(|&i| y[i]).collect();
    let cv = cv_grid_search(&xs, &ys, &cfg.grid.values(), cfg.folds, cfg.cv_seed)?;
    let model = ridge_fit(&xs, &ys, cv.best_alpha)?;
    Ok(EvalReport {
        empirical_risk: empirical_risk(&model, x, y)?,
        chosen_alpha: cv.best_alpha,
        cv_grid: cv.cv_grid,
        route: model.route,
        n: subset.len(),
        diagnostics: None,
    })
}

/// [`evaluate_selection`] through a precomputed Gram matrix `XXᵀ`; always
/// uses the dual route.
pub fn evaluate_selection_gram(
    gram: &DenseMatrix,
    y: &[f64],
    subset: &[usize],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if y.len() != gram.rows() {
        return Err(Error::invalid("labels do not match the Gram matrix"));
    }
    check_subset(gram.rows(), subset)?;
    let ys: Vec<f64> = subset.iter().map(|&i| y[i]).collect();
    let cv = cv_grid_search_gram(gram, subset, &ys, &cfg.grid.values(), cfg.folds, cfg.cv_seed)?;
    let c = dual_coefficients_gram(gram, subset, &ys, cv.best_alpha)?;
    Ok(EvalReport {
        empirical_risk: empirical_risk_gram(gram, subset, &c, y)?,
        chosen_alpha: cv.best_alpha,
        cv_grid: cv.cv_grid,
        route: SolveRoute::Dual,
        n: subset.len(),
        diagnostics: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut r = rng::main_stream(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
    }

    fn random_vec(len: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::main_stream(seed);
        (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
    }

    /// `(2/n)Xᵀ(Xθ − y) + 2αθ`
    fn objective_gradient(x: &DenseMatrix, y: &[f64], m: &RidgeModel) -> Vec<f64> {
        let n = x.rows() as f64;
        let res: Vec<f64> = x
            .matvec(&m.theta)
            .unwrap()
            .iter()
            .zip(y)
            .map(|(p, t)| p - t)
            .collect();
        (0..x.cols())
            .map(|j| {
                2.0 / n * (0..x.rows()).map(|i| x.get(i, j) * res[i]).sum::<f64>()
                    + 2.0 * m.alpha * m.theta[j]
            })
            .collect()
    }

    #[test]
    fn interpolates_identity_design() {
        let y = [1.0, -2.0, 0.5];
        let m = ridge_fit(&DenseMatrix::identity(3), &y, 1e-12).unwrap();
        for (t, v) in m.theta.iter().zip(y) {
            assert!((t - v).abs() < 1e-9);
        }
    }

    #[test]
    fn scalar_example() {
        let x = DenseMatrix::from_rows(&[[2.0]]).unwrap();
        for route in [SolveRoute::Primal, SolveRoute::Dual] {
            let m = ridge_fit_with_route(&x, &[2.0], 1.0, route).unwrap();
            assert!((m.theta[0] - 0.8).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_unregularized_system() {
        let x = DenseMatrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        assert!(matches!(
            ridge_fit(&x, &[1.0, 2.0, 3.0], 0.0),
            Err(Error::NumericDomain(_))
        ));
        let wide = random_matrix(2, 5, 1);
        assert!(matches!(
            ridge_fit(&wide, &[1.0, 2.0], 0.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn routes_agree_on_both_shapes() {
        for (rows, cols) in [(10, 6), (6, 10)] {
            let x = random_matrix(rows, cols, 3);
            let y = random_vec(rows, 4);
            let p = ridge_fit_with_route(&x, &y, 0.3, SolveRoute::Primal).unwrap();
            let d = ridge_fit_with_route(&x, &y, 0.3, SolveRoute::Dual).unwrap();
            let scale = p.theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (a, b) in p.theta.iter().zip(&d.theta) {
                assert!((a - b).abs() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn risk_edge_cases() {
        let x = random_matrix(5, 3, 2);
        let theta = vec![0.5, -1.0, 2.0];
        let y = x.matvec(&theta).unwrap();
        let model = RidgeModel {
            theta,
            alpha: 0.0,
            route: SolveRoute::Primal,
        };
        assert!(empirical_risk(&model, &x, &y).unwrap() < 1e-28);
        let zero = RidgeModel {
            theta: vec![0.0; 3],
            ..model
        };
        let want = y.iter().map(|v| v * v).sum::<f64>() / 5.0;
        assert!((empirical_risk(&zero, &x, &y).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn folds_partition_rows() {
        let f = fold_assignment(11, 3, 5).unwrap();
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 3]);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        assert!(fold_assignment(1, 2, 0).is_err());
        assert!(fold_assignment(5, 1, 0).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 100);
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[99], 1e2);
        assert_eq!(AlphaGrid::default().values(), g);
        assert_eq!(EvalConfig::default().folds, 2);
    }

    /// Independent CV: refit with `ridge_fit` for every fold and α.
    fn brute_force_cv(x: &DenseMatrix, y: &[f64], grid: &[f64], folds: usize, seed: u64) -> Vec<f64> {
        let groups = fold_assignment(x.rows(), folds, seed).unwrap();
        grid.iter()
            .map(|&alpha| {
                let mut total = 0.0;
                for (f, val) in groups.iter().enumerate() {
                    let train: Vec<usize> = groups
                        .iter()
                        .enumerate()
                        .filter(|(g, _)| *g != f)
                        .flat_map(|(_, v)| v.clone())
                        .collect();
                    let xt = x.select_rows(&train);
                    let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                    let m = ridge_fit(&xt, &yt, alpha).unwrap();
                    let xv = x.select_rows(val);
                    let yv: Vec<f64> = val.iter().map(|&i| y[i]).collect();
                    total += empirical_risk(&m, &xv, &yv).unwrap();
                }
                total / folds as f64
            })
            .collect()
    }

    #[test]
    fn spectral_cv_matches_refitting() {
        let grid = [0.01, 0.3, 2.0, 50.0];
        for (rows, cols) in [(30, 5), (12, 40)] {
            let x = random_matrix(rows, cols, 8);
            let y = random_vec(rows, 9);
            let cv = cv_grid_search(&x, &y, &grid, 3, 2).unwrap();
            let oracle = brute_force_cv(&x, &y, &grid, 3, 2);
            for (p, o) in cv.cv_grid.iter().zip(&oracle) {
                assert!((p.loss - o).abs() <= 1e-9 * (1.0 + o), "{} vs {o}", p.loss);
            }
        }
    }

    #[test]
    fn gram_path_matches_feature_path() {
        let x = random_matrix(40, 60, 11);
        let y = random_vec(40, 12);
        let gram = x.gram();
        let subset: Vec<usize> = (0..40).step_by(2).collect();
        let cfg = EvalConfig {
            grid: AlphaGrid::List(vec![0.05, 0.5, 5.0]),
            ..EvalConfig::default()
        };
        let a = evaluate_selection(&x, &y, &subset, &cfg).unwrap();
        let b = evaluate_selection_gram(&gram, &y, &subset, &cfg).unwrap();
        assert_eq!(a.chosen_alpha, b.chosen_alpha);
        assert!((a.empirical_risk - b.empirical_risk).abs() <= 1e-8 * (1.0 + a.empirical_risk));
        for (p, q) in a.cv_grid.iter().zip(&b.cv_grid) {
            assert!((p.loss - q.loss).abs() <= 1e-8 * (1.0 + p.loss));
        }
    }

    #[test]
    fn noiseless_cv_prefers_smallest_alpha() {
        // θ* in the row space, noiseless labels, exactly determined folds
        let x = random_matrix(16, 4, 21);
        let theta = [1.0, -0.5, 2.0, 0.25];
        let y = x.matvec(&theta).unwrap();
        let grid = default_alpha_grid();
        let cv = cv_grid_search(&x, &y, &grid, 2, 0).unwrap();
        assert_eq!(cv.best_alpha, 1e-2);
        for w in cv.cv_grid.windows(2) {
            assert!(w[1].loss > w[0].loss);
        }
    }

    #[test]
    fn cv_edge_cases() {
        let x = random_matrix(6, 2, 1);
        let y = random_vec(6, 2);
        assert_eq!(cv_grid_search(&x, &y, &[0.7], 2, 0).unwrap().best_alpha, 0.7);
        assert!(cv_grid_search(&x, &y, &[], 2, 0).is_err());
        assert!(cv_grid_search(&x, &y, &[0.0], 2, 0).is_err());
        let tiny = random_matrix(1, 2, 1);
        assert!(cv_grid_search(&tiny, &[1.0], &[1.0], 2, 0).is_err());
    }

    #[test]
    fn diagnostics_on_full_selection() {
        let g = random_matrix(30, 4, 5);
        let all: Vec<usize> = (0..30).collect();
        let d = tradeoff_diagnostics(&g, &all, 4, 1.0).unwrap();
        assert!((d.variance_term - 4.0).abs() < 1e-9);
        assert!((d.spectral_term - 1.0).abs() < 1e-9);
        assert!((d.min_moment_ratio - 1.0).abs() < 1e-9);
        assert!(!d.relaxed_condition || d.min_moment_ratio >= 1.0);
    }

    #[test]
    fn diagnostics_diagonal_example() {
        // Σ̃ = diag(2, 0) over N = 2 rows; S = {1} gives Σ̃_S = diag(4, 0)
        let g = DenseMatrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let d = tradeoff_diagnostics(&g, &[1], 2, 1.0).unwrap();
        assert!((d.variance_term - 0.5).abs() < 1e-12);
        assert!((d.spectral_term - 0.5).abs() < 1e-12);
        assert!((d.trace_sigma - 2.0).abs() < 1e-12);
        assert!((d.gamma_s - 0.0).abs() < 1e-12);
        assert!((d.min_moment_ratio - 2.0).abs() < 1e-12);
        assert!(d.relaxed_condition);
    }

    proptest! {
        #[test]
        fn ridge_solution_is_stationary(seed in 0u64..10_000, wide in any::<bool>(), alpha in 1e-3f64..10.0) {
            let (rows, cols) = if wide { (7, 13) } else { (13, 7) };
            let x = random_matrix(rows, cols, seed);
            let y = random_vec(rows, seed ^ 0xABC);
            for route in [SolveRoute::Primal, SolveRoute::Dual] {
                let m = ridge_fit_with_route(&x, &y, alpha, route).unwrap();
                let g = objective_gradient(&x, &y, &m);
                let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let tnorm = m.theta.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!(gnorm <= 1e-6 * (1.0 + tnorm));
            }
        }
    }
}
