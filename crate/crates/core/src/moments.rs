//! Second moments, their spectra, and the leverage-score families built on
//! them.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, symmetrized, DenseMatrix};

/// Relative eigenvalue cutoff below which a direction counts as null.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Relative asymmetry tolerated by [`spectral_decomposition`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative negativity tolerated (and clamped) by [`spectral_decomposition`].
pub const PSD_TOL: f64 = 1e-8;

/// A symmetric PSD `d×d` moment `MᵀM / k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix {
    entries: DenseMatrix,
    sample_count: usize,
}

impl MomentMatrix {
    /// Wraps a matrix that is already a moment; only squareness is checked
    /// here, the spectral routines check symmetry and definiteness.
    pub fn from_matrix(entries: DenseMatrix, sample_count: usize) -> Result<Self> {
        if entries.rows() != entries.cols() {
            return Err(Error::invalid(format!(
                "moment matrix must be square, got {}x{}",
                entries.rows(),
                entries.cols()
            )));
        }
        Ok(Self {
            entries,
            sample_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &DenseMatrix {
        &self.entries
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }
}

/// Eigenpairs of a moment matrix, eigenvalues descending and clamped at zero.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    /// Column `j` is the eigenvector for `eigenvalues[j]`.
    pub eigenvectors: DenseMatrix,
    pub eigenvalues: Vec<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        (0..self.dim()).map(|i| self.eigenvectors.get(i, j)).collect()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// Absolute threshold under which eigenvalues are treated as zero.
    pub fn null_threshold(&self) -> f64 {
        PINV_CUTOFF * self.max_eigenvalue()
    }

    /// Number of eigenvalues above the pseudoinverse cutoff.
    pub fn rank(&self) -> usize {
        let cut = self.null_threshold();
        self.eigenvalues.iter().filter(|&&l| l > cut).count()
    }

    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let d = self.dim();
        let v = &self.eigenvectors;
        DenseMatrix::from_fn(d, d, |a, b| {
            (0..d)
                .map(|j| v.get(a, j) * self.eigenvalues[j] * v.get(b, j))
                .sum()
        })
    }
}

/// `MᵀM / k`, symmetrized.
pub fn second_moment(m: &DenseMatrix) -> Result<MomentMatrix> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::invalid("second moment of an empty matrix"));
    }
    let a = m.as_faer();
    let mut prod = a.transpose() * a;
    let scale = 1.0 / m.rows() as f64;
    for j in 0..prod.ncols() {
        for i in 0..prod.nrows() {
            prod[(i, j)] *= scale;
        }
    }
    MomentMatrix::from_matrix(symmetrized(prod.as_ref()), m.rows())
}

/// Second moment of a subset of rows, normalized by the subset size.
pub fn subset_moment(m: &DenseMatrix, indices: &[usize]) -> Result<MomentMatrix> {
    second_moment(&m.select_rows(indices))
}

/// Symmetric eigendecomposition with descending eigenvalues.
///
/// Eigenvalues in `[-1e-8·λ_max, 0)` are clamped to zero; anything more
/// negative is an error. Each eigenvector is oriented so that its
/// largest-magnitude component (lowest index on ties) is positive.
pub fn spectral_decomposition(sigma: &MomentMatrix) -> Result<SpectralDecomposition> {
    decompose_symmetric(sigma.entries())
}

pub(crate) fn decompose_symmetric(a: &DenseMatrix) -> Result<SpectralDecomposition> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::invalid("spectral decomposition needs a square matrix"));
    }
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvectors: DenseMatrix::zeros(0, 0),
            eigenvalues: Vec::new(),
        });
    }
    if !a.all_finite() {
        return Err(Error::numeric("matrix has non-finite entries"));
    }
    let scale = a.max_abs();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((a.get(i, j) - a.get(j, i)).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (max asymmetry {asym:e} at scale {scale:e})"
        )));
    }

    let evd = a
        .as_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::numeric(format!("eigensolver failed: {e:?}")))?;
    let raw_vals: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let u = evd.U();

    // Solver order is ascending; a stable sort on descending value keeps
    // tied eigenvalues in the solver's relative order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| raw_vals[y].total_cmp(&raw_vals[x]));

    let lambda_max = raw_vals[order[0]].max(0.0);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = DenseMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut lambda = raw_vals[src];
        if lambda < 0.0 {
            if lambda < -PSD_TOL * lambda_max.max(f64::MIN_POSITIVE) {
                return Err(Error::numeric(format!(
                    "matrix is not positive semidefinite: eigenvalue {lambda:e} vs max {lambda_max:e}"
                )));
            }
            lambda = 0.0;
        }
        eigenvalues.push(lambda);

        let mut pivot = 0;
        for i in 1..n {
            if u[(i, src)].abs() > u[(pivot, src)].abs() {
                pivot = i;
            }
        }
        let sign = if u[(pivot, src)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors.set(i, col, sign * u[(i, src)]);
        }
    }
    Ok(SpectralDecomposition {
        eigenvectors: vectors,
        eigenvalues,
    })
}

/// Tail sums `T(t) = Σ_{j>t} λ_j` for `t = 0..=m` (descending `λ`).
pub fn eigenvalue_tails(eigenvalues: &[f64]) -> Vec<f64> {
    let m = eigenvalues.len();
    let mut tails = vec![0.0; m + 1];
    for t in (0..m).rev() {
        tails[t] = tails[t + 1] + eigenvalues[t];
    }
    tails
}

/// Smallest `t` with `Σ_{j>t} λ_j ≤ tr(Σ)/N`; zero for a zero matrix.
pub fn intrinsic_dimension(sigma: &MomentMatrix, n: usize) -> Result<usize> {
    let spec = spectral_decomposition(sigma)?;
    intrinsic_dimension_from_spectrum(&spec.eigenvalues, n)
}

/// [`intrinsic_dimension`] on an already decomposed spectrum.
pub fn intrinsic_dimension_from_spectrum(eigenvalues: &[f64], n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let tails = eigenvalue_tails(eigenvalues);
    let total = tails[0];
    if total <= 0.0 {
        return Ok(0);
    }
    let budget = total / n as f64;
    Ok(tails
        .iter()
        .position(|&tail| tail <= budget)
        .unwrap_or(eigenvalues.len()))
}

/// Which leverage-score family to compute.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum LeverageVariant {
    /// `m_iᵀ(MᵀM)†m_i`.
    Plain,
    /// `m_iᵀ(⟨M⟩_kᵀ⟨M⟩_k)†m_i` for the rank-`k` truncated SVD `⟨M⟩_k`.
    Truncated { rank: usize },
    /// `m_iᵀ(MᵀM + ρI)⁻¹m_i`.
    Ridge { rho: f64 },
}

/// How leverage scores are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeverageRoute {
    /// Gram side when `N ≤ r`, covariance side otherwise.
    Auto,
    /// Eigendecomposition of the `N×N` Gram matrix `MMᵀ`.
    Gram,
    /// Eigendecomposition of the `r×r` covariance `MᵀM`.
    Covariance,
}

pub fn leverage_scores(m: &DenseMatrix, variant: LeverageVariant) -> Result<Vec<f64>> {
    leverage_scores_with(m, variant, LeverageRoute::Auto)
}

pub fn leverage_scores_with(
    m: &DenseMatrix,
    variant: LeverageVariant,
    route: LeverageRoute,
) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Err(Error::invalid("leverage scores of an empty matrix"));
    }
    if let LeverageVariant::Ridge { rho } = variant {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("ridge parameter must be positive, got {rho}")));
        }
    }
    let route = match route {
        LeverageRoute::Auto if m.rows() <= m.cols() => LeverageRoute::Gram,
        LeverageRoute::Auto => LeverageRoute::Covariance,
        other => other,
    };
    match route {
        LeverageRoute::Gram => {
            let spec = decompose_symmetric(&m.gram())?;
            leverage_from_gram_spectrum(&spec, variant)
        }
        _ => {
            let a = m.as_faer();
            let cov = symmetrized((a.transpose() * a).as_ref());
            let spec = decompose_symmetric(&cov)?;
            let weights = spectral_weights(&spec, variant, |lambda| 1.0 / lambda)?;
            // l_i = Σ_j w_j (m_iᵀ v_j)²
            let v = spec.eigenvectors.as_faer();
            let proj: Mat<f64> = a * v;
            Ok((0..m.rows())
                .map(|i| {
                    weights
                        .iter()
                        .enumerate()
                        .map(|(j, w)| w * proj[(i, j)] * proj[(i, j)])
                        .sum()
                })
                .collect())
        }
    }
}

/// Leverage scores from the eigendecomposition of a Gram matrix `MMᵀ`
/// (`l_i = Σ_j w(λ_j) U_ij²`). Lets callers reuse one Gram decomposition
/// across variants.
pub fn leverage_from_gram_spectrum(
    gram: &SpectralDecomposition,
    variant: LeverageVariant,
) -> Result<Vec<f64>> {
    let weights = spectral_weights(gram, variant, |_| 1.0)?;
    let u = &gram.eigenvectors;
    Ok((0..u.rows())
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .map(|(j, w)| w * u.get(i, j) * u.get(i, j))
                .sum()
        })
        .collect())
}

/// Per-eigendirection weights for a leverage variant. `kept` maps a retained
/// nonzero eigenvalue to its weight (1 on the Gram side, 1/λ on the
/// covariance side); the ridge weight is expressed relative to it.
fn spectral_weights(
    spec: &SpectralDecomposition,
    variant: LeverageVariant,
    kept: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let cut = spec.null_threshold();
    let rank = spec.rank();
    let lambdas = &spec.eigenvalues;
    Ok(match variant {
        LeverageVariant::Plain => lambdas
            .iter()
            .map(|&l| if l > cut { kept(l) } else { 0.0 })
            .collect(),
        LeverageVariant::Truncated { rank: k } => {
            if k == 0 || k > rank {
                return Err(Error::invalid(format!(
                    "truncation rank {k} outside [1, rank = {rank}]"
                )));
            }
            lambdas
                .iter()
                .enumerate()
                .map(|(j, &l)| if j < k { kept(l) } else { 0.0 })
                .collect()
        }
        LeverageVariant::Ridge { rho } => lambdas
            .iter()
            .map(|&l| {
                if l > cut {
                    // λ/(λ+ρ) on the Gram side, 1/(λ+ρ) on the covariance side.
                    kept(l) * l / (l + rho)
                } else {
                    0.0
                }
            })
            .collect(),
    })
}

/// `tr(Σ_full⟨Σ_sub⟩_k†)` and `‖Σ_full⟨Σ_sub⟩_k†‖₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRatio {
    pub trace: f64,
    pub spectral: f64,
}

/// Rank-`k` truncated pseudoinverse of a decomposed matrix; `None` keeps every
/// eigenvalue above the cutoff.
pub fn truncated_pinv(spec: &SpectralDecomposition, k: Option<usize>) -> DenseMatrix {
    let d = spec.dim();
    let cut = spec.null_threshold();
    let keep = k.unwrap_or(d).min(d);
    let inv: Vec<f64> = spec
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &l)| if j < keep && l > cut { 1.0 / l } else { 0.0 })
        .collect();
    let v = &spec.eigenvectors;
    DenseMatrix::from_fn(d, d, |a, b| {
        (0..d).map(|j| v.get(a, j) * inv[j] * v.get(b, j)).sum()
    })
}

pub fn trace_ratio(
    full: &MomentMatrix,
    sub: &MomentMatrix,
    k: Option<usize>,
) -> Result<TraceRatio> {
    if full.dim() != sub.dim() {
        return Err(Error::invalid(format!(
            "moment dimensions differ: {} vs {}",
            full.dim(),
            sub.dim()
        )));
    }
    let spec = spectral_decomposition(sub)?;
    let pinv = truncated_pinv(&spec, k);
    let prod = full.entries().matmul(&pinv)?;
    let trace = prod.trace();
    let spectral = prod
        .as_faer()
        .singular_values()
        .map_err(|e| Error::numeric(format!("SVD failed: {e:?}")))?
        .first()
        .copied()
        .unwrap_or(0.0);
    Ok(TraceRatio { trace, spectral })
}

/// `v_jᵀ A v_j` for every eigenvector of `spec`.
pub fn diagonal_in_basis(a: &DenseMatrix, spec: &SpectralDecomposition) -> Vec<f64> {
    (0..spec.dim())
        .map(|j| {
            let v = spec.eigenvector(j);
            let av = a.matvec(&v).expect("dimensions checked by caller");
            dot(&v, &av)
        })
        .collect()
}
