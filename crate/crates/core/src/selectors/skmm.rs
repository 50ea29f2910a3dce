//! Sketchy moment matching.
//!
//! Given sketched gradients `G̃ ∈ ℝ^{N×m}` with moment `Σ̃ = G̃ᵀG̃/N = VΛVᵀ`,
//! the selector searches the capped simplex for weights `s` whose weighted
//! moment matches `Σ̃/c_S` along every eigendirection:
//!
//! ```text
//! min_s  Σ_j min_{γ_j ≥ 1/c_S} (q_j(s) − γ_j λ_j)²,   q_j(s) = v_jᵀ G̃ᵀ diag(s) G̃ v_j
//! s.t.   Σ s_i = 1,  0 ≤ s_i ≤ 1/n
//! ```
//!
//! The inner minimum has a closed form. For `λ_j > 0` it is attained at
//! `γ_j = max(1/c_S, q_j/λ_j)` and leaves `max(0, λ_j/c_S − q_j)²`; for a null
//! direction the term is `q_j²`. With `W_ij = (g̃_iᵀv_j)²` precomputed,
//! `q = Wᵀs`, and both the objective and its gradient cost `O(Nm)`.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::projection::{is_feasible, project_capped_simplex};
use super::sampling::{sample_without_replacement, SamplingMode};
use super::{Selection, SelectionWeights, TracePoint};
use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::moments::{second_moment, spectral_decomposition, SpectralDecomposition};
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    PlainPgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkmmConfig {
    /// Moment-matching strength, in `[n/N, 1]`.
    pub c_s: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Return the iterate with the lowest objective rather than the last one.
    pub keep_best: bool,
    pub sampling_mode: SamplingMode,
    /// Exclude directions with `λ_j = 0` from the objective.
    pub drop_null_eigendirections: bool,
    /// Record the objective every this many iterations (0 disables the trace).
    pub trace_every: usize,
}

impl Default for SkmmConfig {
    fn default() -> Self {
        Self {
            c_s: 0.999,
            iterations: 10_000,
            learning_rate: 1e-7,
            optimizer: OptimizerKind::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            keep_best: true,
            sampling_mode: SamplingMode::WeightedWithoutReplacement,
            drop_null_eigendirections: false,
            trace_every: 100,
        }
    }
}

/// Objective value with the per-direction quantities that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    /// `q_j = v_jᵀ G̃ᵀ diag(s) G̃ v_j`.
    pub q: Vec<f64>,
    /// Minimizing `γ_j`.
    pub gamma: Vec<f64>,
}

/// The relaxed moment-matching objective for one `(G̃, Σ̃, c_S)`.
#[derive(Clone, Debug)]
pub struct MomentMatching {
    /// `W_ij = (g̃_iᵀ v_j)²`, row-major `N×m`.
    weights: DenseMatrix,
    lambdas: Vec<f64>,
    null: Vec<bool>,
    active: Vec<bool>,
    inv_c: f64,
}

impl MomentMatching {
    pub fn new(
        sketched: &DenseMatrix,
        spec: &SpectralDecomposition,
        c_s: f64,
        drop_null: bool,
    ) -> Result<Self> {
        let (rows, m) = sketched.shape();
        if spec.dim() != m {
            return Err(Error::invalid(format!(
                "spectral decomposition has dimension {} but sketches have {m} columns",
                spec.dim()
            )));
        }
        if !(c_s > 0.0) || !c_s.is_finite() {
            return Err(Error::invalid(format!("c_S must be positive, got {c_s}")));
        }
        let proj = sketched.matmul(&spec.eigenvectors)?;
        let weights = DenseMatrix::from_fn(rows, m, |i, j| proj.get(i, j) * proj.get(i, j));
        let cut = spec.null_threshold();
        let null: Vec<bool> = spec.eigenvalues.iter().map(|&l| l <= cut).collect();
        let active = null.iter().map(|&z| !(z && drop_null)).collect();
        Ok(Self {
            weights,
            lambdas: spec.eigenvalues.clone(),
            null,
            active,
            inv_c: 1.0 / c_s,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn is_null(&self, j: usize) -> bool {
        self.null[j]
    }

    /// `q = Wᵀs`, accumulated row by row.
    pub fn moments(&self, s: &[f64]) -> Vec<f64> {
        let m = self.lambdas.len();
        let mut q = vec![0.0; m];
        for (i, &si) in s.iter().enumerate() {
            if si == 0.0 {
                continue;
            }
            for (qj, w) in q.iter_mut().zip(self.weights.row(i)) {
                *qj += si * w;
            }
        }
        q
    }

    pub fn evaluate(&self, s: &[f64]) -> ObjectiveEval {
        let q = self.moments(s);
        let (value, gamma) = self.value_from_moments(&q);
        ObjectiveEval { value, q, gamma }
    }

    fn value_from_moments(&self, q: &[f64]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut gamma = Vec::with_capacity(q.len());
        for (j, (&qj, &lj)) in q.iter().zip(&self.lambdas).enumerate() {
            if self.null[j] {
                gamma.push(self.inv_c);
                if self.active[j] {
                    value += qj * qj;
                }
            } else {
                gamma.push(self.inv_c.max(qj / lj));
                let deficit = (lj * self.inv_c - qj).max(0.0);
                value += deficit * deficit;
            }
        }
        (value, gamma)
    }

    /// `∂value/∂q_j`.
    fn outer_coefficients(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(&self.lambdas)
            .enumerate()
            .map(|(j, (&qj, &lj))| {
                if self.null[j] {
                    if self.active[j] {
                        2.0 * qj
                    } else {
                        0.0
                    }
                } else {
                    -2.0 * (lj * self.inv_c - qj).max(0.0)
                }
            })
            .collect()
    }

    /// Gradient given the moments `q` of the current point.
    pub fn gradient_from_moments(&self, q: &[f64], out: &mut [f64]) {
        let coef = self.outer_coefficients(q);
        for (i, g) in out.iter_mut().enumerate() {
            *g = dot(self.weights.row(i), &coef);
        }
    }

    pub fn gradient(&self, s: &[f64]) -> Vec<f64> {
        let q = self.moments(s);
        let mut out = vec![0.0; self.len()];
        self.gradient_from_moments(&q, &mut out);
        out
    }

    /// `min_{j: λ_j > 0} q_j/λ_j`; the relaxed moment condition holds iff this
    /// is at least `1/c_S`.
    pub fn min_moment_ratio(&self, s: &[f64]) -> f64 {
        let q = self.moments(s);
        q.iter()
            .zip(&self.lambdas)
            .enumerate()
            .filter(|(j, _)| !self.null[*j])
            .map(|(_, (qj, lj))| qj / lj)
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_weights(s: &SelectionWeights, rows: usize) -> Result<()> {
    if s.s.len() != rows {
        return Err(Error::invalid(format!(
            "weights have length {} but there are {rows} sketched rows",
            s.s.len()
        )));
    }
    Ok(())
}

/// Objective value, `q` and the minimizing `γ` at weights `s`.
pub fn skmm_objective(
    s: &SelectionWeights,
    sketched: &DenseMatrix,
    spec: &SpectralDecomposition,
    c_s: f64,
) -> Result<ObjectiveEval> {
    check_weights(s, sketched.rows())?;
    Ok(MomentMatching::new(sketched, spec, c_s, false)?.evaluate(&s.s))
}

/// Gradient of [`skmm_objective`] with respect to `s`.
pub fn skmm_gradient(
    s: &SelectionWeights,
    sketched: &DenseMatrix,
    spec: &SpectralDecomposition,
    c_s: f64,
) -> Result<Vec<f64>> {
    check_weights(s, sketched.rows())?;
    Ok(MomentMatching::new(sketched, spec, c_s, false)?.gradient(&s.s))
}

struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(cfg: &SkmmConfig, len: usize) -> Self {
        Self {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            first: vec![0.0; len],
            second: vec![0.0; len],
            step: 0,
        }
    }

    /// Applies one update to `x` in place.
    fn update(&mut self, x: &mut [f64], grad: &[f64], lr: f64) {
        self.step = self.step.saturating_add(1);
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((xi, &g), m), v) in x
            .iter_mut()
            .zip(grad)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *xi -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

fn validate(rows: usize, m: usize, n: usize, cfg: &SkmmConfig) -> Result<()> {
    if n == 0 || n > rows {
        return Err(Error::invalid(format!(
            "budget must lie in [1, {rows}], got {n}"
        )));
    }
    if m >= n {
        return Err(Error::invalid(format!(
            "sketch dimension {m} must be smaller than the budget {n}"
        )));
    }
    let lower = n as f64 / rows as f64;
    if !(cfg.c_s >= lower * (1.0 - 1e-12) && cfg.c_s <= 1.0) {
        return Err(Error::invalid(format!(
            "c_S must lie in [n/N, 1] = [{lower}, 1], got {}",
            cfg.c_s
        )));
    }
    if !(cfg.learning_rate > 0.0) || !cfg.learning_rate.is_finite() {
        return Err(Error::invalid("learning rate must be positive and finite"));
    }
    if cfg.optimizer == OptimizerKind::Adam
        && !((0.0..1.0).contains(&cfg.beta1) && (0.0..1.0).contains(&cfg.beta2) && cfg.epsilon >= 0.0)
    {
        return Err(Error::invalid("Adam needs β₁, β₂ in [0, 1) and ε ≥ 0"));
    }
    Ok(())
}

/// Runs the selector on already-sketched gradients.
pub fn skmm_optimize(
    sketched: &DenseMatrix,
    n: usize,
    cfg: &SkmmConfig,
    seed: u64,
) -> Result<Selection> {
    let (rows, m) = sketched.shape();
    validate(rows, m, n, cfg)?;
    let sigma = second_moment(sketched)?;
    let spec = spectral_decomposition(&sigma)?;
    let objective = MomentMatching::new(sketched, &spec, cfg.c_s, cfg.drop_null_eigendirections)?;
    let cap = 1.0 / n as f64;

    let mut rng = rng::main_stream(seed);
    let mut s = vec![0.0; rows];
    for i in index::sample(&mut rng, rows, n) {
        s[i] = cap;
    }

    let mut trace = Vec::new();
    let mut q = objective.moments(&s);
    let (mut value, _) = objective.value_from_moments(&q);
    if !value.is_finite() {
        return Err(Error::numeric("objective is not finite at the initial point"));
    }
    if cfg.trace_every > 0 {
        trace.push(TracePoint {
            iteration: 0,
            objective: value,
        });
    }
    let mut best_value = value;
    let mut best = s.clone();

    let mut adam = Adam::new(cfg, rows);
    let mut grad = vec![0.0; rows];
    for it in 1..=cfg.iterations {
        objective.gradient_from_moments(&q, &mut grad);
        match cfg.optimizer {
            OptimizerKind::Adam => {
                // Tangent component: a shift common to every coordinate is
                // undone by the projection, but Adam would turn it into a
                // full-size step on each coordinate.
                let mean = grad.iter().sum::<f64>() / rows as f64;
                grad.iter_mut().for_each(|g| *g -= mean);
                adam.update(&mut s, &grad, cfg.learning_rate)
            }
            OptimizerKind::PlainPgd => {
                for (x, g) in s.iter_mut().zip(&grad) {
                    *x -= cfg.learning_rate * g;
                }
            }
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric(format!(
                "iterate diverged at iteration {it}; the learning rate is likely too large"
            )));
        }
        s = project_capped_simplex(&s, cap)?;
        debug_assert!(is_feasible(&s, cap, 1e-8), "infeasible iterate at {it}");

        q = objective.moments(&s);
        value = objective.value_from_moments(&q).0;
        if !value.is_finite() {
            return Err(Error::numeric(format!(
                "objective became non-finite at iteration {it}; the learning rate is likely too large"
            )));
        }
        if cfg.keep_best && value < best_value {
            best_value = value;
            best.copy_from_slice(&s);
        }
        if cfg.trace_every > 0 && (it % cfg.trace_every == 0 || it == cfg.iterations) {
            trace.push(TracePoint {
                iteration: it,
                objective: value,
            });
        }
    }

    let (weights, final_value) = if cfg.keep_best {
        (best, best_value)
    } else {
        (s, value)
    };
    let sampled = sample_without_replacement(&weights, n, cfg.sampling_mode, &mut rng)?;
    Ok(Selection {
        method: "skmm".to_string(),
        n,
        seed,
        indices: sampled.indices,
        weights: Some(SelectionWeights {
            s: weights,
            budget: n,
        }),
        objective: Some(final_value),
        objective_trace: (cfg.trace_every > 0).then_some(trace),
        sampling_mode: Some(cfg.sampling_mode),
        padded: sampled.padded,
        config: serde_json::to_value(cfg)?,
    })
}
