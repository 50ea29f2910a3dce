//! Coreset selectors.
//!
//! All selectors return a [`Selection`]: `n` sorted distinct indices plus
//! whatever metadata the method produces. [`SelectorConfig`] is the
//! serializable description used by the CLI and the benchmark harness, and
//! [`run_selector`] dispatches on it.

pub mod baselines;
pub mod kernel;
pub mod projection;
pub mod sampling;
pub mod skmm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::moments::{
    leverage_from_gram_spectrum, leverage_scores, LeverageVariant, SpectralDecomposition,
};
use crate::rng;
use crate::sketch::{apply_sketch, build_sketch, SketchKind};

pub use baselines::{
    adaptive_select, herding_select, kcenter_select, leverage_select, uniform_indices,
};
pub use kernel::{FeatureKernel, GramKernel, KernelSource};
pub use projection::project_capped_simplex;
pub use sampling::{sample_without_replacement, SamplingMode};
pub use skmm::{skmm_gradient, skmm_objective, skmm_optimize, OptimizerKind, SkmmConfig};

/// Continuous weights on the capped simplex `{Σs = 1, 0 ≤ s_i ≤ 1/budget}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionWeights {
    pub s: Vec<f64>,
    pub budget: usize,
}

impl SelectionWeights {
    pub fn new(s: Vec<f64>, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(Error::invalid("budget must be positive"));
        }
        let w = Self { s, budget };
        if !w.is_feasible(1e-8) {
            return Err(Error::invalid("weights are not on the capped simplex"));
        }
        Ok(w)
    }

    pub fn cap(&self) -> f64 {
        1.0 / self.budget as f64
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        projection::is_feasible(&self.s, self.cap(), tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
}

/// The output of a selector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub method: String,
    pub n: usize,
    pub seed: u64,
    /// Sorted, distinct, in `[0, N)`.
    pub indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<SelectionWeights>,
    /// Objective at the returned weights (SkMM only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<TracePoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_mode: Option<SamplingMode>,
    /// Slots filled by the uniform fallback because the method ran out of
    /// positive weights or residuals.
    #[serde(default)]
    pub padded: usize,
    /// Fully resolved configuration that produced this selection.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl Selection {
    fn baseline(method: &str, n: usize, seed: u64, indices: Vec<usize>, padded: usize) -> Self {
        Self {
            method: method.to_string(),
            n,
            seed,
            indices,
            weights: None,
            objective: None,
            objective_trace: None,
            sampling_mode: None,
            padded,
            config: serde_json::Value::Null,
        }
    }

    /// Checks size and distinctness against a dataset of `total` points.
    pub fn validate(&self, total: usize) -> Result<()> {
        if self.indices.len() != self.n {
            return Err(Error::invalid(format!(
                "selection lists {} indices but n = {}",
                self.indices.len(),
                self.n
            )));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("selection indices must be sorted and distinct"));
        }
        if let Some(&last) = self.indices.last() {
            if last >= total {
                return Err(Error::invalid(format!(
                    "index {last} out of range for {total} points"
                )));
            }
        }
        Ok(())
    }
}

pub fn uniform_select(total: usize, n: usize, seed: u64) -> Result<Selection> {
    let idx = uniform_indices(total, n, seed)?;
    Ok(Selection::baseline("uniform", n, seed, idx, 0))
}

/// Parameters of the SkMM selector when run on raw (unsketched) gradients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkmmSelectorConfig {
    /// Sketch dimension `m`.
    pub m: usize,
    pub sketch: SketchKind,
    /// Treat the input as already sketched and skip the sketch.
    pub presketched: bool,
    #[serde(flatten)]
    pub optimizer: SkmmConfig,
}

impl Default for SkmmSelectorConfig {
    fn default() -> Self {
        Self {
            m: 32,
            sketch: SketchKind::Gaussian,
            presketched: false,
            optimizer: SkmmConfig::default(),
        }
    }
}

/// Salt separating the sketch seed from the optimizer seed of a run.
const SKETCH_SALT: u64 = 0x5EED_5EED;

/// Seed of the sketch used by an SkMM run with the given selection seed.
pub fn sketch_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, SKETCH_SALT)
}

/// Default truncation rank for T-leverage (`4·r̄` with `r̄ = 8`).
pub const DEFAULT_TRUNCATION_RANK: usize = 32;
/// Default ridge parameter for R-leverage.
pub const DEFAULT_RIDGE_RHO: f64 = 1e3;

fn default_rank() -> usize {
    DEFAULT_TRUNCATION_RANK
}

fn default_rho() -> f64 {
    DEFAULT_RIDGE_RHO
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SelectorConfig {
    Uniform,
    Herding,
    #[serde(rename = "kcenter")]
    KCenter,
    Adaptive,
    TLeverage {
        #[serde(default = "default_rank")]
        rank: usize,
    },
    RLeverage {
        #[serde(default = "default_rho")]
        rho: f64,
    },
    Skmm(SkmmSelectorConfig),
}

impl SelectorConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SelectorConfig::Uniform => "uniform",
            SelectorConfig::Herding => "herding",
            SelectorConfig::KCenter => "kcenter",
            SelectorConfig::Adaptive => "adaptive",
            SelectorConfig::TLeverage { .. } => "t-leverage",
            SelectorConfig::RLeverage { .. } => "r-leverage",
            SelectorConfig::Skmm(_) => "skmm",
        }
    }

    /// Whether the output ignores the seed.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, SelectorConfig::Herding)
    }

    pub fn leverage_variant(&self) -> Option<LeverageVariant> {
        match *self {
            SelectorConfig::TLeverage { rank } => Some(LeverageVariant::Truncated { rank }),
            SelectorConfig::RLeverage { rho } => Some(LeverageVariant::Ridge { rho }),
            _ => None,
        }
    }
}

/// Inputs a selector can draw on. The Gram matrix and its spectrum are
/// optional accelerators for the kernel-based baselines; results with and
/// without them agree up to floating-point rounding.
pub struct SelectionData<'a> {
    pub features: &'a DenseMatrix,
    pub gram: Option<&'a DenseMatrix>,
    pub gram_spectrum: Option<&'a SpectralDecomposition>,
}

impl<'a> SelectionData<'a> {
    pub fn new(features: &'a DenseMatrix) -> Self {
        Self {
            features,
            gram: None,
            gram_spectrum: None,
        }
    }

    fn kernel(&self) -> Result<Box<dyn KernelSource + 'a>> {
        Ok(match self.gram {
            Some(g) => Box::new(GramKernel::new(g)?),
            None => Box::new(FeatureKernel::new(self.features)),
        })
    }

    /// Leverage scores for `variant`, reusing the Gram spectrum when present.
    pub fn leverage(&self, variant: LeverageVariant) -> Result<Vec<f64>> {
        match self.gram_spectrum {
            Some(spec) => leverage_from_gram_spectrum(spec, variant),
            None => leverage_scores(self.features, variant),
        }
    }
}

/// Runs the configured selector for budget `n`.
pub fn run_selector(
    cfg: &SelectorConfig,
    data: &SelectionData<'_>,
    n: usize,
    seed: u64,
) -> Result<Selection> {
    run_selector_with_scores(cfg, data, n, seed, None)
}

/// As [`run_selector`], with optionally precomputed leverage scores for the
/// leverage methods.
pub fn run_selector_with_scores(
    cfg: &SelectorConfig,
    data: &SelectionData<'_>,
    n: usize,
    seed: u64,
    scores: Option<&[f64]>,
) -> Result<Selection> {
    let total = data.features.rows();
    let name = cfg.name();
    let mut sel = match cfg {
        SelectorConfig::Uniform => uniform_select(total, n, seed)?,
        SelectorConfig::Herding => {
            let mut idx = baselines::herding_order(data.kernel()?.as_ref(), n)?;
            idx.sort_unstable();
            Selection::baseline(name, n, seed, idx, 0)
        }
        SelectorConfig::KCenter => {
            let mut idx = baselines::kcenter_order(data.kernel()?.as_ref(), n, seed)?;
            idx.sort_unstable();
            Selection::baseline(name, n, seed, idx, 0)
        }
        SelectorConfig::Adaptive => {
            let run = baselines::adaptive_run(data.kernel()?.as_ref(), n, seed)?;
            let mut idx = run.order;
            idx.sort_unstable();
            Selection::baseline(name, n, seed, idx, run.padded)
        }
        SelectorConfig::TLeverage { .. } | SelectorConfig::RLeverage { .. } => {
            let variant = cfg.leverage_variant().expect("leverage method");
            if n > total {
                return Err(Error::invalid(format!(
                    "budget {n} exceeds the {total} available points"
                )));
            }
            let owned;
            let scores = match scores {
                Some(s) => s,
                None => {
                    owned = data.leverage(variant)?;
                    &owned
                }
            };
            let pick = baselines::sample_by_scores(scores, n, seed)?;
            let mut sel = Selection::baseline(name, n, seed, pick.indices, pick.padded);
            sel.sampling_mode = Some(SamplingMode::WeightedWithoutReplacement);
            sel
        }
        SelectorConfig::Skmm(skmm_cfg) => {
            let sketched = if skmm_cfg.presketched {
                data.features.clone()
            } else {
                let op = build_sketch(
                    skmm_cfg.sketch,
                    data.features.cols(),
                    skmm_cfg.m,
                    sketch_seed(seed),
                )?;
                apply_sketch(data.features, &op)?
            };
            skmm_optimize(&sketched, n, &skmm_cfg.optimizer, seed)?
        }
    };
    sel.method = name.to_string();
    sel.config = serde_json::to_value(cfg)?;
    Ok(sel)
}
