//! The (method × budget × seed) risk sweep.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{evaluate_selection_gram, EvalConfig};
use crate::matrix::DenseMatrix;
use crate::moments::{decompose_symmetric, LeverageVariant, SpectralDecomposition};
use crate::selectors::{run_selector_with_scores, SelectionData, SelectorConfig};
use crate::synth::{gmm_generate, GmmSpec};
use crate::{io, moments};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Files { features: PathBuf, labels: PathBuf },
    Synthetic { synth: GmmSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    /// Row label in the output; defaults to the method name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub config: SelectorConfig,
}

impl MethodEntry {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.config.name())
    }
}

impl From<SelectorConfig> for MethodEntry {
    fn from(config: SelectorConfig) -> Self {
        Self {
            label: None,
            config,
        }
    }
}

fn default_jobs() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPlan {
    pub dataset: DatasetSource,
    pub methods: Vec<MethodEntry>,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub evaluator: EvalConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    /// Append a row for ridge on the full dataset.
    #[serde(default)]
    pub include_full: bool,
}

impl BenchPlan {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.budgets.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("plan needs methods, budgets and seeds"));
        }
        if self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("budgets must be strictly ascending"));
        }
        if self.budgets[0] == 0 {
            return Err(Error::invalid("budgets must be positive"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("seeds must be distinct"));
        }
        if self.jobs == 0 {
            return Err(Error::invalid("jobs must be at least 1"));
        }
        Ok(())
    }

    /// Resolves relative dataset and output paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let DatasetSource::Files { features, labels } = &mut self.dataset {
            for p in [features, labels] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        if let Some(out) = &mut self.output {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
    }

    pub fn load_dataset(&self) -> Result<(DenseMatrix, Vec<f64>)> {
        match &self.dataset {
            DatasetSource::Files { features, labels } => {
                let x = io::read_matrix(features)?;
                let y = io::read_labels(labels)?;
                if x.rows() != y.len() {
                    return Err(Error::invalid("features and labels disagree on N"));
                }
                Ok((x, y))
            }
            DatasetSource::Synthetic { synth } => {
                let d = gmm_generate(synth)?;
                Ok((d.features, d.labels))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub n: usize,
    pub seed: u64,
    pub risk: f64,
    pub alpha: f64,
    pub padded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    pub cells: Vec<CellResult>,
}

impl BenchResult {
    pub fn row(&self, method: &str, n: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method && r.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,n,mean,std,count\n");
        for r in &self.rows {
            writeln!(s, "{},{},{:e},{:e},{}", r.method, r.n, r.mean, r.std, r.count)
                .expect("writing to a String");
        }
        s
    }
}

/// Precomputed quantities shared by every cell.
pub struct BenchContext {
    pub features: DenseMatrix,
    pub labels: Vec<f64>,
    pub gram: DenseMatrix,
    pub gram_spectrum: Option<SpectralDecomposition>,
    leverage: Vec<(LeverageVariant, Vec<f64>)>,
}

impl BenchContext {
    pub fn new(features: DenseMatrix, labels: Vec<f64>, methods: &[MethodEntry]) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::invalid("features and labels disagree on N"));
        }
        let gram = features.gram();
        let variants: Vec<LeverageVariant> = methods
            .iter()
            .filter_map(|m| m.config.leverage_variant())
            .collect();
        let gram_spectrum = if variants.is_empty() {
            None
        } else {
            Some(decompose_symmetric(&gram)?)
        };
        let mut leverage: Vec<(LeverageVariant, Vec<f64>)> = Vec::new();
        if let Some(spec) = &gram_spectrum {
            for v in variants {
                if leverage.iter().all(|(w, _)| *w != v) {
                    leverage.push((v, moments::leverage_from_gram_spectrum(spec, v)?));
                }
            }
        }
        Ok(Self {
            features,
            labels,
            gram,
            gram_spectrum,
            leverage,
        })
    }

    fn scores(&self, variant: Option<LeverageVariant>) -> Option<&[f64]> {
        let v = variant?;
        self.leverage
            .iter()
            .find(|(w, _)| *w == v)
            .map(|(_, s)| s.as_slice())
    }

    pub fn run_cell(
        &self,
        entry: &MethodEntry,
        n: usize,
        seed: u64,
        eval: &EvalConfig,
    ) -> Result<CellResult> {
        let data = SelectionData {
            features: &self.features,
            gram: Some(&self.gram),
            gram_spectrum: self.gram_spectrum.as_ref(),
        };
        let scores = self.scores(entry.config.leverage_variant());
        let sel = run_selector_with_scores(&entry.config, &data, n, seed, scores)?;
        let report = evaluate_selection_gram(&self.gram, &self.labels, &sel.indices, eval)?;
        Ok(CellResult {
            method: entry.label().to_string(),
            n,
            seed,
            risk: report.empirical_risk,
            alpha: report.chosen_alpha,
            padded: sel.padded,
        })
    }

    pub fn full_data_risk(&self, eval: &EvalConfig) -> Result<f64> {
        let all: Vec<usize> = (0..self.labels.len()).collect();
        Ok(evaluate_selection_gram(&self.gram, &self.labels, &all, eval)?.empirical_risk)
    }
}

fn summarize(method: &str, n: usize, risks: &[f64]) -> BenchRow {
    let count = risks.len() as f64;
    let mean = risks.iter().sum::<f64>() / count;
    let var = risks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / count;
    BenchRow {
        method: method.to_string(),
        n,
        mean,
        std: var.sqrt(),
        count: risks.len(),
    }
}

/// Runs every cell on a pool of `plan.jobs` threads. Cells are collected in
/// plan order, so the output does not depend on scheduling.
pub fn run_bench_on(plan: &BenchPlan, ctx: &BenchContext) -> Result<BenchResult> {
    plan.validate()?;
    let total = ctx.labels.len();
    if let Some(&max) = plan.budgets.last() {
        if max > total {
            return Err(Error::invalid(format!(
                "budget {max} exceeds the {total} available points"
            )));
        }
    }
    let cells: Vec<(&MethodEntry, usize, u64)> = plan
        .methods
        .iter()
        .flat_map(|m| {
            plan.budgets
                .iter()
                .flat_map(move |&n| plan.seeds.iter().map(move |&s| (m, n, s)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let (results, full) = pool.install(|| {
        let results: Result<Vec<CellResult>> = cells
            .par_iter()
            .map(|&(m, n, s)| ctx.run_cell(m, n, s, &plan.evaluator))
            .collect();
        let full = plan
            .include_full
            .then(|| ctx.full_data_risk(&plan.evaluator))
            .transpose();
        (results, full)
    });
    let cells = results?;

    let mut rows = Vec::new();
    for m in &plan.methods {
        for &n in &plan.budgets {
            let risks: Vec<f64> = cells
                .iter()
                .filter(|c| c.method == m.label() && c.n == n)
                .map(|c| c.risk)
                .collect();
            if !rows.iter().any(|r: &BenchRow| r.method == m.label() && r.n == n) {
                rows.push(summarize(m.label(), n, &risks));
            }
        }
    }
    if let Some(risk) = full? {
        rows.push(summarize("full", total, &[risk]));
    }
    Ok(BenchResult { rows, cells })
}

pub fn run_bench(plan: &BenchPlan) -> Result<BenchResult> {
    plan.validate()?;
    let (x, y) = plan.load_dataset()?;
    let ctx = BenchContext::new(x, y, &plan.methods)?;
    run_bench_on(plan, &ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::AlphaGrid;

    fn plan(methods: Vec<SelectorConfig>, budgets: Vec<usize>, seeds: Vec<u64>) -> BenchPlan {
        BenchPlan {
            dataset: DatasetSource::Synthetic {
                synth: GmmSpec {
                    n: 60,
                    r: 20,
                    clusters: 4,
                    sigma_max: 0.1,
                    seed: 1,
                },
            },
            methods: methods.into_iter().map(MethodEntry::from).collect(),
            budgets,
            seeds,
            evaluator: EvalConfig {
                grid: AlphaGrid::List(vec![0.01, 0.1, 1.0]),
                ..EvalConfig::default()
            },
            output: None,
            jobs: 2,
            include_full: true,
        }
    }

    #[test]
    fn validation() {
        let mut p = plan(vec![SelectorConfig::Uniform], vec![8, 4], vec![1]);
        assert!(p.validate().is_err());
        p.budgets = vec![4, 8];
        p.seeds = vec![1, 1];
        assert!(p.validate().is_err());
        p.seeds = vec![1, 2];
        p.jobs = 0;
        assert!(p.validate().is_err());
        p.jobs = 1;
        assert!(p.validate().is_ok());
        p.budgets = vec![4, 100];
        assert!(run_bench(&p).is_err());
    }

    #[test]
    fn table_shape_and_population_std() {
        let p = plan(
            vec![SelectorConfig::Uniform, SelectorConfig::Herding],
            vec![6, 10],
            vec![1, 2, 3],
        );
        let res = run_bench(&p).unwrap();
        assert_eq!(res.cells.len(), 12);
        assert_eq!(res.rows.len(), 5);
        assert_eq!(res.rows[4].method, "full");
        let row = res.row("uniform", 6).unwrap();
        let risks: Vec<f64> = res
            .cells
            .iter()
            .filter(|c| c.method == "uniform" && c.n == 6)
            .map(|c| c.risk)
            .collect();
        let mean = risks.iter().sum::<f64>() / 3.0;
        let var = risks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 3.0;
        assert!((row.std - var.sqrt()).abs() < 1e-15);
        assert_eq!(res.to_csv().lines().count(), 6);
    }

    #[test]
    fn permuting_methods_permutes_rows() {
        let a = run_bench(&plan(
            vec![SelectorConfig::Uniform, SelectorConfig::KCenter],
            vec![5],
            vec![4, 5],
        ))
        .unwrap();
        let b = run_bench(&plan(
            vec![SelectorConfig::KCenter, SelectorConfig::Uniform],
            vec![5],
            vec![5, 4],
        ))
        .unwrap();
        assert_eq!(a.rows[0].mean, b.rows[1].mean);
        assert_eq!(a.rows[1].mean, b.rows[0].mean);
        assert_eq!(a.rows[2], b.rows[2]);
    }

    #[test]
    fn plan_json_round_trip() {
        let text = r#"{
            "dataset": {"features": "x.skmm", "labels": "y.skmm"},
            "methods": [{"method": "uniform"}, {"method": "skmm", "m": 8, "label": "skmm-8"},
                        {"method": "t-leverage"}],
            "budgets": [4, 8],
            "seeds": [0, 1],
            "evaluator": {"grid": [0.1, 1.0]}
        }"#;
        let mut p: BenchPlan = serde_json::from_str(text).unwrap();
        assert_eq!(p.jobs, 1);
        assert_eq!(p.methods[1].label(), "skmm-8");
        assert_eq!(p.methods[2].config.leverage_variant(), Some(LeverageVariant::Truncated { rank: 32 }));
        assert_eq!(p.evaluator.folds, 2);
        p.resolve_paths(Path::new("/data"));
        assert_eq!(
            p.dataset,
            DatasetSource::Files {
                features: "/data/x.skmm".into(),
                labels: "/data/y.skmm".into()
            }
        );
    }

    #[test]
    fn labelled_methods_and_linear_grid_parse() {
        let plan: BenchPlan = serde_json::from_str(
            r#"{
              "dataset": {"synth": {"n": 2000, "r": 2400, "clusters": 8, "sigma_max": 0.04, "seed": 0}},
              "methods": [
                {"method": "t-leverage", "rank": 32},
                {"method": "skmm", "label": "skmm-fast", "learning_rate": 1e-5}
              ],
              "budgets": [48, 64],
              "seeds": [0, 1],
              "evaluator": {"grid": {"start": 0.01, "stop": 100.0, "count": 100}, "folds": 2},
              "include_full": true
            }"#,
        )
        .unwrap();
        plan.validate().unwrap();
        assert_eq!(plan.methods[1].label(), "skmm-fast");
        match &plan.methods[1].config {
            SelectorConfig::Skmm(c) => assert_eq!(c.optimizer.learning_rate, 1e-5),
            other => panic!("parsed {other:?}"),
        }
        assert_eq!(plan.evaluator.grid, AlphaGrid::default());
        assert_eq!(plan.jobs, 1);
        assert!(plan.include_full);
    }
}
