//! Classical coreset baselines: uniform, herding, k-center greedy, adaptive
//! sampling and leverage-score sampling.
//!
//! Every routine is a pure function of its inputs and seed. Ties go to the
//! lowest index.

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::kernel::{FeatureKernel, KernelSource};
use super::sampling::{sample_without_replacement, SamplingMode};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::moments::{leverage_scores, LeverageVariant};
use crate::rng;

/// Indices chosen by a baseline, sorted, plus the number of slots filled by
/// the uniform fallback.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaselinePick {
    pub indices: Vec<usize>,
    pub padded: usize,
}

fn check_budget(total: usize, n: usize) -> Result<()> {
    if n > total {
        return Err(Error::invalid(format!(
            "budget {n} exceeds the {total} available points"
        )));
    }
    Ok(())
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// `n` distinct indices drawn uniformly (partial Fisher-Yates shuffle).
pub fn uniform_indices(total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    check_budget(total, n)?;
    let mut rng = rng::main_stream(seed);
    let mut all: Vec<usize> = (0..total).collect();
    let (head, _) = all.partial_shuffle(&mut rng, n);
    Ok(sorted(head.to_vec()))
}

/// Greedy herding: starting from `w = μ`, repeatedly pick the unchosen point
/// maximizing `⟨w, f_i⟩` and update `w ← w + μ − f_i`. Returned in pick order.
pub fn herding_order<K: KernelSource + ?Sized>(kernel: &K, n: usize) -> Result<Vec<usize>> {
    let total = kernel.len();
    check_budget(total, n)?;
    let mean_prod = kernel.mean_products();
    // acc_i = Σ_{chosen s} ⟨f_s, f_i⟩
    let mut acc = vec![0.0; total];
    let mut chosen = vec![false; total];
    let mut order = Vec::with_capacity(n);
    for t in 0..n {
        // w_t = (t+1)μ − Σ_chosen f_s
        let scale = (t + 1) as f64;
        let mut best: Option<(usize, f64)> = None;
        for i in 0..total {
            if chosen[i] {
                continue;
            }
            let score = scale * mean_prod[i] - acc[i];
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        let (pick, _) = best.expect("budget checked");
        chosen[pick] = true;
        order.push(pick);
        if t + 1 < n {
            for (a, k) in acc.iter_mut().zip(kernel.column(pick)) {
                *a += k;
            }
        }
    }
    Ok(order)
}

pub fn herding_select(features: &DenseMatrix, n: usize) -> Result<Vec<usize>> {
    herding_order(&FeatureKernel::new(features), n).map(sorted)
}

/// k-center greedy from a given first center. Returned in pick order.
pub fn kcenter_order_from<K: KernelSource + ?Sized>(
    kernel: &K,
    n: usize,
    start: usize,
) -> Result<Vec<usize>> {
    let total = kernel.len();
    check_budget(total, n)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    if start >= total {
        return Err(Error::invalid(format!("start index {start} out of range")));
    }
    let diag = kernel.diagonal();
    let mut min_dist = vec![f64::INFINITY; total];
    let mut chosen = vec![false; total];
    let mut order = Vec::with_capacity(n);
    let mut center = start;
    loop {
        chosen[center] = true;
        order.push(center);
        if order.len() == n {
            break;
        }
        let col = kernel.column(center);
        for j in 0..total {
            let d = (diag[j] + diag[center] - 2.0 * col[j]).max(0.0);
            if d < min_dist[j] {
                min_dist[j] = d;
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..total {
            if chosen[j] {
                continue;
            }
            if best.is_none_or(|(_, b)| min_dist[j] > b) {
                best = Some((j, min_dist[j]));
            }
        }
        center = best.expect("budget checked").0;
    }
    Ok(order)
}

/// k-center greedy with a seed-chosen first center.
pub fn kcenter_order<K: KernelSource + ?Sized>(kernel: &K, n: usize, seed: u64) -> Result<Vec<usize>> {
    check_budget(kernel.len(), n)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let start = rng::main_stream(seed).random_range(0..kernel.len());
    kcenter_order_from(kernel, n, start)
}

pub fn kcenter_select(features: &DenseMatrix, n: usize, seed: u64) -> Result<Vec<usize>> {
    kcenter_order(&FeatureKernel::new(features), n, seed).map(sorted)
}

/// Outcome of adaptive sampling, in pick order.
#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub order: Vec<usize>,
    pub padded: usize,
    /// Squared residual norms after the last projection.
    pub residuals: Vec<f64>,
}

/// Adaptive sampling: pick a point with probability proportional to its
/// squared residual norm, project every residual off the picked direction,
/// repeat. Residual updates are carried out on kernel columns (a pivoted
/// Cholesky factorization of the Gram matrix), which is algebraically the
/// same as Gram-Schmidt on the rows.
pub fn adaptive_run<K: KernelSource + ?Sized>(kernel: &K, n: usize, seed: u64) -> Result<AdaptiveRun> {
    let total = kernel.len();
    check_budget(total, n)?;
    let mut rng = rng::main_stream(seed);
    let mut residual = kernel.diagonal();
    let floor = 1e-12 * residual.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut factors: Vec<Vec<f64>> = Vec::new();
    let mut chosen = vec![false; total];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        let mass: f64 = (0..total)
            .filter(|&i| !chosen[i] && residual[i] > floor)
            .map(|i| residual[i])
            .sum();
        if mass <= 0.0 {
            break;
        }
        let target = rng.random::<f64>() * mass;
        let mut acc = 0.0;
        let mut pick = None;
        for i in 0..total {
            if chosen[i] || residual[i] <= floor {
                continue;
            }
            acc += residual[i];
            pick = Some(i);
            if target < acc {
                break;
            }
        }
        let i = pick.expect("positive mass");
        chosen[i] = true;
        order.push(i);

        let mut g = kernel.column(i);
        for l in &factors {
            let li = l[i];
            for (gj, lj) in g.iter_mut().zip(l) {
                *gj -= lj * li;
            }
        }
        let pivot = g[i];
        if pivot <= 0.0 {
            residual[i] = 0.0;
            continue;
        }
        let inv = 1.0 / pivot.sqrt();
        g.iter_mut().for_each(|x| *x *= inv);
        for (r, x) in residual.iter_mut().zip(&g) {
            *r = (*r - x * x).max(0.0);
        }
        residual[i] = 0.0;
        factors.push(g);
    }

    let padded = n - order.len();
    if padded > 0 {
        let pool: Vec<usize> = (0..total).filter(|&i| !chosen[i]).collect();
        for k in rand::seq::index::sample(&mut rng, pool.len(), padded) {
            order.push(pool[k]);
        }
    }
    Ok(AdaptiveRun {
        order,
        padded,
        residuals: residual,
    })
}

pub fn adaptive_select(features: &DenseMatrix, n: usize, seed: u64) -> Result<BaselinePick> {
    let run = adaptive_run(&FeatureKernel::new(features), n, seed)?;
    Ok(BaselinePick {
        indices: sorted(run.order),
        padded: run.padded,
    })
}

/// Samples `n` indices without replacement proportionally to `scores`.
pub fn sample_by_scores(scores: &[f64], n: usize, seed: u64) -> Result<BaselinePick> {
    let mut rng = rng::main_stream(seed);
    let s = sample_without_replacement(
        scores,
        n,
        SamplingMode::WeightedWithoutReplacement,
        &mut rng,
    )?;
    Ok(BaselinePick {
        indices: s.indices,
        padded: s.padded,
    })
}

pub fn leverage_select(
    features: &DenseMatrix,
    n: usize,
    variant: LeverageVariant,
    seed: u64,
) -> Result<BaselinePick> {
    check_budget(features.rows(), n)?;
    let scores = leverage_scores(features, variant)?;
    sample_by_scores(&scores, n, seed)
}
