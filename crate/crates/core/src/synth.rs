//! Gaussian-mixture regression benchmark with noiseless cluster labels.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::rng;

pub const PARTITION_RETRIES: usize = 1000;

/// Name of the cluster-size law, stored with generated datasets.
pub const PARTITION_LAW: &str = "multinomial-uniform-rejected-if-empty";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmSpec {
    /// Number of samples `N`.
    pub n: usize,
    /// Ambient dimension `r`.
    pub r: usize,
    /// Cluster count `r̄`.
    pub clusters: usize,
    pub sigma_max: f64,
    pub seed: u64,
}

impl GmmSpec {
    /// `N = 2000`, `r = 2400`, `r̄ = 8`, `σ_max = 0.04`.
    pub fn reference(seed: u64) -> Self {
        Self {
            n: 2000,
            r: 2400,
            clusters: 8,
            sigma_max: 0.04,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            return Err(Error::invalid("need at least one cluster"));
        }
        if self.clusters > self.n || self.clusters > self.r {
            return Err(Error::invalid(format!(
                "{} clusters exceed min(N = {}, r = {})",
                self.clusters, self.n, self.r
            )));
        }
        if !(self.sigma_max >= 0.0) || !self.sigma_max.is_finite() {
            return Err(Error::invalid("σ_max must be a finite nonnegative number"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedDataset {
    pub spec: GmmSpec,
    pub features: DenseMatrix,
    pub labels: Vec<f64>,
    pub assignment: Vec<usize>,
    /// `r̄×r`, row `j` is `μ_j`.
    pub means: DenseMatrix,
    pub stds: Vec<f64>,
    pub theta: Vec<f64>,
    pub partition_law: String,
}

impl GeneratedDataset {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.spec.clusters];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
}

fn partition(n: usize, clusters: usize, master: &mut rng::Rng) -> Result<Vec<usize>> {
    for _ in 0..PARTITION_RETRIES {
        let assignment: Vec<usize> = (0..n).map(|_| master.random_range(0..clusters)).collect();
        let mut seen = vec![false; clusters];
        assignment.iter().for_each(|&c| seen[c] = true);
        if seen.iter().all(|&s| s) {
            return Ok(assignment);
        }
    }
    Err(Error::numeric(format!(
        "no partition of {n} samples into {clusters} nonempty clusters after {PARTITION_RETRIES} draws"
    )))
}

pub fn gmm_generate(spec: &GmmSpec) -> Result<GeneratedDataset> {
    spec.validate()?;
    let (n, r, k) = (spec.n, spec.r, spec.clusters);
    let mut master = rng::main_stream(spec.seed);

    let assignment = partition(n, k, &mut master)?;
    let scales: Vec<f64> = (0..k)
        .map(|_| master.random_range(1..=k) as f64 * k as f64)
        .collect();
    let stds: Vec<f64> = (0..k)
        .map(|_| master.random::<f64>() * spec.sigma_max)
        .collect();
    let theta: Vec<f64> = (0..r).map(|_| master.sample(StandardNormal)).collect();

    let mut means = DenseMatrix::zeros(k, r);
    for (j, &z) in scales.iter().enumerate() {
        means.set(j, j, z);
    }
    let cluster_labels: Vec<f64> = (0..k).map(|j| dot(means.row(j), &theta)).collect();

    let mut data = vec![0.0; n * r];
    data.par_chunks_mut(r).enumerate().for_each(|(i, row)| {
        let c = assignment[i];
        let mut stream = rng::row_stream(spec.seed, i as u64);
        let sd = stds[c];
        for v in row.iter_mut() {
            let z: f64 = stream.sample(StandardNormal);
            *v = sd * z;
        }
        row[c] += scales[c];
    });
    let features = DenseMatrix::new(n, r, data)?;
    let labels = assignment.iter().map(|&c| cluster_labels[c]).collect();

    Ok(GeneratedDataset {
        spec: spec.clone(),
        features,
        labels,
        assignment,
        means,
        stds,
        theta,
        partition_law: PARTITION_LAW.to_string(),
    })
}
