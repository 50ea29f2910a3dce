//! Inner-product access for the geometric baselines.
//!
//! Herding, k-center and adaptive sampling only need inner products between
//! rows, one kernel column at a time. With raw features a column costs
//! `O(Nd)`; with a precomputed Gram matrix it is a copy, which is what makes
//! the full benchmark sweep affordable in high dimension.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dot, squared_norm, DenseMatrix};

pub trait KernelSource: Sync {
    /// Number of points.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `⟨f_i, f_i⟩` for every point.
    fn diagonal(&self) -> Vec<f64>;

    /// `⟨f_j, f_i⟩` for every `j`.
    fn column(&self, i: usize) -> Vec<f64>;

    /// `⟨f_j, μ⟩` for every `j`, with `μ` the mean point.
    fn mean_products(&self) -> Vec<f64>;
}

/// Kernel columns computed on demand from an `N×d` feature matrix.
pub struct FeatureKernel<'a> {
    features: &'a DenseMatrix,
}

impl<'a> FeatureKernel<'a> {
    pub fn new(features: &'a DenseMatrix) -> Self {
        Self { features }
    }
}

impl KernelSource for FeatureKernel<'_> {
    fn len(&self) -> usize {
        self.features.rows()
    }

    fn diagonal(&self) -> Vec<f64> {
        self.features.row_iter().map(squared_norm).collect()
    }

    fn column(&self, i: usize) -> Vec<f64> {
        let f = self.features;
        let fi = f.row(i);
        (0..f.rows()).into_par_iter().map(|j| dot(f.row(j), fi)).collect()
    }

    fn mean_products(&self) -> Vec<f64> {
        let f = self.features;
        let n = f.rows() as f64;
        let mut mu = vec![0.0; f.cols()];
        for row in f.row_iter() {
            for (m, x) in mu.iter_mut().zip(row) {
                *m += x;
            }
        }
        mu.iter_mut().for_each(|m| *m /= n);
        (0..f.rows()).into_par_iter().map(|j| dot(f.row(j), &mu)).collect()
    }
}

/// A precomputed symmetric `N×N` Gram matrix `FFᵀ`.
pub struct GramKernel<'a> {
    gram: &'a DenseMatrix,
}

impl<'a> GramKernel<'a> {
    pub fn new(gram: &'a DenseMatrix) -> Result<Self> {
        if gram.rows() != gram.cols() {
            return Err(Error::invalid("Gram matrix must be square"));
        }
        Ok(Self { gram })
    }
}

impl KernelSource for GramKernel<'_> {
    fn len(&self) -> usize {
        self.gram.rows()
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.gram.get(i, i)).collect()
    }

    fn column(&self, i: usize) -> Vec<f64> {
        // symmetric, so row i is column i
        self.gram.row(i).to_vec()
    }

    fn mean_products(&self) -> Vec<f64> {
        let n = self.len() as f64;
        self.gram
            .row_iter()
            .map(|row| row.iter().sum::<f64>() / n)
            .collect()
    }
}
