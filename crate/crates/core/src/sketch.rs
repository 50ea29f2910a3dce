//! Johnson-Lindenstrauss sketches `Γ ∈ ℝ^{r×m}` that compress an `N×r`
//! gradient matrix to `N×m`.
//!
//! Both operator kinds are normalized so that `E‖Γᵀu‖² = 1` for a unit `u`:
//! Gaussian entries are `N(0, 1/m)`, and sparse-sign rows carry `ξ` entries of
//! `±1/√ξ` at distinct uniformly random columns. Row `k` of `Γ` is drawn from
//! its own substream (see [`crate::rng`]), so an operator is a pure function
//! of `(kind, r, m, seed, ξ)`.
//!
//! Application is row-independent and accumulates each output row in a fixed
//! order. Sketching `G` in blocks, in parallel, or as a stream therefore gives
//! bit-identical rows.

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

/// Default number of rows per block when sketching.
pub const DEFAULT_BLOCK_ROWS: usize = 256;

/// Nonzeros per row for sparse-sign sketches unless configured otherwise.
pub const DEFAULT_SPARSITY: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SketchKind {
    Gaussian,
    SparseSign { sparsity: usize },
}

#[derive(Clone, Debug)]
enum Entries {
    Dense(DenseMatrix),
    /// `sparsity` (column, value) pairs per input row, stored flat.
    Sparse {
        sparsity: usize,
        cols: Vec<u32>,
        values: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct SketchOperator {
    kind: SketchKind,
    rows: usize,
    cols: usize,
    seed: u64,
    entries: Entries,
}

/// Gaussian embedding with i.i.d. `N(0, 1/m)` entries.
pub fn build_gaussian_sketch(r: usize, m: usize, seed: u64) -> Result<SketchOperator> {
    check_dims(r, m)?;
    let scale = 1.0 / (m as f64).sqrt();
    let mut data = vec![0.0; r * m];
    data.par_chunks_mut(m).enumerate().for_each(|(k, row)| {
        let mut rng = rng::row_stream(seed, k as u64);
        for v in row.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = z * scale;
        }
    });
    Ok(SketchOperator {
        kind: SketchKind::Gaussian,
        rows: r,
        cols: m,
        seed,
        entries: Entries::Dense(DenseMatrix::new(r, m, data)?),
    })
}

/// Sparse sign embedding with `sparsity` Rademacher nonzeros per row.
pub fn build_sparse_sign_sketch(
    r: usize,
    m: usize,
    sparsity: usize,
    seed: u64,
) -> Result<SketchOperator> {
    check_dims(r, m)?;
    if sparsity < 1 || sparsity > m {
        return Err(Error::invalid(format!(
            "sparse-sign sparsity must lie in [1, {m}], got {sparsity}"
        )));
    }
    let value = 1.0 / (sparsity as f64).sqrt();
    let mut cols = vec![0u32; r * sparsity];
    let mut values = vec![0.0; r * sparsity];
    cols.par_chunks_mut(sparsity)
        .zip(values.par_chunks_mut(sparsity))
        .enumerate()
        .for_each(|(k, (c, v))| {
            let mut rng = rng::row_stream(seed, k as u64);
            let picked = index::sample(&mut rng, m, sparsity);
            for (slot, col) in picked.into_iter().enumerate() {
                c[slot] = col as u32;
                v[slot] = if rng.random::<bool>() { value } else { -value };
            }
        });
    Ok(SketchOperator {
        kind: SketchKind::SparseSign { sparsity },
        rows: r,
        cols: m,
        seed,
        entries: Entries::Sparse {
            sparsity,
            cols,
            values,
        },
    })
}

/// Builds an operator of the given kind.
pub fn build_sketch(kind: SketchKind, r: usize, m: usize, seed: u64) -> Result<SketchOperator> {
    match kind {
        SketchKind::Gaussian => build_gaussian_sketch(r, m, seed),
        SketchKind::SparseSign { sparsity } => build_sparse_sign_sketch(r, m, sparsity, seed),
    }
}

/// `G̃ = GΓ`, computed block-parallel with the default block size.
pub fn apply_sketch(g: &DenseMatrix, op: &SketchOperator) -> Result<DenseMatrix> {
    op.apply_blocked(g, DEFAULT_BLOCK_ROWS)
}

fn check_dims(r: usize, m: usize) -> Result<()> {
    if r == 0 || m == 0 {
        return Err(Error::invalid(format!(
            "sketch dimensions must be positive, got r={r}, m={m}"
        )));
    }
    Ok(())
}

impl SketchOperator {
    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    /// Input dimension `r`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Sketch dimension `m`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Materializes `Γ` as a dense `r×m` matrix.
    pub fn to_dense(&self) -> DenseMatrix {
        match &self.entries {
            Entries::Dense(m) => m.clone(),
            Entries::Sparse {
                sparsity,
                cols,
                values,
            } => {
                let mut out = DenseMatrix::zeros(self.rows, self.cols);
                for k in 0..self.rows {
                    for t in k * sparsity..(k + 1) * sparsity {
                        out.set(k, cols[t] as usize, values[t]);
                    }
                }
                out
            }
        }
    }

    /// Writes `gΓ` into `out` for one input row.
    pub fn sketch_row(&self, g: &[f64], out: &mut [f64]) {
        debug_assert_eq!(g.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        match &self.entries {
            Entries::Dense(gamma) => {
                for (k, &gk) in g.iter().enumerate() {
                    if gk == 0.0 {
                        continue;
                    }
                    for (o, &w) in out.iter_mut().zip(gamma.row(k)) {
                        *o += gk * w;
                    }
                }
            }
            Entries::Sparse {
                sparsity,
                cols,
                values,
            } => {
                for (k, &gk) in g.iter().enumerate() {
                    if gk == 0.0 {
                        continue;
                    }
                    for t in k * sparsity..(k + 1) * sparsity {
                        out[cols[t] as usize] += gk * values[t];
                    }
                }
            }
        }
    }

    /// Sketches one block of rows sequentially.
    pub fn apply_rows(&self, block: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_input(block)?;
        let mut out = DenseMatrix::zeros(block.rows(), self.cols);
        for i in 0..block.rows() {
            self.sketch_row(block.row(i), out.row_mut(i));
        }
        Ok(out)
    }

    /// Sketches `g` with blocks of `block_rows` rows processed in parallel.
    pub fn apply_blocked(&self, g: &DenseMatrix, block_rows: usize) -> Result<DenseMatrix> {
        self.check_input(g)?;
        if block_rows == 0 {
            return Err(Error::invalid("block size must be positive"));
        }
        let m = self.cols;
        let mut data = vec![0.0; g.rows() * m];
        if m > 0 {
            data.par_chunks_mut(block_rows * m)
                .enumerate()
                .for_each(|(b, chunk)| {
                    let first = b * block_rows;
                    for (local, out) in chunk.chunks_exact_mut(m).enumerate() {
                        self.sketch_row(g.row(first + local), out);
                    }
                });
        }
        DenseMatrix::new(g.rows(), m, data)
    }

    /// Sketches a stream of row blocks without holding the full input.
    pub fn apply_stream<I>(&self, blocks: I) -> Result<DenseMatrix>
    where
        I: IntoIterator<Item = DenseMatrix>,
    {
        let mut sketched = Vec::new();
        for block in blocks {
            sketched.push(self.apply_rows(&block)?);
        }
        if sketched.is_empty() {
            return Ok(DenseMatrix::zeros(0, self.cols));
        }
        DenseMatrix::vstack(&sketched)
    }

    fn check_input(&self, g: &DenseMatrix) -> Result<()> {
        if g.cols() != self.rows {
            return Err(Error::invalid(format!(
                "input has {} columns but the sketch expects {}",
                g.cols(),
                self.rows
            )));
        }
        Ok(())
    }

    /// Operator backed by an explicit matrix.
    #[cfg(test)]
    pub(crate) fn from_dense(gamma: DenseMatrix) -> Self {
        SketchOperator {
            kind: SketchKind::Gaussian,
            rows: gamma.rows(),
            cols: gamma.cols(),
            seed: 0,
            entries: Entries::Dense(gamma),
        }
    }
}
