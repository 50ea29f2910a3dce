//! Drawing an index set from selection weights.

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Sequential draws proportional to the weights of the indices not yet
    /// chosen.
    #[default]
    WeightedWithoutReplacement,
    /// The `n` largest weights, lowest index first on ties.
    TopN,
}

/// Sampled indices plus how many slots had to be padded because fewer than
/// `n` weights were positive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sampled {
    /// Sorted ascending.
    pub indices: Vec<usize>,
    pub padded: usize,
}

/// Draws `n` distinct indices from nonnegative `weights`.
///
/// Slots that cannot be filled from positive weights are filled uniformly
/// at random from the remaining zero-weight indices, and counted in
/// [`Sampled::padded`].
pub fn sample_without_replacement(
    weights: &[f64],
    n: usize,
    mode: SamplingMode,
    rng: &mut Rng,
) -> Result<Sampled> {
    let total = weights.len();
    if n > total {
        return Err(Error::invalid(format!(
            "cannot draw {n} distinct indices from {total}"
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }

    let mut chosen = vec![false; total];
    let mut picked = Vec::with_capacity(n);
    match mode {
        SamplingMode::WeightedWithoutReplacement => {
            while picked.len() < n {
                let mass: f64 = weights
                    .iter()
                    .zip(&chosen)
                    .filter(|(_, &c)| !c)
                    .map(|(w, _)| w)
                    .sum();
                if mass <= 0.0 {
                    break;
                }
                let target = rng.random::<f64>() * mass;
                let mut acc = 0.0;
                let mut pick = None;
                for (i, &w) in weights.iter().enumerate() {
                    if chosen[i] || w <= 0.0 {
                        continue;
                    }
                    acc += w;
                    pick = Some(i);
                    if target < acc {
                        break;
                    }
                }
                // `pick` falls back to the last positive index when rounding
                // leaves `target` at the very top of the range.
                let i = pick.expect("positive mass implies a positive weight");
                chosen[i] = true;
                picked.push(i);
            }
        }
        SamplingMode::TopN => {
            let mut order: Vec<usize> = (0..total).filter(|&i| weights[i] > 0.0).collect();
            order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
            for &i in order.iter().take(n) {
                chosen[i] = true;
                picked.push(i);
            }
        }
    }

    let padded = n - picked.len();
    if padded > 0 {
        let pool: Vec<usize> = (0..total).filter(|&i| !chosen[i]).collect();
        for k in index::sample(rng, pool.len(), padded) {
            picked.push(pool[k]);
        }
    }
    picked.sort_unstable();
    Ok(Sampled {
        indices: picked,
        padded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn support_of_size_n_is_returned_exactly() {
        let mut w = vec![0.0; 10];
        for i in [1, 4, 7] {
            w[i] = 1.0 / 3.0;
        }
        for seed in 0..20 {
            let s = sample_without_replacement(
                &w,
                3,
                SamplingMode::WeightedWithoutReplacement,
                &mut rng::main_stream(seed),
            )
            .unwrap();
            assert_eq!(s.indices, vec![1, 4, 7]);
            assert_eq!(s.padded, 0);
        }
    }

    #[test]
    fn top_n_breaks_ties_by_index() {
        let mut r = rng::main_stream(0);
        let s = sample_without_replacement(&[0.4, 0.1, 0.3, 0.2], 2, SamplingMode::TopN, &mut r)
            .unwrap();
        assert_eq!(s.indices, vec![0, 2]);
        let s = sample_without_replacement(&[0.25; 4], 2, SamplingMode::TopN, &mut r).unwrap();
        assert_eq!(s.indices, vec![0, 1]);
    }

    #[test]
    fn pads_when_support_too_small() {
        let w = [0.0, 0.5, 0.0, 0.5, 0.0];
        for mode in [SamplingMode::WeightedWithoutReplacement, SamplingMode::TopN] {
            let s = sample_without_replacement(&w, 4, mode, &mut rng::main_stream(3)).unwrap();
            assert_eq!(s.padded, 2);
            assert_eq!(s.indices.len(), 4);
            assert!(s.indices.contains(&1) && s.indices.contains(&3));
            let mut d = s.indices.clone();
            d.dedup();
            assert_eq!(d.len(), 4);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut r = rng::main_stream(0);
        assert!(sample_without_replacement(&[0.5, 0.5], 3, SamplingMode::TopN, &mut r).is_err());
        assert!(sample_without_replacement(&[0.5, -0.1], 1, SamplingMode::TopN, &mut r).is_err());
    }

    /// Exact inclusion probabilities of sequential renormalized sampling,
    /// by enumerating every ordered draw sequence.
    fn exact_inclusion(w: &[f64], n: usize) -> Vec<f64> {
        fn rec(w: &[f64], n: usize, taken: &mut Vec<usize>, p: f64, out: &mut [f64]) {
            if taken.len() == n {
                for &i in taken.iter() {
                    out[i] += p;
                }
                return;
            }
            let mass: f64 = (0..w.len()).filter(|i| !taken.contains(i)).map(|i| w[i]).sum();
            for i in 0..w.len() {
                if taken.contains(&i) || w[i] == 0.0 {
                    continue;
                }
                taken.push(i);
                rec(w, n, taken, p * w[i] / mass, out);
                taken.pop();
            }
        }
        let mut out = vec![0.0; w.len()];
        rec(w, n, &mut Vec::new(), 1.0, &mut out);
        out
    }

    #[test]
    fn weighted_mode_matches_sequential_law() {
        let w = [0.4, 0.3, 0.2, 0.1];
        let exact = exact_inclusion(&w, 2);
        let trials = 100_000;
        let mut counts = [0usize; 4];
        for seed in 0..trials {
            let s = sample_without_replacement(
                &w,
                2,
                SamplingMode::WeightedWithoutReplacement,
                &mut rng::main_stream(seed as u64),
            )
            .unwrap();
            for i in s.indices {
                counts[i] += 1;
            }
        }
        for i in 0..4 {
            let p = exact[i];
            let freq = counts[i] as f64 / trials as f64;
            let tol = 5.0 * (p * (1.0 - p) / trials as f64).sqrt();
            assert!((freq - p).abs() <= tol, "index {i}: {freq} vs {p}");
        }
    }
}
