//! Euclidean projection onto the capped simplex
//! `{s : Σ s_i = 1, 0 ≤ s_i ≤ cap}`.
//!
//! The projection has the form `s_i = clip(v_i − τ, 0, cap)` for the unique
//! shift `τ` at which the clipped values sum to one. The clipped sum is a
//! nonincreasing piecewise-linear function of `τ` with breakpoints at `v_i`
//! and `v_i − cap`; we bisect over the sorted breakpoints and solve the final
//! linear piece exactly.

use crate::error::{Error, Result};

/// Slack on `N·cap ≥ 1` before the set is declared empty.
const FEASIBILITY_SLACK: f64 = 1e-12;

fn clipped_sum(v: &[f64], tau: f64, cap: f64) -> f64 {
    v.iter().map(|&x| (x - tau).clamp(0.0, cap)).sum()
}

/// Projects `v` onto the capped simplex with upper bound `cap`.
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Result<Vec<f64>> {
    let n = v.len();
    if n == 0 {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::invalid(format!("cap must be positive, got {cap}")));
    }
    if (n as f64) * cap < 1.0 - FEASIBILITY_SLACK {
        return Err(Error::invalid(format!(
            "capped simplex is empty: {n} coordinates with cap {cap}"
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("cannot project a vector with non-finite entries"));
    }
    if (n as f64) * cap <= 1.0 + FEASIBILITY_SLACK {
        // Only the all-cap point is feasible.
        return Ok(vec![cap; n]);
    }

    let mut breaks: Vec<f64> = v.iter().flat_map(|&x| [x - cap, x]).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    // f(breaks[0]) = n·cap ≥ 1 and f(breaks[last]) = 0 < 1; find adjacent
    // breakpoints lo < hi with f(lo) ≥ 1 > f(hi).
    let (mut lo, mut hi) = (0usize, breaks.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if clipped_sum(v, breaks[mid], cap) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (t_lo, t_hi) = (breaks[lo], breaks[hi]);
    let f_lo = clipped_sum(v, t_lo, cap);
    let f_hi = clipped_sum(v, t_hi, cap);
    let tau = if f_lo == 1.0 {
        t_lo
    } else {
        // f is linear on [t_lo, t_hi] with slope −(f_lo − f_hi)/(t_hi − t_lo).
        t_lo + (f_lo - 1.0) * (t_hi - t_lo) / (f_lo - f_hi)
    };
    Ok(v.iter().map(|&x| (x - tau).clamp(0.0, cap)).collect())
}

/// Checks `Σ s = 1` and `0 ≤ s_i ≤ cap` within `tol`.
pub fn is_feasible(s: &[f64], cap: f64, tol: f64) -> bool {
    let sum: f64 = s.iter().sum();
    (sum - 1.0).abs() <= tol && s.iter().all(|&x| x >= -tol && x <= cap + tol)
}
