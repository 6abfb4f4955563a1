//! Polynomial extrapolation of a sampled function to `x = 0`.
//!
//! Used for both weak limits: `x = g²` (coupling → 0) and `x = 1/Δ²`
//! (meter width → ∞). The tableau is Neville–Aitken; on a geometric node
//! sequence `x_i = x_0 r^i` it is exactly the classic Richardson table.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtrapolationError {
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample abscissae must be distinct and positive")]
    BadNodes,
    #[error("x and y lengths differ")]
    LengthMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrapolation {
    /// Estimate of `y(0)`.
    pub value: f64,
    /// `|T(n−1, k) − T(n−2, k)|` for the deepest column `k` used.
    pub residual: f64,
    /// Number of elimination columns actually used.
    pub levels: usize,
}

/// Extrapolates `ys(xs)` to `x = 0` using at most `levels` elimination columns.
///
/// Nodes are expected in the order they were generated (typically decreasing
/// toward zero); the last rows of the tableau carry the best estimates.
pub fn extrapolate_to_zero(
    xs: &[f64],
    ys: &[f64],
    levels: usize,
) -> Result<Extrapolation, ExtrapolationError> {
    if xs.len() != ys.len() {
        return Err(ExtrapolationError::LengthMismatch);
    }
    let n = xs.len();
    if n < 3 {
        return Err(ExtrapolationError::TooFewSamples(n));
    }
    if xs.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(ExtrapolationError::BadNodes);
    }
    for i in 0..n {
        for j in 0..i {
            if xs[i] == xs[j] {
                return Err(ExtrapolationError::BadNodes);
            }
        }
    }

    let depth = levels.min(n - 2);
    // col[i] holds T(i, j) for the current column j.
    let mut col = ys.to_vec();
    for j in 1..=depth {
        let mut next = vec![f64::NAN; n];
        for i in j..n {
            next[i] = (xs[i] * col[i - 1] - xs[i - j] * col[i]) / (xs[i] - xs[i - j]);
        }
        col = next;
    }
    Ok(Extrapolation {
        value: col[n - 1],
        residual: (col[n - 1] - col[n - 2]).abs(),
        levels: depth,
    })
}
