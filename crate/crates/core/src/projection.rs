//! Euclidean projection onto the antenna-position polytope
//! `{x : x_n - x_{n-1} >= s, -D/2 <= x_n <= D/2}`.
//!
//! Substituting `y_n = x_n - n s` turns the spacing chain into `y`
//! nondecreasing. Under that order only the end bounds can bind, and they
//! become one common box `[-D/2, D/2 - (N-1) s]` on every `y_n`. Clamping an
//! isotonic fit to a common box keeps it optimal, so the projection is one
//! pool-adjacent-violators pass followed by a clamp.

use crate::error::{Error, Result};

/// Feasible set of ordered positions with a minimum spacing inside a panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingPolytope {
    pub n: usize,
    pub spacing: f64,
    pub panel_length: f64,
}

impl SpacingPolytope {
    pub fn new(n: usize, spacing: f64, panel_length: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("n", "need at least one antenna"));
        }
        if !(spacing.is_finite() && spacing >= 0.0) {
            return Err(Error::arg("spacing", format!("must be nonnegative, got {spacing}")));
        }
        if !(panel_length.is_finite() && panel_length >= 0.0) {
            return Err(Error::arg(
                "panel_length",
                format!("must be nonnegative, got {panel_length}"),
            ));
        }
        let required = (n - 1) as f64 * spacing;
        if required > panel_length * (1.0 + 1e-12) {
            return Err(Error::InfeasiblePanel {
                n,
                spacing,
                required,
                panel: panel_length,
            });
        }
        Ok(SpacingPolytope {
            n,
            spacing,
            panel_length,
        })
    }

    /// Closest feasible point to `v` in the Euclidean norm.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "dimension mismatch");
        let s = self.spacing;
        let lo = -self.panel_length / 2.0;
        let hi = (self.panel_length / 2.0 - (self.n - 1) as f64 * s).max(lo);
        let shifted: Vec<f64> = v.iter().enumerate().map(|(i, &x)| x - i as f64 * s).collect();
        isotonic_fit(&shifted)
            .into_iter()
            .enumerate()
            .map(|(i, y)| y.clamp(lo, hi) + i as f64 * s)
            .collect()
    }

    /// Whether `x` satisfies every constraint up to `slack`.
    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        let half = self.panel_length / 2.0;
        x.len() == self.n
            && x.iter().all(|&v| v >= -half - slack && v <= half + slack)
            && x.windows(2).all(|w| w[1] - w[0] >= self.spacing - slack)
    }
}

/// Least-squares nondecreasing fit with unit weights (pool adjacent violators).
pub fn isotonic_fit(values: &[f64]) -> Vec<f64> {
    // Blocks as (mean, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        let mut mean = v;
        let mut count = 1usize;
        while let Some(&(m, c)) = blocks.last() {
            if m <= mean {
                break;
            }
            blocks.pop();
            mean = (m * c as f64 + mean * count as f64) / (c + count) as f64;
            count += c;
        }
        blocks.push((mean, count));
    }
    blocks
        .into_iter()
        .flat_map(|(m, c)| std::iter::repeat_n(m, c))
        .collect()
}
