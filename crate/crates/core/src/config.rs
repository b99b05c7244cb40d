use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid geometry, truncation ladder, tolerances and iteration caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Samples per axis.
    pub grid: usize,
    /// Half-width `L` of the box `[-L, L]²`.
    pub half_width: f64,
    pub ladder: Vec<u32>,
    pub inner_tol: f64,
    pub residual_tol: f64,
    pub outer_tol: f64,
    pub ladder_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Decreasing margins defining the compact exhaustion used for ladder distances.
    pub compact_margins: Vec<f64>,
    /// Initial outer damping `λ` in `f ← (1 − λ) f + λ·solve(f)`.
    pub damping: f64,
    /// Majorant `Q(z)` for truncation by `Q(z) ≤ n`; truncation by `K ≤ n` when absent.
    pub truncation_majorant: Option<String>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid: 256,
            half_width: 4.0,
            ladder: vec![2, 4, 8, 16, 32, 64],
            inner_tol: 1e-10,
            residual_tol: 1e-3,
            outer_tol: 1e-8,
            ladder_tol: 1e-3,
            max_inner: 500,
            max_outer: 100,
            compact_margins: vec![0.5, 0.25, 0.125],
            damping: 1.0,
            truncation_majorant: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ParamOutOfRange(m));
        if self.grid < 16 || !self.grid.is_power_of_two() {
            return bad(format!("grid {} must be a power of two >= 16", self.grid));
        }
        if !(self.half_width > 1.0 && self.half_width.is_finite()) {
            return bad(format!("box half-width {} must exceed 1 so that z = 1 is on the grid", self.half_width));
        }
        if self.ladder.is_empty() || self.ladder[0] < 1 || self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("ladder {:?} must be a strictly increasing list of positive integers", self.ladder));
        }
        for (name, v) in [
            ("inner_tol", self.inner_tol),
            ("residual_tol", self.residual_tol),
            ("outer_tol", self.outer_tol),
            ("ladder_tol", self.ladder_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return bad("iteration caps must be positive".into());
        }
        if self.compact_margins.is_empty()
            || self.compact_margins.iter().any(|m| !(*m > 0.0))
            || self.compact_margins.windows(2).any(|w| w[0] <= w[1])
        {
            return bad(format!("compact margins {:?} must be positive and decreasing", self.compact_margins));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping {} must lie in (0, 1]", self.damping));
        }
        Ok(())
    }
}
