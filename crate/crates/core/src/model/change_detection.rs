//! Sudden parameter change in a linear observation drift.
//!
//! `dY = (b0 + B 1{t ≥ T}) Y dt + dW` with `B`, `T` independent of `W` and
//! drawn from priors on finite grids. The filter state is `(B, T, 1{t ≥ T})`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeDetectionSpec {
    pub name: String,
    pub b0: f64,
    pub b_grid: Vec<f64>,
    /// Prior weights on `b_grid` (normalised on construction); uniform if empty.
    #[serde(default)]
    pub b_prior: Vec<f64>,
    pub tau_grid: Vec<f64>,
    #[serde(default)]
    pub tau_prior: Vec<f64>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

impl Default for ChangeDetectionSpec {
    fn default() -> Self {
        ChangeDetectionSpec {
            name: "change_detection".to_string(),
            b0: 0.5,
            b_grid: linspace(0.5, 2.5, 21),
            b_prior: Vec::new(),
            tau_grid: linspace(0.0, 3.0, 21),
            tau_prior: Vec::new(),
        }
    }
}

impl ChangeDetectionSpec {
    /// Point masses at `b` and `tau`.
    pub fn fixed(b0: f64, b: f64, tau: f64) -> Self {
        ChangeDetectionSpec {
            name: "change_detection_fixed".to_string(),
            b0,
            b_grid: vec![b],
            b_prior: vec![1.0],
            tau_grid: vec![tau],
            tau_prior: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeDetection {
    pub name: String,
    pub b0: f64,
    pub b_grid: Vec<f64>,
    pub b_prior: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub tau_prior: Vec<f64>,
}

fn normalise(name: &'static str, grid: &[f64], prior: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid(name, "grid must be non-empty"));
    }
    if !grid.iter().all(|v| v.is_finite()) {
        return Err(Error::non_finite(name));
    }
    let w: Vec<f64> = if prior.is_empty() {
        vec![1.0; grid.len()]
    } else if prior.len() == grid.len() {
        prior.to_vec()
    } else {
        return Err(Error::DimensionMismatch {
            what: name,
            expected: grid.len(),
            actual: prior.len(),
        });
    };
    if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid(
            name,
            "prior weights must be finite and nonnegative",
        ));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate(format!("{name} prior has zero mass")));
    }
    Ok(w.into_iter().map(|v| v / total).collect())
}

impl ChangeDetection {
    pub const STATE_DIM: usize = 3;
    pub const MAGNITUDE: usize = 0;
    pub const CHANGE_TIME: usize = 1;
    pub const INDICATOR: usize = 2;

    pub fn new(spec: ChangeDetectionSpec) -> Result<Self> {
        if !spec.b0.is_finite() {
            return Err(Error::non_finite("b0"));
        }
        let b_prior = normalise("b_prior", &spec.b_grid, &spec.b_prior)?;
        let tau_prior = normalise("tau_prior", &spec.tau_grid, &spec.tau_prior)?;
        if spec.tau_grid.iter().any(|&t| t < 0.0) {
            return Err(Error::invalid(
                "tau_grid",
                "change times must be nonnegative",
            ));
        }
        Ok(ChangeDetection {
            name: spec.name,
            b0: spec.b0,
            b_grid: spec.b_grid,
            b_prior,
            tau_grid: spec.tau_grid,
            tau_prior,
        })
    }

    /// `1{t ≥ τ}` with a small absolute tolerance so that grid times hit
    /// grid change points regardless of rounding in `k * dt`.
    #[inline]
    pub fn has_changed(t: f64, tau: f64) -> bool {
        t + 1e-9 >= tau
    }

    /// Observation drift coefficient `b0 + b·1{t ≥ τ}`.
    #[inline]
    pub fn rate(&self, b: f64, indicator: f64) -> f64 {
        self.b0 + b * indicator
    }

    #[inline]
    pub fn sensor(&self, x: &[f64], y: f64) -> f64 {
        self.rate(x[Self::MAGNITUDE], x[Self::INDICATOR]) * y
    }

    pub fn sample_initial(&self, rng: &mut StreamRng, out: &mut [f64]) {
        let b = self.b_grid[sample_index(&self.b_prior, rng)];
        let tau = self.tau_grid[sample_index(&self.tau_prior, rng)];
        out[Self::MAGNITUDE] = b;
        out[Self::CHANGE_TIME] = tau;
        out[Self::INDICATOR] = if Self::has_changed(0.0, tau) {
            1.0
        } else {
            0.0
        };
    }

    /// Advance the state to time `t_next`.
    #[inline]
    pub fn advance(&self, x: &mut [f64], t_next: f64) {
        x[Self::INDICATOR] = if Self::has_changed(t_next, x[Self::CHANGE_TIME]) {
            1.0
        } else {
            0.0
        };
    }

    /// The Gronwall constant `c(b) = 4 + (b0 + b)^2`.
    pub fn gronwall_constant(&self, b: f64) -> f64 {
        4.0 + (self.b0 + b).powi(2)
    }
}

fn sample_index(weights: &[f64], rng: &mut StreamRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
