//! Sweeps of `E[Z_t|H_t|²]` against `E[|H_t|²]` over time.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::girsanov::{
    gronwall_constant, gronwall_envelope, initial_lyapunov_mean, Measure, PathSet, Scenario,
};
use crate::model::Model;
use crate::rng::Stream;
use crate::simulate::TimeGrid;
use crate::stats::{Estimate, MeanAccumulator};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundednessSweep {
    pub scenario: String,
    pub times: Vec<f64>,
    /// `E[Z_t |h_t|²]` with `Z` the reference-measure density.
    pub weighted: Vec<Estimate>,
    /// `E[|h_t|²]`.
    pub plain: Vec<Estimate>,
    pub envelope: Vec<f64>,
    pub pass: bool,
}

/// `|h|² ≤ κ U` with `U` the model's Lyapunov functional.
fn sensor_to_lyapunov(model: &Model) -> f64 {
    match model {
        // |h(x)|² ≤ K²(1 + |x|)² ≤ 2K²(1 + |x|²)
        Model::JumpDiffusion(sm) => 2.0 * sm.linear_growth_k.powi(2),
        // |h|² = (b0 + b·1)² y² ≤ max_b (|b0| + |b|)² (1 + y²)
        Model::ChangeDetection(cd) => cd
            .b_grid
            .iter()
            .zip(&cd.b_prior)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&b, _)| (cd.b0.abs() + b.abs()).powi(2))
            .fold(0.0, f64::max),
    }
}

/// Weighted and plain sensor energy at the report times, bounded by the
/// Gronwall envelope scaled by the sensor's growth constant.
pub fn local_boundedness_sweep(
    model: &Model,
    grid: &TimeGrid,
    report: &[usize],
    n_paths: usize,
    stream: Stream,
) -> Result<BoundednessSweep> {
    let set = PathSet::simulate(
        &Scenario::reference_density(model.clone()),
        Measure::Base,
        grid,
        report,
        n_paths,
        stream,
    )?;
    let c = gronwall_constant(model);
    let u0 = initial_lyapunov_mean(model)
        .ok_or_else(|| Error::invalid("initial_law", "needs a finite second moment"))?;
    let kappa = sensor_to_lyapunov(model);
    let weighted: Vec<Estimate> = (0..set.times.len()).map(|j| set.weighted_h_sq(j)).collect();
    let plain: Vec<Estimate> = (0..set.times.len()).map(|j| set.plain_h_sq(j)).collect();
    let envelope: Vec<f64> = set
        .times
        .iter()
        .map(|&t| kappa * gronwall_envelope(model, c, u0, t))
        .collect();
    let pass = weighted
        .iter()
        .zip(&envelope)
        .all(|(w, e)| w.value.is_finite() && w.value <= e + 3.0 * w.se);
    Ok(BoundednessSweep {
        scenario: model.name().to_string(),
        times: set.times,
        weighted,
        plain,
        envelope,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceCheck {
    pub times: Vec<f64>,
    pub weighted: Vec<Estimate>,
    pub plain: Vec<Estimate>,
    /// Standard error of the per-path difference at each time.
    pub diff_se: Vec<f64>,
    pub pass: bool,
}

/// With `H` independent of `W`, `E[Z_t|H_t|²] = E[|H_t|²]` (= t for `H = |B'|`);
/// judged on the paired difference at every report time.
pub fn independence_identity_check(
    grid: &TimeGrid,
    report: &[usize],
    n_paths: usize,
    stream: Stream,
) -> Result<IndependenceCheck> {
    let set = PathSet::simulate(
        &Scenario::IndependentH,
        Measure::Base,
        grid,
        report,
        n_paths,
        stream,
    )?;
    let mut weighted = Vec::new();
    let mut plain = Vec::new();
    let mut diff_se = Vec::new();
    let mut pass = true;
    for j in 0..set.times.len() {
        let w = set.weighted_h_sq(j);
        let p = set.plain_h_sq(j);
        let mut acc = MeanAccumulator::default();
        for path in &set.paths {
            let s = path[j];
            acc.push(s.log_z.exp() * s.h_sq - s.h_sq);
        }
        let d = acc.estimate();
        pass &= d.within(0.0, 3.0);
        weighted.push(w);
        plain.push(p);
        diff_se.push(d.se);
    }
    Ok(IndependenceCheck {
        times: set.times,
        weighted,
        plain,
        diff_se,
        pass,
    })
}
