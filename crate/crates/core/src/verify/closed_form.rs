//! Checks against closed forms: the Dufresne law, the Revuz–Yor energy and
//! the exit probabilities behind the Kazamaki gap.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::girsanov::{revuz_yor_closed_form, Measure, PathSet, Scenario};
use crate::rng::Stream;
use crate::simulate::{
    dufresne_path, CounterexamplePaths, CounterexampleSpec, HittingExit, TimeGrid,
};
use crate::stats::{ls_slope, Estimate};

/// Truncation bias of `P(X_S < 1)` for one path with truncated value `x` and
/// tail log-scale `g`: `P(x < 1 ≤ x + e^g · 2/E) = 1 − exp(−2e^g / (1 − x))`.
fn truncation_bias(x: f64, g: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else {
        -(-2.0 * g.exp() / (1.0 - x)).exp_m1()
    }
}

pub fn dufresne_target() -> f64 {
    (-2.0f64).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DufresneCheck {
    pub horizon: f64,
    pub estimate: Estimate,
    pub target: f64,
    pub allowance: f64,
    /// `3 SE + allowance`.
    pub tolerance: f64,
    /// False when the truncation allowance exceeds the statistical band.
    pub truncation_valid: bool,
    pub pass: bool,
}

/// `P(X_S < 1)` for the truncated functional versus `e^{−2}`.
///
/// The neglected tail is `e^{B_S − S/2}` times an independent copy of the full
/// integral, whose law `2/E` is known, so each path also yields the exact
/// conditional probability that the tail would carry it across 1. Their mean
/// (plus 3 SE) is the truncation allowance.
pub fn dufresne_check(n_paths: usize, grid: &TimeGrid, stream: Stream) -> Result<DufresneCheck> {
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", "need at least two paths"));
    }
    let paths: Vec<(f64, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| dufresne_path(grid, stream.child(i)))
        .collect();
    let below: Vec<f64> = paths
        .iter()
        .map(|&(x, _)| if x < 1.0 { 1.0 } else { 0.0 })
        .collect();
    let bias: Vec<f64> = paths.iter().map(|&(x, g)| truncation_bias(x, g)).collect();
    let estimate = Estimate::from_samples(&below);
    let bias = Estimate::from_samples(&bias);
    let target = dufresne_target();
    let allowance = bias.value + 3.0 * bias.se;
    let tolerance = 3.0 * estimate.se + allowance;
    let truncation_valid = allowance <= 3.0 * estimate.se;
    Ok(DufresneCheck {
        horizon: grid.horizon,
        estimate,
        target,
        allowance,
        tolerance,
        truncation_valid,
        pass: truncation_valid && (estimate.value - target).abs() <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevuzYorEnergy {
    pub alpha: f64,
    pub t: f64,
    pub closed_form: f64,
    /// `E_Q[∫H²]`, simulated under the transformed measure.
    pub transformed: Estimate,
    /// `E[∫Z H²]` computed pathwise under the base measure.
    pub base: Estimate,
    pub pass_transformed: bool,
    pub pass_base: bool,
}

/// Both routes to `E[∫₀ᵗ Z_s H_s² ds]` with `H = αW`; `grid.horizon = t`.
pub fn revuz_yor_energy(
    alpha: f64,
    grid: &TimeGrid,
    n_paths: usize,
    stream: Stream,
) -> Result<RevuzYorEnergy> {
    let scenario = Scenario::RevuzYor { alpha };
    let report = [grid.n_steps];
    let tilted = PathSet::simulate(
        &scenario,
        Measure::Transformed,
        grid,
        &report,
        n_paths,
        stream.tagged("transformed"),
    )?;
    let base = PathSet::simulate(
        &scenario,
        Measure::Base,
        grid,
        &report,
        n_paths,
        stream.tagged("base"),
    )?;
    let closed_form = revuz_yor_closed_form(alpha, grid.horizon);
    let transformed = tilted.transformed_energy(0);
    let base = base.transformed_energy(0);
    Ok(RevuzYorEnergy {
        alpha,
        t: grid.horizon,
        closed_form,
        transformed,
        base,
        pass_transformed: transformed.within(closed_form, 3.0),
        pass_base: base.within(closed_form, 3.0),
    })
}

/// `Σ_{n=1}^N n/(n+1)²`.
pub fn kazamaki_partial_sum(n_max: u64) -> f64 {
    (1..=n_max)
        .map(|n| n as f64 / ((n + 1) as f64).powi(2))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingRow {
    pub n: u32,
    pub estimate: Estimate,
    pub target: f64,
    pub unresolved: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KazamakiCheck {
    pub rows: Vec<HittingRow>,
    /// `(N, Σ_{n≤N} n/(n+1)²)`.
    pub partial_sums: Vec<(u64, f64)>,
    /// Least-squares slope of the partial sums against `ln N` (→ 1).
    pub log_slope: f64,
    /// Growth from `N = 10³` to `N = 10⁴` (→ ln 10).
    pub decade_growth: f64,
    pub sums_pass: bool,
    pub pass: bool,
}

/// Band for the exit probabilities, in standard errors.
pub const HITTING_BAND: f64 = 5.0;

/// Exit of `W` from `(−1, n)` for each `n`; `grid.horizon` caps each path.
pub fn kazamaki_gap_check(
    n_list: &[u32],
    n_paths: usize,
    grid: &TimeGrid,
    stream: Stream,
) -> Result<KazamakiCheck> {
    if n_list.is_empty() {
        return Err(Error::invalid("n_list", "must be non-empty"));
    }
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", "need at least two paths"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let CounterexamplePaths::Hitting(exits) = CounterexampleSpec::Hitting { n }.simulate(
            grid,
            n_paths,
            stream.child(u64::from(n)),
        )?
        else {
            unreachable!("hitting spec yields exits")
        };
        let lower: Vec<f64> = exits
            .iter()
            .map(|e| if *e == HittingExit::Lower { 1.0 } else { 0.0 })
            .collect();
        let unresolved = exits
            .iter()
            .filter(|e| **e == HittingExit::Unresolved)
            .count();
        let estimate = Estimate::from_samples(&lower);
        let target = n as f64 / (n as f64 + 1.0);
        rows.push(HittingRow {
            n,
            estimate,
            target,
            unresolved,
            pass: unresolved == 0 && estimate.within(target, HITTING_BAND),
        });
    }
    let ns = [10u64, 100, 1_000, 10_000, 100_000];
    let partial_sums: Vec<(u64, f64)> = ns.iter().map(|&n| (n, kazamaki_partial_sum(n))).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = partial_sums.iter().map(|p| p.1).collect();
    let log_slope = ls_slope(&xs, &ys);
    let decade_growth = ys[3] - ys[2];
    let sums_pass = (decade_growth - 10f64.ln()).abs() < 1e-2 && (log_slope - 1.0).abs() < 0.05;
    let pass = sums_pass && rows.iter().all(|r| r.pass);
    Ok(KazamakiCheck {
        rows,
        partial_sums,
        log_slope,
        decade_growth,
        sums_pass,
        pass,
    })
}
