//! Particle filter against the exact oracles, averaged over seeds.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::{FilterConfig, ParticleFilter};
use crate::model::{AffineSpec, ChangeDetection, Model, TestFunction};
use crate::rng::Stream;
use crate::simulate::{simulate_model, ObservationPath, TimeGrid};
use crate::stats::Estimate;

use super::grid_bayes::change_detection_oracle;
use super::kalman::kalman_bucy_oracle;

/// Particle settings shared by the agreement checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgreementConfig {
    pub n_seeds: usize,
    pub n_particles: usize,
    pub resample_threshold: f64,
}

fn filter_config(cfg: &AgreementConfig, root: Stream, s: u64) -> FilterConfig {
    FilterConfig::new(
        cfg.n_particles,
        cfg.resample_threshold,
        root.tagged("filter").child(s).key(),
    )
}

/// Run the filter over `obs`, calling `visit` after every step (and at `t = 0`).
fn filter_along(
    model: &Model,
    obs: &ObservationPath,
    config: &FilterConfig,
    mut visit: impl FnMut(usize, &ParticleFilter) -> Result<()>,
) -> Result<()> {
    let mut pf = ParticleFilter::new(model, config)?;
    visit(0, &pf)?;
    let mut dy = vec![0.0; obs.m];
    for k in 0..obs.grid.n_steps {
        obs.dy(k, &mut dy);
        pf.advance(obs.y_at(k), &dy, obs.grid.dt)?;
        pf.cloud_mut().t = obs.grid.t(k + 1);
        visit(k + 1, &pf)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KalmanAgreement {
    pub data_model: String,
    pub filter_model: String,
    pub n_seeds: usize,
    pub n_particles: usize,
    /// Seed-averaged `|m_pf − m_kf|` at the horizon.
    pub mean_gap: Estimate,
    /// Seed-averaged `|v_pf − v_kf|` at the horizon.
    pub var_gap: Estimate,
    pub tolerance: f64,
    pub pass: bool,
}

/// Simulate data from `data`, filter it with `filter_model` and compare the
/// terminal posterior mean and variance of `x_1` with the Kalman–Bucy oracle
/// for `data`.
pub fn kalman_agreement(
    data: &AffineSpec,
    filter_model: &Model,
    grid: &TimeGrid,
    cfg: &AgreementConfig,
    tolerance: f64,
    seed: u64,
) -> Result<KalmanAgreement> {
    if cfg.n_seeds == 0 {
        return Err(Error::invalid("n_seeds", "must be positive"));
    }
    let data_model = Model::JumpDiffusion(data.build()?);
    let root = Stream::new(seed).tagged("kalman-agreement");
    let x = TestFunction::coordinate(0);
    let x2 = TestFunction::product(0, 0);
    let gaps = (0..cfg.n_seeds as u64)
        .into_par_iter()
        .map(|s| {
            let obs =
                simulate_model(&data_model, grid, root.tagged("data").child(s))?.observation();
            let kf = kalman_bucy_oracle(data, &obs)?;
            let n = grid.n_steps;
            let (mut mean, mut var) = (0.0, 0.0);
            filter_along(filter_model, &obs, &filter_config(cfg, root, s), |k, pf| {
                if k == n {
                    let y = obs.y_at(k);
                    mean = pf.cloud().pi_estimate(&x, y)?;
                    var = pf.cloud().pi_estimate(&x2, y)? - mean * mean;
                }
                Ok(())
            })?;
            Ok((
                (mean - kf.mean_at(n)[0]).abs(),
                (var - kf.cov_at(n)[0]).abs(),
            ))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let mean_gap = Estimate::from_samples(&gaps.iter().map(|g| g.0).collect::<Vec<_>>());
    let var_gap = Estimate::from_samples(&gaps.iter().map(|g| g.1).collect::<Vec<_>>());
    Ok(KalmanAgreement {
        data_model: data.name.clone(),
        filter_model: filter_model.name().to_string(),
        n_seeds: cfg.n_seeds,
        n_particles: cfg.n_particles,
        mean_gap,
        var_gap,
        tolerance,
        pass: mean_gap.value < tolerance && var_gap.value < tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangeDetectionAgreement {
    pub n_seeds: usize,
    pub n_particles: usize,
    /// `sup_t |P̂(T ≤ t|Y) − P(T ≤ t|Y)|` per seed.
    pub sup_gaps: Vec<f64>,
    pub mean_sup_gap: Estimate,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn change_detection_agreement(
    cd: &ChangeDetection,
    grid: &TimeGrid,
    cfg: &AgreementConfig,
    tolerance: f64,
    seed: u64,
) -> Result<ChangeDetectionAgreement> {
    if cfg.n_seeds == 0 {
        return Err(Error::invalid("n_seeds", "must be positive"));
    }
    let model = Model::ChangeDetection(cd.clone());
    let root = Stream::new(seed).tagged("change-detection-agreement");
    let indicator = TestFunction::coordinate(ChangeDetection::INDICATOR);
    let sup_gaps = (0..cfg.n_seeds as u64)
        .into_par_iter()
        .map(|s| {
            let obs = simulate_model(&model, grid, root.tagged("data").child(s))?.observation();
            let oracle = change_detection_oracle(cd, &obs)?;
            let mut sup: f64 = 0.0;
            filter_along(&model, &obs, &filter_config(cfg, root, s), |k, pf| {
                let p = pf.cloud().pi_estimate(&indicator, obs.y_at(k))?;
                sup = sup.max((p - oracle.prob_changed[k]).abs());
                Ok(())
            })?;
            Ok(sup)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_sup_gap = Estimate::from_samples(&sup_gaps);
    Ok(ChangeDetectionAgreement {
        n_seeds: cfg.n_seeds,
        n_particles: cfg.n_particles,
        pass: mean_sup_gap.value < tolerance,
        sup_gaps,
        mean_sup_gap,
        tolerance,
    })
}
