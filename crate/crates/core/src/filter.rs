//! Weighted-particle approximation of the unnormalised conditional
//! distribution `ρ_t` under the reference measure.
//!
//! Particles move with the reference dynamics driven by the observed
//! increments and carry log-weights `log Z̃`. The running normaliser absorbed
//! at each resampling lives in `log_mass`, so `ρ_t(1)` survives resampling.
//!
//! Random numbers are drawn per (step, chunk of [`CHUNK`] particles) from
//! counter-derived streams, so results do not depend on the worker count.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::girsanov::log_weight_increment_unchecked;
use crate::model::{ChangeDetection, Model, TestFunction};
use crate::rng::Stream;
use crate::simulate::{fmt_real, EulerWorkspace, ObservationPath};

/// Particles per random stream and per parallel task.
pub const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Resampler {
    #[default]
    Systematic,
}

fn default_collapse_epsilon() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub n_particles: usize,
    /// Resample when `ESS < threshold · n`. `1` resamples every step, `0` never.
    pub resample_threshold: f64,
    #[serde(default)]
    pub resampler: Resampler,
    pub seed: u64,
    /// The run is declared collapsed when `ESS < 1 + collapse_epsilon`.
    #[serde(default = "default_collapse_epsilon")]
    pub collapse_epsilon: f64,
}

impl FilterConfig {
    pub fn new(n_particles: usize, resample_threshold: f64, seed: u64) -> Self {
        FilterConfig {
            n_particles,
            resample_threshold,
            resampler: Resampler::Systematic,
            seed,
            collapse_epsilon: default_collapse_epsilon(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::invalid("n_particles", "need at least two particles"));
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return Err(Error::invalid("resample_threshold", "must lie in [0, 1]"));
        }
        if !(self.collapse_epsilon >= 0.0 && self.collapse_epsilon.is_finite()) {
            return Err(Error::invalid(
                "collapse_epsilon",
                "must be finite and nonnegative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub d: usize,
    /// Row-major `n × d`.
    pub states: Vec<f64>,
    pub log_weights: Vec<f64>,
    pub log_mass: f64,
    pub t: f64,
    pub step: usize,
}

impl ParticleCloud {
    pub fn n(&self) -> usize {
        self.log_weights.len()
    }

    #[inline]
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.d..(i + 1) * self.d]
    }

    fn max_log_weight(&self) -> f64 {
        self.log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Weights relative to the largest, with their sum and sum of squares.
    fn relative_weights(&self) -> (f64, Vec<f64>, f64, f64) {
        let max = self.max_log_weight();
        let w: Vec<f64> = self.log_weights.iter().map(|&l| (l - max).exp()).collect();
        let s: f64 = w.iter().sum();
        let s2: f64 = w.iter().map(|v| v * v).sum();
        (max, w, s, s2)
    }

    /// Normalised weights.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let (_, w, s, _) = self.relative_weights();
        w.into_iter().map(|v| v / s).collect()
    }

    /// `(Σw)² / Σw²`; NaN when every weight has vanished.
    pub fn ess(&self) -> f64 {
        let (max, _, s, s2) = self.relative_weights();
        if !max.is_finite() {
            return f64::NAN;
        }
        s * s / s2
    }

    /// Add `c` to every log-weight and remove it from `log_mass`; `ρ` and `π`
    /// are unchanged up to rounding.
    pub fn shift_log_weights(&mut self, c: f64) {
        for l in &mut self.log_weights {
            *l += c;
        }
        self.log_mass -= c;
    }

    fn weighted_sum(&self, phi: &TestFunction, y: &[f64]) -> Result<(f64, f64, f64)> {
        let (max, w, s, _) = self.relative_weights();
        if !(max.is_finite() && s > 0.0) {
            return Err(Error::FilterCollapse {
                step: self.step,
                ess: f64::NAN,
            });
        }
        let mut acc = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let v = phi.value(self.state(i), y);
            if !v.is_finite() {
                return Err(Error::non_finite(format!(
                    "{} at particle {i}",
                    phi.label()
                )));
            }
            acc += wi * v;
        }
        Ok((max, acc, s))
    }

    /// `ρ_t(φ) = e^{log_mass} · (1/n) Σ e^{log w_i} φ(x_i)`.
    pub fn rho_estimate(&self, phi: &TestFunction, y: &[f64]) -> Result<f64> {
        let (max, acc, _) = self.weighted_sum(phi, y)?;
        Ok((self.log_mass + max).exp() * acc / self.n() as f64)
    }

    /// `log ρ_t(1)`.
    pub fn log_rho_one(&self) -> f64 {
        let (max, _, s, _) = self.relative_weights();
        self.log_mass + max + (s / self.n() as f64).ln()
    }

    /// `π_t(φ) = ρ_t(φ) / ρ_t(1)`, computed as a weighted mean so that
    /// `π_t(1) = 1` exactly.
    pub fn pi_estimate(&self, phi: &TestFunction, y: &[f64]) -> Result<f64> {
        let (_, acc, s) = self.weighted_sum(phi, y)?;
        Ok(acc / s)
    }

    /// Replace the cloud by a systematic resample; the log-mean weight moves
    /// into `log_mass`.
    fn resample_systematic(&mut self, u: f64) {
        let n = self.n();
        let (max, w, s, _) = self.relative_weights();
        self.log_mass += max + (s / n as f64).ln();
        let mut new_states = Vec::with_capacity(self.states.len());
        let step = 1.0 / n as f64;
        let mut cum = w[0] / s;
        let mut i = 0;
        for k in 0..n {
            let target = (u + k as f64) * step;
            while cum < target && i + 1 < n {
                i += 1;
                cum += w[i] / s;
            }
            new_states.extend_from_slice(self.state(i));
        }
        self.states = new_states;
        self.log_weights.iter_mut().for_each(|l| *l = 0.0);
    }
}

/// i.i.d. draws from the initial law; zero log-weights and mass; `t = 0`.
pub fn init_cloud(model: &Model, n: usize, stream: Stream) -> Result<ParticleCloud> {
    if n < 2 {
        return Err(Error::invalid("n_particles", "need at least two particles"));
    }
    let d = model.state_dim();
    let mut states = vec![0.0; n * d];
    states
        .par_chunks_mut(CHUNK * d)
        .enumerate()
        .for_each(|(c, chunk)| {
            let mut rng = stream.child(c as u64).rng();
            for x in chunk.chunks_mut(d) {
                model.sample_initial(&mut rng, x);
            }
        });
    if !states.iter().all(|v| v.is_finite()) {
        return Err(Error::non_finite("initial particle states"));
    }
    Ok(ParticleCloud {
        d,
        states,
        log_weights: vec![0.0; n],
        log_mass: 0.0,
        t: 0.0,
        step: 0,
    })
}

/// What happened in one filter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// ESS after weighting, before any resampling.
    pub ess: f64,
    pub resampled: bool,
}

/// One filter step: weight with `h(x_pre)ᵀdy − ½|h(x_pre)|²dt`, propagate with
/// the reference dynamics, then resample if the ESS fell below the threshold.
/// `y` is the observation at the start of the step.
pub fn step(
    cloud: &mut ParticleCloud,
    model: &Model,
    y: &[f64],
    dy: &[f64],
    dt: f64,
    config: &FilterConfig,
    stream: Stream,
) -> Result<StepInfo> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let d = cloud.d;
    let m = model.obs_dim();
    let t_next = cloud.t + dt;
    let next_step = cloud.step + 1;
    cloud
        .states
        .par_chunks_mut(CHUNK * d)
        .zip(cloud.log_weights.par_chunks_mut(CHUNK))
        .enumerate()
        .try_for_each(|(c, (xs, lws))| {
            let mut rng = stream.child(c as u64).rng();
            match model {
                Model::JumpDiffusion(sm) => {
                    let mut ws = EulerWorkspace::new(sm);
                    for (x, lw) in xs.chunks_mut(d).zip(lws.iter_mut()) {
                        ws.reference_step(sm, x, dy, dt, &mut rng);
                        *lw += log_weight_increment_unchecked(ws.h(), dy, dt);
                    }
                }
                Model::ChangeDetection(cd) => {
                    let mut h = vec![0.0; m];
                    for (x, lw) in xs.chunks_mut(d).zip(lws.iter_mut()) {
                        h[0] = cd.sensor(x, y[0]);
                        *lw += log_weight_increment_unchecked(&h, dy, dt);
                        cd.advance(x, t_next);
                    }
                    debug_assert_eq!(d, ChangeDetection::STATE_DIM);
                }
            }
            if xs.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::BlowUp { step: next_step })
            }
        })?;
    cloud.t = t_next;
    cloud.step = next_step;

    let ess = cloud.ess();
    if !(ess >= 1.0 + config.collapse_epsilon) {
        return Err(Error::FilterCollapse {
            step: next_step,
            ess,
        });
    }
    let n = cloud.n() as f64;
    let resampled = ess < config.resample_threshold * n;
    if resampled {
        let u: f64 = stream.tagged("resample").rng().random();
        cloud.resample_systematic(u);
    }
    Ok(StepInfo { ess, resampled })
}

/// A filter bound to a model and configuration, advanced one observation
/// increment at a time.
pub struct ParticleFilter<'a> {
    model: &'a Model,
    config: FilterConfig,
    cloud: ParticleCloud,
    root: Stream,
}

impl<'a> ParticleFilter<'a> {
    pub fn new(model: &'a Model, config: &FilterConfig) -> Result<Self> {
        config.validate()?;
        let root = Stream::new(config.seed).tagged("particle-filter");
        let cloud = init_cloud(model, config.n_particles, root.tagged("init"))?;
        Ok(ParticleFilter {
            model,
            config: config.clone(),
            cloud,
            root,
        })
    }

    pub fn cloud(&self) -> &ParticleCloud {
        &self.cloud
    }

    pub fn cloud_mut(&mut self) -> &mut ParticleCloud {
        &mut self.cloud
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn advance(&mut self, y: &[f64], dy: &[f64], dt: f64) -> Result<StepInfo> {
        let stream = self.root.tagged("step").child(self.cloud.step as u64);
        step(&mut self.cloud, self.model, y, dy, dt, &self.config, stream)
    }
}

/// One output row of a filter run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterRow {
    pub t: f64,
    pub estimates: Vec<f64>,
    pub rho1: f64,
    /// `log ρ_t(1)`; stays finite when `rho1` overflows.
    pub log_rho1: f64,
    pub ess: f64,
    pub resampled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterRun {
    pub model: String,
    pub labels: Vec<String>,
    pub rows: Vec<FilterRow>,
}

impl FilterRun {
    /// Columns `t, <labels>, rho1, log_rho1, ess, resampled`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for l in &self.labels {
            s.push(',');
            s.push_str(l);
        }
        s.push_str(",rho1,log_rho1,ess,resampled\n");
        for r in &self.rows {
            s.push_str(&fmt_real(r.t));
            for e in &r.estimates {
                s.push(',');
                s.push_str(&fmt_real(*e));
            }
            write!(
                s,
                ",{},{},{},{}",
                fmt_real(r.rho1),
                fmt_real(r.log_rho1),
                fmt_real(r.ess),
                r.resampled as u8
            )
            .unwrap();
            s.push('\n');
        }
        s
    }
}

fn summary(
    cloud: &ParticleCloud,
    battery: &[TestFunction],
    y: &[f64],
    ess: f64,
    resampled: bool,
) -> Result<FilterRow> {
    let estimates = battery
        .iter()
        .map(|phi| cloud.pi_estimate(phi, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(FilterRow {
        t: cloud.t,
        estimates,
        rho1: cloud.log_rho_one().exp(),
        log_rho1: cloud.log_rho_one(),
        ess,
        resampled,
    })
}

/// Filter an observation path and summarise `π_t(φ)` for each test function
/// at every grid time.
pub fn run_filter(
    model: &Model,
    obs: &ObservationPath,
    config: &FilterConfig,
    battery: &[TestFunction],
) -> Result<FilterRun> {
    if obs.m != model.obs_dim() {
        return Err(Error::DimensionMismatch {
            what: "observation dimension",
            expected: model.obs_dim(),
            actual: obs.m,
        });
    }
    let mut pf = ParticleFilter::new(model, config)?;
    let mut rows = Vec::with_capacity(obs.grid.len());
    let n = config.n_particles as f64;
    rows.push(summary(pf.cloud(), battery, obs.y_at(0), n, false)?);
    let mut dy = vec![0.0; obs.m];
    for k in 0..obs.grid.n_steps {
        obs.dy(k, &mut dy);
        let info = pf.advance(obs.y_at(k), &dy, obs.grid.dt)?;
        pf.cloud_mut().t = obs.grid.t(k + 1);
        rows.push(summary(
            pf.cloud(),
            battery,
            obs.y_at(k + 1),
            info.ess,
            info.resampled,
        )?);
    }
    Ok(FilterRun {
        model: model.name().to_string(),
        labels: battery.iter().map(|p| p.label().to_string()).collect(),
        rows,
    })
}
