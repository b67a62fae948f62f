//! Residuals of the Zakai and Kushner–Stratonovich equations along particle
//! filter runs.
//!
//! With left-point sums on the simulation grid,
//!
//! `R^Z_t(φ) = ρ_t(φ) − ρ_0(φ) − Σ ρ(Aφ) dt − Σ_j Σ ρ(D_jφ) ΔY_j`,
//! `R^KS_t(φ) = π_t(φ) − π_0(φ) − Σ π(Aφ) dt
//!              − Σ_j Σ [π(φh^j) − π(h^j)π(φ) + π(B^jφ)] (ΔY_j − π(h^j) dt)`.
//!
//! Both are evaluated for a battery of `y`-independent test functions; the
//! KS ablation drops the `π(B^jφ)` term.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{FilterConfig, ParticleFilter};
use crate::model::{Model, OperatorWorkspace, SignalModel, TestFunction};
use crate::rng::Stream;
use crate::simulate::{simulate_model, ObservationPath, TimeGrid};
use crate::stats::{Estimate, MeanAccumulator};

/// Law of the observation paths the residuals are averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSource {
    /// Simulated jointly with the signal.
    #[default]
    Physical,
    /// A standard Brownian motion, the law of `Y` under the reference measure.
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Zakai,
    KushnerStratonovich,
    /// KS without the correlation term (negative control).
    KsWithoutCorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualConfig {
    pub grid: TimeGrid,
    pub n_runs: usize,
    pub n_particles: usize,
    pub resample_threshold: f64,
    pub source: ObservationSource,
    /// Residuals are recorded every `report_stride` grid steps (and at the end).
    pub report_stride: usize,
}

impl ResidualConfig {
    pub fn new(grid: TimeGrid, n_runs: usize, n_particles: usize) -> Self {
        ResidualConfig {
            grid,
            n_runs,
            n_particles,
            resample_threshold: 0.5,
            source: ObservationSource::Physical,
            report_stride: (grid.n_steps / 10).max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    pub equation: Equation,
    pub phi_label: String,
    pub n_runs: usize,
    /// Mean residual at the horizon.
    pub terminal: Estimate,
    pub times: Vec<f64>,
    pub trajectory: Vec<Estimate>,
    /// Largest `|R_t|` over runs and report times.
    pub max_abs: f64,
}

impl ResidualStats {
    /// `|mean terminal residual| ≤ k SE`.
    pub fn passes(&self, k: f64) -> bool {
        self.terminal.within(0.0, k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub model: String,
    pub source: ObservationSource,
    pub zakai: Vec<ResidualStats>,
    pub ks: Vec<ResidualStats>,
    pub ks_without_correlation: Vec<ResidualStats>,
}

impl ResidualReport {
    pub fn get(&self, eq: Equation, label: &str) -> Option<&ResidualStats> {
        let list = match eq {
            Equation::Zakai => &self.zakai,
            Equation::KushnerStratonovich => &self.ks,
            Equation::KsWithoutCorrelation => &self.ks_without_correlation,
        };
        list.iter().find(|s| s.phi_label == label)
    }
}

/// Residual trajectories of one run: `[equation][phi][report index]`.
type RunResiduals = [Vec<Vec<f64>>; 3];

/// Weighted particle sums at one time for one test function.
struct Sums {
    phi: f64,
    gen: f64,
    h_phi: Vec<f64>,
    b_phi: Vec<f64>,
}

fn run_once(
    sm: &SignalModel,
    model: &Model,
    battery: &[TestFunction],
    cfg: &ResidualConfig,
    obs: &ObservationPath,
    filter_seed: u64,
    report: &[usize],
) -> Result<RunResiduals> {
    let grid = cfg.grid;
    let (d, m) = (sm.dims.d, sm.dims.m);
    let dt = grid.dt;
    let config = FilterConfig::new(cfg.n_particles, cfg.resample_threshold, filter_seed);
    let mut pf = ParticleFilter::new(model, &config)?;
    let mut ws = OperatorWorkspace::new(sm);
    let nphi = battery.len();
    let mut sums: Vec<Sums> = (0..nphi)
        .map(|_| Sums {
            phi: 0.0,
            gen: 0.0,
            h_phi: vec![0.0; m],
            b_phi: vec![0.0; m],
        })
        .collect();
    let mut sum_h = vec![0.0; m];
    let mut h = vec![0.0; m];
    let mut b = vec![0.0; m];
    let mut dy = vec![0.0; m];

    let mut zakai_int = vec![0.0; nphi];
    let mut ks_int = vec![0.0; nphi];
    let mut abl_int = vec![0.0; nphi];
    let mut rho0 = vec![0.0; nphi];
    let mut pi0 = vec![0.0; nphi];
    let mut out: RunResiduals =
        std::array::from_fn(|_| vec![Vec::with_capacity(report.len()); nphi]);
    let mut next_report = 0;

    for k in 0..=grid.n_steps {
        let y = obs.y_at(k).to_vec();
        let cloud = pf.cloud();
        let max = cloud
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::FilterCollapse {
                step: k,
                ess: f64::NAN,
            });
        }
        for s in &mut sums {
            s.phi = 0.0;
            s.gen = 0.0;
            s.h_phi.iter_mut().for_each(|v| *v = 0.0);
            s.b_phi.iter_mut().for_each(|v| *v = 0.0);
        }
        sum_h.iter_mut().for_each(|v| *v = 0.0);
        let mut sum_w = 0.0;
        for i in 0..cloud.n() {
            let x = &cloud.states[i * d..(i + 1) * d];
            let w = (cloud.log_weights[i] - max).exp();
            sum_w += w;
            ws.load(sm, x);
            h.copy_from_slice(ws.loaded_sensor());
            for j in 0..m {
                sum_h[j] += w * h[j];
            }
            for (phi, s) in battery.iter().zip(&mut sums) {
                let v = phi.value(x, &y);
                s.phi += w * v;
                s.gen += w * ws.generator_loaded(sm, phi, x, &y)?.value;
                ws.correlation_all_loaded(sm, phi, x, &y, &mut b);
                for j in 0..m {
                    s.h_phi[j] += w * (h[j] * v);
                    s.b_phi[j] += w * b[j];
                }
            }
        }
        let scale = (cloud.log_mass + max).exp() / cloud.n() as f64;

        if k == 0 {
            for (p, s) in sums.iter().enumerate() {
                rho0[p] = scale * s.phi;
                pi0[p] = s.phi / sum_w;
            }
        }
        if next_report < report.len() && report[next_report] == k {
            for (p, s) in sums.iter().enumerate() {
                let rho = scale * s.phi;
                let pi = s.phi / sum_w;
                out[0][p].push(rho - rho0[p] - zakai_int[p]);
                out[1][p].push(pi - pi0[p] - ks_int[p]);
                out[2][p].push(pi - pi0[p] - abl_int[p]);
            }
            next_report += 1;
        }
        if k == grid.n_steps {
            break;
        }

        obs.dy(k, &mut dy);
        for (p, s) in sums.iter().enumerate() {
            let mut z = scale * s.gen * dt;
            let pi_phi = s.phi / sum_w;
            let mut ks = (s.gen / sum_w) * dt;
            let mut abl = ks;
            for j in 0..m {
                z += scale * (s.h_phi[j] + s.b_phi[j]) * dy[j];
                let pi_h = sum_h[j] / sum_w;
                let innovation = dy[j] - pi_h * dt;
                let cov = s.h_phi[j] / sum_w - pi_h * pi_phi;
                ks += (cov + s.b_phi[j] / sum_w) * innovation;
                abl += cov * innovation;
            }
            zakai_int[p] += z;
            ks_int[p] += ks;
            abl_int[p] += abl;
        }
        pf.advance(&y, &dy, dt)?;
        pf.cloud_mut().t = grid.t(k + 1);
    }
    Ok(out)
}

/// Run `n_runs` independent (observation path, filter) pairs and summarise
/// both residuals for every test function. Run `r` draws its path from
/// `stream.tagged("observation").child(r)` and seeds its filter from
/// `stream.tagged("filter").child(r)`.
pub fn residual_report(
    model: &Model,
    battery: &[TestFunction],
    cfg: &ResidualConfig,
    stream: Stream,
) -> Result<ResidualReport> {
    let sm = model
        .signal_model()
        .ok_or_else(|| Error::invalid("model", "residual checks need a jump-diffusion model"))?;
    if cfg.n_runs < 2 {
        return Err(Error::invalid("n_runs", "need at least two runs"));
    }
    if cfg.report_stride == 0 {
        return Err(Error::invalid("report_stride", "must be positive"));
    }
    if let Some(phi) = battery.iter().find(|p| !p.is_y_independent()) {
        return Err(Error::invalid(
            "battery",
            format!(
                "`{}` depends on y; residuals take y-independent φ",
                phi.label()
            ),
        ));
    }
    let report = cfg.grid.strided(cfg.report_stride);
    let runs = (0..cfg.n_runs as u64)
        .into_par_iter()
        .map(|r| {
            let obs = match cfg.source {
                ObservationSource::Physical => {
                    simulate_model(model, &cfg.grid, stream.tagged("observation").child(r))?
                        .observation()
                }
                ObservationSource::Reference => ObservationPath::brownian(
                    cfg.grid,
                    sm.dims.m,
                    stream.tagged("observation").child(r),
                ),
            };
            run_once(
                sm,
                model,
                battery,
                cfg,
                &obs,
                stream.tagged("filter").child(r).key(),
                &report,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let times: Vec<f64> = report.iter().map(|&k| cfg.grid.t(k)).collect();
    let summarise = |eq: Equation, e: usize| -> Vec<ResidualStats> {
        battery
            .iter()
            .enumerate()
            .map(|(p, phi)| {
                let mut max_abs: f64 = 0.0;
                let trajectory: Vec<Estimate> = (0..report.len())
                    .map(|j| {
                        let mut acc = MeanAccumulator::default();
                        for run in &runs {
                            let v = run[e][p][j];
                            max_abs = max_abs.max(v.abs());
                            acc.push(v);
                        }
                        acc.estimate()
                    })
                    .collect();
                ResidualStats {
                    equation: eq,
                    phi_label: phi.label().to_string(),
                    n_runs: cfg.n_runs,
                    terminal: *trajectory.last().unwrap(),
                    times: times.clone(),
                    trajectory,
                    max_abs,
                }
            })
            .collect()
    };
    Ok(ResidualReport {
        model: model.name().to_string(),
        source: cfg.source,
        zakai: summarise(Equation::Zakai, 0),
        ks: summarise(Equation::KushnerStratonovich, 1),
        ks_without_correlation: summarise(Equation::KsWithoutCorrelation, 2),
    })
}

pub fn zakai_residual(
    model: &Model,
    battery: &[TestFunction],
    cfg: &ResidualConfig,
    stream: Stream,
) -> Result<Vec<ResidualStats>> {
    Ok(residual_report(model, battery, cfg, stream)?.zakai)
}

/// KS residuals; `drop_correlation` removes the `π(B^jφ)` term.
pub fn ks_residual(
    model: &Model,
    battery: &[TestFunction],
    cfg: &ResidualConfig,
    drop_correlation: bool,
    stream: Stream,
) -> Result<Vec<ResidualStats>> {
    let rep = residual_report(model, battery, cfg, stream)?;
    Ok(if drop_correlation {
        rep.ks_without_correlation
    } else {
        rep.ks
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{builtin, Dims};

    fn small(grid: TimeGrid) -> ResidualConfig {
        let mut cfg = ResidualConfig::new(grid, 4, 64);
        cfg.report_stride = 1;
        cfg
    }

    #[test]
    fn constant_phi_ks_residual_is_exactly_zero() {
        let model = builtin("jump_ou").unwrap();
        let cfg = small(TimeGrid::new(0.2, 1e-2).unwrap());
        let rep =
            residual_report(&model, &[TestFunction::constant(1.0)], &cfg, Stream::new(1)).unwrap();
        assert_eq!(rep.ks[0].max_abs, 0.0);
        assert_eq!(rep.ks_without_correlation[0].max_abs, 0.0);
    }

    #[test]
    fn constant_phi_zakai_reduces_to_the_mass_equation() {
        // With φ ≡ 1: R = ρ_t(1) − 1 − Σ ρ(h) ΔY; recompute it independently.
        let model = builtin("correlated_linear").unwrap();
        let sm = model.signal_model().unwrap().clone();
        let grid = TimeGrid::new(0.2, 1e-2).unwrap();
        let obs = simulate_model(&model, &grid, Stream::new(9))
            .unwrap()
            .observation();
        let report = grid.strided(1);
        let cfg = small(grid);
        let got = run_once(
            &sm,
            &model,
            &[TestFunction::constant(1.0)],
            &cfg,
            &obs,
            77,
            &report,
        )
        .unwrap();

        let config = FilterConfig::new(cfg.n_particles, cfg.resample_threshold, 77);
        let mut pf = ParticleFilter::new(&model, &config).unwrap();
        let mut integral = 0.0;
        let mut dy = [0.0];
        let mut h = [0.0];
        for k in 0..=grid.n_steps {
            let c = pf.cloud();
            let max = c
                .log_weights
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let scale = (c.log_mass + max).exp() / c.n() as f64;
            let (mut sw, mut swh) = (0.0, 0.0);
            for i in 0..c.n() {
                let w = (c.log_weights[i] - max).exp();
                (sm.h)(c.state(i), &mut h);
                sw += w;
                swh += w * h[0];
            }
            let expected = scale * sw - 1.0 - integral;
            assert_eq!(got[0][0][k], expected, "step {k}");
            if k == grid.n_steps {
                break;
            }
            obs.dy(k, &mut dy);
            integral += scale * swh * dy[0];
            pf.advance(obs.y_at(k), &dy, grid.dt).unwrap();
        }
    }

    #[test]
    fn blind_static_model_has_zero_residuals() {
        // h ≡ 0, no dynamics: every φ is constant along the run.
        let mut sm = SignalModel::zero(
            "still",
            Dims {
                d: 1,
                p: 1,
                m: 1,
                r: 0,
            },
            vec![0.3],
        );
        sm.f = Arc::new(|_, out| out[0] = 0.0);
        let model = Model::JumpDiffusion(sm);
        let cfg = small(TimeGrid::new(0.1, 1e-2).unwrap());
        let rep = residual_report(&model, &model.default_battery(), &cfg, Stream::new(2)).unwrap();
        for s in rep.zakai.iter().chain(&rep.ks) {
            assert_eq!(s.max_abs, 0.0, "{}", s.phi_label);
        }
    }

    #[test]
    fn rejects_change_detection_and_y_dependent_phi() {
        let cfg = small(TimeGrid::new(0.1, 1e-2).unwrap());
        let cd = builtin("change_detection").unwrap();
        assert!(
            residual_report(&cd, &[TestFunction::constant(1.0)], &cfg, Stream::new(0)).is_err()
        );
        let lin = builtin("linear_gaussian").unwrap();
        let ydep = TestFunction::new(
            "y",
            |_: &[f64], y: &[f64]| y[0],
            |_: &[f64], _: &[f64], g: &mut [f64]| g[0] = 0.0,
        )
        .with_y_derivatives(
            |_: &[f64], _: &[f64], g: &mut [f64]| g[0] = 1.0,
            |_: &[f64], _: &[f64]| 0.0,
        );
        assert!(residual_report(&lin, &[ydep], &cfg, Stream::new(0)).is_err());
    }
}
