//! Exponential martingales along simulated paths and the martingale
//! diagnostics built on them.
//!
//! Every scenario is a pair `(H, W)` with `Z = exp(∫H dW − ½∫|H|² ds)`.
//! A path set is simulated either under the base measure (`W` Brownian, `Z`
//! computed pathwise) or under the tilted measure `Q = Z·P` (`dW = H dt + dB`),
//! and each diagnostic is estimated through whichever identity applies:
//!
//! | quantity                | base route          | tilted route              |
//! |-------------------------|---------------------|---------------------------|
//! | `E[∫Z_s|H_s|² ds]`      | mean of the integral| `E_Q[∫|H|² ds]`           |
//! | `E[Z_t log Z_t]`        | mean of `Z log Z`   | `E_Q[log Z_t]`            |
//! | `E[sup_s Z_s]`          | mean of the max     | `E_Q[sup_s Z_s / Z_t]`    |
//! | `E[∫|H|² ds]`           | mean of the integral| `E_Q[∫|H|² ds / Z_t]`     |

use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChangeDetection, Model, SignalModel};
use crate::rng::{Stream, StreamRng};
use crate::simulate::{fmt_real, EulerWorkspace, LevySampler, PathBundle, TimeGrid};
use crate::stats::{joint_se, Estimate, MeanAccumulator};

pub use crate::simulate::Measure;

/// Increment of `∫hᵀdY − ½∫|h|² ds` over one step.
pub fn log_weight_increment(h: &[f64], dy: &[f64], dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    if h.len() != dy.len() {
        return Err(Error::DimensionMismatch {
            what: "observation increment",
            expected: h.len(),
            actual: dy.len(),
        });
    }
    let v = log_weight_increment_unchecked(h, dy, dt);
    if !v.is_finite() {
        return Err(Error::non_finite("log-weight increment"));
    }
    Ok(v)
}

#[inline]
pub(crate) fn log_weight_increment_unchecked(h: &[f64], dy: &[f64], dt: f64) -> f64 {
    let mut lin = 0.0;
    let mut sq = 0.0;
    for (a, b) in h.iter().zip(dy) {
        lin += a * b;
        sq += a * a;
    }
    lin - 0.5 * sq * dt
}

/// `log Z̃` along one simulated path, with `Z̃_s |h(X_s)|²` at each step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightTrajectory {
    pub grid: TimeGrid,
    pub log_z: Vec<f64>,
    pub energy_integrand: Vec<f64>,
}

impl WeightTrajectory {
    pub fn from_bundle(model: &Model, bundle: &PathBundle) -> Result<Self> {
        let n = bundle.grid.n_steps;
        let m = bundle.m;
        let dt = bundle.grid.dt;
        let mut h = vec![0.0; m];
        let mut dy = vec![0.0; m];
        let mut log_z = vec![0.0f64; n + 1];
        let mut energy_integrand = vec![0.0; n];
        for k in 0..n {
            model.sensor(bundle.x_at(k), bundle.y_at(k), &mut h);
            for j in 0..m {
                dy[j] = bundle.y[(k + 1) * m + j] - bundle.y[k * m + j];
            }
            energy_integrand[k] = log_z[k].exp() * h.iter().map(|v| v * v).sum::<f64>();
            log_z[k + 1] = log_z[k] + log_weight_increment(&h, &dy, dt)?;
        }
        Ok(WeightTrajectory {
            grid: bundle.grid,
            log_z,
            energy_integrand,
        })
    }

    pub fn terminal(&self) -> f64 {
        self.log_z[self.grid.n_steps]
    }
}

/// The integrand `H` and its driving noise `W`.
#[derive(Debug, Clone)]
pub enum Scenario {
    /// `H ≡ 0`.
    Zero,
    /// `H = αW`.
    RevuzYor { alpha: f64 },
    /// `H_t = |B'_t|` for a Brownian motion `B'` independent of `W`.
    IndependentH,
    /// `H = sign · h(X, Y)` with `W` the observation noise. `sign = −1` gives
    /// the density of the reference measure.
    ModelDriven { model: Model, sign: f64 },
}

impl Scenario {
    pub fn label(&self) -> String {
        match self {
            Scenario::Zero => "zero".to_string(),
            Scenario::RevuzYor { alpha } => format!("revuz_yor(alpha={alpha})"),
            Scenario::IndependentH => "independent_h".to_string(),
            Scenario::ModelDriven { model, .. } => model.name().to_string(),
        }
    }

    pub fn reference_density(model: Model) -> Self {
        Scenario::ModelDriven { model, sign: -1.0 }
    }

    fn noise_dim(&self) -> usize {
        match self {
            Scenario::ModelDriven { model, .. } => model.obs_dim(),
            _ => 1,
        }
    }
}

/// Per-path quantities at one report time `t`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PathStats {
    pub log_z: f64,
    /// `log sup_{s ≤ t} Z_s` (grid supremum).
    pub log_z_max: f64,
    /// `∫₀ᵗ |H_s|² ds`.
    pub energy: f64,
    /// `∫₀ᵗ Z_s |H_s|² ds`.
    pub weighted_energy: f64,
    /// `U_t`: `1 + |X_t|²` (jump-diffusion) or `1 + Y_t²` (change detection); 1 otherwise.
    pub lyapunov: f64,
    /// `|H_t|²`.
    pub h_sq: f64,
}

enum PathState<'a> {
    Zero,
    RevuzYor {
        alpha: f64,
        w: f64,
    },
    IndependentH {
        b: f64,
    },
    Jump {
        model: &'a SignalModel,
        x: Vec<f64>,
        y: Vec<f64>,
        ws: EulerWorkspace,
        dv: Vec<f64>,
        dl: Vec<f64>,
        levy: Option<LevySampler>,
    },
    Change {
        cd: &'a ChangeDetection,
        x: Vec<f64>,
        y: f64,
    },
}

impl<'a> PathState<'a> {
    fn new(scenario: &'a Scenario, rng: &mut StreamRng) -> Self {
        match scenario {
            Scenario::Zero => PathState::Zero,
            Scenario::RevuzYor { alpha } => PathState::RevuzYor {
                alpha: *alpha,
                w: 0.0,
            },
            Scenario::IndependentH => PathState::IndependentH { b: 0.0 },
            Scenario::ModelDriven { model, .. } => match model {
                Model::JumpDiffusion(sm) => {
                    let mut x = vec![0.0; sm.dims.d];
                    sm.initial_law.sample(rng, &mut x);
                    PathState::Jump {
                        model: sm,
                        x,
                        y: vec![0.0; sm.dims.m],
                        ws: EulerWorkspace::new(sm),
                        dv: vec![0.0; sm.dims.p],
                        dl: vec![0.0; sm.dims.r],
                        levy: sm.levy.as_ref().map(LevySampler::new),
                    }
                }
                Model::ChangeDetection(cd) => {
                    let mut x = vec![0.0; ChangeDetection::STATE_DIM];
                    cd.sample_initial(rng, &mut x);
                    PathState::Change { cd, x, y: 0.0 }
                }
            },
        }
    }

    /// `H` at the current state (before the sign is applied for model paths).
    fn integrand(&self, out: &mut [f64]) {
        match self {
            PathState::Zero => out[0] = 0.0,
            PathState::RevuzYor { alpha, w } => out[0] = alpha * w,
            PathState::IndependentH { b } => out[0] = b.abs(),
            PathState::Jump { model, x, .. } => (model.h)(x, out),
            PathState::Change { cd, x, y } => out[0] = cd.sensor(x, *y),
        }
    }

    fn lyapunov(&self) -> f64 {
        match self {
            PathState::Jump { x, .. } => 1.0 + x.iter().map(|v| v * v).sum::<f64>(),
            PathState::Change { y, .. } => 1.0 + y * y,
            _ => 1.0,
        }
    }

    /// Advance by one step given the driving-noise increment `dw` and the
    /// observation drift `h` at the pre-step state.
    fn advance(
        &mut self,
        dw: &[f64],
        h: &[f64],
        t_next: f64,
        dt: f64,
        rng: &mut StreamRng,
    ) -> bool {
        match self {
            PathState::Zero => true,
            PathState::RevuzYor { w, .. } => {
                *w += dw[0];
                w.is_finite()
            }
            PathState::IndependentH { b } => {
                let z: f64 = StandardNormal.sample(rng);
                *b += dt.sqrt() * z;
                true
            }
            PathState::Jump {
                model,
                x,
                y,
                ws,
                dv,
                dl,
                levy,
            } => {
                let sd = dt.sqrt();
                for v in dv.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = sd * z;
                }
                if let Some(l) = levy {
                    l.sample_into(dt, rng, dl, |_| {});
                }
                ws.physical_step(model, x, dv, dw, dl, dt);
                for j in 0..y.len() {
                    y[j] += h[j] * dt + dw[j];
                }
                x.iter().chain(y.iter()).all(|v| v.is_finite())
            }
            PathState::Change { cd, x, y } => {
                *y += h[0] * dt + dw[0];
                cd.advance(x, t_next);
                y.is_finite()
            }
        }
    }
}

fn run_path(
    scenario: &Scenario,
    measure: Measure,
    grid: &TimeGrid,
    report: &[usize],
    stream: Stream,
) -> Result<Vec<PathStats>> {
    let mut rng = stream.rng();
    let m = scenario.noise_dim();
    let sign = match scenario {
        Scenario::ModelDriven { sign, .. } => *sign,
        _ => 1.0,
    };
    let dt = grid.dt;
    let sd = dt.sqrt();
    let mut state = PathState::new(scenario, &mut rng);
    let mut raw_h = vec![0.0; m];
    let mut big_h = vec![0.0; m];
    let mut dw = vec![0.0; m];
    let mut acc = PathStats {
        lyapunov: 1.0,
        ..PathStats::default()
    };
    let mut out = Vec::with_capacity(report.len());
    let mut next = 0;
    for k in 0..=grid.n_steps {
        state.integrand(&mut raw_h);
        for j in 0..m {
            big_h[j] = sign * raw_h[j];
        }
        let h_sq: f64 = big_h.iter().map(|v| v * v).sum();
        while next < report.len() && report[next] == k {
            out.push(PathStats {
                lyapunov: state.lyapunov(),
                h_sq,
                ..acc
            });
            next += 1;
        }
        if k == grid.n_steps || next == report.len() {
            break;
        }
        for j in 0..m {
            let z: f64 = StandardNormal.sample(&mut rng);
            dw[j] = match measure {
                Measure::Base => sd * z,
                Measure::Transformed => big_h[j] * dt + sd * z,
            };
        }
        acc.weighted_energy += acc.log_z.exp() * h_sq * dt;
        acc.energy += h_sq * dt;
        acc.log_z += log_weight_increment_unchecked(&big_h, &dw, dt);
        acc.log_z_max = acc.log_z_max.max(acc.log_z);
        if !state.advance(&dw, &raw_h, grid.t(k + 1), dt, &mut rng) || !acc.log_z.is_finite() {
            return Err(Error::BlowUp { step: k + 1 });
        }
    }
    Ok(out)
}

/// Per-path statistics at a set of report times.
#[derive(Debug, Clone, Serialize)]
pub struct PathSet {
    pub scenario: String,
    pub measure: Measure,
    pub times: Vec<f64>,
    /// `paths[i][j]`: path `i` at report time `j`.
    pub paths: Vec<Vec<PathStats>>,
    pub stream_key: u64,
}

impl PathSet {
    /// Simulate `n_paths` paths (path `i` on `stream.child(i)`) and record
    /// their statistics at the grid indices `report` (sorted ascending).
    pub fn simulate(
        scenario: &Scenario,
        measure: Measure,
        grid: &TimeGrid,
        report: &[usize],
        n_paths: usize,
        stream: Stream,
    ) -> Result<Self> {
        if n_paths < 2 {
            return Err(Error::invalid("n_paths", "need at least two paths"));
        }
        if report.is_empty()
            || report.windows(2).any(|w| w[0] > w[1])
            || *report.last().unwrap() > grid.n_steps
        {
            return Err(Error::invalid(
                "report",
                "report indices must be sorted grid indices",
            ));
        }
        if let Scenario::RevuzYor { alpha } = scenario {
            if !(*alpha > 0.0) {
                return Err(Error::invalid("alpha", "must be positive"));
            }
        }
        let paths = (0..n_paths as u64)
            .into_par_iter()
            .map(|i| run_path(scenario, measure, grid, report, stream.child(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PathSet {
            scenario: scenario.label(),
            measure,
            times: report.iter().map(|&k| grid.t(k)).collect(),
            paths,
            stream_key: stream.key(),
        })
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn last(&self) -> usize {
        self.times.len() - 1
    }

    fn estimate(&self, j: usize, f: impl Fn(&PathStats) -> f64) -> Estimate {
        let mut acc = MeanAccumulator::default();
        for p in &self.paths {
            acc.push(f(&p[j]));
        }
        acc.estimate()
    }

    fn require(&self, measure: Measure, what: &'static str) -> Result<()> {
        if self.measure != measure {
            return Err(Error::invalid(
                what,
                format!("needs a path set simulated under the {measure:?} measure"),
            ));
        }
        Ok(())
    }

    /// `E[Z_t]` (base route only).
    pub fn e_z(&self, j: usize) -> Result<Estimate> {
        self.require(Measure::Base, "e_z")?;
        Ok(self.estimate(j, |s| s.log_z.exp()))
    }

    /// `E[∫₀ᵗ Z_s |H_s|² ds]`.
    pub fn transformed_energy(&self, j: usize) -> Estimate {
        match self.measure {
            Measure::Base => self.estimate(j, |s| s.weighted_energy),
            Measure::Transformed => self.estimate(j, |s| s.energy),
        }
    }

    /// `E[Z_t log Z_t]`.
    pub fn z_log_z(&self, j: usize) -> Estimate {
        match self.measure {
            Measure::Base => self.estimate(j, |s| s.log_z.exp() * s.log_z),
            Measure::Transformed => self.estimate(j, |s| s.log_z),
        }
    }

    /// `E[sup_{s≤t} Z_s]`.
    pub fn z_star(&self, j: usize) -> Estimate {
        match self.measure {
            Measure::Base => self.estimate(j, |s| s.log_z_max.exp()),
            Measure::Transformed => self.estimate(j, |s| (s.log_z_max - s.log_z).exp()),
        }
    }

    /// `E[∫₀ᵗ |H_s|² ds]`.
    pub fn plain_energy(&self, j: usize) -> Estimate {
        match self.measure {
            Measure::Base => self.estimate(j, |s| s.energy),
            Measure::Transformed => self.estimate(j, |s| s.energy * (-s.log_z).exp()),
        }
    }

    /// `E[Z_t U_t]`.
    pub fn weighted_lyapunov(&self, j: usize) -> Estimate {
        match self.measure {
            Measure::Base => self.estimate(j, |s| s.log_z.exp() * s.lyapunov),
            Measure::Transformed => self.estimate(j, |s| s.lyapunov),
        }
    }

    /// `E[Z_t |H_t|²]`.
    pub fn weighted_h_sq(&self, j: usize) -> Estimate {
        match self.measure {
            Measure::Base => self.estimate(j, |s| s.log_z.exp() * s.h_sq),
            Measure::Transformed => self.estimate(j, |s| s.h_sq),
        }
    }

    /// `E[|H_t|²]`.
    pub fn plain_h_sq(&self, j: usize) -> Estimate {
        match self.measure {
            Measure::Base => self.estimate(j, |s| s.h_sq),
            Measure::Transformed => self.estimate(j, |s| s.h_sq * (-s.log_z).exp()),
        }
    }
}

/// Transformed energy together with the divergence flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuardedEstimate {
    pub estimate: Estimate,
    /// Set when a path's contribution or the estimate exceeds the guard or is
    /// non-finite; the estimate is then a divergence diagnostic, not a value.
    pub overflow: bool,
}

pub const DEFAULT_OVERFLOW_GUARD: f64 = 1e12;

pub fn transformed_energy_estimate(set: &PathSet, j: usize, guard: f64) -> GuardedEstimate {
    let estimate = set.transformed_energy(j);
    let per_path_bad = set.paths.iter().any(|p| {
        let v = match set.measure {
            Measure::Base => p[j].weighted_energy,
            Measure::Transformed => p[j].energy,
        };
        !(v.is_finite() && v.abs() <= guard)
    });
    let overflow = per_path_bad
        || !(estimate.value.is_finite() && estimate.value <= guard && estimate.se.is_finite());
    GuardedEstimate { estimate, overflow }
}

pub fn zlogz_estimate(set: &PathSet, j: usize) -> Estimate {
    set.z_log_z(j)
}

/// Two estimates of quantities that should agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// Standard error of the mean paired difference (same paths on both sides).
    pub diff_se: f64,
    pub pass: bool,
}

fn paired(
    set: &PathSet,
    j: usize,
    lhs: Estimate,
    rhs: Estimate,
    diff: impl Fn(&PathStats) -> f64,
) -> IdentityCheck {
    let d = set.estimate(j, diff);
    IdentityCheck {
        lhs,
        rhs,
        diff_se: d.se,
        pass: (lhs.value - rhs.value).abs() <= 3.0 * d.se,
    }
}

/// `E[Z_t log Z_t] = ½ E[∫Z_s|H_s|² ds]` on one path set, judged on the
/// paired per-path difference.
pub fn zlogz_identity_check(set: &PathSet, j: usize) -> IdentityCheck {
    let lhs = set.z_log_z(j);
    let rhs = set.transformed_energy(j).scaled(0.5);
    match set.measure {
        Measure::Base => paired(set, j, lhs, rhs, |s| {
            s.log_z.exp() * s.log_z - 0.5 * s.weighted_energy
        }),
        Measure::Transformed => paired(set, j, lhs, rhs, |s| s.log_z - 0.5 * s.energy),
    }
}

/// `E[∫Z_s|H_s|² ds] = E[Z_t ∫|H_s|² ds]`, both sides on the same base-measure paths.
pub fn energy_identity_check(set: &PathSet, j: usize) -> Result<IdentityCheck> {
    set.require(Measure::Base, "energy_identity_check")?;
    let lhs = set.estimate(j, |s| s.weighted_energy);
    let rhs = set.estimate(j, |s| s.log_z.exp() * s.energy);
    Ok(paired(set, j, lhs, rhs, |s| {
        s.weighted_energy - s.log_z.exp() * s.energy
    }))
}

/// `(e+1)/(e−1)` and `e/(2(e−1))`.
pub fn maximal_bound_constants() -> (f64, f64) {
    let e = std::f64::consts::E;
    ((e + 1.0) / (e - 1.0), e / (2.0 * (e - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaximalBoundCheck {
    pub lhs: Estimate,
    pub energy: Estimate,
    pub rhs: f64,
    pub combined_se: f64,
    pub pass: bool,
}

/// `E[Z*_t] ≤ (e+1)/(e−1) + e/(2(e−1)) E[∫Z_s|H_s|² ds]`, with `Z*` taken from
/// `lhs_set` and the energy from `energy_set` (they may be the same set).
pub fn zstar_bound_check(lhs_set: &PathSet, energy_set: &PathSet, j: usize) -> MaximalBoundCheck {
    let (c0, c1) = maximal_bound_constants();
    let lhs = lhs_set.z_star(j);
    let energy = energy_set.transformed_energy(j);
    let rhs = c0 + c1 * energy.value;
    let combined_se = (lhs.se * lhs.se + (c1 * energy.se).powi(2)).sqrt();
    MaximalBoundCheck {
        lhs,
        energy,
        rhs,
        combined_se,
        pass: lhs.value <= rhs + 3.0 * combined_se,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleCheck {
    pub times: Vec<f64>,
    pub means: Vec<Estimate>,
    pub pass: bool,
}

/// `E[Z_s] = 1` within 3 SE at every report time (base route).
pub fn martingale_mean_check(set: &PathSet) -> Result<MartingaleCheck> {
    let means = (0..set.times.len())
        .map(|j| set.e_z(j))
        .collect::<Result<Vec<_>>>()?;
    let pass = means.iter().all(|e| e.within(1.0, 3.0));
    Ok(MartingaleCheck {
        times: set.times.clone(),
        means,
        pass,
    })
}

/// Gronwall envelope constant for a model.
///
/// Jump-diffusions: `c = max(3K + 2K²(2 + tr ∫ρρᵀF), 4 S̄², 2K²)` with `S̄`
/// the declared `σ̄` bound (falling back to `K`); the envelope is
/// `e^{2ct} E[U_0]`. Change detection: `c = max_b 4 + (b0 + b)²` over the
/// prior support; the envelope is `e^{ct} E[U_0]`.
pub fn gronwall_constant(model: &Model) -> f64 {
    match model {
        Model::JumpDiffusion(sm) => {
            let k = sm.linear_growth_k;
            let tr = sm.levy.as_ref().map_or(0.0, |l| {
                let r = l.dim();
                let m2 = l.second_moment();
                (0..r).map(|i| m2[i * r + i]).sum()
            });
            let s_bar = sm.sigma_bar_bound.unwrap_or(k);
            (3.0 * k + 2.0 * k * k * (2.0 + tr))
                .max(4.0 * s_bar * s_bar)
                .max(2.0 * k * k)
        }
        Model::ChangeDetection(cd) => cd
            .b_grid
            .iter()
            .zip(&cd.b_prior)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&b, _)| cd.gronwall_constant(b))
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// `E[U_0]`, exact where the initial law allows.
pub fn initial_lyapunov_mean(model: &Model) -> Option<f64> {
    match model {
        Model::JumpDiffusion(sm) => sm.initial_law.second_moment().map(|m2| 1.0 + m2),
        Model::ChangeDetection(_) => Some(1.0),
    }
}

/// `t ↦ envelope(t)` for the Gronwall bound.
pub fn gronwall_envelope(model: &Model, c: f64, u0: f64, t: f64) -> f64 {
    match model {
        Model::JumpDiffusion(_) => (2.0 * c * t).exp() * u0,
        Model::ChangeDetection(_) => (c * t).exp() * u0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallCheck {
    pub c: f64,
    pub times: Vec<f64>,
    pub values: Vec<Estimate>,
    pub bounds: Vec<f64>,
    pub pass: bool,
}

/// `E[Z_t U_t] ≤ envelope(t) + 3 SE` at every report time, with `Z` the
/// reference-measure density along physical paths.
pub fn gronwall_bound_check(
    model: &Model,
    grid: &TimeGrid,
    report: &[usize],
    n_paths: usize,
    c: Option<f64>,
    stream: Stream,
) -> Result<GronwallCheck> {
    let set = PathSet::simulate(
        &Scenario::reference_density(model.clone()),
        Measure::Base,
        grid,
        report,
        n_paths,
        stream,
    )?;
    let c = c.unwrap_or_else(|| gronwall_constant(model));
    let u0 = match initial_lyapunov_mean(model) {
        Some(u) => u,
        None => set.estimate(0, |s| s.lyapunov).value,
    };
    let values: Vec<Estimate> = (0..set.times.len())
        .map(|j| set.weighted_lyapunov(j))
        .collect();
    let bounds: Vec<f64> = set
        .times
        .iter()
        .map(|&t| gronwall_envelope(model, c, u0, t))
        .collect();
    let pass = values
        .iter()
        .zip(&bounds)
        .all(|(v, b)| v.value <= b + 3.0 * v.se);
    Ok(GronwallCheck {
        c,
        times: set.times,
        values,
        bounds,
        pass,
    })
}

/// Summary of the martingale diagnostics at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub scenario: String,
    pub t: f64,
    pub seed: u64,
    pub n_paths: usize,
    pub e_z: Option<Estimate>,
    pub transformed_energy: Estimate,
    pub energy_overflow: bool,
    pub z_log_z: Estimate,
    pub z_star: Estimate,
    pub plain_energy: Estimate,
}

impl DiagnosticsReport {
    /// Builds the report from a base-measure set and, optionally, a tilted set
    /// used for the energy and `Z log Z` (the lower-variance route).
    pub fn new(seed: u64, base: &PathSet, tilted: Option<&PathSet>, j: usize) -> Self {
        let energy_set = tilted.unwrap_or(base);
        let guarded = transformed_energy_estimate(energy_set, j, DEFAULT_OVERFLOW_GUARD);
        DiagnosticsReport {
            scenario: base.scenario.clone(),
            t: base.times[j],
            seed,
            n_paths: base.n_paths(),
            e_z: base.e_z(j).ok(),
            transformed_energy: guarded.estimate,
            energy_overflow: guarded.overflow,
            z_log_z: energy_set.z_log_z(j),
            z_star: base.z_star(j),
            plain_energy: base.plain_energy(j),
        }
    }

    fn quantities(&self) -> Vec<(&'static str, Estimate)> {
        let mut q = Vec::new();
        if let Some(e) = self.e_z {
            q.push(("e_z", e));
        }
        q.push(("transformed_energy", self.transformed_energy));
        q.push(("z_log_z", self.z_log_z));
        q.push(("z_star", self.z_star));
        q.push(("plain_energy", self.plain_energy));
        q
    }

    /// Flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "scenario={}", self.scenario).unwrap();
        writeln!(s, "t={}", fmt_real(self.t)).unwrap();
        writeln!(s, "seed={}", self.seed).unwrap();
        writeln!(s, "n_paths={}", self.n_paths).unwrap();
        writeln!(s, "energy_overflow={}", self.energy_overflow).unwrap();
        for (name, e) in self.quantities() {
            writeln!(s, "{name}={}", fmt_real(e.value)).unwrap();
            writeln!(s, "{name}_se={}", fmt_real(e.se)).unwrap();
        }
        s
    }

    /// Rows `scenario,quantity,estimate,se,n_paths,seed` (no header).
    pub fn csv_rows(&self) -> Vec<[String; 6]> {
        self.quantities()
            .into_iter()
            .map(|(name, e)| {
                [
                    self.scenario.clone(),
                    name.to_string(),
                    fmt_real(e.value),
                    fmt_real(e.se),
                    self.n_paths.to_string(),
                    self.seed.to_string(),
                ]
            })
            .collect()
    }

    pub const CSV_HEADER: [&'static str; 6] =
        ["scenario", "quantity", "estimate", "se", "n_paths", "seed"];
}

/// `¼(e^{2αt} − 2αt − 1)`.
pub fn revuz_yor_closed_form(alpha: f64, t: f64) -> f64 {
    let a = 2.0 * alpha * t;
    0.25 * (a.exp() - a - 1.0)
}

/// Joint standard error of two independent estimates (re-exported for callers).
pub fn independent_se(a: &Estimate, b: &Estimate) -> f64 {
    joint_se(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin, ChangeDetectionSpec, Dims};
    use crate::rng::Stream;
    use crate::simulate::simulate_model;

    #[test]
    fn increment_examples() {
        assert_eq!(log_weight_increment(&[0.0], &[0.7], 0.1).unwrap(), 0.0);
        assert!((log_weight_increment(&[1.0], &[0.1], 0.01).unwrap() - 0.095).abs() < 1e-15);
        assert!(
            log_weight_increment(&[1.0, -1.0], &[0.2, 0.1], 0.1)
                .unwrap()
                .abs()
                < 1e-15
        );
        assert!(log_weight_increment(&[f64::NAN], &[0.1], 0.1).is_err());
        assert!(log_weight_increment(&[1.0], &[0.1], 0.0).is_err());
    }

    #[test]
    fn weight_telescopes() {
        let model = builtin("correlated_linear").unwrap();
        let grid = TimeGrid::new(1.0, 1e-3).unwrap();
        let b = simulate_model(&model, &grid, Stream::new(6)).unwrap();
        let traj = WeightTrajectory::from_bundle(&model, &b).unwrap();
        assert_eq!(traj.log_z[0], 0.0);
        // One pass: ∫h dY − ½∫h² with the sums accumulated separately.
        let (mut lin, mut quad) = (0.0, 0.0);
        for k in 0..grid.n_steps {
            let h = b.x_at(k)[0];
            lin += h * (b.y_at(k + 1)[0] - b.y_at(k)[0]);
            quad += h * h;
        }
        let direct = (lin - 0.5 * quad * grid.dt).exp();
        let telescoped = traj.terminal().exp();
        assert!(
            ((direct - telescoped) / direct).abs() < 1e-12,
            "{direct} {telescoped}"
        );
    }

    fn report(grid: &TimeGrid) -> Vec<usize> {
        [0.25, 0.5, 1.0]
            .iter()
            .map(|&t| grid.index_of(t).unwrap())
            .collect()
    }

    #[test]
    fn zero_scenario_is_exact() {
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let set = PathSet::simulate(
            &Scenario::Zero,
            Measure::Base,
            &grid,
            &report(&grid),
            10,
            Stream::new(0),
        )
        .unwrap();
        let j = set.last();
        assert_eq!(set.e_z(j).unwrap(), Estimate::exact(1.0, 10));
        assert_eq!(set.transformed_energy(j).value, 0.0);
        assert_eq!(set.z_log_z(j).value, 0.0);
        assert_eq!(set.z_star(j).value, 1.0);
        let check = zstar_bound_check(&set, &set, j);
        assert!(check.pass && (check.rhs - 2.163953413738653).abs() < 1e-12);
        assert!(martingale_mean_check(&set).unwrap().pass);
        let id = energy_identity_check(&set, j).unwrap();
        assert!(id.pass && id.lhs.value == 0.0 && id.rhs.value == 0.0);
    }

    #[test]
    fn revuz_yor_closed_form_values() {
        assert!((revuz_yor_closed_form(1.0, 1.0) - 1.0972640247326626).abs() < 1e-12);
        assert_eq!(revuz_yor_closed_form(1.0, 0.0), 0.0);
        assert_eq!(
            revuz_yor_closed_form(0.5, 2.0),
            revuz_yor_closed_form(1.0, 1.0)
        );
    }

    #[test]
    fn tilted_revuz_yor_energy_and_zlogz() {
        let grid = TimeGrid::new(1.0, 1e-3).unwrap();
        let set = PathSet::simulate(
            &Scenario::RevuzYor { alpha: 1.0 },
            Measure::Transformed,
            &grid,
            &[grid.n_steps],
            4_000,
            Stream::new(10),
        )
        .unwrap();
        let e = transformed_energy_estimate(&set, 0, DEFAULT_OVERFLOW_GUARD);
        assert!(!e.overflow);
        assert!(
            e.estimate.within(revuz_yor_closed_form(1.0, 1.0), 3.0),
            "{e:?}"
        );
        assert!(zlogz_identity_check(&set, 0).pass);
        assert!(set.e_z(0).is_err());
    }

    #[test]
    fn independent_h_energy_equals_plain_energy() {
        let grid = TimeGrid::new(1.0, 1e-2).unwrap();
        let set = PathSet::simulate(
            &Scenario::IndependentH,
            Measure::Base,
            &grid,
            &[grid.n_steps],
            20_000,
            Stream::new(12),
        )
        .unwrap();
        let a = set.transformed_energy(0);
        let b = set.plain_energy(0);
        assert!(
            (a.value - b.value).abs() <= 3.0 * joint_se(&a, &b),
            "{a:?} {b:?}"
        );
        // E∫|B'_s|² ds = t²/2, up to the left-point sum.
        let left_point = 0.5 * (1.0 - grid.dt);
        assert!(b.within(left_point, 3.0), "{b:?}");
    }

    #[test]
    fn jump_ou_martingale_and_identities() {
        let model = builtin("jump_ou").unwrap();
        let grid = TimeGrid::new(1.0, 1e-2).unwrap();
        let set = PathSet::simulate(
            &Scenario::reference_density(model),
            Measure::Base,
            &grid,
            &report(&grid),
            5_000,
            Stream::new(3),
        )
        .unwrap();
        assert!(martingale_mean_check(&set).unwrap().pass);
        let j = set.last();
        assert!(energy_identity_check(&set, j).unwrap().pass);
        assert!(zlogz_identity_check(&set, j).pass);
        assert!(zstar_bound_check(&set, &set, j).pass);
    }

    #[test]
    fn correlated_linear_energy_identity() {
        let model = builtin("correlated_linear").unwrap();
        let grid = TimeGrid::new(1.0, 1e-2).unwrap();
        let set = PathSet::simulate(
            &Scenario::reference_density(model),
            Measure::Base,
            &grid,
            &[grid.n_steps],
            5_000,
            Stream::new(4),
        )
        .unwrap();
        assert!(energy_identity_check(&set, 0).unwrap().pass);
    }

    #[test]
    fn gronwall_on_zero_model_and_fixed_change_detection() {
        let zero = Model::JumpDiffusion(SignalModel::zero(
            "zero",
            Dims {
                d: 1,
                p: 1,
                m: 1,
                r: 0,
            },
            vec![0.0],
        ));
        let grid = TimeGrid::new(1.0, 1e-2).unwrap();
        let idx = grid.strided(10);
        let g = gronwall_bound_check(&zero, &grid, &idx, 10, None, Stream::new(1)).unwrap();
        assert!(g.pass);
        assert!(g.values.iter().all(|v| v.value == 1.0));

        let cd = Model::ChangeDetection(
            ChangeDetection::new(ChangeDetectionSpec::fixed(0.5, 1.0, 0.5)).unwrap(),
        );
        assert_eq!(gronwall_constant(&cd), 4.0 + 2.25);
        let g = gronwall_bound_check(&cd, &grid, &idx, 4_000, None, Stream::new(2)).unwrap();
        assert!(g.pass, "{g:?}");
        // E_P[Z_t(1 + Y_t²)] = 1 + t exactly.
        for (t, v) in g.times.iter().zip(&g.values) {
            assert!(v.within(1.0 + t, 4.0), "t={t}: {v:?}");
        }
    }

    #[test]
    fn report_serialisation() {
        let grid = TimeGrid::new(1.0, 0.1).unwrap();
        let set = PathSet::simulate(
            &Scenario::Zero,
            Measure::Base,
            &grid,
            &[10],
            4,
            Stream::new(0),
        )
        .unwrap();
        let rep = DiagnosticsReport::new(7, &set, None, 0);
        let kv = rep.to_kv();
        assert!(kv.contains("scenario=zero\n"));
        assert!(kv.contains("e_z=1.0000000000000000e0\n"));
        let rows = rep.csv_rows();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0][1], "e_z");
        assert_eq!(rows[0][5], "7");
    }

    #[test]
    fn path_set_rejects_bad_input() {
        let grid = TimeGrid::new(1.0, 0.1).unwrap();
        assert!(PathSet::simulate(
            &Scenario::Zero,
            Measure::Base,
            &grid,
            &[10],
            1,
            Stream::new(0)
        )
        .is_err());
        assert!(PathSet::simulate(
            &Scenario::Zero,
            Measure::Base,
            &grid,
            &[11],
            4,
            Stream::new(0)
        )
        .is_err());
        assert!(PathSet::simulate(
            &Scenario::RevuzYor { alpha: -1.0 },
            Measure::Base,
            &grid,
            &[10],
            4,
            Stream::new(0)
        )
        .is_err());
    }
}
