//! Euler–Maruyama simulation of signal/observation pairs under the physical
//! measure, and single steps of the reference-measure signal dynamics.

mod counterexample;
mod io;

use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::gemv_acc;
use crate::model::{ChangeDetection, LevySpec, Model, SignalModel};
use crate::rng::{Stream, StreamRng};

pub use counterexample::{
    dufresne_functional, dufresne_path, hitting_exit, revuz_yor_path, CounterexamplePaths,
    CounterexampleSpec, HittingExit, Measure, RevuzYorPath,
};
pub use io::{fmt_real, CsvPath, PATH_FORMAT};

/// A uniform grid `0 = t_0 < … < t_n = horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// `horizon` must be a whole number of steps (to ~1e-9 relative).
    /// A zero horizon is allowed and yields a grid with a single time.
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(
                "dt",
                format!("must be positive and finite, got {dt}"),
            ));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(
                "horizon",
                format!("must be nonnegative and finite, got {horizon}"),
            ));
        }
        let n = (horizon / dt).round();
        if (n * dt - horizon).abs() > 1e-9 * horizon.max(dt) {
            return Err(Error::invalid(
                "horizon",
                format!("{horizon} is not a whole number of steps of {dt}"),
            ));
        }
        Ok(TimeGrid {
            horizon,
            dt,
            n_steps: n as usize,
        })
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the grid point at time `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if !(0.0..=self.n_steps as f64).contains(&k)
            || (k * self.dt - t).abs() > 1e-9 * self.dt.max(t)
        {
            return Err(Error::invalid(
                "time",
                format!("{t} is not on the grid (dt = {})", self.dt),
            ));
        }
        Ok(k as usize)
    }

    /// Every `stride`-th grid index, always including the last.
    pub fn strided(&self, stride: usize) -> Vec<usize> {
        let stride = stride.max(1);
        let mut idx: Vec<usize> = (0..=self.n_steps).step_by(stride).collect();
        if *idx.last().unwrap() != self.n_steps {
            idx.push(self.n_steps);
        }
        idx
    }
}

/// One recorded jump: the step in which it occurred and its mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub step: usize,
    pub mark: Vec<f64>,
}

/// Aligned trajectories of one simulated path. All arrays are row-major with
/// one row per grid time (states) or per step (increments).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub model: String,
    pub grid: TimeGrid,
    pub stream_key: u64,
    pub d: usize,
    pub m: usize,
    pub p: usize,
    pub r: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w_increments: Vec<f64>,
    pub v_increments: Vec<f64>,
    /// Increments of the compensated Lévy driver.
    pub l_increments: Vec<f64>,
    pub jump_log: Vec<JumpEvent>,
}

impl PathBundle {
    #[inline]
    pub fn x_at(&self, k: usize) -> &[f64] {
        &self.x[k * self.d..(k + 1) * self.d]
    }

    #[inline]
    pub fn y_at(&self, k: usize) -> &[f64] {
        &self.y[k * self.m..(k + 1) * self.m]
    }

    #[inline]
    pub fn dw(&self, k: usize) -> &[f64] {
        &self.w_increments[k * self.m..(k + 1) * self.m]
    }

    #[inline]
    pub fn dv(&self, k: usize) -> &[f64] {
        &self.v_increments[k * self.p..(k + 1) * self.p]
    }

    pub fn observation(&self) -> ObservationPath {
        ObservationPath {
            grid: self.grid,
            m: self.m,
            y: self.y.clone(),
        }
    }
}

/// An observation record `y_0, …, y_n` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationPath {
    pub grid: TimeGrid,
    pub m: usize,
    pub y: Vec<f64>,
}

impl ObservationPath {
    pub fn new(grid: TimeGrid, m: usize, y: Vec<f64>) -> Result<Self> {
        if y.len() != grid.len() * m {
            return Err(Error::DimensionMismatch {
                what: "observation path",
                expected: grid.len() * m,
                actual: y.len(),
            });
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::non_finite("observation path"));
        }
        Ok(ObservationPath { grid, m, y })
    }

    /// A standard Brownian path: the observation law under the reference measure.
    pub fn brownian(grid: TimeGrid, m: usize, stream: Stream) -> Self {
        let mut rng = stream.rng();
        let sd = grid.dt.sqrt();
        let mut y = vec![0.0; grid.len() * m];
        for k in 0..grid.n_steps {
            for j in 0..m {
                let z: f64 = StandardNormal.sample(&mut rng);
                y[(k + 1) * m + j] = y[k * m + j] + sd * z;
            }
        }
        ObservationPath { grid, m, y }
    }

    #[inline]
    pub fn y_at(&self, k: usize) -> &[f64] {
        &self.y[k * self.m..(k + 1) * self.m]
    }

    pub fn dy(&self, k: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.y[(k + 1) * self.m + j] - self.y[k * self.m + j];
        }
    }
}

/// Compound-Poisson sampler for the compensated Lévy increment
/// `ΔL = b dt + Σ marks − dt ∫ρ F(dρ)`.
#[derive(Debug, Clone)]
pub struct LevySampler {
    spec: LevySpec,
    b: Vec<f64>,
    compensator: Vec<f64>,
}

impl LevySampler {
    pub fn new(spec: &LevySpec) -> Self {
        LevySampler {
            spec: spec.clone(),
            b: spec.drift_b(),
            compensator: spec.first_moment(),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Writes the increment into `out` and reports each raw mark.
    pub fn sample_into(
        &self,
        dt: f64,
        rng: &mut StreamRng,
        out: &mut [f64],
        mut on_mark: impl FnMut(&[f64]),
    ) {
        for i in 0..out.len() {
            out[i] = (self.b[i] - self.compensator[i]) * dt;
        }
        let mu = self.spec.jump_rate * dt;
        if mu <= 0.0 {
            return;
        }
        let count = Poisson::new(mu).map(|p| p.sample(rng)).unwrap_or(0.0) as usize;
        let mut mark = vec![0.0; out.len()];
        for _ in 0..count {
            self.spec.sample_mark(rng, &mut mark);
            for (o, v) in out.iter_mut().zip(&mark) {
                *o += v;
            }
            on_mark(&mark);
        }
    }
}

/// One compensated Lévy increment over `dt` and the raw marks drawn.
pub fn sample_levy_increment(
    levy: &LevySpec,
    dt: f64,
    rng: &mut StreamRng,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let sampler = LevySampler::new(levy);
    let mut inc = vec![0.0; sampler.dim()];
    let mut marks = Vec::new();
    sampler.sample_into(dt, rng, &mut inc, |m| marks.push(m.to_vec()));
    Ok((inc, marks))
}

/// Coefficient buffers for Euler steps of a jump-diffusion.
pub struct EulerWorkspace {
    f: Vec<f64>,
    sigma: Vec<f64>,
    sigma_bar: Vec<f64>,
    sigma_tilde: Vec<f64>,
    h: Vec<f64>,
    dv: Vec<f64>,
    dl: Vec<f64>,
    levy: Option<LevySampler>,
}

impl EulerWorkspace {
    pub fn new(model: &SignalModel) -> Self {
        let dims = model.dims;
        EulerWorkspace {
            f: vec![0.0; dims.d],
            sigma: vec![0.0; dims.d * dims.p],
            sigma_bar: vec![0.0; dims.d * dims.m],
            sigma_tilde: vec![0.0; dims.d * dims.r],
            h: vec![0.0; dims.m],
            dv: vec![0.0; dims.p],
            dl: vec![0.0; dims.r],
            levy: model.levy.as_ref().map(LevySampler::new),
        }
    }

    /// `h` at the pre-step state of the most recent step.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Deterministic Euler step under the physical measure given all increments;
    /// `dl` is the compensated Lévy increment (so its `b dt` part supplies the
    /// `σ̃ b` drift correction).
    pub fn physical_step(
        &mut self,
        model: &SignalModel,
        x: &mut [f64],
        dv: &[f64],
        dw: &[f64],
        dl: &[f64],
        dt: f64,
    ) {
        let dims = model.dims;
        let d = dims.d;
        self.eval(model, x);
        for i in 0..d {
            x[i] += self.f[i] * dt;
        }
        gemv_acc(x, &self.sigma, d, dims.p, dv, 1.0);
        gemv_acc(x, &self.sigma_bar, d, dims.m, dw, 1.0);
        if dims.r > 0 {
            gemv_acc(x, &self.sigma_tilde, d, dims.r, dl, 1.0);
        }
    }

    /// Euler step of `dX = (f̃ − σ̄h)dt + σ dV + σ̄ dY + σ̃ dL` with fresh `V`, `L`.
    pub fn reference_step(
        &mut self,
        model: &SignalModel,
        x: &mut [f64],
        dy: &[f64],
        dt: f64,
        rng: &mut StreamRng,
    ) {
        let dims = model.dims;
        let d = dims.d;
        let sd = dt.sqrt();
        for v in self.dv.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = sd * z;
        }
        if let Some(levy) = &self.levy {
            levy.sample_into(dt, rng, &mut self.dl, |_| {});
        }
        self.eval(model, x);
        for i in 0..d {
            x[i] += self.f[i] * dt;
        }
        gemv_acc(x, &self.sigma_bar, d, dims.m, &self.h, -dt);
        gemv_acc(x, &self.sigma, d, dims.p, &self.dv, 1.0);
        gemv_acc(x, &self.sigma_bar, d, dims.m, dy, 1.0);
        if dims.r > 0 {
            gemv_acc(x, &self.sigma_tilde, d, dims.r, &self.dl, 1.0);
        }
    }

    fn eval(&mut self, model: &SignalModel, x: &[f64]) {
        (model.f)(x, &mut self.f);
        (model.sigma)(x, &mut self.sigma);
        (model.sigma_bar)(x, &mut self.sigma_bar);
        if model.dims.r > 0 {
            (model.sigma_tilde)(x, &mut self.sigma_tilde);
        }
        (model.h)(x, &mut self.h);
    }
}

/// One reference-measure step from `x` driven by the observed increment `dy`.
pub fn propagate_under_reference(
    model: &SignalModel,
    x: &[f64],
    dy: &[f64],
    dt: f64,
    rng: &mut StreamRng,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let mut ws = EulerWorkspace::new(model);
    let mut out = x.to_vec();
    ws.reference_step(model, &mut out, dy, dt, rng);
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::non_finite("reference-measure step"));
    }
    Ok(out)
}

/// Simulate `(X, Y)` under the physical measure.
pub fn simulate_pair(model: &SignalModel, grid: &TimeGrid, stream: Stream) -> Result<PathBundle> {
    let dims = model.dims;
    let (d, p, m, r) = (dims.d, dims.p, dims.m, dims.r);
    let n = grid.n_steps;
    let dt = grid.dt;
    let sd = dt.sqrt();
    let mut rng = stream.rng();
    let mut ws = EulerWorkspace::new(model);

    let mut x = vec![0.0; (n + 1) * d];
    let mut y = vec![0.0; (n + 1) * m];
    let mut dw_all = vec![0.0; n * m];
    let mut dv_all = vec![0.0; n * p];
    let mut dl_all = vec![0.0; n * r];
    let mut jump_log = Vec::new();
    model.initial_law.sample(&mut rng, &mut x[..d]);

    let mut state = x[..d].to_vec();
    for k in 0..n {
        let dv = &mut dv_all[k * p..(k + 1) * p];
        for v in dv.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = sd * z;
        }
        let dw = &mut dw_all[k * m..(k + 1) * m];
        for v in dw.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = sd * z;
        }
        let dl = &mut dl_all[k * r..(k + 1) * r];
        if let Some(levy) = &ws.levy {
            levy.sample_into(dt, &mut rng, dl, |mark| {
                jump_log.push(JumpEvent {
                    step: k,
                    mark: mark.to_vec(),
                })
            });
        }
        let (dv, dw, dl) = (
            &dv_all[k * p..(k + 1) * p],
            &dw_all[k * m..(k + 1) * m],
            &dl_all[k * r..(k + 1) * r],
        );
        ws.physical_step(model, &mut state, dv, dw, dl, dt);
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1 });
        }
        x[(k + 1) * d..(k + 2) * d].copy_from_slice(&state);
        for j in 0..m {
            y[(k + 1) * m + j] = y[k * m + j] + ws.h[j] * dt + dw[j];
        }
        if !y[(k + 1) * m..(k + 2) * m].iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1 });
        }
    }

    Ok(PathBundle {
        model: model.name.clone(),
        grid: *grid,
        stream_key: stream.key(),
        d,
        m,
        p,
        r,
        x,
        y,
        w_increments: dw_all,
        v_increments: dv_all,
        l_increments: dl_all,
        jump_log,
    })
}

/// Simulate the change-detection pair: `(B, T)` from the prior, then
/// `dY = (b0 + B 1{t ≥ T}) Y dt + dW`.
pub fn simulate_change_detection(
    cd: &ChangeDetection,
    grid: &TimeGrid,
    stream: Stream,
) -> Result<PathBundle> {
    let d = ChangeDetection::STATE_DIM;
    let n = grid.n_steps;
    let sd = grid.dt.sqrt();
    let mut rng = stream.rng();
    let mut x = vec![0.0; (n + 1) * d];
    let mut y = vec![0.0; n + 1];
    let mut dw_all = vec![0.0; n];
    cd.sample_initial(&mut rng, &mut x[..d]);
    let mut state = x[..d].to_vec();
    for k in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        dw_all[k] = sd * z;
        let h = cd.sensor(&state, y[k]);
        y[k + 1] = y[k] + h * grid.dt + dw_all[k];
        if !y[k + 1].is_finite() {
            return Err(Error::BlowUp { step: k + 1 });
        }
        cd.advance(&mut state, grid.t(k + 1));
        x[(k + 1) * d..(k + 2) * d].copy_from_slice(&state);
    }
    Ok(PathBundle {
        model: cd.name.clone(),
        grid: *grid,
        stream_key: stream.key(),
        d,
        m: 1,
        p: 0,
        r: 0,
        x,
        y,
        w_increments: dw_all,
        v_increments: Vec::new(),
        l_increments: Vec::new(),
        jump_log: Vec::new(),
    })
}

/// Simulate any model under the physical measure.
pub fn simulate_model(model: &Model, grid: &TimeGrid, stream: Stream) -> Result<PathBundle> {
    match model {
        Model::JumpDiffusion(sm) => simulate_pair(sm, grid, stream),
        Model::ChangeDetection(cd) => simulate_change_detection(cd, grid, stream),
    }
}

/// Independent paths `0..n_paths`, path `i` on substream `stream.child(i)`.
pub fn simulate_many(
    model: &Model,
    grid: &TimeGrid,
    n_paths: usize,
    stream: Stream,
) -> Result<Vec<PathBundle>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_model(model, grid, stream.child(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{builtin, Atom, Dims, JumpLaw};
    use crate::stats::{ls_slope, Estimate};

    fn ou() -> SignalModel {
        let mut m = SignalModel::zero(
            "ou",
            Dims {
                d: 1,
                p: 1,
                m: 1,
                r: 0,
            },
            vec![0.0],
        );
        m.f = Arc::new(|x, o| o[0] = -x[0]);
        m.sigma = Arc::new(|_, o| o[0] = 1.0);
        m
    }

    #[test]
    fn grid_validation() {
        let g = TimeGrid::new(1.0, 1e-3).unwrap();
        assert_eq!(g.n_steps, 1000);
        assert_eq!(g.t(1000), 1.0);
        assert_eq!(g.index_of(0.25).unwrap(), 250);
        assert!(TimeGrid::new(1.0, 0.0).is_err());
        assert!(TimeGrid::new(1.0, 0.3).is_err());
        assert!(g.index_of(0.00015).is_err());
        assert_eq!(TimeGrid::new(0.0, 0.1).unwrap().n_steps, 0);
        assert_eq!(TimeGrid::new(1.0, 0.3 / 3.0).unwrap().n_steps, 10);
        assert_eq!(g.strided(300), vec![0, 300, 600, 900, 1000]);
    }

    #[test]
    fn observation_identity_holds_exactly() {
        for name in [
            "linear_gaussian",
            "correlated_linear",
            "jump_ou",
            "change_detection",
        ] {
            let model = builtin(name).unwrap();
            let grid = TimeGrid::new(1.0, 0.01).unwrap();
            let b = simulate_model(&model, &grid, Stream::new(3)).unwrap();
            assert_eq!(b.y_at(0), &[0.0]);
            let mut h = [0.0];
            for k in 0..grid.n_steps {
                model.sensor(b.x_at(k), b.y_at(k), &mut h);
                // Same operation order as the simulator: the identity is exact.
                assert_eq!(
                    b.y_at(k + 1)[0],
                    b.y_at(k)[0] + h[0] * grid.dt + b.dw(k)[0],
                    "{name} step {k}"
                );
            }
        }
    }

    #[test]
    fn reproducible_bit_for_bit() {
        let model = builtin("jump_ou").unwrap();
        let grid = TimeGrid::new(2.0, 0.01).unwrap();
        let a = simulate_model(&model, &grid, Stream::new(42)).unwrap();
        let b = simulate_model(&model, &grid, Stream::new(42)).unwrap();
        assert_eq!(a, b);
        assert!(!a.jump_log.is_empty());
        let c = simulate_model(&model, &grid, Stream::new(43)).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn constant_path_when_all_coefficients_vanish() {
        let m = SignalModel::zero(
            "z",
            Dims {
                d: 2,
                p: 1,
                m: 1,
                r: 0,
            },
            vec![1.5, -2.0],
        );
        let b = simulate_pair(&m, &TimeGrid::new(1.0, 0.1).unwrap(), Stream::new(0)).unwrap();
        for k in 0..=10 {
            assert_eq!(b.x_at(k), &[1.5, -2.0]);
        }
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let mut m = SignalModel::zero(
            "boom",
            Dims {
                d: 1,
                p: 0,
                m: 1,
                r: 0,
            },
            vec![1.0],
        );
        m.f = Arc::new(|x, o| o[0] = x[0] * x[0] * 1e10);
        let err = simulate_pair(&m, &TimeGrid::new(1.0, 0.1).unwrap(), Stream::new(0)).unwrap_err();
        assert!(
            matches!(err, Error::BlowUp { step } if step > 0 && step <= 10),
            "{err:?}"
        );
    }

    #[test]
    fn pure_noise_observation_has_variance_t() {
        let model = Model::JumpDiffusion(SignalModel::zero(
            "z",
            Dims {
                d: 1,
                p: 0,
                m: 1,
                r: 0,
            },
            vec![0.0],
        ));
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let paths = simulate_many(&model, &grid, 10_000, Stream::new(9)).unwrap();
        let y2: Vec<f64> = paths
            .iter()
            .map(|b| b.y_at(grid.n_steps)[0].powi(2))
            .collect();
        let est = Estimate::from_samples(&y2);
        assert!(est.within(1.0, 3.0), "{est:?}");
    }

    #[test]
    fn ou_terminal_variance() {
        let model = Model::JumpDiffusion(ou());
        let grid = TimeGrid::new(1.0, 1e-3).unwrap();
        let paths = simulate_many(&model, &grid, 10_000, Stream::new(1)).unwrap();
        let x2: Vec<f64> = paths
            .iter()
            .map(|b| b.x_at(grid.n_steps)[0].powi(2))
            .collect();
        let est = Estimate::from_samples(&x2);
        let target = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!(est.within(target, 3.0), "{est:?} vs {target}");
    }

    #[test]
    fn strong_error_decays_at_half_order() {
        // Multiplicative noise so that Euler is genuinely order ½.
        let mut model = SignalModel::zero(
            "gbm",
            Dims {
                d: 1,
                p: 1,
                m: 1,
                r: 0,
            },
            vec![1.0],
        );
        model.f = Arc::new(|x, o| o[0] = -0.5 * x[0]);
        model.sigma = Arc::new(|x, o| o[0] = x[0]);
        let fine_n = 1 << 10;
        let fine_dt = 1.0 / fine_n as f64;
        let levels = [4usize, 5, 6, 7];
        let n_paths = 400;
        let mut errs = vec![0.0; levels.len()];
        for path in 0..n_paths {
            let mut rng = Stream::new(77).child(path).rng();
            let dv: Vec<f64> = (0..fine_n)
                .map(|_| fine_dt.sqrt() * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect();
            let run = |steps: usize| {
                let agg = fine_n / steps;
                let mut ws = EulerWorkspace::new(&model);
                let mut x = [1.0];
                for k in 0..steps {
                    let inc: f64 = dv[k * agg..(k + 1) * agg].iter().sum();
                    ws.physical_step(&model, &mut x, &[inc], &[0.0], &[], 1.0 / steps as f64);
                }
                x[0]
            };
            let reference = run(fine_n);
            for (e, &l) in errs.iter_mut().zip(&levels) {
                *e += (run(1 << l) - reference).powi(2) / n_paths as f64;
            }
        }
        let lx: Vec<f64> = levels.iter().map(|&l| -(l as f64) * 2f64.ln()).collect();
        let ly: Vec<f64> = errs.iter().map(|e| e.sqrt().ln()).collect();
        let slope = ls_slope(&lx, &ly);
        assert!((slope - 0.5).abs() < 0.15, "strong order slope {slope}");
    }

    #[test]
    fn levy_increment_examples() {
        let mut rng = Stream::new(5).rng();
        let none = LevySpec::new(
            0.0,
            JumpLaw::Atoms(vec![Atom {
                mark: vec![1.0],
                prob: 1.0,
            }]),
            vec![0.25],
        )
        .unwrap();
        let (inc, marks) = sample_levy_increment(&none, 0.1, &mut rng).unwrap();
        assert!(marks.is_empty());
        assert_eq!(inc, vec![0.25 * 0.1]);
        assert!(sample_levy_increment(&none, 0.0, &mut rng).is_err());

        let lambda = 3.0;
        let dt = 0.01;
        let atom = LevySpec::new(
            lambda,
            JumpLaw::Atoms(vec![Atom {
                mark: vec![1.0],
                prob: 1.0,
            }]),
            vec![0.0],
        )
        .unwrap();
        let sampler = LevySampler::new(&atom);
        let mut raw = Vec::with_capacity(100_000);
        let mut inc = Vec::with_capacity(100_000);
        let mut out = [0.0];
        for _ in 0..100_000 {
            let mut s = 0.0;
            sampler.sample_into(dt, &mut rng, &mut out, |m| s += m[0]);
            raw.push(s);
            inc.push(out[0]);
        }
        let raw_mean = Estimate::from_samples(&raw);
        assert!(raw_mean.within(lambda * dt, 3.0), "{raw_mean:?}");
        // b = λ, so the increment mean is b dt.
        let inc_mean = Estimate::from_samples(&inc);
        assert!(inc_mean.within(lambda * dt, 3.0), "{inc_mean:?}");
        let second: Vec<f64> = raw.iter().map(|v| v * v).collect();
        let second = Estimate::from_samples(&second);
        let target = lambda * dt + (lambda * dt).powi(2);
        assert!(second.within(target, 3.0), "{second:?} vs {target}");
    }

    #[test]
    fn reference_step_examples() {
        let mut m = SignalModel::zero(
            "r",
            Dims {
                d: 1,
                p: 0,
                m: 1,
                r: 0,
            },
            vec![0.0],
        );
        m.sigma_bar = Arc::new(|_, o| o[0] = 1.0);
        let mut rng = Stream::new(0).rng();
        assert_eq!(
            propagate_under_reference(&m, &[2.0], &[0.3], 0.01, &mut rng).unwrap(),
            vec![2.3]
        );
        assert!(propagate_under_reference(&m, &[2.0], &[0.3], 0.0, &mut rng).is_err());
    }

    #[test]
    fn reference_step_mean_on_correlated_model() {
        let model = builtin("correlated_linear").unwrap();
        let sm = model.signal_model().unwrap();
        let (x, dy, dt) = (0.8, 0.05, 0.01);
        let mut rng = Stream::new(2).rng();
        let mut ws = EulerWorkspace::new(sm);
        let samples: Vec<f64> = (0..100_000)
            .map(|_| {
                let mut s = [x];
                ws.reference_step(sm, &mut s, &[dy], dt, &mut rng);
                s[0] - x
            })
            .collect();
        let est = Estimate::from_samples(&samples);
        let target = -x * dt - 0.5 * x * dt + 0.5 * dy;
        assert!(est.within(target, 3.0), "{est:?} vs {target}");
    }

    #[test]
    fn reference_step_without_correlation_matches_physical_law() {
        let model = builtin("linear_gaussian").unwrap();
        let sm = model.signal_model().unwrap();
        let mut rng = Stream::new(4).rng();
        let mut ws = EulerWorkspace::new(sm);
        let dt = 0.01;
        let samples: Vec<f64> = (0..50_000)
            .map(|_| {
                let mut s = [1.0];
                ws.reference_step(sm, &mut s, &[123.0], dt, &mut rng);
                (s[0] - 1.0 + dt).powi(2)
            })
            .collect();
        let est = Estimate::from_samples(&samples);
        assert!(est.within(dt, 3.0), "{est:?}");
    }

    #[test]
    fn brownian_observation_path() {
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let a = ObservationPath::brownian(grid, 2, Stream::new(1));
        assert_eq!(a.y.len(), 202);
        assert_eq!(a.y_at(0), &[0.0, 0.0]);
        assert_eq!(a, ObservationPath::brownian(grid, 2, Stream::new(1)));
        assert!(ObservationPath::new(grid, 1, vec![0.0; 3]).is_err());
    }
}
