//! Generator `A`, correlation operators `B^i` and the `D_j` operators.

use super::levy::JumpLaw;
use super::test_function::TestFunction;
use super::SignalModel;
use crate::error::{Error, Result};
use crate::linalg::gemv_acc;
use crate::rng::{Stream, StreamRng};
use crate::stats::MeanAccumulator;

/// Value of `Aφ`, with the Monte Carlo standard error of the jump integral
/// (zero for atomic jump laws).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorValue {
    pub value: f64,
    pub se: f64,
}

/// Reusable buffers for operator evaluation in hot loops.
pub struct OperatorWorkspace {
    grad: Vec<f64>,
    hess: Vec<f64>,
    gy: Vec<f64>,
    f: Vec<f64>,
    sigma: Vec<f64>,
    sigma_bar: Vec<f64>,
    sigma_tilde: Vec<f64>,
    h: Vec<f64>,
    /// `σσᵀ + σ̄σ̄ᵀ` at the loaded point.
    diffusion: Vec<f64>,
    b: Vec<f64>,
    eta: Vec<f64>,
    jump: Vec<f64>,
    shifted: Vec<f64>,
    mc_rng: StreamRng,
    mc_samples: usize,
}

impl OperatorWorkspace {
    pub const DEFAULT_MC_SAMPLES: usize = 4096;

    pub fn new(model: &SignalModel) -> Self {
        let dims = model.dims;
        let (d, p, m, r) = (dims.d, dims.p, dims.m, dims.r);
        OperatorWorkspace {
            grad: vec![0.0; d],
            hess: vec![0.0; d * d],
            gy: vec![0.0; m],
            f: vec![0.0; d],
            sigma: vec![0.0; d * p],
            sigma_bar: vec![0.0; d * m],
            sigma_tilde: vec![0.0; d * r],
            h: vec![0.0; m],
            diffusion: vec![0.0; d * d],
            b: model.levy_drift(),
            eta: vec![0.0; r],
            jump: vec![0.0; d],
            shifted: vec![0.0; d],
            mc_rng: Stream::new(0).tagged("jump-quadrature").rng(),
            mc_samples: Self::DEFAULT_MC_SAMPLES,
        }
    }

    /// Monte Carlo settings for non-atomic jump laws.
    pub fn with_monte_carlo(mut self, stream: Stream, samples: usize) -> Self {
        self.mc_rng = stream.rng();
        self.mc_samples = samples.max(2);
        self
    }

    /// `Aφ(x, y)`.
    pub fn generator(
        &mut self,
        model: &SignalModel,
        phi: &TestFunction,
        x: &[f64],
        y: &[f64],
    ) -> Result<GeneratorValue> {
        self.load(model, x);
        self.generator_loaded(model, phi, x, y)
    }

    /// Evaluate the model coefficients at `x` for subsequent `*_loaded` calls.
    pub fn load(&mut self, model: &SignalModel, x: &[f64]) {
        let dims = model.dims;
        let (d, p, m, r) = (dims.d, dims.p, dims.m, dims.r);
        (model.f)(x, &mut self.f);
        (model.sigma)(x, &mut self.sigma);
        (model.sigma_bar)(x, &mut self.sigma_bar);
        (model.h)(x, &mut self.h);
        if r > 0 {
            (model.sigma_tilde)(x, &mut self.sigma_tilde);
            gemv_acc(&mut self.f, &self.sigma_tilde, d, r, &self.b, 1.0);
        }
        for i in 0..d {
            for j in 0..d {
                let mut a = 0.0;
                for k in 0..p {
                    a += self.sigma[i * p + k] * self.sigma[j * p + k];
                }
                for k in 0..m {
                    a += self.sigma_bar[i * m + k] * self.sigma_bar[j * m + k];
                }
                self.diffusion[i * d + j] = a;
            }
        }
    }

    /// `h(x)` at the loaded point.
    pub fn loaded_sensor(&self) -> &[f64] {
        &self.h
    }

    /// `Aφ(x, y)` with the coefficients from the last [`load`](Self::load) at `x`.
    pub fn generator_loaded(
        &mut self,
        model: &SignalModel,
        phi: &TestFunction,
        x: &[f64],
        y: &[f64],
    ) -> Result<GeneratorValue> {
        let d = model.dims.d;
        let r = model.dims.r;
        phi.grad_x(x, y, &mut self.grad);
        phi.hess_x(x, y, &mut self.hess)?;

        let mut value: f64 = self.f.iter().zip(&self.grad).map(|(a, g)| a * g).sum();

        let mut diffusion = 0.0;
        for (a, hij) in self.diffusion.iter().zip(&self.hess) {
            if *hij != 0.0 {
                diffusion += a * hij;
            }
        }
        value += 0.5 * diffusion;

        if !phi.is_y_independent() {
            phi.grad_y(x, y, &mut self.gy);
            value += self.h.iter().zip(&self.gy).map(|(a, g)| a * g).sum::<f64>();
            value += 0.5 * phi.lap_y(x, y);
        }

        let mut se = 0.0;
        if let Some(levy) = &model.levy {
            let phi0 = phi.value(x, y);
            match &levy.jump_law {
                JumpLaw::Atoms(atoms) => {
                    let mut acc = 0.0;
                    for atom in atoms {
                        acc += atom.prob * self.jump_term(phi, x, y, phi0, &atom.mark, d, r);
                    }
                    value += levy.jump_rate * acc;
                }
                JumpLaw::Gaussian { .. } => {
                    let mut acc = MeanAccumulator::default();
                    for _ in 0..self.mc_samples {
                        let mut eta = std::mem::take(&mut self.eta);
                        levy.sample_mark(&mut self.mc_rng, &mut eta);
                        acc.push(self.jump_term(phi, x, y, phi0, &eta, d, r));
                        self.eta = eta;
                    }
                    let est = acc.estimate();
                    value += levy.jump_rate * est.value;
                    se = levy.jump_rate * est.se;
                }
            }
        }

        if !value.is_finite() {
            return Err(Error::non_finite(format!("A{} at {x:?}", phi.label())));
        }
        Ok(GeneratorValue { value, se })
    }

    #[allow(clippy::too_many_arguments)]
    fn jump_term(
        &mut self,
        phi: &TestFunction,
        x: &[f64],
        y: &[f64],
        phi0: f64,
        eta: &[f64],
        d: usize,
        r: usize,
    ) -> f64 {
        self.jump.iter_mut().for_each(|v| *v = 0.0);
        gemv_acc(&mut self.jump, &self.sigma_tilde, d, r, eta, 1.0);
        for i in 0..d {
            self.shifted[i] = x[i] + self.jump[i];
        }
        let first_order: f64 = self.grad.iter().zip(&self.jump).map(|(g, j)| g * j).sum();
        phi.value(&self.shifted, y) - phi0 - first_order
    }

    /// `B^i φ(x, y) = (σ̄(x)ᵀ ∇_x φ)_i`.
    pub fn correlation(
        &mut self,
        model: &SignalModel,
        phi: &TestFunction,
        x: &[f64],
        y: &[f64],
        i: usize,
    ) -> Result<f64> {
        let m = model.dims.m;
        if i >= m {
            return Err(Error::IndexOutOfRange { index: i, bound: m });
        }
        phi.grad_x(x, y, &mut self.grad);
        (model.sigma_bar)(x, &mut self.sigma_bar);
        let d = model.dims.d;
        Ok((0..d)
            .map(|k| self.sigma_bar[k * m + i] * self.grad[k])
            .sum())
    }

    /// All `m` correlation terms at once.
    pub fn correlation_all(
        &mut self,
        model: &SignalModel,
        phi: &TestFunction,
        x: &[f64],
        y: &[f64],
        out: &mut [f64],
    ) {
        let (d, m) = (model.dims.d, model.dims.m);
        phi.grad_x(x, y, &mut self.grad);
        (model.sigma_bar)(x, &mut self.sigma_bar);
        for (i, o) in out.iter_mut().enumerate().take(m) {
            *o = (0..d)
                .map(|k| self.sigma_bar[k * m + i] * self.grad[k])
                .sum();
        }
    }

    /// All `m` correlation terms with the coefficients from the last `load`.
    pub fn correlation_all_loaded(
        &mut self,
        model: &SignalModel,
        phi: &TestFunction,
        x: &[f64],
        y: &[f64],
        out: &mut [f64],
    ) {
        let (d, m) = (model.dims.d, model.dims.m);
        phi.grad_x(x, y, &mut self.grad);
        for (i, o) in out.iter_mut().enumerate().take(m) {
            *o = (0..d)
                .map(|k| self.sigma_bar[k * m + i] * self.grad[k])
                .sum();
        }
    }

    /// `D_j φ = h^j φ + B^j φ + ∂φ/∂y_j`.
    pub fn d_operator(
        &mut self,
        model: &SignalModel,
        phi: &TestFunction,
        x: &[f64],
        y: &[f64],
        j: usize,
    ) -> Result<f64> {
        let b = self.correlation(model, phi, x, y, j)?;
        (model.h)(x, &mut self.h);
        phi.grad_y(x, y, &mut self.gy);
        Ok(self.h[j] * phi.value(x, y) + b + self.gy[j])
    }
}

/// `Aφ(x, y)` with default jump quadrature settings.
pub fn apply_generator(
    model: &SignalModel,
    phi: &TestFunction,
    x: &[f64],
    y: &[f64],
) -> Result<GeneratorValue> {
    OperatorWorkspace::new(model).generator(model, phi, x, y)
}

/// `B^i φ(x, y)`.
pub fn apply_correlation(
    model: &SignalModel,
    phi: &TestFunction,
    x: &[f64],
    y: &[f64],
    i: usize,
) -> Result<f64> {
    OperatorWorkspace::new(model).correlation(model, phi, x, y, i)
}

/// `D_j φ(x, y)`.
pub fn apply_d(
    model: &SignalModel,
    phi: &TestFunction,
    x: &[f64],
    y: &[f64],
    j: usize,
) -> Result<f64> {
    OperatorWorkspace::new(model).d_operator(model, phi, x, y, j)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::levy::{Atom, LevySpec};
    use crate::model::{builtin_names, Dims, Model};
    use proptest::prelude::*;

    fn scalar() -> SignalModel {
        SignalModel::zero(
            "s",
            Dims {
                d: 1,
                p: 1,
                m: 1,
                r: 1,
            },
            vec![0.0],
        )
    }

    #[test]
    fn generator_annihilates_constants_on_builtins() {
        let one = TestFunction::constant(1.0);
        for name in builtin_names() {
            if let Model::JumpDiffusion(sm) = crate::model::builtin(name).unwrap() {
                for x in [-2.0, 0.0, 0.7, 5.0] {
                    let g = apply_generator(&sm, &one, &[x], &[0.1]).unwrap();
                    assert_eq!(g.value, 0.0);
                    assert_eq!(apply_correlation(&sm, &one, &[x], &[0.1], 0).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn pure_drift_on_linear_phi() {
        let mut m = scalar();
        m.f = Arc::new(|x, o| o[0] = 3.0 - 0.5 * x[0]);
        let g = apply_generator(&m, &TestFunction::coordinate(0), &[2.0], &[0.0]).unwrap();
        assert_eq!(g.value, 2.0);
    }

    #[test]
    fn single_atom_jump_contribution_on_square() {
        // φ(x+1) − φ(x) − φ'(x) = 1, scaled by the rate.
        let mut m = scalar();
        let lambda = 2.5;
        m.levy = Some(
            LevySpec::new(
                lambda,
                JumpLaw::Atoms(vec![Atom {
                    mark: vec![1.0],
                    prob: 1.0,
                }]),
                vec![-1.0],
            )
            .unwrap(),
        );
        m.sigma_tilde = Arc::new(|_, o| o[0] = 1.0);
        m.f = Arc::new(|x, o| o[0] = -x[0]);
        m.sigma = Arc::new(|_, o| o[0] = 0.5);
        let x = 1.3;
        // b = a + ∫_{|ρ|≥1} ρF = -1 + 2.5 = 1.5; f̃ = -x + 1.5.
        let drift = 2.0 * x * (-x + 1.5);
        let diffusion = 0.5 * 0.25 * 2.0;
        let g = apply_generator(&m, &TestFunction::product(0, 0), &[x], &[0.0]).unwrap();
        assert!(
            (g.value - (drift + diffusion + lambda)).abs() < 1e-12,
            "{}",
            g.value
        );
        assert_eq!(g.se, 0.0);
    }

    #[test]
    fn missing_hessian_is_an_error() {
        let phi = TestFunction::new("nohess", |x, _| x[0], |_, _, g| g[0] = 1.0);
        assert!(apply_generator(&scalar(), &phi, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn correlation_examples() {
        let mut m = scalar();
        assert_eq!(
            apply_correlation(&m, &TestFunction::coordinate(0), &[1.0], &[0.0], 0).unwrap(),
            0.0
        );
        m.sigma_bar = Arc::new(|_, o| o[0] = 0.7);
        assert_eq!(
            apply_correlation(&m, &TestFunction::coordinate(0), &[1.0], &[0.0], 0).unwrap(),
            0.7
        );
        assert!(matches!(
            apply_correlation(&m, &TestFunction::coordinate(0), &[1.0], &[0.0], 1),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn d_operator_examples() {
        let mut m = scalar();
        m.h = Arc::new(|x, o| o[0] = x[0]);
        assert_eq!(
            apply_d(&m, &TestFunction::constant(1.0), &[1.5], &[0.0], 0).unwrap(),
            1.5
        );
        assert_eq!(
            apply_d(&m, &TestFunction::coordinate(0), &[1.5], &[0.0], 0).unwrap(),
            2.25
        );
        m.h = Arc::new(|_, o| o[0] = 0.0);
        m.sigma_bar = Arc::new(|_, o| o[0] = -0.4);
        assert_eq!(
            apply_d(&m, &TestFunction::tanh(0), &[0.0], &[0.0], 0).unwrap(),
            -0.4
        );
        assert!(apply_d(&m, &TestFunction::coordinate(0), &[0.0], &[0.0], 3).is_err());
    }

    #[test]
    fn y_dependent_phi_picks_up_observation_terms() {
        let mut m = scalar();
        m.h = Arc::new(|x, o| o[0] = 2.0 * x[0]);
        // φ(x, y) = y^2: Aφ = h·2y + ½·2.
        let phi = TestFunction::new("y^2", |_, y| y[0] * y[0], |_, _, g| g[0] = 0.0)
            .with_hessian(|_, _, h| h[0] = 0.0)
            .with_y_derivatives(|_, y, g| g[0] = 2.0 * y[0], |_, _| 2.0);
        let g = apply_generator(&m, &phi, &[1.5], &[0.5]).unwrap();
        assert!((g.value - (3.0 * 1.0 + 1.0)).abs() < 1e-15);
        assert_eq!(
            apply_d(&m, &phi, &[1.5], &[0.5], 0).unwrap(),
            3.0 * 0.25 + 1.0
        );
    }

    #[test]
    fn monte_carlo_jump_quadrature_variance_halves_with_doubled_samples() {
        let mut m = scalar();
        m.levy = Some(
            LevySpec::new(
                1.0,
                JumpLaw::Gaussian {
                    mean: 0.2,
                    std_dev: 1.0,
                },
                vec![0.0],
            )
            .unwrap(),
        );
        m.sigma_tilde = Arc::new(|_, o| o[0] = 1.0);
        let phi = TestFunction::tanh(0);
        let mut ses = Vec::new();
        for samples in [2_000usize, 4_000, 8_000, 16_000] {
            let mut ws = OperatorWorkspace::new(&m).with_monte_carlo(Stream::new(11), samples);
            ses.push(ws.generator(&m, &phi, &[0.3], &[0.0]).unwrap().se);
        }
        let x: Vec<f64> = [2_000f64, 4_000.0, 8_000.0, 16_000.0]
            .iter()
            .map(|v| v.ln())
            .collect();
        let y: Vec<f64> = ses.iter().map(|s| (s * s).ln()).collect();
        let slope = crate::stats::ls_slope(&x, &y);
        assert!((slope + 1.0).abs() < 0.15, "variance slope {slope}");
    }

    #[test]
    fn monte_carlo_quadrature_agrees_with_exact_quadratic() {
        // For φ = x², the jump integrand is η², so the integral is rate·E[η²].
        let mut m = scalar();
        m.levy = Some(
            LevySpec::new(
                1.5,
                JumpLaw::Gaussian {
                    mean: 0.2,
                    std_dev: 0.5,
                },
                vec![0.0],
            )
            .unwrap(),
        );
        m.sigma_tilde = Arc::new(|_, o| o[0] = 1.0);
        let mut ws = OperatorWorkspace::new(&m).with_monte_carlo(Stream::new(5), 50_000);
        let g = ws
            .generator(&m, &TestFunction::product(0, 0), &[0.0], &[0.0])
            .unwrap();
        let b = m.levy.as_ref().unwrap().drift_b()[0];
        let exact = 1.5 * (0.04 + 0.25);
        assert!(
            (g.value - exact).abs() < 3.0 * g.se + 1e-12,
            "{} vs {exact} (b={b})",
            g.value
        );
    }

    proptest! {
        #[test]
        fn linear_phi_without_noise_reduces_to_drift(a in -3.0f64..3.0, c in -3.0f64..3.0, x in -5.0f64..5.0) {
            let mut m = scalar();
            m.f = Arc::new(move |x, o| o[0] = a * x[0] + c);
            let g = apply_generator(&m, &TestFunction::coordinate(0), &[x], &[0.0]).unwrap();
            prop_assert!((g.value - (a * x + c)).abs() < 1e-12);
        }
    }
}
