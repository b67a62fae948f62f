//! Signal/observation models and the operator calculus used by the filtering
//! equations.
//!
//! A [`SignalModel`] is the jump-diffusion
//!
//! ```text
//! dX = f(X-) dt + σ(X-) dV + σ̄(X-) dW + σ̃(X-) dL,      dY = h(X) dt + dW,
//! ```
//!
//! with `V`, `W` Brownian, `L` a finite-activity Lévy driver, and `W` shared
//! between signal and observation (correlated noise through `σ̄`). The
//! change-detection problem has a different, piecewise-constant signal and is
//! modelled separately in [`ChangeDetection`]; [`Model`] dispatches over both.

mod affine;
mod change_detection;
mod levy;
mod operators;
mod test_function;

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use affine::{builtin, builtin_affine, builtin_names, AffineSpec, ModelSpec};
pub use change_detection::{ChangeDetection, ChangeDetectionSpec};
pub use levy::{Atom, JumpLaw, LevySpec};
pub use operators::{
    apply_correlation, apply_d, apply_generator, GeneratorValue, OperatorWorkspace,
};
pub use test_function::{check_derivatives, DerivativeCheck, TestFunction};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_psd, norm};
use crate::rng::StreamRng;

/// Writes a vector field value into the output buffer.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Writes a row-major matrix field value into the output buffer.
pub type MatrixField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Dimensions: state `d`, signal noise `p`, observation `m`, Lévy `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d: usize,
    pub p: usize,
    pub m: usize,
    pub r: usize,
}

/// Law of `X_0`.
#[derive(Clone)]
pub enum InitialLaw {
    PointMass(Vec<f64>),
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<f64>,
        chol: Vec<f64>,
    },
    Custom {
        sampler: Arc<dyn Fn(&mut StreamRng, &mut [f64]) + Send + Sync>,
        /// `E|X_0|^2`, if known.
        second_moment: Option<f64>,
    },
}

impl fmt::Debug for InitialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialLaw::PointMass(c) => f.debug_tuple("PointMass").field(c).finish(),
            InitialLaw::Gaussian { mean, cov, .. } => f
                .debug_struct("Gaussian")
                .field("mean", mean)
                .field("cov", cov)
                .finish(),
            InitialLaw::Custom { second_moment, .. } => f
                .debug_struct("Custom")
                .field("second_moment", second_moment)
                .finish(),
        }
    }
}

impl InitialLaw {
    pub fn gaussian(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::DimensionMismatch {
                what: "initial covariance",
                expected: d * d,
                actual: cov.len(),
            });
        }
        let chol = cholesky_psd(&cov, d).ok_or_else(|| Error::invalid("initial_cov", "not PSD"))?;
        Ok(InitialLaw::Gaussian { mean, cov, chol })
    }

    pub fn sample(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match self {
            InitialLaw::PointMass(c) => out.copy_from_slice(c),
            InitialLaw::Gaussian { mean, chol, .. } => {
                let d = mean.len();
                let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                for i in 0..d {
                    out[i] = mean[i] + (0..=i).map(|k| chol[i * d + k] * z[k]).sum::<f64>();
                }
            }
            InitialLaw::Custom { sampler, .. } => sampler(rng, out),
        }
    }

    /// `E|X_0|^2`, when available in closed form.
    pub fn second_moment(&self) -> Option<f64> {
        match self {
            InitialLaw::PointMass(c) => Some(c.iter().map(|v| v * v).sum()),
            InitialLaw::Gaussian { mean, cov, .. } => {
                let d = mean.len();
                Some(
                    mean.iter().map(|v| v * v).sum::<f64>()
                        + (0..d).map(|i| cov[i * d + i]).sum::<f64>(),
                )
            }
            InitialLaw::Custom { second_moment, .. } => *second_moment,
        }
    }

    pub fn gaussian_moments(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            InitialLaw::PointMass(c) => Some((c.clone(), vec![0.0; c.len() * c.len()])),
            InitialLaw::Gaussian { mean, cov, .. } => Some((mean.clone(), cov.clone())),
            InitialLaw::Custom { .. } => None,
        }
    }
}

/// The jump-diffusion signal/observation model.
#[derive(Clone)]
pub struct SignalModel {
    pub name: String,
    pub dims: Dims,
    pub f: VectorField,
    pub sigma: MatrixField,
    pub sigma_bar: MatrixField,
    pub sigma_tilde: MatrixField,
    pub h: VectorField,
    pub levy: Option<LevySpec>,
    pub linear_growth_k: f64,
    pub sigma_bar_bound: Option<f64>,
    pub initial_law: InitialLaw,
    /// Present when the model was built from affine coefficients.
    pub affine: Option<AffineSpec>,
}

impl fmt::Debug for SignalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignalModel")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .field("levy", &self.levy)
            .field("linear_growth_k", &self.linear_growth_k)
            .field("sigma_bar_bound", &self.sigma_bar_bound)
            .finish_non_exhaustive()
    }
}

fn zero_field() -> MatrixField {
    Arc::new(|_, out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0))
}

impl SignalModel {
    /// A model with every coefficient zero, no jumps and `X_0 = x0`; set the
    /// coefficient fields afterwards.
    pub fn zero(name: impl Into<String>, dims: Dims, x0: Vec<f64>) -> Self {
        SignalModel {
            name: name.into(),
            dims,
            f: zero_field(),
            sigma: zero_field(),
            sigma_bar: zero_field(),
            sigma_tilde: zero_field(),
            h: zero_field(),
            levy: None,
            linear_growth_k: 1.0,
            sigma_bar_bound: None,
            initial_law: InitialLaw::PointMass(x0),
            affine: None,
        }
    }

    /// `b` of the compensated Lévy representation (zero without jumps).
    pub fn levy_drift(&self) -> Vec<f64> {
        self.levy
            .as_ref()
            .map_or_else(|| vec![0.0; self.dims.r], LevySpec::drift_b)
    }

    /// The same model with `σ̄` folded into an independent noise block; used as
    /// the negative control that ignores the signal/observation correlation.
    pub fn decorrelated(&self) -> SignalModel {
        let Dims { d, p, m, r } = self.dims;
        let sigma = self.sigma.clone();
        let sigma_bar = self.sigma_bar.clone();
        let join = move |x: &[f64], out: &mut [f64]| {
            let mut s = vec![0.0; d * p];
            let mut sb = vec![0.0; d * m];
            sigma(x, &mut s);
            sigma_bar(x, &mut sb);
            for i in 0..d {
                out[i * (p + m)..i * (p + m) + p].copy_from_slice(&s[i * p..(i + 1) * p]);
                out[i * (p + m) + p..(i + 1) * (p + m)].copy_from_slice(&sb[i * m..(i + 1) * m]);
            }
        };
        let joined: MatrixField = if self.affine.is_some() {
            // Constant volatilities: join once.
            let mut c = vec![0.0; d * (p + m)];
            join(&vec![0.0; d], &mut c);
            Arc::new(move |_, out: &mut [f64]| out.copy_from_slice(&c))
        } else {
            Arc::new(join)
        };
        SignalModel {
            name: format!("{}_decorrelated", self.name),
            dims: Dims { d, p: p + m, m, r },
            sigma: joined,
            sigma_bar: zero_field(),
            sigma_bar_bound: None,
            affine: None,
            ..self.clone()
        }
    }
}

/// Per-coefficient outcome of the linear-growth probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientCheck {
    pub name: String,
    /// `max |g(x)| / (1 + |x|)` over the probes.
    pub max_ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub coefficients: Vec<CoefficientCheck>,
    pub levy_second_moment_finite: bool,
    pub pass: bool,
}

/// Probe the linear-growth conditions on the coefficients (and the bound on
/// `σ̄`, when declared) at the given points.
pub fn validate_model(model: &SignalModel, probe_points: &[Vec<f64>]) -> Result<ValidationReport> {
    if probe_points.is_empty() {
        return Err(Error::invalid(
            "probe_points",
            "at least one probe point is required",
        ));
    }
    let Dims { d, p, m, r } = model.dims;
    let k = model.linear_growth_k;
    let fields: [(&str, &VectorField, usize); 5] = [
        ("f", &model.f, d),
        ("sigma", &model.sigma, d * p),
        ("sigma_bar", &model.sigma_bar, d * m),
        ("sigma_tilde", &model.sigma_tilde, d * r),
        ("h", &model.h, m),
    ];
    let mut coefficients = Vec::new();
    let mut sigma_bar_max: f64 = 0.0;
    for (name, field, len) in fields {
        let mut buf = vec![0.0; len];
        let mut worst: f64 = 0.0;
        for x in probe_points {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "probe point",
                    expected: d,
                    actual: x.len(),
                });
            }
            field(x, &mut buf);
            if !buf.iter().all(|v| v.is_finite()) {
                return Err(Error::non_finite(format!("coefficient `{name}` at {x:?}")));
            }
            let n = norm(&buf);
            worst = worst.max(n / (1.0 + norm(x)));
            if name == "sigma_bar" {
                sigma_bar_max = sigma_bar_max.max(n);
            }
        }
        coefficients.push(CoefficientCheck {
            name: name.to_string(),
            max_ratio: worst,
            bound: k,
            pass: worst <= k * (1.0 + 1e-12),
        });
    }
    if let Some(bound) = model.sigma_bar_bound {
        coefficients.push(CoefficientCheck {
            name: "sigma_bar_bounded".to_string(),
            max_ratio: sigma_bar_max,
            bound,
            pass: sigma_bar_max <= bound * (1.0 + 1e-12),
        });
    }
    let levy_second_moment_finite = model.levy.as_ref().map_or(true, |l| {
        l.second_moment().iter().all(|v| v.is_finite()) && l.validate().is_ok()
    });
    let pass = levy_second_moment_finite && coefficients.iter().all(|c| c.pass);
    Ok(ValidationReport {
        coefficients,
        levy_second_moment_finite,
        pass,
    })
}

/// Uniform probe grid `[-extent, extent]^d` with `per_axis` points per axis.
pub fn probe_grid(d: usize, extent: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| -extent + 2.0 * extent * i as f64 / (per_axis.max(2) - 1) as f64)
        .collect();
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

/// Any model the simulator and filter can run.
#[derive(Debug, Clone)]
pub enum Model {
    JumpDiffusion(SignalModel),
    ChangeDetection(ChangeDetection),
}

impl Model {
    pub fn name(&self) -> &str {
        match self {
            Model::JumpDiffusion(s) => &s.name,
            Model::ChangeDetection(c) => &c.name,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Model::JumpDiffusion(s) => s.dims.d,
            Model::ChangeDetection(_) => ChangeDetection::STATE_DIM,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            Model::JumpDiffusion(s) => s.dims.m,
            Model::ChangeDetection(_) => 1,
        }
    }

    pub fn signal_model(&self) -> Option<&SignalModel> {
        match self {
            Model::JumpDiffusion(s) => Some(s),
            Model::ChangeDetection(_) => None,
        }
    }

    /// Sensor function `h(x, y)`.
    #[inline]
    pub fn sensor(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            Model::JumpDiffusion(s) => (s.h)(x, out),
            Model::ChangeDetection(c) => out[0] = c.sensor(x, y[0]),
        }
    }

    pub fn sample_initial(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match self {
            Model::JumpDiffusion(s) => s.initial_law.sample(rng, out),
            Model::ChangeDetection(c) => c.sample_initial(rng, out),
        }
    }

    /// The Lyapunov-type functional `U` used by the Gronwall estimate:
    /// `1 + |x|^2` for jump-diffusions, `1 + y^2` for change detection.
    pub fn lyapunov(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Model::JumpDiffusion(_) => 1.0 + x.iter().map(|v| v * v).sum::<f64>(),
            Model::ChangeDetection(_) => 1.0 + y[0] * y[0],
        }
    }

    /// Test functions appropriate for the state space.
    pub fn default_battery(&self) -> Vec<TestFunction> {
        match self {
            Model::JumpDiffusion(s) => TestFunction::battery(s.dims.d),
            Model::ChangeDetection(_) => vec![
                TestFunction::constant(1.0),
                TestFunction::coordinate(ChangeDetection::INDICATOR).relabel("prob_change"),
                TestFunction::coordinate(ChangeDetection::MAGNITUDE).relabel("b"),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(name: &str) -> SignalModel {
        SignalModel::zero(
            name,
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
    fn zero_drift_passes_with_ratio_zero() {
        let rep = validate_model(&scalar("z"), &probe_grid(1, 5.0, 11)).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.coefficients[0].max_ratio, 0.0);
    }

    #[test]
    fn doubled_drift_fails_declared_k_one() {
        let mut m = scalar("2x");
        m.f = Arc::new(|x, out| out[0] = 2.0 * x[0]);
        let rep = validate_model(&m, &[vec![0.5]]).unwrap();
        assert!(rep.coefficients[0].pass, "ratio 1/1.5 < 1 below |x| = 1");
        let rep = validate_model(&m, &[vec![1.0], vec![3.0]]).unwrap();
        assert!(!rep.coefficients[0].pass);
        assert!((rep.coefficients[0].max_ratio - 1.5).abs() < 1e-15);
        assert!(!rep.pass);
    }

    #[test]
    fn non_finite_coefficient_rejected() {
        let mut m = scalar("bad");
        m.h = Arc::new(|x, out| out[0] = 1.0 / x[0]);
        assert!(matches!(
            validate_model(&m, &[vec![0.0]]),
            Err(Error::NonFinite { .. })
        ));
        assert!(validate_model(&m, &[]).is_err());
    }

    #[test]
    fn sigma_bar_bound_is_probed() {
        let mut m = scalar("sb");
        m.sigma_bar = Arc::new(|x, out| out[0] = 0.5 * x[0]);
        m.sigma_bar_bound = Some(1.0);
        let rep = validate_model(&m, &[vec![4.0]]).unwrap();
        let sb = rep
            .coefficients
            .iter()
            .find(|c| c.name == "sigma_bar_bounded")
            .unwrap();
        assert!(!sb.pass);
    }

    #[test]
    fn probe_grid_shape() {
        let g = probe_grid(2, 1.0, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![-1.0, -1.0]);
        assert_eq!(g[8], vec![1.0, 1.0]);
    }
}
