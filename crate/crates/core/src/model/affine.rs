//! Affine-coefficient models and the built-in catalogue.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::change_detection::{ChangeDetection, ChangeDetectionSpec};
use super::levy::{Atom, JumpLaw, LevySpec};
use super::{Dims, InitialLaw, Model, SignalModel};
use crate::error::{Error, Result};
use crate::linalg::gemv_acc;

/// A jump-diffusion with affine drift and sensor and constant volatilities:
///
/// `f(x) = A x + a`, `h(x) = H x + c`, `σ`, `σ̄`, `σ̃` constant.
/// Matrices are nested row vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineSpec {
    pub name: String,
    pub drift_matrix: Vec<Vec<f64>>,
    #[serde(default)]
    pub drift_offset: Option<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub sigma_bar: Vec<Vec<f64>>,
    #[serde(default)]
    pub sigma_tilde: Option<Vec<Vec<f64>>>,
    pub sensor_matrix: Vec<Vec<f64>>,
    #[serde(default)]
    pub sensor_offset: Option<Vec<f64>>,
    #[serde(default)]
    pub levy: Option<LevySpec>,
    pub initial_mean: Vec<f64>,
    pub initial_cov: Vec<Vec<f64>>,
    /// Linear-growth constant; derived from the coefficients when absent.
    #[serde(default)]
    pub linear_growth_k: Option<f64>,
}

fn flatten(
    name: &'static str,
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: Option<usize>,
) -> Result<(Vec<f64>, usize)> {
    if rows.len() != nrows {
        return Err(Error::DimensionMismatch {
            what: name,
            expected: nrows,
            actual: rows.len(),
        });
    }
    let ncols = ncols.unwrap_or_else(|| rows.first().map_or(0, Vec::len));
    let mut out = Vec::with_capacity(nrows * ncols);
    for row in rows {
        if row.len() != ncols {
            return Err(Error::DimensionMismatch {
                what: name,
                expected: ncols,
                actual: row.len(),
            });
        }
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::non_finite(name));
        }
        out.extend_from_slice(row);
    }
    Ok((out, ncols))
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl AffineSpec {
    pub fn dims(&self) -> Result<Dims> {
        let d = self.initial_mean.len();
        let p = self.sigma.first().map_or(0, Vec::len);
        let m = self.sensor_matrix.len();
        let r = self.levy.as_ref().map_or(0, LevySpec::dim);
        if d == 0 || m == 0 {
            return Err(Error::invalid(
                "model",
                "state and observation dimensions must be positive",
            ));
        }
        Ok(Dims { d, p, m, r })
    }

    pub fn drift_matrix_flat(&self) -> Result<Vec<f64>> {
        let d = self.initial_mean.len();
        Ok(flatten("drift_matrix", &self.drift_matrix, d, Some(d))?.0)
    }

    pub fn sigma_flat(&self) -> Result<Vec<f64>> {
        let Dims { d, p, .. } = self.dims()?;
        Ok(flatten("sigma", &self.sigma, d, Some(p))?.0)
    }

    pub fn sigma_bar_flat(&self) -> Result<Vec<f64>> {
        let Dims { d, m, .. } = self.dims()?;
        Ok(flatten("sigma_bar", &self.sigma_bar, d, Some(m))?.0)
    }

    pub fn sensor_matrix_flat(&self) -> Result<Vec<f64>> {
        let Dims { d, m, .. } = self.dims()?;
        Ok(flatten("sensor_matrix", &self.sensor_matrix, m, Some(d))?.0)
    }

    pub fn initial_cov_flat(&self) -> Result<Vec<f64>> {
        let d = self.initial_mean.len();
        Ok(flatten("initial_cov", &self.initial_cov, d, Some(d))?.0)
    }

    /// Build the executable model.
    pub fn build(&self) -> Result<SignalModel> {
        let dims = self.dims()?;
        let Dims { d, m, r, .. } = dims;
        let a = self.drift_matrix_flat()?;
        let a0 = self.drift_offset.clone().unwrap_or_else(|| vec![0.0; d]);
        let s = self.sigma_flat()?;
        let sb = self.sigma_bar_flat()?;
        let st = match (&self.sigma_tilde, &self.levy) {
            (Some(rows), Some(_)) => flatten("sigma_tilde", rows, d, Some(r))?.0,
            (None, None) => Vec::new(),
            (None, Some(_)) => {
                return Err(Error::invalid(
                    "sigma_tilde",
                    "required when a Lévy driver is present",
                ))
            }
            (Some(_), None) => {
                return Err(Error::invalid("sigma_tilde", "given without a Lévy driver"))
            }
        };
        let hm = self.sensor_matrix_flat()?;
        let h0 = self.sensor_offset.clone().unwrap_or_else(|| vec![0.0; m]);
        if a0.len() != d || h0.len() != m {
            return Err(Error::invalid(
                "offset",
                "offset length does not match dimension",
            ));
        }
        if let Some(l) = &self.levy {
            l.validate()?;
        }
        let cov = self.initial_cov_flat()?;
        let initial_law = InitialLaw::gaussian(self.initial_mean.clone(), cov)?;

        let k_derived = [
            frobenius(&a).max(frobenius(&a0)),
            frobenius(&s),
            frobenius(&sb),
            frobenius(&st),
            frobenius(&hm).max(frobenius(&h0)),
        ]
        .into_iter()
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
        let linear_growth_k = self.linear_growth_k.unwrap_or(k_derived);

        let sigma_bar_bound = Some(frobenius(&sb));
        let f = {
            let (a, a0) = (a.clone(), a0.clone());
            Arc::new(move |x: &[f64], out: &mut [f64]| {
                out.copy_from_slice(&a0);
                gemv_acc(out, &a, d, d, x, 1.0);
            })
        };
        let h = {
            let (hm, h0) = (hm.clone(), h0.clone());
            Arc::new(move |x: &[f64], out: &mut [f64]| {
                out.copy_from_slice(&h0);
                gemv_acc(out, &hm, m, d, x, 1.0);
            })
        };
        let constant =
            |c: Vec<f64>| Arc::new(move |_: &[f64], out: &mut [f64]| out.copy_from_slice(&c));
        Ok(SignalModel {
            name: self.name.clone(),
            dims,
            f,
            sigma: constant(s),
            sigma_bar: constant(sb),
            sigma_tilde: constant(st),
            h,
            levy: self.levy.clone(),
            linear_growth_k,
            sigma_bar_bound,
            initial_law,
            affine: Some(self.clone()),
        })
    }

    /// The scalar Ornstein–Uhlenbeck family `dX = θ X dt + s dV + s̄ dW`,
    /// `dY = X dt + dW`.
    pub fn scalar_linear(
        name: &str,
        theta: f64,
        s: f64,
        s_bar: f64,
        prior_mean: f64,
        prior_var: f64,
    ) -> Self {
        AffineSpec {
            name: name.to_string(),
            drift_matrix: vec![vec![theta]],
            drift_offset: None,
            sigma: vec![vec![s]],
            sigma_bar: vec![vec![s_bar]],
            sigma_tilde: None,
            sensor_matrix: vec![vec![1.0]],
            sensor_offset: None,
            levy: None,
            initial_mean: vec![prior_mean],
            initial_cov: vec![vec![prior_var]],
            linear_growth_k: None,
        }
    }
}

/// Model selection in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Builtin(String),
    Affine(AffineSpec),
    ChangeDetection(ChangeDetectionSpec),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSpec::Builtin(name) => builtin(name),
            ModelSpec::Affine(spec) => Ok(Model::JumpDiffusion(spec.build()?)),
            ModelSpec::ChangeDetection(spec) => {
                Ok(Model::ChangeDetection(ChangeDetection::new(spec.clone())?))
            }
        }
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &[
        "linear_gaussian",
        "correlated_linear",
        "jump_ou",
        "change_detection",
    ]
}

/// Affine specification of a built-in jump-diffusion model.
pub fn builtin_affine(name: &str) -> Option<AffineSpec> {
    match name {
        "linear_gaussian" => Some(AffineSpec::scalar_linear(name, -1.0, 1.0, 0.0, 1.0, 0.5)),
        "correlated_linear" => Some(AffineSpec::scalar_linear(name, -1.0, 1.0, 0.5, 1.0, 0.5)),
        "jump_ou" => {
            let mut spec = AffineSpec::scalar_linear(name, -1.0, 0.5, 0.3, 0.0, 0.25);
            spec.sigma_tilde = Some(vec![vec![1.0]]);
            spec.levy = Some(
                LevySpec::new(
                    2.0,
                    JumpLaw::Atoms(vec![
                        Atom {
                            mark: vec![0.8],
                            prob: 0.5,
                        },
                        Atom {
                            mark: vec![-0.4],
                            prob: 0.5,
                        },
                    ]),
                    vec![0.0],
                )
                .expect("static Lévy spec is valid"),
            );
            Some(spec)
        }
        _ => None,
    }
}

pub fn builtin(name: &str) -> Result<Model> {
    if let Some(spec) = builtin_affine(name) {
        return Ok(Model::JumpDiffusion(spec.build()?));
    }
    if name == "change_detection" {
        return Ok(Model::ChangeDetection(ChangeDetection::new(
            ChangeDetectionSpec::default(),
        )?));
    }
    Err(Error::Unknown {
        kind: "model",
        name: name.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{probe_grid, validate_model};

    #[test]
    fn builtins_construct_and_validate() {
        for name in builtin_names() {
            let model = builtin(name).unwrap();
            assert_eq!(model.name(), *name);
            if let Some(sm) = model.signal_model() {
                let rep = validate_model(sm, &probe_grid(sm.dims.d, 10.0, 41)).unwrap();
                assert!(rep.pass, "{name}: {rep:?}");
            }
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn affine_coefficients_evaluate() {
        let sm = builtin_affine("jump_ou").unwrap().build().unwrap();
        let mut out = [0.0];
        (sm.f)(&[2.0], &mut out);
        assert_eq!(out, [-2.0]);
        (sm.h)(&[2.0], &mut out);
        assert_eq!(out, [2.0]);
        (sm.sigma_bar)(&[2.0], &mut out);
        assert_eq!(out, [0.3]);
        assert_eq!(sm.levy_drift(), vec![0.0]);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ModelSpec::Affine(builtin_affine("jump_ou").unwrap());
        let text = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
        let b: ModelSpec = serde_json::from_str(r#"{"builtin":"linear_gaussian"}"#).unwrap();
        assert_eq!(b.build().unwrap().name(), "linear_gaussian");
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let mut spec = builtin_affine("linear_gaussian").unwrap();
        spec.sigma_bar = vec![vec![0.0, 1.0]];
        assert!(spec.build().is_err());
        let mut spec = builtin_affine("linear_gaussian").unwrap();
        spec.sigma_tilde = Some(vec![vec![1.0]]);
        assert!(spec.build().is_err());
    }
}
