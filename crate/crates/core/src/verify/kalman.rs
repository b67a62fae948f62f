//! Exact Kalman–Bucy filter for the linear-Gaussian instance, with the
//! correlated gain `K = PHᵀ + Σ̄`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::AffineSpec;
use crate::simulate::{ObservationPath, TimeGrid};

/// Smallest eigenvalue tolerated before the covariance is declared non-PSD.
pub const PSD_TOLERANCE: f64 = -1e-10;

/// Coefficients `A, a, Σ_v, Σ̄, H, c` and the Gaussian prior as matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussian {
    pub a: DMatrix<f64>,
    pub a0: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub sigma_bar: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub h0: DVector<f64>,
    pub prior_mean: DVector<f64>,
    pub prior_cov: DMatrix<f64>,
}

impl LinearGaussian {
    pub fn from_affine(spec: &AffineSpec) -> Result<Self> {
        if spec.levy.is_some() {
            return Err(Error::invalid(
                "levy",
                "the Kalman–Bucy oracle needs a jump-free model",
            ));
        }
        let dims = spec.dims()?;
        let (d, p, m) = (dims.d, dims.p, dims.m);
        Ok(LinearGaussian {
            a: DMatrix::from_row_slice(d, d, &spec.drift_matrix_flat()?),
            a0: DVector::from_vec(spec.drift_offset.clone().unwrap_or_else(|| vec![0.0; d])),
            sigma: DMatrix::from_row_slice(d, p, &spec.sigma_flat()?),
            sigma_bar: DMatrix::from_row_slice(d, m, &spec.sigma_bar_flat()?),
            h: DMatrix::from_row_slice(m, d, &spec.sensor_matrix_flat()?),
            h0: DVector::from_vec(spec.sensor_offset.clone().unwrap_or_else(|| vec![0.0; m])),
            prior_mean: DVector::from_vec(spec.initial_mean.clone()),
            prior_cov: DMatrix::from_row_slice(d, d, &spec.initial_cov_flat()?),
        })
    }

    fn gain(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        p * self.h.transpose() + &self.sigma_bar
    }

    /// Right-hand side of the Riccati equation.
    pub fn riccati_rhs(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let k = self.gain(p);
        &self.a * p
            + p * self.a.transpose()
            + &self.sigma * self.sigma.transpose()
            + &self.sigma_bar * self.sigma_bar.transpose()
            - &k * k.transpose()
    }

    /// One classical RK4 step of the Riccati equation, symmetrised.
    pub fn riccati_step(&self, p: &DMatrix<f64>, dt: f64) -> DMatrix<f64> {
        let k1 = self.riccati_rhs(p);
        let k2 = self.riccati_rhs(&(p + &k1 * (0.5 * dt)));
        let k3 = self.riccati_rhs(&(p + &k2 * (0.5 * dt)));
        let k4 = self.riccati_rhs(&(p + &k3 * dt));
        let next = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        (&next + next.transpose()) * 0.5
    }
}

fn check_psd(p: &DMatrix<f64>, step: usize) -> Result<()> {
    let min = SymmetricEigen::new(p.clone()).eigenvalues.min();
    if !min.is_finite() || min < PSD_TOLERANCE {
        return Err(Error::NotPsd {
            step,
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Conditional mean and covariance at every grid time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KalmanTrajectory {
    pub grid: TimeGrid,
    pub d: usize,
    /// Row-major `(n_steps + 1) × d`.
    pub means: Vec<f64>,
    /// Row-major `(n_steps + 1) × d × d`.
    pub covs: Vec<f64>,
}

impl KalmanTrajectory {
    pub fn mean_at(&self, k: usize) -> &[f64] {
        &self.means[k * self.d..(k + 1) * self.d]
    }

    pub fn cov_at(&self, k: usize) -> &[f64] {
        let dd = self.d * self.d;
        &self.covs[k * dd..(k + 1) * dd]
    }
}

/// RK4 for `P`, Euler for `m`; the gain for step `k` uses `P_k`.
pub fn kalman_bucy_oracle(spec: &AffineSpec, obs: &ObservationPath) -> Result<KalmanTrajectory> {
    let lg = LinearGaussian::from_affine(spec)?;
    let (d, m) = (lg.a.nrows(), lg.h.nrows());
    if obs.m != m {
        return Err(Error::DimensionMismatch {
            what: "observation dimension",
            expected: m,
            actual: obs.m,
        });
    }
    let grid = obs.grid;
    let dt = grid.dt;
    let mut mean = lg.prior_mean.clone();
    let mut p = lg.prior_cov.clone();
    check_psd(&p, 0)?;
    let mut means = Vec::with_capacity(grid.len() * d);
    let mut covs = Vec::with_capacity(grid.len() * d * d);
    let push =
        |means: &mut Vec<f64>, covs: &mut Vec<f64>, mean: &DVector<f64>, p: &DMatrix<f64>| {
            means.extend(mean.iter());
            covs.extend(p.transpose().iter());
        };
    push(&mut means, &mut covs, &mean, &p);
    let mut dy = vec![0.0; m];
    for k in 0..grid.n_steps {
        obs.dy(k, &mut dy);
        let innovation = DVector::from_column_slice(&dy) - (&lg.h * &mean + &lg.h0) * dt;
        let gain = lg.gain(&p);
        mean += (&lg.a * &mean + &lg.a0) * dt + gain * innovation;
        p = lg.riccati_step(&p, dt);
        check_psd(&p, k + 1)?;
        push(&mut means, &mut covs, &mean, &p);
    }
    Ok(KalmanTrajectory {
        grid,
        d,
        means,
        covs,
    })
}

/// Integrate the Riccati equation from the prior until successive steps move
/// `P` by less than `tol` (max-norm rate) or `max_time` elapses.
pub fn stationary_covariance(
    spec: &AffineSpec,
    dt: f64,
    tol: f64,
    max_time: f64,
) -> Result<DMatrix<f64>> {
    let lg = LinearGaussian::from_affine(spec)?;
    let mut p = lg.prior_cov.clone();
    let steps = (max_time / dt).ceil() as usize;
    for k in 0..steps {
        let next = lg.riccati_step(&p, dt);
        let moved = (&next - &p).amax() / dt;
        p = next;
        check_psd(&p, k + 1)?;
        if moved < tol {
            break;
        }
    }
    Ok(p)
}
