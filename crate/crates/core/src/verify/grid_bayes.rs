//! Brute-force Bayes over the `(b, τ)` grid of the change-detection model.
//!
//! Each cell carries the exact discrete log-likelihood
//! `Σ_k [h(y_k) dy_k − ½ h(y_k)² dt]` with `h(y) = (b0 + b 1{t_k ≥ τ}) y`,
//! the same left-point discretisation the particle weights use.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ChangeDetection;
use crate::simulate::ObservationPath;

/// Posterior over the product grid; cell `(i, j)` is `b_grid[i]`, `tau_grid[j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPosterior {
    pub b_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub t: f64,
    pub log_lik: Vec<f64>,
    pub mass: Vec<f64>,
}

impl GridPosterior {
    fn prior(cd: &ChangeDetection) -> Self {
        let cells = cd.b_grid.len() * cd.tau_grid.len();
        let mut post = GridPosterior {
            b_grid: cd.b_grid.clone(),
            tau_grid: cd.tau_grid.clone(),
            t: 0.0,
            log_lik: vec![0.0; cells],
            mass: vec![0.0; cells],
        };
        post.normalise(cd)
            .expect("validated priors have positive mass");
        post
    }

    fn n_tau(&self) -> usize {
        self.tau_grid.len()
    }

    /// Add one observation increment taken at time `t` (left point).
    fn update(&mut self, cd: &ChangeDetection, t: f64, y: f64, dy: f64, dt: f64) {
        let nt = self.n_tau();
        for (i, &b) in self.b_grid.iter().enumerate() {
            for (j, &tau) in self.tau_grid.iter().enumerate() {
                let ind = if ChangeDetection::has_changed(t, tau) {
                    1.0
                } else {
                    0.0
                };
                let h = cd.rate(b, ind) * y;
                self.log_lik[i * nt + j] += h * dy - 0.5 * h * h * dt;
            }
        }
    }

    fn normalise(&mut self, cd: &ChangeDetection) -> Result<()> {
        let nt = self.n_tau();
        let log_post: Vec<f64> = (0..self.mass.len())
            .map(|c| {
                let prior = cd.b_prior[c / nt] * cd.tau_prior[c % nt];
                if prior > 0.0 {
                    prior.ln() + self.log_lik[c]
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Degenerate(format!(
                "grid posterior at t = {}",
                self.t
            )));
        }
        let mut total = 0.0;
        for (m, lp) in self.mass.iter_mut().zip(&log_post) {
            *m = (lp - max).exp();
            total += *m;
        }
        for m in &mut self.mass {
            *m /= total;
        }
        Ok(())
    }

    /// `P(T ≤ t | Y_t)`.
    pub fn prob_changed(&self) -> f64 {
        let nt = self.n_tau();
        self.mass
            .iter()
            .enumerate()
            .filter(|(c, _)| ChangeDetection::has_changed(self.t, self.tau_grid[c % nt]))
            .map(|(_, m)| m)
            .sum()
    }

    pub fn b_marginal(&self) -> Vec<f64> {
        self.mass
            .chunks(self.n_tau())
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn tau_marginal(&self) -> Vec<f64> {
        let nt = self.n_tau();
        let mut out = vec![0.0; nt];
        for (c, m) in self.mass.iter().enumerate() {
            out[c % nt] += m;
        }
        out
    }

    pub fn b_mean(&self) -> f64 {
        self.b_marginal()
            .iter()
            .zip(&self.b_grid)
            .map(|(w, b)| w * b)
            .sum()
    }
}

/// Posterior summaries at every grid time and the terminal posterior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridTrajectory {
    pub times: Vec<f64>,
    pub prob_changed: Vec<f64>,
    pub b_mean: Vec<f64>,
    /// Largest `|Σ mass − 1|` seen over all updates.
    pub max_mass_error: f64,
    pub terminal: GridPosterior,
}

pub fn change_detection_oracle(
    cd: &ChangeDetection,
    obs: &ObservationPath,
) -> Result<GridTrajectory> {
    if obs.m != 1 {
        return Err(Error::DimensionMismatch {
            what: "observation dimension",
            expected: 1,
            actual: obs.m,
        });
    }
    let grid = obs.grid;
    let mut post = GridPosterior::prior(cd);
    let mut times = Vec::with_capacity(grid.len());
    let mut prob_changed = Vec::with_capacity(grid.len());
    let mut b_mean = Vec::with_capacity(grid.len());
    let mut max_mass_error: f64 = 0.0;
    let mut record = |post: &GridPosterior| {
        times.push(post.t);
        prob_changed.push(post.prob_changed());
        b_mean.push(post.b_mean());
        max_mass_error = max_mass_error.max((post.mass.iter().sum::<f64>() - 1.0).abs());
    };
    record(&post);
    let mut dy = [0.0];
    for k in 0..grid.n_steps {
        obs.dy(k, &mut dy);
        post.update(cd, grid.t(k), obs.y_at(k)[0], dy[0], grid.dt);
        post.t = grid.t(k + 1);
        post.normalise(cd)?;
        record(&post);
    }
    Ok(GridTrajectory {
        times,
        prob_changed,
        b_mean,
        max_mass_error,
        terminal: post,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChangeDetectionSpec;
    use crate::rng::Stream;
    use crate::simulate::{simulate_change_detection, TimeGrid};

    fn path(cd: &ChangeDetection, seed: u64) -> ObservationPath {
        let grid = TimeGrid::new(2.0, 1e-3).unwrap();
        simulate_change_detection(cd, &grid, Stream::new(seed))
            .unwrap()
            .observation()
    }

    #[test]
    fn mass_is_normalised_after_every_update() {
        let cd = ChangeDetection::new(ChangeDetectionSpec::default()).unwrap();
        let tr = change_detection_oracle(&cd, &path(&cd, 1)).unwrap();
        assert!(tr.max_mass_error <= 1e-12, "{}", tr.max_mass_error);
        assert!(tr.terminal.mass.iter().all(|&m| m >= 0.0));
        assert!(tr
            .prob_changed
            .iter()
            .all(|p| (0.0..=1.0 + 1e-12).contains(p)));
    }

    #[test]
    fn single_cell_matches_direct_likelihood() {
        let cd = ChangeDetection::new(ChangeDetectionSpec::fixed(0.5, 1.5, 0.7)).unwrap();
        let obs = path(&cd, 2);
        let tr = change_detection_oracle(&cd, &obs).unwrap();
        let mut direct = 0.0;
        let mut dy = [0.0];
        for k in 0..obs.grid.n_steps {
            obs.dy(k, &mut dy);
            let t = obs.grid.t(k);
            let h = (0.5 + if t + 1e-9 >= 0.7 { 1.5 } else { 0.0 }) * obs.y_at(k)[0];
            direct += h * dy[0] - 0.5 * h * h * obs.grid.dt;
        }
        let got = tr.terminal.log_lik[0];
        assert!(
            (got - direct).abs() <= 1e-12 * direct.abs().max(1.0),
            "{got} vs {direct}"
        );
        assert_eq!(tr.terminal.mass, vec![1.0]);
    }

    #[test]
    fn point_mass_priors_stay_point_masses() {
        let spec = ChangeDetectionSpec {
            b_prior: {
                let mut w = vec![0.0; 21];
                w[0] = 1.0;
                w
            },
            ..ChangeDetectionSpec::default()
        };
        let cd = ChangeDetection::new(spec).unwrap();
        let tr = change_detection_oracle(&cd, &path(&cd, 3)).unwrap();
        let bm = tr.terminal.b_marginal();
        assert_eq!(bm[0], 1.0);
        assert!(bm[1..].iter().all(|&w| w == 0.0));

        let cd = ChangeDetection::new(ChangeDetectionSpec::fixed(0.5, 1.0, 0.0)).unwrap();
        let tr = change_detection_oracle(&cd, &path(&cd, 4)).unwrap();
        assert!(tr.prob_changed.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn posterior_learns_the_change() {
        let cd = ChangeDetection::new(ChangeDetectionSpec::default()).unwrap();
        // A path with a large, early change.
        let truth = ChangeDetection::new(ChangeDetectionSpec::fixed(0.5, 2.5, 0.3)).unwrap();
        let tr = change_detection_oracle(&cd, &path(&truth, 5)).unwrap();
        assert!(
            *tr.prob_changed.last().unwrap() > 0.9,
            "{:?}",
            tr.prob_changed.last()
        );
    }
}
