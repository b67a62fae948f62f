//! Finite-activity Lévy drivers: drift plus compound-Poisson jumps.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_psd, is_symmetric, norm};
use crate::rng::StreamRng;
use crate::stats::normal_sf;

/// One atom of a discrete jump distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub mark: Vec<f64>,
    pub prob: f64,
}

/// Law of a single jump mark (the Lévy measure normalised by the rate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpLaw {
    Atoms(Vec<Atom>),
    /// Scalar Gaussian marks; the origin carries no mass.
    Gaussian {
        mean: f64,
        std_dev: f64,
    },
}

/// Lévy driver `L_t = b t + compensated compound-Poisson jumps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevySpec {
    pub jump_rate: f64,
    pub jump_law: JumpLaw,
    pub drift_a: Vec<f64>,
}

impl LevySpec {
    pub fn new(jump_rate: f64, jump_law: JumpLaw, drift_a: Vec<f64>) -> Result<Self> {
        let spec = LevySpec {
            jump_rate,
            jump_law,
            drift_a,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.drift_a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.jump_rate >= 0.0 && self.jump_rate.is_finite()) {
            return Err(Error::invalid(
                "jump_rate",
                "must be finite and nonnegative",
            ));
        }
        let r = self.dim();
        if r == 0 {
            return Err(Error::invalid("drift_a", "Lévy dimension must be positive"));
        }
        match &self.jump_law {
            JumpLaw::Atoms(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::invalid("jump_law", "no atoms"));
                }
                let mut total = 0.0;
                for a in atoms {
                    if a.mark.len() != r {
                        return Err(Error::DimensionMismatch {
                            what: "jump mark",
                            expected: r,
                            actual: a.mark.len(),
                        });
                    }
                    if !(a.prob >= 0.0) || !a.mark.iter().all(|v| v.is_finite()) {
                        return Err(Error::invalid(
                            "jump_law",
                            "atoms need finite marks and nonnegative mass",
                        ));
                    }
                    if a.prob > 0.0 && a.mark.iter().all(|&v| v == 0.0) {
                        return Err(Error::invalid(
                            "jump_law",
                            "the Lévy measure must not charge the origin",
                        ));
                    }
                    total += a.prob;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(
                        "jump_law",
                        format!("atom probabilities sum to {total}"),
                    ));
                }
            }
            JumpLaw::Gaussian { mean, std_dev } => {
                if r != 1 {
                    return Err(Error::invalid("jump_law", "Gaussian marks are scalar"));
                }
                if !(mean.is_finite() && *std_dev > 0.0 && std_dev.is_finite()) {
                    return Err(Error::invalid(
                        "jump_law",
                        "Gaussian marks need finite mean and positive std_dev",
                    ));
                }
            }
        }
        let m2 = self.second_moment();
        if !m2.iter().all(|v| v.is_finite())
            || !is_symmetric(&m2, r, 1e-12)
            || cholesky_psd(&m2, r).is_none()
        {
            return Err(Error::invalid(
                "jump_law",
                "second moment must be finite symmetric PSD",
            ));
        }
        Ok(())
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.jump_law, JumpLaw::Atoms(_))
    }

    /// `∫ ρ F(dρ)`: the compensator rate of the jump sum.
    pub fn first_moment(&self) -> Vec<f64> {
        let r = self.dim();
        match &self.jump_law {
            JumpLaw::Atoms(atoms) => {
                let mut m = vec![0.0; r];
                for a in atoms {
                    for (mi, ai) in m.iter_mut().zip(&a.mark) {
                        *mi += self.jump_rate * a.prob * ai;
                    }
                }
                m
            }
            JumpLaw::Gaussian { mean, .. } => vec![self.jump_rate * mean],
        }
    }

    /// `∫ ρ ρᵀ F(dρ)`, row-major `r x r`.
    pub fn second_moment(&self) -> Vec<f64> {
        let r = self.dim();
        let mut m = vec![0.0; r * r];
        match &self.jump_law {
            JumpLaw::Atoms(atoms) => {
                for a in atoms {
                    for i in 0..r {
                        for j in 0..r {
                            m[i * r + j] += self.jump_rate * a.prob * a.mark[i] * a.mark[j];
                        }
                    }
                }
            }
            JumpLaw::Gaussian { mean, std_dev } => {
                m[0] = self.jump_rate * (mean * mean + std_dev * std_dev);
            }
        }
        m
    }

    /// `∫_{|ρ|≥1} ρ F(dρ)`.
    pub fn large_jump_mean(&self) -> Vec<f64> {
        let r = self.dim();
        match &self.jump_law {
            JumpLaw::Atoms(atoms) => {
                let mut m = vec![0.0; r];
                for a in atoms.iter().filter(|a| norm(&a.mark) >= 1.0) {
                    for (mi, ai) in m.iter_mut().zip(&a.mark) {
                        *mi += self.jump_rate * a.prob * ai;
                    }
                }
                m
            }
            JumpLaw::Gaussian { mean, std_dev } => {
                // E[ρ; |ρ| < 1] = μ(Φ(β) − Φ(α)) − s(φ(β) − φ(α)).
                let (mu, s) = (*mean, *std_dev);
                let alpha = (-1.0 - mu) / s;
                let beta = (1.0 - mu) / s;
                let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let inner_mass = normal_sf(alpha) - normal_sf(beta);
                let inner = mu * inner_mass - s * (pdf(beta) - pdf(alpha));
                vec![self.jump_rate * (mu - inner)]
            }
        }
    }

    /// Drift of the fully compensated representation `L_t = b t + ∫ρ μ̃(t, dρ)`,
    /// `b = a + ∫_{|ρ|≥1} ρ F(dρ)`.
    pub fn drift_b(&self) -> Vec<f64> {
        self.drift_a
            .iter()
            .zip(self.large_jump_mean())
            .map(|(a, l)| a + l)
            .collect()
    }

    /// Draw one jump mark.
    pub fn sample_mark(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match &self.jump_law {
            JumpLaw::Atoms(atoms) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = atoms.len() - 1;
                for (k, a) in atoms.iter().enumerate() {
                    acc += a.prob;
                    if u < acc {
                        chosen = k;
                        break;
                    }
                }
                out.copy_from_slice(&atoms[chosen].mark);
            }
            JumpLaw::Gaussian { mean, std_dev } => {
                let z: f64 = StandardNormal.sample(rng);
                out[0] = mean + std_dev * z;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_atom(rate: f64, mark: f64) -> LevySpec {
        LevySpec::new(
            rate,
            JumpLaw::Atoms(vec![Atom {
                mark: vec![mark],
                prob: 1.0,
            }]),
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn rejects_mass_at_origin() {
        let bad = LevySpec::new(
            1.0,
            JumpLaw::Atoms(vec![Atom {
                mark: vec![0.0],
                prob: 1.0,
            }]),
            vec![0.0],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn rejects_unnormalised_atoms() {
        let bad = LevySpec::new(
            1.0,
            JumpLaw::Atoms(vec![Atom {
                mark: vec![1.0],
                prob: 0.7,
            }]),
            vec![0.0],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn moments_of_atoms() {
        let l = single_atom(3.0, 2.0);
        assert_eq!(l.first_moment(), vec![6.0]);
        assert_eq!(l.second_moment(), vec![12.0]);
        assert_eq!(l.large_jump_mean(), vec![6.0]);
        assert_eq!(l.drift_b(), vec![6.0]);
        let small = single_atom(3.0, 0.5);
        assert_eq!(small.drift_b(), vec![0.0]);
    }

    #[test]
    fn gaussian_large_jump_mean_by_quadrature() {
        let l = LevySpec::new(
            2.0,
            JumpLaw::Gaussian {
                mean: 0.3,
                std_dev: 0.8,
            },
            vec![0.0],
        )
        .unwrap();
        // Midpoint rule over |x| >= 1.
        let pdf = |x: f64| {
            (-(x - 0.3f64).powi(2) / (2.0 * 0.64)).exp()
                / (0.8 * (2.0 * std::f64::consts::PI).sqrt())
        };
        let h = 1e-4;
        let mut s = 0.0;
        let mut x = 1.0 + h / 2.0;
        while x < 12.0 {
            s += x * pdf(x) * h + (-x) * pdf(-x) * h;
            x += h;
        }
        let got = l.large_jump_mean()[0];
        assert!((got - 2.0 * s).abs() < 1e-6, "{got} vs {}", 2.0 * s);
    }
}
