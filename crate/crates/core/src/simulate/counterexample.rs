//! Closed-form martingale scenarios: Revuz–Yor, Dufresne and two-sided exits.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TimeGrid;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Which measure the driving noise is Brownian under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// `W` is Brownian; `Z` is computed pathwise.
    #[default]
    Base,
    /// Simulated under `Q = Z·P`, where `dW = H dt + dB` with `B` Brownian.
    Transformed,
}

/// `H = αW` with `Z = exp(∫H dW − ½∫H² ds)`, sampled on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RevuzYorPath {
    pub w: Vec<f64>,
    pub log_z: Vec<f64>,
    /// Running `∫₀ᵗ H_s² ds` (left-point).
    pub energy: Vec<f64>,
}

pub fn revuz_yor_path(
    alpha: f64,
    grid: &TimeGrid,
    measure: Measure,
    stream: Stream,
) -> RevuzYorPath {
    let n = grid.n_steps;
    let dt = grid.dt;
    let sd = dt.sqrt();
    let mut rng = stream.rng();
    let mut w = vec![0.0; n + 1];
    let mut log_z = vec![0.0; n + 1];
    let mut energy = vec![0.0; n + 1];
    for k in 0..n {
        let h = alpha * w[k];
        let z: f64 = StandardNormal.sample(&mut rng);
        let dw = match measure {
            Measure::Base => sd * z,
            Measure::Transformed => h * dt + sd * z,
        };
        w[k + 1] = w[k] + dw;
        log_z[k + 1] = log_z[k] + h * dw - 0.5 * h * h * dt;
        energy[k + 1] = energy[k] + h * h * dt;
    }
    RevuzYorPath { w, log_z, energy }
}

/// `∫₀^S exp(B_s − s/2) ds` by the trapezoid rule on the grid (`S = horizon`).
/// Paths on the same stream share their Brownian prefix, so the functional is
/// nondecreasing in the horizon.
pub fn dufresne_functional(grid: &TimeGrid, stream: Stream) -> f64 {
    dufresne_path(grid, stream).0
}

/// The truncated functional together with `B_S − S/2`, the log-scale of the
/// neglected tail (`∫_S^∞ = e^{B_S − S/2} · X'` with `X'` an independent copy).
pub fn dufresne_path(grid: &TimeGrid, stream: Stream) -> (f64, f64) {
    let dt = grid.dt;
    let sd = dt.sqrt();
    let mut rng = stream.rng();
    let mut b = 0.0;
    let mut prev = 1.0;
    let mut acc = 0.0;
    for k in 0..grid.n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        b += sd * z;
        let cur = (b - 0.5 * grid.t(k + 1)).exp();
        acc += 0.5 * (prev + cur) * dt;
        prev = cur;
    }
    (acc, b - 0.5 * grid.horizon)
}

/// Outcome of a discretely monitored exit of `W` from `(−1, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HittingExit {
    Lower,
    Upper,
    /// Still inside the interval at the grid horizon.
    Unresolved,
}

pub fn hitting_exit(n: u32, grid: &TimeGrid, stream: Stream) -> HittingExit {
    let sd = grid.dt.sqrt();
    let upper = n as f64;
    let mut rng = stream.rng();
    let mut w = 0.0;
    for _ in 0..grid.n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        w += sd * z;
        if w <= -1.0 {
            return HittingExit::Lower;
        }
        if w >= upper {
            return HittingExit::Upper;
        }
    }
    HittingExit::Unresolved
}

/// Scenario selector for counterexample path sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CounterexampleSpec {
    RevuzYor {
        alpha: f64,
        #[serde(default)]
        measure: Measure,
    },
    Dufresne,
    Hitting {
        n: u32,
    },
}

impl CounterexampleSpec {
    /// Default parameters for a scenario name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "revuz_yor" => Ok(CounterexampleSpec::RevuzYor {
                alpha: 1.0,
                measure: Measure::Base,
            }),
            "dufresne" => Ok(CounterexampleSpec::Dufresne),
            "hitting" => Ok(CounterexampleSpec::Hitting { n: 3 }),
            _ => Err(Error::Unknown {
                kind: "counterexample",
                name: name.to_string(),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CounterexampleSpec::RevuzYor { .. } => "revuz_yor",
            CounterexampleSpec::Dufresne => "dufresne",
            CounterexampleSpec::Hitting { .. } => "hitting",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CounterexampleSpec::RevuzYor { alpha, .. } if !(*alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::invalid("alpha", "must be positive"))
            }
            CounterexampleSpec::Hitting { n: 0 } => Err(Error::invalid("n", "must be at least 1")),
            _ => Ok(()),
        }
    }

    /// `n_paths` independent paths, path `i` on `stream.child(i)`.
    pub fn simulate(
        &self,
        grid: &TimeGrid,
        n_paths: usize,
        stream: Stream,
    ) -> Result<CounterexamplePaths> {
        self.validate()?;
        let ids = (0..n_paths as u64).into_par_iter();
        Ok(match *self {
            CounterexampleSpec::RevuzYor { alpha, measure } => CounterexamplePaths::RevuzYor(
                ids.map(|i| revuz_yor_path(alpha, grid, measure, stream.child(i)))
                    .collect(),
            ),
            CounterexampleSpec::Dufresne => CounterexamplePaths::Dufresne(
                ids.map(|i| dufresne_functional(grid, stream.child(i)))
                    .collect(),
            ),
            CounterexampleSpec::Hitting { n } => CounterexamplePaths::Hitting(
                ids.map(|i| hitting_exit(n, grid, stream.child(i)))
                    .collect(),
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CounterexamplePaths {
    RevuzYor(Vec<RevuzYorPath>),
    Dufresne(Vec<f64>),
    Hitting(Vec<HittingExit>),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Estimate;

    #[test]
    fn revuz_yor_base_measure_mean_is_one() {
        let grid = TimeGrid::new(1.0, 1e-3).unwrap();
        let spec = CounterexampleSpec::RevuzYor {
            alpha: 1.0,
            measure: Measure::Base,
        };
        let CounterexamplePaths::RevuzYor(paths) =
            spec.simulate(&grid, 10_000, Stream::new(8)).unwrap()
        else {
            unreachable!()
        };
        let z: Vec<f64> = paths.iter().map(|p| p.log_z[grid.n_steps].exp()).collect();
        let est = Estimate::from_samples(&z);
        assert!(est.within(1.0, 3.0), "{est:?}");
    }

    #[test]
    fn hitting_probability_at_three() {
        let grid = TimeGrid::new(200.0, 1e-3).unwrap();
        let CounterexamplePaths::Hitting(exits) = CounterexampleSpec::Hitting { n: 3 }
            .simulate(&grid, 2_000, Stream::new(3))
            .unwrap()
        else {
            unreachable!()
        };
        assert!(exits.iter().all(|e| *e != HittingExit::Unresolved));
        let lower: Vec<f64> = exits
            .iter()
            .map(|e| (*e == HittingExit::Lower) as u8 as f64)
            .collect();
        let est = Estimate::from_samples(&lower);
        assert!(est.within(0.75, 3.0), "{est:?}");
    }

    #[test]
    fn dufresne_is_monotone_in_horizon() {
        let s = Stream::new(5).child(1);
        let a = dufresne_functional(&TimeGrid::new(5.0, 1e-2).unwrap(), s);
        let b = dufresne_functional(&TimeGrid::new(10.0, 1e-2).unwrap(), s);
        assert!(b >= a);
        assert_eq!(
            dufresne_functional(&TimeGrid::new(0.0, 1e-2).unwrap(), s),
            0.0
        );
    }

    #[test]
    fn unknown_and_invalid_scenarios() {
        assert!(CounterexampleSpec::from_name("novikov").is_err());
        assert_eq!(
            CounterexampleSpec::from_name("hitting").unwrap().name(),
            "hitting"
        );
        let bad = CounterexampleSpec::RevuzYor {
            alpha: 0.0,
            measure: Measure::Base,
        };
        assert!(bad
            .simulate(&TimeGrid::new(1.0, 0.1).unwrap(), 2, Stream::new(0))
            .is_err());
        let json = r#"{"kind":"revuz_yor","alpha":0.5,"measure":"transformed"}"#;
        let spec: CounterexampleSpec = serde_json::from_str(json).unwrap();
        assert_eq!(
            spec,
            CounterexampleSpec::RevuzYor {
                alpha: 0.5,
                measure: Measure::Transformed
            }
        );
    }
}
