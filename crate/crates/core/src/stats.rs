//! Monte Carlo estimates with standard errors.

use serde::{Deserialize, Serialize};

/// A sample-mean estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64, n: usize) -> Self {
        Estimate { value, se: 0.0, n }
    }

    /// Sample mean and standard error, accumulated in slice order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut acc = MeanAccumulator::default();
        for &s in samples {
            acc.push(s);
        }
        acc.estimate()
    }

    /// `|value - reference| <= k * se` (with a tiny absolute slack so that
    /// exact zero-variance cases compare equal).
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.value - reference).abs() <= k * self.se + 1e-12 * (1.0 + reference.abs())
    }

    pub fn z_score(&self, reference: f64) -> f64 {
        if self.se > 0.0 {
            (self.value - reference) / self.se
        } else if self.value == reference {
            0.0
        } else {
            f64::INFINITY.copysign(self.value - reference)
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Estimate {
            value: self.value * factor,
            se: self.se * factor.abs(),
            n: self.n,
        }
    }
}

/// Standard error of the difference of two independent estimates.
pub fn joint_se(a: &Estimate, b: &Estimate) -> f64 {
    (a.se * a.se + b.se * b.se).sqrt()
}

/// Welford accumulator; deterministic for a fixed push order.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        };
        Estimate {
            value: self.mean,
            se,
            n: self.n,
        }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Standard normal upper tail `P(N > x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Complementary error function (Numerical Recipes `erfcc`, |rel err| < 1.2e-7).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.265_512_23
            + t * (1.000_023_68
                + t * (0.374_091_96
                    + t * (0.096_784_18
                        + t * (-0.186_288_06
                            + t * (0.278_868_07
                                + t * (-1.135_203_98
                                    + t * (1.488_515_87
                                        + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 8.5, 3.25];
        let e = Estimate::from_samples(&xs);
        let m = xs.iter().sum::<f64>() / 5.0;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 4.0;
        assert!((e.value - m).abs() < 1e-14);
        assert!((e.se - (v / 5.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn erfc_reference_values() {
        assert!((erfc(0.0) - 1.0).abs() < 1e-7);
        assert!((erfc(1.0) - 0.157_299_207).abs() < 1e-7);
        assert!((normal_sf(1.959_963_985) - 0.025).abs() < 1e-7);
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert!((ls_slope(&x, &y) - 2.0).abs() < 1e-14);
    }
}
