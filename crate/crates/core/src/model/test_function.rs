//! Test functions `φ(x, y)` with analytic derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// A scalar function on signal × observation space together with its
/// gradient and Hessian in `x`, gradient and Laplacian in `y`.
///
/// Gradients and Hessians *overwrite* the output buffer (Hessian row-major).
#[derive(Clone)]
pub struct TestFunction {
    label: String,
    value: ScalarFn,
    grad_x: VectorFn,
    hess_x: Option<VectorFn>,
    grad_y: Option<VectorFn>,
    lap_y: Option<ScalarFn>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("has_hessian", &self.hess_x.is_some())
            .field("y_dependent", &self.grad_y.is_some())
            .finish()
    }
}

impl TestFunction {
    /// A y-independent test function.
    pub fn new<V, G>(label: impl Into<String>, value: V, grad_x: G) -> Self
    where
        V: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        TestFunction {
            label: label.into(),
            value: Arc::new(value),
            grad_x: Arc::new(grad_x),
            hess_x: None,
            grad_y: None,
            lap_y: None,
        }
    }

    pub fn with_hessian<H>(mut self, hess_x: H) -> Self
    where
        H: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.hess_x = Some(Arc::new(hess_x));
        self
    }

    /// Declare a dependence on the observation coordinate.
    pub fn with_y_derivatives<G, L>(mut self, grad_y: G, lap_y: L) -> Self
    where
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        L: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.grad_y = Some(Arc::new(grad_y));
        self.lap_y = Some(Arc::new(lap_y));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn is_y_independent(&self) -> bool {
        self.grad_y.is_none()
    }

    pub fn has_hessian(&self) -> bool {
        self.hess_x.is_some()
    }

    #[inline]
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.value)(x, y)
    }

    #[inline]
    pub fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (self.grad_x)(x, y, out)
    }

    pub fn hess_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.hess_x {
            Some(h) => {
                h(x, y, out);
                Ok(())
            }
            None => Err(Error::invalid(
                "phi",
                format!("`{}` has no second derivatives", self.label),
            )),
        }
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match &self.grad_y {
            Some(g) => g(x, y, out),
            None => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    pub fn lap_y(&self, x: &[f64], y: &[f64]) -> f64 {
        self.lap_y.as_ref().map_or(0.0, |l| l(x, y))
    }

    /// `φ ≡ c`.
    pub fn constant(c: f64) -> Self {
        let label = if c == 1.0 {
            "one".to_string()
        } else {
            format!("const_{c}")
        };
        TestFunction::new(
            label,
            move |_, _| c,
            |_, _, g| g.iter_mut().for_each(|v| *v = 0.0),
        )
        .with_hessian(|_, _, h| h.iter_mut().for_each(|v| *v = 0.0))
    }

    /// `φ(x) = x_i`.
    pub fn coordinate(i: usize) -> Self {
        TestFunction::new(
            format!("x{}", i + 1),
            move |x, _| x[i],
            move |_, _, g| {
                g.iter_mut().for_each(|v| *v = 0.0);
                g[i] = 1.0;
            },
        )
        .with_hessian(|_, _, h| h.iter_mut().for_each(|v| *v = 0.0))
    }

    /// `φ(x) = x_i x_j`.
    pub fn product(i: usize, j: usize) -> Self {
        let label = if i == j {
            format!("x{}^2", i + 1)
        } else {
            format!("x{}*x{}", i + 1, j + 1)
        };
        TestFunction::new(
            label,
            move |x, _| x[i] * x[j],
            move |x, _, g| {
                g.iter_mut().for_each(|v| *v = 0.0);
                g[i] += x[j];
                g[j] += x[i];
            },
        )
        .with_hessian(move |x, _, h| {
            let d = x.len();
            h.iter_mut().for_each(|v| *v = 0.0);
            h[i * d + j] += 1.0;
            h[j * d + i] += 1.0;
        })
    }

    /// `φ(x) = tanh(x_i)`.
    pub fn tanh(i: usize) -> Self {
        TestFunction::new(
            format!("tanh(x{})", i + 1),
            move |x, _| x[i].tanh(),
            move |x, _, g| {
                g.iter_mut().for_each(|v| *v = 0.0);
                let t = x[i].tanh();
                g[i] = 1.0 - t * t;
            },
        )
        .with_hessian(move |x, _, h| {
            let d = x.len();
            h.iter_mut().for_each(|v| *v = 0.0);
            let t = x[i].tanh();
            h[i * d + i] = -2.0 * t * (1.0 - t * t);
        })
    }

    /// `{1, x_i, x_i x_j (i ≤ j), tanh(x_i)}` for a `d`-dimensional state.
    pub fn battery(d: usize) -> Vec<TestFunction> {
        let mut out = vec![TestFunction::constant(1.0)];
        out.extend((0..d).map(TestFunction::coordinate));
        for i in 0..d {
            for j in i..d {
                out.push(TestFunction::product(i, j));
            }
        }
        out.extend((0..d).map(TestFunction::tanh));
        out
    }
}

/// Largest relative disagreement between the analytic derivatives and
/// central finite differences of the value, over the given points.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeCheck {
    pub grad_rel_err: f64,
    pub hess_rel_err: f64,
}

pub fn check_derivatives(
    phi: &TestFunction,
    points: &[Vec<f64>],
    y: &[f64],
) -> Result<DerivativeCheck> {
    let mut worst_g: f64 = 0.0;
    let mut worst_h: f64 = 0.0;
    for x in points {
        let d = x.len();
        let mut g = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        phi.grad_x(x, y, &mut g);
        phi.hess_x(x, y, &mut hess)?;
        let mut xp = x.clone();
        for i in 0..d {
            let h = 1e-5 * (1.0 + x[i].abs());
            xp[i] = x[i] + h;
            let fp = phi.value(&xp, y);
            let mut gp = vec![0.0; d];
            phi.grad_x(&xp, y, &mut gp);
            xp[i] = x[i] - h;
            let fm = phi.value(&xp, y);
            let mut gm = vec![0.0; d];
            phi.grad_x(&xp, y, &mut gm);
            xp[i] = x[i];
            let fd = (fp - fm) / (2.0 * h);
            worst_g = worst_g.max(rel_err(g[i], fd));
            for j in 0..d {
                let fdh = (gp[j] - gm[j]) / (2.0 * h);
                worst_h = worst_h.max(rel_err(hess[j * d + i], fdh));
            }
        }
    }
    Ok(DerivativeCheck {
        grad_rel_err: worst_g,
        hess_rel_err: worst_h,
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_has_zero_derivatives() {
        let one = TestFunction::constant(1.0);
        let mut g = [9.0; 2];
        one.grad_x(&[1.0, 2.0], &[], &mut g);
        assert_eq!(g, [0.0, 0.0]);
        assert!(one.is_y_independent());
        let mut gy = [5.0];
        one.grad_y(&[1.0, 2.0], &[0.3], &mut gy);
        assert_eq!(gy, [0.0]);
    }

    #[test]
    fn battery_labels() {
        let labels: Vec<_> = TestFunction::battery(2)
            .iter()
            .map(|p| p.label().to_string())
            .collect();
        assert_eq!(
            labels,
            ["one", "x1", "x2", "x1^2", "x1*x2", "x2^2", "tanh(x1)", "tanh(x2)"]
        );
    }

    proptest! {
        #[test]
        fn battery_derivatives_match_finite_differences(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0
        ) {
            let pts = vec![vec![a, b, c]];
            for phi in TestFunction::battery(3) {
                let chk = check_derivatives(&phi, &pts, &[]).unwrap();
                prop_assert!(chk.grad_rel_err < 1e-5, "{}: {}", phi.label(), chk.grad_rel_err);
                prop_assert!(chk.hess_rel_err < 1e-5, "{}: {}", phi.label(), chk.hess_rel_err);
            }
        }
    }
}
