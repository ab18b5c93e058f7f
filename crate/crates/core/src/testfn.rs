//! Test functions `phi` with Fourier transforms
//! `phi_hat(t) = (1/2 pi) int e^{iEt} phi(E) dE`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularity class of a test function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestClass {
    /// Cauchy kernel.
    C1,
    /// Rapidly decaying Fourier transform.
    C2,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `phi(E) = 2/(E^2 + 1)`, `phi_hat(t) = e^{-|t|}`.
    Cauchy,
    /// `phi(E) = sqrt(2 pi) e^{-E^2/2}`, `phi_hat(t) = e^{-t^2/2}`.
    Gaussian,
    /// Piecewise linear through `(nodes[i], values[i])`, zero outside.
    TabulatedHat { nodes: Vec<f64>, values: Vec<f64> },
    /// Linear combination; normalization is not imposed.
    Combination { parts: Vec<(f64, TestFunction)> },
}

impl TestFunction {
    /// Piecewise-linear function rescaled so that `int phi = 2 pi`.
    pub fn tabulated(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let raw = Self::tabulated_unnormalized(nodes, values)?;
        let mass = raw.integral();
        if !(mass.abs() > 1e-300) {
            return Err(Error::Validation("tabulated test function has zero integral".into()));
        }
        match raw {
            TestFunction::TabulatedHat { nodes, values } => Ok(TestFunction::TabulatedHat {
                nodes,
                values: values.iter().map(|v| v * 2.0 * PI / mass).collect(),
            }),
            _ => unreachable!(),
        }
    }

    /// Piecewise-linear function taken as given (e.g. with vanishing integral).
    pub fn tabulated_unnormalized(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(Error::Validation("tabulated test function needs >= 2 matching nodes/values".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) || nodes.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::Validation("tabulated nodes must increase and be finite".into()));
        }
        Ok(TestFunction::TabulatedHat { nodes, values })
    }

    /// Triangle of half-width `a` centred at 0, normalized.
    pub fn hat(a: f64) -> Self {
        Self::tabulated(vec![-a, 0.0, a], vec![0.0, 1.0, 0.0]).expect("valid hat")
    }

    pub fn scaled(self, c: f64) -> Self {
        TestFunction::Combination { parts: vec![(c, self)] }
    }

    pub fn class(&self) -> TestClass {
        match self {
            TestFunction::Cauchy => TestClass::C1,
            TestFunction::Gaussian | TestFunction::TabulatedHat { .. } => TestClass::C2,
            TestFunction::Combination { parts } => {
                let mut it = parts.iter().map(|(_, f)| f.class());
                let first = it.next().unwrap_or(TestClass::C2);
                if it.all(|c| c == first) {
                    first
                } else {
                    TestClass::Mixed
                }
            }
        }
    }

    pub fn eval(&self, e: f64) -> f64 {
        match self {
            TestFunction::Cauchy => 2.0 / (e * e + 1.0),
            TestFunction::Gaussian => (2.0 * PI).sqrt() * (-0.5 * e * e).exp(),
            TestFunction::TabulatedHat { nodes, values } => {
                if e < nodes[0] || e > nodes[nodes.len() - 1] {
                    return 0.0;
                }
                let k = nodes.partition_point(|&x| x <= e).clamp(1, nodes.len() - 1) - 1;
                let (a, b) = (nodes[k], nodes[k + 1]);
                values[k] + (values[k + 1] - values[k]) * (e - a) / (b - a)
            }
            TestFunction::Combination { parts } => parts.iter().map(|(c, f)| c * f.eval(e)).sum(),
        }
    }

    pub fn hat_at(&self, t: f64) -> Complex64 {
        match self {
            TestFunction::Cauchy => Complex64::new((-t.abs()).exp(), 0.0),
            TestFunction::Gaussian => Complex64::new((-0.5 * t * t).exp(), 0.0),
            TestFunction::TabulatedHat { nodes, values } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..nodes.len() - 1 {
                    acc += segment_transform(nodes[k], nodes[k + 1], values[k], values[k + 1], t);
                }
                acc / (2.0 * PI)
            }
            TestFunction::Combination { parts } => parts.iter().map(|(c, f)| *c * f.hat_at(t)).sum(),
        }
    }

    /// `int phi = 2 pi phi_hat(0)`.
    pub fn integral(&self) -> f64 {
        2.0 * PI * self.hat_at(0.0).re
    }

    /// Time beyond which `|phi_hat(eta t)| < tol`, capped at `cap`.
    pub fn horizon(&self, eta: f64, tol: f64, cap: f64) -> f64 {
        let s = match self {
            TestFunction::Cauchy => (1.0 / tol).ln(),
            TestFunction::Gaussian => (2.0 * (1.0 / tol).ln()).sqrt(),
            TestFunction::TabulatedHat { nodes, values } => {
                // |phi_hat(s)| <= (total variation of phi') / (2 pi s^2).
                let mut tv = 0.0;
                let mut prev = 0.0;
                for k in 0..nodes.len() - 1 {
                    let slope = (values[k + 1] - values[k]) / (nodes[k + 1] - nodes[k]);
                    tv += (slope - prev).abs();
                    prev = slope;
                }
                tv += prev.abs() + values[0].abs().max(values[values.len() - 1].abs()) * 2.0;
                (tv / (2.0 * PI * tol)).sqrt()
            }
            TestFunction::Combination { parts } => {
                return parts
                    .iter()
                    .map(|(c, f)| f.horizon(eta, tol / c.abs().max(1e-300), cap))
                    .fold(0.0, f64::max)
            }
        };
        (s / eta).min(cap)
    }

    /// Length scale of `phi`, which sets the oscillation frequency of `phi_hat`.
    pub fn extent(&self) -> f64 {
        match self {
            TestFunction::Cauchy | TestFunction::Gaussian => 1.0,
            TestFunction::TabulatedHat { nodes, .. } => nodes[0].abs().max(nodes[nodes.len() - 1].abs()),
            TestFunction::Combination { parts } => parts.iter().map(|(_, f)| f.extent()).fold(0.0, f64::max),
        }
    }

    /// `phi^eta(x) = phi(x/eta)/eta`.
    pub fn eval_scaled(&self, x: f64, eta: f64) -> f64 {
        self.eval(x / eta) / eta
    }
}

/// `int_a^b e^{iEt} (fa + (fb - fa)(E - a)/(b - a)) dE`.
fn segment_transform(a: f64, b: f64, fa: f64, fb: f64, t: f64) -> Complex64 {
    let h = b - a;
    let s = (fb - fa) / h;
    let z = Complex64::new(0.0, t * h);
    let (i0, i1) = if z.norm() < 1e-2 {
        let mut i0 = Complex64::new(0.0, 0.0);
        let mut i1 = Complex64::new(0.0, 0.0);
        let mut p = Complex64::new(1.0, 0.0);
        let mut f0 = 1.0;
        for k in 0..12 {
            f0 *= (k + 1) as f64;
            i0 += p / f0;
            i1 += p * (k + 1) as f64 / (f0 * (k + 2) as f64);
            p *= z;
        }
        (i0 * h, i1 * h * h)
    } else {
        let e = z.exp();
        let it = Complex64::new(0.0, t);
        ((e - 1.0) / it, h * e / it - (e - 1.0) / (it * it))
    };
    Complex64::from_polar(1.0, t * a) * (fa * i0 + s * i1)
}
