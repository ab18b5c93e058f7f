//! Torus geometry, variance profile `S`, phase profile `T`, their Fourier
//! transforms and the derived profile constants.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, sym_inverse};
use crate::special::{gauss_legendre, unit_ball_volume, unit_sphere_area};

/// Smallest admissible eigenvalue of `D`.
pub const DEGENERACY_TOL: f64 = 1e-8;

const PARITY_TOL: f64 = 1e-12;

/// Discrete torus `{0..L}^d` with band width `W`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "W")]
    pub w: usize,
}

impl LatticeSpec {
    pub fn new(d: usize, l: usize, w: usize) -> Result<Self> {
        let spec = LatticeSpec { d, l, w };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.d) {
            return Err(Error::Geometry(format!("dimension {} outside 1..=4", self.d)));
        }
        if self.l < 2 {
            return Err(Error::Geometry(format!("side length {} below 2", self.l)));
        }
        if self.w < 1 || 2 * self.w > self.l {
            return Err(Error::Geometry(format!("band width {} outside 1..={}", self.w, self.l / 2)));
        }
        Ok(())
    }

    /// Number of sites `N = L^d`.
    pub fn n(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Minimal-image coordinates of site `idx` (first axis fastest).
    pub fn coords(&self, idx: usize) -> [i64; 4] {
        let l = self.l as i64;
        let mut c = [0i64; 4];
        let mut rest = idx;
        for slot in c.iter_mut().take(self.d) {
            let v = (rest % self.l) as i64;
            rest /= self.l;
            *slot = if 2 * v > l { v - l } else { v };
        }
        c
    }

    /// Index of the site with (possibly unreduced) coordinates `c`.
    pub fn index(&self, c: &[i64]) -> usize {
        let l = self.l as i64;
        let mut idx = 0usize;
        for k in (0..self.d).rev() {
            idx = idx * self.l + c[k].rem_euclid(l) as usize;
        }
        idx
    }

    /// Index of `x - y`.
    pub fn diff(&self, x: usize, y: usize) -> usize {
        let mut idx = 0usize;
        let mut stride = 1usize;
        let (mut a, mut b) = (x, y);
        for _ in 0..self.d {
            let ca = a % self.l;
            let cb = b % self.l;
            a /= self.l;
            b /= self.l;
            idx += ((ca + self.l - cb) % self.l) * stride;
            stride *= self.l;
        }
        idx
    }

    /// Index of `x + z`.
    pub fn add(&self, x: usize, z: usize) -> usize {
        let mut idx = 0usize;
        let mut stride = 1usize;
        let (mut a, mut b) = (x, z);
        for _ in 0..self.d {
            let ca = a % self.l;
            let cb = b % self.l;
            a /= self.l;
            b /= self.l;
            idx += ((ca + cb) % self.l) * stride;
            stride *= self.l;
        }
        idx
    }

    /// Index of `-x`.
    pub fn neg(&self, x: usize) -> usize {
        self.diff(0, x)
    }

    /// Periodic Euclidean norm `min_v |x + L v|`.
    pub fn periodic_norm(&self, idx: usize) -> f64 {
        let c = self.coords(idx);
        c[..self.d].iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
    }

    /// True when `x` and `-x` are the same site while `x != 0`.
    pub fn self_antipodal(&self, idx: usize) -> bool {
        idx != 0 && self.neg(idx) == idx
    }

    /// Rescaled coordinates `[x]_L / W`.
    pub fn scaled(&self, idx: usize) -> Vec<f64> {
        let c = self.coords(idx);
        c[..self.d].iter().map(|&v| v as f64 / self.w as f64).collect()
    }
}

/// Shape functions on `R^d`.
pub type ShapeFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Built-in densities `f`, all normalized to unit integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    /// Indicator of the unit ball.
    Step,
    /// Standard Gaussian.
    Gaussian,
    /// `e^{-|x|}` up to normalization.
    Exponential,
    /// `1/(pi (x^2 + 1))`, `d = 1` only; infinite second moment.
    CauchyTail,
    /// Radial profile, piecewise linear between `(radii[i], values[i])`, zero past the last radius.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

/// Built-in odd phase functions `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Zero,
    /// `sin(pi x_1)` on the unit ball, zero outside.
    ClippedSine,
}

/// Built-in even damping functions `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Damping {
    #[default]
    Zero,
    /// `s e^{1-s}` with `s = |x|^2 / radius^2`.
    Bump {
        #[serde(default = "default_bump_radius")]
        radius: f64,
    },
    Constant { value: f64 },
}

fn default_bump_radius() -> f64 {
    0.5
}

/// Declarative profile description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Step,
    General {
        density: Density,
        #[serde(default)]
        phase: Phase,
        #[serde(default)]
        damping: Damping,
    },
    /// Built from user closures.
    Custom,
}

/// Config block: `{d, L, W, profile, lambda, varphi}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub profile: ProfileKind,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub varphi: f64,
    #[serde(default)]
    pub unit_normalized: bool,
}

impl ProfileConfig {
    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.d, self.l, self.w)
    }

    pub fn build(&self) -> Result<ProfileSpec> {
        let lattice = self.lattice()?;
        let p = match &self.profile {
            ProfileKind::Step => {
                if self.lambda != 0.0 || self.varphi != 0.0 {
                    return Err(Error::Validation("step profile takes no lambda/varphi".into()));
                }
                build_step_profile(lattice)?
            }
            ProfileKind::General { density, phase, damping } => {
                build_general_profile(lattice, density, phase, damping, self.lambda, self.varphi)?
            }
            ProfileKind::Custom => {
                return Err(Error::Validation("custom profiles cannot be built from a config".into()))
            }
        };
        Ok(if self.unit_normalized { p.unit_normalized() } else { p })
    }
}

/// Resolved shape functions with quadrature hints.
#[derive(Clone)]
pub struct ProfileFunctions {
    pub f: ShapeFn,
    pub g: ShapeFn,
    pub h: ShapeFn,
    /// Extra radial breakpoints for continuum quadrature.
    pub breaks: Vec<f64>,
    /// False when the continuum second moment of `f` diverges.
    pub finite_moments: bool,
}

impl fmt::Debug for ProfileFunctions {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("ProfileFunctions")
            .field("breaks", &self.breaks)
            .field("finite_moments", &self.finite_moments)
            .finish()
    }
}

impl ProfileFunctions {
    pub fn custom(f: ShapeFn, g: ShapeFn, h: ShapeFn) -> Self {
        ProfileFunctions { f, g, h, breaks: vec![], finite_moments: true }
    }

    pub fn builtin(d: usize, density: &Density, phase: &Phase, damping: &Damping) -> Result<Self> {
        let (f, breaks, finite) = density_fn(d, density)?;
        let g: ShapeFn = match phase {
            Phase::Zero => Arc::new(|_: &[f64]| 0.0),
            Phase::ClippedSine => Arc::new(|x: &[f64]| {
                if norm2(x) <= 1.0 {
                    (PI * x[0]).sin()
                } else {
                    0.0
                }
            }),
        };
        let h: ShapeFn = match *damping {
            Damping::Zero => Arc::new(|_: &[f64]| 0.0),
            Damping::Bump { radius } => {
                if !(radius > 0.0) {
                    return Err(Error::Validation(format!("bump radius {radius} must be positive")));
                }
                let r2 = radius * radius;
                Arc::new(move |x: &[f64]| {
                    let s = norm2(x) / r2;
                    s * (1.0 - s).exp()
                })
            }
            Damping::Constant { value } => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::Validation(format!("damping constant {value} outside [0,1]")));
                }
                Arc::new(move |_: &[f64]| value)
            }
        };
        Ok(ProfileFunctions { f, g, h, breaks, finite_moments: finite })
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn density_fn(d: usize, density: &Density) -> Result<(ShapeFn, Vec<f64>, bool)> {
    let vol = unit_ball_volume(d);
    Ok(match density {
        Density::Step => {
            let c = 1.0 / vol;
            (Arc::new(move |x: &[f64]| if norm2(x) <= 1.0 { c } else { 0.0 }), vec![1.0], true)
        }
        Density::Gaussian => {
            let c = (2.0 * PI).powf(-(d as f64) / 2.0);
            (Arc::new(move |x: &[f64]| c * (-0.5 * norm2(x)).exp()), vec![], true)
        }
        Density::Exponential => {
            let fact: f64 = (1..d).map(|k| k as f64).product();
            let c = 1.0 / (d as f64 * vol * fact);
            (Arc::new(move |x: &[f64]| c * (-norm2(x).sqrt()).exp()), vec![], true)
        }
        Density::CauchyTail => {
            if d != 1 {
                return Err(Error::Validation("the Cauchy-tail density is defined for d = 1 only".into()));
            }
            (Arc::new(|x: &[f64]| 1.0 / (PI * (x[0] * x[0] + 1.0))), vec![], false)
        }
        Density::Tabulated { radii, values } => {
            if radii.len() != values.len() || radii.len() < 2 {
                return Err(Error::Validation("tabulated density needs matching radii/values, at least 2".into()));
            }
            if radii[0] != 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Validation("tabulated radii must start at 0 and increase".into()));
            }
            if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::Validation("tabulated density has negative or non-finite values".into()));
            }
            // Exact integral of the piecewise-linear radial profile against r^{d-1}.
            let (xs, ws) = gauss_legendre(4);
            let mut mass = 0.0;
            for k in 0..radii.len() - 1 {
                let (a, b) = (radii[k], radii[k + 1]);
                for (x, w) in xs.iter().zip(&ws) {
                    let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
                    let v = values[k] + (values[k + 1] - values[k]) * (r - a) / (b - a);
                    mass += 0.5 * (b - a) * w * v * r.powi(d as i32 - 1);
                }
            }
            mass *= unit_sphere_area(d);
            if !(mass > 0.0) {
                return Err(Error::Validation("tabulated density has zero mass".into()));
            }
            let r = radii.clone();
            let v = values.clone();
            let f = move |x: &[f64]| {
                let s = norm2(x).sqrt();
                if s >= r[r.len() - 1] {
                    return if s == r[r.len() - 1] { v[v.len() - 1] / mass } else { 0.0 };
                }
                let k = r.partition_point(|&t| t <= s) - 1;
                (v[k] + (v[k + 1] - v[k]) * (s - r[k]) / (r[k + 1] - r[k])) / mass
            };
            (Arc::new(f), radii.clone(), true)
        }
    })
}

/// Variance profile `S` and phase profile `T` on a torus, stored as rows
/// `S_{x0}`, `T_{x0}` indexed by the lattice index of `x`.
#[derive(Clone, Debug)]
pub struct ProfileSpec {
    pub lattice: LatticeSpec,
    pub kind: ProfileKind,
    pub lambda: f64,
    pub varphi: f64,
    /// `M`: the normalizing count.
    pub m: f64,
    /// Overall factor applied after construction (`1/I` when unit-normalized).
    pub scale: f64,
    row: Vec<f64>,
    trow: Vec<Complex64>,
    support: Vec<usize>,
    functions: Option<ProfileFunctions>,
}

/// `S_{xy} = 1{1 <= |x-y| <= W}/(M-1)`.
pub fn build_step_profile(lattice: LatticeSpec) -> Result<ProfileSpec> {
    lattice.validate()?;
    if 2 * lattice.w > lattice.l {
        return Err(Error::Geometry(format!(
            "band width {} exceeds half the side length {}",
            lattice.w, lattice.l
        )));
    }
    let n = lattice.n();
    let w = lattice.w as f64;
    let mut row = vec![0.0; n];
    let mut count = 0usize;
    for (x, v) in row.iter_mut().enumerate() {
        let r = lattice.periodic_norm(x);
        if r >= 1.0 && r <= w {
            *v = 1.0;
            count += 1;
        }
    }
    if count < 2 {
        return Err(Error::Geometry("band contains fewer than two sites".into()));
    }
    let m = count as f64;
    for v in row.iter_mut() {
        *v /= m - 1.0;
    }
    Ok(ProfileSpec::from_rows(lattice, ProfileKind::Step, 0.0, 0.0, m, row, None))
}

/// General profile from built-in shapes.
pub fn build_general_profile(
    lattice: LatticeSpec,
    density: &Density,
    phase: &Phase,
    damping: &Damping,
    lambda: f64,
    varphi: f64,
) -> Result<ProfileSpec> {
    lattice.validate()?;
    let funcs = ProfileFunctions::builtin(lattice.d, density, phase, damping)?;
    let kind = ProfileKind::General {
        density: density.clone(),
        phase: phase.clone(),
        damping: damping.clone(),
    };
    build_profile_from_functions(lattice, funcs, kind, lambda, varphi)
}

/// General profile from arbitrary shape functions; parity and bounds are
/// checked on the lattice points.
pub fn build_profile_from_functions(
    lattice: LatticeSpec,
    funcs: ProfileFunctions,
    kind: ProfileKind,
    lambda: f64,
    varphi: f64,
) -> Result<ProfileSpec> {
    lattice.validate()?;
    if !(0.0..=1.0).contains(&lambda) || !(0.0..=1.0).contains(&varphi) {
        return Err(Error::Validation(format!("lambda {lambda} / varphi {varphi} outside [0,1]")));
    }
    let n = lattice.n();
    let mut fv = vec![0.0; n];
    let mut gv = vec![0.0; n];
    let mut hv = vec![0.0; n];
    for x in 0..n {
        let z = lattice.scaled(x);
        let mz: Vec<f64> = z.iter().map(|v| -v).collect();
        let (f, fm) = ((funcs.f)(&z), (funcs.f)(&mz));
        let (g, gm) = ((funcs.g)(&z), (funcs.g)(&mz));
        let (h, hm) = ((funcs.h)(&z), (funcs.h)(&mz));
        if !f.is_finite() || f < 0.0 {
            return Err(Error::Validation(format!("f({z:?}) = {f} is negative or not finite")));
        }
        if (f - fm).abs() > PARITY_TOL * f.abs().max(1.0) {
            return Err(Error::Validation(format!("f is not even at {z:?}")));
        }
        if (g + gm).abs() > PARITY_TOL * g.abs().max(1.0) || !g.is_finite() {
            return Err(Error::Validation(format!("g is not odd at {z:?}")));
        }
        if (h - hm).abs() > PARITY_TOL * h.abs().max(1.0) {
            return Err(Error::Validation(format!("h is not even at {z:?}")));
        }
        if !(-PARITY_TOL..=1.0 + PARITY_TOL).contains(&h) {
            return Err(Error::Validation(format!("h({z:?}) = {h} outside [0,1]")));
        }
        fv[x] = f;
        gv[x] = g;
        hv[x] = h;
    }
    let m: f64 = fv.iter().sum();
    if !(m > 1.0) {
        return Err(Error::Validation(format!("M = {m} must exceed 1")));
    }
    let row: Vec<f64> = fv.iter().map(|f| f / (m - 1.0)).collect();
    let trow: Vec<Complex64> = (0..n)
        .map(|x| {
            let amp = row[x] * (1.0 - varphi * hv[x]);
            if lattice.self_antipodal(x) {
                Complex64::new(amp * (lambda * gv[x]).cos(), 0.0)
            } else {
                Complex64::from_polar(amp, lambda * gv[x])
            }
        })
        .collect();
    let mut p = ProfileSpec::from_rows(lattice, kind, lambda, varphi, m, row, Some(funcs));
    p.trow = trow;
    Ok(p)
}

impl ProfileSpec {
    fn from_rows(
        lattice: LatticeSpec,
        kind: ProfileKind,
        lambda: f64,
        varphi: f64,
        m: f64,
        row: Vec<f64>,
        functions: Option<ProfileFunctions>,
    ) -> Self {
        let trow = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let support = (0..row.len()).filter(|&x| row[x] > 0.0).collect();
        ProfileSpec { lattice, kind, lambda, varphi, m, scale: 1.0, row, trow, support, functions }
    }

    /// Same profile divided by its row sum, so that `sum_y S_{xy} = 1`.
    pub fn unit_normalized(&self) -> Self {
        let i = self.row_sum();
        let mut p = self.clone();
        for v in p.row.iter_mut() {
            *v /= i;
        }
        for v in p.trow.iter_mut() {
            *v /= i;
        }
        p.scale = self.scale / i;
        p
    }

    pub fn is_unit_normalized(&self) -> bool {
        self.scale != 1.0
    }

    pub fn n(&self) -> usize {
        self.lattice.n()
    }

    /// `S_{x0}` indexed by `x`.
    pub fn row(&self) -> &[f64] {
        &self.row
    }

    /// `T_{x0}` indexed by `x`.
    pub fn trow(&self) -> &[Complex64] {
        &self.trow
    }

    /// Displacements with `S_{x0} > 0`.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn functions(&self) -> Option<&ProfileFunctions> {
        self.functions.as_ref()
    }

    pub fn s(&self, x: usize, y: usize) -> f64 {
        self.row[self.lattice.diff(x, y)]
    }

    pub fn t(&self, x: usize, y: usize) -> Complex64 {
        self.trow[self.lattice.diff(x, y)]
    }

    /// `I = sum_y S_{xy}`.
    pub fn row_sum(&self) -> f64 {
        self.support.iter().map(|&x| self.row[x]).sum()
    }

    /// True when `T = S` entrywise.
    pub fn t_equals_s(&self) -> bool {
        self.row.iter().zip(&self.trow).all(|(s, t)| t.im == 0.0 && t.re == *s)
    }

    /// Dense `S` as a row-major `N x N` array.
    pub fn dense_s(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n * n];
        for x in 0..n {
            for &z in &self.support {
                out[x * n + self.lattice.add(x, z)] = self.row[z];
            }
        }
        out
    }

    fn g_h_values(&self, x: usize) -> (f64, f64) {
        match &self.functions {
            Some(fs) => {
                let z = self.lattice.scaled(x);
                ((fs.g)(&z), (fs.h)(&z))
            }
            None => (0.0, 0.0),
        }
    }
}

/// Derived constants of a profile. Continuum values are `None` when the
/// profile has no continuum description or its moments diverge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileConstants {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    #[serde(rename = "D0")]
    pub d0: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Q")]
    pub q: Option<f64>,
    #[serde(rename = "Q0")]
    pub q0: Option<f64>,
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "Delta0")]
    pub delta0: Option<f64>,
    #[serde(rename = "Upsilon")]
    pub upsilon: f64,
    #[serde(rename = "Upsilon0")]
    pub upsilon0: Option<f64>,
    pub w: Vec<f64>,
    pub w0: Option<Vec<f64>>,
    pub sigma: Option<f64>,
    pub sigma_tilde: f64,
    pub lambda: f64,
    pub varphi: f64,
    pub det_d: f64,
    pub det_d0: Option<f64>,
}

pub fn profile_constants(profile: &ProfileSpec) -> Result<ProfileConstants> {
    let lat = profile.lattice;
    let d = lat.d;
    let mut dm = vec![vec![0.0; d]; d];
    let mut wv = vec![0.0; d];
    let mut g2 = 0.0;
    let mut ups = 0.0;
    for &x in profile.support() {
        let s = profile.row[x];
        let z = lat.scaled(x);
        let (g, h) = profile.g_h_values(x);
        for i in 0..d {
            for j in 0..d {
                dm[i][j] += 0.5 * z[i] * z[j] * s;
            }
            wv[i] += 0.5 * z[i] * g * s;
        }
        g2 += 0.5 * g * g * s;
        ups += h * s;
    }
    let (evals, _) = jacobi_eigen(&dm);
    let min_ev = evals.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_ev > DEGENERACY_TOL) {
        return Err(Error::DegenerateCovariance(min_ev));
    }
    let det_d: f64 = evals.iter().product();
    let dinv = sym_inverse(&dm);
    let quad = |v: &[f64], inv: &[Vec<f64>]| -> f64 {
        (0..d).map(|i| (0..d).map(|j| v[i] * inv[i][j] * v[j]).sum::<f64>()).sum()
    };
    let q = if d == 2 {
        let mut acc = 0.0;
        for &x in profile.support() {
            let z = lat.scaled(x);
            let a = quad(&z, &dinv);
            acc += profile.row[x] * a * a;
        }
        Some(acc / 32.0)
    } else {
        None
    };
    let delta = g2 - quad(&wv, &dinv);
    let sigma_tilde = delta * profile.lambda * profile.lambda + ups * profile.varphi;

    let cont = match profile.functions() {
        Some(fs) if fs.finite_moments => Some(continuum_constants(d, fs)?),
        _ if matches!(profile.kind, ProfileKind::Step) => Some(step_continuum(d)),
        _ => None,
    };
    let (d0, q0, delta0, upsilon0, w0, det_d0) = match cont {
        Some(c) => (Some(c.d0), c.q0, Some(c.delta0), Some(c.upsilon0), Some(c.w0), Some(c.det_d0)),
        None => (None, None, None, None, None, None),
    };
    let sigma = match (delta0, upsilon0) {
        (Some(a), Some(b)) => Some(a * profile.lambda * profile.lambda + b * profile.varphi),
        _ => None,
    };
    Ok(ProfileConstants {
        m: profile.m,
        d: dm,
        d0,
        q,
        q0,
        delta,
        delta0,
        upsilon: ups,
        upsilon0,
        w: wv,
        w0,
        sigma,
        sigma_tilde,
        lambda: profile.lambda,
        varphi: profile.varphi,
        det_d,
        det_d0,
    })
}

struct Continuum {
    d0: Vec<Vec<f64>>,
    q0: Option<f64>,
    delta0: f64,
    upsilon0: f64,
    w0: Vec<f64>,
    det_d0: f64,
}

fn step_continuum(d: usize) -> Continuum {
    let c = 1.0 / (2.0 * (d as f64 + 2.0));
    let mut d0 = vec![vec![0.0; d]; d];
    for (i, row) in d0.iter_mut().enumerate() {
        row[i] = c;
    }
    Continuum {
        d0,
        q0: if d == 2 { Some(2.0 / 3.0) } else { None },
        delta0: 0.0,
        upsilon0: 0.0,
        w0: vec![0.0; d],
        det_d0: c.powi(d as i32),
    }
}

/// Nodes and weights of a product rule on `R^d` in hyperspherical
/// coordinates, radial Gauss-Legendre panels between `breaks`.
pub fn continuum_rule(d: usize, extra_breaks: &[f64]) -> Vec<(Vec<f64>, f64)> {
    let mut breaks: Vec<f64> = vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    breaks.extend(extra_breaks.iter().cloned().filter(|&b| b > 0.0 && b < 64.0));
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let radial_n = if d >= 4 { 16 } else { 24 };
    let (rx, rw) = gauss_legendre(radial_n);
    let mut radial = Vec::new();
    for k in 0..breaks.len() - 1 {
        let (a, b) = (breaks[k], breaks[k + 1]);
        for (x, w) in rx.iter().zip(&rw) {
            let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
            radial.push((r, 0.5 * (b - a) * w * r.powi(d as i32 - 1)));
        }
    }
    let angular = sphere_rule(d);
    let mut out = Vec::with_capacity(radial.len() * angular.len());
    for &(r, wr) in &radial {
        for (u, wa) in &angular {
            out.push((u.iter().map(|c| c * r).collect(), wr * wa));
        }
    }
    out
}

fn sphere_rule(d: usize) -> Vec<(Vec<f64>, f64)> {
    match d {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let n = 64;
            (0..n)
                .map(|k| {
                    let t = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                    (vec![t.cos(), t.sin()], 2.0 * PI / n as f64)
                })
                .collect()
        }
        3 => {
            let (cx, cw) = gauss_legendre(24);
            let n = 48;
            let mut out = Vec::new();
            for (c, wc) in cx.iter().zip(&cw) {
                let s = (1.0 - c * c).sqrt();
                for k in 0..n {
                    let p = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                    out.push((vec![s * p.cos(), s * p.sin(), *c], wc * 2.0 * PI / n as f64));
                }
            }
            out
        }
        _ => {
            let (ax, aw) = gauss_legendre(16);
            let (cx, cw) = gauss_legendre(16);
            let n = 32;
            let mut out = Vec::new();
            for (a, wa) in ax.iter().zip(&aw) {
                let psi = 0.5 * PI * (a + 1.0);
                let (s1, c1) = psi.sin_cos();
                let wpsi = 0.5 * PI * wa * s1 * s1;
                for (c, wc) in cx.iter().zip(&cw) {
                    let s2 = (1.0 - c * c).sqrt();
                    for k in 0..n {
                        let p = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                        out.push((
                            vec![c1, s1 * c, s1 * s2 * p.cos(), s1 * s2 * p.sin()],
                            wpsi * wc * 2.0 * PI / n as f64,
                        ));
                    }
                }
            }
            out
        }
    }
}

fn continuum_constants(d: usize, fs: &ProfileFunctions) -> Result<Continuum> {
    let rule = continuum_rule(d, &fs.breaks);
    let mut d0 = vec![vec![0.0; d]; d];
    let mut w0 = vec![0.0; d];
    let mut g2 = 0.0;
    let mut ups = 0.0;
    for (x, wt) in &rule {
        let f = (fs.f)(x) * wt;
        if f == 0.0 {
            continue;
        }
        let g = (fs.g)(x);
        let h = (fs.h)(x);
        for i in 0..d {
            for j in 0..d {
                d0[i][j] += 0.5 * x[i] * x[j] * f;
            }
            w0[i] += 0.5 * x[i] * g * f;
        }
        g2 += 0.5 * g * g * f;
        ups += h * f;
    }
    let (evals, _) = jacobi_eigen(&d0);
    let min_ev = evals.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_ev > DEGENERACY_TOL) {
        return Err(Error::DegenerateCovariance(min_ev));
    }
    let inv = sym_inverse(&d0);
    let quad = |v: &[f64]| -> f64 {
        (0..d).map(|i| (0..d).map(|j| v[i] * inv[i][j] * v[j]).sum::<f64>()).sum()
    };
    let q0 = if d == 2 {
        let mut acc = 0.0;
        for (x, wt) in &rule {
            let a = quad(x);
            acc += (fs.f)(x) * wt * a * a;
        }
        Some(acc / 32.0)
    } else {
        None
    };
    Ok(Continuum {
        det_d0: evals.iter().product(),
        delta0: g2 - quad(&w0),
        upsilon0: ups,
        d0,
        q0,
        w0,
    })
}

/// `S_W(q) = sum_x cos(q.x/W) S_{x0}` at rescaled momentum `q`.
pub fn fourier_profile(profile: &ProfileSpec, q: &[f64]) -> f64 {
    let lat = profile.lattice;
    let w = lat.w as f64;
    profile
        .support()
        .iter()
        .map(|&x| {
            let c = lat.coords(x);
            let ph: f64 = (0..lat.d).map(|i| q[i] * c[i] as f64).sum::<f64>() / w;
            ph.cos() * profile.row[x]
        })
        .sum()
}

/// `T_W(q) = sum_x Re(e^{-i q.x/W} T_{x0})`.
pub fn fourier_profile_t(profile: &ProfileSpec, q: &[f64]) -> f64 {
    let lat = profile.lattice;
    let w = lat.w as f64;
    profile
        .support()
        .iter()
        .map(|&x| {
            let c = lat.coords(x);
            let ph: f64 = (0..lat.d).map(|i| q[i] * c[i] as f64).sum::<f64>() / w;
            (Complex64::from_polar(1.0, -ph) * profile.trow[x]).re
        })
        .sum()
}

/// In-place `d`-dimensional DFT on `{0..L}^d` (first axis fastest).
pub fn fft_nd(data: &mut [Complex64], d: usize, l: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(l) } else { planner.plan_fft_forward(l) };
    let n = data.len();
    let mut line = vec![Complex64::new(0.0, 0.0); l];
    let mut stride = 1;
    for _ in 0..d {
        let block = stride * l;
        for base in (0..n).step_by(block) {
            for off in 0..stride {
                for k in 0..l {
                    line[k] = data[base + off + k * stride];
                }
                fft.process(&mut line);
                for k in 0..l {
                    data[base + off + k * stride] = line[k];
                }
            }
        }
        stride *= l;
    }
}

/// `S(p)` on the dual grid, indexed like the lattice (`p = 2 pi k / L`).
pub fn s_spectrum(profile: &ProfileSpec) -> Vec<f64> {
    let lat = profile.lattice;
    let mut data: Vec<Complex64> = profile.row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut data, lat.d, lat.l, false);
    data.into_iter().map(|c| c.re).collect()
}

/// `T(p)` on the dual grid.
pub fn t_spectrum(profile: &ProfileSpec) -> Vec<f64> {
    let lat = profile.lattice;
    let mut data = profile.trow.clone();
    fft_nd(&mut data, lat.d, lat.l, false);
    data.into_iter().map(|c| c.re).collect()
}

/// Rescaled momentum `q = W p` of dual-grid index `k`.
pub fn dual_momentum(lat: &LatticeSpec, k: usize) -> Vec<f64> {
    let c = lat.coords(k);
    c[..lat.d]
        .iter()
        .map(|&v| 2.0 * PI * v as f64 / lat.l as f64 * lat.w as f64)
        .collect()
}
