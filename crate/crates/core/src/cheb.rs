//! Chebyshev polynomials of the second kind, nonbacktracking powers and the
//! coefficients of the expansion `e^{-itH/2} = sum_n a_n(t) H^(n)`.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::special::{bessel_j_array, casin_upper, integrate_vec};
use crate::testfn::TestFunction;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Default order cap of the direct nonbacktracking oracle.
pub const NB_ORDER_CAP: usize = 12;
/// Default edge-state budget of the direct nonbacktracking oracle.
pub const NB_STATE_CAP: usize = 20_000_000;

/// `U_n(x)` by the three-term recurrence.
pub fn cheb_u(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, 2.0 * x);
    if n == 0 {
        return a;
    }
    for _ in 1..n {
        let c = 2.0 * x * b - a;
        a = b;
        b = c;
    }
    b
}

/// `U_0(x), .., U_nmax(x)`.
pub fn cheb_u_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(1.0);
    if nmax >= 1 {
        out.push(2.0 * x);
    }
    for k in 2..=nmax {
        let v = 2.0 * x * out[k - 1] - out[k - 2];
        out.push(v);
    }
    out
}

/// `U_0(X), .., U_nmax(X)` for a square matrix `X`.
pub fn cheb_u_matrices(nmax: usize, x: &CMat) -> Vec<CMat> {
    let n = x.n();
    let two_x = x.scale(Complex64::new(2.0, 0.0));
    let mut out = vec![CMat::identity(n)];
    if nmax >= 1 {
        out.push(two_x.clone());
    }
    for k in 2..=nmax {
        let next = two_x.mul(&out[k - 1]).sub(&out[k - 2]);
        out.push(next);
    }
    out
}

pub fn cheb_u_matrix(n: usize, x: &CMat) -> CMat {
    cheb_u_matrices(n, x).pop().unwrap()
}

/// `sum over nonbacktracking paths x_0 .. x_n` of
/// `F_{x_0 x_1} H_{x_1 x_2} .. H_{x_{n-1} x_n}`, as a matrix indexed by
/// `(x_0, x_n)`. Paths satisfy `x_i != x_{i+2}`. Requires `n >= 1`.
pub fn nb_paths(f: &CMat, h: &CMat, n: usize) -> Result<CMat> {
    let dim = h.n();
    assert!(n >= 1, "nb_paths needs at least one step");
    let nbrs: Vec<Vec<(usize, Complex64)>> = (0..dim)
        .map(|z| (0..dim).filter_map(|w| {
            let v = h.get(z, w);
            (v != ZERO).then_some((w, v))
        }).collect())
        .collect();
    let edges: usize = nbrs.iter().map(|v| v.len()).sum();
    if edges > NB_STATE_CAP {
        return Err(Error::CapExceeded(format!(
            "{edges} edge states exceed {NB_STATE_CAP}; use the Chebyshev route"
        )));
    }
    let mut out = CMat::zeros(dim);
    // p[z * dim + w]: paths whose last step is z -> w.
    let mut p = vec![ZERO; dim * dim];
    let mut q = vec![ZERO; dim * dim];
    let mut r = vec![ZERO; dim];
    for x0 in 0..dim {
        p.iter_mut().for_each(|v| *v = ZERO);
        for w in 0..dim {
            p[x0 * dim + w] = f.get(x0, w);
            r[w] = f.get(x0, w);
        }
        for _ in 1..n {
            q.iter_mut().for_each(|v| *v = ZERO);
            for z in 0..dim {
                for &(w, hzw) in &nbrs[z] {
                    q[z * dim + w] = hzw * (r[z] - p[w * dim + z]);
                }
            }
            std::mem::swap(&mut p, &mut q);
            for w in 0..dim {
                r[w] = (0..dim).map(|z| p[z * dim + w]).sum();
            }
        }
        for w in 0..dim {
            out.set(x0, w, r[w]);
        }
    }
    Ok(out)
}

/// Exact `H^(n)` by dynamic programming on directed-edge states.
pub fn nb_power_direct(h: &CMat, n: usize) -> Result<CMat> {
    nb_power_direct_capped(h, n, NB_ORDER_CAP)
}

pub fn nb_power_direct_capped(h: &CMat, n: usize, cap: usize) -> Result<CMat> {
    if n > cap {
        return Err(Error::CapExceeded(format!(
            "order {n} exceeds the direct cap {cap}; use nb_traces_via_cheb"
        )));
    }
    match n {
        0 => Ok(CMat::identity(h.n())),
        _ => nb_paths(h, h, n),
    }
}

/// Traces `tr H^(n)`, `n = 0..=nmax`, from the spectrum of `H/2`.
#[derive(Clone, Debug, Serialize)]
pub struct NbTraces {
    pub traces: Vec<f64>,
    /// False when the identity was applied outside the unimodular ensemble.
    pub exact: bool,
}

/// `tr H^(n) = sum_i U_n(l_i) - r sum_i U_{n-2}(l_i)` with `r = 1/(M-1)`;
/// `tr H^(0) = N` and the correction is dropped for `n < 2`.
pub fn nb_traces_via_cheb(spectrum: &[f64], nmax: usize, r: f64, unimodular: bool) -> NbTraces {
    let mut su = vec![0.0; nmax + 1];
    for &l in spectrum {
        let (mut a, mut b) = (1.0, 2.0 * l);
        su[0] += a;
        if nmax >= 1 {
            su[1] += b;
        }
        for s in su.iter_mut().skip(2) {
            let c = 2.0 * l * b - a;
            a = b;
            b = c;
            *s += b;
        }
    }
    let traces = (0..=nmax)
        .map(|n| if n < 2 { su[n] } else { su[n] - r * su[n - 2] })
        .collect();
    NbTraces { traces, exact: unimodular }
}

/// `a_n(t)`, `n = 0..=nmax`, with `r = 1/(M-1)`.
pub fn a_coefficients(t: f64, nmax: usize, r: f64) -> Vec<Complex64> {
    let kmax = nmax + 4 + (t.abs().ceil() as usize) + 30 + (10.0 * t.abs().cbrt()) as usize;
    let j = bessel_j_array(t, kmax + 2);
    // b_n = c_n - r b_{n+2}, c_k = J_k + J_{k+2}; a_n = (-i)^n b_n.
    let mut b = vec![0.0; kmax + 3];
    for k in (0..=kmax).rev() {
        let c = j[k] + j[k + 2];
        b[k] = c - r * b[k + 2];
    }
    (0..=nmax).map(|n| pow_minus_i(n) * b[n]).collect()
}

/// `a_n(t)` for a single order.
pub fn a_n(t: f64, n: usize, r: f64) -> Complex64 {
    a_coefficients(t, n, r)[n]
}

/// `alpha_k(t) = (-i)^k (J_k(t) + J_{k+2}(t))`.
pub fn alpha_k(t: f64, k: usize) -> Complex64 {
    let j = bessel_j_array(t, k + 2);
    pow_minus_i(k) * (j[k] + j[k + 2])
}

fn pow_minus_i(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// `gamma_n(z) = 2 (-i)^n e^{i(n+1)A} / (1 + r e^{2iA})`, `A = arcsin z`
/// on the upper-half-plane branch; the Laplace transform of [`a_n`].
pub fn gamma_closed(n: usize, z: Complex64, r: f64) -> Complex64 {
    let a = casin_upper(z);
    let num = 2.0 * pow_minus_i(n) * (I * (n as f64 + 1.0) * a).exp();
    num / (1.0 + r * (2.0 * I * a).exp())
}

/// How the time horizon and the order cutoff are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truncation {
    /// `T = M^{rho+delta}`, `n_max = M^mu`.
    Literal,
    /// `T` where `|phi_hat(eta T)| < tol`, `n_max = T + 10 T^{1/3} + 10`.
    Converged { tol: f64 },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Converged { tol: 1e-12 }
    }
}

/// Cap on the converged time horizon.
pub const HORIZON_CAP: f64 = 2000.0;

/// Coefficient configuration for one bandwidth and resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebCoefficients {
    #[serde(rename = "M")]
    pub m: f64,
    pub rho: f64,
    pub mu: f64,
    pub delta: f64,
    pub eta: f64,
    pub truncation: Truncation,
}

impl ChebCoefficients {
    /// Default exponents with `eta = M^{-rho}`.
    pub fn new(m: f64) -> Self {
        let rho = 0.3;
        ChebCoefficients { m, rho, mu: 0.32, delta: 0.008, eta: m.powf(-rho), truncation: Truncation::default() }
    }

    /// Same exponents, explicit `eta`.
    pub fn with_eta(m: f64, eta: f64) -> Self {
        ChebCoefficients { eta, ..Self::new(m) }
    }

    pub fn literal(mut self) -> Self {
        self.truncation = Truncation::Literal;
        self
    }

    /// `r = 1/(M-1)`.
    pub fn r(&self) -> f64 {
        1.0 / (self.m - 1.0)
    }

    /// Checks `rho < mu < 1/3` and `2 delta < mu - rho < 3 delta`.
    pub fn check_exponents(&self) -> Result<()> {
        let gap = self.mu - self.rho;
        if !(self.rho > 0.0 && self.rho < self.mu && self.mu < 1.0 / 3.0) {
            return Err(Error::Validation(format!("need 0 < rho < mu < 1/3, got rho={}, mu={}", self.rho, self.mu)));
        }
        if !(2.0 * self.delta < gap && gap < 3.0 * self.delta) {
            return Err(Error::Validation(format!("need 2 delta < mu - rho < 3 delta, got delta={}", self.delta)));
        }
        Ok(())
    }

    pub fn horizon(&self, phi: &TestFunction) -> f64 {
        match self.truncation {
            Truncation::Literal => self.m.powf(self.rho + self.delta),
            Truncation::Converged { tol } => phi.horizon(self.eta, tol, HORIZON_CAP),
        }
    }

    pub fn n_max(&self, phi: &TestFunction) -> usize {
        match self.truncation {
            Truncation::Literal => self.m.powf(self.mu).floor() as usize,
            Truncation::Converged { .. } => {
                let t = self.horizon(phi);
                (t + 10.0 * t.cbrt() + 10.0).ceil() as usize
            }
        }
    }

    /// `V_main` cutoff on `b1 + b2 + b3 + b4`.
    pub fn pair_cutoff(&self, phi1: &TestFunction, phi2: &TestFunction) -> usize {
        match self.truncation {
            Truncation::Literal => (self.m.powf(self.mu) / 2.0).floor() as usize,
            Truncation::Converged { .. } => self.n_max(phi1).max(self.n_max(phi2)),
        }
    }

    /// `gamma~_n(E, phi)` for `n = 0..=n_max`.
    pub fn gamma_table(&self, e: f64, phi: &TestFunction) -> Result<GammaTable> {
        let t_end = self.horizon(phi);
        let n_max = self.n_max(phi);
        let values = gamma_truncated_all(n_max, e, phi, self.eta, t_end, self.r())?;
        Ok(GammaTable { e, eta: self.eta, horizon: t_end, values })
    }
}

/// `int_0^T e^{iEt} phi_hat(eta t) a_n(t) dt` for `n = 0..=n_max`.
pub fn gamma_truncated_all(
    n_max: usize,
    e: f64,
    phi: &TestFunction,
    eta: f64,
    t_end: f64,
    r: f64,
) -> Result<Vec<Complex64>> {
    let width = std::f64::consts::PI / (2.0 * e.abs() + 2.0);
    let panels = ((t_end / width).ceil() as usize).max(1);
    integrate_vec(
        |t, out: &mut [Complex64]| {
            let w = Complex64::from_polar(1.0, e * t) * phi.hat_at(eta * t);
            let a = a_coefficients(t, n_max, r);
            for (o, an) in out.iter_mut().zip(a) {
                *o = w * an;
            }
        },
        0.0,
        t_end,
        n_max + 1,
        panels,
        1e-13,
        1e-11,
    )
}

/// `gamma~_n(E, phi)` for a single order.
pub fn gamma_truncated(n: usize, e: f64, phi: &TestFunction, eta: f64, t_end: f64, r: f64) -> Result<Complex64> {
    Ok(gamma_truncated_all(n, e, phi, eta, t_end, r)?[n])
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaTable {
    pub e: f64,
    pub eta: f64,
    pub horizon: f64,
    pub values: Vec<Complex64>,
}

impl GammaTable {
    /// `2 Re gamma~_n`, zero past the table.
    pub fn g(&self, n: usize) -> f64 {
        self.values.get(n).map_or(0.0, |v| 2.0 * v.re)
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    /// CSV with columns `n,re,im`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,re,im\n");
        for (n, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{n},{:.17e},{:.17e}\n", v.re, v.im));
        }
        s
    }
}

/// Residual of the general recursion at each order.
#[derive(Clone, Debug, Serialize)]
pub struct RecursionReport {
    pub residuals: Vec<f64>,
    pub terms: Vec<usize>,
}

impl RecursionReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

/// Budget on the number of enumerated terms.
pub const RECURSION_TERM_CAP: usize = 100_000;

/// Compares `U_n(H/2)` with the expansion over words in
/// `Phi_2 = diag(sum_z |H_xz|^2) - 1` and `Phi_3 = -|H|^2 o H`, where each
/// `Phi_3` opens a nonbacktracking path and each `Phi_2` splits the chain.
pub fn verify_general_recursion(h: &CMat, n_max: usize) -> Result<RecursionReport> {
    let dim = h.n();
    if dim > 200 {
        return Err(Error::CapExceeded(format!("N = {dim} exceeds 200 for the enumeration")));
    }
    if n_max > 6 {
        return Err(Error::CapExceeded(format!("order {n_max} exceeds 6 for the enumeration")));
    }
    let mut phi2 = CMat::zeros(dim);
    for x in 0..dim {
        let s: f64 = (0..dim).map(|z| h.get(x, z).norm_sqr()).sum();
        phi2.set(x, x, Complex64::new(s - 1.0, 0.0));
    }
    let mut phi3 = CMat::zeros(dim);
    for x in 0..dim {
        for y in 0..dim {
            let v = h.get(x, y);
            phi3.set(x, y, -v.norm_sqr() * v);
        }
    }
    let mut nb: HashMap<usize, CMat> = HashMap::new();
    let mut nb3: HashMap<usize, CMat> = HashMap::new();
    for l in 0..=n_max {
        nb.insert(l, nb_power_direct_capped(h, l, n_max.max(NB_ORDER_CAP))?);
        if l >= 1 {
            nb3.insert(l, nb_paths(&phi3, h, l)?);
        }
    }
    let half = h.scale(Complex64::new(0.5, 0.0));
    let u = cheb_u_matrices(n_max, &half);
    let mut residuals = Vec::new();
    let mut terms = Vec::new();
    for n in 0..=n_max {
        let mut total = CMat::zeros(dim);
        let mut count = 0usize;
        for word in words(n) {
            let used: usize = word.iter().sum();
            let rest = n - used;
            for comp in compositions(rest, word.len() + 1) {
                count += 1;
                if count > RECURSION_TERM_CAP {
                    return Err(Error::CapExceeded("general recursion term budget".into()));
                }
                let mut acc = nb[&comp[0]].clone();
                for (a, &l) in word.iter().zip(&comp[1..]) {
                    acc = if *a == 2 {
                        acc.mul(&phi2).mul(&nb[&l])
                    } else {
                        acc.mul(&nb3[&(l + 1)])
                    };
                }
                total = total.add(&acc);
            }
        }
        residuals.push(total.max_abs_diff(&u[n]));
        terms.push(count);
    }
    Ok(RecursionReport { residuals, terms })
}

/// Words over `{2, 3}` with letter sum at most `n`.
fn words(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for w in &frontier {
            let s: usize = w.iter().sum();
            for a in [2usize, 3] {
                if s + a <= n {
                    let mut v: Vec<usize> = w.clone();
                    v.push(a);
                    next.push(v);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Ordered compositions of `total` into `parts` nonnegative summands.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut tail in compositions(total - first, parts - 1) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}
