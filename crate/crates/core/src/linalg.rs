//! Dense linear algebra: Hermitian eigen-solver and small helpers.
//!
//! The solver reduces to real tridiagonal form with Householder reflectors
//! (lower-triangle updates only) and finishes with implicit-shift QL.

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_vec(n: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), n * n, "matrix data length");
        CMat { n, data }
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            let row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (r, &b) in row.iter_mut().zip(brow) {
                    *r += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMat) -> CMat {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        CMat { n: self.n, data: self.data.iter().map(|&a| a * s).collect() }
    }

    fn zip_with(&self, other: &CMat, f: impl Fn(Complex64, Complex64) -> Complex64) -> CMat {
        assert_eq!(self.n, other.n, "matrix sizes");
        CMat {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.n;
        let mut r = 0.0f64;
        for i in 0..n {
            for j in i..n {
                r = r.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        r
    }

    pub fn conj_transpose(&self) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|i| self.data[i * n..(i + 1) * n].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    let n = a.n();
    // Row-major storage of A read column-major is conj(A): same spectrum.
    let mut work = a.as_slice().to_vec();
    let (d, e, _) = hetrd_lower(&mut work, n);
    let mut d = d;
    let mut e = e;
    tql(&mut d, &mut e, None)?;
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(d)
}

/// Eigenvalues (ascending) of a real symmetric matrix given row-major.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut work = a.to_vec();
    let (mut d, mut e) = sytrd_lower(&mut work, n);
    tql(&mut d, &mut e, None)?;
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(d)
}

/// Eigenvalues (ascending) and eigenvectors (columns of the returned matrix).
pub fn hermitian_eigen(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = a.n();
    let mut work = a.as_slice().to_vec();
    let (mut d, mut e, tau) = hetrd_lower(&mut work, n);
    let q = form_q(&work, &tau, n);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql(&mut d, &mut e, Some(&mut z))?;
    // Eigenvectors of conj(A) are Q Z (Q column-major); conjugate at the end.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].partial_cmp(&d[y]).unwrap());
    let mut vecs = CMat::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            let mut s = ZERO;
            for j in 0..n {
                s += q[j * n + i] * z[j * n + k];
            }
            vecs.set(i, col, s.conj());
        }
    }
    let vals = order.iter().map(|&k| d[k]).collect();
    Ok((vals, vecs))
}

/// Householder reduction of a Hermitian matrix held column-major with its
/// lower triangle referenced. Returns diagonal, real sub-diagonal (last
/// entry zero) and reflector scalars; reflector vectors stay below the
/// sub-diagonal of `a`.
fn hetrd_lower(a: &mut [Complex64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<Complex64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut tau = vec![ZERO; n];
    let mut w = vec![ZERO; n];
    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        let col = (k * n + k + 1)..((k + 1) * n);
        let (alpha, taui) = {
            let x = &mut a[col.clone()];
            larfg(x)
        };
        e[k] = alpha;
        if taui != ZERO {
            a[k * n + k + 1] = ONE;
            // w = tau * A22 * v using the lower triangle of A22.
            for v in w[..m].iter_mut() {
                *v = ZERO;
            }
            let base = (k + 1) * n + (k + 1);
            for j in 0..m {
                let cj = base + j * (n + 1);
                let vj = a[k * n + k + 1 + j];
                let mut acc = a[cj].re * vj;
                let colj = &a[cj + 1..cj + (m - j)];
                let vtail = &a[k * n + k + 2 + j..(k + 1) * n];
                let wtail = &mut w[j + 1..m];
                for ((aij, &vi), wi) in colj.iter().zip(vtail).zip(wtail.iter_mut()) {
                    *wi += aij * vj;
                    acc += aij.conj() * vi;
                }
                w[j] += acc;
            }
            for v in w[..m].iter_mut() {
                *v *= taui;
            }
            let v = &a[k * n + k + 1..(k + 1) * n];
            let dot: Complex64 = w[..m].iter().zip(v).map(|(wi, vi)| wi.conj() * vi).sum();
            let alpha2 = -0.5 * taui * dot;
            for (wi, &vi) in w[..m].iter_mut().zip(v) {
                *wi += alpha2 * vi;
            }
            // A22 -= v w^H + w v^H on the lower triangle.
            let vcopy: Vec<Complex64> = v.to_vec();
            for j in 0..m {
                let cj = base + j * (n + 1);
                let wj = w[j].conj();
                let vj = vcopy[j].conj();
                let colj = &mut a[cj..cj + (m - j)];
                for ((aij, &vi), &wi) in colj.iter_mut().zip(&vcopy[j..]).zip(&w[j..m]) {
                    *aij -= vi * wj + wi * vj;
                }
                a[cj].im = 0.0;
            }
        } else {
            let idx = (k + 1) * n + k + 1;
            a[idx].im = 0.0;
        }
        a[k * n + k + 1] = Complex64::new(e[k], 0.0);
        d[k] = a[k * n + k].re;
        tau[k] = taui;
    }
    if n > 0 {
        d[n - 1] = a[(n - 1) * n + n - 1].re;
    }
    if n > 0 {
        e[n - 1] = 0.0;
    }
    (d, e, tau)
}

/// Elementary reflector: on entry `x = (alpha, x_tail)`. Returns `(beta, tau)`
/// with `H^H (alpha; x_tail) = (beta; 0)`, `H = I - tau v v^H`, and leaves
/// `v_tail` in `x[1..]`.
fn larfg(x: &mut [Complex64]) -> (f64, Complex64) {
    let alpha = x[0];
    let xnorm = x[1..].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if xnorm == 0.0 && alpha.im == 0.0 {
        return (alpha.re, ZERO);
    }
    let mut beta = (alpha.norm_sqr() + xnorm * xnorm).sqrt();
    if alpha.re >= 0.0 {
        beta = -beta;
    }
    let tau = Complex64::new((beta - alpha.re) / beta, -alpha.im / beta);
    let scal = ONE / (alpha - beta);
    for v in x[1..].iter_mut() {
        *v *= scal;
    }
    (beta, tau)
}

/// Accumulates `Q = H(0) H(1) .. H(n-2)` column-major.
fn form_q(a: &[Complex64], tau: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut q = vec![ZERO; n * n];
    for i in 0..n {
        q[i * n + i] = ONE;
    }
    for k in (0..n.saturating_sub(1)).rev() {
        let t = tau[k];
        if t == ZERO {
            continue;
        }
        let mut v = vec![ZERO; n];
        v[k + 1] = ONE;
        for i in k + 2..n {
            v[i] = a[k * n + i];
        }
        // Q[k+1.., k+1..] = (I - t v v^H) Q[k+1.., k+1..]
        for j in k + 1..n {
            let colj = &mut q[j * n..(j + 1) * n];
            let s: Complex64 = (k + 1..n).map(|i| v[i].conj() * colj[i]).sum();
            let s = t * s;
            for i in k + 1..n {
                colj[i] -= s * v[i];
            }
        }
    }
    q
}

/// Real symmetric tridiagonal reduction (lower triangle, column-major view
/// of row-major symmetric storage). Returns diagonal and sub-diagonal.
fn sytrd_lower(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        let c0 = k * n + k + 1;
        let alpha = a[c0];
        let xnorm = a[c0 + 1..(k + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt();
        let (beta, taui) = if xnorm == 0.0 {
            (alpha, 0.0)
        } else {
            let mut beta = (alpha * alpha + xnorm * xnorm).sqrt();
            if alpha >= 0.0 {
                beta = -beta;
            }
            let taui = (beta - alpha) / beta;
            let scal = 1.0 / (alpha - beta);
            for v in a[c0 + 1..(k + 1) * n].iter_mut() {
                *v *= scal;
            }
            (beta, taui)
        };
        e[k] = beta;
        if taui != 0.0 {
            a[c0] = 1.0;
            for v in w[..m].iter_mut() {
                *v = 0.0;
            }
            let base = (k + 1) * n + (k + 1);
            for j in 0..m {
                let cj = base + j * (n + 1);
                let vj = a[c0 + j];
                let mut acc = a[cj] * vj;
                let colj = &a[cj + 1..cj + (m - j)];
                let vtail = &a[c0 + 1 + j..(k + 1) * n];
                let wtail = &mut w[j + 1..m];
                for ((aij, &vi), wi) in colj.iter().zip(vtail).zip(wtail.iter_mut()) {
                    *wi += aij * vj;
                    acc += aij * vi;
                }
                w[j] += acc;
            }
            for v in w[..m].iter_mut() {
                *v *= taui;
            }
            let v: Vec<f64> = a[c0..(k + 1) * n].to_vec();
            let dot: f64 = w[..m].iter().zip(&v).map(|(a, b)| a * b).sum();
            let alpha2 = -0.5 * taui * dot;
            for (wi, &vi) in w[..m].iter_mut().zip(&v) {
                *wi += alpha2 * vi;
            }
            for j in 0..m {
                let cj = base + j * (n + 1);
                let wj = w[j];
                let vj = v[j];
                let colj = &mut a[cj..cj + (m - j)];
                for ((aij, &vi), &wi) in colj.iter_mut().zip(&v[j..]).zip(&w[j..m]) {
                    *aij -= vi * wj + wi * vj;
                }
            }
        }
        a[c0] = beta;
        d[k] = a[k * n + k];
    }
    if n > 0 {
        d[n - 1] = a[(n - 1) * n + n - 1];
        e[n - 1] = 0.0;
    }
    (d, e)
}

/// Implicit-shift QL on a symmetric tridiagonal matrix. `e[i]` couples
/// `d[i]` and `d[i+1]`. When `z` is given (row-major `n x n`), rotations
/// are accumulated into its columns.
pub fn tql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..n {
                        let f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Cyclic Jacobi eigen-decomposition of a small real symmetric matrix.
/// Returns eigenvalues and the row-major eigenvector matrix (columns).
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i][i]).collect(), v)
}

/// Inverse of a small symmetric positive-definite matrix via its eigen-decomposition.
pub fn sym_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (vals, vecs) = jacobi_eigen(a);
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (0..n).map(|k| vecs[i][k] * vecs[j][k] / vals[k]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m.set(i, i, Complex64::new(next(), 0.0));
            for j in i + 1..n {
                let v = Complex64::new(next(), next());
                m.set(i, j, v);
                m.set(j, i, v.conj());
            }
        }
        m
    }

    #[test]
    fn two_by_two() {
        let s = Complex64::new(0.3, -0.4);
        let m = CMat::from_vec(2, vec![ZERO, s, s.conj(), ZERO]);
        let ev = hermitian_eigenvalues(&m).unwrap();
        assert!((ev[0] + 0.5).abs() < 1e-15 && (ev[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eigenpairs_reconstruct() {
        let n = 37;
        let m = random_hermitian(n, 7);
        let (vals, vecs) = hermitian_eigen(&m).unwrap();
        let only = hermitian_eigenvalues(&m).unwrap();
        for (a, b) in vals.iter().zip(&only) {
            assert!((a - b).abs() < 1e-12);
        }
        for k in 0..n {
            let v: Vec<Complex64> = (0..n).map(|i| vecs.get(i, k)).collect();
            let mv = m.mat_vec(&v);
            let res = mv.iter().zip(&v).map(|(a, b)| (a - b * vals[k]).norm()).fold(0.0, f64::max);
            assert!(res < 1e-12, "residual {res}");
        }
        let tr: f64 = vals.iter().sum();
        assert!((tr - m.trace().re).abs() < 1e-12);
    }

    #[test]
    fn real_path_matches_complex_path() {
        let n = 29;
        let m = random_hermitian(n, 3);
        let re: Vec<f64> = (0..n * n).map(|k| {
            let (i, j) = (k / n, k % n);
            if i <= j { m.get(i, j).re } else { m.get(j, i).re }
        }).collect();
        let mc = CMat::from_vec(n, re.iter().map(|&x| Complex64::new(x, 0.0)).collect());
        let a = symmetric_eigenvalues(&re, n).unwrap();
        let b = hermitian_eigenvalues(&mc).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_small() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (mut v, _) = jacobi_eigen(&a);
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
        let inv = sym_inverse(&a);
        assert!((inv[0][0] - 2.0 / 3.0).abs() < 1e-14 && (inv[0][1] + 1.0 / 3.0).abs() < 1e-14);
    }
}
