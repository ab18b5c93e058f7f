//! Special functions and quadrature rules.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `J_0(t), .., J_kmax(t)` for `t >= 0` by downward recurrence, normalized
/// through `J_0 + 2 sum J_2k = 1`.
pub fn bessel_j_array(t: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if t == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let t = t.abs();
    let top = (kmax as f64).max(t.ceil());
    let mut start = (top + 30.0 + 10.0 * top.cbrt()) as usize;
    start += start % 2;
    let mut jp1 = 0.0f64;
    let mut j = 1e-300f64;
    let mut norm = 0.0f64;
    for k in (1..=start).rev() {
        if k <= kmax {
            out[k] = j;
        }
        if k % 2 == 0 {
            norm += 2.0 * j;
        }
        let jm1 = (2.0 * k as f64 / t) * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    out[0] = j;
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Integral representation `J_n(t) = (1/pi) int_0^pi cos(n tau - t sin tau) d tau`.
pub fn bessel_j_integral(n: usize, t: f64) -> f64 {
    let nf = n as f64;
    let panels = 16 + (t.abs() + nf) as usize;
    integrate(|tau| (nf * tau - t * tau.sin()).cos(), 0.0, PI, panels, 1e-15, 1e-14)
        .map(|v| v / PI)
        .unwrap_or(f64::NAN)
}

/// Arcsine on the branch analytic in the upper half-plane with `Im >= 0`,
/// extended to the real axis by continuity from above.
pub fn casin_upper(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re.abs() > 1.0 {
        return Complex64::new(z.re.signum() * FRAC_PI_2, z.re.abs().acosh());
    }
    -I * (I * z + (1.0 - z * z).sqrt()).ln()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_DEPTH: usize = 30;
const NOISE: f64 = 1e-11;
const ROUNDOFF: f64 = 200.0 * f64::EPSILON;

/// One 15-point Kronrod panel on `[a, b]` for a vector-valued integrand.
/// Returns the Kronrod estimate and the max-norm of Kronrod minus Gauss.
fn gk15_vec<F>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [Complex64]) -> (Vec<Complex64>, f64, f64)
where
    F: FnMut(f64, &mut [Complex64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![Complex64::new(0.0, 0.0); dim];
    let mut g = vec![Complex64::new(0.0, 0.0); dim];
    let mut mass = 0.0f64;
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let nodes: &[f64] = if j == 7 { &[0.0] } else { &[-1.0, 1.0] };
        for &s in nodes {
            f(c + s * h * x, buf);
            for i in 0..dim {
                mass = mass.max(buf[i].norm() * wk);
                k[i] += buf[i] * wk;
                if j % 2 == 1 {
                    g[i] += buf[i] * WG[j / 2];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for i in 0..dim {
        k[i] *= h;
        g[i] *= h;
        err = err.max((k[i] - g[i]).norm());
    }
    (k, err, mass * h.abs())
}

/// Adaptive Gauss-Kronrod integration of a vector-valued integrand on
/// `[a, b]`, starting from `panels` equal panels. A panel is accepted when
/// its error estimate is below `max(abs_tol * width / (b - a), rel_tol * |panel|)`.
pub fn integrate_vec<F>(
    mut f: F,
    a: f64,
    b: f64,
    dim: usize,
    panels: usize,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Vec<Complex64>>
where
    F: FnMut(f64, &mut [Complex64]),
{
    let mut total = vec![Complex64::new(0.0, 0.0); dim];
    if b == a || dim == 0 {
        return Ok(total);
    }
    let len = b - a;
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    let panels = panels.max(1);
    let mut stack: Vec<(f64, f64, usize, f64)> = (0..panels)
        .rev()
        .map(|i| {
            let lo = a + len * i as f64 / panels as f64;
            let hi = a + len * (i + 1) as f64 / panels as f64;
            (lo, hi, 0, f64::INFINITY)
        })
        .collect();
    let mut worst = 0.0f64;
    while let Some((lo, hi, depth, parent_err)) = stack.pop() {
        let (k, err, mass) = gk15_vec(&mut f, lo, hi, dim, &mut buf);
        let scale = k.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let tol = (abs_tol * (hi - lo) / len.abs()).max(rel_tol * scale).max(ROUNDOFF * mass);
        // Halving a panel of a smooth integrand shrinks the estimate by
        // orders of magnitude; stagnation means evaluation noise.
        let stalled = err > 0.25 * parent_err && err <= NOISE * scale.max(mass);
        if err <= tol || stalled || depth >= MAX_DEPTH {
            if err > tol {
                worst = worst.max(err / scale.max(f64::MIN_POSITIVE));
            }
            for i in 0..dim {
                total[i] += k[i];
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1, err));
            stack.push((lo, mid, depth + 1, err));
        }
    }
    if worst > 1e-8 {
        return Err(Error::Quadrature(format!(
            "relative panel error {worst:e} after maximal refinement"
        )));
    }
    Ok(total)
}

/// Scalar adaptive Gauss-Kronrod integration.
pub fn integrate<F>(mut f: F, a: f64, b: f64, panels: usize, abs_tol: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let v = integrate_vec(
        |x, out: &mut [Complex64]| out[0] = Complex64::new(f(x), 0.0),
        a,
        b,
        1,
        panels,
        abs_tol,
        rel_tol,
    )?;
    Ok(v[0].re)
}

/// Scalar complex adaptive Gauss-Kronrod integration.
pub fn integrate_complex<F>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Complex64>
where
    F: FnMut(f64) -> Complex64,
{
    let v = integrate_vec(
        |x, out: &mut [Complex64]| out[0] = f(x),
        a,
        b,
        1,
        panels,
        abs_tol,
        rel_tol,
    )?;
    Ok(v[0])
}

/// Volume of the unit ball in dimension `d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        4 => PI * PI / 2.0,
        _ => PI.powf(d as f64 / 2.0) / gamma_fn(d as f64 / 2.0 + 1.0),
    }
}

/// Surface area of the unit sphere in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

/// Lanczos approximation of the gamma function for positive arguments.
pub fn gamma_fn(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}
