//! Acceptance suite. Prints one line per criterion and fails if a blocking
//! criterion fails outside the documented deviation list.
//!
//! `BANDMESO_ACCEPTANCE_FULL=1` runs the slope sweep at its full sample count.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use bandmeso::cheb::{a_coefficients, cheb_u_matrices, gamma_closed, nb_power_direct, verify_general_recursion, ChebCoefficients};
use bandmeso::ensemble::{sample, EnsembleSpec, Law, SubLaw};
use bandmeso::lattice::{
    build_general_profile, build_step_profile, profile_constants, Damping, Density, LatticeSpec, Phase, ProfileConstants,
};
use bandmeso::par::Execution;
use bandmeso::special::gauss_legendre;
use bandmeso::stats::{k_point_from_table, log_log_fit, sample_table, EnergyWindow, Observable, SampleTable};
use bandmeso::testfn::TestFunction;
use bandmeso::theory::{
    constants_kb, lclt_diagonal, nu, theta_predict, trace_asymptotic, trace_resolvent, v_main_exact, AsymptoticVariant,
    Regime, TraceGeometry,
};
use bandmeso::Complex64;

/// Criteria expected to fail at desk scale; see the project notes.
const KNOWN_DEVIATIONS: &[u32] = &[7];

/// Advisory criteria never fail the run.
const ADVISORY: &[u32] = &[10];

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn run(id: u32, name: &'static str, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t0 = Instant::now();
    let (pass, detail) = f();
    Outcome { id, name, pass, detail, elapsed: t0.elapsed() }
}

fn exec() -> Execution {
    Execution::from_env()
}

fn full_run() -> bool {
    std::env::var("BANDMESO_ACCEPTANCE_FULL").map(|v| v == "1").unwrap_or(false)
}

fn c1_chebyshev_identity() -> (bool, String) {
    let t0 = Instant::now();
    let lat = LatticeSpec::new(1, 16, 3).unwrap();
    let profile = build_step_profile(lat).unwrap();
    let r = 1.0 / (profile.m - 1.0);
    let mut worst: f64 = 0.0;
    for law in [Law::UnimodularReal, Law::UnimodularComplex] {
        let spec = EnsembleSpec::new(profile.clone(), law, 11);
        for seed in 0..20 {
            let h = sample(&spec, seed).h;
            let u = cheb_u_matrices(10, &h.scale(Complex64::new(0.5, 0.0)));
            for n in 0..=10 {
                let lhs = nb_power_direct(&h, n).unwrap();
                let rhs = if n >= 2 { u[n].sub(&u[n - 2].scale(Complex64::new(r, 0.0))) } else { u[n].clone() };
                worst = worst.max(lhs.max_abs_diff(&rhs));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    (worst < 1e-9 && secs < 10.0, format!("max residual {worst:.2e} (< 1e-9), {secs:.1} s (< 10 s)"))
}

fn c2_general_recursion() -> (bool, String) {
    let t0 = Instant::now();
    let lat = LatticeSpec::new(1, 10, 2).unwrap();
    let profile = build_step_profile(lat).unwrap();
    let spec = EnsembleSpec::new(profile, Law::GeneralSymmetric { sub_law: SubLaw::Gaussian }, 5);
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let h = sample(&spec, seed).h;
        worst = worst.max(verify_general_recursion(&h, 5).unwrap().max_residual());
    }
    let secs = t0.elapsed().as_secs_f64();
    (worst < 1e-8 && secs < 60.0, format!("max residual {worst:.2e} (< 1e-8), {secs:.1} s (< 60 s)"))
}

fn c3_coefficient_completeness() -> (bool, String) {
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    for m in [10.0, 50.0, 200.0] {
        for t in [1.0, 5.0, 10.0, 20.0] {
            let nmax = (t as usize) + 80;
            let s: f64 = a_coefficients(t, nmax, 1.0 / (m - 1.0)).iter().map(|a| a.norm_sqr()).sum();
            let dev = (s - 1.0).abs();
            ok &= dev <= 5.0 / m;
            worst_ratio = worst_ratio.max(dev * m / 5.0);
        }
    }
    (ok, format!("max |sum |a_n|^2 - 1| / (5/M) = {worst_ratio:.3}"))
}

/// Gauss-Legendre panels of width 0.5 on `[0, 200]`.
fn laplace_quadrature(e: f64, eta: f64, r: f64, nmax: usize) -> Vec<Complex64> {
    let (x, w) = gauss_legendre(20);
    let mut acc = vec![Complex64::new(0.0, 0.0); nmax + 1];
    let h = 0.5;
    for p in 0..400 {
        let a = p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            let t = a + 0.5 * h * (xi + 1.0);
            let k = Complex64::new(-eta * t, e * t).exp() * (0.5 * h * wi);
            for (o, an) in acc.iter_mut().zip(a_coefficients(t, nmax, r)) {
                *o += k * an;
            }
        }
    }
    acc
}

fn c4_cauchy_gamma() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for m in [10.0, 50.0] {
        let r = 1.0 / (m - 1.0);
        for eta in [0.1, 0.3] {
            for e in [-0.8, -0.4, 0.0, 0.4, 0.8] {
                let q = laplace_quadrature(e, eta, r, 8);
                for (n, qn) in q.iter().enumerate() {
                    let g = gamma_closed(n, Complex64::new(e, eta), r);
                    worst = worst.max((qn - g).norm());
                }
            }
        }
    }
    (worst < 1e-6, format!("max |quadrature - closed form| = {worst:.2e} (< 1e-6)"))
}

fn c5_constants() -> (bool, String) {
    let k_ref = [-PI / 2f64.sqrt(), 0.0, 2f64.sqrt() * PI * PI];
    let b_ref = [PI / 2.0, PI, PI * PI];
    let mut ok = true;
    let (mut dk, mut db): (f64, f64) = (0.0, 0.0);
    for d in 1..=3 {
        let kb = constants_kb(d).unwrap();
        dk = dk.max((kb.k_quadrature - k_ref[d - 1]).abs());
        db = db.max((kb.b_quadrature - b_ref[d - 1]).abs());
    }
    ok &= dk < 1e-6 && db < 1e-8;
    let mut worst_d: f64 = 0.0;
    let mut worst_q: f64 = 0.0;
    for w in [20usize, 40, 80] {
        for d in 1..=3 {
            let l = if d == 3 { 2 * w } else { 4 * w };
            let c = profile_constants(&build_step_profile(LatticeSpec::new(d, l, w).unwrap()).unwrap()).unwrap();
            let target = 1.0 / (2.0 * (d as f64 + 2.0));
            for i in 0..d {
                let dev = (c.d[i][i] - target).abs() * w as f64 / 2.0;
                worst_d = worst_d.max(dev);
            }
            if d == 2 {
                worst_q = worst_q.max((c.q.unwrap() - 2.0 / 3.0).abs() * w as f64 / 2.0);
            }
        }
    }
    ok &= worst_d <= 1.0 && worst_q <= 1.0;
    (
        ok,
        format!(
            "K dev {dk:.1e}, B dev {db:.1e}; step D dev {worst_d:.3} and Q dev {worst_q:.3} in units of 2/W (<= 1)"
        ),
    )
}

fn c6_trace_asymptotics() -> (bool, String) {
    let t0 = Instant::now();
    let zeta = Complex64::new(0.0, -1.0);
    let p1 = build_step_profile(LatticeSpec::new(1, 4000, 10).unwrap()).unwrap().unit_normalized();
    let g1 = TraceGeometry::from_profile(&p1).unwrap();
    let mut devs = Vec::new();
    for u in [1e-2, 3e-3] {
        let alpha = 1.0 - u * zeta;
        let exact = trace_resolvent(&p1, alpha, 2).unwrap();
        let asym = trace_asymptotic(&g1, u, zeta, AsymptoticVariant::Leading).unwrap();
        devs.push((exact - asym).norm() / asym.norm());
    }
    let p2 = build_step_profile(LatticeSpec::new(2, 300, 6).unwrap()).unwrap().unit_normalized();
    let g2 = TraceGeometry::from_profile(&p2).unwrap();
    let u2 = 0.05;
    let exact2 = trace_resolvent(&p2, 1.0 - u2 * zeta, 2).unwrap();
    let asym2 = trace_asymptotic(&g2, u2, zeta, AsymptoticVariant::TwoTermD2).unwrap();
    let dev2 = (exact2 - asym2).norm() / asym2.norm();
    let secs = t0.elapsed().as_secs_f64();
    let ok = devs.iter().all(|&d| d <= 0.10) && devs[1] <= devs[0] && dev2 <= 0.15 && secs < 30.0;
    (
        ok,
        format!(
            "d=1 rel dev {:.3} (u=1e-2), {:.3} (u=3e-3), <= 0.10 and decreasing; d=2 two-term rel dev {dev2:.3} (<= 0.15); {secs:.1} s",
            devs[0], devs[1]
        ),
    )
}

fn c7_semicircle() -> (bool, String) {
    let profile = build_step_profile(LatticeSpec::new(1, 512, 16).unwrap()).unwrap().unit_normalized();
    let spec = EnsembleSpec::new(profile, Law::UnimodularReal, 7);
    let eta = 0.1;
    let energies = [0.0, 0.3, -0.3, 0.6, -0.6];
    let obs: Vec<Observable> =
        energies.iter().map(|&e| Observable { phi: TestFunction::Gaussian, e, eta }).collect();
    let tab = sample_table(&spec, &obs, 200, exec()).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (j, &e) in energies.iter().enumerate() {
        let (m, se) = tab.mean_with_error(j);
        let dev = (m - 2.0 * PI * nu(e).unwrap()).abs();
        let tol = 3.0 * se + 0.5 * eta;
        ok &= dev <= tol;
        parts.push(format!("E={e}: {dev:.3}/{tol:.3}"));
    }
    (ok, format!("|mean Y - 2 pi nu| / allowance: {}", parts.join(", ")))
}

/// Shared table for criteria 8 and 9: columns `E = 0, -0.225, 0.225`.
struct DumbbellRun {
    table: SampleTable,
    profile: bandmeso::lattice::ProfileSpec,
}

const DUMBBELL_ETA: f64 = 0.3;
const DUMBBELL_SAMPLES: usize = 20_000;

fn dumbbell_run() -> DumbbellRun {
    let profile = build_step_profile(LatticeSpec::new(1, 64, 10).unwrap()).unwrap();
    let spec = EnsembleSpec::new(profile.clone(), Law::UnimodularComplex, 8);
    let obs: Vec<Observable> = [0.0, -0.225, 0.225]
        .iter()
        .map(|&e| Observable { phi: TestFunction::Cauchy, e, eta: DUMBBELL_ETA })
        .collect();
    let table = sample_table(&spec, &obs, DUMBBELL_SAMPLES, exec()).unwrap();
    DumbbellRun { table, profile }
}

fn c8_dumbbell(run: &DumbbellRun) -> (bool, String) {
    let coeffs = ChebCoefficients::with_eta(run.profile.m, DUMBBELL_ETA);
    let phi = TestFunction::Cauchy;
    let mut ok = true;
    let mut parts = Vec::new();
    for (omega, j, k) in [(0.0, 0usize, 0usize), (0.45, 1, 2)] {
        let window = EnergyWindow::centred(0.0, omega, DUMBBELL_ETA).unwrap();
        let v = v_main_exact(&run.profile, &phi, &phi, &window, &coeffs, &Law::UnimodularComplex).unwrap().value;
        let c = run.table.correlation(j, k).unwrap();
        let tol = 3.0 * c.f_eta_stderr + 0.15 * v.abs();
        let dev = (c.f_eta - v).abs();
        ok &= dev <= tol;
        parts.push(format!("omega={omega}: MC {:.3} +- {:.3} vs V_main {v:.3} (dev {dev:.3}, allowance {tol:.3})", c.f_eta, c.f_eta_stderr));
    }
    (ok, parts.join("; "))
}

fn c9_wick(run: &DumbbellRun) -> (bool, String) {
    let k3 = k_point_from_table(&run.table, &[0, 0, 0]).unwrap();
    let third = k3.moment.abs() <= 4.0 * k3.moment_stderr;
    let k4 = k_point_from_table(&run.table, &[1, 2, 1, 2]).unwrap();
    let fourth = (k4.moment - k4.wick).abs() <= 4.0 * k4.moment_stderr + 0.2 * k4.wick.abs();
    (
        third && fourth,
        format!(
            "k=3 moment {:.3e} +- {:.1e}; k=4 moment {:.4e} +- {:.1e} vs pairing sum {:.4e}",
            k3.moment, k3.moment_stderr, k4.moment, k4.moment_stderr, k4.wick
        ),
    )
}

fn c10_slopes() -> (bool, String) {
    let n_samples = if full_run() { 40_000 } else { 1_200 };
    let lat = LatticeSpec::new(1, 256, 12).unwrap();
    let profile = build_step_profile(lat).unwrap();
    let spec = EnsembleSpec::new(profile, Law::UnimodularComplex, 10);
    let etas = [0.12, 0.2, 0.33];
    let obs: Vec<Observable> = etas.iter().map(|&eta| Observable { phi: TestFunction::Cauchy, e: 0.0, eta }).collect();
    let tab = sample_table(&spec, &obs, n_samples, exec()).unwrap();
    let lw = (lat.l * lat.w) as f64;
    let (mut theta, mut sigma) = (Vec::new(), Vec::new());
    for j in 0..etas.len() {
        let c = tab.correlation(j, j).unwrap();
        theta.push(lw * c.ratio);
        sigma.push(lw * c.ratio_stderr);
    }
    let fit = log_log_fit(&etas, &theta, Some(&sigma)).unwrap();
    let inside = (-1.8..=-1.2).contains(&fit.slope);
    let status = if fit.ci_low >= -1.8 && fit.ci_high <= -1.2 {
        "confirmed"
    } else if inside {
        "point estimate in band"
    } else {
        "degraded; exact V_main comparison is binding"
    };
    (
        inside,
        format!(
            "slope {:.3} [{:.3}, {:.3}] from {n_samples} samples (band [-1.8, -1.2]); {status}",
            fit.slope, fit.ci_low, fit.ci_high
        ),
    )
}

fn c11_lclt() -> (bool, String) {
    let profile = build_step_profile(LatticeSpec::new(1, 1024, 8).unwrap()).unwrap().unit_normalized();
    let b_max = (1024 / 8usize).pow(2);
    let diag = lclt_diagonal(&profile, b_max);
    let scaled = |b: usize| diag[b] * profile.m * (b as f64).sqrt();
    let reference = scaled(4);
    let (b_star, worst) = (1..=b_max).map(|b| (b, scaled(b))).fold((0, 0.0), |a, x| if x.1 > a.1 { x } else { a });
    (worst <= 3.0 * reference, format!("max (S^b)_00 M b^1/2 = {worst:.4} at b={b_star}, 3x value at b=4 = {:.4}", 3.0 * reference))
}

fn with_sigma(c: &ProfileConstants, sigma: f64) -> ProfileConstants {
    let mut c = c.clone();
    c.sigma = Some(sigma);
    c
}

fn c12_sigma_interpolation() -> (bool, String) {
    let lat = LatticeSpec::new(1, 200, 10).unwrap();
    let damping = Damping::Bump { radius: 0.5 };
    let mut sigma_dev: f64 = 0.0;
    for lambda in [0.0, 0.3, 0.7, 1.0] {
        for varphi in [0.0, 0.25, 0.5, 1.0] {
            let p = build_general_profile(lat, &Density::Gaussian, &Phase::ClippedSine, &damping, lambda, varphi).unwrap();
            let c = profile_constants(&p).unwrap();
            // Direct lattice sums with g(x) = sin(pi x) on the unit ball and h(x) = s e^{1-s}, s = 4x^2.
            let (mut dd, mut w, mut g2, mut ups) = (0.0, 0.0, 0.0, 0.0);
            for x in 0..lat.l {
                let s = p.row()[x];
                let z = lat.scaled(x)[0];
                let g = if z.abs() <= 1.0 { (PI * z).sin() } else { 0.0 };
                let q = z * z / 0.25;
                let h = q * (1.0 - q).exp();
                dd += 0.5 * z * z * s;
                w += 0.5 * z * g * s;
                g2 += 0.5 * g * g * s;
                ups += h * s;
            }
            let want = (g2 - w * w / dd) * lambda * lambda + ups * varphi;
            sigma_dev = sigma_dev.max((c.sigma_tilde - want).abs());
        }
    }
    let mut ratio_dev: f64 = 0.0;
    let phi = TestFunction::Cauchy;
    for d in [1usize, 3] {
        let l = if d == 1 { 200 } else { 24 };
        let p = build_general_profile(LatticeSpec::new(d, l, 4).unwrap(), &Density::Gaussian, &Phase::Zero, &Damping::Zero, 0.0, 0.0)
            .unwrap();
        let base = profile_constants(&p).unwrap();
        let w0 = EnergyWindow::centred(0.1, 0.0, 0.05).unwrap();
        let wl = EnergyWindow::centred(0.1, 0.4, 0.05).unwrap();
        for (window, regime_gen, regime_beta) in
            [(w0, Regime::GeneralOmegaZeroD123, Regime::OmegaZeroD123), (wl, Regime::GeneralOmegaLargeD123, Regime::OmegaLargeD123)]
        {
            let low = theta_predict(&window, &with_sigma(&base, 0.0), &phi, &phi, regime_gen, None).unwrap().value;
            let high = theta_predict(&window, &with_sigma(&base, 1e40), &phi, &phi, regime_gen, None).unwrap().value;
            let b1 = theta_predict(&window, &base, &phi, &phi, regime_beta, Some(1)).unwrap().value;
            let b2 = theta_predict(&window, &base, &phi, &phi, regime_beta, Some(2)).unwrap().value;
            ratio_dev = ratio_dev.max((low / high - 2.0).abs()).max((b1 / b2 - 2.0).abs());
        }
    }
    (
        sigma_dev < 1e-12 && ratio_dev < 1e-10,
        format!("max |sigma~ - (Delta lambda^2 + Upsilon varphi)| = {sigma_dev:.1e}; max |ratio - 2| = {ratio_dev:.1e}"),
    )
}

#[test]
fn acceptance() {
    let mut outcomes = vec![
        run(1, "chebyshev identity", c1_chebyshev_identity),
        run(2, "general recursion", c2_general_recursion),
        run(3, "coefficient completeness", c3_coefficient_completeness),
        run(4, "cauchy gamma identity", c4_cauchy_gamma),
        run(5, "constants", c5_constants),
        run(6, "trace asymptotics", c6_trace_asymptotics),
        run(7, "semicircle", c7_semicircle),
    ];
    let t0 = Instant::now();
    let shared = dumbbell_run();
    let table_time = t0.elapsed();
    let mut c8 = run(8, "dumbbell comparison", || c8_dumbbell(&shared));
    c8.elapsed += table_time;
    outcomes.push(c8);
    outcomes.push(run(9, "wick factorization", || c9_wick(&shared)));
    outcomes.push(run(10, "power-law slope", c10_slopes));
    outcomes.push(run(11, "local clt decay", c11_lclt));
    outcomes.push(run(12, "sigma interpolation", c12_sigma_interpolation));

    let mut blocking = Vec::new();
    for o in &outcomes {
        let tag = match (o.pass, ADVISORY.contains(&o.id), KNOWN_DEVIATIONS.contains(&o.id)) {
            (true, _, _) => "PASS",
            (false, true, _) => "FAIL (advisory)",
            (false, false, true) => "FAIL (known deviation)",
            (false, false, false) => {
                blocking.push(o.id);
                "FAIL"
            }
        };
        println!("criterion {:>2} {:<26} {tag}: {} [{:.1} s]", o.id, o.name, o.detail, o.elapsed.as_secs_f64());
    }
    assert!(blocking.is_empty(), "blocking criteria failed: {blocking:?}");
}
