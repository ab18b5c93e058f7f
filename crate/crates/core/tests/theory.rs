use std::f64::consts::PI;

use bandmeso::cheb::{gamma_closed, ChebCoefficients};
use bandmeso::ensemble::Law;
use bandmeso::lattice::{
    build_general_profile, build_step_profile, profile_constants, Damping, Density, LatticeSpec, Phase, ProfileSpec,
};
use bandmeso::special::{casin_upper, gamma_fn};
use bandmeso::stats::EnergyWindow;
use bandmeso::testfn::TestFunction;
use bandmeso::theory::{
    compressibility_check, constants_kb, d_eta_exact, dumbbell_sum, nu, s_int_verify, theta_exact, theta_predict,
    trace_asymptotic, trace_resolvent, v_d, v_main_exact, v_main_from_tables, AsymptoticVariant, Regime,
    TraceGeometry,
};
use bandmeso::Complex64;

fn step(d: usize, l: usize, w: usize) -> ProfileSpec {
    build_step_profile(LatticeSpec::new(d, l, w).unwrap()).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(a.abs())
}

#[test]
fn v_d_closed_forms() {
    let (c, g) = (TestFunction::Cauchy, TestFunction::Gaussian);
    for a in [0.0, 0.5, 3.0] {
        let want = PI.sqrt() / (2.0f64 + a).powf(1.5);
        assert!(close(v_d(&c, &c, 1, a).unwrap(), want, 1e-9), "a={a}");
    }
    assert!(close(v_d(&g, &g, 2, 0.0).unwrap(), PI.sqrt(), 1e-9));
    assert!(close(v_d(&g, &g, 3, 0.0).unwrap(), gamma_fn(0.25), 1e-8));
    let v4 = v_d(&c, &g, 4, 0.0).unwrap();
    assert!(close(v4, 2.0, 1e-14));
    assert!(v_d(&c, &c, 5, 0.0).is_err());
}

#[test]
fn v_d_is_bilinear_and_symmetric() {
    let (c, g) = (TestFunction::Cauchy, TestFunction::Gaussian);
    let mix = TestFunction::Combination { parts: vec![(0.3, c.clone()), (1.7, g.clone())] };
    for d in 1..=3 {
        let lhs = v_d(&mix, &c, d, 0.2).unwrap();
        let rhs = 0.3 * v_d(&c, &c, d, 0.2).unwrap() + 1.7 * v_d(&g, &c, d, 0.2).unwrap();
        assert!(close(lhs, rhs, 1e-8), "d={d}");
        assert!(close(v_d(&g, &c, d, 0.2).unwrap(), v_d(&c, &g, d, 0.2).unwrap(), 1e-10));
    }
}

#[test]
fn kb_relation() {
    for d in 1..=3 {
        let kb = constants_kb(d).unwrap();
        let rel = 2.0 * kb.b * Complex64::new(0.0, 1.0).powf(d as f64 / 2.0 - 2.0).re;
        assert!((kb.k - rel).abs() < 1e-12, "d={d}");
        assert!((kb.k_quadrature - kb.k).abs() < 1e-8);
        assert!((kb.b_quadrature - kb.b).abs() < 1e-8);
    }
    assert!((constants_kb(2).unwrap().b_quadrature - PI).abs() < 1e-8);
    assert!(constants_kb(4).is_err());
}

#[test]
fn dumbbell_sum_matches_naive_quadruple_sum() {
    let g1: Vec<f64> = (0..40).map(|n| (0.3 * n as f64).cos() * 0.9f64.powi(n)).collect();
    let g2: Vec<f64> = (0..40).map(|n| (0.7 * n as f64 + 0.2).sin() * 0.85f64.powi(n)).collect();
    let traces: Vec<f64> = (0..40).map(|m| 50.0 * 0.8f64.powi(m)).collect();
    let (i, k) = (1.05f64, 18);
    let mut want = 0.0;
    for m in 1..=k {
        if m == 2 {
            continue;
        }
        for b1 in 0..=k {
            for b2 in 0..=k {
                if b1 + b2 + m > k {
                    continue;
                }
                let (n1, n2) = (2 * b1 + m, 2 * b2 + m);
                if n1 < 40 && n2 < 40 {
                    want += m as f64 * traces[m] * g1[n1] * g2[n2] * i.powi((b1 + b2) as i32);
                }
            }
        }
    }
    assert!(close(dumbbell_sum(&g1, &g2, &traces, i, k), want, 1e-12));
}

#[test]
fn cauchy_vmain_from_closed_form_coefficients() {
    let p = step(1, 64, 10);
    let r = 1.0 / (p.m - 1.0);
    let eta = 0.3;
    let coeffs = ChebCoefficients::with_eta(p.m, eta);
    let phi = TestFunction::Cauchy;
    for (e1, e2) in [(0.0, 0.0), (-0.225, 0.225)] {
        let w = EnergyWindow::new(e1, e2, eta, 0.1).unwrap();
        let exact = v_main_exact(&p, &phi, &phi, &w, &coeffs, &Law::UnimodularComplex).unwrap();
        let n = exact.cutoff + 2;
        let g = |e: f64| -> Vec<f64> { (0..=n).map(|k| 2.0 * gamma_closed(k, Complex64::new(e, eta), r).re).collect() };
        let closed = v_main_from_tables(&p, &g(e1), &g(e2), exact.cutoff, &Law::UnimodularComplex);
        assert!(close(exact.value, closed.value, 1e-7), "{} vs {}", exact.value, closed.value);
    }
}

#[test]
fn vmain_law_structure_and_exchange() {
    let p = step(1, 48, 6);
    let coeffs = ChebCoefficients::with_eta(p.m, 0.3);
    let (c, g) = (TestFunction::Cauchy, TestFunction::Gaussian);
    let w = EnergyWindow::new(-0.1, 0.2, 0.3, 0.1).unwrap();
    let b2 = v_main_exact(&p, &c, &g, &w, &coeffs, &Law::UnimodularComplex).unwrap();
    let b1 = v_main_exact(&p, &c, &g, &w, &coeffs, &Law::UnimodularReal).unwrap();
    assert_eq!(b2.t_part, 0.0);
    assert!(close(b1.value, 2.0 * b2.value, 1e-14));
    let swapped = EnergyWindow::new(-0.1, 0.2, 0.3, 0.1).unwrap();
    let ex = v_main_exact(&p, &g, &c, &swapped, &coeffs, &Law::UnimodularComplex);
    // exchange needs E1 <= E2, so compare with mirrored energies
    let mirrored = EnergyWindow::new(-0.2, 0.1, 0.3, 0.1).unwrap();
    let mir = v_main_exact(&p, &g, &c, &mirrored, &coeffs, &Law::UnimodularComplex).unwrap();
    assert!(ex.is_ok());
    assert!(close(mir.value, b2.value, 1e-9), "{} vs {}", mir.value, b2.value);
    let mix = TestFunction::Combination { parts: vec![(0.5, c.clone()), (2.0, g.clone())] };
    let lin = v_main_exact(&p, &mix, &g, &w, &coeffs, &Law::UnimodularComplex).unwrap();
    let cg = v_main_exact(&p, &c, &g, &w, &coeffs, &Law::UnimodularComplex).unwrap();
    let gg = v_main_exact(&p, &g, &g, &w, &coeffs, &Law::UnimodularComplex).unwrap();
    assert!(close(lin.value, 0.5 * cg.value + 2.0 * gg.value, 1e-8));
}

#[test]
fn theta_exact_normalization() {
    let p = step(1, 64, 10);
    let coeffs = ChebCoefficients::with_eta(p.m, 0.3);
    let phi = TestFunction::Cauchy;
    let w = EnergyWindow::new(0.0, 0.0, 0.3, 0.1).unwrap();
    let v = v_main_exact(&p, &phi, &phi, &w, &coeffs, &Law::UnimodularComplex).unwrap().value;
    let th = theta_exact(&p, &phi, &phi, &w, &coeffs, &Law::UnimodularComplex).unwrap().value;
    let ey = 2.0 * PI * nu(0.0).unwrap();
    assert!(close(th, 640.0 / (64.0 * 64.0) * v / (ey * ey), 1e-14));
}

#[test]
fn d_eta_matches_continuum_integral() {
    let (l, w) = (2000usize, 10usize);
    let lat = LatticeSpec::new(1, l, w).unwrap();
    let p = build_general_profile(lat, &Density::Gaussian, &Phase::Zero, &Damping::Zero, 0.0, 0.0).unwrap().unit_normalized();
    let win = EnergyWindow::new(-0.25, 0.25, 0.01, 0.1).unwrap();
    let got = d_eta_exact(&p, &win).unwrap().value;
    let a1 = casin_upper(Complex64::new(win.e1, win.eta));
    let a2 = casin_upper(Complex64::new(win.e2, win.eta));
    let i = Complex64::new(0.0, 1.0);
    let (al, alp) = ((i * (a1 - a2.conj())).exp(), (i * (a1 + a2)).exp());
    let f = |q: f64| {
        let fh = (-q * q / 2.0).exp();
        (al * fh / (1.0 - al * fh).powu(2) - alp * fh / (1.0 + alp * fh).powu(2)).re
    };
    // composite Simpson on [-40, 40]
    let n = 200_000;
    let h = 80.0 / n as f64;
    let mut s = f(-40.0) + f(40.0);
    for k in 1..n {
        s += f(-40.0 + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let integral = s * h / 3.0;
    let (e1, e2) = (win.e1, win.e2);
    let ratio = l as f64 / w as f64;
    let f2 = 1.0 / (2.0 * PI.sqrt());
    let want = ratio / (2.0 * PI) * 2.0 * integral - 8.0 * ratio * (1.0 - 2.0 * e1 * e1) * (1.0 - 2.0 * e2 * e2) * f2;
    assert!(close(got, want, 0.05), "{got} vs {want}");
}

#[test]
fn d_eta_first_term_dominates_as_omega_shrinks() {
    let p = step(1, 4000, 10).unit_normalized();
    let mut prev = 0.0;
    for omega in [0.3, 0.1, 0.03] {
        let win = EnergyWindow::centred(0.1, omega, 0.002).unwrap();
        let t = d_eta_exact(&p, &win).unwrap();
        let dom = t.term1.abs() / (t.term2.abs() + t.term3.abs());
        assert!(dom > prev, "omega={omega}: {dom} <= {prev}");
        prev = dom;
    }
    let edge = 0.5f64.sqrt();
    let win = EnergyWindow::new(edge - 0.2, edge, 0.01, 0.1).unwrap();
    let t = d_eta_exact(&p, &win).unwrap();
    assert!(t.term3.abs() < 1e-9 * t.term1.abs());
}

#[test]
fn exact_trace_approaches_asymptotics_with_volume() {
    let zeta = Complex64::new(0.0, -1.0);
    let u = 1e-2;
    let dev = |l: usize| {
        let p = step(1, l, 10).unit_normalized();
        let g = TraceGeometry::from_profile(&p).unwrap();
        let exact = trace_resolvent(&p, 1.0 - u * zeta, 2).unwrap();
        let asym = trace_asymptotic(&g, u, zeta, AsymptoticVariant::Leading).unwrap();
        (exact - asym).norm() / asym.norm()
    };
    let (small, large) = (dev(500), dev(4000));
    assert!(large <= 0.7 * small, "{large} vs {small}");
}

#[test]
fn d4_log_prediction_plug_in() {
    let p = step(4, 8, 2);
    let c = profile_constants(&p).unwrap();
    let phi = TestFunction::Cauchy;
    let win = EnergyWindow::new(0.0, 0.0, 1e-2, 0.1).unwrap();
    let got = theta_predict(&win, &c, &phi, &phi, Regime::OmegaZeroD4, Some(2)).unwrap().value;
    let nu0 = 2.0 / PI;
    let want = 36.0 / (2.0 * PI.powi(6) * nu0.powi(4)) * 2.0 * (1e-2f64).ln().abs();
    assert!(close(got, want, 1e-12));
}

#[test]
fn d2_smooth_log_coefficient() {
    let p = step(2, 24, 3);
    let c = profile_constants(&p).unwrap();
    let g = TestFunction::Gaussian;
    let at = |omega: f64| {
        let win = EnergyWindow::centred(0.0, omega, omega / 4.0).unwrap();
        theta_predict(&win, &c, &g, &g, Regime::OmegaLargeD2C2, Some(2)).unwrap().value
    };
    let pre = 8.0 / (2.0 * PI.powi(5) * (2.0 / PI).powi(4));
    let slope = (at(0.4) - at(0.1)) / ((0.4f64).ln() - (0.1f64).ln());
    assert!(close(slope, pre / 3.0, 1e-12));
    let win = EnergyWindow::centred(0.0, 0.4, 0.1).unwrap();
    assert!(theta_predict(&win, &c, &TestFunction::Cauchy, &g, Regime::OmegaLargeD2C2, Some(2)).is_err());
}

#[test]
fn compressibility_scales_with_band_volume() {
    let phi = TestFunction::Gaussian;
    let small = compressibility_check(&step(2, 32, 4), &phi, 0.1, 0.0, 2).unwrap();
    let large = compressibility_check(&step(2, 64, 8), &phi, 0.1, 0.0, 2).unwrap();
    assert!(close(large.ratio / small.ratio, 0.25, 1e-12));
    let ht = build_general_profile(LatticeSpec::new(1, 400, 10).unwrap(), &Density::CauchyTail, &Phase::Zero, &Damping::Zero, 0.0, 0.0)
        .unwrap();
    let a = compressibility_check(&ht, &phi, 0.1, 0.0, 2).unwrap();
    let b = compressibility_check(&ht, &phi, 0.05, 0.0, 2).unwrap();
    let want = 1.0 / (2.0 * PI.powi(4) * nu(0.0).unwrap().powi(3) * 0.1) * v_d(&phi, &phi, 2, 0.0).unwrap();
    assert!(close(a.theta, want, 1e-12));
    // both critical models: eta Theta is eta-independent
    assert!(close(a.ratio, b.ratio, 1e-12));
    let c = compressibility_check(&step(2, 32, 4), &phi, 0.05, 0.0, 2).unwrap();
    assert!(close(small.ratio, c.ratio, 1e-12));
    assert!(compressibility_check(&step(1, 40, 4), &phi, 0.1, 0.0, 2).is_err());
}

#[test]
fn sigma_transition_between_symmetry_classes() {
    let p = build_general_profile(LatticeSpec::new(3, 16, 3).unwrap(), &Density::Gaussian, &Phase::Zero, &Damping::Zero, 0.0, 0.0)
        .unwrap();
    let base = profile_constants(&p).unwrap();
    let phi = TestFunction::Cauchy;
    let win = EnergyWindow::new(0.0, 0.0, 0.05, 0.1).unwrap();
    let at = |sigma: f64| {
        let mut c = base.clone();
        c.sigma = Some(sigma);
        theta_predict(&win, &c, &phi, &phi, Regime::GeneralOmegaZeroD123, None).unwrap().value
    };
    assert!(close(at(0.0) / at(1e40), 2.0, 1e-10));
    let mid = at(0.05);
    assert!(mid < at(0.0) && mid > at(1e40));
}

#[test]
fn s_int_desk_run() {
    let p = step(1, 4000, 10).unit_normalized();
    let r = s_int_verify(&p, &TestFunction::Gaussian, 1.0, 0.1, 1.0).unwrap();
    assert!(r.rel_dev <= 0.15, "{}", r.rel_dev);
    assert!(s_int_verify(&p, &TestFunction::Cauchy, 1.0, 0.1, 1.0).is_err());
}

#[test]
fn predictions_check_preconditions() {
    let c = profile_constants(&step(1, 40, 4)).unwrap();
    let phi = TestFunction::Cauchy;
    let zero = EnergyWindow::new(0.0, 0.0, 0.1, 0.1).unwrap();
    let apart = EnergyWindow::centred(0.0, 0.3, 0.1).unwrap();
    assert!(theta_predict(&zero, &c, &phi, &phi, Regime::OmegaZeroD123, Some(2)).is_ok());
    assert!(theta_predict(&apart, &c, &phi, &phi, Regime::OmegaZeroD123, Some(2)).is_err());
    assert!(theta_predict(&zero, &c, &phi, &phi, Regime::OmegaLargeD123, Some(2)).is_err());
    assert!(theta_predict(&zero, &c, &phi, &phi, Regime::OmegaZeroD4, Some(2)).is_err());
    assert!(theta_predict(&zero, &c, &phi, &phi, Regime::OmegaZeroD123, None).is_err());
    assert!(theta_predict(&zero, &c, &phi, &phi, Regime::ExactVmain, Some(2)).is_err());
    for r in Regime::ALL {
        assert_eq!(Regime::from_tag(&r.tag()).unwrap(), r);
    }
}
