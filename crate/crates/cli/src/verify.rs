//! Verification suites at preset desk-scale parameters.

use std::f64::consts::PI;
use std::time::Instant;

use bandmeso::cheb::{a_coefficients, cheb_u_matrices, gamma_closed, gamma_truncated_all, nb_power_direct, verify_general_recursion};
use bandmeso::ensemble::{sample, EnsembleSpec, Law, SubLaw};
use bandmeso::lattice::{build_general_profile, build_step_profile, profile_constants, Damping, Density, LatticeSpec, Phase};
use bandmeso::stats::EnergyWindow;
use bandmeso::testfn::TestFunction;
use bandmeso::theory::{
    constants_kb, lclt_diagonal, s_int_verify, theta_predict, trace_asymptotic, trace_resolvent, AsymptoticVariant, Regime,
    TraceGeometry,
};
use bandmeso::Complex64;
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::output::{emit_csv, emit_json, num};
use crate::{lib_err, CliError};

pub const SUITES: [&str; 6] = ["cheb_identity", "general_recursion", "coefficients", "constants", "traces", "s_int"];

#[derive(Clone, Debug, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn below(name: impl Into<String>, value: f64, threshold: f64) -> SuiteCheck {
    SuiteCheck { name: name.into(), value, threshold, pass: value <= threshold }
}

#[derive(Serialize)]
struct SuiteReport {
    suite: String,
    pass: bool,
    elapsed_s: f64,
    checks: Vec<SuiteCheck>,
}

type Checks = Result<Vec<SuiteCheck>, CliError>;

fn usage() -> String {
    format!("verify needs a suite name; one of: {}", SUITES.join(", "))
}

pub fn run_verify(cfg: &RunConfig) -> Result<(), CliError> {
    let suite = match cfg.verify.suite.as_deref() {
        None | Some("") => return Err(CliError::Usage(usage())),
        Some(s) => s,
    };
    let t0 = Instant::now();
    let checks = match suite {
        "cheb_identity" => cheb_identity(),
        "general_recursion" => general_recursion(),
        "coefficients" => coefficients(),
        "constants" => constants(),
        "traces" => traces(),
        "s_int" => s_int(),
        other => return Err(CliError::Usage(format!("unknown suite `{other}`; {}", usage()))),
    }?;
    let pass = checks.iter().all(|c| c.pass);
    let report = SuiteReport { suite: suite.into(), pass, elapsed_s: t0.elapsed().as_secs_f64(), checks };
    match cfg.format() {
        Format::Json => emit_json(cfg, &report)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .checks
                .iter()
                .map(|c| vec![c.name.clone(), num(c.value), num(c.threshold), c.pass.to_string()])
                .collect();
            emit_csv(cfg, &["check", "value", "threshold", "pass"], &rows, &[format!("pass: {pass}")])?;
        }
    }
    if pass {
        Ok(())
    } else {
        let failed: Vec<String> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        Err(CliError::Numerical(format!("suite {suite} failed: {}", failed.join(", "))))
    }
}

fn cheb_identity() -> Checks {
    let profile = build_step_profile(LatticeSpec::new(1, 16, 3).map_err(lib_err(""))?).map_err(lib_err(""))?;
    let r = 1.0 / (profile.m - 1.0);
    let mut out = Vec::new();
    for (beta, law) in [(1, Law::UnimodularReal), (2, Law::UnimodularComplex)] {
        let spec = EnsembleSpec::new(profile.clone(), law, 11);
        let mut worst = [0.0f64; 11];
        for seed in 0..20 {
            let h = sample(&spec, seed).h;
            let u = cheb_u_matrices(10, &h.scale(Complex64::new(0.5, 0.0)));
            for n in 0..=10 {
                let lhs = nb_power_direct(&h, n).map_err(lib_err(""))?;
                let rhs = if n >= 2 { u[n].sub(&u[n - 2].scale(Complex64::new(r, 0.0))) } else { u[n].clone() };
                worst[n] = worst[n].max(lhs.max_abs_diff(&rhs));
            }
        }
        for (n, w) in worst.iter().enumerate() {
            out.push(below(format!("residual n={n} beta={beta}"), *w, 1e-9));
        }
    }
    Ok(out)
}

fn general_recursion() -> Checks {
    let profile = build_step_profile(LatticeSpec::new(1, 10, 2).map_err(lib_err(""))?).map_err(lib_err(""))?;
    let spec = EnsembleSpec::new(profile, Law::GeneralSymmetric { sub_law: SubLaw::Gaussian }, 5);
    let mut worst = vec![0.0f64; 6];
    for seed in 0..5 {
        let rep = verify_general_recursion(&sample(&spec, seed).h, 5).map_err(lib_err(""))?;
        for (w, r) in worst.iter_mut().zip(&rep.residuals) {
            *w = w.max(*r);
        }
    }
    Ok(worst.iter().enumerate().map(|(n, w)| below(format!("residual n={n}"), *w, 1e-8)).collect())
}

fn coefficients() -> Checks {
    let mut out = Vec::new();
    for m in [10.0, 50.0, 200.0] {
        for t in [1.0, 5.0, 10.0, 20.0] {
            let s: f64 = a_coefficients(t, t as usize + 80, 1.0 / (m - 1.0)).iter().map(|a| a.norm_sqr()).sum();
            out.push(below(format!("completeness M={m} t={t}"), (s - 1.0).abs(), 5.0 / m));
        }
    }
    for m in [10.0, 50.0] {
        let r = 1.0 / (m - 1.0);
        for eta in [0.1, 0.3] {
            for e in [-0.8, -0.4, 0.0, 0.4, 0.8] {
                let q = gamma_truncated_all(8, e, &TestFunction::Cauchy, eta, 200.0, r).map_err(lib_err(""))?;
                let worst = q
                    .iter()
                    .enumerate()
                    .map(|(n, v)| (v - gamma_closed(n, Complex64::new(e, eta), r)).norm())
                    .fold(0.0, f64::max);
                out.push(below(format!("cauchy identity M={m} eta={eta} E={e}"), worst, 1e-6));
            }
        }
    }
    Ok(out)
}

fn constants() -> Checks {
    let mut out = Vec::new();
    let k_ref = [-PI / 2f64.sqrt(), 0.0, 2f64.sqrt() * PI * PI];
    let b_ref = [PI / 2.0, PI, PI * PI];
    for d in 1..=3 {
        let kb = constants_kb(d).map_err(lib_err(""))?;
        out.push(below(format!("K_{d} quadrature"), (kb.k_quadrature - k_ref[d - 1]).abs(), 1e-6));
        out.push(below(format!("B_{d} quadrature"), (kb.b_quadrature - b_ref[d - 1]).abs(), 1e-8));
        let rel = 2.0 * kb.b_quadrature * Complex64::new(0.0, 1.0).powf(d as f64 / 2.0 - 2.0).re;
        out.push(below(format!("K_{d} = 2 B_{d} Re i^(d/2-2)"), (kb.k_quadrature - rel).abs(), 1e-8));
    }
    for w in [20usize, 40, 80] {
        for d in 1..=3 {
            let l = if d == 3 { 2 * w } else { 4 * w };
            let p = build_step_profile(LatticeSpec::new(d, l, w).map_err(lib_err(""))?).map_err(lib_err(""))?;
            let c = profile_constants(&p).map_err(lib_err(""))?;
            let target = 1.0 / (2.0 * (d as f64 + 2.0));
            let dev = (0..d).map(|i| (c.d[i][i] - target).abs()).fold(0.0, f64::max);
            out.push(below(format!("D d={d} W={w}"), dev, 2.0 / w as f64));
            if let Some(q) = c.q {
                out.push(below(format!("Q W={w}"), (q - 2.0 / 3.0).abs(), 2.0 / w as f64));
            }
        }
    }
    let lat = LatticeSpec::new(1, 200, 10).map_err(lib_err(""))?;
    let damping = Damping::Bump { radius: 0.5 };
    let reference = profile_constants(
        &build_general_profile(lat, &Density::Gaussian, &Phase::ClippedSine, &damping, 1.0, 1.0).map_err(lib_err(""))?,
    )
    .map_err(lib_err(""))?;
    let mut worst: f64 = 0.0;
    for lambda in [0.0, 0.3, 0.7, 1.0] {
        for varphi in [0.0, 0.25, 0.5, 1.0] {
            let p = build_general_profile(lat, &Density::Gaussian, &Phase::ClippedSine, &damping, lambda, varphi)
                .map_err(lib_err(""))?;
            let c = profile_constants(&p).map_err(lib_err(""))?;
            let want = reference.delta * lambda * lambda + reference.upsilon * varphi;
            worst = worst.max((c.sigma_tilde - want).abs());
        }
    }
    out.push(below("sigma_tilde = Delta lambda^2 + Upsilon varphi", worst, 1e-12));
    let phi = TestFunction::Cauchy;
    for d in [1usize, 3] {
        let l = if d == 1 { 200 } else { 24 };
        let p = build_general_profile(LatticeSpec::new(d, l, 4).map_err(lib_err(""))?, &Density::Gaussian, &Phase::Zero, &Damping::Zero, 0.0, 0.0)
            .map_err(lib_err(""))?;
        let base = profile_constants(&p).map_err(lib_err(""))?;
        for (omega, general, beta_regime) in
            [(0.0, Regime::GeneralOmegaZeroD123, Regime::OmegaZeroD123), (0.4, Regime::GeneralOmegaLargeD123, Regime::OmegaLargeD123)]
        {
            let window = EnergyWindow::centred(0.1, omega, 0.05).map_err(lib_err(""))?;
            let at = |sigma: f64| {
                let mut c = base.clone();
                c.sigma = Some(sigma);
                theta_predict(&window, &c, &phi, &phi, general, None).map(|p| p.value)
            };
            let low = at(0.0).map_err(lib_err(""))?;
            let high = at(1e40).map_err(lib_err(""))?;
            out.push(below(format!("sigma ratio d={d} omega={omega}"), (low / high - 2.0).abs(), 1e-10));
            let b1 = theta_predict(&window, &base, &phi, &phi, beta_regime, Some(1)).map_err(lib_err(""))?.value;
            let b2 = theta_predict(&window, &base, &phi, &phi, beta_regime, Some(2)).map_err(lib_err(""))?.value;
            out.push(below(format!("beta ratio d={d} omega={omega}"), (b1 / b2 - 2.0).abs(), 1e-10));
        }
    }
    Ok(out)
}

fn traces() -> Checks {
    let mut out = Vec::new();
    let zeta = Complex64::new(0.0, -1.0);
    let p1 = build_step_profile(LatticeSpec::new(1, 4000, 10).map_err(lib_err(""))?).map_err(lib_err(""))?.unit_normalized();
    let g1 = TraceGeometry::from_profile(&p1).map_err(lib_err(""))?;
    let mut prev = f64::INFINITY;
    for u in [1e-2, 3e-3] {
        let exact = trace_resolvent(&p1, 1.0 - u * zeta, 2).map_err(lib_err(""))?;
        let asym = trace_asymptotic(&g1, u, zeta, AsymptoticVariant::Leading).map_err(lib_err(""))?;
        let dev = (exact - asym).norm() / asym.norm();
        out.push(below(format!("d=1 leading u={u}"), dev, 0.10));
        out.push(below(format!("d=1 deviation decreasing at u={u}"), dev, prev));
        prev = dev;
    }
    let p2 = build_step_profile(LatticeSpec::new(2, 300, 6).map_err(lib_err(""))?).map_err(lib_err(""))?.unit_normalized();
    let g2 = TraceGeometry::from_profile(&p2).map_err(lib_err(""))?;
    let u = 0.05;
    let exact = trace_resolvent(&p2, 1.0 - u * zeta, 2).map_err(lib_err(""))?;
    let asym = trace_asymptotic(&g2, u, zeta, AsymptoticVariant::TwoTermD2).map_err(lib_err(""))?;
    out.push(below("d=2 two-term u=0.05", (exact - asym).norm() / asym.norm(), 0.15));
    let p3 = build_step_profile(LatticeSpec::new(1, 1024, 8).map_err(lib_err(""))?).map_err(lib_err(""))?.unit_normalized();
    let b_max = (1024usize / 8).pow(2);
    let diag = lclt_diagonal(&p3, b_max);
    let scaled: Vec<f64> = (0..=b_max).map(|b| diag[b] * p3.m * (b as f64).sqrt()).collect();
    let peak = scaled[1..].iter().cloned().fold(0.0, f64::max);
    out.push(below("local clt max (S^b)_00 M b^1/2", peak, 3.0 * scaled[4]));
    Ok(out)
}

fn s_int() -> Checks {
    let p = build_step_profile(LatticeSpec::new(1, 4000, 10).map_err(lib_err(""))?).map_err(lib_err(""))?.unit_normalized();
    let r = s_int_verify(&p, &TestFunction::Gaussian, 1.0, 0.1, 1.0).map_err(lib_err(""))?;
    Ok(vec![below("d=1 L=4000 W=10 eta=0.1 relative deviation", r.rel_dev, 0.15)])
}
