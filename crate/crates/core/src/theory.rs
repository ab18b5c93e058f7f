//! Deterministic predictions: semicircle density, the quadratic forms `V_d`,
//! the constants `K_d` and `B_d`, dual-grid trace sums and their
//! asymptotics, the exact dumbbell sum `V_main` and the closed-form
//! asymptotics of `Theta`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cheb::ChebCoefficients;
use crate::ensemble::Law;
use crate::error::{Error, Result};
use crate::lattice::{
    fft_nd, profile_constants, s_spectrum, t_spectrum, Density, LatticeSpec, ProfileConstants, ProfileKind,
    ProfileSpec,
};
use crate::special::{casin_upper, integrate, integrate_complex, unit_sphere_area};
use crate::stats::EnergyWindow;
use crate::testfn::{TestClass, TestFunction};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Smallest admissible `|1 - alpha s|` over the dual grid.
pub const SPECTRAL_SAFETY: f64 = 1e-12;

/// Exponent used for the `M^{-c}` factors of error envelopes.
pub const ENVELOPE_EXPONENT: f64 = 1.0 / 3.0;

/// `omega >> eta` regimes require `eta <= omega / OMEGA_GAP`.
pub const OMEGA_GAP: f64 = 1.5;

/// Largest `V_main` cutoff on `b1 + b2 + b3 + b4`.
pub const VMAIN_CUTOFF_CAP: usize = 20_000;

/// Semicircle density `nu(E) = (2/pi) sqrt(1 - E^2)`.
pub fn nu(e: f64) -> Result<f64> {
    if !(e.abs() <= 1.0) {
        return Err(Error::Domain(format!("semicircle density needs |E| <= 1, got {e}")));
    }
    Ok(2.0 / PI * (1.0 - e * e).sqrt())
}

/// `R_k(s) = 1 + 1{d <= k-1} s^{(d-k)/2} + 1{d = k} |log s|`.
pub fn r_k(k: usize, d: usize, s: f64) -> f64 {
    if d < k {
        1.0 + s.powf((d as f64 - k as f64) / 2.0)
    } else if d == k {
        1.0 + s.ln().abs()
    } else {
        1.0
    }
}

/// `V_d(phi1, phi2; a) = int |t|^{1-d/2} e^{-a|t|} conj(phi1_hat) phi2_hat dt`
/// for `d <= 3`, and `V_4 = 2 conj(phi1_hat(0)) phi2_hat(0)`.
pub fn v_d(phi1: &TestFunction, phi2: &TestFunction, d: usize, a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::Validation(format!("damping a = {a} must be nonnegative")));
    }
    match d {
        4 => Ok(2.0 * (phi1.hat_at(0.0).conj() * phi2.hat_at(0.0)).re),
        1..=3 => {
            let mut t_max = phi1.horizon(1.0, 1e-14, 1e4).max(phi2.horizon(1.0, 1e-14, 1e4));
            if a > 0.0 {
                t_max = t_max.min(40.0 / a);
            }
            let s_max = t_max.sqrt();
            let ext = phi1.extent().max(phi2.extent());
            let panels = 16 + (t_max * ext / 2.0).ceil() as usize;
            let p = 3 - d as i32;
            // t = s^2 removes the |t|^{-1/2} singularity at d = 3.
            let half = integrate(
                |s| {
                    let t = s * s;
                    let f = (phi1.hat_at(t).conj() * phi2.hat_at(t)).re;
                    2.0 * s.powi(p) * (-a * t).exp() * f
                },
                0.0,
                s_max,
                panels,
                1e-13,
                1e-11,
            )?;
            Ok(2.0 * half)
        }
        _ => Err(Error::Validation(format!("V_d is defined for d <= 4, got d = {d}"))),
    }
}

/// `K_d` and `B_d` in closed form with quadrature cross-checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KbConstants {
    pub d: usize,
    pub k: f64,
    pub b: f64,
    pub k_quadrature: f64,
    pub b_quadrature: f64,
}

pub fn constants_kb(d: usize) -> Result<KbConstants> {
    let (k, b) = match d {
        1 => (-PI / 2f64.sqrt(), PI / 2.0),
        2 => (0.0, PI),
        3 => (2f64.sqrt() * PI * PI, PI * PI),
        _ => return Err(Error::Validation(format!("K_d and B_d are defined for d <= 3, got d = {d}"))),
    };
    let area = unit_sphere_area(d);
    let (pd, pc) = (d as i32 - 1, 3 - d as i32);
    // Radial integrals with r = tan(theta).
    let kq = integrate_complex(
        |th| {
            let (s, c) = th.sin_cos();
            let den = Complex64::new(s * s, c * c);
            Complex64::new(s.powi(pd) * c.powi(pc), 0.0) / (den * den)
        },
        0.0,
        PI / 2.0,
        16,
        1e-14,
        1e-13,
    )?;
    let bq = integrate(|th| th.sin().powi(pd) * th.cos().powi(pc), 0.0, PI / 2.0, 16, 1e-15, 1e-14)?;
    Ok(KbConstants { d, k, b, k_quadrature: 2.0 * area * kq.re, b_quadrature: area * bq })
}

/// Eigenvalues of a translation-invariant profile on the dual grid, with
/// exact trace sums.
#[derive(Clone, Debug)]
pub struct DualSpectrum {
    pub lattice: LatticeSpec,
    pub values: Vec<f64>,
}

impl DualSpectrum {
    pub fn of_s(profile: &ProfileSpec) -> Self {
        DualSpectrum { lattice: profile.lattice, values: s_spectrum(profile) }
    }

    pub fn of_t(profile: &ProfileSpec) -> Self {
        DualSpectrum { lattice: profile.lattice, values: t_spectrum(profile) }
    }

    /// `tr S^n`.
    pub fn power_trace(&self, n: u32) -> f64 {
        self.values.iter().map(|&s| s.powi(n as i32)).sum()
    }

    /// `tr S^m` for `m = 0..=n_max`.
    pub fn power_traces(&self, n_max: usize) -> Vec<f64> {
        let mut pw = vec![1.0; self.values.len()];
        let mut out = Vec::with_capacity(n_max + 1);
        out.push(self.values.len() as f64);
        for _ in 0..n_max {
            for (p, &s) in pw.iter_mut().zip(&self.values) {
                *p *= s;
            }
            out.push(pw.iter().sum());
        }
        out
    }

    /// `(S^b)_{00}` for `b = 0..=b_max`.
    pub fn diagonal_powers(&self, b_max: usize) -> Vec<f64> {
        let n = self.values.len() as f64;
        self.power_traces(b_max).into_iter().map(|t| t / n).collect()
    }

    fn check_safety(&self, alpha: Complex64) -> Result<()> {
        for (idx, &s) in self.values.iter().enumerate() {
            let modulus = (1.0 - alpha * s).norm();
            if !(modulus > SPECTRAL_SAFETY) {
                return Err(Error::Singular { index: idx, modulus });
            }
        }
        Ok(())
    }

    /// `tr S/(1 - alpha S)^k`.
    pub fn resolvent_trace(&self, alpha: Complex64, k: u32) -> Result<Complex64> {
        self.check_safety(alpha)?;
        Ok(self.values.iter().map(|&s| s / (1.0 - alpha * s).powu(k)).sum())
    }

    /// `(S/(1 - alpha S)^k)_{x0}` indexed by `x`.
    pub fn resolvent_row(&self, alpha: Complex64, k: u32) -> Result<Vec<Complex64>> {
        self.check_safety(alpha)?;
        let lat = self.lattice;
        let mut data: Vec<Complex64> = self.values.iter().map(|&s| s / (1.0 - alpha * s).powu(k)).collect();
        fft_nd(&mut data, lat.d, lat.l, true);
        let n = data.len() as f64;
        Ok(data.into_iter().map(|v| v / n).collect())
    }
}

/// `tr S^n` from the dual-grid power sum.
pub fn trace_s_power(profile: &ProfileSpec, n: u32) -> f64 {
    DualSpectrum::of_s(profile).power_trace(n)
}

/// `tr S/(1 - alpha S)^k`.
pub fn trace_resolvent(profile: &ProfileSpec, alpha: Complex64, k: u32) -> Result<Complex64> {
    DualSpectrum::of_s(profile).resolvent_trace(alpha, k)
}

/// `(S/(1 - alpha S)^k)_{x0}`.
pub fn resolvent_entries(profile: &ProfileSpec, alpha: Complex64, k: u32) -> Result<Vec<Complex64>> {
    DualSpectrum::of_s(profile).resolvent_row(alpha, k)
}

/// `tr T^n`.
pub fn trace_t_power(profile: &ProfileSpec, n: u32) -> f64 {
    DualSpectrum::of_t(profile).power_trace(n)
}

/// `tr T/(1 - alpha T)^k`.
pub fn trace_t_resolvent(profile: &ProfileSpec, alpha: Complex64, k: u32) -> Result<Complex64> {
    DualSpectrum::of_t(profile).resolvent_trace(alpha, k)
}

/// Which asymptotic form of `tr S/(1 - alpha S)^2` to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticVariant {
    /// `d <= 3` leading term.
    Leading,
    /// `d = 4` logarithm.
    Log4,
    /// `d = 2` pole plus logarithm.
    TwoTermD2,
}

/// Geometry entering the trace asymptotics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceGeometry {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub det_d: f64,
    /// `Q`, needed for the `d = 2` two-term form.
    pub q: Option<f64>,
}

impl TraceGeometry {
    pub fn from_profile(profile: &ProfileSpec) -> Result<Self> {
        let c = profile_constants(profile)?;
        let lat = profile.lattice;
        Ok(TraceGeometry { d: lat.d, l: lat.l, w: lat.w, det_d: c.det_d, q: c.q })
    }

    fn volume_ratio(&self) -> f64 {
        (self.l as f64 / (2.0 * PI * self.w as f64)).powi(self.d as i32)
    }
}

/// Asymptotics of `tr S/(1 - alpha S)^2` with `1 - alpha = u zeta`.
pub fn trace_asymptotic(geom: &TraceGeometry, u: f64, zeta: Complex64, variant: AsymptoticVariant) -> Result<Complex64> {
    if !(u > 0.0) {
        return Err(Error::Validation(format!("u = {u} must be positive")));
    }
    if (zeta.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!("|zeta| = {} must be 1", zeta.norm())));
    }
    if zeta.re < -1e-15 {
        return Err(Error::Domain(format!("Re zeta = {} is negative; the power branch is taken on Re zeta >= 0", zeta.re)));
    }
    let d = geom.d;
    let pre = geom.volume_ratio() / geom.det_d.sqrt();
    match variant {
        AsymptoticVariant::Leading => {
            let kb = constants_kb(d)?;
            let p = d as f64 / 2.0 - 2.0;
            Ok(pre * u.powf(p) * kb.b * zeta.powf(p))
        }
        AsymptoticVariant::Log4 => {
            if d != 4 {
                return Err(Error::Validation(format!("logarithmic form needs d = 4, got d = {d}")));
            }
            Ok(Complex64::new(pre * PI * PI * u.ln().abs(), 0.0))
        }
        AsymptoticVariant::TwoTermD2 => {
            if d != 2 {
                return Err(Error::Validation(format!("two-term form needs d = 2, got d = {d}")));
            }
            let q = geom.q.ok_or_else(|| Error::Validation("two-term form needs Q".into()))?;
            Ok(pre * (PI / (u * zeta) + PI * (q - 1.0) * u.ln().abs()))
        }
    }
}

/// Error envelope of [`trace_asymptotic`] with unit constants.
pub fn trace_asymptotic_envelope(geom: &TraceGeometry, m: f64, u: f64, variant: AsymptoticVariant) -> f64 {
    let d = geom.d;
    let pre = geom.volume_ratio() / geom.det_d.sqrt();
    let decay = (-(geom.l as f64) * u.sqrt() / geom.w as f64).exp();
    match variant {
        AsymptoticVariant::Leading => {
            let mut e = decay + 1.0 / (m * u) + u;
            if d == 2 {
                e += u * u.ln().abs();
            }
            if d == 3 {
                e += u.sqrt();
            }
            pre * u.powf(d as f64 / 2.0 - 2.0) * e
        }
        AsymptoticVariant::Log4 => pre,
        AsymptoticVariant::TwoTermD2 => pre * (1.0 + 1.0 / (m * u * u) + decay / u),
    }
}

/// Asymptotic form at `alpha` with the shift `1 - alpha + shift = u zeta`;
/// `shift = sigma~` gives the `T` asymptotics, `shift = 0` the `S` ones.
pub fn trace_asymptotic_at(
    geom: &TraceGeometry,
    alpha: Complex64,
    shift: f64,
    variant: AsymptoticVariant,
) -> Result<Complex64> {
    let w = 1.0 - alpha + shift;
    let u = w.norm();
    trace_asymptotic(geom, u, w / u, variant)
}

/// The exact dumbbell sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VMain {
    pub value: f64,
    /// Contribution with `tr S^m`.
    pub s_part: f64,
    /// Contribution with `tr T^m` (zero for `beta = 2`).
    pub t_part: f64,
    pub cutoff: usize,
    #[serde(rename = "I")]
    pub i: f64,
}

/// `sum_m c(m) tr X^m sum_{b1 + b2 <= K - m} g1[2 b1 + m] g2[2 b2 + m] I^{b1 + b2}`
/// with `c(m) = m` except `c(2) = 0`.
pub fn dumbbell_sum(g1: &[f64], g2: &[f64], traces: &[f64], i: f64, cutoff: usize) -> f64 {
    let at = |g: &[f64], n: usize| g.get(n).copied().unwrap_or(0.0);
    let mut ipow = vec![1.0; cutoff + 1];
    for b in 1..=cutoff {
        ipow[b] = ipow[b - 1] * i;
    }
    let mut total = 0.0;
    let mut cum = vec![0.0; cutoff + 1];
    for m in 1..=cutoff.min(traces.len().saturating_sub(1)) {
        let c = if m == 2 { 0.0 } else { m as f64 };
        if m >= g1.len() || m >= g2.len() {
            break;
        }
        if c == 0.0 {
            continue;
        }
        let top = cutoff - m;
        let mut acc = 0.0;
        for b2 in 0..=top {
            acc += at(g2, 2 * b2 + m) * ipow[b2];
            cum[b2] = acc;
        }
        let mut p = 0.0;
        for b1 in 0..=top {
            let x = at(g1, 2 * b1 + m);
            if x != 0.0 {
                p += x * ipow[b1] * cum[top - b1];
            }
        }
        total += c * traces[m] * p;
    }
    total
}

/// `V_main` with `tr S` bridges plus the twisted `tr T` bridges selected by
/// the law: none for `beta = 2`, `T = S` for `beta = 1`, the profile's `T`
/// for the general law.
pub fn v_main_exact(
    profile: &ProfileSpec,
    phi1: &TestFunction,
    phi2: &TestFunction,
    window: &EnergyWindow,
    coeffs: &ChebCoefficients,
    law: &Law,
) -> Result<VMain> {
    window.validate()?;
    let cutoff = coeffs.pair_cutoff(phi1, phi2);
    if cutoff > VMAIN_CUTOFF_CAP {
        return Err(Error::CapExceeded(format!("V_main cutoff {cutoff} exceeds {VMAIN_CUTOFF_CAP}")));
    }
    let t1 = coeffs.gamma_table(window.e1, phi1)?;
    let t2 = coeffs.gamma_table(window.e2, phi2)?;
    let g1: Vec<f64> = (0..=t1.n_max()).map(|n| t1.g(n)).collect();
    let g2: Vec<f64> = (0..=t2.n_max()).map(|n| t2.g(n)).collect();
    Ok(v_main_from_tables(profile, &g1, &g2, cutoff, law))
}

/// [`v_main_exact`] from precomputed `2 Re gamma~_n` tables.
pub fn v_main_from_tables(profile: &ProfileSpec, g1: &[f64], g2: &[f64], cutoff: usize, law: &Law) -> VMain {
    let i = profile.row_sum();
    let s_traces = DualSpectrum::of_s(profile).power_traces(cutoff);
    let s_part = dumbbell_sum(g1, g2, &s_traces, i, cutoff);
    let t_part = match law {
        Law::UnimodularComplex => 0.0,
        Law::UnimodularReal => s_part,
        Law::GeneralSymmetric { .. } => {
            let t_traces = DualSpectrum::of_t(profile).power_traces(cutoff);
            dumbbell_sum(g1, g2, &t_traces, i, cutoff)
        }
    };
    VMain { value: s_part + t_part, s_part, t_part, cutoff, i }
}

/// `Theta = (LW)^d / N^2 * V_main / (EY1 EY2)` with `EY = 2 pi nu`.
pub fn theta_from_vmain(v_main: f64, lattice: &LatticeSpec, e1: f64, e2: f64) -> Result<f64> {
    let d = lattice.d as i32;
    let n = lattice.n() as f64;
    let lw = (lattice.l as f64 * lattice.w as f64).powi(d);
    let ey = 4.0 * PI * PI * nu(e1)? * nu(e2)?;
    Ok(lw / (n * n) * v_main / ey)
}

/// Closed form selected for a prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "exact_vmain")]
    ExactVmain,
    #[serde(rename = "omega_zero_d123")]
    OmegaZeroD123,
    #[serde(rename = "omega_zero_d4")]
    OmegaZeroD4,
    #[serde(rename = "omega_large_d123")]
    OmegaLargeD123,
    #[serde(rename = "omega_large_d2_C1")]
    OmegaLargeD2C1,
    #[serde(rename = "omega_large_d2_C2")]
    OmegaLargeD2C2,
    #[serde(rename = "omega_large_d4")]
    OmegaLargeD4,
    #[serde(rename = "general_sigma_omega_zero_d123")]
    GeneralOmegaZeroD123,
    #[serde(rename = "general_sigma_omega_zero_d4")]
    GeneralOmegaZeroD4,
    #[serde(rename = "general_sigma_omega_large_d123")]
    GeneralOmegaLargeD123,
    #[serde(rename = "general_sigma_omega_large_d2_C1")]
    GeneralOmegaLargeD2C1,
    #[serde(rename = "general_sigma_omega_large_d2_C2")]
    GeneralOmegaLargeD2C2,
    #[serde(rename = "general_sigma_omega_large_d4")]
    GeneralOmegaLargeD4,
    #[serde(rename = "heavy_tail_omega_zero")]
    HeavyTailOmegaZero,
    #[serde(rename = "heavy_tail_omega_large")]
    HeavyTailOmegaLarge,
}

impl Regime {
    pub const ALL: [Regime; 15] = [
        Regime::ExactVmain,
        Regime::OmegaZeroD123,
        Regime::OmegaZeroD4,
        Regime::OmegaLargeD123,
        Regime::OmegaLargeD2C1,
        Regime::OmegaLargeD2C2,
        Regime::OmegaLargeD4,
        Regime::GeneralOmegaZeroD123,
        Regime::GeneralOmegaZeroD4,
        Regime::GeneralOmegaLargeD123,
        Regime::GeneralOmegaLargeD2C1,
        Regime::GeneralOmegaLargeD2C2,
        Regime::GeneralOmegaLargeD4,
        Regime::HeavyTailOmegaZero,
        Regime::HeavyTailOmegaLarge,
    ];

    pub fn tag(&self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        Regime::ALL
            .iter()
            .copied()
            .find(|r| r.tag() == tag)
            .ok_or_else(|| Error::Validation(format!("unknown regime `{tag}`")))
    }

    fn omega_zero(&self) -> bool {
        matches!(
            self,
            Regime::OmegaZeroD123 | Regime::OmegaZeroD4 | Regime::GeneralOmegaZeroD123 | Regime::GeneralOmegaZeroD4
                | Regime::HeavyTailOmegaZero
        )
    }

    fn citation(&self) -> &'static str {
        match self {
            Regime::ExactVmain => "theta.exact.dumbbell_sum",
            Regime::OmegaZeroD123 => "theta.omega_zero.d123",
            Regime::OmegaZeroD4 => "theta.omega_zero.d4",
            Regime::OmegaLargeD123 => "theta.omega_large.d123",
            Regime::OmegaLargeD2C1 => "theta.omega_large.d2.cauchy",
            Regime::OmegaLargeD2C2 => "theta.omega_large.d2.smooth",
            Regime::OmegaLargeD4 => "theta.omega_large.d4",
            Regime::GeneralOmegaZeroD123 => "theta.general.omega_zero.d123",
            Regime::GeneralOmegaZeroD4 => "theta.general.omega_zero.d4",
            Regime::GeneralOmegaLargeD123 => "theta.general.omega_large.d123",
            Regime::GeneralOmegaLargeD2C1 => "theta.general.omega_large.d2.cauchy",
            Regime::GeneralOmegaLargeD2C2 => "theta.general.omega_large.d2.smooth",
            Regime::GeneralOmegaLargeD4 => "theta.general.omega_large.d4",
            Regime::HeavyTailOmegaZero => "theta.heavy_tail.omega_zero",
            Regime::HeavyTailOmegaLarge => "theta.heavy_tail.omega_large",
        }
    }
}

/// Inputs echoed in a prediction report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionInputs {
    #[serde(rename = "E1")]
    pub e1: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub omega: f64,
    pub eta: f64,
    pub d: usize,
    pub beta: Option<u8>,
    pub sigma: Option<f64>,
    pub constants: ProfileConstants,
}

/// Prediction report: `{regime, inputs, value, envelope, citations}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryPrediction {
    pub regime: Regime,
    pub inputs: PredictionInputs,
    pub value: f64,
    pub envelope: f64,
    pub citations: Vec<String>,
}

fn violated(what: &str) -> Error {
    Error::Regime(what.to_string())
}

fn test_class(phi1: &TestFunction, phi2: &TestFunction) -> Result<TestClass> {
    let (c1, c2) = (phi1.class(), phi2.class());
    if c1 != c2 || c1 == TestClass::Mixed {
        return Err(violated("test functions must both be Cauchy-class or both smooth-class"));
    }
    Ok(c1)
}

/// Closed-form asymptotics of `Theta` in the selected regime.
pub fn theta_predict(
    window: &EnergyWindow,
    constants: &ProfileConstants,
    phi1: &TestFunction,
    phi2: &TestFunction,
    regime: Regime,
    beta: Option<u8>,
) -> Result<TheoryPrediction> {
    window.validate()?;
    let d = constants.d.len();
    let (e, omega, eta) = (window.e(), window.omega(), window.eta);
    let class = test_class(phi1, phi2)?;
    let inputs = PredictionInputs {
        e1: window.e1,
        e2: window.e2,
        e,
        omega,
        eta,
        d,
        beta,
        sigma: constants.sigma,
        constants: constants.clone(),
    };
    if regime == Regime::ExactVmain {
        return Err(Error::Validation("exact_vmain predictions come from theta_exact".into()));
    }
    if regime.omega_zero() {
        if omega != 0.0 {
            return Err(violated(&format!("omega = 0 required, got omega = {omega}")));
        }
    } else if !(eta <= omega / OMEGA_GAP) {
        return Err(violated(&format!("eta <= omega/{OMEGA_GAP} required, got eta = {eta}, omega = {omega}")));
    }
    let need_d = |ok: bool, what: &str| if ok { Ok(()) } else { Err(violated(&format!("{what} required, got d = {d}"))) };
    let beta_f = || -> Result<f64> {
        match beta {
            Some(b @ (1 | 2)) => Ok(b as f64),
            _ => Err(violated("beta in {1, 2} required")),
        }
    };
    let gen = || -> Result<(f64, f64)> {
        let sigma = constants.sigma.ok_or_else(|| violated("continuum sigma required (finite-moment profile)"))?;
        let det = constants.det_d0.ok_or_else(|| violated("continuum det D0 required (finite-moment profile)"))?;
        Ok((sigma, det.sqrt()))
    };
    let m_c = constants.m.powf(-ENVELOPE_EXPONENT);
    let nu = nu(e)?;
    let nu4 = nu.powi(4);
    let df = d as f64;
    let p = df / 2.0 - 2.0;
    let log_w = omega.ln().abs();
    let log_e = eta.ln().abs();
    let (value, envelope) = match regime {
        Regime::ExactVmain => unreachable!(),
        Regime::OmegaZeroD123 => {
            need_d((1..=3).contains(&d), "d in {1,2,3}")?;
            let pre = (df + 2.0).powf(df / 2.0) / (2.0 * beta_f()? * PI.powf(2.0 + df) * nu4) * (eta / nu).powf(p);
            (pre * v_d(phi1, phi2, d, 0.0)?, pre * m_c)
        }
        Regime::OmegaZeroD4 => {
            need_d(d == 4, "d = 4")?;
            let pre = 36.0 / (beta_f()? * PI.powi(6) * nu4);
            (pre * v_d(phi1, phi2, 4, 0.0)? * log_e, pre)
        }
        Regime::OmegaLargeD123 => {
            need_d((1..=3).contains(&d), "d in {1,2,3}")?;
            let pre =
                (df + 2.0).powf(df / 2.0) / (2.0 * beta_f()? * PI.powf(2.0 + 1.5 * df) * nu4) * (omega / nu).powf(p);
            (pre * constants_kb(d)?.k, pre * (omega.sqrt() + m_c))
        }
        Regime::OmegaLargeD2C1 | Regime::OmegaLargeD2C2 => {
            need_d(d == 2, "d = 2")?;
            let want = if regime == Regime::OmegaLargeD2C1 { TestClass::C1 } else { TestClass::C2 };
            if class != want {
                return Err(violated(&format!("{want:?} test functions required")));
            }
            let pre = 8.0 / (beta_f()? * PI.powi(5) * nu4);
            let pole = if want == TestClass::C1 { PI * nu * eta / (omega * omega + 4.0 * eta * eta) } else { 0.0 };
            (pre * (pole - log_w / 3.0), pre)
        }
        Regime::OmegaLargeD4 => {
            need_d(d == 4, "d = 4")?;
            let pre = 36.0 / (beta_f()? * PI.powi(6) * nu4);
            (pre * log_w, pre)
        }
        Regime::GeneralOmegaZeroD123 => {
            need_d((1..=3).contains(&d), "d in {1,2,3}")?;
            let (sigma, sq) = gen()?;
            let pre = 1.0 / (2f64.powf(2.0 + df / 2.0) * PI.powf(2.0 + df) * nu4 * sq) * (eta / nu).powf(p);
            let a = 2.0 * sigma / (PI * nu * eta);
            (pre * (v_d(phi1, phi2, d, 0.0)? + v_d(phi1, phi2, d, a)?), pre * m_c)
        }
        Regime::GeneralOmegaZeroD4 => {
            need_d(d == 4, "d = 4")?;
            let (sigma, sq) = gen()?;
            let pre = 1.0 / (16.0 * PI.powi(6) * nu4 * sq);
            (pre * v_d(phi1, phi2, 4, 0.0)? * (log_e + log_e.min(sigma.ln().abs())), pre)
        }
        Regime::GeneralOmegaLargeD123 => {
            need_d((1..=3).contains(&d), "d in {1,2,3}")?;
            let (sigma, sq) = gen()?;
            let kb = constants_kb(d)?;
            let pre = 1.0 / (2f64.powf(2.0 + df / 2.0) * PI.powf(2.0 + 1.5 * df) * nu4 * sq) * (omega / nu).powf(p);
            let z = I + PI * nu * sigma / (2.0 * omega);
            (pre * (kb.k + 2.0 * kb.b * z.powf(p).re), pre * (omega.sqrt() + m_c))
        }
        Regime::GeneralOmegaLargeD2C1 | Regime::GeneralOmegaLargeD2C2 => {
            need_d(d == 2, "d = 2")?;
            let want = if regime == Regime::GeneralOmegaLargeD2C1 { TestClass::C1 } else { TestClass::C2 };
            if class != want {
                return Err(violated(&format!("{want:?} test functions required")));
            }
            let (sigma, sq) = gen()?;
            let q0 = constants.q0.ok_or_else(|| violated("continuum Q0 required"))?;
            let pre = 1.0 / (2.0 * PI.powi(5) * nu4 * sq);
            let logs = (q0 - 1.0) * (log_w + log_w.min(sigma.ln().abs()));
            let ps = PI * nu * sigma;
            let poles = if want == TestClass::C1 {
                PI * nu * (4.0 * eta + ps) / (4.0 * omega * omega + (4.0 * eta + ps).powi(2))
                    + PI * eta * nu / (omega * omega + 4.0 * eta * eta)
            } else {
                PI * nu * ps / (4.0 * omega * omega + ps * ps)
            };
            (pre * (poles + logs), pre)
        }
        Regime::GeneralOmegaLargeD4 => {
            need_d(d == 4, "d = 4")?;
            let (sigma, sq) = gen()?;
            let pre = 1.0 / (8.0 * PI.powi(6) * nu4 * sq);
            (pre * (log_w + log_w.min(sigma.ln().abs())), pre)
        }
        Regime::HeavyTailOmegaZero => {
            need_d(d == 1, "d = 1")?;
            let pre = 1.0 / (beta_f()? * PI.powi(4) * nu.powi(3) * eta);
            (pre * v_d(phi1, phi2, 2, 0.0)?, pre * m_c)
        }
        Regime::HeavyTailOmegaLarge => {
            need_d(d == 1, "d = 1")?;
            if class != TestClass::C2 {
                return Err(violated("C2 test functions required"));
            }
            let pre = 1.0 / (2.0 * beta_f()? * PI.powi(5) * nu4);
            (-pre * log_w, pre)
        }
    };
    Ok(TheoryPrediction { regime, inputs, value, envelope, citations: vec![regime.citation().to_string()] })
}

/// `Theta` from the exact dumbbell sum, with envelope `M^{-c} R_2(omega + eta)`.
pub fn theta_exact(
    profile: &ProfileSpec,
    phi1: &TestFunction,
    phi2: &TestFunction,
    window: &EnergyWindow,
    coeffs: &ChebCoefficients,
    law: &Law,
) -> Result<TheoryPrediction> {
    let constants = profile_constants(profile)?;
    let v = v_main_exact(profile, phi1, phi2, window, coeffs, law)?;
    let lat = profile.lattice;
    let value = theta_from_vmain(v.value, &lat, window.e1, window.e2)?;
    let envelope = constants.m.powf(-ENVELOPE_EXPONENT) * r_k(2, lat.d, window.omega() + window.eta);
    Ok(TheoryPrediction {
        regime: Regime::ExactVmain,
        inputs: PredictionInputs {
            e1: window.e1,
            e2: window.e2,
            e: window.e(),
            omega: window.omega(),
            eta: window.eta,
            d: lat.d,
            beta: law.beta(),
            sigma: constants.sigma,
            constants,
        },
        value,
        envelope,
        citations: vec![Regime::ExactVmain.citation().to_string()],
    })
}

/// Terms of `D^eta(E1, E2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DEta {
    pub value: f64,
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
}

/// `D^eta = 2 Re tr aS/(1 - aS)^2 - 2 Re tr a'S/(1 + a'S)^2 - 8 (1-2E1^2)(1-2E2^2) tr S^2`
/// with `a = e^{i(A1 - conj A2)}`, `a' = e^{i(A1 + A2)}`, `A_j = arcsin(E_j + i eta)`.
pub fn d_eta_exact(profile: &ProfileSpec, window: &EnergyWindow) -> Result<DEta> {
    let spec = DualSpectrum::of_s(profile);
    let a1 = casin_upper(Complex64::new(window.e1, window.eta));
    let a2 = casin_upper(Complex64::new(window.e2, window.eta));
    let alpha = (I * (a1 - a2.conj())).exp();
    let alpha_p = (I * (a1 + a2)).exp();
    let term1 = 2.0 * (alpha * spec.resolvent_trace(alpha, 2)?).re;
    let term2 = -2.0 * (alpha_p * spec.resolvent_trace(-alpha_p, 2)?).re;
    let (e1, e2) = (window.e1, window.e2);
    let term3 = -8.0 * (1.0 - 2.0 * e1 * e1) * (1.0 - 2.0 * e2 * e2) * spec.power_trace(2);
    Ok(DEta { value: term1 + term2 + term3, term1, term2, term3 })
}

/// Which critical model a compressibility check runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalModel {
    HeavyTailD1,
    StepD2,
}

/// `Var N(I) / E N(I)` for the smoothed count `N = N eta Y / (2 pi)`,
/// which equals `nu eta Theta W^{-d}` at `omega = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressibilityReport {
    pub model: CriticalModel,
    pub d: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub eta: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub theta: f64,
    pub ratio: f64,
    /// `ratio * W^d`.
    pub compressibility_constant: f64,
}

pub fn compressibility_check(
    profile: &ProfileSpec,
    phi: &TestFunction,
    eta: f64,
    e: f64,
    beta: u8,
) -> Result<CompressibilityReport> {
    let lat = profile.lattice;
    let model = match (&profile.kind, lat.d) {
        (ProfileKind::General { density: Density::CauchyTail, .. }, 1) => CriticalModel::HeavyTailD1,
        (ProfileKind::Step, 2) => CriticalModel::StepD2,
        _ => {
            return Err(Error::Validation(
                "compressibility is defined for the heavy-tailed d = 1 profile or the d = 2 step profile".into(),
            ))
        }
    };
    let constants = profile_constants(profile)?;
    let window = EnergyWindow::new(e, e, eta, 0.1)?;
    let regime = match model {
        CriticalModel::HeavyTailD1 => Regime::HeavyTailOmegaZero,
        CriticalModel::StepD2 => Regime::OmegaZeroD123,
    };
    let theta = theta_predict(&window, &constants, phi, phi, regime, Some(beta))?.value;
    let ratio = nu(e)? * eta * theta / (lat.w as f64).powi(lat.d as i32);
    Ok(CompressibilityReport {
        model,
        d: lat.d,
        w: lat.w,
        eta,
        e,
        theta,
        ratio,
        compressibility_constant: ratio * (lat.w as f64).powi(lat.d as i32),
    })
}

/// Both sides of the convolved resolvent-trace identity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SIntReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub rel_dev: f64,
}

/// `(1/2pi) int e^eta(v) tr S/(1 + ibv - J S)^2 dv` with `J = 1 - M^{-c2} eta`
/// against its closed-form asymptotics.
pub fn s_int_verify(profile: &ProfileSpec, e: &TestFunction, b: f64, eta: f64, c2: f64) -> Result<SIntReport> {
    if e.class() != TestClass::C2 {
        return Err(Error::Validation("the convolved trace identity needs a smooth-class function".into()));
    }
    if !(b > 0.0 && eta > 0.0) {
        return Err(Error::Validation("b and eta must be positive".into()));
    }
    let lat = profile.lattice;
    let d = lat.d;
    if !(1..=4).contains(&d) {
        return Err(Error::Validation(format!("d = {d} outside 1..=4")));
    }
    let spec = DualSpectrum::of_s(profile);
    let constants = profile_constants(profile)?;
    let j = 1.0 - profile.m.powf(-c2) * eta;
    // v = eta s; e^eta(v) dv = e(s) ds.
    let reach = e.extent() * 40.0;
    let (lo, hi) = match e {
        TestFunction::TabulatedHat { nodes, .. } => (nodes[0], nodes[nodes.len() - 1]),
        _ => (-reach, reach),
    };
    let panels = 64 + (hi - lo) as usize * 4;
    let lhs = integrate_complex(
        |s| {
            let w = e.eval(s);
            if w == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let z = Complex64::new(1.0, b * eta * s);
            let tr: Complex64 = spec.values.iter().map(|&x| x / (z - j * x).powu(2)).sum();
            w * tr
        },
        lo,
        hi,
        panels,
        1e-12,
        1e-10,
    )? / (2.0 * PI);
    let ratio = (lat.l as f64 / (2.0 * PI.sqrt() * lat.w as f64)).powi(d as i32) / constants.det_d.sqrt();
    let rhs = if d == 4 {
        ratio * eta.ln().abs() * e.hat_at(0.0).conj()
    } else {
        let t_max = e.horizon(1.0, 1e-14, 1e4);
        let s_max = t_max.sqrt();
        let pw = 3 - d as i32;
        let panels = 16 + (t_max * e.extent() / 2.0).ceil() as usize;
        // t = s^2 as in V_d.
        let w = integrate_complex(|s| 2.0 * s.powi(pw) * e.hat_at(s * s).conj(), 0.0, s_max, panels, 1e-13, 1e-11)?;
        ratio * (b * eta).powf(d as f64 / 2.0 - 2.0) * w
    };
    let rel_dev = (lhs - rhs).norm() / rhs.norm();
    Ok(SIntReport { lhs, rhs, rel_dev })
}

/// `(S^b)_{00}` for `b = 0..=b_max`.
pub fn lclt_diagonal(profile: &ProfileSpec, b_max: usize) -> Vec<f64> {
    DualSpectrum::of_s(profile).diagonal_powers(b_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_step_profile;

    #[test]
    fn semicircle_values() {
        assert!((nu(0.0).unwrap() - 2.0 / PI).abs() < 1e-15);
        assert_eq!(nu(1.0).unwrap(), 0.0);
        assert!((nu(0.6).unwrap() - 2.0 / PI * 0.8).abs() < 1e-15);
        assert!(nu(1.2).is_err());
    }

    #[test]
    fn cauchy_v1() {
        let v = v_d(&TestFunction::Cauchy, &TestFunction::Cauchy, 1, 0.0).unwrap();
        assert!((v - (PI / 8.0).sqrt()).abs() < 1e-9, "{v}");
        assert_eq!(v_d(&TestFunction::Cauchy, &TestFunction::Cauchy, 4, 0.0).unwrap(), 2.0);
    }

    #[test]
    fn step_power_traces() {
        let p = build_step_profile(LatticeSpec::new(1, 40, 4).unwrap()).unwrap();
        let m = p.m;
        assert!(trace_s_power(&p, 1).abs() < 1e-12);
        assert!((trace_s_power(&p, 2) - 40.0 * m / ((m - 1.0) * (m - 1.0))).abs() < 1e-10);
    }
}
