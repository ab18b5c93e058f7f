//! `profile`, `sample`, `estimate`, `predict` and `sweep`.

use std::f64::consts::PI;

use bandmeso::cheb::ChebCoefficients;
use bandmeso::ensemble::{eigenvalues, read_dump, sample, write_dump, EnsembleSpec};
use bandmeso::lattice::{profile_constants, ProfileSpec};
use bandmeso::par::Execution;
use bandmeso::stats::{
    k_point_from_table, log_log_fit, sample_table, EnergyWindow, KPointReport, Observable, SlopeFit, SweepRow,
    SWEEP_COLUMNS,
};
use bandmeso::theory::{nu, theta_exact, theta_predict, v_main_exact, Regime, TheoryPrediction, VMain};
use serde::Serialize;

use crate::config::{Axis, Format, RunConfig};
use crate::output::{emit_csv, emit_json, num};
use crate::{lib_err, CliError};

pub fn execution(cfg: &RunConfig) -> Execution {
    match cfg.workers {
        Some(w) => Execution::with_workers(w),
        None => Execution::from_env(),
    }
}

fn build_profile(cfg: &RunConfig) -> Result<ProfileSpec, CliError> {
    cfg.profile()?.build().map_err(lib_err("[profile]"))
}

fn scalar_rows(value: &serde_json::Value) -> Vec<Vec<String>> {
    match value {
        serde_json::Value::Object(map) => map.iter().map(|(k, v)| vec![k.clone(), v.to_string()]).collect(),
        other => vec![vec!["value".into(), other.to_string()]],
    }
}

pub fn run_profile(cfg: &RunConfig) -> Result<(), CliError> {
    let profile = build_profile(cfg)?;
    let constants = profile_constants(&profile).map_err(lib_err("[profile]"))?;
    match cfg.format() {
        Format::Json => emit_json(cfg, &constants),
        Format::Csv => {
            let v = serde_json::to_value(&constants).map_err(|e| CliError::Numerical(e.to_string()))?;
            emit_csv(cfg, &["key", "value"], &scalar_rows(&v), &[])
        }
    }
}

#[derive(Serialize)]
struct SampleReport {
    index: u64,
    n: usize,
    hermiticity_residual: f64,
    eigenvalues: Vec<f64>,
}

#[derive(Serialize)]
struct DumpReport {
    path: String,
    index: u64,
    read_back_hermitian: bool,
    max_abs_diff: f64,
}

#[derive(Serialize)]
struct SampleOutput {
    samples: Vec<SampleReport>,
    dump: Option<DumpReport>,
}

pub fn run_sample(cfg: &RunConfig) -> Result<(), CliError> {
    let profile = build_profile(cfg)?;
    let spec = EnsembleSpec::new(profile, cfg.ensemble.law, cfg.seed);
    let mut samples = Vec::new();
    let mut dump = None;
    for index in cfg.sample.index..cfg.sample.index + cfg.sample.count as u64 {
        let m = sample(&spec, index);
        if dump.is_none() {
            if let Some(path) = &cfg.sample.dump {
                write_dump(path, &m).map_err(lib_err("[sample.dump]"))?;
                let (_, back) = read_dump(path).map_err(lib_err("[sample.dump]"))?;
                dump = Some(DumpReport {
                    path: path.display().to_string(),
                    index,
                    read_back_hermitian: true,
                    max_abs_diff: back.h.max_abs_diff(&m.h),
                });
            }
        }
        let ev = eigenvalues(&m).map_err(lib_err(""))?;
        samples.push(SampleReport { index, n: m.h.n(), hermiticity_residual: m.h.hermiticity_residual(), eigenvalues: ev });
    }
    let out = SampleOutput { samples, dump };
    match cfg.format() {
        Format::Json => emit_json(cfg, &out),
        Format::Csv => {
            let rows: Vec<Vec<String>> = out
                .samples
                .iter()
                .flat_map(|s| s.eigenvalues.iter().enumerate().map(move |(i, v)| vec![s.index.to_string(), i.to_string(), num(*v)]))
                .collect();
            emit_csv(cfg, &["sample", "index", "eigenvalue"], &rows, &[])
        }
    }
}

/// One comparison against a reference with an allowance.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub reference: f64,
    pub allowance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: String, estimate: f64, stderr: f64, reference: f64, allowance: f64) -> Self {
        let pass = (estimate - reference).abs() <= allowance;
        Check { name, estimate, stderr, reference, allowance, pass }
    }
}

#[derive(Serialize)]
struct EstimateOutput {
    n_samples: usize,
    means: Vec<[f64; 3]>,
    two_point: bandmeso::stats::CorrelationEstimate,
    v_main: Option<VMain>,
    k_point: Vec<KPointReport>,
    checks: Vec<Check>,
}

pub fn run_estimate(cfg: &RunConfig) -> Result<(), CliError> {
    let profile = build_profile(cfg)?;
    let window = cfg.window()?;
    let tf = &cfg.test_functions;
    let spec = EnsembleSpec::new(profile.clone(), cfg.ensemble.law, cfg.seed);
    let mut obs = vec![
        Observable { phi: tf.phi1.clone(), e: window.e1, eta: window.eta },
        Observable { phi: tf.phi2.clone(), e: window.e2, eta: window.eta },
    ];
    for &e in &cfg.estimate.semicircle_energies {
        obs.push(Observable { phi: tf.phi1.clone(), e, eta: window.eta });
    }
    let table = sample_table(&spec, &obs, cfg.n_samples, execution(cfg)).map_err(lib_err(""))?;
    let two_point = table.correlation(0, 1).map_err(lib_err("[n_samples]"))?;
    let mut checks = Vec::new();
    let mut means = Vec::new();
    for (j, o) in obs.iter().enumerate() {
        let (m, se) = table.mean_with_error(j);
        means.push([o.e, m, se]);
        if !cfg.estimate.semicircle_energies.is_empty() {
            let want = 2.0 * PI * nu(o.e).map_err(lib_err("[window]"))?;
            checks.push(Check::new(format!("semicircle E={}", o.e), m, se, want, 3.0 * se + 0.5 * window.eta));
        }
    }
    let v_main = if cfg.estimate.compare_vmain {
        let coeffs = ChebCoefficients::with_eta(profile.m, window.eta);
        let v = v_main_exact(&profile, &tf.phi1, &tf.phi2, &window, &coeffs, &cfg.ensemble.law).map_err(lib_err(""))?;
        checks.push(Check::new(
            "F_eta vs V_main".into(),
            two_point.f_eta,
            two_point.f_eta_stderr,
            v.value,
            3.0 * two_point.f_eta_stderr + 0.15 * v.value.abs(),
        ));
        Some(v)
    } else {
        None
    };
    let mut k_point = Vec::new();
    for cols in &cfg.estimate.k_point {
        if cols.iter().any(|&c| c >= obs.len()) {
            return Err(CliError::Usage(format!("[estimate.k_point] column out of range in {cols:?}")));
        }
        let r = k_point_from_table(&table, cols).map_err(lib_err("[estimate.k_point]"))?;
        let check = if cols.len() % 2 == 1 {
            Check::new(format!("k={} moment {cols:?}", cols.len()), r.moment, r.moment_stderr, 0.0, 4.0 * r.moment_stderr)
        } else {
            let allow = 4.0 * r.moment_stderr + 0.2 * r.wick.abs();
            Check::new(format!("k={} moment {cols:?}", cols.len()), r.moment, r.moment_stderr, r.wick, allow)
        };
        checks.push(check);
        k_point.push(r);
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    let out = EstimateOutput { n_samples: table.n_samples(), means, two_point, v_main, k_point, checks };
    match cfg.format() {
        Format::Json => emit_json(cfg, &out)?,
        Format::Csv => {
            let tp = &out.two_point;
            let mut rows = vec![
                vec!["Y1_mean".into(), num(tp.means[0]), num(tp.mean_stderr[0]), String::new(), String::new(), String::new()],
                vec!["Y2_mean".into(), num(tp.means[1]), num(tp.mean_stderr[1]), String::new(), String::new(), String::new()],
                vec!["cov".into(), num(tp.cov), num(tp.cov_stderr), String::new(), String::new(), String::new()],
                vec!["ratio".into(), num(tp.ratio), num(tp.ratio_stderr), String::new(), String::new(), String::new()],
                vec!["F_eta".into(), num(tp.f_eta), num(tp.f_eta_stderr), String::new(), String::new(), String::new()],
            ];
            for c in &out.checks {
                rows.push(vec![
                    c.name.clone(),
                    num(c.estimate),
                    num(c.stderr),
                    num(c.reference),
                    num(c.allowance),
                    c.pass.to_string(),
                ]);
            }
            emit_csv(cfg, &["quantity", "estimate", "stderr", "reference", "allowance", "pass"], &rows, &[])?;
        }
    }
    if cfg.estimate.enforce && !failed.is_empty() {
        return Err(CliError::Numerical(format!("outside allowance: {}", failed.join(", "))));
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictOutput {
    prediction: TheoryPrediction,
    v_main: Option<VMain>,
}

pub fn run_predict(cfg: &RunConfig) -> Result<(), CliError> {
    let profile = build_profile(cfg)?;
    let window = cfg.window()?;
    let tf = &cfg.test_functions;
    let regime = Regime::from_tag(&cfg.predict.regime).map_err(lib_err("[predict.regime]"))?;
    let law = cfg.ensemble.law;
    let out = if regime == Regime::ExactVmain {
        let coeffs = ChebCoefficients::with_eta(profile.m, window.eta);
        let v = v_main_exact(&profile, &tf.phi1, &tf.phi2, &window, &coeffs, &law).map_err(lib_err(""))?;
        let p = theta_exact(&profile, &tf.phi1, &tf.phi2, &window, &coeffs, &law).map_err(lib_err(""))?;
        PredictOutput { prediction: p, v_main: Some(v) }
    } else {
        let constants = profile_constants(&profile).map_err(lib_err("[profile]"))?;
        let p = theta_predict(&window, &constants, &tf.phi1, &tf.phi2, regime, law.beta())
            .map_err(lib_err("[predict.regime]"))?;
        PredictOutput { prediction: p, v_main: None }
    };
    match cfg.format() {
        Format::Json => emit_json(cfg, &out),
        Format::Csv => {
            let p = &out.prediction;
            let mut rows = vec![
                vec!["regime".into(), p.regime.tag()],
                vec!["value".into(), num(p.value)],
                vec!["envelope".into(), num(p.envelope)],
            ];
            if let Some(v) = &out.v_main {
                rows.push(vec!["v_main".into(), num(v.value)]);
            }
            emit_csv(cfg, &["key", "value"], &rows, &[])
        }
    }
}

#[derive(Serialize)]
struct SweepPoint {
    #[serde(flatten)]
    row: SweepRow,
    flag: String,
}

#[derive(Serialize)]
struct SweepFits {
    monte_carlo: Option<SlopeFit>,
    exact_vmain: Option<SlopeFit>,
    asymptotic: Option<SlopeFit>,
}

#[derive(Serialize)]
struct SweepOutput {
    rows: Vec<SweepPoint>,
    fit: Option<SweepFits>,
    status: Option<String>,
}

fn sweep_point(cfg: &RunConfig, axis: Axis, value: f64) -> Result<SweepPoint, CliError> {
    let mut pc = cfg.profile()?.clone();
    let base = cfg.window.ok_or_else(|| CliError::Usage("[window] block is required".into()))?;
    let mut window = base;
    match axis {
        Axis::Eta => window.eta = value,
        Axis::Omega => {
            window = EnergyWindow { e1: base.e() - value / 2.0, e2: base.e() + value / 2.0, ..base };
        }
        Axis::W => pc.w = value as usize,
        Axis::L => pc.l = value as usize,
    }
    if matches!(axis, Axis::W | Axis::L) && (value.fract() != 0.0 || value < 1.0) {
        return Err(CliError::Usage(format!("[sweep.values] {value} is not a valid lattice size")));
    }
    window.validate().map_err(lib_err("[window]"))?;
    let profile = pc.build().map_err(lib_err("[profile]"))?;
    let lat = profile.lattice;
    let tf = &cfg.test_functions;
    let law = cfg.ensemble.law;
    let spec = EnsembleSpec::new(profile.clone(), law, cfg.seed);
    let obs = [
        Observable { phi: tf.phi1.clone(), e: window.e1, eta: window.eta },
        Observable { phi: tf.phi2.clone(), e: window.e2, eta: window.eta },
    ];
    let table = sample_table(&spec, &obs, cfg.n_samples, execution(cfg)).map_err(lib_err(""))?;
    let c = table.correlation(0, 1).map_err(lib_err("[n_samples]"))?;
    let lw = ((lat.l * lat.w) as f64).powi(lat.d as i32);
    let mut flags = Vec::new();
    let coeffs = ChebCoefficients::with_eta(profile.m, window.eta);
    let theory_vmain = match theta_exact(&profile, &tf.phi1, &tf.phi2, &window, &coeffs, &law) {
        Ok(p) => p.value / lw,
        Err(e) => {
            flags.push(format!("exact_vmain: {e}"));
            f64::NAN
        }
    };
    let theory_asymptotic = match &cfg.sweep.as_ref().and_then(|s| s.regime.clone()) {
        Some(tag) => {
            let regime = Regime::from_tag(tag).map_err(lib_err("[sweep.regime]"))?;
            let res = profile_constants(&profile)
                .and_then(|k| theta_predict(&window, &k, &tf.phi1, &tf.phi2, regime, law.beta()));
            match res {
                Ok(p) => p.value / lw,
                Err(e) => {
                    flags.push(format!("{tag}: {e}"));
                    f64::NAN
                }
            }
        }
        None => f64::NAN,
    };
    let row = SweepRow {
        d: lat.d,
        l: lat.l,
        w: lat.w,
        beta_or_law: law.label(),
        eta: window.eta,
        e1: window.e1,
        e2: window.e2,
        omega: window.omega(),
        n_samples: c.n_samples,
        y1_mean: c.means[0],
        y2_mean: c.means[1],
        cov: c.cov,
        cov_stderr: c.cov_stderr,
        ratio: c.ratio,
        ratio_stderr: c.ratio_stderr,
        theory_vmain,
        theory_asymptotic,
        seed: cfg.seed,
    };
    Ok(SweepPoint { row, flag: flags.join("; ") })
}

fn fit_abs(x: &[f64], y: &[f64], s: Option<&[f64]>) -> Option<SlopeFit> {
    let ya: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    if ya.iter().any(|v| !v.is_finite()) {
        return None;
    }
    log_log_fit(x, &ya, s).ok()
}

pub fn run_sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| CliError::Usage("[sweep] block is required".into()))?;
    if sw.values.len() < 3 {
        return Err(CliError::Usage(format!("[sweep.values] needs at least 3 grid points, got {}", sw.values.len())));
    }
    let mut rows = Vec::new();
    for &v in &sw.values {
        let p = sweep_point(cfg, sw.axis, v)?;
        if !p.flag.is_empty() {
            eprintln!("row {v}: {}", p.flag);
        }
        rows.push(p);
    }
    let (fit, status) = if sw.fit {
        let x = &sw.values;
        let y: Vec<f64> = rows.iter().map(|r| r.row.ratio).collect();
        let s: Vec<f64> = rows.iter().map(|r| r.row.ratio_stderr).collect();
        let mc = fit_abs(x, &y, Some(&s));
        let ex = fit_abs(x, &rows.iter().map(|r| r.row.theory_vmain).collect::<Vec<_>>(), None);
        let asym = fit_abs(x, &rows.iter().map(|r| r.row.theory_asymptotic).collect::<Vec<_>>(), None);
        let status = match (sw.slope_band, &mc) {
            (Some([lo, hi]), Some(f)) if f.ci_low >= lo && f.ci_high <= hi => Some("confirmed".to_string()),
            (Some(_), Some(_)) => Some("degraded: slope interval leaves the band; exact V_main is the binding check".into()),
            (Some(_), None) => Some("degraded: no Monte Carlo fit".into()),
            (None, _) => None,
        };
        (Some(SweepFits { monte_carlo: mc, exact_vmain: ex, asymptotic: asym }), status)
    } else {
        (None, None)
    };
    let out = SweepOutput { rows, fit, status };
    match cfg.format() {
        Format::Json => emit_json(cfg, &out),
        Format::Csv => {
            let mut header: Vec<&str> = SWEEP_COLUMNS.to_vec();
            header.push("flag");
            let body: Vec<Vec<String>> = out.rows.iter().map(|p| sweep_record(&p.row, &p.flag)).collect();
            let mut trailer = Vec::new();
            if let Some(f) = &out.fit {
                for (name, fit) in [("fit_monte_carlo", &f.monte_carlo), ("fit_exact_vmain", &f.exact_vmain), ("fit_asymptotic", &f.asymptotic)] {
                    if let Some(fit) = fit {
                        trailer.push(format!("{name}: slope={} ci=[{}, {}]", fit.slope, fit.ci_low, fit.ci_high));
                    }
                }
            }
            if let Some(s) = &out.status {
                trailer.push(format!("status: {s}"));
            }
            emit_csv(cfg, &header, &body, &trailer)
        }
    }
}

fn sweep_record(r: &SweepRow, flag: &str) -> Vec<String> {
    vec![
        r.d.to_string(),
        r.l.to_string(),
        r.w.to_string(),
        r.beta_or_law.clone(),
        num(r.eta),
        num(r.e1),
        num(r.e2),
        num(r.omega),
        r.n_samples.to_string(),
        num(r.y1_mean),
        num(r.y2_mean),
        num(r.cov),
        num(r.cov_stderr),
        num(r.ratio),
        num(r.ratio_stderr),
        num(r.theory_vmain),
        num(r.theory_asymptotic),
        r.seed.to_string(),
        flag.to_string(),
    ]
}
