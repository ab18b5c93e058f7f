//! Smoothed linear statistics and Monte Carlo correlation estimators.

use serde::{Deserialize, Serialize};

use crate::cheb::{nb_traces_via_cheb, GammaTable};
use crate::ensemble::{eigenvalues, sample, EnsembleSpec};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::par::{map_indexed, Execution};
use crate::testfn::TestFunction;

/// Number of batches used for standard errors.
pub const BATCHES: usize = 20;

/// Energies `E1 <= E2` in the bulk with resolution `eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub e1: f64,
    pub e2: f64,
    pub eta: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_kappa() -> f64 {
    0.1
}

impl EnergyWindow {
    pub fn new(e1: f64, e2: f64, eta: f64, kappa: f64) -> Result<Self> {
        let w = EnergyWindow { e1, e2, eta, kappa };
        w.validate()?;
        Ok(w)
    }

    /// Window centred at `e` with separation `omega`.
    pub fn centred(e: f64, omega: f64, eta: f64) -> Result<Self> {
        Self::new(e - omega / 2.0, e + omega / 2.0, eta, default_kappa())
    }

    pub fn validate(&self) -> Result<()> {
        let lim = 1.0 - self.kappa;
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Validation(format!("kappa = {} outside (0,1)", self.kappa)));
        }
        if self.e1.abs() > lim || self.e2.abs() > lim {
            return Err(Error::Validation(format!(
                "energies {} and {} must lie in [-1+kappa, 1-kappa] with kappa = {}",
                self.e1, self.e2, self.kappa
            )));
        }
        if self.e2 < self.e1 {
            return Err(Error::Validation("omega = E2 - E1 must be nonnegative".into()));
        }
        if self.omega() > 0.5 {
            return Err(Error::Validation(format!("omega = {} exceeds 0.5", self.omega())));
        }
        if !(self.eta > 0.0) {
            return Err(Error::Validation(format!("eta = {} must be positive", self.eta)));
        }
        Ok(())
    }

    pub fn e(&self) -> f64 {
        0.5 * (self.e1 + self.e2)
    }

    pub fn omega(&self) -> f64 {
        self.e2 - self.e1
    }

    /// Thouless energy `W^2/L^2`.
    pub fn eta_c(lattice: &LatticeSpec) -> f64 {
        let r = lattice.w as f64 / lattice.l as f64;
        r * r
    }
}

/// `Y = (1/N) sum_i phi^eta(l_i - E)`.
pub fn eval_y_spectral(spectrum: &[f64], phi: &TestFunction, eta: f64, e: f64) -> f64 {
    let s: f64 = spectrum.iter().map(|&l| phi.eval_scaled(l - e, eta)).sum();
    s / spectrum.len() as f64
}

/// Chebyshev-route value of `Y` together with its spectral counterpart.
#[derive(Clone, Debug, Serialize)]
pub struct ChebY {
    pub value: f64,
    pub spectral: f64,
    pub rel_dev: f64,
    /// Deviation above tolerance, or the identity was used off the unimodular ensemble.
    pub flagged: bool,
    pub orders: usize,
}

/// `Y = (1/N) sum_{n <= n_max} 2 Re gamma~_n tr H^(n)` with traces from the
/// spectrum of `H/2`.
pub fn eval_y_chebyshev(
    spectrum: &[f64],
    phi: &TestFunction,
    table: &GammaTable,
    r: f64,
    unimodular: bool,
    tol: f64,
) -> ChebY {
    let value = eval_y_chebyshev_partial(spectrum, table, r, table.n_max());
    let spectral = eval_y_spectral(spectrum, phi, table.eta, table.e);
    let rel_dev = (value - spectral).abs() / spectral.abs().max(f64::MIN_POSITIVE);
    ChebY { value, spectral, rel_dev, flagged: rel_dev > tol || !unimodular, orders: table.n_max() + 1 }
}

/// Partial sum of the Chebyshev route over orders `0..=upto`.
pub fn eval_y_chebyshev_partial(spectrum: &[f64], table: &GammaTable, r: f64, upto: usize) -> f64 {
    let upto = upto.min(table.n_max());
    let tr = nb_traces_via_cheb(spectrum, upto, r, true);
    let s: f64 = (0..=upto).map(|n| table.g(n) * tr.traces[n]).sum();
    s / spectrum.len() as f64
}

/// One smoothed statistic `Y^eta_phi(E)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub phi: TestFunction,
    pub e: f64,
    pub eta: f64,
}

/// Values of several observables on the same samples; `values[i][j]` is
/// observable `j` on sample `i`.
#[derive(Clone, Debug, Serialize)]
pub struct SampleTable {
    pub n: usize,
    pub values: Vec<Vec<f64>>,
}

/// Samples `0..n_samples` and evaluates every observable on each spectrum.
pub fn sample_table(
    spec: &EnsembleSpec,
    observables: &[Observable],
    n_samples: usize,
    exec: Execution,
) -> Result<SampleTable> {
    let rows: Vec<Result<Vec<f64>>> = map_indexed(exec, n_samples, |i| {
        let m = sample(spec, i as u64);
        let ev = eigenvalues(&m)?;
        Ok(observables.iter().map(|o| eval_y_spectral(&ev, &o.phi, o.eta, o.e)).collect())
    });
    let values = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SampleTable { n: spec.profile.n(), values })
}

impl SampleTable {
    pub fn n_samples(&self) -> usize {
        self.values.len()
    }

    /// Sub-table of the first `k` samples.
    pub fn head(&self, k: usize) -> SampleTable {
        SampleTable { n: self.n, values: self.values[..k.min(self.values.len())].to_vec() }
    }

    pub fn mean(&self, j: usize) -> f64 {
        self.values.iter().map(|r| r[j]).sum::<f64>() / self.n_samples() as f64
    }

    /// Mean and its standard error.
    pub fn mean_with_error(&self, j: usize) -> (f64, f64) {
        let m = self.mean(j);
        let n = self.n_samples() as f64;
        let var = self.values.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    /// Batch means of `f(row)` over [`BATCHES`] contiguous batches, and the
    /// overall mean with its standard error.
    pub fn batch_estimate<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<(f64, f64)> {
        let n = self.n_samples();
        if n < 2 * BATCHES {
            return Err(Error::Samples(format!("{n} samples cannot fill {BATCHES} batches of two")));
        }
        let mut means = Vec::with_capacity(BATCHES);
        for b in 0..BATCHES {
            let lo = b * n / BATCHES;
            let hi = (b + 1) * n / BATCHES;
            let s: f64 = self.values[lo..hi].iter().map(|r| f(r)).sum();
            means.push(s / (hi - lo) as f64);
        }
        let total: f64 = self.values.iter().map(|r| f(r)).sum::<f64>() / n as f64;
        let bm = means.iter().sum::<f64>() / BATCHES as f64;
        let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (BATCHES as f64 - 1.0);
        Ok((total, (var / BATCHES as f64).sqrt()))
    }

    /// Two-point estimate for observables `j`, `k`.
    pub fn correlation(&self, j: usize, k: usize) -> Result<CorrelationEstimate> {
        let n = self.n_samples();
        let (m1, e1) = self.mean_with_error(j);
        let (m2, e2) = self.mean_with_error(k);
        let (cov, cov_se) = self.batch_estimate(|r| (r[j] - m1) * (r[k] - m2))?;
        let unbias = n as f64 / (n as f64 - 1.0);
        let cov = cov * unbias;
        let cov_se = cov_se * unbias;
        let var1 = self.batch_estimate(|r| (r[j] - m1).powi(2))?.0 * unbias;
        let var2 = self.batch_estimate(|r| (r[k] - m2).powi(2))?.0 * unbias;
        let nn = (self.n as f64).powi(2);
        Ok(CorrelationEstimate {
            n_samples: n,
            means: [m1, m2],
            mean_stderr: [e1, e2],
            cov,
            cov_stderr: cov_se,
            var: [var1, var2],
            ratio: cov / (m1 * m2),
            ratio_stderr: cov_se / (m1 * m2).abs(),
            f_eta: nn * cov,
            f_eta_stderr: nn * cov_se,
        })
    }
}

/// Monte Carlo two-point estimate; `F^eta = N^2 <Y1; Y2>`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub n_samples: usize,
    pub means: [f64; 2],
    pub mean_stderr: [f64; 2],
    pub cov: f64,
    pub cov_stderr: f64,
    pub var: [f64; 2],
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub f_eta: f64,
    pub f_eta_stderr: f64,
}

/// `<Y1(E1); Y2(E2)>` estimated from `n_samples` draws.
pub fn mc_two_point(
    spec: &EnsembleSpec,
    phi1: &TestFunction,
    phi2: &TestFunction,
    window: &EnergyWindow,
    n_samples: usize,
    exec: Execution,
) -> Result<CorrelationEstimate> {
    window.validate()?;
    if n_samples < 2 * BATCHES {
        return Err(Error::Samples(format!("{n_samples} samples cannot fill {BATCHES} batches of two")));
    }
    let obs = [
        Observable { phi: phi1.clone(), e: window.e1, eta: window.eta },
        Observable { phi: phi2.clone(), e: window.e2, eta: window.eta },
    ];
    sample_table(spec, &obs, n_samples, exec)?.correlation(0, 1)
}

/// k-point moment of `X_i = (Y_i - EY_i)/EY_i` and its Wick pairing sum.
#[derive(Clone, Debug, Serialize)]
pub struct KPointReport {
    pub k: usize,
    pub moment: f64,
    pub moment_stderr: f64,
    /// `E(X_i X_j)` estimates.
    pub pair: Vec<Vec<f64>>,
    pub wick: f64,
    pub residual: f64,
}

/// Maximum supported order.
pub const K_MAX: usize = 6;

pub fn k_point_from_table(table: &SampleTable, cols: &[usize]) -> Result<KPointReport> {
    let k = cols.len();
    if k == 0 || k > K_MAX {
        return Err(Error::Validation(format!("k = {k} outside 1..={K_MAX}")));
    }
    let means: Vec<f64> = cols.iter().map(|&c| table.mean(c)).collect();
    let x = |r: &[f64], i: usize| (r[cols[i]] - means[i]) / means[i];
    let (moment, moment_stderr) = table.batch_estimate(|r| (0..k).map(|i| x(r, i)).product())?;
    let mut pair = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            pair[i][j] = table.batch_estimate(|r| x(r, i) * x(r, j))?.0;
        }
    }
    let wick = pairing_sum(&pair, &(0..k).collect::<Vec<_>>());
    Ok(KPointReport { k, moment, moment_stderr, residual: moment - wick, pair, wick })
}

/// Sum over perfect matchings of `idx` of products of `pair` entries; zero
/// for odd sizes.
pub fn pairing_sum(pair: &[Vec<f64>], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    if idx.len() % 2 == 1 {
        return 0.0;
    }
    let first = idx[0];
    let mut total = 0.0;
    for p in 1..idx.len() {
        let rest: Vec<usize> = idx[1..].iter().enumerate().filter(|&(q, _)| q + 1 != p).map(|(_, &v)| v).collect();
        total += pair[first][idx[p]] * pairing_sum(pair, &rest);
    }
    total
}

/// k-point moments for observables `(phis[i], es[i])` at a common `eta`.
pub fn mc_k_point(
    spec: &EnsembleSpec,
    phis: &[TestFunction],
    es: &[f64],
    eta: f64,
    n_samples: usize,
    exec: Execution,
) -> Result<KPointReport> {
    if phis.len() != es.len() {
        return Err(Error::Validation("phis and energies differ in length".into()));
    }
    let obs: Vec<Observable> = phis
        .iter()
        .zip(es)
        .map(|(p, &e)| Observable { phi: p.clone(), e, eta })
        .collect();
    let table = sample_table(spec, &obs, n_samples, exec)?;
    k_point_from_table(&table, &(0..obs.len()).collect::<Vec<_>>())
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub beta_or_law: String,
    pub eta: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    pub omega: f64,
    pub n_samples: usize,
    #[serde(rename = "Y1_mean")]
    pub y1_mean: f64,
    #[serde(rename = "Y2_mean")]
    pub y2_mean: f64,
    pub cov: f64,
    pub cov_stderr: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub theory_vmain: f64,
    pub theory_asymptotic: f64,
    pub seed: u64,
}

/// Column order of the sweep CSV.
pub const SWEEP_COLUMNS: [&str; 18] = [
    "d", "L", "W", "beta_or_law", "eta", "E1", "E2", "omega", "n_samples", "Y1_mean", "Y2_mean", "cov",
    "cov_stderr", "ratio", "ratio_stderr", "theory_vmain", "theory_asymptotic", "seed",
];

/// Least-squares slope of `log y` against `log x` with a 95% interval
/// from the Student t quantile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Weighted fit when `sigma_y` (errors of `y`) is given; the error of
/// `log y` is then `sigma_y / y`.
pub fn log_log_fit(x: &[f64], y: &[f64], sigma_y: Option<&[f64]>) -> Result<SlopeFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::Validation("log-log fit needs at least 3 points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let w: Vec<f64> = match sigma_y {
        Some(s) => s.iter().zip(y).map(|(s, y)| (y / s.max(1e-300)).powi(2)).collect(),
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let mx = lx.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = ly.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = lx.iter().zip(&w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).zip(&w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if sigma_y.is_some() {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = lx.iter().zip(&ly).map(|(a, c)| (c - intercept - slope * a).powi(2)).sum();
        (rss / (n as f64 - 2.0) / sxx).sqrt()
    };
    let q = if sigma_y.is_some() { 1.96 } else { student_t975(n - 2) };
    Ok(SlopeFit { slope, intercept, stderr, ci_low: slope - q * stderr, ci_high: slope + q * stderr })
}

fn student_t975(dof: usize) -> f64 {
    const T: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    if dof == 0 {
        f64::INFINITY
    } else if dof <= 10 {
        T[dof - 1]
    } else {
        1.96 + 2.4 / dof as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_eigenvalue_cauchy() {
        let y = eval_y_spectral(&[0.3, 5.0, -7.0], &TestFunction::Cauchy, 0.01, 0.3);
        assert!((y - (2.0 / 0.01 + 2.0 * 0.01 / (4.7f64.powi(2) + 1e-4) + 2.0 * 0.01 / (7.3f64.powi(2) + 1e-4)) / 3.0).abs() < 1e-9);
    }

    #[test]
    fn pairings_of_four() {
        let p = vec![vec![1.0, 2.0, 3.0, 4.0]; 4];
        let mut pair = p.clone();
        for i in 0..4 {
            for j in 0..4 {
                pair[i][j] = (i + j + 1) as f64;
            }
        }
        // (01)(23) + (02)(13) + (03)(12) = 2*6 + 3*5 + 4*4
        assert_eq!(pairing_sum(&pair, &[0, 1, 2, 3]), 43.0);
        assert_eq!(pairing_sum(&pair, &[0, 1, 2]), 0.0);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        let fit = log_log_fit(&x, &y, None).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-12);
    }
}
