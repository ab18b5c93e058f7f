//! Reproducible sampling of Hermitian band matrices.
//!
//! Every entry `H_{xy}` (`x <= y`) is drawn from its own position of a
//! ChaCha8 stream keyed by the base seed and the sample index, so a sample
//! does not depend on the order in which entries or samples are produced.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, ProfileSpec};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, symmetric_eigenvalues, CMat};

/// Symmetry residual above which a matrix is rejected as non-Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

const DUMP_MAGIC: &[u8; 4] = b"BMSO";
const WORDS_PER_ENTRY: u128 = 16;

/// Symmetric real law for the components of general entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubLaw {
    Rademacher,
    Gaussian,
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    UniformBounded,
}

impl SubLaw {
    fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            SubLaw::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            SubLaw::Gaussian => rng.sample(StandardNormal),
            SubLaw::UniformBounded => 3f64.sqrt() * (2.0 * rng.gen::<f64>() - 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Law {
    /// `beta = 1`: `A_{xy} = +-1`.
    UnimodularReal,
    /// `beta = 2`: `A_{xy}` uniform on the unit circle.
    UnimodularComplex,
    /// `E|A|^2 = 1`, `E A^2 = T_{xy}/S_{xy}`.
    GeneralSymmetric { sub_law: SubLaw },
}

impl Law {
    pub fn beta(&self) -> Option<u8> {
        match self {
            Law::UnimodularReal => Some(1),
            Law::UnimodularComplex => Some(2),
            Law::GeneralSymmetric { .. } => None,
        }
    }

    pub fn is_unimodular(&self) -> bool {
        self.beta().is_some()
    }

    pub fn label(&self) -> String {
        match self {
            Law::UnimodularReal => "beta1".into(),
            Law::UnimodularComplex => "beta2".into(),
            Law::GeneralSymmetric { sub_law } => format!("general_{}", match sub_law {
                SubLaw::Rademacher => "rademacher",
                SubLaw::Gaussian => "gaussian",
                SubLaw::UniformBounded => "uniform",
            }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub profile: Arc<ProfileSpec>,
    pub law: Law,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(profile: ProfileSpec, law: Law, seed: u64) -> Self {
        EnsembleSpec { profile: Arc::new(profile), law, seed }
    }

    /// True when samples are real symmetric.
    pub fn is_real(&self) -> bool {
        match self.law {
            Law::UnimodularReal => true,
            Law::UnimodularComplex => false,
            Law::GeneralSymmetric { .. } => self.profile.t_equals_s(),
        }
    }
}

/// One realization of `H`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    pub lattice: LatticeSpec,
    pub law: Law,
    pub seed: u64,
    pub index: u64,
    /// All imaginary parts are zero.
    pub real: bool,
    pub h: CMat,
}

fn entry_rng(seed: u64, index: u64, n: usize, x: usize, y: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.set_word_pos((x as u128 * n as u128 + y as u128) * WORDS_PER_ENTRY);
    rng
}

/// Draws sample number `index`; a pure function of `(spec, index)`.
pub fn sample(spec: &EnsembleSpec, index: u64) -> BandMatrix {
    let p = &spec.profile;
    let lat = p.lattice;
    let n = lat.n();
    let row = p.row();
    let trow = p.trow();
    let mut h = CMat::zeros(n);
    for x in 0..n {
        for &z in p.support() {
            let y = lat.diff(x, z);
            if y < x {
                continue;
            }
            let s = row[z];
            let amp = s.sqrt();
            let mut rng = entry_rng(spec.seed, index, n, x, y);
            let v = if x == y {
                let a = match spec.law {
                    Law::UnimodularReal | Law::UnimodularComplex => SubLaw::Rademacher.draw(&mut rng),
                    Law::GeneralSymmetric { sub_law } => sub_law.draw(&mut rng),
                };
                Complex64::new(amp * a, 0.0)
            } else {
                match spec.law {
                    Law::UnimodularReal => Complex64::new(amp * SubLaw::Rademacher.draw(&mut rng), 0.0),
                    Law::UnimodularComplex => {
                        let u: f64 = rng.gen();
                        Complex64::from_polar(amp, 2.0 * PI * u)
                    }
                    Law::GeneralSymmetric { sub_law } => {
                        let tau = trow[z] / s;
                        let (r, theta) = tau.to_polar();
                        let r = r.min(1.0);
                        let a = ((1.0 + r) / 2.0).sqrt();
                        let b = ((1.0 - r) / 2.0).sqrt();
                        let xr = sub_law.draw(&mut rng);
                        let yr = sub_law.draw(&mut rng);
                        Complex64::from_polar(amp, theta / 2.0) * Complex64::new(a * xr, b * yr)
                    }
                }
            };
            h.set(x, y, v);
            h.set(y, x, v.conj());
        }
    }
    BandMatrix { lattice: lat, law: spec.law, seed: spec.seed, index, real: spec.is_real(), h }
}

/// Sorted eigenvalues of `H/2`.
pub fn eigenvalues(m: &BandMatrix) -> Result<Vec<f64>> {
    let res = m.h.hermiticity_residual();
    if res > HERMITIAN_TOL {
        return Err(Error::NotHermitian(res));
    }
    let ev = if m.real {
        let n = m.h.n();
        let re: Vec<f64> = m.h.as_slice().iter().map(|c| c.re).collect();
        symmetric_eigenvalues(&re, n)?
    } else {
        hermitian_eigenvalues(&m.h)?
    };
    Ok(ev.into_iter().map(|v| 0.5 * v).collect())
}

/// Eigenvalues of `H/2` with eigenvectors (columns).
pub fn eigenpairs(m: &BandMatrix) -> Result<(Vec<f64>, CMat)> {
    let res = m.h.hermiticity_residual();
    if res > HERMITIAN_TOL {
        return Err(Error::NotHermitian(res));
    }
    let (ev, v) = hermitian_eigen(&m.h)?;
    Ok((ev.into_iter().map(|x| 0.5 * x).collect(), v))
}

/// Displacement-resolved second moments of the entries.
#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub n_samples: usize,
    pub displacements: Vec<DisplacementMoments>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DisplacementMoments {
    /// Lattice index of `x - y`.
    pub z: usize,
    pub s: f64,
    pub t: Complex64,
    pub mean: Complex64,
    pub mean_stderr: f64,
    pub abs2: f64,
    pub abs2_stderr: f64,
    pub sq: Complex64,
    pub sq_stderr: f64,
}

/// Estimates `E H`, `E|H|^2`, `E H^2` per displacement, averaging over
/// translations within each sample and reporting across-sample errors.
pub fn empirical_moments(spec: &EnsembleSpec, n_samples: usize) -> Result<MomentReport> {
    if n_samples < 100 {
        return Err(Error::Samples(format!("{n_samples} samples, at least 100 required")));
    }
    let p = &spec.profile;
    let lat = p.lattice;
    let n = lat.n();
    let support = p.support().to_vec();
    let k = support.len();
    let mut acc = vec![[Complex64::new(0.0, 0.0); 6]; k];
    for i in 0..n_samples {
        let m = sample(spec, i as u64);
        for (j, &z) in support.iter().enumerate() {
            let mut mean = Complex64::new(0.0, 0.0);
            let mut abs2 = 0.0;
            let mut sq = Complex64::new(0.0, 0.0);
            for x in 0..n {
                let v = m.h.get(x, lat.diff(x, z));
                mean += v;
                abs2 += v.norm_sqr();
                sq += v * v;
            }
            let nf = n as f64;
            let (mean, abs2, sq) = (mean / nf, abs2 / nf, sq / nf);
            let a = &mut acc[j];
            a[0] += mean;
            a[1] += mean.norm_sqr();
            a[2] += abs2;
            a[3] += abs2 * abs2;
            a[4] += sq;
            a[5] += sq.norm_sqr();
        }
    }
    let ns = n_samples as f64;
    let err = |sum: f64, sum2: f64| -> f64 {
        let mu = sum / ns;
        ((sum2 / ns - mu * mu).max(0.0) / (ns - 1.0)).sqrt()
    };
    let displacements = support
        .iter()
        .zip(&acc)
        .map(|(&z, a)| DisplacementMoments {
            z,
            s: p.row()[z],
            t: p.trow()[z],
            mean: a[0] / ns,
            mean_stderr: err_complex(a[0], a[1].re, ns),
            abs2: a[2].re / ns,
            abs2_stderr: err(a[2].re, a[3].re),
            sq: a[4] / ns,
            sq_stderr: err_complex(a[4], a[5].re, ns),
        })
        .collect();
    Ok(MomentReport { n_samples, displacements })
}

fn err_complex(sum: Complex64, sum_abs2: f64, ns: f64) -> f64 {
    let mu = sum / ns;
    ((sum_abs2 / ns - mu.norm_sqr()).max(0.0) / (ns - 1.0)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "W")]
    pub w: usize,
    pub n: usize,
    pub law: Law,
    pub seed: u64,
    pub index: u64,
}

/// Binary dump: `BMSO`, `u64` header length, JSON header, then `N^2`
/// little-endian `(re, im)` pairs in row-major order.
pub fn write_dump(path: &Path, m: &BandMatrix) -> Result<()> {
    let header = DumpHeader {
        d: m.lattice.d,
        l: m.lattice.l,
        w: m.lattice.w,
        n: m.h.n(),
        law: m.law,
        seed: m.seed,
        index: m.index,
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(12 + json.len() + 16 * m.h.as_slice().len());
    buf.extend_from_slice(DUMP_MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for c in m.h.as_slice() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Reads a dump and checks Hermiticity.
pub fn read_dump(path: &Path) -> Result<(DumpHeader, BandMatrix)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 12 || &buf[..4] != DUMP_MAGIC {
        return Err(Error::Io("not a matrix dump".into()));
    }
    let hlen = u64::from_le_bytes(buf[4..12].try_into().unwrap()) as usize;
    let body = 12 + hlen;
    if buf.len() < body {
        return Err(Error::Io("truncated dump header".into()));
    }
    let header: DumpHeader = serde_json::from_slice(&buf[12..body])?;
    let n = header.n;
    if buf.len() != body + 16 * n * n {
        return Err(Error::Io("dump size does not match its header".into()));
    }
    let data: Vec<Complex64> = buf[body..]
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    let h = CMat::from_vec(n, data);
    let res = h.hermiticity_residual();
    if res > HERMITIAN_TOL {
        return Err(Error::NotHermitian(res));
    }
    let lattice = LatticeSpec::new(header.d, header.l, header.w)?;
    let real = h.as_slice().iter().all(|c| c.im == 0.0);
    let m = BandMatrix { lattice, law: header.law, seed: header.seed, index: header.index, real, h };
    Ok((header, m))
}

/// Eigenvalue CSV: `index,eigenvalue`.
pub fn eigenvalues_csv(ev: &[f64]) -> String {
    let mut s = String::from("index,eigenvalue\n");
    for (i, v) in ev.iter().enumerate() {
        s.push_str(&format!("{i},{v:.17e}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_step_profile;

    #[test]
    fn unimodular_moduli() {
        let p = build_step_profile(LatticeSpec::new(1, 30, 4).unwrap()).unwrap();
        let s = 1.0 / (p.m - 1.0);
        for law in [Law::UnimodularReal, Law::UnimodularComplex] {
            let spec = EnsembleSpec::new(p.clone(), law, 11);
            let m = sample(&spec, 3);
            assert_eq!(m.h.hermiticity_residual(), 0.0);
            for x in 0..30 {
                for y in 0..30 {
                    let v = m.h.get(x, y);
                    if p.s(x, y) > 0.0 {
                        assert!((v.norm_sqr() - s).abs() < 1e-15 * s.max(1.0));
                    } else {
                        assert_eq!(v, Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn two_by_two_spectrum() {
        let s = Complex64::new(0.6, 0.8);
        let m = BandMatrix {
            lattice: LatticeSpec::new(1, 2, 1).unwrap(),
            law: Law::UnimodularComplex,
            seed: 0,
            index: 0,
            real: false,
            h: CMat::from_vec(2, vec![Complex64::new(0.0, 0.0), s, s.conj(), Complex64::new(0.0, 0.0)]),
        };
        let ev = eigenvalues(&m).unwrap();
        assert!((ev[0] + 0.5).abs() < 1e-15 && (ev[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut h = CMat::zeros(2);
        h.set(0, 1, Complex64::new(1.0, 0.0));
        let m = BandMatrix {
            lattice: LatticeSpec::new(1, 2, 1).unwrap(),
            law: Law::UnimodularReal,
            seed: 0,
            index: 0,
            real: true,
            h,
        };
        assert!(matches!(eigenvalues(&m), Err(Error::NotHermitian(_))));
    }
}
