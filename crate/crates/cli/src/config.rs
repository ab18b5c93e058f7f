//! Run configuration: TOML or JSON files, shipped presets and flag overrides.

use std::path::{Path, PathBuf};

use bandmeso::ensemble::Law;
use bandmeso::lattice::ProfileConfig;
use bandmeso::stats::EnergyWindow;
use bandmeso::testfn::TestFunction;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Profile,
    Sample,
    Estimate,
    Predict,
    Verify,
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "omega")]
    Omega,
    #[serde(rename = "W")]
    W,
    #[serde(rename = "L")]
    L,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    pub law: Law,
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        EnsembleBlock { law: Law::UnimodularComplex }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctions {
    #[serde(default = "cauchy")]
    pub phi1: TestFunction,
    #[serde(default = "cauchy")]
    pub phi2: TestFunction,
}

fn cauchy() -> TestFunction {
    TestFunction::Cauchy
}

impl Default for TestFunctions {
    fn default() -> Self {
        TestFunctions { phi1: cauchy(), phi2: cauchy() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EstimateBlock {
    /// Extra energies at which `phi1` means are compared with `2 pi nu(E)`.
    #[serde(default)]
    pub semicircle_energies: Vec<f64>,
    #[serde(default)]
    pub compare_vmain: bool,
    /// Column lists over the observables `[phi1 @ E1, phi2 @ E2]`.
    #[serde(default)]
    pub k_point: Vec<Vec<usize>>,
    /// Exit with status 1 when a comparison falls outside its allowance.
    #[serde(default)]
    pub enforce: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictBlock {
    #[serde(default = "exact_regime")]
    pub regime: String,
}

fn exact_regime() -> String {
    "exact_vmain".into()
}

impl Default for PredictBlock {
    fn default() -> Self {
        PredictBlock { regime: exact_regime() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub axis: Axis,
    pub values: Vec<f64>,
    /// Closed-form regime for the `theory_asymptotic` column.
    #[serde(default)]
    pub regime: Option<String>,
    #[serde(default = "yes")]
    pub fit: bool,
    /// Band for the slope status: `confirmed` when the interval lies inside,
    /// `degraded` when it does not.
    #[serde(default)]
    pub slope_band: Option<[f64; 2]>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBlock {
    #[serde(default)]
    pub index: u64,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub dump: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl Default for SampleBlock {
    fn default() -> Self {
        SampleBlock { index: 0, count: 1, dump: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    #[serde(default)]
    pub suite: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub profile: Option<ProfileConfig>,
    #[serde(default)]
    pub ensemble: EnsembleBlock,
    #[serde(default)]
    pub window: Option<EnergyWindow>,
    #[serde(default)]
    pub test_functions: TestFunctions,
    #[serde(default)]
    pub estimate: EstimateBlock,
    #[serde(default)]
    pub predict: PredictBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub sample: SampleBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
}

fn default_seed() -> u64 {
    1
}

fn default_samples() -> usize {
    2000
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

impl RunConfig {
    pub fn profile(&self) -> Result<&ProfileConfig, CliError> {
        self.profile.as_ref().ok_or_else(|| CliError::Usage("[profile] block is required".into()))
    }

    pub fn window(&self) -> Result<EnergyWindow, CliError> {
        let w = self.window.ok_or_else(|| CliError::Usage("[window] block is required".into()))?;
        w.validate().map_err(|e| CliError::Usage(format!("[window] {e}")))?;
        Ok(w)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }
}

/// Parses TOML text, or JSON when the text starts with `{`. A JSON artifact
/// with a `config` key, or a CSV artifact with its `# {..}` echo line,
/// yields the echoed configuration.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    let trimmed = text.trim_start();
    if let Some(rest) = trimmed.strip_prefix("# {") {
        let line = rest.lines().next().unwrap_or("");
        return parse_config(&format!("{{{line}"), origin);
    }
    if trimmed.starts_with('{') {
        let value: serde_json::Value =
            serde_json::from_str(trimmed).map_err(|e| CliError::Usage(format!("{origin}: {e}")))?;
        let value = match value.get("config") {
            Some(c) => c.clone(),
            None => value,
        };
        return serde_json::from_value(value).map_err(|e| CliError::Usage(format!("{origin}: {e}")));
    }
    toml::from_str(text).map_err(|e| CliError::Usage(format!("{origin}: {e}")))
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

/// Shipped presets, one per acceptance criterion plus the `s_int` suite.
pub const PRESETS: &[(&str, &str)] = &[
    ("c01_cheb_identity", include_str!("../presets/c01_cheb_identity.toml")),
    ("c02_general_recursion", include_str!("../presets/c02_general_recursion.toml")),
    ("c03_coefficients", include_str!("../presets/c03_coefficients.toml")),
    ("c04_cauchy_gamma", include_str!("../presets/c04_cauchy_gamma.toml")),
    ("c05_constants", include_str!("../presets/c05_constants.toml")),
    ("c06_traces", include_str!("../presets/c06_traces.toml")),
    ("c07_semicircle", include_str!("../presets/c07_semicircle.toml")),
    ("c08_dumbbell_omega0", include_str!("../presets/c08_dumbbell_omega0.toml")),
    ("c08_dumbbell_omega045", include_str!("../presets/c08_dumbbell_omega045.toml")),
    ("c09_wick", include_str!("../presets/c09_wick.toml")),
    ("c10_eta_slope", include_str!("../presets/c10_eta_slope.toml")),
    ("c11_lclt", include_str!("../presets/c11_lclt.toml")),
    ("c12_sigma_interpolation", include_str!("../presets/c12_sigma_interpolation.toml")),
    ("s_int", include_str!("../presets/s_int.toml")),
];

pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::Usage(format!("unknown preset `{name}`; available: {}", names.join(", ")))
    })?;
    parse_config(text, &format!("preset {name}"))
}
