//! Experiment configuration: TOML file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use gridmask_core::attack::{FlowMode, SolveOptions, MAX_TAU};
use gridmask_core::case::{default_candidates, is_islanding_line, parse_matpower, parse_native};
use gridmask_core::{case39, GridCase, LineId, PmuPlacement};
use serde::{Deserialize, Serialize};

/// PMU placement used in the 39-bus study.
pub const NE39_PMU_BUSES: [u32; 5] = [4, 13, 18, 23, 24];

/// The 24 lines of the 39-bus masking study. The list keeps 16-19 (a bridge)
/// and 10-13 (touching the PMU at bus 13) as published, and omits 6-11 and
/// 28-29, which the automatic candidate rule would include.
pub const NE39_STUDY_LINES: [&str; 24] = [
    "1-2", "1-39", "2-3", "2-25", "5-6", "5-8", "6-7", "7-8", "8-9", "9-39", "10-11", "10-13", "12-11", "14-15",
    "15-16", "16-17", "16-19", "16-21", "17-27", "21-22", "25-26", "26-27", "26-28", "26-29",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => bail!("unknown format '{other}' (csv | json)"),
        }
    }
}

/// Which lines the detector ranks.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy", into = "RawPolicy")]
pub enum CandidatePolicy {
    /// In-service, non-islanding lines not touching a PMU bus.
    #[default]
    Auto,
    /// The published 24-line list (39-bus only).
    Study,
    List(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawPolicy {
    Name(String),
    List(Vec<String>),
}

impl TryFrom<RawPolicy> for CandidatePolicy {
    type Error = String;

    fn try_from(raw: RawPolicy) -> Result<Self, String> {
        match raw {
            RawPolicy::Name(s) => s.parse().map_err(|e: anyhow::Error| e.to_string()),
            RawPolicy::List(v) => Ok(CandidatePolicy::List(v)),
        }
    }
}

impl From<CandidatePolicy> for RawPolicy {
    fn from(p: CandidatePolicy) -> Self {
        match p {
            CandidatePolicy::Auto => RawPolicy::Name("auto".into()),
            CandidatePolicy::Study => RawPolicy::Name("study".into()),
            CandidatePolicy::List(v) => RawPolicy::List(v),
        }
    }
}

impl FromStr for CandidatePolicy {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(CandidatePolicy::Auto),
            "study" => Ok(CandidatePolicy::Study),
            "" => bail!("empty candidate list"),
            list => Ok(CandidatePolicy::List(split_list(list))),
        }
    }
}

impl fmt::Display for CandidatePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidatePolicy::Auto => f.write_str("auto"),
            CandidatePolicy::Study => f.write_str("study"),
            CandidatePolicy::List(v) => f.write_str(&v.join(",")),
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of the simulated PMU angle noise, degrees.
    pub sigma_deg: f64,
    pub seed: u64,
    /// Relative noise of the non-PMU measurements (0.01 = 1%).
    pub measurement_frac: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma_deg: 0.0,
            seed: 0,
            measurement_frac: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        SolverConfig {
            starts: d.starts,
            seed: d.seed,
            max_iter: d.max_iter,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            starts: self.starts,
            seed: self.seed,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Case file; the bundled 39-bus case when absent.
    pub case: Option<PathBuf>,
    pub pmu: Vec<u32>,
    pub candidates: CandidatePolicy,
    pub tau: Vec<f64>,
    pub flow_mode: FlowMode,
    pub noise: NoiseConfig,
    pub solver: SolverConfig,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            case: None,
            pmu: NE39_PMU_BUSES.to_vec(),
            candidates: CandidatePolicy::Auto,
            tau: vec![0.5],
            flow_mode: FlowMode::BestFit,
            noise: NoiseConfig::default(),
            solver: SolverConfig::default(),
            format: OutputFormat::Csv,
        }
    }
}

/// Flag values that override the file. `None` keeps the file's value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub case: Option<PathBuf>,
    pub pmu: Option<Vec<u32>>,
    pub candidates: Option<CandidatePolicy>,
    pub tau: Option<Vec<f64>>,
    pub flow_mode: Option<FlowMode>,
    pub noise_sigma_deg: Option<f64>,
    pub seed: Option<u64>,
    pub starts: Option<usize>,
    pub format: Option<OutputFormat>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid config file")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Applies flag overrides. `--seed` drives both the noise and the solver.
    pub fn apply(&mut self, o: Overrides) {
        if o.case.is_some() {
            self.case = o.case;
        }
        if let Some(v) = o.pmu {
            self.pmu = v;
        }
        if let Some(v) = o.candidates {
            self.candidates = v;
        }
        if let Some(v) = o.tau {
            self.tau = v;
        }
        if let Some(v) = o.flow_mode {
            self.flow_mode = v;
        }
        if let Some(v) = o.noise_sigma_deg {
            self.noise.sigma_deg = v;
        }
        if let Some(v) = o.seed {
            self.noise.seed = v;
            self.solver.seed = v;
        }
        if let Some(v) = o.starts {
            self.solver.starts = v;
        }
        if let Some(v) = o.format {
            self.format = v;
        }
    }

    /// Checks everything that does not need the case loaded.
    pub fn validate(&self) -> Result<()> {
        if self.tau.is_empty() {
            bail!("tau list is empty");
        }
        for &t in &self.tau {
            if !(t > 0.0 && t <= MAX_TAU) {
                bail!("tau = {t} is outside (0, {MAX_TAU}]");
            }
        }
        if self.pmu.is_empty() {
            bail!("PMU list is empty");
        }
        if !(self.noise.sigma_deg.is_finite() && self.noise.sigma_deg >= 0.0) {
            bail!("noise sigma must be finite and >= 0, got {}", self.noise.sigma_deg);
        }
        if !(self.noise.measurement_frac.is_finite() && self.noise.measurement_frac >= 0.0) {
            bail!("measurement noise fraction must be finite and >= 0");
        }
        if self.solver.starts == 0 && self.solver.max_iter == 0 {
            bail!("solver needs at least one start or iteration");
        }
        if self.solver.max_iter == 0 {
            bail!("solver.max_iter must be at least 1");
        }
        Ok(())
    }

    /// τ list sorted ascending with duplicates removed.
    pub fn tau_ascending(&self) -> Vec<f64> {
        let mut t = self.tau.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

/// Loads a case by content: research-format tables or the native format.
pub fn load_case(path: Option<&Path>) -> Result<GridCase> {
    let Some(path) = path else {
        return Ok(case39());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading case {}", path.display()))?;
    let parsed = if text.contains("mpc.bus") {
        parse_matpower(&text)
    } else {
        parse_native(&text)
    };
    parsed.with_context(|| format!("loading case {}", path.display()))
}

/// A validated config with its case, PMU set and candidate lines resolved.
pub struct Study {
    pub config: ExperimentConfig,
    pub case: GridCase,
    pub pmu: PmuPlacement,
    /// Lines named by the candidate policy, in policy order.
    pub policy_lines: Vec<LineId>,
    /// Lines the detector ranks: the policy lines minus islanding ones.
    pub candidates: Vec<LineId>,
}

impl Study {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let case = load_case(config.case.as_deref())?;
        let pmu = PmuPlacement::new(&case, &config.pmu).context("invalid PMU list")?;
        let policy_lines = match &config.candidates {
            CandidatePolicy::Auto => default_candidates(&case, &pmu),
            CandidatePolicy::Study => resolve_lines(&case, &NE39_STUDY_LINES)?,
            CandidatePolicy::List(v) => resolve_lines(&case, v)?,
        };
        let mut candidates = Vec::with_capacity(policy_lines.len());
        for &l in &policy_lines {
            if is_islanding_line(&case, l)? {
                log::warn!("candidate {} is an islanding line and is left out of the ranking", case.line_name(l));
            } else {
                candidates.push(l);
            }
        }
        if candidates.is_empty() {
            bail!("no rankable candidate lines");
        }
        Ok(Study {
            config,
            case,
            pmu,
            policy_lines,
            candidates,
        })
    }

    pub fn line(&self, spec: &str) -> Result<LineId> {
        Ok(self.case.find_line(spec)?)
    }
}

pub fn resolve_lines<S: AsRef<str>>(case: &GridCase, names: &[S]) -> Result<Vec<LineId>> {
    let mut out = Vec::with_capacity(names.len());
    for n in names {
        let id = case.find_line(n.as_ref())?;
        if out.contains(&id) {
            bail!("line {} listed twice", n.as_ref());
        }
        out.push(id);
    }
    Ok(out)
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    split_list(s)
        .iter()
        .map(|t| t.parse::<T>().map_err(|e| anyhow::anyhow!("'{t}': {e}")))
        .collect()
}
