//! Experiment configuration: a versioned JSON schema describing a list of
//! Monte Carlo scenarios (generator model, sample sizes, specified lag
//! order, mean scenario, level, replicate count, statistics to run).

use hdmean::{Error, Result};
use serde::Deserialize;

/// Top-level experiment description, deserialized from JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must be 1; bumped on incompatible schema changes.
    pub schema_version: u32,
    /// Master seed. Every (scenario, replicate) pair derives its own
    /// stream from it, so results do not depend on thread scheduling.
    pub seed: u64,
    /// Optional path for a per-replicate p-value dump (CSV).
    #[serde(default)]
    pub dump_pvalues: Option<String>,
    pub scenarios: Vec<ScenarioConfig>,
    /// In-process knob (not part of the JSON schema): retain per-replicate
    /// records in the returned summary even without a dump path.
    #[serde(skip)]
    pub collect_records: bool,
}

/// One simulation scenario.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Label used in output files; defaults to `scenario-<index>`.
    #[serde(default)]
    pub id: Option<String>,
    /// "one-sample" or "two-sample".
    pub kind: String,
    pub model: ModelConfig,
    /// Sample size (one-sample scenarios).
    #[serde(default)]
    pub n: Option<usize>,
    /// Sample sizes (two-sample scenarios).
    #[serde(default)]
    pub n1: Option<usize>,
    #[serde(default)]
    pub n2: Option<usize>,
    /// Lag order the tests are run with (which may differ from the
    /// generator's true order — that mismatch is itself a study design).
    pub specified_m: usize,
    /// Mean scenario tag: "null", "power1", "power2", "two-sample-1",
    /// or "two-sample-2".
    pub mean: String,
    pub alpha: f64,
    pub replicates: u64,
    /// Statistics to evaluate per replicate; subset of {"t-new", "t-bs"}.
    #[serde(default = "default_statistics")]
    pub statistics: Vec<String>,
}

fn default_statistics() -> Vec<String> {
    vec!["t-new".to_string()]
}

/// Generator choice for a scenario.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    /// One of the built-in study models "I".."IV" (p = ratio·n).
    Catalog { name: String },
    /// Fully parameterized one-sample generator. `w` sets both the mixing
    /// band (as a fraction of p) and the innovation band p·w.
    Parametric {
        p: usize,
        /// Number of latent factors (the innovation dimension).
        m: usize,
        /// True dependence order of the generated process.
        m_order: usize,
        phi1: f64,
        phi2: f64,
        w: f64,
        /// "reciprocal" (coefficients decay in the lag) or "linear"
        /// (coefficients grow in the lag).
        #[serde(default = "default_variant")]
        variant: String,
    },
    /// The paired two-sample study design (p = 4·n1, distinct bands and
    /// signal strengths per sample).
    TwoSampleStudy { m_order: usize },
}

fn default_variant() -> String {
    "reciprocal".to_string()
}

/// Scenario kinds after validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    OneSample,
    TwoSample,
}

impl ScenarioKind {
    pub fn tag(self) -> &'static str {
        match self {
            ScenarioKind::OneSample => "one-sample",
            ScenarioKind::TwoSample => "two-sample",
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        match tag {
            "one-sample" => Ok(ScenarioKind::OneSample),
            "two-sample" => Ok(ScenarioKind::TwoSample),
            other => Err(Error::config(format!(
                "unknown scenario kind '{other}' (expected one-sample or two-sample)"
            ))),
        }
    }
}

impl ExperimentConfig {
    /// Structural validation; generator satisfiability is checked when the
    /// scenarios are resolved, before any replicate runs.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != 1 {
            return Err(Error::config(format!(
                "unsupported schema_version {} (this build reads version 1)",
                self.schema_version
            )));
        }
        if self.scenarios.is_empty() {
            return Err(Error::config("config lists no scenarios"));
        }
        for (idx, scenario) in self.scenarios.iter().enumerate() {
            scenario
                .validate()
                .map_err(|e| Error::config(format!("scenario {idx}: {e}")))?;
        }
        Ok(())
    }
}

impl ScenarioConfig {
    /// The scenario's display label.
    pub fn label(&self, index: usize) -> String {
        self.id.clone().unwrap_or_else(|| format!("scenario-{index}"))
    }

    fn validate(&self) -> Result<()> {
        let kind = ScenarioKind::parse(&self.kind)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates must be at least 1"));
        }
        if self.statistics.is_empty() {
            return Err(Error::config("statistics list is empty"));
        }
        for stat in &self.statistics {
            match stat.as_str() {
                "t-new" => {}
                "t-bs" => {
                    if kind == ScenarioKind::TwoSample {
                        return Err(Error::config(
                            "statistic t-bs is defined for one-sample scenarios only",
                        ));
                    }
                }
                other => {
                    return Err(Error::config(format!(
                        "unknown statistic '{other}' (expected t-new or t-bs)"
                    )));
                }
            }
        }
        let mean = hdmean::simgen::MeanScenario::parse(&self.mean)?;
        let mean_is_two_sample = matches!(
            mean,
            hdmean::simgen::MeanScenario::TwoSampleOne | hdmean::simgen::MeanScenario::TwoSampleTwo
        );
        match kind {
            ScenarioKind::OneSample => {
                if self.n.is_none() {
                    return Err(Error::config("one-sample scenarios require field n"));
                }
                if self.n1.is_some() || self.n2.is_some() {
                    return Err(Error::config(
                        "one-sample scenarios take n, not n1/n2",
                    ));
                }
                if mean_is_two_sample {
                    return Err(Error::config(format!(
                        "mean scenario '{}' applies to two-sample designs",
                        self.mean
                    )));
                }
                if matches!(self.model, ModelConfig::TwoSampleStudy { .. }) {
                    return Err(Error::config(
                        "model type two-sample-study requires kind two-sample",
                    ));
                }
            }
            ScenarioKind::TwoSample => {
                if self.n1.is_none() || self.n2.is_none() {
                    return Err(Error::config(
                        "two-sample scenarios require fields n1 and n2",
                    ));
                }
                if self.n.is_some() {
                    return Err(Error::config("two-sample scenarios take n1/n2, not n"));
                }
                if !mean_is_two_sample && mean != hdmean::simgen::MeanScenario::Null {
                    return Err(Error::config(format!(
                        "mean scenario '{}' applies to one-sample designs",
                        self.mean
                    )));
                }
                if !matches!(self.model, ModelConfig::TwoSampleStudy { .. }) {
                    return Err(Error::config(
                        "two-sample scenarios use model type two-sample-study",
                    ));
                }
            }
        }
        if let ModelConfig::Parametric { variant, .. } = &self.model {
            if variant != "reciprocal" && variant != "linear" {
                return Err(Error::config(format!(
                    "unknown mixing variant '{variant}' (expected reciprocal or linear)"
                )));
            }
        }
        Ok(())
    }
}

/// Reads and validates a config file. JSON syntax or schema violations are
/// configuration errors, not data errors.
pub fn load_config(path: impl AsRef<std::path::Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("invalid experiment config: {e}")))?;
    config.validate()?;
    Ok(config)
}
