//! Generator configuration, loadable from TOML or JSON.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A truncated power law on `min..=max`: `P(k) ∝ (k − min + 1)^(−shape)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountDistribution {
    pub min: usize,
    pub max: usize,
    pub shape: f64,
}

impl CountDistribution {
    pub fn check(&self, what: &str) -> Result<()> {
        if self.min < 1 || self.min > self.max {
            return Err(Error::Config(format!(
                "{what}: need 1 <= min <= max, got min={} max={}",
                self.min, self.max
            )));
        }
        if !self.shape.is_finite() {
            return Err(Error::Config(format!("{what}: shape must be finite")));
        }
        Ok(())
    }

    /// Probability of each count `min..=max`.
    pub fn pmf(&self) -> Vec<f64> {
        let raw: Vec<f64> = (self.min..=self.max)
            .map(|k| ((k - self.min + 1) as f64).powf(-self.shape))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

/// Parameters of the obfuscating transforms used when building a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    /// Fraction of blocks receiving an opaque predicate.
    pub opaque_rate: f64,
    /// Expansion depth of arithmetic encoding.
    pub encode_depth: usize,
    /// Fraction of blocks cloned by the copy transform.
    pub copy_rate: f64,
    /// Probability that an eligible block is split.
    pub split_probability: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            opaque_rate: 0.3,
            encode_depth: 1,
            copy_rate: 0.3,
            split_probability: 0.5,
        }
    }
}

impl TransformConfig {
    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("opaque_rate", self.opaque_rate),
            ("copy_rate", self.copy_rate),
            ("split_probability", self.split_probability),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if self.encode_depth == 0 {
            return Err(Error::Config("encode_depth must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_functions: usize,
    pub blocks: CountDistribution,
    /// Non-terminator instructions per block.
    pub instructions: CountDistribution,
    /// Relative frequency of each body mnemonic.
    pub mnemonic_profile: BTreeMap<String, f64>,
    /// Pseudo-projects, assigned round-robin by function index.
    pub projects: Vec<String>,
    /// Log-normal σ of the per-project perturbation of mnemonic weights and grammar choices.
    pub project_drift: f64,
    pub transforms: TransformConfig,
}

pub fn default_mnemonic_profile() -> BTreeMap<String, f64> {
    [
        ("mov", 30.0),
        ("lea", 6.0),
        ("push", 5.0),
        ("pop", 5.0),
        ("add", 5.0),
        ("call", 4.0),
        ("sub", 3.5),
        ("movzx", 3.0),
        ("test", 3.0),
        ("cmp", 3.0),
        ("xor", 3.0),
        ("and", 2.0),
        ("or", 1.5),
        ("shl", 1.0),
        ("shr", 1.0),
        ("imul", 1.0),
        ("movsx", 1.0),
        ("inc", 1.0),
        ("dec", 0.8),
        ("nop", 0.8),
        ("cdqe", 0.5),
        ("sete", 0.5),
        ("cmovne", 0.5),
        ("sar", 0.5),
        ("movss", 0.5),
        ("movaps", 0.4),
        ("neg", 0.3),
        ("pxor", 0.3),
        ("not", 0.2),
        ("idiv", 0.2),
    ]
    .into_iter()
    .map(|(m, w)| (m.to_string(), w))
    .collect()
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            n_functions: 100,
            blocks: CountDistribution {
                min: 1,
                max: 40,
                shape: 0.6,
            },
            instructions: CountDistribution {
                min: 1,
                max: 12,
                shape: 0.5,
            },
            mnemonic_profile: default_mnemonic_profile(),
            projects: ["lzpack", "tinyvm", "netcore", "imgcodec", "sqlmini"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            project_drift: 1.0,
            transforms: TransformConfig::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<()> {
        self.blocks.check("blocks")?;
        self.instructions.check("instructions")?;
        if self.projects.is_empty() {
            return Err(Error::Config("at least one project is required".into()));
        }
        if self.mnemonic_profile.values().any(|w| !w.is_finite() || *w < 0.0)
            || self.mnemonic_profile.values().sum::<f64>() <= 0.0
        {
            return Err(Error::Config("mnemonic_profile weights must be non-negative with a positive sum".into()));
        }
        if let Some(m) = self.mnemonic_profile.keys().find(|m| m.trim().is_empty()) {
            return Err(Error::Config(format!("invalid mnemonic {m:?} in profile")));
        }
        if !(self.project_drift >= 0.0 && self.project_drift.is_finite()) {
            return Err(Error::Config("project_drift must be a non-negative number".into()));
        }
        self.transforms.check()
    }

    /// Parses TOML, or JSON when the text starts with `{`. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let config: GeneratorConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        config.check()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
