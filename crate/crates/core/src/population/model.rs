use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::allele::DEFAULT_ALLELE_CHARS;
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Http,
    Synthetic,
    Replay,
}

/// Per-probe sampling configuration sent to every provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
    pub allele_chars: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 0.7,
            top_p: 1.0,
            max_new_tokens: 8,
            allele_chars: DEFAULT_ALLELE_CHARS,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature {} must be non-negative",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!(
                "top_p {} must lie in (0, 1]",
                self.top_p
            )));
        }
        if self.max_new_tokens == 0 {
            return Err(Error::Config("max_new_tokens must be positive".into()));
        }
        if self.allele_chars == 0 {
            return Err(Error::Config("allele_chars must be positive".into()));
        }
        Ok(())
    }
}

/// One model of a roster.
///
/// `endpoint` is a URL for `http` providers and a file path for `synthetic`
/// (a synthetic model file) and `replay` (a completion cache) providers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    pub family: String,
    pub provider: Provider,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding a bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    /// Sent as the request's `model` field when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_model: Option<String>,
    #[serde(default)]
    pub sampling: SamplingParams,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Config("model id must not be empty".into()));
        }
        let needs_endpoint = matches!(self.provider, Provider::Http | Provider::Replay);
        if needs_endpoint && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(Error::Config(format!(
                "model {}: {:?} provider requires an endpoint",
                self.id, self.provider
            )));
        }
        self.sampling.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    pub models: Vec<ModelSpec>,
}

impl Roster {
    pub fn new(models: Vec<ModelSpec>) -> Result<Self> {
        let r = Roster { models };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for m in &self.models {
            m.validate()?;
            if !seen.insert(m.id.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate model id {} in roster",
                    m.id
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.id == id)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        let roster: Roster =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
        roster.validate()?;
        Ok(roster)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("roster serializes");
        io::write_atomic(path, format!("{text}\n").as_bytes())
    }
}
