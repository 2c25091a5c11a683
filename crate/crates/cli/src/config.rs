//! Run configuration: a JSON file whose values command-line flags override.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use crate::fail::{usage, Failure};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingOverrides {
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_new_tokens: Option<u32>,
    pub allele_chars: Option<usize>,
}

/// Everything optional: relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub roster: Option<PathBuf>,
    pub genes: Option<PathBuf>,
    pub probes: Option<u64>,
    pub parallelism: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub sampling: SamplingOverrides,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = lmgen_core::io::read_to_string(path)?;
        let mut cfg: FileConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::io(format!("{}:{}: {e}", path.display(), e.line())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.roster,
            &mut cfg.genes,
            &mut cfg.cache_dir,
            &mut cfg.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Resolved settings for commands that probe models.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub roster: PathBuf,
    pub genes: PathBuf,
    pub probes: u64,
    pub parallelism: usize,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub sampling: SamplingOverrides,
}

/// Flag values; `None` falls back to the config file, then to defaults.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunFlags {
    /// JSON run configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub roster: Option<PathBuf>,
    /// Gene-set file
    #[arg(long)]
    pub genes: Option<PathBuf>,
    /// Probes per gene (N)
    #[arg(long)]
    pub probes: Option<u64>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub allele_chars: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub max_new_tokens: Option<u32>,
}

impl RunFlags {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let file = match &self.config {
            Some(p) => {
                FileConfig::load(p).with_context(|| format!("reading config {}", p.display()))?
            }
            None => FileConfig::default(),
        };
        let roster = self
            .roster
            .clone()
            .or(file.roster)
            .ok_or_else(|| usage("no roster given (--roster or config \"roster\")"))?;
        let genes = self
            .genes
            .clone()
            .or(file.genes)
            .ok_or_else(|| usage("no gene set given (--genes or config \"genes\")"))?;
        let cfg = RunConfig {
            roster,
            genes,
            probes: self.probes.or(file.probes).unwrap_or(32),
            parallelism: self.parallelism.or(file.parallelism).unwrap_or(1),
            cache_dir: self.cache_dir.clone().or(file.cache_dir),
            out_dir: self
                .out_dir
                .clone()
                .or(file.out_dir)
                .unwrap_or_else(|| PathBuf::from(".")),
            seed: self.seed.or(file.seed).unwrap_or(0),
            sampling: SamplingOverrides {
                temperature: self.temperature.or(file.sampling.temperature),
                top_p: self.top_p.or(file.sampling.top_p),
                max_new_tokens: self.max_new_tokens.or(file.sampling.max_new_tokens),
                allele_chars: self.allele_chars.or(file.sampling.allele_chars),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        for (what, p) in [("roster", &self.roster), ("gene set", &self.genes)] {
            if !p.exists() {
                return Err(usage(format!("{what} {} does not exist", p.display())).into());
            }
        }
        if self.probes < 1 {
            return Err(usage("probes must be at least 1").into());
        }
        if self.parallelism < 1 {
            return Err(usage("parallelism must be at least 1").into());
        }
        if self.sampling.allele_chars == Some(0) {
            return Err(usage("allele_chars must be at least 1").into());
        }
        Ok(())
    }

    pub fn apply_sampling(&self, spec: &mut lmgen_core::ModelSpec) {
        let s = &self.sampling;
        if let Some(t) = s.temperature {
            spec.sampling.temperature = t;
        }
        if let Some(p) = s.top_p {
            spec.sampling.top_p = p;
        }
        if let Some(m) = s.max_new_tokens {
            spec.sampling.max_new_tokens = m;
        }
        if let Some(k) = s.allele_chars {
            spec.sampling.allele_chars = k;
        }
    }
}
