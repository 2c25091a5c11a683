use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{Gene, GeneSet};
use crate::io;
use crate::population::{Draw, Prober};
use crate::rng::{self, hash_str};

pub const SYNTHETIC_GENE_PREFIX: &str = "syn:";
const STEM_ALPHABET: &[u8] = b"abcdefghij";
const TAIL_ALPHABET: &[u8] = b"klmnopqrstuvwxyz";

/// A stand-in language model: one categorical distribution over a shared stem
/// vocabulary per gene. A completion is a four-character stem followed by
/// `tail_chars` uniformly random characters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModel {
    pub id: String,
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub mutation_rate: f64,
    pub seed: u64,
    pub concentration: f64,
    pub tail_chars: usize,
    pub vocab: Vec<String>,
    pub distributions: Vec<Vec<f64>>,
}

/// Four-character stems spelled most-significant digit first, so stems with
/// nearby indices share prefixes.
pub fn stem_vocabulary(size: usize) -> Vec<String> {
    let mut base = 3usize;
    while base.pow(4) < size {
        base += 1;
    }
    (0..size)
        .map(|i| {
            (0..4)
                .rev()
                .map(|p| char::from(STEM_ALPHABET[(i / base.pow(p)) % base]))
                .collect()
        })
        .collect()
}

/// Symmetric Dirichlet draw keyed by `key`.
fn dirichlet(vocab: usize, concentration: f64, key: &[u64]) -> Vec<f64> {
    let mut r = rng::keyed_rng(key);
    let gamma = Gamma::new(concentration, 1.0).expect("validated concentration");
    let mut w: Vec<f64> = (0..vocab).map(|_| gamma.sample(&mut r)).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 && total.is_finite() {
        w.iter_mut().for_each(|x| *x /= total);
    } else {
        // every gamma draw underflowed: the sparse limit puts all mass on one stem
        let k = r.random_range(0..vocab);
        w = vec![0.0; vocab];
        w[k] = 1.0;
    }
    w
}

/// Root model with per-gene distributions drawn from a symmetric Dirichlet.
pub fn spawn_root(
    vocab_size: usize,
    gene_count: usize,
    concentration: f64,
    seed: u64,
) -> Result<SyntheticModel> {
    if vocab_size < 2 {
        return Err(Error::input("vocabulary needs at least 2 alleles"));
    }
    if gene_count == 0 {
        return Err(Error::input("gene count must be positive"));
    }
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::input(format!(
            "concentration {concentration} must be positive"
        )));
    }
    Ok(SyntheticModel {
        id: format!("root-{seed}"),
        family: "root".into(),
        parent: None,
        mutation_rate: 0.0,
        seed,
        concentration,
        tail_chars: 4,
        vocab: stem_vocabulary(vocab_size),
        distributions: (0..gene_count)
            .map(|g| dirichlet(vocab_size, concentration, &[seed, 0xd1, g as u64]))
            .collect(),
    })
}

/// Copies `parent`, resampling each gene's distribution from the root prior
/// with probability `rate`.
pub fn mutate(parent: &SyntheticModel, rate: f64, seed: u64) -> Result<SyntheticModel> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::input(format!("mutation rate {rate} outside [0, 1]")));
    }
    let distributions = parent
        .distributions
        .iter()
        .enumerate()
        .map(|(g, d)| {
            let hit: f64 = rng::keyed_rng(&[seed, 0x3a7, g as u64]).random();
            if hit < rate {
                dirichlet(d.len(), parent.concentration, &[seed, 0xd2, g as u64])
            } else {
                d.clone()
            }
        })
        .collect();
    Ok(SyntheticModel {
        id: format!("{}>{seed}", parent.id),
        parent: Some(parent.id.clone()),
        mutation_rate: rate,
        seed,
        distributions,
        ..parent.clone()
    })
}

/// Takes each gene's distribution from `b` with probability `weight_b`, else from `a`.
pub fn blend(
    a: &SyntheticModel,
    b: &SyntheticModel,
    weight_b: f64,
    seed: u64,
) -> Result<SyntheticModel> {
    if a.distributions.len() != b.distributions.len() || a.vocab != b.vocab {
        return Err(Error::input(
            "blended models must share genes and vocabulary",
        ));
    }
    if !(0.0..=1.0).contains(&weight_b) {
        return Err(Error::input(format!(
            "blend weight {weight_b} outside [0, 1]"
        )));
    }
    let distributions = (0..a.distributions.len())
        .map(|g| {
            let u: f64 = rng::keyed_rng(&[seed, 0xb1e, g as u64]).random();
            if u < weight_b {
                b.distributions[g].clone()
            } else {
                a.distributions[g].clone()
            }
        })
        .collect();
    Ok(SyntheticModel {
        id: format!("{}+{}", a.id, b.id),
        parent: Some(a.id.clone()),
        seed,
        distributions,
        ..a.clone()
    })
}

impl SyntheticModel {
    pub fn gene_count(&self) -> usize {
        self.distributions.len()
    }

    /// Gene index for `gene`: `syn:<index>` ids map directly, anything else by
    /// hashing the context.
    pub fn gene_index(&self, gene: &Gene) -> usize {
        gene.id
            .strip_prefix(SYNTHETIC_GENE_PREFIX)
            .and_then(|i| i.parse::<usize>().ok())
            .filter(|&i| i < self.gene_count())
            .unwrap_or_else(|| (hash_str(&gene.context) % self.gene_count() as u64) as usize)
    }

    pub fn sample(&self, gene_index: usize, draw: Draw) -> String {
        let mut r = rng::keyed_rng(&[self.seed, gene_index as u64, draw.salt, draw.index]);
        let u: f64 = r.random();
        let dist = &self.distributions[gene_index];
        let mut acc = 0.0;
        let mut pick = dist.len() - 1;
        for (k, p) in dist.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = k;
                break;
            }
        }
        let mut text = self.vocab[pick].clone();
        for _ in 0..self.tail_chars {
            text.push(char::from(
                TAIL_ALPHABET[r.random_range(0..TAIL_ALPHABET.len())],
            ));
        }
        text
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("synthetic model serializes");
        io::write_atomic(path, text.as_bytes())
    }
}

impl Prober for SyntheticModel {
    fn probe(&self, gene: &Gene, draw: Draw) -> Result<String> {
        Ok(self.sample(self.gene_index(gene), draw))
    }
}

/// Gene set addressing synthetic genes `start..start + count` directly.
pub fn synthetic_genes(start: usize, count: usize) -> GeneSet {
    let genes = (start..start + count)
        .map(|i| {
            let context = format!("synthetic gene {i}");
            Gene {
                id: format!("{SYNTHETIC_GENE_PREFIX}{i}"),
                cut_index: context.chars().count(),
                context,
                source: "synthlab".into(),
            }
        })
        .collect();
    GeneSet {
        name: format!("synthetic-{start}-{count}"),
        genes,
        rng_seed: 0,
        template: None,
    }
}
