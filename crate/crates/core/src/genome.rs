//! Genes: fixed text contexts at which models are compared.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::rng;

pub const DEFAULT_MIN_CUT: usize = 20;
pub const DEFAULT_MAX_CUT: usize = 100;

/// One fixed text context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gene {
    pub id: String,
    pub context: String,
    pub source: String,
    /// Character (not byte) count at which the source record was cut.
    pub cut_index: usize,
}

/// Prompt wrapping applied to every gene of a set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub prefix: String,
    pub suffix: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneSet {
    pub name: String,
    pub genes: Vec<Gene>,
    pub rng_seed: u64,
    pub template: Option<Template>,
}

impl GeneSet {
    /// Builds a set, checking id uniqueness and the untemplated length invariant.
    pub fn new(name: impl Into<String>, genes: Vec<Gene>, rng_seed: u64) -> Result<Self> {
        let set = GeneSet {
            name: name.into(),
            genes,
            rng_seed,
            template: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.genes.iter().map(|g| g.id.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for g in &self.genes {
            if g.context.is_empty() {
                return Err(Error::input(format!("gene {} has an empty context", g.id)));
            }
            if !seen.insert(g.id.as_str()) {
                return Err(Error::input(format!("duplicate gene id {}", g.id)));
            }
            // Templated contexts carry extra characters around the cut source text.
            if self.template.is_none() && g.context.chars().count() != g.cut_index {
                return Err(Error::input(format!(
                    "gene {}: context has {} characters but cut_index is {}",
                    g.id,
                    g.context.chars().count(),
                    g.cut_index
                )));
            }
        }
        Ok(())
    }

    /// Number of genes whose context duplicates an earlier gene's context.
    pub fn duplicate_context_count(&self) -> usize {
        let mut seen = HashSet::new();
        self.genes
            .iter()
            .filter(|g| !seen.insert(g.context.as_str()))
            .count()
    }

    /// Returns the subset of genes at `indices`, in that order.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> GeneSet {
        GeneSet {
            name: name.into(),
            genes: indices.iter().map(|&i| self.genes[i].clone()).collect(),
            rng_seed: self.rng_seed,
            template: self.template.clone(),
        }
    }
}

fn char_prefix(s: &str, chars: usize) -> &str {
    match s.char_indices().nth(chars) {
        Some((byte, _)) => &s[..byte],
        None => s,
    }
}

/// Samples `count` genes from `corpus` by cutting records at a uniformly drawn
/// character index in `[min_cut, min(max_cut, record length)]`.
///
/// Records shorter than `min_cut` characters are never selected. When enough
/// eligible records exist they are chosen without replacement through a
/// seed-determined permutation; otherwise gene `k` draws its record uniformly.
/// The cut of gene `k` comes from a stream keyed by `(seed, k)` alone.
pub fn sample_genes<S: AsRef<str>>(
    corpus: &[S],
    count: usize,
    seed: u64,
    min_cut: usize,
    max_cut: usize,
) -> Result<GeneSet> {
    if corpus.is_empty() {
        return Err(Error::input("corpus is empty"));
    }
    if count == 0 {
        return Err(Error::input("gene count must be positive"));
    }
    if min_cut == 0 {
        return Err(Error::input("min_cut must be at least 1 character"));
    }
    if min_cut > max_cut {
        return Err(Error::input(format!(
            "min_cut ({min_cut}) exceeds max_cut ({max_cut})"
        )));
    }

    let lengths: Vec<usize> = corpus.iter().map(|r| r.as_ref().chars().count()).collect();
    let eligible: Vec<usize> = (0..corpus.len())
        .filter(|&i| lengths[i] >= min_cut)
        .collect();
    if eligible.is_empty() {
        let longest = lengths.iter().copied().max().unwrap_or(0);
        return Err(Error::input(format!(
            "no corpus record reaches min_cut={min_cut} characters (longest record has {longest}, short by {})",
            min_cut - longest
        )));
    }

    let order: Option<Vec<usize>> = (count <= eligible.len()).then(|| {
        let mut perm = eligible.clone();
        perm.shuffle(&mut rng::keyed_rng(&[seed, 0x5e1ec7]));
        perm
    });

    let genes = (0..count)
        .map(|k| {
            let mut r = rng::keyed_rng(&[seed, 0xc07, k as u64]);
            let record = match &order {
                Some(perm) => perm[k],
                None => eligible[r.random_range(0..eligible.len())],
            };
            let hi = max_cut.min(lengths[record]);
            let cut = r.random_range(min_cut..=hi);
            Gene {
                id: format!("g{k:05}"),
                context: char_prefix(corpus[record].as_ref(), cut).to_string(),
                source: format!("record:{record}"),
                cut_index: cut,
            }
        })
        .collect();

    let set = GeneSet::new(format!("sample-s{seed}-n{count}"), genes, seed)?;
    let dups = set.duplicate_context_count();
    if dups > 0 {
        log::warn!("{dups} sampled gene contexts duplicate an earlier gene");
    }
    Ok(set)
}

/// Wraps every context as `prefix + context + suffix`.
pub fn apply_template(genes: &GeneSet, prefix: &str, suffix: &str) -> Result<GeneSet> {
    if genes.is_empty() {
        return Err(Error::input("cannot template an empty gene set"));
    }
    if prefix.is_empty() && suffix.is_empty() {
        return Ok(genes.clone());
    }
    let template = match &genes.template {
        Some(t) => Template {
            prefix: format!("{prefix}{}", t.prefix),
            suffix: format!("{}{suffix}", t.suffix),
        },
        None => Template {
            prefix: prefix.to_string(),
            suffix: suffix.to_string(),
        },
    };
    Ok(GeneSet {
        name: format!("{}+template({prefix:?},{suffix:?})", genes.name),
        genes: genes
            .genes
            .iter()
            .map(|g| Gene {
                context: format!("{prefix}{}{suffix}", g.context),
                ..g.clone()
            })
            .collect(),
        rng_seed: genes.rng_seed,
        template: Some(template),
    })
}

#[derive(Serialize, Deserialize)]
struct SetHeader {
    name: String,
    rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    template: Option<Template>,
}

#[derive(Serialize, Deserialize)]
struct GeneLine {
    id: String,
    context: String,
    source: String,
    cut_index: usize,
    /// Present on the first line only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    set: Option<SetHeader>,
}

pub fn encode_genes(genes: &GeneSet) -> String {
    let mut out = String::new();
    for (i, g) in genes.genes.iter().enumerate() {
        let line = GeneLine {
            id: g.id.clone(),
            context: g.context.clone(),
            source: g.source.clone(),
            cut_index: g.cut_index,
            set: (i == 0).then(|| SetHeader {
                name: genes.name.clone(),
                rng_seed: genes.rng_seed,
                template: genes.template.clone(),
            }),
        };
        let _ = writeln!(
            out,
            "{}",
            serde_json::to_string(&line).expect("gene serializes")
        );
    }
    out
}

pub fn decode_genes(text: &str, path: &Path) -> Result<GeneSet> {
    let mut set = GeneSet {
        name: String::new(),
        genes: Vec::new(),
        rng_seed: 0,
        template: None,
    };
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: GeneLine =
            serde_json::from_str(raw).map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        if let Some(h) = line.set {
            set.name = h.name;
            set.rng_seed = h.rng_seed;
            set.template = h.template;
        }
        set.genes.push(Gene {
            id: line.id,
            context: line.context,
            source: line.source,
            cut_index: line.cut_index,
        });
    }
    if set.genes.is_empty() {
        return Err(Error::parse(path, 0, "gene set file contains no genes"));
    }
    set.validate()?;
    Ok(set)
}

/// Writes one JSON object per gene per line. Set-level metadata rides on the first line.
pub fn save_genes(genes: &GeneSet, path: &Path) -> Result<()> {
    io::write_atomic(path, encode_genes(genes).as_bytes())
}

pub fn load_genes(path: &Path) -> Result<GeneSet> {
    decode_genes(&io::read_to_string(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphabet_corpus() -> Vec<String> {
        (0..10)
            .map(|i| {
                (0..120)
                    .map(|j| char::from(b'a' + ((i + j) % 26) as u8))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn lower_bound_cut_keeps_first_characters() {
        let corpus = alphabet_corpus();
        let set = sample_genes(&corpus, 5, 7, 20, 20).unwrap();
        for g in &set.genes {
            assert_eq!(g.context.chars().count(), 20);
            let record: usize = g.source.trim_start_matches("record:").parse().unwrap();
            assert_eq!(g.context, corpus[record][..20]);
        }
    }

    #[test]
    fn cjk_genes_count_characters() {
        let corpus = vec![
            "床前明月光，疑是地上霜。举头望明月，低头思故乡。".to_string(),
            "白日依山尽，黄河入海流。欲穷千里目，更上一层楼。".to_string(),
            "春眠不觉晓，处处闻啼鸟。夜来风雨声，花落知多少。".to_string(),
        ];
        let set = sample_genes(&corpus, 6, 1, 5, 5).unwrap();
        assert_eq!(set.len(), 6);
        for g in &set.genes {
            assert_eq!(g.context.chars().count(), 5);
            assert!(g.context.len() > 5);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let corpus = alphabet_corpus();
        let a = sample_genes(&corpus, 8, 99, 20, 100).unwrap();
        let b = sample_genes(&corpus, 8, 99, 20, 100).unwrap();
        assert_eq!(encode_genes(&a), encode_genes(&b));
        let c = sample_genes(&corpus, 8, 100, 20, 100).unwrap();
        assert_ne!(encode_genes(&a), encode_genes(&c));
    }

    #[test]
    fn without_replacement_when_possible() {
        let corpus = alphabet_corpus();
        let set = sample_genes(&corpus, 10, 3, 20, 100).unwrap();
        let sources: HashSet<_> = set.genes.iter().map(|g| g.source.clone()).collect();
        assert_eq!(sources.len(), 10);
        // more genes than records falls back to replacement
        let set = sample_genes(&corpus, 25, 3, 20, 100).unwrap();
        assert_eq!(set.len(), 25);
    }

    #[test]
    fn short_records_are_skipped() {
        let corpus = vec!["short".to_string(), "x".repeat(50)];
        let set = sample_genes(&corpus, 4, 0, 20, 100).unwrap();
        assert!(set.genes.iter().all(|g| g.source == "record:1"));
        assert!(set.genes.iter().all(|g| g.cut_index <= 50));
    }

    #[test]
    fn sampling_errors() {
        let empty: Vec<String> = vec![];
        assert!(matches!(
            sample_genes(&empty, 1, 0, 20, 100),
            Err(Error::Input(_))
        ));
        let corpus = alphabet_corpus();
        assert!(matches!(
            sample_genes(&corpus, 0, 0, 20, 100),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            sample_genes(&corpus, 1, 0, 50, 10),
            Err(Error::Input(_))
        ));
        let err = sample_genes(&["tiny"], 1, 0, 20, 100)
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("min_cut=20") && err.contains("short by 16"),
            "{err}"
        );
    }

    #[test]
    fn identity_template() {
        let set = sample_genes(&alphabet_corpus(), 3, 0, 20, 30).unwrap();
        assert_eq!(apply_template(&set, "", "").unwrap(), set);
    }

    #[test]
    fn chat_template_wraps_context() {
        let set = GeneSet::new(
            "arith",
            vec![Gene {
                id: "q".into(),
                context: "2+2=".into(),
                source: "hand".into(),
                cut_index: 4,
            }],
            0,
        )
        .unwrap();
        let wrapped = apply_template(&set, "User:", "\n Assistant:").unwrap();
        assert_eq!(wrapped.genes[0].context, "User:2+2=\n Assistant:");
        assert_eq!(wrapped.genes[0].id, "q");
        assert!(wrapped.name.contains("User:"));

        let twice = apply_template(&wrapped, "<m>", "</m>").unwrap();
        assert_eq!(twice.genes[0].context, "<m>User:2+2=\n Assistant:</m>");
        let again = apply_template(&twice, "<m>", "</m>").unwrap();
        assert_eq!(again.genes[0].context.matches("<m>").count(), 2);
        let t = again.template.unwrap();
        assert_eq!(t.prefix, "<m><m>User:");
        assert_eq!(t.suffix, "\n Assistant:</m></m>");
    }

    #[test]
    fn file_round_trip_with_newlines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("genes.jsonl");
        let set = GeneSet::new(
            "mixed",
            vec![
                Gene {
                    id: "a".into(),
                    context: "def f(x):\n    return".into(),
                    source: "code".into(),
                    cut_index: 20,
                },
                Gene {
                    id: "b".into(),
                    context: "绩排名：".into(),
                    source: "zh".into(),
                    cut_index: 4,
                },
                Gene {
                    id: "c".into(),
                    context: " spaced\t".into(),
                    source: "ws".into(),
                    cut_index: 8,
                },
            ],
            42,
        )
        .unwrap();
        save_genes(&set, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(load_genes(&path).unwrap(), set);
    }

    #[test]
    fn missing_field_names_field_and_line() {
        let text = "{\"id\":\"a\",\"context\":\"abc\",\"source\":\"s\",\"cut_index\":3}\n{\"id\":\"b\",\"source\":\"s\",\"cut_index\":3}\n";
        let err = decode_genes(text, Path::new("g.jsonl")).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("context"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }
}
