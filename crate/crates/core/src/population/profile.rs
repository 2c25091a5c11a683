//! Population profiles: per-gene allele counts estimated from repeated probes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::allele::{extract_allele, AlleleKey};
use super::cache::{CacheWriter, CompletionCache};
use super::prober::{Draw, Prober};
use crate::error::{Error, Result};
use crate::genome::{GeneSet, Template};
use crate::io;

pub const PROFILE_FORMAT: &str = "lmgen-profile";
pub const PROFILE_VERSION: u32 = 1;
pub const DEFAULT_FAILURE_CEILING: f64 = 0.5;

/// Empirical allele counts of one model over an ordered gene set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationProfile {
    pub model_id: String,
    pub gene_ids: Vec<String>,
    pub counts: Vec<BTreeMap<AlleleKey, u64>>,
    /// Probes requested per gene.
    pub probes_requested: u64,
    pub failures: Vec<u64>,
    pub allele_chars: usize,
    pub template: Option<Template>,
    /// Some gene lost more than the failure ceiling of its probes.
    pub degraded: bool,
}

impl PopulationProfile {
    pub fn gene_count(&self) -> usize {
        self.gene_ids.len()
    }

    /// Successful probes of gene `g`.
    pub fn usable(&self, g: usize) -> u64 {
        self.counts[g].values().sum()
    }

    /// Allele frequencies of gene `g`; failures are excluded from the denominator.
    /// `None` when every probe of the gene failed.
    pub fn frequencies(&self, g: usize) -> Option<impl Iterator<Item = (&AlleleKey, f64)>> {
        let n = self.usable(g);
        (n > 0).then(|| {
            self.counts[g]
                .iter()
                .map(move |(a, &c)| (a, c as f64 / n as f64))
        })
    }

    /// Checks that every gene accounts for exactly `probes_requested` probes.
    pub fn check_conservation(&self) -> Result<()> {
        if self.counts.len() != self.gene_ids.len() || self.failures.len() != self.gene_ids.len() {
            return Err(Error::input(format!(
                "profile {}: ragged gene tables",
                self.model_id
            )));
        }
        for (g, id) in self.gene_ids.iter().enumerate() {
            let total = self.usable(g) + self.failures[g];
            if total != self.probes_requested {
                return Err(Error::input(format!(
                    "profile {}: gene {id} accounts for {total} probes, expected {}",
                    self.model_id, self.probes_requested
                )));
            }
        }
        Ok(())
    }

    /// The same profile with alleles cut to `allele_chars`, which must not
    /// exceed the width it was collected at. Exact: equals re-extracting the
    /// shorter alleles from the original completions.
    pub fn truncated(&self, allele_chars: usize) -> Result<PopulationProfile> {
        if allele_chars == 0 || allele_chars > self.allele_chars {
            return Err(Error::input(format!(
                "profile {} has {}-character alleles; cannot derive {allele_chars}-character ones",
                self.model_id, self.allele_chars
            )));
        }
        let counts = self
            .counts
            .iter()
            .map(|c| {
                let mut out = BTreeMap::new();
                for (k, &n) in c {
                    *out.entry(extract_allele(&k.text, allele_chars))
                        .or_insert(0) += n;
                }
                out
            })
            .collect();
        Ok(PopulationProfile {
            counts,
            allele_chars,
            ..self.clone()
        })
    }
}

/// Raw completions per gene and draw; `None` marks a failed probe.
#[derive(Debug, Clone)]
pub struct Completions {
    pub model_id: String,
    pub gene_ids: Vec<String>,
    pub template: Option<Template>,
    pub probes: u64,
    pub texts: Vec<Vec<Option<String>>>,
}

impl Completions {
    /// Aggregates the completions into allele counts of width `allele_chars`.
    pub fn to_profile(&self, allele_chars: usize, failure_ceiling: f64) -> PopulationProfile {
        let mut counts = Vec::with_capacity(self.texts.len());
        let mut failures = Vec::with_capacity(self.texts.len());
        for draws in &self.texts {
            let mut c = BTreeMap::new();
            let mut f = 0;
            for d in draws {
                match d {
                    Some(t) => *c.entry(extract_allele(t, allele_chars)).or_insert(0) += 1,
                    None => f += 1,
                }
            }
            counts.push(c);
            failures.push(f);
        }
        let degraded = failures
            .iter()
            .any(|&f| f as f64 > failure_ceiling * self.probes as f64);
        PopulationProfile {
            model_id: self.model_id.clone(),
            gene_ids: self.gene_ids.clone(),
            counts,
            probes_requested: self.probes,
            failures,
            allele_chars,
            template: self.template.clone(),
            degraded,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollectOptions {
    pub probes: u64,
    pub parallelism: usize,
    pub cache: Option<PathBuf>,
    pub failure_ceiling: f64,
    /// Mixed into every draw key, so repeated collections of the same genes
    /// from a seeded provider yield independent samples.
    pub salt: u64,
}

impl CollectOptions {
    pub fn new(probes: u64) -> Self {
        CollectOptions {
            probes,
            parallelism: 1,
            cache: None,
            failure_ceiling: DEFAULT_FAILURE_CEILING,
            salt: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CollectStats {
    /// Probes sent to the provider.
    pub issued: u64,
    pub cache_hits: u64,
    pub failures: u64,
}

/// Issues `probes` draws per gene, skipping draws already in the cache.
pub fn collect_completions(
    model_id: &str,
    prober: &dyn Prober,
    genes: &GeneSet,
    opts: &CollectOptions,
) -> Result<(Completions, CollectStats)> {
    if opts.probes == 0 {
        return Err(Error::input("probe count must be at least 1"));
    }
    if genes.is_empty() {
        return Err(Error::input("gene set is empty"));
    }
    if opts.parallelism == 0 {
        return Err(Error::input("parallelism must be at least 1"));
    }
    let cache = match &opts.cache {
        Some(p) => CompletionCache::read(p)?,
        None => CompletionCache::default(),
    };
    let writer = opts.cache.as_deref().map(CacheWriter::open).transpose()?;

    let mut texts: Vec<Vec<Option<String>>> = vec![vec![None; opts.probes as usize]; genes.len()];
    let mut jobs = Vec::new();
    let mut stats = CollectStats::default();
    for (g, gene) in genes.genes.iter().enumerate() {
        for i in 0..opts.probes {
            match cache.get(gene, i) {
                Some(t) => {
                    texts[g][i as usize] = Some(t.to_string());
                    stats.cache_hits += 1;
                }
                None => jobs.push((g, i)),
            }
        }
    }
    stats.issued = jobs.len() as u64;

    let run = |&(g, i): &(usize, u64)| -> Result<(usize, u64, Option<String>)> {
        let gene = &genes.genes[g];
        match prober.probe(
            gene,
            Draw {
                salt: opts.salt,
                index: i,
            },
        ) {
            Ok(text) => {
                if let Some(w) = &writer {
                    w.append(gene, i, &text)?;
                }
                Ok((g, i, Some(text)))
            }
            Err(e @ Error::Config(_)) => Err(e),
            Err(e) => {
                log::debug!("{model_id}: gene {} draw {i}: {e}", gene.id);
                Ok((g, i, None))
            }
        }
    };
    let results: Vec<_> = if opts.parallelism == 1 || jobs.len() < 2 {
        jobs.iter().map(run).collect::<Result<_>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallelism)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| jobs.par_iter().map(run).collect::<Result<_>>())?
    };
    for (g, i, text) in results {
        if text.is_none() {
            stats.failures += 1;
        }
        texts[g][i as usize] = text;
    }
    if stats.failures > 0 {
        log::warn!(
            "{model_id}: {} of {} probes failed",
            stats.failures,
            stats.issued
        );
    }

    Ok((
        Completions {
            model_id: model_id.to_string(),
            gene_ids: genes.ids(),
            template: genes.template.clone(),
            probes: opts.probes,
            texts,
        },
        stats,
    ))
}

/// Estimates the allele distribution of every gene from `opts.probes` draws.
pub fn collect_profile(
    model_id: &str,
    prober: &dyn Prober,
    genes: &GeneSet,
    allele_chars: usize,
    opts: &CollectOptions,
) -> Result<(PopulationProfile, CollectStats)> {
    let (c, stats) = collect_completions(model_id, prober, genes, opts)?;
    let profile = c.to_profile(allele_chars, opts.failure_ceiling);
    if profile.degraded {
        log::warn!(
            "{model_id}: profile degraded, per-gene failures {:?}",
            profile.failures
        );
    }
    Ok((profile, stats))
}

#[derive(Serialize, Deserialize)]
struct GeneHeader {
    id: String,
    failures: u64,
}

#[derive(Serialize, Deserialize)]
struct ProfileHeader {
    format: String,
    version: u32,
    model_id: String,
    allele_chars: usize,
    probes_requested: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    template: Option<Template>,
    degraded: bool,
    genes: Vec<GeneHeader>,
    records: usize,
}

#[derive(Serialize, Deserialize)]
struct CountRecord {
    gene: String,
    allele: String,
    eos: bool,
    count: u64,
}

pub fn encode_profile(p: &PopulationProfile) -> String {
    let records = p.counts.iter().map(BTreeMap::len).sum();
    let header = ProfileHeader {
        format: PROFILE_FORMAT.into(),
        version: PROFILE_VERSION,
        model_id: p.model_id.clone(),
        allele_chars: p.allele_chars,
        probes_requested: p.probes_requested,
        template: p.template.clone(),
        degraded: p.degraded,
        genes: p
            .gene_ids
            .iter()
            .zip(&p.failures)
            .map(|(id, &failures)| GeneHeader {
                id: id.clone(),
                failures,
            })
            .collect(),
        records,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (id, counts) in p.gene_ids.iter().zip(&p.counts) {
        for (allele, &count) in counts {
            let rec = CountRecord {
                gene: id.clone(),
                allele: allele.text.clone(),
                eos: allele.eos,
                count,
            };
            let _ = writeln!(
                out,
                "{}",
                serde_json::to_string(&rec).expect("record serializes")
            );
        }
    }
    out
}

pub fn decode_profile(text: &str, path: &Path) -> Result<PopulationProfile> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty profile file"))?;
    let raw: serde_json::Value =
        serde_json::from_str(first).map_err(|e| Error::parse(path, 1, format!("header: {e}")))?;
    if raw.get("format").and_then(|v| v.as_str()) != Some(PROFILE_FORMAT) {
        return Err(Error::parse(
            path,
            1,
            "not a profile file (missing format tag)",
        ));
    }
    let found = raw.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != PROFILE_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found,
            expected: PROFILE_VERSION,
        });
    }
    let header: ProfileHeader =
        serde_json::from_value(raw).map_err(|e| Error::parse(path, 1, format!("header: {e}")))?;

    let index: std::collections::HashMap<&str, usize> = header
        .genes
        .iter()
        .enumerate()
        .map(|(i, g)| (g.id.as_str(), i))
        .collect();
    let mut counts = vec![BTreeMap::new(); header.genes.len()];
    let mut seen = 0usize;
    for (k, (line_no, line)) in lines.enumerate() {
        let rec: CountRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, line_no + 1, format!("record {k}: {e}")))?;
        let g = *index.get(rec.gene.as_str()).ok_or_else(|| {
            Error::parse(
                path,
                line_no + 1,
                format!("record {k}: unknown gene {}", rec.gene),
            )
        })?;
        counts[g].insert(
            AlleleKey {
                text: rec.allele,
                eos: rec.eos,
            },
            rec.count,
        );
        seen += 1;
    }
    if seen != header.records {
        return Err(Error::parse(
            path,
            seen + 2,
            format!(
                "truncated: record {seen} missing, header declares {} records",
                header.records
            ),
        ));
    }
    let p = PopulationProfile {
        model_id: header.model_id,
        gene_ids: header.genes.iter().map(|g| g.id.clone()).collect(),
        failures: header.genes.iter().map(|g| g.failures).collect(),
        counts,
        probes_requested: header.probes_requested,
        allele_chars: header.allele_chars,
        template: header.template,
        degraded: header.degraded,
    };
    p.check_conservation()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?;
    Ok(p)
}

/// Header line with gene order and failures, then one record per (gene, allele, count).
pub fn save_profile(p: &PopulationProfile, path: &Path) -> Result<()> {
    io::write_atomic(path, encode_profile(p).as_bytes())
}

pub fn load_profile(path: &Path) -> Result<PopulationProfile> {
    decode_profile(&io::read_to_string(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::Gene;
    use crate::population::prober::FixedProber;

    fn genes(n: usize) -> GeneSet {
        GeneSet::new(
            "t",
            (0..n)
                .map(|i| Gene {
                    id: format!("g{i}"),
                    context: format!("context {i}"),
                    source: "t".into(),
                    cut_index: format!("context {i}").chars().count(),
                })
                .collect(),
            0,
        )
        .unwrap()
    }

    struct Flaky;
    impl Prober for Flaky {
        fn probe(&self, gene: &Gene, draw: Draw) -> Result<String> {
            if gene.id == "g0" && !draw.index.is_multiple_of(4) {
                Err(Error::Probe("boom".into()))
            } else {
                Ok(format!("ans{}", draw.index % 2))
            }
        }
    }

    #[test]
    fn truncation_matches_reextraction() {
        let c = Completions {
            model_id: "m".into(),
            gene_ids: vec!["g0".into()],
            template: None,
            probes: 5,
            texts: vec![vec![
                Some("abcdefgh".into()),
                Some("abcxyz".into()),
                Some("ab".into()),
                Some("abc".into()),
                None,
            ]],
        };
        let wide = c.to_profile(8, 0.5);
        for k in 1..=8 {
            assert_eq!(
                wide.truncated(k).unwrap(),
                c.to_profile(k, 0.5),
                "width {k}"
            );
        }
        assert!(wide.truncated(9).is_err());
        assert!(wide.truncated(0).is_err());
    }

    #[test]
    fn single_probe_deterministic_stub() {
        let (p, stats) = collect_profile(
            "m",
            &FixedProber::constant("test"),
            &genes(3),
            4,
            &CollectOptions::new(1),
        )
        .unwrap();
        assert_eq!(stats.issued, 3);
        for g in 0..3 {
            assert_eq!(p.counts[g].len(), 1);
            assert_eq!(p.counts[g][&extract_allele("test", 4)], 1);
        }
    }

    #[test]
    fn failures_conserve_and_degrade() {
        let mut opts = CollectOptions::new(8);
        opts.parallelism = 3;
        let (p, stats) = collect_profile("m", &Flaky, &genes(2), 4, &opts).unwrap();
        p.check_conservation().unwrap();
        assert_eq!(p.failures, vec![6, 0]);
        assert_eq!(stats.failures, 6);
        assert!(p.degraded);
        let f: f64 = p.frequencies(0).unwrap().map(|(_, f)| f).sum();
        assert!((f - 1.0).abs() < 1e-15);
    }

    #[test]
    fn profile_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let mut counts = vec![BTreeMap::new(), BTreeMap::new()];
        counts[0].insert(extract_allele("绩排名：第", 4), 3);
        counts[0].insert(extract_allele("ab", 4), 1);
        counts[1].insert(extract_allele("ab", 2), 4);
        let p = PopulationProfile {
            model_id: "zh".into(),
            gene_ids: vec!["a".into(), "b".into()],
            counts,
            probes_requested: 4,
            failures: vec![0, 0],
            allele_chars: 4,
            template: None,
            degraded: false,
        };
        save_profile(&p, &path).unwrap();
        assert_eq!(load_profile(&path).unwrap(), p);

        let text = std::fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().take(2).collect();
        match decode_profile(&cut.join("\n"), &path) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("record 1"), "{message}"),
            other => panic!("{other:?}"),
        }
        let bumped = text.replacen("\"version\":1", "\"version\":7", 1);
        assert!(matches!(
            decode_profile(&bumped, &path),
            Err(Error::Version { found: 7, .. })
        ));
    }
}
