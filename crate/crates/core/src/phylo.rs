//! Nei similarity between populations, distance matrices, contrast, and the
//! replicate-variability scans over the (genes, probes) grid.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::GeneSet;
use crate::io;
use crate::population::{collect_profile, CollectOptions, PopulationProfile, Prober};
use crate::rng;

/// Normalised inner product of two populations' allele frequencies, summed over genes.
///
/// The gene sums sit inside the square roots: the result is
/// `Σ_g Σ_a p(a|g) q(a|g) / sqrt(Σ_g Σ_a p(a|g)² · Σ_g Σ_a q(a|g)²)`.
pub fn nei_similarity(a: &PopulationProfile, b: &PopulationProfile) -> Result<f64> {
    check_same_genes(a, b)?;
    let mut cross = 0.0;
    let mut self_a = 0.0;
    let mut self_b = 0.0;
    for g in 0..a.gene_count() {
        let fa: Vec<_> = a.frequencies(g).ok_or_else(|| no_usable(a, g))?.collect();
        let fb: Vec<_> = b.frequencies(g).ok_or_else(|| no_usable(b, g))?.collect();
        self_a += fa.iter().map(|(_, p)| p * p).sum::<f64>();
        self_b += fb.iter().map(|(_, q)| q * q).sum::<f64>();
        // Both lists are sorted by allele; merge them so the sum is the same
        // whichever profile comes first.
        let (mut i, mut j) = (0, 0);
        let mut shared = 0.0;
        while i < fa.len() && j < fb.len() {
            match fa[i].0.cmp(fb[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    shared += fa[i].1 * fb[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        cross += shared;
    }
    // sqrt(x * x) can round away from x; this keeps S(a, a) exactly 1.
    let norm = if self_a == self_b {
        self_a
    } else {
        (self_a * self_b).sqrt()
    };
    Ok((cross / norm).clamp(0.0, 1.0))
}

fn no_usable(p: &PopulationProfile, g: usize) -> Error {
    Error::Numerical(format!(
        "profile {}: gene {} has no usable probes",
        p.model_id, p.gene_ids[g]
    ))
}

fn check_same_genes(a: &PopulationProfile, b: &PopulationProfile) -> Result<()> {
    if a.gene_ids == b.gene_ids {
        return Ok(());
    }
    let sa: BTreeSet<_> = a.gene_ids.iter().collect();
    let sb: BTreeSet<_> = b.gene_ids.iter().collect();
    let diff: Vec<_> = sa.symmetric_difference(&sb).map(|s| s.as_str()).collect();
    if diff.is_empty() {
        Err(Error::input(format!(
            "profiles {} and {} list the same genes in different orders",
            a.model_id, b.model_id
        )))
    } else {
        Err(Error::input(format!(
            "profiles {} and {} have different gene sets; symmetric difference: {}",
            a.model_id,
            b.model_id,
            diff.join(", ")
        )))
    }
}

/// Square matrix over an ordered list of model ids, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatrix {
    pub model_ids: Vec<String>,
    pub values: Vec<f64>,
}

impl LabeledMatrix {
    pub fn new(model_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = model_ids.len();
        if values.len() != n * n {
            return Err(Error::input(format!(
                "{n} ids need {} values, got {}",
                n * n,
                values.len()
            )));
        }
        Ok(LabeledMatrix { model_ids, values })
    }

    pub fn from_rows(model_ids: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(model_ids, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.model_ids.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n();
        self.values[i * n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.model_ids.iter().position(|m| m == id)
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Relabels rows and columns: entry `(i, j)` of the result is `(order[i], order[j])` here.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let ids = order.iter().map(|&i| self.model_ids[i].clone()).collect();
        let values = order
            .iter()
            .flat_map(|&i| order.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        LabeledMatrix {
            model_ids: ids,
            values,
        }
    }

    /// Tab-separated: a header row of ids, then one row of values per model.
    /// Infinite entries are written as `inf`.
    pub fn to_tsv(&self) -> String {
        let mut out = self.model_ids.join("\t");
        out.push('\n');
        for i in 0..self.n() {
            let row: Vec<String> = self.row(i).iter().map(|v| format_value(*v)).collect();
            let _ = writeln!(out, "{}", row.join("\t"));
        }
        out
    }

    pub fn from_tsv(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty matrix file"))?;
        // A leading empty cell means every row starts with its model id.
        let labelled = header.starts_with('\t');
        let ids: Vec<String> = header
            .split('\t')
            .skip(labelled as usize)
            .map(str::to_string)
            .collect();
        let mut values = Vec::with_capacity(ids.len() * ids.len());
        let mut rows = 0;
        for (line_no, line) in lines {
            let mut fields = line.split('\t');
            if labelled {
                let label = fields.next().unwrap_or_default();
                if ids.get(rows).map(String::as_str) != Some(label) {
                    return Err(Error::parse(
                        path,
                        line_no + 1,
                        format!(
                            "row label {label:?} does not match column {:?}",
                            ids.get(rows)
                        ),
                    ));
                }
            }
            let row: Vec<f64> = fields
                .map(|f| parse_value(f.trim()))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::parse(path, line_no + 1, "unparsable value"))?;
            if row.len() != ids.len() {
                return Err(Error::parse(
                    path,
                    line_no + 1,
                    format!("expected {} values, found {}", ids.len(), row.len()),
                ));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != ids.len() {
            return Err(Error::parse(
                path,
                rows + 2,
                format!("expected {} rows, found {rows}", ids.len()),
            ));
        }
        Ok(LabeledMatrix {
            model_ids: ids,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if self
            .model_ids
            .iter()
            .any(|id| id.contains(['\t', '\n', '\r']))
        {
            return Err(Error::input("model ids must not contain tabs or newlines"));
        }
        io::write_atomic(path, self.to_tsv().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tsv(&io::read_to_string(path)?, path)
    }
}

fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

fn parse_value(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" | "Infinity" => Some(f64::INFINITY),
        _ => s.parse().ok().filter(|v: &f64| v.is_finite()),
    }
}

/// Pairwise Nei similarities; symmetric, bounded in [0, 1], unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(pub LabeledMatrix);

impl SimilarityMatrix {
    /// Wraps `m`, checking symmetry, bounds, and the unit diagonal.
    pub fn try_from_matrix(m: LabeledMatrix) -> Result<Self> {
        if !m.is_symmetric() {
            return Err(Error::input("similarity matrix is not symmetric"));
        }
        if m.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::input("similarity entries must lie in [0, 1]"));
        }
        if (0..m.n()).any(|i| m.get(i, i) != 1.0) {
            return Err(Error::input("similarity diagonal must be 1"));
        }
        Ok(SimilarityMatrix(m))
    }

    pub fn matrix(&self) -> &LabeledMatrix {
        &self.0
    }

    pub fn model_ids(&self) -> &[String] {
        &self.0.model_ids
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

pub fn similarity_matrix(profiles: &[PopulationProfile]) -> Result<SimilarityMatrix> {
    let n = profiles.len();
    if n < 2 {
        return Err(Error::input(
            "a similarity matrix needs at least two profiles",
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let cells: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            nei_similarity(&profiles[i], &profiles[j]).map_err(|e| {
                Error::input(format!(
                    "pair ({}, {}): {e}",
                    profiles[i].model_id, profiles[j].model_id
                ))
            })
        })
        .collect::<Result<_>>()?;
    let ids = profiles.iter().map(|p| p.model_id.clone()).collect();
    let mut m = LabeledMatrix::new(ids, vec![0.0; n * n])?;
    for i in 0..n {
        m.set(i, i, 1.0);
    }
    for (&(i, j), &s) in pairs.iter().zip(&cells) {
        m.set(i, j, s);
        m.set(j, i, s);
    }
    Ok(SimilarityMatrix(m))
}

/// Elementwise `-ln S`. Zero similarities become `+inf`; `finite_cap` is the
/// value consumers needing finite input substitute for them.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub matrix: LabeledMatrix,
    pub finite_cap: f64,
}

pub const FINITE_CAP_FACTOR: f64 = 1.05;

impl DistanceMatrix {
    pub fn from_matrix(matrix: LabeledMatrix) -> Self {
        let finite_cap = finite_cap_for(&matrix);
        DistanceMatrix { matrix, finite_cap }
    }

    pub fn model_ids(&self) -> &[String] {
        &self.matrix.model_ids
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn has_infinite(&self) -> bool {
        self.matrix.values.iter().any(|v| v.is_infinite())
    }

    /// Copy with infinite entries replaced by `finite_cap`.
    pub fn capped(&self) -> LabeledMatrix {
        let mut m = self.matrix.clone();
        let mut replaced = 0;
        for v in &mut m.values {
            if v.is_infinite() {
                *v = self.finite_cap;
                replaced += 1;
            }
        }
        if replaced > 0 {
            log::warn!(
                "replaced {replaced} infinite distances with finite cap {}",
                self.finite_cap
            );
        }
        m
    }
}

fn finite_cap_for(m: &LabeledMatrix) -> f64 {
    let max = m
        .values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max);
    if max > 0.0 {
        FINITE_CAP_FACTOR * max
    } else {
        1.0
    }
}

pub fn distance_matrix(s: &SimilarityMatrix) -> DistanceMatrix {
    let values =
        s.0.values
            .iter()
            .map(|&v| {
                if v == 0.0 {
                    f64::INFINITY
                } else {
                    (-v.ln()).max(0.0)
                }
            })
            .collect();
    DistanceMatrix::from_matrix(LabeledMatrix {
        model_ids: s.0.model_ids.clone(),
        values,
    })
}

/// Population standard deviation of the off-diagonal entries.
pub fn rms_contrast(s: &SimilarityMatrix) -> Result<f64> {
    let n = s.n();
    if n < 2 {
        return Err(Error::input("contrast needs at least two models"));
    }
    let off: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| s.get(i, j))
        .collect();
    let mean = off.iter().sum::<f64>() / off.len() as f64;
    let var = off.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / off.len() as f64;
    Ok(var.sqrt())
}

/// Mean and standard error of the elementwise root of a variance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadSummary {
    pub mean: f64,
    pub std_error: f64,
}

fn summarize(cells: &[f64]) -> SpreadSummary {
    let n = cells.len() as f64;
    let mean = cells.iter().sum::<f64>() / n;
    let var = cells.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    SpreadSummary {
        mean,
        std_error: (var / n).sqrt(),
    }
}

fn check_aligned(ms: &[&LabeledMatrix]) -> Result<()> {
    let first = ms.first().ok_or_else(|| Error::input("no matrices"))?;
    if ms.iter().any(|m| m.model_ids != first.model_ids) {
        return Err(Error::input("matrices cover different model rosters"));
    }
    Ok(())
}

/// Replicate variability: mean over all cells (diagonal included) of the
/// elementwise standard deviation across replicates, using the `1/R` estimator.
pub fn variability(replicates: &[SimilarityMatrix]) -> Result<SpreadSummary> {
    let ms: Vec<&LabeledMatrix> = replicates.iter().map(|s| &s.0).collect();
    check_aligned(&ms)?;
    let r = ms.len() as f64;
    let cells: Vec<f64> = (0..ms[0].values.len())
        .map(|k| {
            let mean = ms.iter().map(|m| m.values[k]).sum::<f64>() / r;
            (ms.iter().map(|m| (m.values[k] - mean).powi(2)).sum::<f64>() / r).sqrt()
        })
        .collect();
    Ok(summarize(&cells))
}

/// Deviation around a high-precision oracle matrix: mean over all cells of
/// `sqrt((1/R) Σ_i (S_i - S_oracle)²)`.
pub fn oracle_deviation(
    replicates: &[SimilarityMatrix],
    oracle: &SimilarityMatrix,
) -> Result<SpreadSummary> {
    let mut ms: Vec<&LabeledMatrix> = replicates.iter().map(|s| &s.0).collect();
    ms.push(&oracle.0);
    check_aligned(&ms)?;
    let r = replicates.len() as f64;
    let cells: Vec<f64> = (0..oracle.0.values.len())
        .map(|k| {
            let o = oracle.0.values[k];
            (replicates
                .iter()
                .map(|s| (s.0.values[k] - o).powi(2))
                .sum::<f64>()
                / r)
                .sqrt()
        })
        .collect();
    Ok(summarize(&cells))
}

/// A model taking part in a scan.
pub struct ScanSubject<'a> {
    pub id: String,
    pub prober: &'a dyn Prober,
    pub allele_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub genes: usize,
    pub probes: u64,
    /// Replicate variability, or deviation from the oracle for oracle scans.
    pub score: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub kind: ScanKind,
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<(usize, u64)>,
    pub cells: Vec<ScanCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Variability,
    OracleDeviation,
}

impl VarianceReport {
    pub fn cell(&self, genes: usize, probes: u64) -> Option<&ScanCell> {
        self.cells
            .iter()
            .find(|c| c.genes == genes && c.probes == probes)
    }

    /// One JSON record per grid cell, preceded by a header record.
    pub fn to_jsonl(&self) -> String {
        let header = serde_json::json!({
            "kind": self.kind,
            "replicates": self.replicates,
            "oracle": self.oracle,
        });
        let mut out = format!("{header}\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{}",
                serde_json::to_string(c).expect("cell serializes")
            );
        }
        out
    }
}

/// Profiles every subject on `genes` and assembles their similarity matrix.
pub fn matrix_for(
    subjects: &[ScanSubject<'_>],
    genes: &GeneSet,
    probes: u64,
    salt: u64,
) -> Result<SimilarityMatrix> {
    let mut opts = CollectOptions::new(probes);
    opts.salt = salt;
    let profiles = subjects
        .iter()
        .map(|s| collect_profile(&s.id, s.prober, genes, s.allele_chars, &opts).map(|(p, _)| p))
        .collect::<Result<Vec<_>>>()?;
    similarity_matrix(&profiles)
}

/// Draws `replicates` disjoint gene subsets of size `size` from `pool`.
fn disjoint_sets(
    pool: &GeneSet,
    size: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<GeneSet>> {
    let need = size * replicates;
    if need > pool.len() {
        return Err(Error::input(format!(
            "{replicates} disjoint gene sets of size {size} need {need} genes, the pool has {}",
            pool.len()
        )));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut rng::keyed_rng(&[seed, size as u64, 0x6e5]));
    Ok((0..replicates)
        .map(|i| {
            pool.subset(
                format!("{}-G{size}-r{i}", pool.name),
                &order[i * size..(i + 1) * size],
            )
        })
        .collect())
}

fn replicate_matrices(
    subjects: &[ScanSubject<'_>],
    sets: &[GeneSet],
    genes: usize,
    probes: u64,
    seed: u64,
) -> Result<Vec<SimilarityMatrix>> {
    sets.par_iter()
        .enumerate()
        .map(|(i, set)| {
            let salt = rng::mix(&[seed, genes as u64, probes, i as u64]);
            matrix_for(subjects, set, probes, salt)
        })
        .collect()
}

fn check_grid(grid: &[(usize, u64)], replicates: usize) -> Result<()> {
    if replicates < 1 {
        return Err(Error::input("replicates must be at least 1"));
    }
    if grid.is_empty() || grid.iter().any(|&(g, n)| g == 0 || n == 0) {
        return Err(Error::input(
            "grid cells need positive gene and probe counts",
        ));
    }
    Ok(())
}

/// For each (G, N) cell, builds `replicates` similarity matrices from disjoint
/// gene sets of size G probed N times, and reports their variability.
///
/// Gene subsets depend on `(seed, G)` only, so cells sharing G reuse the same
/// gene sets while probe draws stay independent.
pub fn variability_scan(
    subjects: &[ScanSubject<'_>],
    pool: &GeneSet,
    grid: &[(usize, u64)],
    replicates: usize,
    seed: u64,
) -> Result<VarianceReport> {
    check_grid(grid, replicates)?;
    let cells = grid
        .iter()
        .map(|&(genes, probes)| {
            let sets = disjoint_sets(pool, genes, replicates, seed)?;
            let ms = replicate_matrices(subjects, &sets, genes, probes, seed)?;
            let s = variability(&ms)?;
            Ok(ScanCell {
                genes,
                probes,
                score: s.mean,
                std_error: s.std_error,
            })
        })
        .collect::<Result<_>>()?;
    Ok(VarianceReport {
        kind: ScanKind::Variability,
        replicates,
        oracle: None,
        cells,
    })
}

/// A high-precision similarity matrix with the genes it was built from.
#[derive(Debug, Clone)]
pub struct OracleMatrix {
    pub matrix: SimilarityMatrix,
    pub gene_ids: HashSet<String>,
    pub genes: usize,
    pub probes: u64,
}

pub fn build_oracle(
    subjects: &[ScanSubject<'_>],
    genes: &GeneSet,
    probes: u64,
    seed: u64,
) -> Result<OracleMatrix> {
    let matrix = matrix_for(subjects, genes, probes, rng::mix(&[seed, 0x0ac1e]))?;
    Ok(OracleMatrix {
        matrix,
        gene_ids: genes.ids().into_iter().collect(),
        genes: genes.len(),
        probes,
    })
}

/// Like [`variability_scan`] but measures spread around `oracle`. Scan genes
/// must not overlap the oracle's genes.
pub fn oracle_deviation_scan(
    subjects: &[ScanSubject<'_>],
    pool: &GeneSet,
    grid: &[(usize, u64)],
    oracle: &OracleMatrix,
    replicates: usize,
    seed: u64,
) -> Result<VarianceReport> {
    check_grid(grid, replicates)?;
    let cells = grid
        .iter()
        .map(|&(genes, probes)| {
            let sets = disjoint_sets(pool, genes, replicates, seed)?;
            if let Some(g) = sets
                .iter()
                .flat_map(|s| &s.genes)
                .find(|g| oracle.gene_ids.contains(&g.id))
            {
                return Err(Error::input(format!(
                    "scan gene {} is also an oracle gene; oracle genes must be independent",
                    g.id
                )));
            }
            let ms = replicate_matrices(subjects, &sets, genes, probes, seed)?;
            let s = oracle_deviation(&ms, &oracle.matrix)?;
            Ok(ScanCell {
                genes,
                probes,
                score: s.mean,
                std_error: s.std_error,
            })
        })
        .collect::<Result<_>>()?;
    Ok(VarianceReport {
        kind: ScanKind::OracleDeviation,
        replicates,
        oracle: Some((oracle.genes, oracle.probes)),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::extract_allele;
    use std::collections::BTreeMap;

    fn profile(id: &str, genes: &[&[(&str, u64)]]) -> PopulationProfile {
        let counts: Vec<BTreeMap<_, _>> = genes
            .iter()
            .map(|g| g.iter().map(|(a, c)| (extract_allele(a, 4), *c)).collect())
            .collect();
        let n = counts[0].values().sum();
        PopulationProfile {
            model_id: id.into(),
            gene_ids: (0..genes.len()).map(|i| format!("g{i}")).collect(),
            failures: vec![0; genes.len()],
            counts,
            probes_requested: n,
            allele_chars: 4,
            template: None,
            degraded: false,
        }
    }

    fn sim(rows: &[Vec<f64>]) -> SimilarityMatrix {
        let ids = (0..rows.len()).map(|i| format!("m{i}")).collect();
        SimilarityMatrix(LabeledMatrix::from_rows(ids, rows).unwrap())
    }

    #[test]
    fn hand_case() {
        let a = profile("a", &[&[("xxxx", 2)]]);
        let b = profile("b", &[&[("xxxx", 1), ("yyyy", 1)]]);
        // 0.5 / sqrt(0.5); the division lands one ulp below the correctly rounded 1/sqrt(2)
        assert!((nei_similarity(&a, &b).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(
            nei_similarity(&a, &b).unwrap(),
            nei_similarity(&b, &a).unwrap()
        );
        assert_eq!(nei_similarity(&b, &b).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_supports() {
        let a = profile("a", &[&[("aaaa", 3)], &[("bbbb", 1), ("cccc", 2)]]);
        let b = profile("b", &[&[("dddd", 3)], &[("eeee", 3)]]);
        assert_eq!(nei_similarity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn gene_mismatch_reports_difference() {
        let a = profile("a", &[&[("aaaa", 1)], &[("aaaa", 1)]]);
        let mut b = a.clone();
        b.gene_ids[1] = "other".into();
        let msg = nei_similarity(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("g1") && msg.contains("other"), "{msg}");

        let mut c = a.clone();
        c.counts[1].clear();
        c.failures[1] = 1;
        let msg = nei_similarity(&a, &c).unwrap_err().to_string();
        assert!(msg.contains("g1"), "{msg}");
    }

    #[test]
    fn matrix_assembly_and_permutation() {
        let a = profile("a", &[&[("xxxx", 2)]]);
        let b = profile("b", &[&[("xxxx", 1), ("yyyy", 1)]]);
        let c = profile("c", &[&[("yyyy", 2)]]);
        let s = similarity_matrix(&[a.clone(), b.clone(), c.clone()]).unwrap();
        assert!((s.get(0, 1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(s.get(0, 2), 0.0);
        assert!(s.0.is_symmetric());
        let p = similarity_matrix(&[c, a, b]).unwrap();
        assert_eq!(p.0, s.0.permuted(&[2, 0, 1]));
        assert!(similarity_matrix(&[profile("x", &[&[("a", 1)]])]).is_err());
    }

    #[test]
    fn distances() {
        let s = sim(&[
            vec![1.0, std::f64::consts::FRAC_1_SQRT_2, 0.0],
            vec![std::f64::consts::FRAC_1_SQRT_2, 1.0, 0.5],
            vec![0.0, 0.5, 1.0],
        ]);
        let d = distance_matrix(&s);
        assert_eq!(d.get(0, 0), 0.0);
        assert!((d.get(0, 1) - std::f64::consts::LN_2 / 2.0).abs() < 1e-15);
        assert_eq!(d.get(0, 2), f64::INFINITY);
        assert_eq!(d.finite_cap, 1.05 * std::f64::consts::LN_2);
        assert!(d.capped().values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn contrast() {
        // upper-triangle pairs {.2,.2,.8,.8,.2,.8} over four models
        let s = sim(&[
            vec![1.0, 0.2, 0.2, 0.8],
            vec![0.2, 1.0, 0.8, 0.2],
            vec![0.2, 0.8, 1.0, 0.8],
            vec![0.8, 0.2, 0.8, 1.0],
        ]);
        assert!((rms_contrast(&s).unwrap() - 0.3).abs() < 1e-15);
        let flat = sim(&[
            vec![1.0, 0.3, 0.3],
            vec![0.3, 1.0, 0.3],
            vec![0.3, 0.3, 1.0],
        ]);
        assert_eq!(rms_contrast(&flat).unwrap(), 0.0);
        let perm = SimilarityMatrix(s.0.permuted(&[2, 0, 3, 1]));
        assert!((rms_contrast(&s).unwrap() - rms_contrast(&perm).unwrap()).abs() < 1e-15);
        assert!(rms_contrast(&sim(&[vec![1.0]])).is_err());
    }

    #[test]
    fn two_replicate_variability_closed_form() {
        let (a, b) = (0.3, 0.9);
        let ms = [
            sim(&[vec![1.0, a], vec![a, 1.0]]),
            sim(&[vec![1.0, b], vec![b, 1.0]]),
        ];
        let v = variability(&ms).unwrap();
        // off-diagonal cells hold |a-b|/2, diagonal cells 0
        assert!((v.mean - (b - a) / 2.0 * 2.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn single_replicate_oracle_deviation() {
        let s = sim(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        let o = sim(&[vec![1.0, 0.9], vec![0.9, 1.0]]);
        let v = oracle_deviation(std::slice::from_ref(&s), &o).unwrap();
        // |0.5 - 0.9| on the two off-diagonal cells, zero on the diagonal
        assert!((v.mean - 0.2).abs() < 1e-15);
        assert_eq!(
            oracle_deviation(std::slice::from_ref(&o), &o).unwrap().mean,
            0.0
        );
    }

    #[test]
    fn tsv_round_trip_with_inf() {
        let m = LabeledMatrix::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![0.0, f64::INFINITY], vec![f64::INFINITY, 0.0]],
        )
        .unwrap();
        let back = LabeledMatrix::from_tsv(&m.to_tsv(), Path::new("m.tsv")).unwrap();
        assert_eq!(back, m);
        assert!(m.to_tsv().contains("inf"));
    }

    #[test]
    fn tsv_with_row_labels() {
        let text = "\ta\tb\na\t0\t2\nb\t2\t0\n";
        let m = LabeledMatrix::from_tsv(text, Path::new("m.tsv")).unwrap();
        assert_eq!(m.model_ids, ["a", "b"]);
        assert_eq!(m.get(0, 1), 2.0);
        let swapped = "\ta\tb\nb\t0\t2\na\t2\t0\n";
        let err = LabeledMatrix::from_tsv(swapped, Path::new("m.tsv"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
