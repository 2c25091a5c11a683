//! Statistical checks on the synthetic lab: sampled frequencies, mutation
//! rates and divergence along a lineage.

use std::collections::HashMap;

use lmgen_core::phylo::nei_similarity;
use lmgen_core::population::{collect_profile, CollectOptions};
use lmgen_core::synthlab::{mutate, spawn_root, synthetic_genes, SyntheticModel};
use lmgen_core::PopulationProfile;

fn profile(m: &SyntheticModel, genes: usize, probes: u64) -> PopulationProfile {
    collect_profile(
        &m.id,
        m,
        &synthetic_genes(0, genes),
        4,
        &CollectOptions::new(probes),
    )
    .unwrap()
    .0
}

#[test]
fn sampled_frequencies_match_distributions() {
    let n = 1024u64;
    let root = spawn_root(8, 128, 0.5, 21).unwrap();
    let p = profile(&root, 128, n);
    let (mut inside, mut total) = (0, 0);
    for g in 0..128 {
        let seen: HashMap<String, f64> = p
            .frequencies(g)
            .unwrap()
            .map(|(k, f)| (k.text.clone(), f))
            .collect();
        assert!(
            seen.keys().all(|k| root.vocab.contains(k)),
            "allele outside the stem vocabulary"
        );
        for (stem, &prob) in root.vocab.iter().zip(&root.distributions[g]) {
            let got = seen.get(stem).copied().unwrap_or(0.0);
            let sigma = (prob * (1.0 - prob) / n as f64).sqrt();
            total += 1;
            if (got - prob).abs() <= 3.0 * sigma + 1e-12 {
                inside += 1;
            }
        }
    }
    assert!(
        inside as f64 >= 0.99 * total as f64,
        "{inside}/{total} within three sigma"
    );
}

#[test]
fn mutation_touches_the_expected_fraction() {
    let genes = 4096;
    let root = spawn_root(8, genes, 0.5, 5).unwrap();
    for rate in [0.05, 0.3, 0.7] {
        let child = mutate(&root, rate, 77).unwrap();
        let changed = root
            .distributions
            .iter()
            .zip(&child.distributions)
            .filter(|(a, b)| a != b)
            .count();
        let frac = changed as f64 / genes as f64;
        let sigma = (rate * (1.0 - rate) / genes as f64).sqrt();
        assert!(
            (frac - rate).abs() < 4.0 * sigma,
            "rate {rate}: changed {frac}"
        );
    }
}

#[test]
fn similarity_decays_along_a_chain() {
    for seed in 0..20u64 {
        let root = spawn_root(8, 256, 0.5, seed).unwrap();
        let mut chain = vec![root];
        for step in 0..3u64 {
            let next = mutate(chain.last().unwrap(), 0.2, seed * 10 + step).unwrap();
            chain.push(next);
        }
        let profiles: Vec<_> = chain.iter().map(|m| profile(m, 256, 64)).collect();
        let s: Vec<f64> = profiles[1..]
            .iter()
            .map(|q| nei_similarity(&profiles[0], q).unwrap())
            .collect();
        assert!(s.windows(2).all(|w| w[0] > w[1]), "seed {seed}: {s:?}");
    }
}
