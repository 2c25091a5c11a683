//! Shared fixtures for the benchmarks in `benches/`.

use lmgen_core::phylo::{distance_matrix, similarity_matrix};
use lmgen_core::population::CollectOptions;
use lmgen_core::synthlab::{
    build_family, synthetic_genes, LineageNode, LineageSpec, SyntheticModel,
};
use lmgen_core::{DistanceMatrix, GeneSet, PopulationProfile};

/// A caterpillar lineage with `leaves` tips, each edge mutated at `rate`.
pub fn chain_spec(leaves: usize, rate: f64, gene_count: usize) -> LineageSpec {
    let mut nodes = vec![LineageNode {
        id: "n0".into(),
        parent: None,
        rate: 0.0,
        family: None,
    }];
    for i in 1..leaves {
        nodes.push(LineageNode {
            id: format!("n{i}"),
            parent: Some(format!("n{}", i - 1)),
            rate,
            family: None,
        });
        nodes.push(LineageNode {
            id: format!("t{i}"),
            parent: Some(format!("n{i}")),
            rate,
            family: None,
        });
    }
    LineageSpec {
        nodes,
        vocab_size: 8,
        gene_count,
        concentration: 0.5,
        include_ancestors: false,
    }
}

pub fn roster(leaves: usize, gene_count: usize) -> Vec<SyntheticModel> {
    build_family(&chain_spec(leaves, 0.15, gene_count), 7)
        .expect("valid lineage")
        .models
}

pub fn genes(count: usize) -> GeneSet {
    synthetic_genes(0, count)
}

pub fn profiles(models: &[SyntheticModel], genes: &GeneSet, probes: u64) -> Vec<PopulationProfile> {
    models
        .iter()
        .map(|m| {
            lmgen_core::population::collect_profile(
                &m.id,
                m,
                genes,
                4,
                &CollectOptions::new(probes),
            )
            .expect("synthetic probing never fails")
            .0
        })
        .collect()
}

pub fn distances(profiles: &[PopulationProfile]) -> DistanceMatrix {
    distance_matrix(&similarity_matrix(profiles).expect("aligned profiles"))
}
