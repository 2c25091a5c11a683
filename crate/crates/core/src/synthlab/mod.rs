//! Synthetic populations with known ancestry, and tree comparison.

mod lineage;
mod model;
mod rf;

pub use lineage::{
    build_family, gradient_roster, GradientRoster, GradientSpec, LineageNode, LineageSpec,
    SyntheticRoster,
};
pub use model::{
    blend, mutate, spawn_root, stem_vocabulary, synthetic_genes, SyntheticModel,
    SYNTHETIC_GENE_PREFIX,
};
pub use rf::rf_distance;
