//! Population-genetic fingerprinting of generative language models.
//!
//! Models are treated as populations: each fixed text context (a *gene*) is
//! completed many times, the first few characters of every completion form an
//! *allele*, and the resulting per-gene allele frequencies are compared with
//! Nei's similarity. Distances feed Neighbor-Joining trees, and similarity
//! rows feed a benchmark-score predictor. The [`synthlab`] module generates
//! populations with known ancestry for offline validation.

pub mod error;
pub mod genome;
pub mod io;
pub mod phylo;
pub mod population;
pub mod predict;
pub mod rng;
pub mod synthlab;
pub mod tree;

pub use error::{Error, Result};
pub use genome::{Gene, GeneSet, Template};
pub use phylo::{DistanceMatrix, LabeledMatrix, SimilarityMatrix, VarianceReport};
pub use population::{AlleleKey, ModelSpec, PopulationProfile, Prober, SamplingParams};
pub use tree::PhyloTree;
