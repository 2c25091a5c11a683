//! Obtaining alleles from models and aggregating them into population profiles.

mod allele;
mod cache;
mod model;
mod prober;
mod profile;

pub use allele::{extract_allele, AlleleKey, DEFAULT_ALLELE_CHARS, EOS_MARKER};
pub use cache::{CacheWriter, CompletionCache};
pub use model::{ModelSpec, Provider, Roster, SamplingParams};
pub use prober::{
    completion_text, connect, probe_once, Draw, FixedProber, HttpProber, Prober, ReplayProber,
    RetryPolicy,
};
pub use profile::{
    collect_completions, collect_profile, decode_profile, encode_profile, load_profile,
    save_profile, CollectOptions, CollectStats, Completions, PopulationProfile,
    DEFAULT_FAILURE_CEILING, PROFILE_FORMAT, PROFILE_VERSION,
};
