//! Predicting benchmark scores from similarity geometry.

mod ica;
mod lofo;
mod regress;
mod stats;
mod table;

pub use ica::{fit_ica, IcaTransform, DEFAULT_COMPONENTS, ICA_MAX_ITER, ICA_TOLERANCE};
pub use lofo::{features_from_similarity, lofo_evaluate, LofoOptions, LofoReport, Prediction};
pub use regress::{mse_and_gradient, sigmoid, train_regressor, Regressor, TrainConfig};
pub use stats::{pearson, Correlation};
pub use table::{BenchmarkRow, BenchmarkTable};
