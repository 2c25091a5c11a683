//! Leave-one-family-out evaluation of the benchmark predictor.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ica::{fit_ica, DEFAULT_COMPONENTS};
use super::regress::{train_regressor, TrainConfig};
use super::stats::{pearson, Correlation};
use super::table::BenchmarkTable;
use crate::error::{Error, Result};
use crate::phylo::SimilarityMatrix;

/// A model's similarity to every roster member, itself included.
pub fn features_from_similarity(s: &SimilarityMatrix, model: &str) -> Result<Vec<f64>> {
    let i = s
        .0
        .index_of(model)
        .ok_or_else(|| Error::input(format!("model {model} is not in the similarity matrix")))?;
    Ok(s.0.row(i).to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LofoOptions {
    pub components: usize,
    pub seed: u64,
    pub train: TrainConfig,
    /// Drop the held-out family's columns from every feature vector.
    pub exclude_heldout_columns: bool,
}

impl Default for LofoOptions {
    fn default() -> Self {
        LofoOptions {
            components: DEFAULT_COMPONENTS,
            seed: 0,
            train: TrainConfig::default(),
            exclude_heldout_columns: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub model: String,
    pub family: String,
    pub predicted: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LofoReport {
    pub benchmark: String,
    pub predictions: Vec<Prediction>,
    pub overall: Correlation,
    pub per_family: BTreeMap<String, Correlation>,
    /// Models each held-out family's predictor was fit on.
    pub fit_sets: BTreeMap<String, Vec<String>>,
    pub degraded_fits: Vec<String>,
}

impl LofoReport {
    /// Mean of the defined within-family coefficients.
    pub fn mean_family_r(&self) -> Option<f64> {
        let rs: Vec<f64> = self
            .per_family
            .values()
            .filter_map(Correlation::value)
            .collect();
        (!rs.is_empty()).then(|| rs.iter().sum::<f64>() / rs.len() as f64)
    }
}

/// For each family, fits ICA and the regressor on every other scored model and
/// predicts the held-out family. Models without a score are skipped.
pub fn lofo_evaluate(
    s: &SimilarityMatrix,
    table: &BenchmarkTable,
    benchmark: &str,
    opts: &LofoOptions,
) -> Result<LofoReport> {
    let scored: Vec<(usize, String, f64)> = s
        .model_ids()
        .iter()
        .enumerate()
        .filter_map(|(i, id)| {
            let fam = table.family(id)?;
            let y = table.score(id, benchmark)?;
            Some((i, fam.to_string(), y))
        })
        .collect();
    let families: BTreeSet<&str> = scored.iter().map(|(_, f, _)| f.as_str()).collect();
    for fam in table
        .rows
        .values()
        .map(|r| r.family.as_str())
        .collect::<BTreeSet<_>>()
    {
        if !families.contains(fam) {
            log::warn!("family {fam} has no scored models for {benchmark}; skipped");
        }
    }
    if families.len() < 2 {
        return Err(Error::input(format!(
            "leave-one-family-out needs at least two families scored on {benchmark}, found {}",
            families.len()
        )));
    }

    let mut predictions = Vec::new();
    let mut fit_sets = BTreeMap::new();
    let mut degraded_fits = Vec::new();
    for fam in &families {
        let columns: Vec<usize> = (0..s.n())
            .filter(|&j| {
                !opts.exclude_heldout_columns || table.family(&s.model_ids()[j]) != Some(fam)
            })
            .collect();
        let feature = |i: usize| -> Vec<f64> { columns.iter().map(|&j| s.get(i, j)).collect() };
        let train: Vec<&(usize, String, f64)> =
            scored.iter().filter(|(_, f, _)| f != fam).collect();
        let x: Vec<Vec<f64>> = train.iter().map(|(i, _, _)| feature(*i)).collect();
        let y: Vec<f64> = train.iter().map(|(_, _, y)| *y).collect();
        let ica = fit_ica(&x, opts.components, opts.seed)
            .map_err(|e| Error::input(format!("holding out {fam}: {e}")))?;
        if ica.degraded {
            degraded_fits.push(fam.to_string());
        }
        let reg = train_regressor(&ica.transform_rows(&x), &y, &opts.train)?;
        fit_sets.insert(
            fam.to_string(),
            train
                .iter()
                .map(|(i, _, _)| s.model_ids()[*i].clone())
                .collect(),
        );
        for (i, f, actual) in scored.iter().filter(|(_, f, _)| f == fam) {
            predictions.push(Prediction {
                model: s.model_ids()[*i].clone(),
                family: f.clone(),
                predicted: reg.predict(&ica.transform(&feature(*i))),
                actual: *actual,
            });
        }
    }

    let (p, a): (Vec<f64>, Vec<f64>) = predictions.iter().map(|p| (p.predicted, p.actual)).unzip();
    let overall = pearson(&p, &a);
    let per_family = families
        .iter()
        .map(|fam| {
            let (p, a): (Vec<f64>, Vec<f64>) = predictions
                .iter()
                .filter(|x| x.family == *fam)
                .map(|x| (x.predicted, x.actual))
                .unzip();
            (fam.to_string(), pearson(&p, &a))
        })
        .collect();
    Ok(LofoReport {
        benchmark: benchmark.to_string(),
        predictions,
        overall,
        per_family,
        fit_sets,
        degraded_fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::LabeledMatrix;

    #[test]
    fn feature_rows() {
        let s = SimilarityMatrix::try_from_matrix(
            LabeledMatrix::from_rows(
                vec!["a".into(), "b".into()],
                &[vec![1.0, 0.7], vec![0.7, 1.0]],
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(features_from_similarity(&s, "a").unwrap(), vec![1.0, 0.7]);
        assert!(features_from_similarity(&s, "zz").is_err());
        let ident = SimilarityMatrix::try_from_matrix(
            LabeledMatrix::from_rows(
                vec!["a".into(), "b".into(), "c".into()],
                &[
                    vec![1.0, 0.0, 0.0],
                    vec![0.0, 1.0, 0.0],
                    vec![0.0, 0.0, 1.0],
                ],
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(
            features_from_similarity(&ident, "b").unwrap(),
            vec![0.0, 1.0, 0.0]
        );
    }
}
