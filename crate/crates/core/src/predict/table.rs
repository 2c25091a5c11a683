use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub family: String,
    /// `None` marks a missing score.
    pub scores: BTreeMap<String, Option<f64>>,
}

/// Per-model benchmark scores in `[0, 1]` with family labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub benchmarks: Vec<String>,
    pub rows: BTreeMap<String, BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn insert(
        &mut self,
        model: &str,
        family: &str,
        scores: &[(&str, Option<f64>)],
    ) -> Result<()> {
        if family.is_empty() {
            return Err(Error::input(format!("model {model} has no family label")));
        }
        let mut row = BenchmarkRow {
            family: family.to_string(),
            scores: BTreeMap::new(),
        };
        for &(b, s) in scores {
            if let Some(v) = s {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::input(format!(
                        "{model}/{b}: score {v} outside [0, 1]"
                    )));
                }
            }
            if !self.benchmarks.iter().any(|x| x == b) {
                self.benchmarks.push(b.to_string());
            }
            row.scores.insert(b.to_string(), s);
        }
        self.rows.insert(model.to_string(), row);
        Ok(())
    }

    pub fn score(&self, model: &str, benchmark: &str) -> Option<f64> {
        self.rows
            .get(model)?
            .scores
            .get(benchmark)
            .copied()
            .flatten()
    }

    pub fn family(&self, model: &str) -> Option<&str> {
        self.rows.get(model).map(|r| r.family.as_str())
    }

    /// CSV with columns `model,family,<benchmark>...`; empty, `?`, or `NA` cells are missing.
    pub fn from_csv(text: &str, path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?
            .clone();
        if headers.get(0) != Some("model") || headers.get(1) != Some("family") {
            return Err(Error::parse(path, 1, "header must start with model,family"));
        }
        let benches: Vec<&str> = headers.iter().skip(2).collect();
        let mut table = BenchmarkTable::default();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
            let model = rec.get(0).unwrap_or_default();
            let family = rec.get(1).unwrap_or_default();
            let scores = benches
                .iter()
                .enumerate()
                .map(|(k, b)| {
                    let cell = rec.get(k + 2).unwrap_or_default();
                    let v = match cell {
                        "" | "?" | "NA" => None,
                        c => Some(c.parse::<f64>().map_err(|_| {
                            Error::parse(path, line, format!("{b}: bad score {c:?}"))
                        })?),
                    };
                    Ok((*b, v))
                })
                .collect::<Result<Vec<_>>>()?;
            table
                .insert(model, family, &scores)
                .map_err(|e| Error::parse(path, line, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&io::read_to_string(path)?, path)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("model,family,{}\n", self.benchmarks.join(","));
        for (model, row) in &self.rows {
            let cells: Vec<String> = self
                .benchmarks
                .iter()
                .map(|b| {
                    row.scores
                        .get(b)
                        .copied()
                        .flatten()
                        .map_or("?".into(), |v| v.to_string())
                })
                .collect();
            out.push_str(&format!("{model},{},{}\n", row.family, cells.join(",")));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_missing() {
        let t = BenchmarkTable::from_csv(
            "model,family,arc,mmlu\na,llama,0.5,?\nb,opt,0.25,0.3\n",
            Path::new("t.csv"),
        )
        .unwrap();
        assert_eq!(t.score("a", "arc"), Some(0.5));
        assert_eq!(t.score("a", "mmlu"), None);
        assert_eq!(t.family("b"), Some("opt"));
        let back = BenchmarkTable::from_csv(&t.to_csv(), Path::new("t.csv")).unwrap();
        assert_eq!(back, t);
        assert!(BenchmarkTable::from_csv("model,family,x\na,f,1.5\n", Path::new("t")).is_err());
        assert!(BenchmarkTable::from_csv("model,family,x\na,,0.5\n", Path::new("t")).is_err());
    }
}
