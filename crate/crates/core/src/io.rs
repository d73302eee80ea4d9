//! JSON model documents.
//!
//! ```json
//! {"labels": [[1,2],[2,1]], "kernel": [["0","1"],["1","0"]], "mu": ["1/2","1/2"],
//!  "maps": [{"name": "first", "labeling": [0, 1]}]}
//! ```
//!
//! Entries are `"p/q"` strings or plain JSON numbers. Large kernels may be
//! given as `"kernel_sparse"`: one list of `[column, value]` pairs per row.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{FiniteMarkovModel, SparseRow, StateLabel};
use crate::quotient::FactorMap;
use crate::rational::JsonRational;

/// Models up to this size are written with a dense kernel.
pub const DENSE_OUTPUT_CAP: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub name: String,
    pub labeling: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<StateLabel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<Vec<JsonRational>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_sparse: Option<Vec<Vec<(usize, JsonRational)>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<JsonRational>>,
    /// Output only; recomputed on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reversible: Option<bool>,
    #[serde(default)]
    pub maps: Vec<MapDocument>,
}

impl ModelDocument {
    pub fn from_model(model: &FiniteMarkovModel, maps: &[FactorMap]) -> Self {
        let n = model.n_states();
        let (kernel, kernel_sparse) = if n <= DENSE_OUTPUT_CAP {
            let dense = model
                .kernel_rows()
                .iter()
                .map(|row| {
                    let mut out = vec![JsonRational(num_traits::Zero::zero()); n];
                    for (y, v) in row {
                        out[*y] = JsonRational(v.clone());
                    }
                    out
                })
                .collect();
            (Some(dense), None)
        } else {
            let sparse = model
                .kernel_rows()
                .iter()
                .map(|row| row.iter().map(|(y, v)| (*y, JsonRational(v.clone()))).collect())
                .collect();
            (None, Some(sparse))
        };
        ModelDocument {
            n_states: Some(n),
            labels: Some(model.labels().to_vec()),
            kernel,
            kernel_sparse,
            mu: Some(model.mu().iter().cloned().map(JsonRational).collect()),
            reversible: Some(model.reversible()),
            maps: maps.iter().map(|t| MapDocument { name: t.name().to_string(), labeling: t.labeling().to_vec() }).collect(),
        }
    }

    pub fn build(&self) -> Result<(FiniteMarkovModel, Vec<FactorMap>)> {
        let rows: Vec<SparseRow> = match (&self.kernel, &self.kernel_sparse) {
            (Some(dense), None) => {
                let n = dense.len();
                dense
                    .iter()
                    .map(|row| {
                        if row.len() != n {
                            return Err(Error::DimensionMismatch { what: "kernel row", expected: n, found: row.len() });
                        }
                        Ok(row.iter().enumerate().map(|(y, v)| (y, v.0.clone())).collect())
                    })
                    .collect::<Result<_>>()?
            }
            (None, Some(sparse)) => {
                sparse.iter().map(|row| row.iter().map(|(y, v)| (*y, v.0.clone())).collect()).collect()
            }
            (Some(_), Some(_)) => return Err(Error::Parse("give either kernel or kernel_sparse, not both".into())),
            (None, None) => return Err(Error::Parse("model document has no kernel".into())),
        };
        let labels = match &self.labels {
            Some(l) => l.clone(),
            None => FiniteMarkovModel::indexed_labels(rows.len()),
        };
        if let Some(n) = self.n_states {
            if n != rows.len() {
                return Err(Error::DimensionMismatch { what: "n_states", expected: rows.len(), found: n });
            }
        }
        let mu = self.mu.as_ref().map(|m| m.iter().map(|v| v.0.clone()).collect());
        let model = FiniteMarkovModel::new(labels, rows, mu)?;
        let maps = self
            .maps
            .iter()
            .map(|m| FactorMap::new(&model, m.name.clone(), m.labeling.clone()))
            .collect::<Result<_>>()?;
        Ok((model, maps))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn parse_and_round_trip() {
        let doc = ModelDocument::from_json(
            r#"{"labels": ["a", "b"], "kernel": [["1/4", "3/4"], [0.5, 0.5]],
                "maps": [{"name": "id", "labeling": [0, 1]}]}"#,
        )
        .unwrap();
        let (m, maps) = doc.build().unwrap();
        assert_eq!(m.mu(), &[rat(2, 5), rat(3, 5)]);
        assert_eq!(maps[0].n_blocks(), 2);
        let again = ModelDocument::from_json(&ModelDocument::from_model(&m, &maps).to_json_pretty().unwrap()).unwrap();
        let (m2, _) = again.build().unwrap();
        assert_eq!(m2.kernel_rows(), m.kernel_rows());
        assert_eq!(m2.labels(), m.labels());
    }

    #[test]
    fn sparse_and_errors() {
        let doc = ModelDocument::from_json(r#"{"kernel_sparse": [[[1, 1]], [[0, "1"]]]}"#).unwrap();
        assert_eq!(doc.build().unwrap().0.n_states(), 2);
        assert!(ModelDocument::from_json(r#"{"labels": [1]}"#).unwrap().build().is_err());
        assert!(ModelDocument::from_json(r#"{"kernel": [["1/2"]]}"#).unwrap().build().is_err());
        assert!(ModelDocument::from_json("{").is_err());
    }
}
