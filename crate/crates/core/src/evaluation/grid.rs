use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate_with, stratified_kfold};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::LearnerSpec;

/// One candidate value in a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_usize(&self) -> Result<usize> {
        match self {
            ParamValue::Int(v) if *v >= 0 => Ok(*v as usize),
            other => Err(Error::invalid(format!("expected a non-negative integer, got {other}"))),
        }
    }

    pub fn as_f64(&self) -> Result<f64> {
        match self {
            ParamValue::Int(v) => Ok(*v as f64),
            ParamValue::Float(v) => Ok(*v),
            other => Err(Error::invalid(format!("expected a number, got {other}"))),
        }
    }

    pub fn as_text(&self) -> Result<&str> {
        match self {
            ParamValue::Text(s) => Ok(s),
            other => Err(Error::invalid(format!("expected a string, got {other}"))),
        }
    }

    pub fn as_bool(&self) -> Result<bool> {
        match self {
            ParamValue::Bool(b) => Ok(*b),
            other => Err(Error::invalid(format!("expected true or false, got {other}"))),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(v) => write!(f, "{v}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Text(v) => f.write_str(v),
        }
    }
}

/// Named candidate lists. Names are kept sorted; list order is preserved.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperGrid {
    pub params: BTreeMap<String, Vec<ParamValue>>,
}

/// A single point of a grid, in parameter-name order.
pub type Combination = Vec<(String, ParamValue)>;

impl HyperGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, values: Vec<ParamValue>) -> Self {
        self.params.insert(name.to_string(), values);
        self
    }

    /// The standard random-forest grid. Some lists repeat a value, so it expands
    /// to 3750 tuples and 3000 distinct ones.
    pub fn default_forest() -> Self {
        let ints = |v: &[i64]| v.iter().map(|&i| ParamValue::Int(i)).collect();
        let texts = |v: &[&str]| v.iter().map(|s| ParamValue::Text(s.to_string())).collect();
        Self::new()
            .with("n_estimators", ints(&[4, 6, 9, 13, 8]))
            .with("max_features", texts(&["log2", "sqrt", "auto"]))
            .with("criterion", texts(&["entropy", "gini"]))
            .with("max_depth", ints(&[1, 16, 32, 32, 26]))
            .with("min_samples_split", ints(&[2, 3, 5, 8, 12]))
            .with("min_samples_leaf", ints(&[1, 2, 8, 10, 15]))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grid: Self = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("grid file: {e}")))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::invalid("grid has no parameters"));
        }
        if let Some((name, _)) = self.params.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::invalid(format!("grid parameter `{name}` has no candidates")));
        }
        Ok(())
    }

    /// Size of the Cartesian product as written.
    pub fn raw_size(&self) -> usize {
        self.params.values().map(Vec::len).product()
    }

    /// Copy with repeated values removed from each list (first occurrence
    /// kept). Every removal is logged.
    pub fn deduplicated(&self) -> Self {
        let params = self
            .params
            .iter()
            .map(|(name, values)| {
                let mut kept: Vec<ParamValue> = Vec::with_capacity(values.len());
                for v in values {
                    if kept.contains(v) {
                        log::info!("grid parameter `{name}`: dropping duplicate value {v}");
                    } else {
                        kept.push(v.clone());
                    }
                }
                (name.clone(), kept)
            })
            .collect();
        Self { params }
    }

    /// Cartesian product after deduplication. The first parameter name
    /// varies slowest and values follow list order.
    pub fn expand(&self) -> Vec<Combination> {
        let grid = self.deduplicated();
        let lists: Vec<(&String, &Vec<ParamValue>)> = grid.params.iter().collect();
        let total = grid.raw_size();
        let mut out = Vec::with_capacity(total);
        let mut pos = vec![0usize; lists.len()];
        for _ in 0..total {
            out.push(
                lists
                    .iter()
                    .zip(&pos)
                    .map(|((name, values), &p)| ((*name).clone(), values[p].clone()))
                    .collect(),
            );
            for d in (0..lists.len()).rev() {
                pos[d] += 1;
                if pos[d] < lists[d].1.len() {
                    break;
                }
                pos[d] = 0;
            }
        }
        out
    }
}

/// `base` with every parameter of `combo` applied.
pub fn apply_combination(base: &LearnerSpec, combo: &Combination) -> Result<LearnerSpec> {
    let mut spec = base.clone();
    for (name, value) in combo {
        spec.config.set_param(name, value)?;
    }
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub params: Combination,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub param_names: Vec<String>,
    pub table: Vec<GridRow>,
    pub best_index: usize,
    pub best_params: Combination,
    pub best_mean_score: f64,
    pub raw_combinations: usize,
}

impl GridResult {
    /// One line per combination: parameter columns, `fold_<i>` columns, `mean`.
    pub fn to_csv(&self) -> String {
        let k = self.table.first().map_or(0, |r| r.fold_scores.len());
        let mut header: Vec<String> = self.param_names.clone();
        header.extend((1..=k).map(|i| format!("fold_{i}")));
        header.push("mean".into());
        let mut out = header.join(",");
        out.push('\n');
        for row in &self.table {
            let mut cells: Vec<String> = row.params.iter().map(|(_, v)| v.to_string()).collect();
            cells.extend(row.fold_scores.iter().map(f64::to_string));
            cells.push(row.mean.to_string());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Cross-validates every combination of `grid` applied to `base`. All
/// combinations share one fold assignment and the learner seed of `base`,
/// so scores differ only through the hyperparameters. Ties go to the
/// earliest combination.
pub fn grid_search(
    grid: &HyperGrid,
    base: &LearnerSpec,
    x: &Matrix,
    y: &[u8],
    k: usize,
    seed: u64,
) -> Result<GridResult> {
    grid.validate()?;
    let combos = grid.expand();
    let specs = combos
        .iter()
        .map(|c| apply_combination(base, c))
        .collect::<Result<Vec<LearnerSpec>>>()?;
    let folds = stratified_kfold(y, k, seed)?;
    let scores = specs
        .par_iter()
        .map(|spec| cross_validate_with(spec, x, y, &folds))
        .collect::<Result<Vec<_>>>()?;

    let mut best_index = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.mean > scores[best_index].mean {
            best_index = i;
        }
    }
    let table: Vec<GridRow> = combos
        .into_iter()
        .zip(scores)
        .map(|(params, cv)| GridRow {
            params,
            fold_scores: cv.fold_scores,
            mean: cv.mean,
        })
        .collect();
    Ok(GridResult {
        param_names: grid.params.keys().cloned().collect(),
        best_params: table[best_index].params.clone(),
        best_mean_score: table[best_index].mean,
        best_index,
        raw_combinations: grid.raw_size(),
        table,
    })
}
