use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Model;
use crate::corpus::NliExample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// `confusion[gold][predicted]`, indices in label order
    /// (entailment, contradiction, neutral).
    pub confusion: [[usize; 3]; 3],
    pub per_source: BTreeMap<String, SourceStats>,
}

/// Accuracy, confusion matrix and per-source breakdown. Predictions run in
/// parallel and are reduced in input order.
pub fn evaluate(model: &Model, data: &[NliExample]) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("evaluation set"));
    }
    let predicted: Vec<_> = data.par_iter().map(|ex| model.predict(ex).map(|p| p.label)).collect::<Result<_>>()?;
    let mut confusion = [[0usize; 3]; 3];
    let mut per_source: BTreeMap<String, SourceStats> = BTreeMap::new();
    for (ex, &pred) in data.iter().zip(&predicted) {
        confusion[ex.label.index()][pred.index()] += 1;
        let s = per_source.entry(ex.source.clone()).or_default();
        s.total += 1;
        s.correct += usize::from(pred == ex.label);
    }
    for s in per_source.values_mut() {
        s.accuracy = s.correct as f64 / s.total as f64;
    }
    let correct = (0..3).map(|i| confusion[i][i]).sum();
    Ok(EvalReport {
        total: data.len(),
        correct,
        accuracy: correct as f64 / data.len() as f64,
        confusion,
        per_source,
    })
}
