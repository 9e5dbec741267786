use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::extract::extract_choice;
use crate::error::EvalError;
use crate::qa::{QaItem, TaskCategory};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub qa_id: String,
    pub raw_output: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    /// Percent.
    pub accuracy: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_category: BTreeMap<TaskCategory, CategoryScore>,
    /// Unweighted mean of the per-category accuracies.
    pub average: f64,
    pub invalid_count: usize,
}

impl ScoreReport {
    /// Builds a report from per-category `(sum of credit, n)` pairs.
    pub fn from_credit(credit: &BTreeMap<TaskCategory, (f64, usize)>, invalid_count: usize) -> ScoreReport {
        let per_category: BTreeMap<TaskCategory, CategoryScore> = credit
            .iter()
            .filter(|(_, (_, n))| *n > 0)
            .map(|(c, (sum, n))| (*c, CategoryScore { accuracy: 100.0 * sum / *n as f64, n: *n }))
            .collect();
        let average = if per_category.is_empty() {
            0.0
        } else {
            per_category.values().map(|s| s.accuracy).sum::<f64>() / per_category.len() as f64
        };
        ScoreReport { per_category, average, invalid_count }
    }

    pub fn accuracy(&self, c: TaskCategory) -> Option<f64> {
        self.per_category.get(&c).map(|s| s.accuracy)
    }
}

/// Exact-index accuracy per category. Missing or unparseable predictions are
/// invalid and count as wrong; predictions for unknown items are an error.
pub fn score(dataset: &[QaItem], predictions: &[Prediction]) -> Result<ScoreReport, EvalError> {
    let known: HashMap<&str, &QaItem> = dataset.iter().map(|i| (i.qa_id.as_str(), i)).collect();
    let mut by_id: HashMap<&str, &str> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        if !known.contains_key(p.qa_id.as_str()) {
            return Err(EvalError::UnknownQaId(p.qa_id.clone()));
        }
        by_id.entry(p.qa_id.as_str()).or_insert(p.raw_output.as_str());
    }
    let mut credit: BTreeMap<TaskCategory, (f64, usize)> = BTreeMap::new();
    let mut invalid = 0;
    for item in dataset {
        let entry = credit.entry(item.category).or_insert((0.0, 0));
        entry.1 += 1;
        match by_id.get(item.qa_id.as_str()).and_then(|raw| extract_choice(raw, item.options.len())) {
            Some(i) if i == item.answer_index => entry.0 += 1.0,
            Some(_) => {}
            None => invalid += 1,
        }
    }
    Ok(ScoreReport::from_credit(&credit, invalid))
}

/// Expected accuracy of uniform guessing: `100 · mean(1 / |options|)` per category.
pub fn random_baseline(dataset: &[QaItem]) -> ScoreReport {
    // grouped by option count so a uniform category comes out as exactly 100/k
    let mut groups: BTreeMap<TaskCategory, BTreeMap<usize, usize>> = BTreeMap::new();
    for item in dataset {
        *groups.entry(item.category).or_default().entry(item.options.len().max(1)).or_insert(0) += 1;
    }
    let mut per_category = BTreeMap::new();
    for (cat, by_k) in groups {
        let n: usize = by_k.values().sum();
        let accuracy = by_k.iter().map(|(k, m)| (*m as f64 / n as f64) * (100.0 / *k as f64)).sum();
        per_category.insert(cat, CategoryScore { accuracy, n });
    }
    let average = per_category.values().map(|s| s.accuracy).sum::<f64>() / per_category.len().max(1) as f64;
    ScoreReport { per_category, average, invalid_count: 0 }
}

/// `n` indices evenly spaced over `[0, n_frames − 1]`, both ends included, deduplicated.
pub fn frame_sample(n_frames: usize, n: usize) -> Vec<usize> {
    if n_frames == 0 || n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0];
    }
    let last = (n_frames - 1) as f64;
    let mut out: Vec<usize> = (0..n).map(|i| (i as f64 * last / (n - 1) as f64).round() as usize).collect();
    out.dedup();
    out
}
