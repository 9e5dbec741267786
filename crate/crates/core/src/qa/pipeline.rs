use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::facts::extract_scene_facts_with_radius;
use super::negatives::generate_negatives;
use super::rephrase::{rephrase_deictic, RephraseMode};
use super::templates::{generate_question_avoiding, TaskCategory};
use super::validate::validate_with_facts;
use super::{Provenance, QaItem};
use crate::error::QaError;
use crate::seed;
use crate::synth::ClipRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CategoryWeights {
    pub reference: f64,
    pub temporal: f64,
    pub counting: f64,
    pub attribute: f64,
    pub spatial: f64,
    pub feedback: f64,
}

impl Default for CategoryWeights {
    fn default() -> Self {
        // Reference and Temporal are each feasible on only part of the clips
        CategoryWeights { reference: 2.0, temporal: 2.0, counting: 1.0, attribute: 1.0, spatial: 1.0, feedback: 1.0 }
    }
}

impl CategoryWeights {
    pub fn get(&self, c: TaskCategory) -> f64 {
        match c {
            TaskCategory::Reference => self.reference,
            TaskCategory::Temporal => self.temporal,
            TaskCategory::Counting => self.counting,
            TaskCategory::Attribute => self.attribute,
            TaskCategory::Spatial => self.spatial,
            TaskCategory::Feedback => self.feedback,
        }
    }

    /// Keeps only `categories`, zeroing the rest.
    pub fn restrict(&self, categories: &[TaskCategory]) -> CategoryWeights {
        let keep = |c: TaskCategory, w: f64| if categories.contains(&c) { w } else { 0.0 };
        CategoryWeights {
            reference: keep(TaskCategory::Reference, self.reference),
            temporal: keep(TaskCategory::Temporal, self.temporal),
            counting: keep(TaskCategory::Counting, self.counting),
            attribute: keep(TaskCategory::Attribute, self.attribute),
            spatial: keep(TaskCategory::Spatial, self.spatial),
            feedback: keep(TaskCategory::Feedback, self.feedback),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaConfig {
    pub items_min: usize,
    pub items_max: usize,
    pub weights: CategoryWeights,
    /// Share of Spatial questions asked in Yes/No form.
    pub spatial_binary_share: f64,
    pub neighbor_radius: f64,
    /// Failed draws after which a category is given up for a clip.
    pub category_attempts: usize,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            items_min: 3,
            items_max: 6,
            weights: CategoryWeights::default(),
            spatial_binary_share: 0.5,
            neighbor_radius: 1.0,
            category_attempts: 3,
        }
    }
}

impl QaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.items_min == 0 || self.items_max < self.items_min {
            return Err("items_min must be ≥ 1 and ≤ items_max".into());
        }
        let ws = TaskCategory::ALL.map(|c| self.weights.get(c));
        if ws.iter().any(|w| !(*w >= 0.0)) || ws.iter().sum::<f64>() <= 0.0 {
            return Err("category weights must be non-negative with a positive sum".into());
        }
        if !(0.0..=1.0).contains(&self.spatial_binary_share) {
            return Err("spatial_binary_share must be in [0, 1]".into());
        }
        if !(self.neighbor_radius > 0.0) {
            return Err("neighbor_radius must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClipQa {
    pub items: Vec<QaItem>,
    /// Categories given up on this clip because no question could be posed.
    pub infeasible: BTreeMap<TaskCategory, usize>,
    /// Items dropped after generation, with reasons.
    pub dropped: Vec<String>,
}

/// Generates this clip's QA items from the resolved `referents`.
pub fn generate_clip_items(
    clip: &ClipRecord,
    referents: &[String],
    config: &QaConfig,
    seed: u64,
    mode: &RephraseMode,
) -> Result<ClipQa, QaError> {
    let mut out = ClipQa::default();
    let clip_seed = seed::derive(seed, &clip.clip_id, 0);
    let mut rng = seed::rng(clip_seed, "qa-plan", 0);
    let sheet =
        extract_scene_facts_with_radius(&clip.scene, clip.reference_camera(), referents, config.neighbor_radius);

    let want = rng.gen_range(config.items_min..=config.items_max);
    let mut failures: BTreeMap<TaskCategory, usize> = BTreeMap::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut draw = 0u64;
    while out.items.len() < want {
        let active: Vec<TaskCategory> = TaskCategory::ALL
            .into_iter()
            .filter(|c| config.weights.get(*c) > 0.0)
            .filter(|c| failures.get(c).copied().unwrap_or(0) < config.category_attempts)
            .collect();
        if active.is_empty() {
            break;
        }
        let dist = WeightedIndex::new(active.iter().map(|c| config.weights.get(*c))).expect("positive weights");
        let category = active[dist.sample(&mut rng)];
        let item_seed = seed::derive(clip_seed, "item", draw);
        draw += 1;
        let mut fail = |out: &mut ClipQa| {
            let n = failures.entry(category).or_insert(0);
            *n += 1;
            if *n == config.category_attempts && !out.items.iter().any(|i| i.category == category) {
                *out.infeasible.entry(category).or_insert(0) += 1;
            }
        };

        let qa = match generate_question_avoiding(
            &sheet,
            referents,
            category,
            item_seed,
            config.spatial_binary_share,
            &seen,
        ) {
            Ok(qa) => qa,
            Err(QaError::CategoryInfeasible { .. }) => {
                fail(&mut out);
                continue;
            }
            Err(e) => return Err(e),
        };
        if !seen.insert(qa.structured_question.clone()) {
            fail(&mut out);
            continue;
        }
        let options = match generate_negatives(&qa, &sheet, referents, item_seed) {
            Ok(o) => o,
            Err(e @ QaError::InsufficientDistractors { .. }) => {
                out.dropped.push(format!("{category}: {e}"));
                fail(&mut out);
                continue;
            }
            Err(e) => return Err(e),
        };
        let (question, rephraser) = match rephrase_deictic(&qa, &options.options, &sheet, referents, mode) {
            Ok(v) => v,
            Err(e @ QaError::RephraserUnavailable(_)) => return Err(e),
            Err(e) => {
                out.dropped.push(format!("{category}: {e}"));
                fail(&mut out);
                continue;
            }
        };
        let item = QaItem {
            qa_id: format!("{}-q{:02}", clip.clip_id, out.items.len()),
            clip_id: clip.clip_id.clone(),
            category,
            question,
            options: options.options,
            answer_index: options.answer_index,
            target_ids: qa.target_ids,
            structured_question: qa.structured_question,
            provenance: Provenance {
                spec: qa.spec,
                seed: item_seed,
                rephraser: rephraser.to_string(),
                strategies: options.strategies,
            },
        };
        let report = validate_with_facts(&item, &sheet, referents);
        if report.passed() {
            out.items.push(item);
        } else {
            out.dropped.push(format!("{category}: {}", report.failures.join("; ")));
            fail(&mut out);
        }
    }
    Ok(out)
}
