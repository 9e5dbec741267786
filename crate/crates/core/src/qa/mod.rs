//! Multiple-choice QA generation: scene facts, templated questions with
//! prioritized hard negatives, deictic rephrasing and validation.

mod facts;
mod negatives;
mod pipeline;
mod rephrase;
mod templates;
mod validate;

pub use facts::{
    extract_scene_facts, extract_scene_facts_with_radius, mentions_gesture, ordinal_word, FactSheet, SceneFact,
};
pub use negatives::{generate_negatives, NegativeStrategy, OptionSet, BINARY_OPTIONS, COUNT_WINDOW};
pub use pipeline::{generate_clip_items, CategoryWeights, ClipQa, QaConfig};
pub use rephrase::{rephrase_deictic, rule_rephrase, HttpRephraser, RephraseMode, RephraseRequest, Rephraser};
pub use templates::{
    answer_for, contains_word, depth_relation, generate_question, generate_question_avoiding, horizontal,
    relation_holds, sector, QuestionSpec, Relation, Sector, StructuredQa, TaskCategory, DEAD_ZONE_DEPTH, DEAD_ZONE_PX,
};
pub use validate::{
    has_deictic_reference, question_failures, validate_item, validate_with_facts, ValidationReport, CHECK_DEICTIC,
    CHECK_OPTIONS, CHECK_ORACLE, DEICTIC_TOKENS,
};

use serde::{Deserialize, Serialize};

/// How an item was built; enough to recompute its answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(flatten)]
    pub spec: QuestionSpec,
    pub seed: u64,
    pub rephraser: String,
    /// Negative strategy per option, `null` for the correct answer.
    pub strategies: Vec<Option<NegativeStrategy>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub qa_id: String,
    pub clip_id: String,
    pub category: TaskCategory,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
    pub target_ids: Vec<String>,
    pub structured_question: String,
    pub provenance: Provenance,
}

impl QaItem {
    pub fn answer(&self) -> Option<&str> {
        self.options.get(self.answer_index).map(String::as_str)
    }
}
