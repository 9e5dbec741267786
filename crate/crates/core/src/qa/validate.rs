use std::collections::BTreeSet;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::facts::{extract_scene_facts, FactSheet};
use super::negatives::BINARY_OPTIONS;
use super::templates::{answer_for, contains_word};
use super::QaItem;
use crate::scene::{CameraPose, Scene};

pub const DEICTIC_TOKENS: [&str; 7] = ["this", "that", "these", "those", "it", "here", "there"];

static ORDINAL_PHRASE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)\bthe \w+(?: and \w+)? objects? I pointed at\b").expect("valid regex"));

pub const CHECK_ORACLE: &str = "oracle-answerability";
pub const CHECK_DEICTIC: &str = "deictic-ambiguity";
pub const CHECK_OPTIONS: &str = "option-integrity";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// `"<check>: <detail>"` for every failed check.
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Names of the failed checks, deduplicated.
    pub fn failed_checks(&self) -> BTreeSet<String> {
        self.failures.iter().map(|f| f.split(':').next().unwrap_or(f).to_string()).collect()
    }
}

pub fn has_deictic_reference(question: &str) -> bool {
    DEICTIC_TOKENS.iter().any(|t| contains_word(question, t)) || ORDINAL_PHRASE.is_match(question)
}

/// Deictic-ambiguity failures: the question names a target or lacks any deictic reference.
/// Mentions of the anchor's own expression are exempt.
pub fn question_failures(
    question: &str,
    target_ids: &[String],
    anchor_id: Option<&str>,
    sheet: &FactSheet,
) -> Vec<String> {
    let mut scrubbed = question.to_string();
    if let Some(a) = anchor_id.and_then(|id| sheet.fact(id)) {
        scrubbed = scrubbed.replace(&a.referring_expression, " ");
    }
    let mut failures = Vec::new();
    for t in target_ids.iter().filter_map(|id| sheet.fact(id)) {
        if contains_word(&scrubbed, &t.category) {
            failures.push(format!("{CHECK_DEICTIC}: question names target category {:?}", t.category));
        }
        if scrubbed.to_lowercase().contains(&t.referring_expression.to_lowercase()) {
            failures.push(format!("{CHECK_DEICTIC}: question contains {:?}", t.referring_expression));
        }
    }
    if !has_deictic_reference(question) {
        failures.push(format!("{CHECK_DEICTIC}: no deictic token or ordinal gesture phrase"));
    }
    failures
}

/// Recomputes facts at `camera` and checks answerability, deixis and options.
pub fn validate_item(item: &QaItem, scene: &Scene, camera: &CameraPose, referents: &[String]) -> ValidationReport {
    let sheet = extract_scene_facts(scene, camera, referents);
    validate_with_facts(item, &sheet, referents)
}

pub fn validate_with_facts(item: &QaItem, sheet: &FactSheet, referents: &[String]) -> ValidationReport {
    let mut failures = Vec::new();
    let spec = &item.provenance.spec;

    // (c) option integrity
    let expected = if spec.is_binary() { 2 } else { 5 };
    if item.options.len() != expected {
        failures.push(format!("{CHECK_OPTIONS}: {} options, expected {expected}", item.options.len()));
    }
    let distinct: BTreeSet<&String> = item.options.iter().collect();
    if distinct.len() != item.options.len() {
        failures.push(format!("{CHECK_OPTIONS}: duplicate options"));
    }
    if item.answer_index >= item.options.len() {
        failures.push(format!("{CHECK_OPTIONS}: answer_index {} out of range", item.answer_index));
    }
    if spec.is_binary() && item.options.iter().map(String::as_str).ne(BINARY_OPTIONS) {
        failures.push(format!("{CHECK_OPTIONS}: binary options must be exactly Yes/No"));
    }
    if spec.category() != item.category {
        failures.push(format!("{CHECK_OPTIONS}: category {} does not match template", item.category));
    }

    // (a) oracle answerability
    let expected_target = spec.ordinal().checked_sub(1).and_then(|i| referents.get(i));
    if expected_target.map(|t| item.target_ids.first() != Some(t)).unwrap_or(true) {
        failures.push(format!(
            "{CHECK_ORACLE}: target_ids {:?} do not match pointed object #{}",
            item.target_ids,
            spec.ordinal()
        ));
    }
    match answer_for(spec, sheet, referents) {
        Ok(answer) => {
            if item.options.get(item.answer_index) != Some(&answer) {
                failures.push(format!(
                    "{CHECK_ORACLE}: recomputed answer {answer:?} but answer_index points at {:?}",
                    item.options.get(item.answer_index)
                ));
            }
        }
        Err(e) => failures.push(format!("{CHECK_ORACLE}: {e}")),
    }

    // (b) deictic ambiguity
    failures.extend(question_failures(&item.question, &item.target_ids, spec.anchor_id(), sheet));

    ValidationReport { failures }
}
