use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use once_cell::sync::Lazy;
use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use super::facts::{ordinal_word, FactSheet};
use super::templates::StructuredQa;
use super::validate::question_failures;
use crate::error::QaError;

static PLACEHOLDERS: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"<object(\d+)>(?: and <object(\d+)>)?").expect("valid regex"));

/// Wire format of the external rephraser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RephraseRequest {
    pub structured_question: String,
    pub options: Vec<String>,
    pub target_placeholders: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct RephraseResponse {
    question: String,
}

pub trait Rephraser: Send + Sync {
    fn rephrase(&self, request: &RephraseRequest) -> Result<String, QaError>;
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) {
        let mut free = self.free.lock().expect("gate poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate poisoned");
        }
        *free -= 1;
    }

    fn release(&self) {
        *self.free.lock().expect("gate poisoned") += 1;
        self.cv.notify_one();
    }
}

/// `POST {endpoint}/rephrase` client with a bounded number of in-flight requests.
pub struct HttpRephraser {
    url: String,
    agent: ureq::Agent,
    retries: usize,
    gate: Gate,
}

impl HttpRephraser {
    pub fn new(endpoint: &str, timeout: Duration, retries: usize, max_inflight: usize) -> Self {
        HttpRephraser {
            url: format!("{}/rephrase", endpoint.trim_end_matches('/')),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            retries,
            gate: Gate { free: Mutex::new(max_inflight.max(1)), cv: Condvar::new() },
        }
    }

    fn call(&self, request: &RephraseRequest) -> Result<String, String> {
        let resp = self.agent.post(&self.url).send_json(request).map_err(|e| e.to_string())?;
        let body: RephraseResponse = resp.into_json().map_err(|e| e.to_string())?;
        Ok(body.question)
    }
}

impl Rephraser for HttpRephraser {
    fn rephrase(&self, request: &RephraseRequest) -> Result<String, QaError> {
        self.gate.acquire();
        let mut last = String::new();
        let mut result = None;
        for _ in 0..=self.retries {
            match self.call(request) {
                Ok(q) => {
                    result = Some(q);
                    break;
                }
                Err(e) => last = e,
            }
        }
        self.gate.release();
        result.ok_or(QaError::RephraserUnavailable(format!("{}: {last}", self.url)))
    }
}

#[derive(Clone, Default)]
pub enum RephraseMode {
    #[default]
    Rule,
    External {
        client: Arc<dyn Rephraser>,
        fallback: bool,
    },
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Deterministic placeholder substitution. Pointed objects become "this"/"it"
/// (or "these"/"them" for a pair) in single-gesture clips and ordinal phrases
/// in multi-gesture clips; other objects keep their referring expression.
pub fn rule_rephrase(structured: &str, sheet: &FactSheet, referents: &[String]) -> Result<String, QaError> {
    if !PLACEHOLDERS.is_match(structured) {
        return Err(QaError::MissingPlaceholder);
    }
    let resolve = |n: &str| -> Result<(String, Option<usize>), QaError> {
        let idx: usize = n.parse().map_err(|_| QaError::MissingPlaceholder)?;
        let fact = sheet
            .facts
            .iter()
            .find(|f| f.scene_index == idx)
            .ok_or_else(|| QaError::UnknownObject(format!("<object{idx}>")))?;
        let ordinal = referents.iter().position(|r| *r == fact.object_id).map(|i| i + 1);
        Ok((fact.referring_expression.clone(), ordinal))
    };
    let multi = referents.len() > 1;
    let mut mentioned = false;
    let mut error = None;
    let out = PLACEHOLDERS.replace_all(structured, |caps: &Captures| {
        let first = match resolve(&caps[1]) {
            Ok(v) => v,
            Err(e) => {
                error = Some(e);
                return String::new();
            }
        };
        let second = match caps.get(2).map(|m| resolve(m.as_str())).transpose() {
            Ok(v) => v,
            Err(e) => {
                error = Some(e);
                return String::new();
            }
        };
        let mut single = |(name, ordinal): (String, Option<usize>)| match ordinal {
            Some(a) if multi => format!("the {} object I pointed at", ordinal_word(a)),
            Some(_) => {
                let word = if mentioned { "it" } else { "this" };
                mentioned = true;
                word.to_string()
            }
            None => name,
        };
        let text = match (first, second) {
            ((_, Some(a)), Some((_, Some(b)))) if multi => {
                format!("the {} and {} objects I pointed at", ordinal_word(a), ordinal_word(b))
            }
            ((_, Some(_)), Some((_, Some(_)))) => {
                let word = if mentioned { "them" } else { "these" };
                mentioned = true;
                word.to_string()
            }
            (a, Some(b)) => {
                let a = single(a);
                format!("{a} and {}", single(b))
            }
            (a, None) => single(a),
        };
        let at_start = caps.get(0).expect("whole match").start() == 0;
        if at_start {
            capitalize(&text)
        } else {
            text
        }
    });
    match error {
        Some(e) => Err(e),
        None => Ok(out.into_owned()),
    }
}

/// Rephrases a structured question; returns the question and the mode that produced it.
pub fn rephrase_deictic(
    qa: &StructuredQa,
    options: &[String],
    sheet: &FactSheet,
    referents: &[String],
    mode: &RephraseMode,
) -> Result<(String, &'static str), QaError> {
    let rule = || -> Result<(String, &'static str), QaError> {
        let q = rule_rephrase(&qa.structured_question, sheet, referents)?;
        let failures = question_failures(&q, &qa.target_ids, qa.spec.anchor_id(), sheet);
        if failures.is_empty() {
            Ok((q, "rule"))
        } else {
            Err(QaError::ValidationFailed(failures))
        }
    };
    match mode {
        RephraseMode::Rule => rule(),
        RephraseMode::External { client, fallback } => {
            let target_placeholders = qa
                .target_ids
                .iter()
                .filter_map(|id| sheet.fact(id))
                .map(|f| format!("<object{}>", f.scene_index))
                .collect();
            let request = RephraseRequest {
                structured_question: qa.structured_question.clone(),
                options: options.to_vec(),
                target_placeholders,
            };
            let outcome = client.rephrase(&request).and_then(|q| {
                let failures = question_failures(&q, &qa.target_ids, qa.spec.anchor_id(), sheet);
                if failures.is_empty() {
                    Ok((q, "external"))
                } else {
                    Err(QaError::ValidationFailed(failures))
                }
            });
            match outcome {
                Ok(v) => Ok(v),
                Err(_) if *fallback => rule(),
                Err(e) => Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::geometry::Vec3;
    use crate::qa::facts::SceneFact;
    use crate::qa::templates::QuestionSpec;

    fn fact(id: &str, idx: usize, cat: &str, color: &str) -> SceneFact {
        SceneFact {
            object_id: id.into(),
            scene_index: idx,
            category: cat.into(),
            referring_expression: format!("the {color} {cat}"),
            attributes: BTreeMap::new(),
            centroid: Vec3::ZERO,
            depth: 1.0,
            u: 0.0,
            neighbors: vec![],
        }
    }

    fn sheet() -> FactSheet {
        FactSheet {
            facts: vec![
                fact("mug#2", 2, "mug", "red"),
                fact("mug#3", 3, "mug", "blue"),
                fact("book#4", 4, "book", "red"),
            ],
            category_counts: BTreeMap::new(),
        }
    }

    #[test]
    fn single_referent_becomes_this() {
        assert_eq!(rule_rephrase("What is <object2>?", &sheet(), &["mug#2".into()]).unwrap(), "What is this?");
    }

    #[test]
    fn anchors_are_kept_verbatim() {
        let q = rule_rephrase("Is <object3> closer than <object4>?", &sheet(), &["mug#3".into()]).unwrap();
        assert_eq!(q, "Is this closer than the red book?");
    }

    #[test]
    fn ordinals_in_multi_gesture_clips() {
        let refs = vec!["mug#2".to_string(), "mug#3".to_string()];
        assert_eq!(
            rule_rephrase("What is <object3>?", &sheet(), &refs).unwrap(),
            "What is the second object I pointed at?"
        );
        assert_eq!(
            rule_rephrase("Are <object2> and <object3> the same color?", &sheet(), &refs).unwrap(),
            "Are the first and second objects I pointed at the same color?"
        );
    }

    #[test]
    fn plural_and_repeat_mentions() {
        let refs = vec!["mug#2".to_string()];
        let mut s = sheet();
        s.facts[1].object_id = "mug#2b".into();
        let q = rule_rephrase("<object2> and <object3> look alike; is <object2> clean?", &s, &refs).unwrap();
        assert_eq!(q, "This and the blue mug look alike; is it clean?");
        let both = ["mug#2".to_string(), "mug#3".to_string()];
        let q = rule_rephrase("Compare <object2> and <object3>.", &sheet(), &both[..1]).unwrap();
        assert_eq!(q, "Compare this and the blue mug.");
    }

    #[test]
    fn missing_placeholder_is_an_error() {
        assert_eq!(rule_rephrase("What is this?", &sheet(), &[]), Err(QaError::MissingPlaceholder));
    }

    struct Leaky;
    impl Rephraser for Leaky {
        fn rephrase(&self, _: &RephraseRequest) -> Result<String, QaError> {
            Ok("What is the red mug?".into())
        }
    }

    struct Down;
    impl Rephraser for Down {
        fn rephrase(&self, _: &RephraseRequest) -> Result<String, QaError> {
            Err(QaError::RephraserUnavailable("offline".into()))
        }
    }

    fn structured() -> StructuredQa {
        StructuredQa {
            category: crate::qa::TaskCategory::Reference,
            spec: QuestionSpec::Reference { ordinal: 1, phrasing: 0 },
            structured_question: "What is <object2>?".into(),
            answer: "the red mug".into(),
            target_ids: vec!["mug#2".into()],
        }
    }

    #[test]
    fn leaking_external_output_fails_validation() {
        let mode = RephraseMode::External { client: Arc::new(Leaky), fallback: false };
        let e = rephrase_deictic(&structured(), &[], &sheet(), &["mug#2".into()], &mode).unwrap_err();
        assert!(matches!(e, QaError::ValidationFailed(_)));
    }

    #[test]
    fn external_failure_falls_back_to_rules() {
        let mode = RephraseMode::External { client: Arc::new(Down), fallback: true };
        let (q, used) = rephrase_deictic(&structured(), &[], &sheet(), &["mug#2".into()], &mode).unwrap();
        assert_eq!((q.as_str(), used), ("What is this?", "rule"));
        let strict = RephraseMode::External { client: Arc::new(Down), fallback: false };
        assert!(matches!(
            rephrase_deictic(&structured(), &[], &sheet(), &["mug#2".into()], &strict),
            Err(QaError::RephraserUnavailable(_))
        ));
    }

    #[test]
    fn http_client_reports_unreachable_endpoint() {
        let client = HttpRephraser::new("http://127.0.0.1:9", Duration::from_millis(200), 1, 2);
        let req = RephraseRequest {
            structured_question: "What is <object2>?".into(),
            options: vec![],
            target_placeholders: vec![],
        };
        assert!(matches!(client.rephrase(&req), Err(QaError::RephraserUnavailable(_))));
    }
}
