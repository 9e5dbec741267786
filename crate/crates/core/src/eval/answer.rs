use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::extract::letter;
use super::score::{score, Prediction, ScoreReport};
use crate::error::EvalError;
use crate::qa::{answer_for, extract_scene_facts, QaItem, QuestionSpec, TaskCategory};
use crate::resolve::{referent_ids, resolve_referents, ResolverConfig};
use crate::seed;
use crate::synth::ClipRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub sees_video: bool,
    pub sees_question: bool,
    pub sees_options: bool,
}

/// One item as shown to an answerer; masked fields raise `FlagViolation`.
pub struct AnswerInput<'a> {
    item: &'a QaItem,
    clip: Option<&'a ClipRecord>,
    caps: Capabilities,
    /// Per-item seed for stochastic answerers.
    pub seed: u64,
}

impl<'a> AnswerInput<'a> {
    pub fn qa_id(&self) -> &str {
        &self.item.qa_id
    }

    /// The number of options is always visible.
    pub fn num_options(&self) -> usize {
        self.item.options.len()
    }

    pub fn question(&self) -> Result<&'a str, EvalError> {
        if self.caps.sees_question {
            Ok(&self.item.question)
        } else {
            Err(EvalError::FlagViolation(format!("{}: question is masked", self.item.qa_id)))
        }
    }

    pub fn options(&self) -> Result<&'a [String], EvalError> {
        if self.caps.sees_options {
            Ok(&self.item.options)
        } else {
            Err(EvalError::FlagViolation(format!("{}: options are masked", self.item.qa_id)))
        }
    }

    pub fn clip(&self) -> Result<&'a ClipRecord, EvalError> {
        match (self.caps.sees_video, self.clip) {
            (true, Some(c)) => Ok(c),
            (true, None) => Err(EvalError::Answerer(format!("{}: clip not provided", self.item.qa_id))),
            (false, _) => Err(EvalError::FlagViolation(format!("{}: video is masked", self.item.qa_id))),
        }
    }

    /// Question template parameters; part of the question, so masked with it.
    pub fn template(&self) -> Result<&'a QuestionSpec, EvalError> {
        self.question()?;
        Ok(&self.item.provenance.spec)
    }
}

pub trait Answerer: Sync {
    fn name(&self) -> &str;
    fn capabilities(&self) -> Capabilities;
    /// Raw model-style output, later parsed by `extract_choice`.
    fn answer(&self, input: &AnswerInput<'_>) -> Result<String, EvalError>;
}

/// Runs `answerer` over the dataset with inputs masked by its own flags.
pub fn run_answerer(
    dataset: &[QaItem],
    clips: Option<&HashMap<String, ClipRecord>>,
    answerer: &dyn Answerer,
    seed: u64,
) -> Result<Vec<Prediction>, EvalError> {
    let caps = answerer.capabilities();
    dataset
        .par_iter()
        .map(|item| {
            let clip = clips.and_then(|m| m.get(&item.clip_id));
            let input = AnswerInput { item, clip, caps, seed: seed::derive(seed, &item.qa_id, 0) };
            Ok(Prediction { qa_id: item.qa_id.clone(), raw_output: answerer.answer(&input)? })
        })
        .collect()
}

/// Scores an answerer; the probe form of `score`.
pub fn bias_probe(
    dataset: &[QaItem],
    clips: Option<&HashMap<String, ClipRecord>>,
    answerer: &dyn Answerer,
    seed: u64,
) -> Result<ScoreReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    score(dataset, &run_answerer(dataset, clips, answerer, seed)?)
}

/// Question and options, no video; always picks the first option.
pub struct BlindProbe;

impl Answerer for BlindProbe {
    fn name(&self) -> &str {
        "blind"
    }
    fn capabilities(&self) -> Capabilities {
        Capabilities { sees_video: false, sees_question: true, sees_options: true }
    }
    fn answer(&self, input: &AnswerInput<'_>) -> Result<String, EvalError> {
        input.question()?;
        input.options()?;
        Ok("A".into())
    }
}

/// Options only; picks the longest option (first on ties).
pub struct ChoicesOnlyProbe;

impl Answerer for ChoicesOnlyProbe {
    fn name(&self) -> &str {
        "choices-only"
    }
    fn capabilities(&self) -> Capabilities {
        Capabilities { sees_video: false, sees_question: false, sees_options: true }
    }
    fn answer(&self, input: &AnswerInput<'_>) -> Result<String, EvalError> {
        let options = input.options()?;
        let mut best = 0;
        for (i, o) in options.iter().enumerate() {
            if o.chars().count() > options[best].chars().count() {
                best = i;
            }
        }
        Ok(format!("({})", letter(best)))
    }
}

/// Uniform seeded pick; sees nothing but the option count.
pub struct RandomProbe;

impl Answerer for RandomProbe {
    fn name(&self) -> &str {
        "random"
    }
    fn capabilities(&self) -> Capabilities {
        Capabilities { sees_video: false, sees_question: false, sees_options: false }
    }
    fn answer(&self, input: &AnswerInput<'_>) -> Result<String, EvalError> {
        let mut rng = seed::rng(input.seed, "random-probe", 0);
        Ok(format!("{}.", letter(rng.gen_range(0..input.num_options()))))
    }
}

/// Full-access answerer: resolves the pointed objects from the hand track,
/// rebuilds scene facts and recomputes the answer from the question template.
#[derive(Default)]
pub struct GeometricOracle {
    pub resolver: ResolverConfig,
}

impl Answerer for GeometricOracle {
    fn name(&self) -> &str {
        "geometric-oracle"
    }
    fn capabilities(&self) -> Capabilities {
        Capabilities { sees_video: true, sees_question: true, sees_options: true }
    }
    fn answer(&self, input: &AnswerInput<'_>) -> Result<String, EvalError> {
        let clip = input.clip()?;
        let spec = input.template()?;
        let options = input.options()?;
        let referents = referent_ids(&resolve_referents(clip, &self.resolver));
        let sheet = extract_scene_facts(&clip.scene, clip.reference_camera(), &referents);
        let answer = answer_for(spec, &sheet, &referents).map_err(|e| EvalError::Answerer(e.to_string()))?;
        match options.iter().position(|o| *o == answer) {
            Some(i) => Ok(format!("The answer is ({}).", letter(i))),
            None => Ok(format!("none of the options match {answer:?}")),
        }
    }
}

pub fn category_counts(dataset: &[QaItem]) -> BTreeMap<TaskCategory, usize> {
    let mut m = BTreeMap::new();
    for i in dataset {
        *m.entry(i.category).or_insert(0) += 1;
    }
    m
}
