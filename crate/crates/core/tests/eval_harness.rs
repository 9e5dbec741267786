use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use deixis_core::batch::{forge_batch, qa_batch};
use deixis_core::eval::{
    bias_probe, extract_choice, frame_sample, random_baseline, run_answerer, score, AnswerInput, Answerer, BlindProbe,
    Capabilities, ChoicesOnlyProbe, Prediction, RandomProbe,
};
use deixis_core::qa::{Provenance, QaConfig, QaItem, QuestionSpec, RephraseMode, TaskCategory};
use deixis_core::resolve::ResolverConfig;
use deixis_core::{ClipRecord, EvalError, GenConfig};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Golden {
    rule: String,
    raw: String,
    num_options: usize,
    expected: Option<usize>,
}

fn goldens() -> Vec<Golden> {
    include_str!("data/extract_goldens.jsonl").lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn extraction_goldens() {
    let cases = goldens();
    assert_eq!(cases.len(), 30);
    let rules: std::collections::BTreeSet<&str> = cases.iter().map(|c| c.rule.as_str()).collect();
    for r in ["plain", "parenthesized", "punctuated", "markup", "terminal", "out-of-range", "no-match"] {
        assert!(rules.contains(r), "no golden for {r}");
    }
    let failures: Vec<String> = cases
        .iter()
        .filter(|c| extract_choice(&c.raw, c.num_options) != c.expected)
        .map(|c| {
            format!("{:?} ({}): got {:?}, want {:?}", c.raw, c.rule, extract_choice(&c.raw, c.num_options), c.expected)
        })
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

fn item(id: &str, category: TaskCategory, n_options: usize, answer: usize) -> QaItem {
    let spec = match category {
        TaskCategory::Feedback => QuestionSpec::Feedback { ordinal: 1, goal: "thirsty".into() },
        _ => QuestionSpec::Reference { ordinal: 1, phrasing: 0 },
    };
    QaItem {
        qa_id: id.into(),
        clip_id: "clip-00000".into(),
        category,
        question: "What is this?".into(),
        options: (0..n_options).map(|i| format!("option {i}")).collect(),
        answer_index: answer,
        target_ids: vec!["mug#1".into()],
        structured_question: "What is <object1>?".into(),
        provenance: Provenance { spec, seed: 0, rephraser: "rule".into(), strategies: vec![None; n_options] },
    }
}

fn pred(id: &str, raw: &str) -> Prediction {
    Prediction { qa_id: id.into(), raw_output: raw.into() }
}

#[test]
fn hand_scored_fixture() {
    // one item per category; correct for Reference, Counting, Spatial
    let cats = TaskCategory::ALL;
    let data: Vec<QaItem> = cats.iter().enumerate().map(|(i, c)| item(&format!("q{i}"), *c, 5, 2)).collect();
    let raws = ["C", "(A)", "Answer: C", "D.", "<answer>C</answer>", "no idea"];
    let preds: Vec<Prediction> = raws.iter().enumerate().map(|(i, r)| pred(&format!("q{i}"), r)).collect();
    let r = score(&data, &preds).unwrap();
    let want = [100.0, 0.0, 100.0, 0.0, 100.0, 0.0];
    for (c, w) in cats.iter().zip(want) {
        assert_eq!(r.accuracy(*c), Some(w), "{c}");
    }
    assert_eq!(r.average, 50.0);
    assert_eq!(r.invalid_count, 1);
}

#[test]
fn score_extremes_and_unknown_ids() {
    let data: Vec<QaItem> = (0..4).map(|i| item(&format!("q{i}"), TaskCategory::Reference, 5, i)).collect();
    let right: Vec<Prediction> =
        (0..4).map(|i| pred(&format!("q{i}"), &format!("({})", (b'A' + i as u8) as char))).collect();
    let r = score(&data, &right).unwrap();
    assert_eq!((r.accuracy(TaskCategory::Reference), r.average), (Some(100.0), 100.0));
    let r = score(&data, &[]).unwrap();
    assert_eq!((r.average, r.invalid_count), (0.0, 4));
    assert!(matches!(score(&data, &[pred("nope", "A")]), Err(EvalError::UnknownQaId(_))));
}

#[test]
fn average_is_the_unweighted_category_mean() {
    let mut data: Vec<QaItem> = (0..3).map(|i| item(&format!("r{i}"), TaskCategory::Reference, 5, 0)).collect();
    data.push(item("f0", TaskCategory::Feedback, 2, 0));
    let preds = vec![pred("r0", "A"), pred("f0", "B")];
    let r = score(&data, &preds).unwrap();
    assert!((r.average - (100.0 / 3.0 + 0.0) / 2.0).abs() < 1e-12);
}

#[test]
fn random_baseline_is_analytic() {
    let mut data = vec![
        item("a", TaskCategory::Counting, 5, 0),
        item("b", TaskCategory::Counting, 5, 0),
        item("c", TaskCategory::Counting, 2, 0),
    ];
    assert!((random_baseline(&data).accuracy(TaskCategory::Counting).unwrap() - 30.0).abs() < 1e-9);
    data.push(item("d", TaskCategory::Feedback, 2, 0));
    data.push(item("e", TaskCategory::Reference, 5, 0));
    let r = random_baseline(&data);
    assert_eq!(r.accuracy(TaskCategory::Feedback), Some(50.0));
    assert_eq!(r.accuracy(TaskCategory::Reference), Some(20.0));
    assert_eq!(random_baseline(&data), r);
}

#[test]
fn random_probe_obeys_the_law_of_large_numbers() {
    let data: Vec<QaItem> = (0..10_000).map(|i| item(&format!("q{i}"), TaskCategory::Reference, 5, i % 5)).collect();
    let r = bias_probe(&data, None, &RandomProbe, 3).unwrap();
    let acc = r.accuracy(TaskCategory::Reference).unwrap();
    assert!((acc - 20.0).abs() <= 1.5, "{acc}");
    assert_eq!(bias_probe(&data, None, &RandomProbe, 3).unwrap(), r);
}

struct Peeker;

impl Answerer for Peeker {
    fn name(&self) -> &str {
        "peeker"
    }
    fn capabilities(&self) -> Capabilities {
        ChoicesOnlyProbe.capabilities()
    }
    fn answer(&self, input: &AnswerInput<'_>) -> Result<String, EvalError> {
        Ok(input.question()?.chars().take(1).collect())
    }
}

struct VideoPeeker;

impl Answerer for VideoPeeker {
    fn name(&self) -> &str {
        "video-peeker"
    }
    fn capabilities(&self) -> Capabilities {
        BlindProbe.capabilities()
    }
    fn answer(&self, input: &AnswerInput<'_>) -> Result<String, EvalError> {
        input.clip().map(|c| c.clip_id.clone())
    }
}

#[test]
fn masked_inputs_raise_flag_violations() {
    let data = vec![item("q0", TaskCategory::Reference, 5, 0)];
    assert!(!ChoicesOnlyProbe.capabilities().sees_question);
    assert!(!BlindProbe.capabilities().sees_video);
    assert!(matches!(run_answerer(&data, None, &Peeker, 0), Err(EvalError::FlagViolation(_))));
    let clips: HashMap<String, ClipRecord> = HashMap::new();
    assert!(matches!(run_answerer(&data, Some(&clips), &VideoPeeker, 0), Err(EvalError::FlagViolation(_))));
    assert!(matches!(bias_probe(&[], None, &BlindProbe, 0), Err(EvalError::EmptyDataset)));
}

#[test]
fn frame_sampling() {
    assert_eq!(frame_sample(32, 32), (0..32).collect::<Vec<_>>());
    let s = frame_sample(94, 32);
    assert_eq!((s.len(), s[0], *s.last().unwrap()), (32, 0, 93));
    assert!(s.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(frame_sample(10, 32), (0..10).collect::<Vec<_>>());
}

fn generated() -> &'static (Vec<QaItem>, HashMap<String, ClipRecord>) {
    static G: OnceLock<(Vec<QaItem>, HashMap<String, ClipRecord>)> = OnceLock::new();
    G.get_or_init(|| {
        let (clips, _) = forge_batch(12, 150, &GenConfig::default()).unwrap();
        let (items, _) =
            qa_batch(&clips, &ResolverConfig::default(), &QaConfig::default(), 12, &RephraseMode::Rule).unwrap();
        (items, clips.into_iter().map(|c| (c.clip_id.clone(), c)).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn extraction_stays_in_range(raw in ".{0,40}", n in 2usize..=26) {
        if let Some(i) = extract_choice(&raw, n) {
            prop_assert!(i < n);
        }
    }

    #[test]
    fn extraction_of_letter_forms_stays_in_range(
        pre in "[a-z ]{0,10}",
        l in proptest::char::range('A', 'Z'),
        form in 0usize..5,
        n in 2usize..=26,
    ) {
        let raw = match form {
            0 => format!("{l}"),
            1 => format!("{pre}({l})"),
            2 => format!("{pre} {l}."),
            3 => format!("<answer>{l}</answer>"),
            _ => format!("{pre} Answer: {l}"),
        };
        let got = extract_choice(&raw, n);
        let idx = (l as u8 - b'A') as usize;
        prop_assert_eq!(got, (idx < n).then_some(idx));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn score_ignores_prediction_order(seed in 0u64..1000) {
        let (items, clips) = generated();
        let mut preds = run_answerer(items, Some(clips), &RandomProbe, seed).unwrap();
        let a = score(items, &preds).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(&mut preds[..], &mut rng);
        prop_assert_eq!(score(items, &preds).unwrap(), a);
    }
}

#[test]
fn category_counts_cover_the_generated_set() {
    let (items, _) = generated();
    let counts = deixis_core::eval::category_counts(items);
    assert_eq!(counts.values().sum::<usize>(), items.len());
    let by_hand: BTreeMap<TaskCategory, usize> = items.iter().fold(BTreeMap::new(), |mut m, i| {
        *m.entry(i.category).or_default() += 1;
        m
    });
    assert_eq!(counts, by_hand);
}
