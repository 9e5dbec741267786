//! Desk-scale Reference split for the toy scorer and the hand ablation.
//!
//! Visual tokens are per-object stubs: a hashed bag of the object's category
//! and attribute words plus its projected position in the frame. Options
//! are hashed bags of their content words.

use std::collections::BTreeMap;
use std::time::Instant;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::adapter::{GateConfig, KEYPOINT_DIM};
use super::linalg::Matrix;
use super::toy::{accuracy, toy_train, FrameInput, ToyExample, ToySequenceModel, TrainConfig};
use crate::batch::{forge_batch, qa_batch};
use crate::error::KernelError;
use crate::eval::{frame_sample, ScoreReport};
use crate::qa::{NegativeStrategy, QaConfig, QaItem, RephraseMode, TaskCategory};
use crate::resolve::ResolverConfig;
use crate::scene::{project_point, CameraPose, SceneObject};
use crate::seed;
use crate::synth::{ClipRecord, GenConfig};

/// Trailing embedding dimensions reserved for position features.
pub const POS_DIMS: usize = 8;

const STOP_WORDS: [&str; 12] = ["the", "a", "an", "that", "is", "on", "left", "right", "second", "from", "of", "and"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub d: usize,
    pub frames: usize,
    pub n_vis: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { d: 128, frames: 8, n_vis: 12 }
    }
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase)
}

/// Unit-scale random vector keyed by `word`, zero on the position dimensions.
pub fn word_vector(word: &str, d: usize) -> Vec<f64> {
    let d_app = d.saturating_sub(POS_DIMS).max(1);
    let mut rng = seed::rng(seed::hash_str(word), "word", 0);
    let n = Normal::new(0.0, 1.0 / (d_app as f64).sqrt()).expect("valid std");
    (0..d).map(|i| if i < d_app { n.sample(&mut rng) } else { 0.0 }).collect()
}

fn bag(ws: impl Iterator<Item = String>, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    let mut n = 0usize;
    for w in ws {
        for (a, b) in v.iter_mut().zip(word_vector(&w, d)) {
            *a += b;
        }
        n += 1;
    }
    if n > 0 {
        let k = 1.0 / (n as f64).sqrt();
        v.iter_mut().for_each(|x| *x *= k);
    }
    v
}

/// Content words of a referring expression or option.
pub fn text_embedding(text: &str, d: usize) -> Vec<f64> {
    bag(words(text).filter(|w| !STOP_WORDS.contains(&w.as_str())), d)
}

pub fn appearance_embedding(obj: &SceneObject, d: usize) -> Vec<f64> {
    let all = std::iter::once(obj.category.as_str()).chain(obj.attributes.values().map(String::as_str));
    bag(all.flat_map(words), d)
}

/// Appearance plus position features, or `None` when the centroid is off-image.
pub fn object_token(obj: &SceneObject, camera: &CameraPose, d: usize) -> Option<Vec<f64>> {
    let p = project_point(camera, obj.centroid()).ok()?;
    if !camera.in_image(p.u, p.v) {
        return None;
    }
    let mut v = appearance_embedding(obj, d);
    let k = &camera.intrinsics;
    let (x, y) = ((p.u - k.cx) / k.fx, (p.v - k.cy) / k.fy);
    let feats = [2.0 * x, 2.0 * y, 4.0 * x * x, 4.0 * y * y, 4.0 * x * y, p.depth, 1.0, 0.0];
    if d > POS_DIMS {
        for (slot, f) in v[d - POS_DIMS..].iter_mut().zip(feats) {
            *slot = f;
        }
    }
    Some(v)
}

/// Builds the toy-scorer input for one item of `clip`.
pub fn build_example(clip: &ClipRecord, item: &QaItem, cfg: &FeatureConfig) -> ToyExample {
    let d = cfg.d;
    let frames = frame_sample(clip.n_frames, cfg.frames)
        .into_iter()
        .map(|t| {
            let cam = &clip.camera_track[t];
            let mut visual = Matrix::zeros(cfg.n_vis, d);
            let tokens = clip.scene.objects.iter().filter_map(|o| object_token(o, cam, d)).take(cfg.n_vis);
            for (r, tok) in tokens.enumerate() {
                visual.data[r * d..(r + 1) * d].copy_from_slice(&tok);
            }
            let (keypoints, confidence) = match clip.hand_track.pose_at(t) {
                Some(p) => (p.flatten().to_vec(), p.confidence),
                None => (vec![0.0; KEYPOINT_DIM], 0.0),
            };
            FrameInput { frame_index: t, visual, keypoints, confidence }
        })
        .collect();
    ToyExample {
        qa_id: item.qa_id.clone(),
        question: words(&item.question).map(|w| word_vector(&w, d)).collect(),
        frames,
        answer_tokens: vec![word_vector("answer", d)],
        options: item.options.iter().map(|o| text_embedding(o, d)).collect(),
        answer_index: item.answer_index,
    }
}

/// Single-gesture Reference items whose distractors are all visible scene
/// objects, one per clip, with the clips they came from.
pub fn reference_split(seed: u64, n_clips: usize) -> Result<Vec<(ClipRecord, QaItem)>, KernelError> {
    let gen = GenConfig { gesture_count_weights: [1.0, 0.0, 0.0], min_objects: 6, ..GenConfig::default() };
    let (clips, _) = forge_batch(seed, n_clips, &gen).map_err(|e| KernelError::ShapeMismatch(e.to_string()))?;
    let qa = QaConfig {
        items_min: 1,
        items_max: 1,
        weights: QaConfig::default().weights.restrict(&[TaskCategory::Reference]),
        ..QaConfig::default()
    };
    let (items, _) = qa_batch(&clips, &ResolverConfig::default(), &qa, seed, &RephraseMode::Rule)
        .map_err(|e| KernelError::ShapeMismatch(e.to_string()))?;
    Ok(ablation_pairs(&clips, items))
}

/// Reference items whose distractors are all visible scene objects, paired
/// with their clips. Items without a matching clip are skipped.
pub fn ablation_pairs(clips: &[ClipRecord], items: Vec<QaItem>) -> Vec<(ClipRecord, QaItem)> {
    let by_clip: BTreeMap<&str, &ClipRecord> = clips.iter().map(|c| (c.clip_id.as_str(), c)).collect();
    items
        .into_iter()
        .filter(|i| i.category == TaskCategory::Reference)
        .filter(|i| i.provenance.strategies.iter().flatten().all(|s| *s == NegativeStrategy::VisibleSource))
        .filter(|i| i.provenance.strategies.iter().all(Option::is_some) || i.options.len() == 5)
        .filter_map(|i| by_clip.get(i.clip_id.as_str()).map(|c| ((*c).clone(), i)))
        .collect()
}

/// KeyToken totals over `data` for each gate threshold.
pub fn tau_sweep(data: &[ToyExample], taus: &[f64]) -> Vec<(f64, usize)> {
    taus.iter()
        .map(|&tau| {
            let gate = GateConfig { tau };
            (tau, data.iter().flat_map(|e| &e.frames).filter(|f| gate.open(f.confidence)).count())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    pub seed: u64,
    pub clips: usize,
    pub test_fraction: f64,
    pub d_h: usize,
    pub features: FeatureConfig,
    pub tau: f64,
    pub train: TrainConfig,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            seed: 7,
            clips: 3200,
            test_fraction: 0.25,
            d_h: 32,
            features: FeatureConfig { d: 64, frames: 6, n_vis: 10 },
            tau: 0.5,
            train: TrainConfig { steps: 250, lr: 0.01, ..TrainConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub train_items: usize,
    pub test_items: usize,
    pub hint: ScoreReport,
    pub stripped: ScoreReport,
    pub random: ScoreReport,
    /// HINT minus stripped, Reference accuracy points.
    pub gap: f64,
    pub hint_train_accuracy: f64,
    pub stripped_train_accuracy: f64,
    pub hint_loss: Vec<f64>,
    pub stripped_loss: Vec<f64>,
    pub seconds: f64,
}

fn reference_report(acc: f64, n: usize) -> ScoreReport {
    let mut credit = BTreeMap::new();
    credit.insert(TaskCategory::Reference, (acc / 100.0 * n as f64, n));
    ScoreReport::from_credit(&credit, 0)
}

pub struct Trained {
    pub hint: ToySequenceModel,
    pub stripped: ToySequenceModel,
    pub report: AblationReport,
}

/// Held-out examples first, training examples second.
pub fn split_examples(
    pairs: &[(ClipRecord, QaItem)],
    config: &AblationConfig,
) -> Result<(Vec<ToyExample>, Vec<ToyExample>), KernelError> {
    let mut data: Vec<ToyExample> = pairs.iter().map(|(c, i)| build_example(c, i, &config.features)).collect();
    let n_test = ((data.len() as f64) * config.test_fraction).round() as usize;
    if data.len() <= n_test || n_test == 0 {
        return Err(KernelError::EmptyDataset);
    }
    let train = data.split_off(n_test);
    Ok((data, train))
}

fn chance(test: &[ToyExample]) -> f64 {
    100.0 * test.iter().map(|e| 1.0 / e.options.len() as f64).sum::<f64>() / test.len() as f64
}

pub struct TrainedScorer {
    pub model: ToySequenceModel,
    pub test: ScoreReport,
    pub train_accuracy: f64,
    pub loss: Vec<f64>,
}

/// Fits the scorer with key tokens on the training part of `pairs`.
pub fn train_scorer(pairs: &[(ClipRecord, QaItem)], config: &AblationConfig) -> Result<TrainedScorer, KernelError> {
    let (test, train) = split_examples(pairs, config)?;
    let init = ToySequenceModel::init(config.d_h, config.features.d, GateConfig::new(config.tau)?, config.seed);
    let (model, loss) = toy_train(&init, &train, &TrainConfig { use_hands: true, ..config.train.clone() })?;
    Ok(TrainedScorer {
        test: reference_report(accuracy(&model, &test, true)?, test.len()),
        train_accuracy: accuracy(&model, &train, true)?,
        model,
        loss,
    })
}

/// Forges the desk Reference split and runs [`run_ablation_on`] over it.
pub fn run_ablation(config: &AblationConfig) -> Result<Trained, KernelError> {
    let start = Instant::now();
    let pairs = reference_split(config.seed, config.clips)?;
    let mut trained = run_ablation_on(&pairs, config)?;
    trained.report.seconds = start.elapsed().as_secs_f64();
    Ok(trained)
}

/// Trains the scorer with and without key tokens from the same init on the
/// same split and evaluates both on held-out items.
pub fn run_ablation_on(pairs: &[(ClipRecord, QaItem)], config: &AblationConfig) -> Result<Trained, KernelError> {
    let start = Instant::now();
    let (test, train) = split_examples(pairs, config)?;
    let (test, train) = (&test[..], &train[..]);
    let init = ToySequenceModel::init(config.d_h, config.features.d, GateConfig::new(config.tau)?, config.seed);
    let (hint, hint_loss) = toy_train(&init, train, &TrainConfig { use_hands: true, ..config.train.clone() })?;
    let (stripped, stripped_loss) = toy_train(&init, train, &TrainConfig { use_hands: false, ..config.train.clone() })?;
    let hint_acc = accuracy(&hint, test, true)?;
    let stripped_acc = accuracy(&stripped, test, false)?;
    let report = AblationReport {
        train_items: train.len(),
        test_items: test.len(),
        hint: reference_report(hint_acc, test.len()),
        stripped: reference_report(stripped_acc, test.len()),
        random: reference_report(chance(test), test.len()),
        gap: hint_acc - stripped_acc,
        hint_train_accuracy: accuracy(&hint, train, true)?,
        stripped_train_accuracy: accuracy(&stripped, train, false)?,
        hint_loss,
        stripped_loss,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok(Trained { hint, stripped, report })
}
