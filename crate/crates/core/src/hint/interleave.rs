//! Frame / keypoint token interleaving.

use serde::{Deserialize, Serialize};

use super::adapter::HandIntentToken;
use super::linalg::Matrix;
use crate::error::KernelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualTokenBlock {
    pub frame_index: usize,
    /// `n_vis × d`
    pub tokens: Matrix,
}

/// One sequence position. Visual blocks contribute one element per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Element {
    Question { embedding: Vec<f64> },
    Vis { frame: usize, slot: usize, embedding: Vec<f64> },
    Key { frame: usize, embedding: Vec<f64> },
    Answer { embedding: Vec<f64> },
}

impl Element {
    pub fn embedding(&self) -> &[f64] {
        match self {
            Element::Question { embedding } | Element::Answer { embedding } => embedding,
            Element::Vis { embedding, .. } | Element::Key { embedding, .. } => embedding,
        }
    }

    pub fn is_key(&self) -> bool {
        matches!(self, Element::Key { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterleavedSequence {
    pub elements: Vec<Element>,
}

impl InterleavedSequence {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn key_count(&self) -> usize {
        self.elements.iter().filter(|e| e.is_key()).count()
    }

    /// Frames that carry a key token, in order.
    pub fn key_frames(&self) -> Vec<usize> {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::Key { frame, .. } => Some(*frame),
                _ => None,
            })
            .collect()
    }

    /// Position of the first answer token, or `len()` when there is none.
    pub fn answer_position(&self) -> usize {
        self.elements.iter().position(|e| matches!(e, Element::Answer { .. })).unwrap_or(self.len())
    }

    /// Same sequence with every key token removed.
    pub fn without_keys(&self) -> InterleavedSequence {
        InterleavedSequence { elements: self.elements.iter().filter(|e| !e.is_key()).cloned().collect() }
    }

    /// Layout invariants: increasing frames, keys right after their own block,
    /// question before video before answer.
    pub fn check_layout(&self) -> Result<(), String> {
        let mut phase = 0; // 0 question, 1 video, 2 answer
        let mut last_frame: Option<usize> = None;
        let mut prev: Option<&Element> = None;
        for (i, e) in self.elements.iter().enumerate() {
            match e {
                Element::Question { .. } if phase > 0 => return Err(format!("question token at {i} after video")),
                Element::Vis { frame, slot, .. } => {
                    if phase > 1 {
                        return Err(format!("visual token at {i} after answer"));
                    }
                    phase = 1;
                    let continuing = matches!(prev, Some(Element::Vis { frame: f, .. }) if f == frame);
                    if continuing {
                        if *slot == 0 {
                            return Err(format!("frame {frame} block restarts at {i}"));
                        }
                    } else {
                        if *slot != 0 || last_frame.is_some_and(|l| *frame <= l) {
                            return Err(format!("frame {frame} out of order at {i}"));
                        }
                        last_frame = Some(*frame);
                    }
                }
                Element::Key { frame, .. } => {
                    if !matches!(prev, Some(Element::Vis { frame: f, .. }) if f == frame) {
                        return Err(format!("key token for frame {frame} at {i} does not follow its block"));
                    }
                }
                Element::Answer { .. } => phase = 2,
                Element::Question { .. } => {}
            }
            prev = Some(e);
        }
        Ok(())
    }
}

/// Question tokens, then each frame's visual block followed by its key token
/// when present, then answer tokens.
pub fn interleave(
    question_tokens: &[Vec<f64>],
    visual_blocks: &[VisualTokenBlock],
    hand_tokens: &[HandIntentToken],
    answer_tokens: &[Vec<f64>],
) -> Result<InterleavedSequence, KernelError> {
    if visual_blocks.len() != hand_tokens.len() {
        return Err(KernelError::LengthMismatch { visual: visual_blocks.len(), hand: hand_tokens.len() });
    }
    let n_vis = visual_blocks.first().map(|b| b.tokens.rows);
    if visual_blocks.iter().any(|b| Some(b.tokens.rows) != n_vis || b.tokens.rows == 0) {
        return Err(KernelError::ShapeMismatch("visual blocks must share a non-zero n_vis".into()));
    }
    if visual_blocks.windows(2).any(|w| w[1].frame_index <= w[0].frame_index) {
        return Err(KernelError::ShapeMismatch("visual block frame indices must increase".into()));
    }
    let mut elements: Vec<Element> =
        question_tokens.iter().map(|e| Element::Question { embedding: e.clone() }).collect();
    for (block, hand) in visual_blocks.iter().zip(hand_tokens) {
        for slot in 0..block.tokens.rows {
            elements.push(Element::Vis { frame: block.frame_index, slot, embedding: block.tokens.row(slot).to_vec() });
        }
        if let Some(h) = hand.value() {
            elements.push(Element::Key { frame: block.frame_index, embedding: h.to_vec() });
        }
    }
    elements.extend(answer_tokens.iter().map(|e| Element::Answer { embedding: e.clone() }));
    Ok(InterleavedSequence { elements })
}

/// Fraction of sequence positions taken by key tokens.
pub fn token_overhead(seq: &InterleavedSequence) -> f64 {
    if seq.is_empty() {
        return 0.0;
    }
    seq.key_count() as f64 / seq.len() as f64
}
