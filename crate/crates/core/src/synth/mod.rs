//! Procedural clip synthesis: scenes, egocentric camera tracks and pointing
//! hand tracks whose fingertip rays verifiably hit their targets.

mod clip;
mod filter;
mod generate;
pub mod hand;

pub use clip::{ClipRecord, GestureSpec};
pub use filter::{quality_filter, QualityConfig, QualityVerdict};
pub use generate::{
    eligible_targets, forge_clip, sample_scene, sample_viewpoint, select_target, synthesize_gesture, ForgeOutcome,
    TABLE_TOP_Y,
};
pub use hand::{HandPose, HandState, HandTrack};

use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::scene::Intrinsics;

/// Surrogate for an external hand reconstructor's detection confidence:
/// `c = clamp(base − λ·angular_velocity − μ·edge_proximity + N(0, σ²), 0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceModel {
    pub base: f64,
    /// Penalty per rad/s of pointing-direction change.
    pub lambda: f64,
    /// Penalty at full edge proximity.
    pub mu: f64,
    pub noise_sigma: f64,
    /// Pixel band along the image border over which proximity ramps 0 → 1.
    pub edge_margin_px: f64,
}

impl Default for ConfidenceModel {
    fn default() -> Self {
        ConfidenceModel { base: 0.95, lambda: 0.05, mu: 0.5, noise_sigma: 0.05, edge_margin_px: 40.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    pub fps: f64,
    pub clip_len_min_s: f64,
    pub clip_len_max_s: f64,
    /// Relative weights for clips with 1, 2 and 3 gestures.
    pub gesture_count_weights: [f64; 3],
    /// Minimum hold for single-gesture clips.
    pub hold_min_s: f64,
    /// Minimum hold inside multi-gesture clips.
    pub multi_hold_min_s: f64,
    pub gap_s: f64,
    pub approach_s: f64,
    /// Upper bound on fingertip-ray tremor.
    pub jitter_deg: f64,
    pub confidence: ConfidenceModel,
    pub target_max_depth: f64,
    pub target_min_visible: f64,
    /// Minimum angle between the pointing ray and any non-target centroid.
    pub ambiguity_margin_deg: f64,
    pub camera_drift: bool,
    pub intrinsics: Intrinsics,
    pub viewpoint_attempts: usize,
    pub placement_attempts: usize,
    pub clip_attempts: usize,
    pub quality: QualityConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            min_objects: 4,
            max_objects: 10,
            fps: 30.0,
            clip_len_min_s: 3.0,
            clip_len_max_s: 5.0,
            gesture_count_weights: [0.5, 0.3, 0.2],
            hold_min_s: 2.0,
            multi_hold_min_s: 1.2,
            gap_s: 0.5,
            approach_s: 0.3,
            jitter_deg: 0.5,
            confidence: ConfidenceModel::default(),
            target_max_depth: 2.0,
            target_min_visible: 0.1,
            ambiguity_margin_deg: 3.0,
            camera_drift: true,
            intrinsics: Intrinsics::default(),
            viewpoint_attempts: 64,
            placement_attempts: 64,
            clip_attempts: 64,
            quality: QualityConfig::default(),
        }
    }
}

impl GenConfig {
    /// Jitter-free, noise-free variant used to check exact referent recovery.
    pub fn noiseless(mut self) -> Self {
        self.jitter_deg = 0.0;
        self.confidence.noise_sigma = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::ConfigInvalid(m.to_string()));
        if self.min_objects < 3 {
            return bad("min_objects must be at least 3");
        }
        if self.max_objects < self.min_objects {
            return bad("max_objects must be >= min_objects");
        }
        if !(self.fps > 0.0) {
            return bad("fps must be positive");
        }
        if !(self.clip_len_min_s > 0.0 && self.clip_len_max_s >= self.clip_len_min_s) {
            return bad("clip length range invalid");
        }
        if self.gesture_count_weights.iter().any(|w| *w < 0.0) || self.gesture_count_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("gesture count weights must be non-negative with a positive sum");
        }
        if !(self.hold_min_s > 0.0 && self.multi_hold_min_s > 0.0 && self.gap_s >= 0.0 && self.approach_s >= 0.0) {
            return bad("gesture timing must be positive");
        }
        if !(0.0..=5.0).contains(&self.jitter_deg) {
            return bad("jitter_deg must be in [0, 5]");
        }
        if self.confidence.noise_sigma < 0.0 {
            return bad("confidence noise sigma must be non-negative");
        }
        Ok(())
    }

    pub fn frames(&self, seconds: f64) -> usize {
        (seconds * self.fps).round() as usize
    }
}
