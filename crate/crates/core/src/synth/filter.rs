use serde::{Deserialize, Serialize};

use super::ClipRecord;
use crate::scene::any_visible;

pub const REASON_TARGET: &str = "target-visibility";
pub const REASON_HAND: &str = "hand-visibility";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualityConfig {
    /// A target must be visible in at least this fraction of frames.
    pub target_visible_min: f64,
    /// Confidence at which a hand counts as reliably visible.
    pub hand_conf_threshold: f64,
    /// Reliably-visible hand frames must exceed this fraction.
    pub hand_visible_min: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig { target_visible_min: 0.5, hand_conf_threshold: 0.5, hand_visible_min: 0.6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityVerdict {
    pub accept: bool,
    pub reasons: Vec<String>,
    /// Per-gesture fraction of frames with the target visible.
    pub target_visible: Vec<f64>,
    pub hand_visible: f64,
}

/// Target-visibility (≥) and hand-visibility (>) filters over the whole clip.
pub fn quality_filter(clip: &ClipRecord, config: &QualityConfig) -> QualityVerdict {
    let n = clip.n_frames.max(1) as f64;
    let mut reasons = Vec::new();

    let mut target_visible = Vec::with_capacity(clip.gestures.len());
    for g in &clip.gestures {
        let frac = match clip.scene.object(&g.target_id) {
            Some(target) => {
                let occluders = clip.scene.others(&g.target_id);
                let seen = clip.camera_track.iter().filter(|cam| any_visible(target, cam, &occluders)).count();
                seen as f64 / n
            }
            None => 0.0,
        };
        target_visible.push(frac);
    }
    if target_visible.iter().any(|f| *f < config.target_visible_min) {
        reasons.push(REASON_TARGET.to_string());
    }

    let confident = clip.hand_track.poses.iter().filter(|p| p.confidence >= config.hand_conf_threshold).count();
    let hand_visible = confident as f64 / n;
    if hand_visible <= config.hand_visible_min {
        reasons.push(REASON_HAND.to_string());
    }

    QualityVerdict { accept: reasons.is_empty(), reasons, target_visible, hand_visible }
}
