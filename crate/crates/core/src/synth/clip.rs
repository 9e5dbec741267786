use serde::{Deserialize, Serialize};

use super::hand::{HandPose, HandTrack};
use crate::scene::{CameraPose, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureSpec {
    pub target_id: String,
    /// First and last frame (inclusive) of the hold phase.
    pub hold_start: usize,
    pub hold_end: usize,
    #[serde(default)]
    pub approach_frames: usize,
}

impl GestureSpec {
    pub fn hold_frames(&self) -> usize {
        self.hold_end + 1 - self.hold_start
    }

    pub fn first_frame(&self) -> usize {
        self.hold_start.saturating_sub(self.approach_frames)
    }

    pub fn validate(&self, dwell_min_frames: usize) -> Result<(), String> {
        if self.hold_start >= self.hold_end {
            return Err(format!("hold_start {} must precede hold_end {}", self.hold_start, self.hold_end));
        }
        if self.hold_frames() < dwell_min_frames {
            return Err(format!("hold of {} frames is shorter than {dwell_min_frames}", self.hold_frames()));
        }
        Ok(())
    }
}

/// One synthetic clip. Serialized as a single JSONL record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ClipRepr", try_from = "ClipRepr")]
pub struct ClipRecord {
    pub clip_id: String,
    pub rng_seed: u64,
    pub fps: f64,
    pub n_frames: usize,
    pub scene: Scene,
    pub camera_track: Vec<CameraPose>,
    pub hand_track: HandTrack,
    pub gestures: Vec<GestureSpec>,
}

#[derive(Serialize, Deserialize)]
struct ClipRepr {
    clip_id: String,
    rng_seed: u64,
    fps: f64,
    n_frames: usize,
    scene: Scene,
    camera_track: Vec<CameraPose>,
    hand_track: Vec<HandPose>,
    gestures: Vec<GestureSpec>,
}

impl From<ClipRecord> for ClipRepr {
    fn from(c: ClipRecord) -> Self {
        ClipRepr {
            clip_id: c.clip_id,
            rng_seed: c.rng_seed,
            fps: c.fps,
            n_frames: c.n_frames,
            scene: c.scene,
            camera_track: c.camera_track,
            hand_track: c.hand_track.poses,
            gestures: c.gestures,
        }
    }
}

impl TryFrom<ClipRepr> for ClipRecord {
    type Error = String;
    fn try_from(r: ClipRepr) -> Result<Self, String> {
        let clip = ClipRecord {
            clip_id: r.clip_id,
            rng_seed: r.rng_seed,
            fps: r.fps,
            n_frames: r.n_frames,
            scene: r.scene,
            camera_track: r.camera_track,
            hand_track: HandTrack { poses: r.hand_track, fps: r.fps },
            gestures: r.gestures,
        };
        clip.validate()?;
        Ok(clip)
    }
}

impl ClipRecord {
    /// Structural invariants: track lengths, gesture ordering, target ids.
    pub fn validate(&self) -> Result<(), String> {
        if self.camera_track.len() != self.n_frames {
            return Err(format!("camera track has {} poses for {} frames", self.camera_track.len(), self.n_frames));
        }
        self.hand_track.validate()?;
        if let Some(last) = self.hand_track.poses.last() {
            if last.frame_index >= self.n_frames {
                return Err(format!("hand pose at frame {} beyond clip", last.frame_index));
            }
        }
        for g in &self.gestures {
            if self.scene.object(&g.target_id).is_none() {
                return Err(format!("gesture target {} not in scene", g.target_id));
            }
            if g.hold_start >= g.hold_end || g.hold_end >= self.n_frames {
                return Err(format!("gesture window {}..={} invalid", g.hold_start, g.hold_end));
            }
        }
        for w in self.gestures.windows(2) {
            if w[1].hold_start <= w[0].hold_end {
                return Err("gestures overlap or are out of order".into());
            }
        }
        Ok(())
    }

    /// Ground-truth referent order.
    pub fn target_sequence(&self) -> Vec<&str> {
        self.gestures.iter().map(|g| g.target_id.as_str()).collect()
    }

    /// Frame whose camera anchors scene facts and spatial relations.
    pub fn reference_frame(&self) -> usize {
        self.n_frames / 2
    }

    pub fn reference_camera(&self) -> &CameraPose {
        &self.camera_track[self.reference_frame().min(self.n_frames.saturating_sub(1))]
    }
}
