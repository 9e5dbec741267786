//! 21-landmark hand poses and a procedural pointing-hand rig.
//!
//! Landmark layout: 0 wrist; thumb 1–4; index 5–8 (8 = fingertip);
//! middle 9–12; ring 13–16; pinky 17–20.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::scene::CameraPose;

pub const NUM_KEYPOINTS: usize = 21;
pub const WRIST: usize = 0;
pub const INDEX_MCP: usize = 5;
pub const INDEX_TIP: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandPose {
    #[serde(rename = "frame")]
    pub frame_index: usize,
    pub confidence: f64,
    /// Camera-space keypoints in meters.
    pub keypoints: [Vec3; NUM_KEYPOINTS],
}

impl HandPose {
    /// Same pose expressed in world coordinates.
    pub fn to_world(&self, camera: &CameraPose) -> HandPose {
        HandPose {
            frame_index: self.frame_index,
            confidence: self.confidence,
            keypoints: self.keypoints.map(|k| camera.camera_to_world(k)),
        }
    }

    pub fn flatten(&self) -> [f64; 3 * NUM_KEYPOINTS] {
        let mut out = [0.0; 3 * NUM_KEYPOINTS];
        for (i, k) in self.keypoints.iter().enumerate() {
            out[3 * i] = k.x;
            out[3 * i + 1] = k.y;
            out[3 * i + 2] = k.z;
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.confidence) && self.keypoints.iter().all(|k| k.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandTrack {
    pub poses: Vec<HandPose>,
    pub fps: f64,
}

impl HandTrack {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fps > 0.0) {
            return Err("fps must be positive".into());
        }
        for w in self.poses.windows(2) {
            if w[1].frame_index <= w[0].frame_index {
                return Err(format!("frame {} does not increase", w[1].frame_index));
            }
        }
        if let Some(p) = self.poses.iter().find(|p| !p.is_valid()) {
            return Err(format!("invalid pose at frame {}", p.frame_index));
        }
        Ok(())
    }

    pub fn pose_at(&self, frame: usize) -> Option<&HandPose> {
        self.poses.binary_search_by_key(&frame, |p| p.frame_index).ok().map(|i| &self.poses[i])
    }
}

/// Fingertip position and unit pointing direction; the rig fills in the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandState {
    pub tip: Vec3,
    pub direction: Vec3,
}

impl HandState {
    /// Eased interpolation between two states (smoothstep on `t`).
    pub fn blend(&self, other: &HandState, t: f64) -> HandState {
        let s = t * t * (3.0 - 2.0 * t);
        let dir = self.direction.lerp(other.direction, s).normalized().unwrap_or(other.direction);
        HandState { tip: self.tip.lerp(other.tip, s), direction: dir }
    }
}

/// Builds a right hand with an extended index finger along `state.direction`.
/// `down` is the frame's gravity direction and only orients the palm.
pub fn pointing_rig(state: &HandState, down: Vec3) -> [Vec3; NUM_KEYPOINTS] {
    let f = state.direction;
    // palm normal: gravity with the finger-axis component removed
    let palm = (down - f * down.dot(f)).normalized().unwrap_or_else(|| f.any_orthogonal());
    // thumb side for a right hand with the palm facing down
    let side = palm.cross(f);
    let tip = state.tip;
    let mut k = [Vec3::ZERO; NUM_KEYPOINTS];

    k[8] = tip;
    k[7] = tip - f * 0.022;
    k[6] = tip - f * 0.047;
    k[5] = tip - f * 0.087;
    k[0] = k[5] - f * 0.085 - side * 0.012 + palm * 0.01;

    let curled = |mcp: Vec3| -> [Vec3; 4] {
        [mcp, mcp + f * 0.028 + palm * 0.012, mcp + f * 0.020 + palm * 0.034, mcp + f * 0.004 + palm * 0.036]
    };
    let mcps = [k[5] - side * 0.021 - f * 0.003, k[5] - side * 0.040 - f * 0.008, k[5] - side * 0.056 - f * 0.016];
    for (finger, mcp) in mcps.into_iter().enumerate() {
        let joints = curled(mcp);
        let base = 9 + 4 * finger;
        k[base..base + 4].copy_from_slice(&joints);
    }

    k[1] = k[0] + f * 0.025 + side * 0.022 + palm * 0.008;
    k[2] = k[1] + f * 0.027 + side * 0.014 + palm * 0.012;
    k[3] = k[2] + f * 0.022 + side * 0.004 + palm * 0.012;
    k[4] = k[3] + f * 0.016 - side * 0.004 + palm * 0.010;
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_chain_is_collinear_with_direction() {
        let dir = Vec3::new(0.2, 0.3, 0.9).normalized().unwrap();
        let k = pointing_rig(&HandState { tip: Vec3::new(0.1, 0.2, 0.5), direction: dir }, Vec3::Y);
        let d = (k[INDEX_TIP] - k[INDEX_MCP]).normalized().unwrap();
        assert!((d - dir).norm() < 1e-12);
        assert_eq!(k[INDEX_TIP], Vec3::new(0.1, 0.2, 0.5));
        let mut distinct = k.to_vec();
        distinct.dedup();
        assert_eq!(distinct.len(), NUM_KEYPOINTS);
    }

    #[test]
    fn track_validation_rejects_unordered_frames() {
        let pose = |f| HandPose { frame_index: f, confidence: 0.9, keypoints: [Vec3::ZERO; NUM_KEYPOINTS] };
        let t = HandTrack { poses: vec![pose(0), pose(2), pose(1)], fps: 30.0 };
        assert!(t.validate().is_err());
        let t = HandTrack { poses: vec![pose(0), pose(1)], fps: 30.0 };
        assert!(t.validate().is_ok());
        assert_eq!(t.pose_at(1).unwrap().frame_index, 1);
    }
}
