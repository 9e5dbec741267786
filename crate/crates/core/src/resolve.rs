//! Recovers the time-ordered pointed-at objects from a hand track and scene,
//! without access to generator ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ResolveError;
use crate::geometry::{ray_aabb_intersect, Ray};
use crate::scene::Scene;
use crate::synth::hand::{HandPose, HandTrack, INDEX_MCP, INDEX_TIP};
use crate::synth::ClipRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolverConfig {
    /// Frames below this detection confidence are discarded.
    pub conf_threshold: f64,
    pub dwell_min_s: f64,
    pub angle_max_deg: f64,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        ResolverConfig { conf_threshold: 0.5, dwell_min_s: 1.0, angle_max_deg: 15.0 }
    }
}

impl ResolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return Err("conf_threshold must be in [0, 1]".into());
        }
        if !(self.dwell_min_s >= 0.0) {
            return Err("dwell_min_s must be non-negative".into());
        }
        if !(self.angle_max_deg > 0.0 && self.angle_max_deg <= 180.0) {
            return Err("angle_max_deg must be in (0, 180]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureEvent {
    pub start_frame: usize,
    pub end_frame: usize,
    pub referent_id: String,
    pub mean_score: f64,
}

/// Export record: one line per clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedClip {
    pub clip_id: String,
    pub events: Vec<GestureEvent>,
}

/// Fingertip ray along the index MCP → tip segment.
pub fn pointing_ray(pose: &HandPose) -> Result<Ray, ResolveError> {
    let tip = pose.keypoints[INDEX_TIP];
    let mcp = pose.keypoints[INDEX_MCP];
    let d = tip - mcp;
    if d.norm() < 1e-6 {
        return Err(ResolveError::DegeneratePose);
    }
    Ray::new(tip, d).map_err(|_| ResolveError::DegeneratePose)
}

/// Per-object pointing score: cosine to the centroid, +1 when the ray hits the
/// box, `-inf` when the centroid lies behind the fingertip.
pub fn score_frame(pose: &HandPose, scene: &Scene) -> Result<BTreeMap<String, f64>, ResolveError> {
    let ray = pointing_ray(pose)?;
    Ok(scene.objects.iter().map(|o| (o.id.clone(), score_object(&ray, o).score)).collect())
}

struct ObjectScore {
    score: f64,
    angle_deg: f64,
    /// Entry distance when hit, else distance of the centroid along the ray.
    along: f64,
}

fn score_object(ray: &Ray, object: &crate::scene::SceneObject) -> ObjectScore {
    let to_c = object.centroid() - ray.origin;
    let along_c = to_c.dot(ray.direction);
    let cos = match to_c.normalized() {
        Some(u) => u.dot(ray.direction).clamp(-1.0, 1.0),
        None => 1.0,
    };
    let hit = ray_aabb_intersect(ray, &object.bounds);
    if cos < 0.0 && hit.is_none() {
        return ObjectScore { score: f64::NEG_INFINITY, angle_deg: 180.0, along: f64::INFINITY };
    }
    let bonus = if hit.is_some() { 1.0 } else { 0.0 };
    ObjectScore { score: cos + bonus, angle_deg: cos.acos().to_degrees(), along: hit.unwrap_or(along_c) }
}

struct FrameLabel<'a> {
    frame: usize,
    id: &'a str,
    score: f64,
    angle_deg: f64,
}

fn label_frame<'a>(pose: &HandPose, scene: &'a Scene) -> Option<FrameLabel<'a>> {
    let ray = pointing_ray(pose).ok()?;
    let mut best: Option<(&'a str, ObjectScore)> = None;
    for o in &scene.objects {
        let s = score_object(&ray, o);
        if s.score == f64::NEG_INFINITY {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bid, b)) => {
                s.score > b.score
                    || (s.score == b.score && (s.along < b.along || (s.along == b.along && o.id.as_str() < *bid)))
            }
        };
        if better {
            best = Some((o.id.as_str(), s));
        }
    }
    best.map(|(id, s)| FrameLabel { frame: pose.frame_index, id, score: s.score, angle_deg: s.angle_deg })
}

/// Dwell-based segmentation of per-frame argmax labels into gesture events.
///
/// Low-confidence frames are skipped: short dropouts neither extend nor break a
/// run, but a dropout longer than the dwell time does. A confident frame whose
/// ray points at nothing breaks the current run.
pub fn segment_gestures(track: &HandTrack, scene: &Scene, config: &ResolverConfig) -> Vec<GestureEvent> {
    let mut events = Vec::new();
    let mut run: Vec<FrameLabel> = Vec::new();
    let flush = |run: &mut Vec<FrameLabel>, events: &mut Vec<GestureEvent>| {
        if let (Some(first), Some(last)) = (run.first(), run.last()) {
            let span = (last.frame - first.frame + 1) as f64 / track.fps;
            let n = run.len() as f64;
            let mean_angle = run.iter().map(|l| l.angle_deg).sum::<f64>() / n;
            if first.frame < last.frame && span >= config.dwell_min_s && mean_angle <= config.angle_max_deg {
                events.push(GestureEvent {
                    start_frame: first.frame,
                    end_frame: last.frame,
                    referent_id: first.id.to_string(),
                    mean_score: run.iter().map(|l| l.score).sum::<f64>() / n,
                });
            }
        }
        run.clear();
    };

    for pose in &track.poses {
        if pose.confidence < config.conf_threshold {
            continue;
        }
        match label_frame(pose, scene) {
            Some(label) => {
                let stale = |l: &FrameLabel| (label.frame - l.frame - 1) as f64 / track.fps > config.dwell_min_s;
                if run.last().is_some_and(|l| l.id != label.id || stale(l)) {
                    flush(&mut run, &mut events);
                }
                run.push(label);
            }
            None => flush(&mut run, &mut events),
        }
    }
    flush(&mut run, &mut events);
    events
}

/// Lifts camera-space poses into the world frame using the clip's camera track.
pub fn world_track(clip: &ClipRecord) -> HandTrack {
    let poses = clip
        .hand_track
        .poses
        .iter()
        .filter_map(|p| clip.camera_track.get(p.frame_index).map(|cam| p.to_world(cam)))
        .collect();
    HandTrack { poses, fps: clip.hand_track.fps }
}

/// Ordered referents of a clip; consecutive events on the same object separated
/// by less than the dwell time are merged.
pub fn resolve_referents(clip: &ClipRecord, config: &ResolverConfig) -> Vec<GestureEvent> {
    let events = segment_gestures(&world_track(clip), &clip.scene, config);
    merge_repeats(events, clip.fps, config.dwell_min_s)
}

pub fn merge_repeats(events: Vec<GestureEvent>, fps: f64, dwell_min_s: f64) -> Vec<GestureEvent> {
    let mut out: Vec<GestureEvent> = Vec::with_capacity(events.len());
    for e in events {
        if let Some(prev) = out.last_mut() {
            let gap = (e.start_frame - prev.end_frame - 1) as f64 / fps;
            if prev.referent_id == e.referent_id && gap < dwell_min_s {
                let w_prev = (prev.end_frame - prev.start_frame + 1) as f64;
                let w_new = (e.end_frame - e.start_frame + 1) as f64;
                prev.mean_score = (prev.mean_score * w_prev + e.mean_score * w_new) / (w_prev + w_new);
                prev.end_frame = e.end_frame;
                continue;
            }
        }
        out.push(e);
    }
    out
}

pub fn referent_ids(events: &[GestureEvent]) -> Vec<String> {
    events.iter().map(|e| e.referent_id.clone()).collect()
}
