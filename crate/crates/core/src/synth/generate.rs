use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::hand::{pointing_rig, HandPose, HandState, HandTrack};
use super::{quality_filter, ClipRecord, GenConfig, GestureSpec};
use crate::error::SynthError;
use crate::geometry::{ray_aabb_intersect, Aabb, Quat, Ray, Vec3};
use crate::scene::{project_point, visible_fraction, CameraPose, Scene, SceneObject};
use crate::seed;
use crate::vocab::CATEGORIES;

/// World height of the desk surface (world `y` points down).
pub const TABLE_TOP_Y: f64 = 0.45;
const TABLE_X: (f64, f64) = (-0.65, 0.65);
const TABLE_Z: (f64, f64) = (0.65, 1.65);
const FOOTPRINT_GAP: f64 = 0.03;

/// Fingertip envelope in the camera frame at hold start.
const REACH_LATERAL: (f64, f64) = (-0.2, 0.2);
const REACH_BELOW: (f64, f64) = (0.1, 0.3);
const REACH_FORWARD: (f64, f64) = (0.3, 0.6);
/// Pointing directions must stay within this angle of the optical axis.
const REACH_MAX_OFF_AXIS_DEG: f64 = 75.0;
const TIP_IMAGE_MARGIN_PX: f64 = 20.0;

/// Lowered, relaxed hand in the camera frame, below the field of view.
const REST_TIP: Vec3 = Vec3::new(0.12, 0.32, 0.30);
const REST_DIR: Vec3 = Vec3::new(0.1, 0.9, 0.3);

/// Draws a desk scene with `min_objects..=max_objects` objects.
pub fn sample_scene(seed: u64, config: &GenConfig) -> Result<Scene, SynthError> {
    config.validate()?;
    let mut rng = seed::rng(seed, "scene", 0);
    let n = rng.gen_range(config.min_objects..=config.max_objects);

    // a small palette makes repeated categories (and counting questions) common
    let palette_size = rng.gen_range(n.div_ceil(2).max(2)..=n.min(CATEGORIES.len()));
    let mut indices: Vec<usize> = (0..CATEGORIES.len()).collect();
    indices.shuffle(&mut rng);
    let palette = &indices[..palette_size];

    let mut objects: Vec<SceneObject> = Vec::with_capacity(n);
    let mut placed: Vec<Aabb> = Vec::with_capacity(n);
    let mut guard = 0;
    while objects.len() < n {
        guard += 1;
        if guard > 10_000 {
            break;
        }
        // first pass covers the palette, then draw with replacement
        let spec = if objects.len() < palette.len() {
            &CATEGORIES[palette[objects.len()]]
        } else {
            &CATEGORIES[*palette.choose(&mut rng).expect("palette non-empty")]
        };
        let long = rng.gen_range(spec.footprint[0].0..=spec.footprint[0].1);
        let short = rng.gen_range(spec.footprint[1].0..=spec.footprint[1].1);
        let height = rng.gen_range(spec.height.0..=spec.height.1);
        let (wx, wz) = if rng.gen_bool(0.5) { (long, short) } else { (short, long) };
        let mut candidate = None;
        for _ in 0..200 {
            let cx = rng.gen_range(TABLE_X.0 + wx / 2.0..=TABLE_X.1 - wx / 2.0);
            let cz = rng.gen_range(TABLE_Z.0 + wz / 2.0..=TABLE_Z.1 - wz / 2.0);
            let b = Aabb::new(
                Vec3::new(cx - wx / 2.0, TABLE_TOP_Y - height, cz - wz / 2.0),
                Vec3::new(cx + wx / 2.0, TABLE_TOP_Y, cz + wz / 2.0),
            )
            .expect("positive extents");
            if placed.iter().all(|p| !p.overlaps_xz(&b, FOOTPRINT_GAP)) {
                candidate = Some(b);
                break;
            }
        }
        let Some(bounds) = candidate else { continue };
        let mut attributes = BTreeMap::new();
        attributes.insert("color".to_string(), pick(&mut rng, spec.colors));
        attributes.insert("material".to_string(), pick(&mut rng, spec.materials));
        attributes.insert("shape".to_string(), pick(&mut rng, spec.shapes));
        attributes.insert("state".to_string(), pick(&mut rng, spec.states));
        placed.push(bounds);
        objects.push(SceneObject {
            id: format!("{}#{}", spec.name, objects.len() + 1),
            category: spec.name.to_string(),
            attributes,
            bounds,
            referring_expression: None,
        });
    }
    if objects.len() < config.min_objects {
        return Err(SynthError::ConfigInvalid(format!("desk too small to place {} objects", config.min_objects)));
    }
    Ok(Scene { scene_id: format!("scene-{seed:016x}"), rng_seed: seed, objects })
}

fn pick(rng: &mut ChaCha8Rng, values: &[&str]) -> String {
    values.choose(rng).expect("non-empty vocabulary").to_string()
}

fn count_visible(scene: &Scene, camera: &CameraPose, min_fraction: f64) -> usize {
    scene.objects.iter().filter(|o| visible_fraction(o, camera, &scene.others(&o.id)) > min_fraction).count()
}

/// Head pose looking over the desk with at least three objects more than 10% visible.
pub fn sample_viewpoint(scene: &Scene, seed: u64, config: &GenConfig) -> Result<CameraPose, SynthError> {
    const REQUIRED: usize = 3;
    if scene.objects.len() < REQUIRED {
        return Err(SynthError::NoValidViewpoint { attempts: 0 });
    }
    let mut rng = seed::rng(seed, "viewpoint", 0);
    for _ in 0..config.viewpoint_attempts {
        let position = Vec3::new(rng.gen_range(-0.15..=0.15), rng.gen_range(-0.05..=0.05), rng.gen_range(-0.15..=0.05));
        let look = Vec3::new(
            rng.gen_range(-0.25..=0.25),
            TABLE_TOP_Y + rng.gen_range(-0.05..=0.05),
            rng.gen_range(0.95..=1.35),
        );
        let camera = CameraPose::look_at(position, look, config.intrinsics)?;
        if count_visible(scene, &camera, config.target_min_visible) >= REQUIRED {
            return Ok(camera);
        }
    }
    Err(SynthError::NoValidViewpoint { attempts: config.viewpoint_attempts })
}

/// Objects more than 10% visible whose centroid lies within the depth limit.
pub fn eligible_targets(scene: &Scene, camera: &CameraPose, config: &GenConfig) -> Vec<String> {
    scene
        .objects
        .iter()
        .filter(|o| match project_point(camera, o.centroid()) {
            Ok(p) => p.depth < config.target_max_depth,
            Err(_) => false,
        })
        .filter(|o| visible_fraction(o, camera, &scene.others(&o.id)) > config.target_min_visible)
        .map(|o| o.id.clone())
        .collect()
}

/// Uniform choice among [`eligible_targets`].
pub fn select_target(scene: &Scene, camera: &CameraPose, seed: u64, config: &GenConfig) -> Result<String, SynthError> {
    let eligible = eligible_targets(scene, camera, config);
    if eligible.is_empty() {
        return Err(SynthError::NoEligibleTarget);
    }
    let mut rng = seed::rng(seed, "target", 0);
    Ok(eligible[rng.gen_range(0..eligible.len())].clone())
}

fn rest_state(camera: &CameraPose) -> HandState {
    HandState {
        tip: camera.camera_to_world(REST_TIP),
        direction: camera.camera_dir_to_world(REST_DIR.normalized().expect("non-zero")),
    }
}

/// World-space fingertip placement whose ray at the target centroid is unambiguous.
/// The fingertip must stay clear of the image border on every `hold_cams` frame,
/// so detection confidence does not sag while the camera drifts.
fn place_hand(
    scene: &Scene,
    target: &SceneObject,
    camera: &CameraPose,
    hold_cams: &[CameraPose],
    rng: &mut ChaCha8Rng,
    config: &GenConfig,
) -> Option<HandState> {
    let centroid = target.centroid();
    let min_forward = REACH_MAX_OFF_AXIS_DEG.to_radians().cos();
    let margin = config.ambiguity_margin_deg.to_radians();
    for _ in 0..config.placement_attempts {
        let tip_cam = Vec3::new(
            rng.gen_range(REACH_LATERAL.0..=REACH_LATERAL.1),
            rng.gen_range(REACH_BELOW.0..=REACH_BELOW.1),
            rng.gen_range(REACH_FORWARD.0..=REACH_FORWARD.1),
        );
        let tip = camera.camera_to_world(tip_cam);
        let Some(dir) = (centroid - tip).normalized() else {
            continue;
        };
        if camera.world_dir_to_camera(dir).z < min_forward {
            continue;
        }
        if target.bounds.scaled(1.2).contains(tip) {
            continue;
        }
        let m = TIP_IMAGE_MARGIN_PX.max(config.confidence.edge_margin_px);
        let inside = |cam: &CameraPose| {
            let k = &cam.intrinsics;
            project_point(cam, tip)
                .is_ok_and(|p| p.u >= m && p.u <= k.width as f64 - m && p.v >= m && p.v <= k.height as f64 - m)
        };
        if !inside(camera) || !hold_cams.iter().all(inside) {
            continue;
        }
        let ray = Ray { origin: tip, direction: dir };
        let Some(t_target) = ray_aabb_intersect(&ray, &target.bounds) else {
            continue;
        };
        let clear = scene.objects.iter().filter(|o| o.id != target.id).all(|o| {
            let in_front = matches!(ray_aabb_intersect(&ray, &o.bounds), Some(t) if t <= t_target);
            let far_enough = (o.centroid() - tip).angle_to(dir) >= margin;
            !in_front && far_enough && !o.bounds.contains(tip)
        });
        if clear {
            return Some(HandState { tip, direction: dir });
        }
    }
    None
}

/// Rotates `dir` by a small offset `(a, b)` radians along two perpendicular axes.
fn tilt(dir: Vec3, a: f64, b: f64) -> Vec3 {
    let u = dir.any_orthogonal();
    let w = dir.cross(u);
    (dir + u * a.tan() + w * b.tan()).normalized().unwrap_or(dir)
}

/// Smoothed tremor offsets bounded by `max_rad`, one per hold frame.
fn tremor(rng: &mut ChaCha8Rng, frames: usize, max_rad: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(frames);
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for _ in 0..frames {
        if max_rad <= 0.0 {
            out.push((0.0, 0.0));
            continue;
        }
        a = 0.7 * a + 0.3 * rng.gen_range(-max_rad..=max_rad);
        b = 0.7 * b + 0.3 * rng.gen_range(-max_rad..=max_rad);
        // angle of tilt(a, b) is at most sqrt(a² + b²)
        let r = (a * a + b * b).sqrt();
        if r > max_rad {
            a *= max_rad / r;
            b *= max_rad / r;
        }
        out.push((a, b));
    }
    out
}

/// World-space hand states for one gesture, from its first approach frame to `hold_end`.
fn gesture_states(
    scene: &Scene,
    camera_track: &[CameraPose],
    spec: &GestureSpec,
    from: Option<HandState>,
    rng: &mut ChaCha8Rng,
    config: &GenConfig,
) -> Result<Vec<(usize, HandState)>, SynthError> {
    let target = scene.object(&spec.target_id).ok_or_else(|| SynthError::UnknownObject(spec.target_id.clone()))?;
    if spec.hold_start >= spec.hold_end {
        return Err(SynthError::InvalidGesture("hold_start must precede hold_end".into()));
    }
    if spec.hold_end >= camera_track.len() || spec.approach_frames > spec.hold_start {
        return Err(SynthError::InvalidGesture("camera track does not cover the gesture".into()));
    }
    let anchor_cam = &camera_track[spec.hold_start];
    let hold_cams = &camera_track[spec.hold_start..=spec.hold_end];
    let hold = place_hand(scene, target, anchor_cam, hold_cams, rng, config)
        .ok_or_else(|| SynthError::UnreachableTarget(target.id.clone()))?;

    let first = spec.first_frame();
    let start = from.unwrap_or_else(|| rest_state(&camera_track[first]));
    let mut states = Vec::with_capacity(spec.hold_end + 1 - first);
    for f in first..spec.hold_start {
        let t = (f - first + 1) as f64 / (spec.approach_frames + 1) as f64;
        states.push((f, start.blend(&hold, t)));
    }

    let shrunk = target.bounds.scaled(0.9);
    let offsets = tremor(rng, spec.hold_frames(), config.jitter_deg.to_radians());
    for (f, (a, b)) in (spec.hold_start..=spec.hold_end).zip(offsets) {
        let mut scale = 1.0;
        let mut dir = tilt(hold.direction, a, b);
        // tremor never breaks the hit
        while ray_aabb_intersect(&Ray { origin: hold.tip, direction: dir }, &shrunk).is_none() {
            scale *= 0.5;
            if scale < 1e-3 {
                dir = hold.direction;
                break;
            }
            dir = tilt(hold.direction, a * scale, b * scale);
        }
        states.push((f, HandState { tip: hold.tip, direction: dir }));
    }
    Ok(states)
}

fn edge_proximity(camera: &CameraPose, p: Vec3, margin: f64) -> f64 {
    match project_point(camera, p) {
        Ok(proj) if camera.in_image(proj.u, proj.v) => {
            let k = &camera.intrinsics;
            let d = proj.u.min(k.width as f64 - proj.u).min(proj.v).min(k.height as f64 - proj.v);
            (1.0 - d / margin).clamp(0.0, 1.0)
        }
        _ => 1.0,
    }
}

fn tip_in_image(camera: &CameraPose, p: Vec3) -> bool {
    project_point(camera, p).is_ok_and(|proj| camera.in_image(proj.u, proj.v))
}

/// Turns world-space hand states into camera-space poses with modelled confidence.
/// `prev` is the state just before the first entry (for angular velocity).
fn states_to_poses(
    states: &[(usize, HandState)],
    prev: Option<HandState>,
    camera_track: &[CameraPose],
    clip_seed: u64,
    config: &GenConfig,
) -> Vec<HandPose> {
    let model = &config.confidence;
    let noise = Normal::new(0.0, model.noise_sigma.max(0.0)).expect("valid sigma");
    let mut last = prev;
    states
        .iter()
        .map(|(frame, state)| {
            let camera = &camera_track[*frame];
            let omega = last.map_or(0.0, |p| p.direction.angle_to(state.direction) * config.fps);
            let edge = edge_proximity(camera, state.tip, model.edge_margin_px);
            let eps = if model.noise_sigma > 0.0 {
                noise.sample(&mut seed::rng(clip_seed, "confidence", *frame as u64))
            } else {
                0.0
            };
            // a fingertip outside the image is not detected at all
            let confidence = if edge >= 1.0 && !tip_in_image(camera, state.tip) {
                0.0
            } else {
                (model.base - model.lambda * omega - model.mu * edge + eps).clamp(0.0, 1.0)
            };
            last = Some(*state);
            let down = camera.camera_dir_to_world(Vec3::Y);
            let world = pointing_rig(state, down);
            HandPose { frame_index: *frame, confidence, keypoints: world.map(|k| camera.world_to_camera(k)) }
        })
        .collect()
}

/// Hand track segment (approach + hold) for one gesture, starting from the rest pose.
pub fn synthesize_gesture(
    scene: &Scene,
    camera_track: &[CameraPose],
    spec: &GestureSpec,
    seed: u64,
    config: &GenConfig,
) -> Result<HandTrack, SynthError> {
    let mut rng = seed::rng(seed, "gesture", 0);
    let states = gesture_states(scene, camera_track, spec, None, &mut rng, config)?;
    let prev = rest_state(&camera_track[spec.first_frame()]);
    let poses = states_to_poses(&states, Some(prev), camera_track, seed, config);
    Ok(HandTrack { poses, fps: config.fps })
}

fn camera_track(base: &CameraPose, n_frames: usize, seed: u64, config: &GenConfig) -> Vec<CameraPose> {
    if !config.camera_drift {
        return vec![*base; n_frames];
    }
    let mut rng = seed::rng(seed, "drift", 0);
    let phase: [f64; 5] = std::array::from_fn(|_| rng.gen_range(0.0..std::f64::consts::TAU));
    let freq: [f64; 5] = std::array::from_fn(|_| rng.gen_range(0.15..0.45));
    let axis = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.2..0.2));
    (0..n_frames)
        .map(|f| {
            let t = f as f64 / config.fps;
            let wave = |i: usize| (std::f64::consts::TAU * freq[i] * t + phase[i]).sin();
            let offset = Vec3::new(wave(0), wave(1), wave(2)) * 0.01;
            let wobble = Quat::from_axis_angle(axis, 1.0f64.to_radians() * wave(3));
            CameraPose {
                position: base.position + offset,
                orientation: wobble.mul(&base.orientation).normalized(),
                intrinsics: base.intrinsics,
            }
        })
        .collect()
}

/// Frame layout for `count` gestures in an `n_frames` clip, or `None` when it does not fit.
fn layout(
    n_frames: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
    config: &GenConfig,
) -> Option<Vec<(usize, usize, usize)>> {
    let approach = config.frames(config.approach_s).max(1);
    let gap = config.frames(config.gap_s).max(1);
    let hold_min = config.frames(if count == 1 { config.hold_min_s } else { config.multi_hold_min_s }).max(2);
    let required = approach + count * hold_min + (count - 1) * gap;
    if required > n_frames {
        return None;
    }
    let slack = n_frames - required;
    // split slack among lead-in, each hold and the tail
    let weights: Vec<f64> = (0..count + 2).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = weights.iter().sum::<f64>().max(1e-9);
    let mut parts: Vec<usize> = weights.iter().map(|w| (w / total * slack as f64).floor() as usize).collect();
    let used: usize = parts.iter().sum();
    parts[count + 1] += slack - used;

    let mut cursor = parts[0];
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let lead = if i == 0 { approach } else { gap };
        let hold_start = cursor + lead;
        let hold_end = hold_start + hold_min + parts[i + 1] - 1;
        out.push((hold_start, hold_end, lead));
        cursor = hold_end + 1;
    }
    Some(out)
}

/// Result of [`forge_clip`]: the accepted clip plus rejected attempts with reasons.
#[derive(Debug, Clone)]
pub struct ForgeOutcome {
    pub clip: ClipRecord,
    pub rejections: Vec<Vec<String>>,
}

/// Generates one accepted clip. Pure function of `(seed, index, config)`.
pub fn forge_clip(seed: u64, index: u64, clip_id: &str, config: &GenConfig) -> Result<ForgeOutcome, SynthError> {
    config.validate()?;
    let mut rejections = Vec::new();
    for attempt in 0..config.clip_attempts as u64 {
        let clip_seed = seed::derive(seed, clip_id, index.wrapping_mul(1_000_003).wrapping_add(attempt));
        match try_clip(clip_seed, clip_id, config)? {
            Some(clip) => {
                let verdict = quality_filter(&clip, &config.quality);
                if verdict.accept {
                    return Ok(ForgeOutcome { clip, rejections });
                }
                rejections.push(verdict.reasons);
            }
            None => continue,
        }
    }
    Err(SynthError::AttemptsExhausted { attempts: config.clip_attempts })
}

/// One generation attempt; `Ok(None)` means a recoverable sampling failure.
fn try_clip(clip_seed: u64, clip_id: &str, config: &GenConfig) -> Result<Option<ClipRecord>, SynthError> {
    let scene = sample_scene(seed::derive(clip_seed, "scene", 0), config)?;
    let base = match sample_viewpoint(&scene, seed::derive(clip_seed, "viewpoint", 0), config) {
        Ok(c) => c,
        Err(SynthError::NoValidViewpoint { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut rng = seed::rng(clip_seed, "clip", 0);
    let len_s = rng.gen_range(config.clip_len_min_s..=config.clip_len_max_s);
    let n_frames = config.frames(len_s).max(1);

    let w = config.gesture_count_weights;
    let roll = rng.gen_range(0.0..w.iter().sum::<f64>());
    let mut count = if roll < w[0] {
        1
    } else if roll < w[0] + w[1] {
        2
    } else {
        3
    };
    let windows = loop {
        if let Some(l) = layout(n_frames, count, &mut rng, config) {
            break l;
        }
        if count == 1 {
            return Ok(None);
        }
        count -= 1;
    };

    let mut eligible = eligible_targets(&scene, &base, config);
    if eligible.len() < count {
        return Ok(None);
    }
    eligible.shuffle(&mut rng);

    let cameras = camera_track(&base, n_frames, clip_seed, config);
    let mut gestures = Vec::with_capacity(count);
    let mut states: Vec<(usize, HandState)> = Vec::with_capacity(n_frames);
    let mut candidates = eligible.into_iter();
    for (hold_start, hold_end, approach_frames) in windows {
        let first = hold_start - approach_frames;
        // rest until this gesture's approach begins
        let cursor = states.last().map_or(0, |(f, _)| f + 1);
        states.extend((cursor..first).zip(&cameras[cursor..first]).map(|(f, cam)| (f, rest_state(cam))));
        let from = states.last().map(|(_, s)| *s);
        let mut placed = None;
        for target_id in candidates.by_ref() {
            let spec = GestureSpec { target_id, hold_start, hold_end, approach_frames };
            match gesture_states(&scene, &cameras, &spec, from, &mut rng, config) {
                Ok(seg) => {
                    placed = Some((spec, seg));
                    break;
                }
                Err(SynthError::UnreachableTarget(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        let Some((spec, seg)) = placed else {
            return Ok(None);
        };
        states.extend(seg);
        gestures.push(spec);
    }

    // retract to rest after the last hold
    let retract = config.frames(config.approach_s).max(1);
    let (last_frame, last_state) = *states.last().expect("at least one gesture");
    for (f, cam) in cameras.iter().enumerate().skip(last_frame + 1) {
        let rest = rest_state(cam);
        let t = ((f - last_frame) as f64 / retract as f64).min(1.0);
        states.push((f, last_state.blend(&rest, t)));
    }

    let prev = rest_state(&cameras[0]);
    let poses = states_to_poses(&states, Some(prev), &cameras, clip_seed, config);
    let clip = ClipRecord {
        clip_id: clip_id.to_string(),
        rng_seed: clip_seed,
        fps: config.fps,
        n_frames,
        scene,
        camera_track: cameras,
        hand_track: HandTrack { poses, fps: config.fps },
        gestures,
    };
    debug_assert!(clip.validate().is_ok());
    Ok(Some(clip))
}
