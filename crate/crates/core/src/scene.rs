//! Scene graph, pinhole camera and box-level visibility.
//!
//! World and camera frames share the same handedness: `x` right, `y` down,
//! `z` forward. A camera's `orientation` rotates camera-frame vectors into the
//! world frame, so `world = orientation · cam + position`.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::SceneError;
use crate::geometry::{ray_aabb_intersect, Aabb, Quat, Ray, Vec3};

/// Default lattice size for [`visible_fraction`].
pub const DEFAULT_VISIBILITY_GRID: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub category: String,
    pub attributes: BTreeMap<String, String>,
    pub bounds: Aabb,
    #[serde(default)]
    pub referring_expression: Option<String>,
}

impl SceneObject {
    pub fn attribute(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).map(String::as_str)
    }

    pub fn centroid(&self) -> Vec3 {
        self.bounds.centroid()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub rng_seed: u64,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// 1-based position of an object in `objects`; used for `<objectN>` placeholders.
    pub fn ordinal_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id).map(|i| i + 1)
    }

    /// Checks the full scene invariants (≥ 3 objects, unique ids, required attributes).
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.objects.len() < 3 {
            return Err(SceneError::InvalidScene(format!("{} objects, at least 3 required", self.objects.len())));
        }
        let mut seen = HashSet::new();
        for o in &self.objects {
            if o.id.is_empty() {
                return Err(SceneError::InvalidScene("empty object id".into()));
            }
            if !seen.insert(o.id.as_str()) {
                return Err(SceneError::InvalidScene(format!("duplicate object id {}", o.id)));
            }
            for key in ["color", "shape"] {
                if !o.attributes.contains_key(key) {
                    return Err(SceneError::InvalidScene(format!("{} lacks attribute {key}", o.id)));
                }
            }
        }
        Ok(())
    }

    /// Every object except `id`.
    pub fn others(&self, id: &str) -> Vec<SceneObject> {
        self.objects.iter().filter(|o| o.id != id).cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Intrinsics { fx: 500.0, fy: 500.0, cx: 320.0, cy: 240.0, width: 640, height: 480 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vec3,
    pub orientation: Quat,
    pub intrinsics: Intrinsics,
}

/// Result of [`project_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl CameraPose {
    pub fn new(position: Vec3, orientation: Quat, intrinsics: Intrinsics) -> Result<Self, SceneError> {
        let cam = CameraPose { position, orientation, intrinsics };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `position` whose optical axis points at `target`, with image
    /// "down" kept as close to world `+y` as possible.
    pub fn look_at(position: Vec3, target: Vec3, intrinsics: Intrinsics) -> Result<Self, SceneError> {
        let forward = (target - position)
            .normalized()
            .ok_or_else(|| SceneError::InvalidCamera("look-at target equals position".into()))?;
        let right = Vec3::Y
            .cross(forward)
            .normalized()
            .ok_or_else(|| SceneError::InvalidCamera("look direction parallel to vertical".into()))?;
        let down = forward.cross(right);
        CameraPose::new(position, Quat::from_basis(right, down, forward), intrinsics)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if (self.orientation.norm() - 1.0).abs() > 1e-9 {
            return Err(SceneError::InvalidCamera("orientation is not a unit quaternion".into()));
        }
        let k = &self.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0) {
            return Err(SceneError::InvalidCamera("focal lengths must be positive".into()));
        }
        if k.width == 0 || k.height == 0 {
            return Err(SceneError::InvalidCamera("image size must be positive".into()));
        }
        if !self.position.is_finite() {
            return Err(SceneError::InvalidCamera("non-finite position".into()));
        }
        Ok(())
    }

    pub fn world_to_camera(&self, p: Vec3) -> Vec3 {
        self.orientation.conjugate().rotate(p - self.position)
    }

    pub fn camera_to_world(&self, p: Vec3) -> Vec3 {
        self.orientation.rotate(p) + self.position
    }

    pub fn camera_dir_to_world(&self, d: Vec3) -> Vec3 {
        self.orientation.rotate(d)
    }

    pub fn world_dir_to_camera(&self, d: Vec3) -> Vec3 {
        self.orientation.conjugate().rotate(d)
    }

    /// Pixel + depth back to a world point.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        let k = &self.intrinsics;
        let cam = Vec3::new((u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth);
        self.camera_to_world(cam)
    }

    pub fn in_image(&self, u: f64, v: f64) -> bool {
        let k = &self.intrinsics;
        u >= 0.0 && u < k.width as f64 && v >= 0.0 && v < k.height as f64
    }
}

/// Pinhole projection of a world point.
pub fn project_point(camera: &CameraPose, point: Vec3) -> Result<Projection, SceneError> {
    let p = camera.world_to_camera(point);
    if p.z <= 0.0 {
        return Err(SceneError::PointBehindCamera { depth: p.z });
    }
    let k = &camera.intrinsics;
    Ok(Projection { u: k.cx + k.fx * p.x / p.z, v: k.cy + k.fy * p.y / p.z, depth: p.z })
}

/// Fraction of `object`'s surface lattice that lands inside the image and is
/// not hidden behind any occluder box. Uses the default 8×8×8 lattice.
pub fn visible_fraction(object: &SceneObject, camera: &CameraPose, occluders: &[SceneObject]) -> f64 {
    visible_fraction_with_grid(object, camera, occluders, DEFAULT_VISIBILITY_GRID)
}

pub fn visible_fraction_with_grid(
    object: &SceneObject,
    camera: &CameraPose,
    occluders: &[SceneObject],
    grid: usize,
) -> f64 {
    let samples = object.bounds.surface_samples(grid);
    let visible = samples.iter().filter(|p| sample_visible(**p, camera, occluders)).count();
    visible as f64 / samples.len() as f64
}

/// `visible_fraction(..) > 0`, short-circuiting on the first visible sample.
pub fn any_visible(object: &SceneObject, camera: &CameraPose, occluders: &[SceneObject]) -> bool {
    // centroid first: the common case resolves with one ray
    sample_visible(object.centroid(), camera, occluders)
        || object
            .bounds
            .surface_samples(DEFAULT_VISIBILITY_GRID)
            .into_iter()
            .any(|p| sample_visible(p, camera, occluders))
}

/// Whether a single world point projects into the image unobstructed.
pub fn sample_visible(p: Vec3, camera: &CameraPose, occluders: &[SceneObject]) -> bool {
    let Ok(proj) = project_point(camera, p) else {
        return false;
    };
    if !camera.in_image(proj.u, proj.v) {
        return false;
    }
    let offset = p - camera.position;
    let dist = offset.norm();
    let Ok(ray) = Ray::new(camera.position, offset) else {
        return true;
    };
    // samples lying on an occluder face are not blocked by it
    const EPS: f64 = 1e-9;
    !occluders.iter().any(|o| matches!(ray_aabb_intersect(&ray, &o.bounds), Some(t) if t < dist - EPS))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> CameraPose {
        CameraPose::new(Vec3::ZERO, Quat::IDENTITY, Intrinsics::default()).unwrap()
    }

    fn obj(id: &str, min: [f64; 3], max: [f64; 3]) -> SceneObject {
        let mut attributes = BTreeMap::new();
        attributes.insert("color".into(), "red".into());
        attributes.insert("shape".into(), "round".into());
        SceneObject {
            id: id.into(),
            category: "mug".into(),
            attributes,
            bounds: Aabb::new(min.into(), max.into()).unwrap(),
            referring_expression: None,
        }
    }

    #[test]
    fn project_on_axis() {
        let p = project_point(&cam(), Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!((p.u, p.v, p.depth), (320.0, 240.0, 2.0));
    }

    #[test]
    fn project_off_axis() {
        let p = project_point(&cam(), Vec3::new(0.5, 0.0, 1.0)).unwrap();
        assert_eq!((p.u, p.v, p.depth), (570.0, 240.0, 1.0));
    }

    #[test]
    fn project_behind_camera_errors() {
        let err = project_point(&cam(), Vec3::new(0.0, 0.0, -1.0)).unwrap_err();
        assert!(matches!(err, SceneError::PointBehindCamera { .. }));
        assert!(project_point(&cam(), Vec3::ZERO).is_err());
    }

    #[test]
    fn look_at_points_axis_at_target() {
        let c =
            CameraPose::look_at(Vec3::new(0.1, -0.2, 0.0), Vec3::new(0.3, 0.4, 1.2), Intrinsics::default()).unwrap();
        let p = project_point(&c, Vec3::new(0.3, 0.4, 1.2)).unwrap();
        assert!((p.u - 320.0).abs() < 1e-9 && (p.v - 240.0).abs() < 1e-9);
    }

    #[test]
    fn fully_visible_box() {
        let o = obj("a", [-0.1, -0.1, 1.0], [0.1, 0.1, 1.2]);
        assert_eq!(visible_fraction(&o, &cam(), &[]), 1.0);
    }

    #[test]
    fn box_behind_camera_invisible() {
        let o = obj("a", [-0.1, -0.1, -1.2], [0.1, 0.1, -1.0]);
        assert_eq!(visible_fraction(&o, &cam(), &[]), 0.0);
        assert!(!any_visible(&o, &cam(), &[]));
    }

    #[test]
    fn occluder_in_front_hides_box() {
        let o = obj("a", [-0.1, -0.1, 2.0], [0.1, 0.1, 2.2]);
        let wall = obj("w", [-1.0, -1.0, 1.0], [1.0, 1.0, 1.1]);
        assert_eq!(visible_fraction(&o, &cam(), &[wall]), 0.0);
    }

    #[test]
    fn scene_validation() {
        let mut s = Scene {
            scene_id: "s".into(),
            rng_seed: 0,
            objects: vec![obj("a", [0.0; 3], [1.0; 3]), obj("b", [0.0; 3], [1.0; 3])],
        };
        assert!(s.validate().is_err());
        s.objects.push(obj("b", [0.0; 3], [1.0; 3]));
        assert!(s.validate().is_err());
        s.objects[2].id = "c".into();
        assert!(s.validate().is_ok());
    }
}
