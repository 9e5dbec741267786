//! Deterministic fixtures shared by the benchmarks.

use deixis_core::hint::adapter::KEYPOINT_DIM;
use deixis_core::{Aabb, Ray, Vec3};

/// A fan of rays from the origin, roughly half of which hit [`unit_boxes`].
pub fn ray_fan(n: usize) -> Vec<Ray> {
    (0..n)
        .map(|i| {
            let a = i as f64 / n as f64 * std::f64::consts::TAU;
            Ray::new(Vec3::ZERO, Vec3::new(a.cos(), 0.3 * (3.0 * a).sin(), a.sin())).expect("non-zero direction")
        })
        .collect()
}

/// Unit cubes on a ring of radius 4.
pub fn unit_boxes(n: usize) -> Vec<Aabb> {
    (0..n)
        .map(|i| {
            let a = i as f64 / n as f64 * std::f64::consts::TAU;
            let c = Vec3::new(4.0 * a.cos(), 0.0, 4.0 * a.sin());
            Aabb::new(c - Vec3::new(0.5, 0.5, 0.5), c + Vec3::new(0.5, 0.5, 0.5)).expect("ordered corners")
        })
        .collect()
}

/// A flattened 21-keypoint vector with some spread.
pub fn keypoints() -> Vec<f64> {
    (0..KEYPOINT_DIM).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.01).collect()
}

/// Model-style answers covering the extraction ladder's common shapes.
pub const RAW_OUTPUTS: [&str; 6] = [
    "B",
    "The answer is (C).",
    "<|im_start|>assistant\nAnswer: d) the red mug",
    "I think the best option here is E because the hand points at it.",
    "**A**",
    "none of these",
];
