//! Synthesis, grounding and evaluation for gesture-grounded egocentric VQA.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] and [`scene`]: boxes, rays, pinhole cameras, visibility.
//! * [`synth`]: desk scenes, camera drift and 21-keypoint pointing hands.
//! * [`resolve`]: recovers the ordered pointed-at objects from a hand track.
//! * [`qa`]: scene facts, six-category question templates, hard negatives
//!   and deictic rephrasing.
//! * [`hint`]: keypoint adapter, confidence gating, frame/keypoint
//!   interleaving and a small trainable option scorer.
//! * [`eval`]: answer-letter extraction, accuracy reports and bias probes.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod hint;
pub mod jsonl;
pub mod qa;
pub mod resolve;
pub mod scene;
pub mod seed;
pub mod synth;
pub mod vocab;

pub use error::*;
pub use geometry::{ray_aabb_intersect, Aabb, Quat, Ray, Vec3};
pub use qa::{QaItem, TaskCategory};
pub use resolve::{resolve_referents, GestureEvent, ResolvedClip, ResolverConfig};
pub use scene::{project_point, visible_fraction, CameraPose, Intrinsics, Projection, Scene, SceneObject};
pub use synth::{ClipRecord, GenConfig, GestureSpec, HandPose, HandTrack};
