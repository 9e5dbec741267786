use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::scene::{project_point, visible_fraction, CameraPose, Scene, SceneObject};
use crate::vocab::GESTURE_STOP_LIST;

/// Radius within which two objects count as neighbors.
pub const DEFAULT_NEIGHBOR_RADIUS: f64 = 1.0;

/// Adjective order before the category noun; a state, when needed, follows it.
const ADJECTIVE_ORDER: [&str; 3] = ["color", "shape", "material"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFact {
    pub object_id: String,
    /// 1-based position in the scene's object list (the `N` of `<objectN>`).
    pub scene_index: usize,
    pub category: String,
    pub referring_expression: String,
    pub attributes: BTreeMap<String, String>,
    pub centroid: Vec3,
    /// Camera-space depth of the centroid.
    pub depth: f64,
    /// Horizontal pixel coordinate of the centroid.
    pub u: f64,
    pub neighbors: Vec<String>,
}

/// Facts for the visible objects plus whole-scene category counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactSheet {
    pub facts: Vec<SceneFact>,
    /// Instances per category over the full scene graph, visible or not.
    pub category_counts: BTreeMap<String, usize>,
}

impl FactSheet {
    pub fn fact(&self, id: &str) -> Option<&SceneFact> {
        self.facts.iter().find(|f| f.object_id == id)
    }

    pub fn count_of(&self, category: &str) -> usize {
        self.category_counts.get(category).copied().unwrap_or(0)
    }
}

pub fn extract_scene_facts(scene: &Scene, camera: &CameraPose, referents: &[String]) -> FactSheet {
    extract_scene_facts_with_radius(scene, camera, referents, DEFAULT_NEIGHBOR_RADIUS)
}

pub fn extract_scene_facts_with_radius(
    scene: &Scene,
    camera: &CameraPose,
    referents: &[String],
    radius: f64,
) -> FactSheet {
    let mut kept: Vec<(&SceneObject, f64, f64)> = Vec::new();
    let mut index = Vec::new();
    for (i, o) in scene.objects.iter().enumerate() {
        let is_referent = referents.iter().any(|r| r == &o.id);
        let (depth, u) = match project_point(camera, o.centroid()) {
            Ok(p) => (p.depth, p.u),
            Err(_) if is_referent => (camera.world_to_camera(o.centroid()).z, f64::NAN),
            Err(_) => continue,
        };
        if is_referent || visible_fraction(o, camera, &scene.others(&o.id)) > 0.0 {
            kept.push((o, depth, u));
            index.push(i + 1);
        }
    }

    let objects: Vec<&SceneObject> = kept.iter().map(|(o, _, _)| *o).collect();
    let expressions = referring_expressions(&objects, &kept.iter().map(|k| k.2).collect::<Vec<_>>());

    let facts = kept
        .iter()
        .zip(expressions)
        .zip(index)
        .map(|(((o, depth, u), referring_expression), scene_index)| {
            let neighbors = kept
                .iter()
                .filter(|(n, _, _)| n.id != o.id && n.centroid().distance(o.centroid()) <= radius)
                .map(|(n, _, _)| n.id.clone())
                .collect();
            SceneFact {
                object_id: o.id.clone(),
                scene_index,
                category: o.category.clone(),
                referring_expression,
                attributes: o.attributes.clone(),
                centroid: o.centroid(),
                depth: *depth,
                u: *u,
                neighbors,
            }
        })
        .collect();

    let mut category_counts = BTreeMap::new();
    for o in &scene.objects {
        *category_counts.entry(o.category.clone()).or_insert(0) += 1;
    }
    FactSheet { facts, category_counts }
}

fn describe(o: &SceneObject, keys: &[&str]) -> String {
    let mut words = vec!["the".to_string()];
    for key in ADJECTIVE_ORDER {
        if keys.contains(&key) {
            words.extend(o.attribute(key).map(str::to_string));
        }
    }
    words.push(o.category.clone());
    if keys.contains(&"state") {
        if let Some(state) = o.attribute("state") {
            words.push(format!("that is {state}"));
        }
    }
    words.join(" ")
}

/// "the <color> <category>", with more attributes and finally a left-to-right
/// position added while objects of the same category remain indistinguishable.
fn referring_expressions(objects: &[&SceneObject], us: &[f64]) -> Vec<String> {
    let mut out = vec![String::new(); objects.len()];
    let categories: BTreeSet<&str> = objects.iter().map(|o| o.category.as_str()).collect();
    let detail: [&[&str]; 4] =
        [&["color"], &["color", "material"], &["color", "material", "shape"], &["color", "material", "shape", "state"]];
    for cat in categories {
        let group: Vec<usize> = (0..objects.len()).filter(|&i| objects[i].category == cat).collect();
        let mut resolved = false;
        for keys in detail {
            let names: Vec<String> = group.iter().map(|&i| describe(objects[i], keys)).collect();
            if names.iter().collect::<BTreeSet<_>>().len() == names.len() {
                for (&i, n) in group.iter().zip(names) {
                    out[i] = n;
                }
                resolved = true;
                break;
            }
        }
        if !resolved {
            let mut order = group.clone();
            order.sort_by(|&a, &b| us[a].total_cmp(&us[b]).then(objects[a].id.cmp(&objects[b].id)));
            let last = order.len() - 1;
            for (rank, &i) in order.iter().enumerate() {
                let base = describe(objects[i], detail[0]);
                out[i] = match rank {
                    0 => format!("{base} on the left"),
                    r if r == last => format!("{base} on the right"),
                    r => format!("{base} {} from the left", ordinal_word(r + 1)),
                };
            }
        }
    }
    out
}

pub fn ordinal_word(n: usize) -> String {
    const WORDS: [&str; 10] =
        ["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth"];
    match n {
        1..=10 => WORDS[n - 1].to_string(),
        _ => format!("{n}th"),
    }
}

/// True when `text` mentions hand or gesture vocabulary.
pub fn mentions_gesture(text: &str) -> bool {
    let lower = text.to_lowercase();
    GESTURE_STOP_LIST.iter().any(|w| lower.contains(w))
}
