use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::facts::{FactSheet, SceneFact};
use super::templates::{sector, QuestionSpec, StructuredQa};
use crate::error::QaError;
use crate::seed;
use crate::vocab::{self, CATEGORIES};

pub const NUM_DISTRACTORS: usize = 4;
pub const BINARY_OPTIONS: [&str; 2] = ["Yes", "No"];
/// Counting distractors lie within this distance of the true count.
pub const COUNT_WINDOW: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NegativeStrategy {
    VisibleSource,
    PlausibleFake,
    LogicalOpposite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSet {
    pub options: Vec<String>,
    pub answer_index: usize,
    /// Strategy per option; `None` marks the correct answer.
    pub strategies: Vec<Option<NegativeStrategy>>,
}

const STATE_OPPOSITES: &[(&str, &str)] = &[
    ("empty", "full"),
    ("open", "closed"),
    ("capped", "uncapped"),
    ("sharpened", "blunt"),
    ("whole", "sliced"),
    ("on", "off"),
    ("clean", "dirty"),
];

fn opposite_state(v: &str) -> Option<&'static str> {
    STATE_OPPOSITES.iter().find_map(|(a, b)| {
        if *a == v {
            Some(*b)
        } else if *b == v {
            Some(*a)
        } else {
            None
        }
    })
}

/// Candidate pools per strategy, each in preference order.
struct Pools {
    visible: Vec<String>,
    fake: Vec<String>,
    opposite: Vec<String>,
}

fn neighbors_first<'a>(sheet: &'a FactSheet, t: &SceneFact) -> Vec<&'a SceneFact> {
    let mut near: Vec<&SceneFact> = t.neighbors.iter().filter_map(|id| sheet.fact(id)).collect();
    near.extend(sheet.facts.iter().filter(|f| f.object_id != t.object_id && !t.neighbors.contains(&f.object_id)));
    near
}

fn pools(
    qa: &StructuredQa,
    sheet: &FactSheet,
    referents: &[String],
    rng: &mut impl rand::Rng,
) -> Result<Pools, QaError> {
    let tid = qa.target_ids.first().ok_or_else(|| QaError::UnknownObject("no target".into()))?;
    let t = sheet.fact(tid).ok_or_else(|| QaError::UnknownObject(tid.clone()))?;
    let mut p = Pools { visible: Vec::new(), fake: Vec::new(), opposite: Vec::new() };
    match &qa.spec {
        QuestionSpec::Reference { .. } | QuestionSpec::Temporal { .. } => {
            // other pointed objects are the most confusable
            let mut others: Vec<&SceneFact> = referents.iter().filter_map(|r| sheet.fact(r)).collect();
            let mut rest = neighbors_first(sheet, t);
            rest.shuffle(rng);
            others.extend(rest);
            p.visible = others.iter().map(|f| f.referring_expression.clone()).collect();
            let mut fakes: Vec<String> = Vec::new();
            let colors = vocab::plausible_values(&t.category, "color");
            for c in colors {
                fakes.push(format!("the {c} {}", t.category));
            }
            fakes.shuffle(rng);
            let mut elsewhere: Vec<String> = CATEGORIES
                .iter()
                .filter(|c| c.name != t.category)
                .flat_map(|c| c.colors.iter().map(move |col| format!("the {col} {}", c.name)))
                .collect();
            elsewhere.shuffle(rng);
            fakes.extend(elsewhere);
            let real: BTreeSet<&str> = sheet.facts.iter().map(|f| f.referring_expression.as_str()).collect();
            p.fake = fakes.into_iter().filter(|f| !real.contains(f.as_str())).collect();
        }
        QuestionSpec::Attribute { attribute, .. } => {
            p.visible = neighbors_first(sheet, t).iter().filter_map(|f| f.attributes.get(attribute).cloned()).collect();
            let mut own: Vec<String> =
                vocab::plausible_values(&t.category, attribute).iter().map(|s| s.to_string()).collect();
            own.shuffle(rng);
            let mut global: Vec<String> = vocab::all_values(attribute).iter().map(|s| s.to_string()).collect();
            global.shuffle(rng);
            p.fake = own.into_iter().chain(global).collect();
            if attribute == "state" {
                p.opposite.extend(opposite_state(&qa.answer).map(str::to_string));
            }
        }
        QuestionSpec::Counting { .. } => {
            let k: usize = qa.answer.parse().map_err(|_| QaError::UnknownObject(qa.answer.clone()))?;
            let lo = k.saturating_sub(COUNT_WINDOW).max(1);
            let window: Vec<usize> = (lo..=k + COUNT_WINDOW).filter(|v| *v != k).collect();
            let mut seen: Vec<usize> = sheet
                .category_counts
                .iter()
                .filter(|(c, _)| **c != t.category)
                .map(|(_, n)| *n)
                .filter(|n| window.contains(n))
                .collect();
            seen.shuffle(rng);
            p.visible = seen.iter().map(usize::to_string).collect();
            let mut rest = window.clone();
            rest.shuffle(rng);
            p.fake = rest.iter().map(usize::to_string).collect();
        }
        QuestionSpec::SpatialSector { anchor_id, .. } => {
            let a = sheet.fact(anchor_id).ok_or_else(|| QaError::UnknownObject(anchor_id.clone()))?;
            let truth = sector(t, a).ok_or_else(|| QaError::UnknownObject("no sector".into()))?;
            p.visible = neighbors_first(sheet, t)
                .iter()
                .filter(|f| f.object_id != a.object_id)
                .filter_map(|f| sector(f, a))
                .map(|s| s.phrase(&a.referring_expression))
                .collect();
            let mut adjacent: Vec<String> =
                truth.adjacent().iter().map(|s| s.phrase(&a.referring_expression)).collect();
            adjacent.shuffle(rng);
            let mut rest: Vec<String> = super::templates::Sector::RING
                .iter()
                .filter(|s| **s != truth.opposite() && !truth.adjacent().contains(s))
                .map(|s| s.phrase(&a.referring_expression))
                .collect();
            rest.shuffle(rng);
            p.fake = adjacent.into_iter().chain(rest).collect();
            p.opposite = vec![truth.opposite().phrase(&a.referring_expression)];
        }
        QuestionSpec::SpatialBinary { .. } | QuestionSpec::Feedback { .. } => {}
    }
    Ok(p)
}

/// Four distractors in priority order VisibleSource → PlausibleFake →
/// LogicalOpposite; when a logical opposite exists it always keeps one slot.
/// Options are then shuffled with a seeded permutation.
pub fn generate_negatives(
    qa: &StructuredQa,
    sheet: &FactSheet,
    referents: &[String],
    seed: u64,
) -> Result<OptionSet, QaError> {
    if qa.spec.is_binary() {
        let options: Vec<String> = BINARY_OPTIONS.iter().map(|s| s.to_string()).collect();
        let answer_index = options
            .iter()
            .position(|o| *o == qa.answer)
            .ok_or_else(|| QaError::ValidationFailed(vec![format!("binary answer {:?} is not Yes/No", qa.answer)]))?;
        let strategies =
            (0..2).map(|i| if i == answer_index { None } else { Some(NegativeStrategy::LogicalOpposite) }).collect();
        return Ok(OptionSet { options, answer_index, strategies });
    }

    let mut rng = seed::rng(seed, "negatives", 0);
    let p = pools(qa, sheet, referents, &mut rng)?;
    let mut taken: Vec<(String, NegativeStrategy)> = Vec::with_capacity(NUM_DISTRACTORS);
    let usable =
        |v: &String, taken: &[(String, NegativeStrategy)]| *v != qa.answer && taken.iter().all(|(t, _)| t != v);

    let reserved_opposite = p.opposite.iter().find(|v| usable(v, &taken)).cloned();
    let budget = NUM_DISTRACTORS - reserved_opposite.is_some() as usize;
    for (pool, kind) in [(&p.visible, NegativeStrategy::VisibleSource), (&p.fake, NegativeStrategy::PlausibleFake)] {
        for v in pool {
            if taken.len() >= budget {
                break;
            }
            if usable(v, &taken) && reserved_opposite.as_ref() != Some(v) {
                taken.push((v.clone(), kind));
            }
        }
    }
    if let Some(o) = reserved_opposite {
        taken.push((o, NegativeStrategy::LogicalOpposite));
    }
    if taken.len() < NUM_DISTRACTORS {
        return Err(QaError::InsufficientDistractors { found: taken.len() });
    }

    let mut entries: Vec<(String, Option<NegativeStrategy>)> = vec![(qa.answer.clone(), None)];
    entries.extend(taken.into_iter().map(|(v, k)| (v, Some(k))));
    entries.shuffle(&mut rng);
    let answer_index = entries.iter().position(|(_, k)| k.is_none()).expect("answer present");
    let (options, strategies) = entries.into_iter().unzip();
    Ok(OptionSet { options, answer_index, strategies })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::geometry::Vec3;
    use crate::qa::templates::{Relation, TaskCategory};

    fn fact(id: &str, cat: &str, color: &str, u: f64, depth: f64, neighbors: &[&str]) -> SceneFact {
        let mut attributes = BTreeMap::new();
        attributes.insert("color".into(), color.into());
        attributes.insert("state".into(), "empty".into());
        SceneFact {
            object_id: id.into(),
            scene_index: 1,
            category: cat.into(),
            referring_expression: format!("the {color} {cat}"),
            attributes,
            centroid: Vec3::ZERO,
            depth,
            u,
            neighbors: neighbors.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn sheet(facts: Vec<SceneFact>) -> FactSheet {
        let mut category_counts = BTreeMap::new();
        for f in &facts {
            *category_counts.entry(f.category.clone()).or_insert(0) += 1;
        }
        FactSheet { facts, category_counts }
    }

    fn qa(spec: QuestionSpec, answer: &str, target: &str) -> StructuredQa {
        StructuredQa {
            category: spec.category(),
            spec,
            structured_question: "<object1>".into(),
            answer: answer.into(),
            target_ids: vec![target.into()],
        }
    }

    #[test]
    fn neighbor_colors_precede_fakes() {
        let s = sheet(vec![
            fact("mug#1", "mug", "red", 0.0, 1.0, &["book#2", "pen#3"]),
            fact("book#2", "book", "blue", 0.0, 1.0, &[]),
            fact("pen#3", "pen", "green", 0.0, 1.0, &[]),
        ]);
        let q = qa(QuestionSpec::Attribute { ordinal: 1, attribute: "color".into() }, "red", "mug#1");
        let o = generate_negatives(&q, &s, &["mug#1".into()], 3).unwrap();
        assert_eq!(o.options.len(), 5);
        assert_eq!(o.options[o.answer_index], "red");
        for c in ["blue", "green"] {
            let i = o.options.iter().position(|x| x == c).unwrap();
            assert_eq!(o.strategies[i], Some(NegativeStrategy::VisibleSource));
        }
    }

    #[test]
    fn spatial_keeps_the_opposite() {
        let s =
            sheet(vec![fact("mug#1", "mug", "red", 100.0, 1.0, &[]), fact("sink#2", "sink", "white", 300.0, 1.0, &[])]);
        let q = qa(
            QuestionSpec::SpatialSector { ordinal: 1, anchor_id: "sink#2".into() },
            "left of the white sink",
            "mug#1",
        );
        let o = generate_negatives(&q, &s, &["mug#1".into()], 0).unwrap();
        assert!(o.options.contains(&"right of the white sink".to_string()));
        assert_eq!(o.options[o.answer_index], "left of the white sink");
    }

    #[test]
    fn binary_options_are_fixed() {
        let s = sheet(vec![fact("mug#1", "mug", "red", 0.0, 1.0, &[])]);
        let q = qa(QuestionSpec::Feedback { ordinal: 1, goal: "thirsty".into() }, "Yes", "mug#1");
        let o = generate_negatives(&q, &s, &["mug#1".into()], 0).unwrap();
        assert_eq!(o.options, vec!["Yes", "No"]);
        assert_eq!(o.answer_index, 0);
        let q = qa(
            QuestionSpec::SpatialBinary { ordinal: 1, anchor_id: "x".into(), relation: Relation::Left },
            "No",
            "mug#1",
        );
        assert_eq!(generate_negatives(&q, &s, &["mug#1".into()], 0).unwrap().answer_index, 1);
    }

    #[test]
    fn count_distractors_stay_in_window() {
        let s = sheet(vec![fact("pen#1", "pen", "red", 0.0, 1.0, &[])]);
        for seed in 0..30 {
            let o =
                generate_negatives(&qa(QuestionSpec::Counting { ordinal: 1 }, "1", "pen#1"), &s, &[], seed).unwrap();
            let mut v: Vec<usize> = o.options.iter().map(|x| x.parse().unwrap()).collect();
            v.sort();
            assert_eq!(v, vec![1, 2, 3, 4, 5]);
        }
        let o = generate_negatives(&qa(QuestionSpec::Counting { ordinal: 1 }, "6", "pen#1"), &s, &[], 9).unwrap();
        assert!(o.options.iter().all(|x| (2..=10).contains(&x.parse::<usize>().unwrap())));
    }

    #[test]
    fn permutation_is_seeded() {
        let s = sheet(vec![fact("mug#1", "mug", "red", 0.0, 1.0, &[])]);
        let q = qa(QuestionSpec::Reference { ordinal: 1, phrasing: 0 }, "the red mug", "mug#1");
        let a = generate_negatives(&q, &s, &["mug#1".into()], 5).unwrap();
        let b = generate_negatives(&q, &s, &["mug#1".into()], 5).unwrap();
        assert_eq!(a, b);
        let distinct: BTreeSet<_> = a.options.iter().collect();
        assert_eq!(distinct.len(), 5);
        assert_eq!(q.category, TaskCategory::Reference);
    }
}
