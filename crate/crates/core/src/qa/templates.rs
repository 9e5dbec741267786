use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::facts::{FactSheet, SceneFact};
use crate::error::QaError;
use crate::seed;
use crate::vocab::{AFFORDANCES, ATTRIBUTE_KEYS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskCategory {
    Reference,
    Temporal,
    Counting,
    Attribute,
    Spatial,
    Feedback,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 6] = [
        TaskCategory::Reference,
        TaskCategory::Temporal,
        TaskCategory::Counting,
        TaskCategory::Attribute,
        TaskCategory::Spatial,
        TaskCategory::Feedback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskCategory::Reference => "Reference",
            TaskCategory::Temporal => "Temporal",
            TaskCategory::Counting => "Counting",
            TaskCategory::Attribute => "Attribute",
            TaskCategory::Spatial => "Spatial",
            TaskCategory::Feedback => "Feedback",
        }
    }

    pub fn parse(s: &str) -> Option<TaskCategory> {
        TaskCategory::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for TaskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pixel dead-zone for left/right.
pub const DEAD_ZONE_PX: f64 = 10.0;
/// Depth dead-zone for closer/farther, meters.
pub const DEAD_ZONE_DEPTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Left,
    Right,
    Closer,
    Farther,
}

impl Relation {
    pub fn opposite(self) -> Relation {
        match self {
            Relation::Left => Relation::Right,
            Relation::Right => Relation::Left,
            Relation::Closer => Relation::Farther,
            Relation::Farther => Relation::Closer,
        }
    }

    fn template(self) -> &'static str {
        match self {
            Relation::Left => "Is {t} to the left of {a}?",
            Relation::Right => "Is {t} to the right of {a}?",
            Relation::Closer => "Is {t} closer to me than {a}?",
            Relation::Farther => "Is {t} farther from me than {a}?",
        }
    }
}

/// Eight exclusive regions around an anchor, in ring order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Left,
    FrontLeft,
    Front,
    FrontRight,
    Right,
    BackRight,
    Back,
    BackLeft,
}

impl Sector {
    pub const RING: [Sector; 8] = [
        Sector::Left,
        Sector::FrontLeft,
        Sector::Front,
        Sector::FrontRight,
        Sector::Right,
        Sector::BackRight,
        Sector::Back,
        Sector::BackLeft,
    ];

    fn index(self) -> usize {
        Sector::RING.iter().position(|s| *s == self).expect("ring is complete")
    }

    pub fn opposite(self) -> Sector {
        Sector::RING[(self.index() + 4) % 8]
    }

    pub fn adjacent(self) -> [Sector; 2] {
        let i = self.index();
        [Sector::RING[(i + 7) % 8], Sector::RING[(i + 1) % 8]]
    }

    pub fn phrase(self, anchor: &str) -> String {
        match self {
            Sector::Left => format!("left of {anchor}"),
            Sector::FrontLeft => format!("front-left of {anchor}"),
            Sector::Front => format!("in front of {anchor}"),
            Sector::FrontRight => format!("front-right of {anchor}"),
            Sector::Right => format!("right of {anchor}"),
            Sector::BackRight => format!("back-right of {anchor}"),
            Sector::Back => format!("behind {anchor}"),
            Sector::BackLeft => format!("back-left of {anchor}"),
        }
    }
}

/// Left/right of `t` relative to `a`, `None` inside the dead-zone.
pub fn horizontal(t: &SceneFact, a: &SceneFact) -> Option<Relation> {
    let du = t.u - a.u;
    if !du.is_finite() || du.abs() <= DEAD_ZONE_PX {
        None
    } else if du < 0.0 {
        Some(Relation::Left)
    } else {
        Some(Relation::Right)
    }
}

/// Closer/farther of `t` relative to `a`, `None` inside the dead-zone.
pub fn depth_relation(t: &SceneFact, a: &SceneFact) -> Option<Relation> {
    let dd = t.depth - a.depth;
    if !dd.is_finite() || dd.abs() <= DEAD_ZONE_DEPTH {
        None
    } else if dd < 0.0 {
        Some(Relation::Closer)
    } else {
        Some(Relation::Farther)
    }
}

pub fn relation_holds(t: &SceneFact, a: &SceneFact, r: Relation) -> Option<bool> {
    let actual = match r {
        Relation::Left | Relation::Right => horizontal(t, a),
        Relation::Closer | Relation::Farther => depth_relation(t, a),
    }?;
    Some(actual == r)
}

pub fn sector(t: &SceneFact, a: &SceneFact) -> Option<Sector> {
    use Relation::*;
    Some(match (horizontal(t, a), depth_relation(t, a)) {
        (None, None) => return None,
        (Some(Left), None) => Sector::Left,
        (Some(Right), None) => Sector::Right,
        (None, Some(Closer)) => Sector::Front,
        (None, Some(Farther)) => Sector::Back,
        (Some(Left), Some(Closer)) => Sector::FrontLeft,
        (Some(Right), Some(Closer)) => Sector::FrontRight,
        (Some(Left), Some(Farther)) => Sector::BackLeft,
        (Some(Right), Some(Farther)) => Sector::BackRight,
        _ => unreachable!("horizontal and depth relations are disjoint"),
    })
}

const WHAT_IS: [&str; 3] = ["What is {t}?", "Which object is {t}?", "Can you tell me what {t} is?"];

fn attribute_template(key: &str) -> &'static str {
    match key {
        "color" => "What color is {t}?",
        "material" => "What material is {t} made of?",
        "shape" => "What shape is {t}?",
        _ => "What state is {t} in?",
    }
}

const COUNTING: &str = "How many objects of the same kind as {t} are in the scene?";
const SECTOR_TEMPLATE: &str = "Where is {t} relative to {a}?";

/// Template parameters sufficient to recompute the answer from facts and referents.
/// `ordinal` is the 1-based position of the asked-about referent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "snake_case")]
pub enum QuestionSpec {
    Reference { ordinal: usize, phrasing: usize },
    Temporal { ordinal: usize, phrasing: usize },
    Attribute { ordinal: usize, attribute: String },
    Counting { ordinal: usize },
    SpatialBinary { ordinal: usize, anchor_id: String, relation: Relation },
    SpatialSector { ordinal: usize, anchor_id: String },
    Feedback { ordinal: usize, goal: String },
}

impl QuestionSpec {
    pub fn ordinal(&self) -> usize {
        match self {
            QuestionSpec::Reference { ordinal, .. }
            | QuestionSpec::Temporal { ordinal, .. }
            | QuestionSpec::Attribute { ordinal, .. }
            | QuestionSpec::Counting { ordinal }
            | QuestionSpec::SpatialBinary { ordinal, .. }
            | QuestionSpec::SpatialSector { ordinal, .. }
            | QuestionSpec::Feedback { ordinal, .. } => *ordinal,
        }
    }

    pub fn category(&self) -> TaskCategory {
        match self {
            QuestionSpec::Reference { .. } => TaskCategory::Reference,
            QuestionSpec::Temporal { .. } => TaskCategory::Temporal,
            QuestionSpec::Attribute { .. } => TaskCategory::Attribute,
            QuestionSpec::Counting { .. } => TaskCategory::Counting,
            QuestionSpec::SpatialBinary { .. } | QuestionSpec::SpatialSector { .. } => TaskCategory::Spatial,
            QuestionSpec::Feedback { .. } => TaskCategory::Feedback,
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, QuestionSpec::SpatialBinary { .. } | QuestionSpec::Feedback { .. })
    }

    pub fn anchor_id(&self) -> Option<&str> {
        match self {
            QuestionSpec::SpatialBinary { anchor_id, .. } | QuestionSpec::SpatialSector { anchor_id, .. } => {
                Some(anchor_id)
            }
            _ => None,
        }
    }
}

/// A templated question before distractors and rephrasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredQa {
    pub category: TaskCategory,
    pub spec: QuestionSpec,
    /// Question with `<objectN>` placeholders for pointed objects.
    pub structured_question: String,
    pub answer: String,
    pub target_ids: Vec<String>,
}

fn infeasible(category: TaskCategory, reason: impl Into<String>) -> QaError {
    QaError::CategoryInfeasible { category: category.name().to_string(), reason: reason.into() }
}

fn target<'a>(sheet: &'a FactSheet, referents: &[String], ordinal: usize) -> Result<&'a SceneFact, QaError> {
    let id = ordinal
        .checked_sub(1)
        .and_then(|i| referents.get(i))
        .ok_or_else(|| QaError::UnknownObject(format!("referent #{ordinal}")))?;
    sheet.fact(id).ok_or_else(|| QaError::UnknownObject(id.clone()))
}

/// The correct answer string, recomputed from facts and referents only.
pub fn answer_for(spec: &QuestionSpec, sheet: &FactSheet, referents: &[String]) -> Result<String, QaError> {
    let t = target(sheet, referents, spec.ordinal())?;
    let anchor = |id: &str| sheet.fact(id).ok_or_else(|| QaError::UnknownObject(id.to_string()));
    let yes_no = |b: bool| if b { "Yes" } else { "No" }.to_string();
    Ok(match spec {
        QuestionSpec::Reference { .. } | QuestionSpec::Temporal { .. } => t.referring_expression.clone(),
        QuestionSpec::Attribute { attribute, .. } => t
            .attributes
            .get(attribute)
            .cloned()
            .ok_or_else(|| infeasible(TaskCategory::Attribute, format!("{} has no {attribute}", t.object_id)))?,
        QuestionSpec::Counting { .. } => sheet.count_of(&t.category).to_string(),
        QuestionSpec::SpatialBinary { anchor_id, relation, .. } => {
            let a = anchor(anchor_id)?;
            yes_no(
                relation_holds(t, a, *relation)
                    .ok_or_else(|| infeasible(TaskCategory::Spatial, "relation inside dead-zone"))?,
            )
        }
        QuestionSpec::SpatialSector { anchor_id, .. } => {
            let a = anchor(anchor_id)?;
            sector(t, a)
                .ok_or_else(|| infeasible(TaskCategory::Spatial, "anchor coincides with target"))?
                .phrase(&a.referring_expression)
        }
        QuestionSpec::Feedback { goal, .. } => {
            let aff = AFFORDANCES
                .iter()
                .find(|a| a.goal == goal)
                .ok_or_else(|| infeasible(TaskCategory::Feedback, format!("unknown goal {goal}")))?;
            yes_no(aff.categories.contains(&t.category.as_str()))
        }
    })
}

/// Whole-word, case-insensitive containment.
pub fn contains_word(text: &str, word: &str) -> bool {
    let text = text.to_lowercase();
    let word = word.to_lowercase();
    text.match_indices(&word).any(|(i, _)| {
        let before = text[..i].chars().next_back();
        let after = text[i + word.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

/// Anchor candidates: visible non-referents of another category whose name
/// does not mention the target's category.
pub fn anchor_candidates<'a>(sheet: &'a FactSheet, referents: &[String], t: &SceneFact) -> Vec<&'a SceneFact> {
    let target_categories: Vec<&str> =
        referents.iter().filter_map(|r| sheet.fact(r)).map(|f| f.category.as_str()).collect();
    sheet
        .facts
        .iter()
        .filter(|a| !referents.contains(&a.object_id))
        .filter(|a| a.u.is_finite())
        .filter(|a| {
            !target_categories.contains(&a.category.as_str())
                && !target_categories.iter().any(|c| contains_word(&a.referring_expression, c))
                && a.category != t.category
        })
        .collect()
}

fn fill(template: &str, t: &SceneFact, anchor: Option<&SceneFact>) -> String {
    let mut s = template.replace("{t}", &format!("<object{}>", t.scene_index));
    if let Some(a) = anchor {
        s = s.replace("{a}", &a.referring_expression);
    }
    s
}

/// Instantiates one question of `category`; the answer comes from [`answer_for`].
pub fn generate_question(
    sheet: &FactSheet,
    referents: &[String],
    category: TaskCategory,
    seed: u64,
    spatial_binary_share: f64,
) -> Result<StructuredQa, QaError> {
    generate_question_avoiding(sheet, referents, category, seed, spatial_binary_share, &BTreeSet::new())
}

/// Like [`generate_question`], but Feedback goals whose structured question is
/// already in `asked` are not drawn.
pub fn generate_question_avoiding(
    sheet: &FactSheet,
    referents: &[String],
    category: TaskCategory,
    seed: u64,
    spatial_binary_share: f64,
    asked: &BTreeSet<String>,
) -> Result<StructuredQa, QaError> {
    if referents.is_empty() {
        return Err(infeasible(category, "no pointed object"));
    }
    let mut rng = seed::rng(seed, "question", 0);
    let n = referents.len();
    let (spec, t, anchor): (QuestionSpec, &SceneFact, Option<&SceneFact>) = match category {
        TaskCategory::Reference => {
            if n != 1 {
                return Err(infeasible(category, "several objects were pointed at"));
            }
            let phrasing = rng.gen_range(0..WHAT_IS.len());
            (QuestionSpec::Reference { ordinal: 1, phrasing }, target(sheet, referents, 1)?, None)
        }
        TaskCategory::Temporal => {
            if n < 2 {
                return Err(infeasible(category, "needs at least two pointing gestures"));
            }
            let ordinal = rng.gen_range(1..=n);
            let phrasing = rng.gen_range(0..WHAT_IS.len());
            (QuestionSpec::Temporal { ordinal, phrasing }, target(sheet, referents, ordinal)?, None)
        }
        TaskCategory::Attribute => {
            let ordinal = rng.gen_range(1..=n);
            let t = target(sheet, referents, ordinal)?;
            let keys: Vec<&str> = ATTRIBUTE_KEYS.iter().copied().filter(|k| t.attributes.contains_key(*k)).collect();
            let key = keys.choose(&mut rng).ok_or_else(|| infeasible(category, "target has no attributes"))?;
            (QuestionSpec::Attribute { ordinal, attribute: key.to_string() }, t, None)
        }
        TaskCategory::Counting => {
            let ordinal = rng.gen_range(1..=n);
            (QuestionSpec::Counting { ordinal }, target(sheet, referents, ordinal)?, None)
        }
        TaskCategory::Spatial => {
            let ordinal = rng.gen_range(1..=n);
            let t = target(sheet, referents, ordinal)?;
            if !t.u.is_finite() {
                return Err(infeasible(category, "target is off-screen at the reference frame"));
            }
            let anchors = anchor_candidates(sheet, referents, t);
            let binary_first = rng.gen_bool(spatial_binary_share.clamp(0.0, 1.0));
            let mut chosen = None;
            for binary in [binary_first, !binary_first] {
                if binary {
                    let mut options: Vec<(&SceneFact, Relation)> = Vec::new();
                    for a in &anchors {
                        options.extend(horizontal(t, a).map(|r| (*a, r)));
                        options.extend(depth_relation(t, a).map(|r| (*a, r)));
                    }
                    if let Some((a, truth)) = options.choose(&mut rng).copied() {
                        // balanced polarity: ask the true relation or its opposite
                        let relation = if rng.gen_bool(0.5) { truth } else { truth.opposite() };
                        chosen = Some((
                            QuestionSpec::SpatialBinary { ordinal, anchor_id: a.object_id.clone(), relation },
                            a,
                        ));
                        break;
                    }
                } else {
                    let usable: Vec<&SceneFact> = anchors.iter().copied().filter(|a| sector(t, a).is_some()).collect();
                    if let Some(a) = usable.choose(&mut rng).copied() {
                        chosen = Some((QuestionSpec::SpatialSector { ordinal, anchor_id: a.object_id.clone() }, a));
                        break;
                    }
                }
            }
            let (spec, a) = chosen.ok_or_else(|| infeasible(category, "no usable anchor object"))?;
            (spec, t, Some(a))
        }
        TaskCategory::Feedback => {
            let ordinal = rng.gen_range(1..=n);
            let t = target(sheet, referents, ordinal)?;
            let goals = |yes: bool| -> Vec<&str> {
                AFFORDANCES
                    .iter()
                    .filter(|a| a.categories.contains(&t.category.as_str()) == yes)
                    .filter(|a| !contains_word(a.ask, &t.category))
                    .filter(|a| !asked.contains(&fill(&a.ask.replace("{obj}", "{t}"), t, None)))
                    .map(|a| a.goal)
                    .collect()
            };
            // targets that could only ever be answered one way would skew Yes/No
            let (yes, no) = (goals(true), goals(false));
            if yes.is_empty() || no.is_empty() {
                return Err(infeasible(category, "target does not admit both answers"));
            }
            let pool = if rng.gen_bool(0.5) { yes } else { no };
            let goal = pool.choose(&mut rng).expect("non-empty");
            (QuestionSpec::Feedback { ordinal, goal: goal.to_string() }, t, None)
        }
    };

    let template = match &spec {
        QuestionSpec::Reference { phrasing, .. } | QuestionSpec::Temporal { phrasing, .. } => {
            WHAT_IS[*phrasing].to_string()
        }
        QuestionSpec::Attribute { attribute, .. } => attribute_template(attribute).to_string(),
        QuestionSpec::Counting { .. } => COUNTING.to_string(),
        QuestionSpec::SpatialBinary { relation, .. } => relation.template().to_string(),
        QuestionSpec::SpatialSector { .. } => SECTOR_TEMPLATE.to_string(),
        QuestionSpec::Feedback { goal, .. } => {
            AFFORDANCES.iter().find(|a| a.goal == goal).expect("goal from table").ask.replace("{obj}", "{t}")
        }
    };
    let answer = answer_for(&spec, sheet, referents)?;
    Ok(StructuredQa {
        category,
        structured_question: fill(&template, t, anchor),
        answer,
        target_ids: vec![t.object_id.clone()],
        spec,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::geometry::Vec3;

    pub(crate) fn fact(id: &str, idx: usize, cat: &str, color: &str, u: f64, depth: f64) -> SceneFact {
        let mut attributes = BTreeMap::new();
        attributes.insert("color".into(), color.into());
        attributes.insert("material".into(), "plastic".into());
        attributes.insert("shape".into(), "round".into());
        attributes.insert("state".into(), "empty".into());
        SceneFact {
            object_id: id.into(),
            scene_index: idx,
            category: cat.into(),
            referring_expression: format!("the {color} {cat}"),
            attributes,
            centroid: Vec3::new(0.0, 0.0, depth),
            depth,
            u,
            neighbors: vec![],
        }
    }

    fn sheet(facts: Vec<SceneFact>) -> FactSheet {
        let mut category_counts = BTreeMap::new();
        for f in &facts {
            *category_counts.entry(f.category.clone()).or_insert(0) += 1;
        }
        FactSheet { facts, category_counts }
    }

    fn desk() -> FactSheet {
        sheet(vec![
            fact("book#1", 1, "book", "green", 100.0, 1.2),
            fact("mug#2", 2, "mug", "red", 300.0, 1.0),
            fact("pen#3", 3, "pen", "black", 420.0, 0.9),
            fact("pen#4", 4, "pen", "blue", 500.0, 1.4),
            fact("pen#5", 5, "pen", "red", 560.0, 1.1),
        ])
    }

    #[test]
    fn reference_names_the_pointed_object() {
        let q = generate_question(&desk(), &["mug#2".into()], TaskCategory::Reference, 1, 0.5).unwrap();
        assert!(q.structured_question.contains("<object2>"));
        assert_eq!(q.answer, "the red mug");
    }

    #[test]
    fn counting_counts_category_instances() {
        let q = generate_question(&desk(), &["pen#3".into()], TaskCategory::Counting, 4, 0.5).unwrap();
        assert_eq!(q.answer, "3");
    }

    #[test]
    fn temporal_needs_two_referents() {
        let e = generate_question(&desk(), &["mug#2".into()], TaskCategory::Temporal, 0, 0.5).unwrap_err();
        assert!(matches!(e, QaError::CategoryInfeasible { .. }));
        let refs = vec!["mug#2".to_string(), "book#1".to_string()];
        for s in 0..20 {
            let q = generate_question(&desk(), &refs, TaskCategory::Temporal, s, 0.5).unwrap();
            let k = q.spec.ordinal();
            assert_eq!(q.target_ids, vec![refs[k - 1].clone()]);
        }
    }

    #[test]
    fn reference_needs_a_single_referent() {
        let refs = vec!["mug#2".to_string(), "book#1".to_string()];
        assert!(generate_question(&desk(), &refs, TaskCategory::Reference, 0, 0.5).is_err());
    }

    #[test]
    fn spatial_anchor_has_another_category() {
        for s in 0..50 {
            let q = generate_question(&desk(), &["pen#3".into()], TaskCategory::Spatial, s, 0.5).unwrap();
            let anchor = q.spec.anchor_id().unwrap();
            assert!(!anchor.starts_with("pen"));
            assert!(!contains_word(&q.structured_question, "pen"));
        }
    }

    #[test]
    fn spatial_without_anchor_is_infeasible() {
        let s = sheet(vec![fact("pen#1", 1, "pen", "red", 100.0, 1.0), fact("pen#2", 2, "pen", "blue", 200.0, 1.0)]);
        assert!(generate_question(&s, &["pen#1".into()], TaskCategory::Spatial, 0, 0.5).is_err());
    }

    #[test]
    fn dead_zone_and_sectors() {
        let a = fact("a", 1, "book", "red", 300.0, 1.0);
        let left = fact("t", 2, "mug", "red", 289.0, 1.0);
        let tie = fact("t", 2, "mug", "red", 305.0, 1.04);
        let fr = fact("t", 2, "mug", "red", 400.0, 0.8);
        assert_eq!(sector(&left, &a), Some(Sector::Left));
        assert_eq!(sector(&tie, &a), None);
        assert_eq!(sector(&fr, &a), Some(Sector::FrontRight));
        assert_eq!(Sector::Left.opposite(), Sector::Right);
        assert_eq!(Sector::FrontRight.adjacent(), [Sector::Front, Sector::Right]);
        assert_eq!(relation_holds(&fr, &a, Relation::Closer), Some(true));
        assert_eq!(relation_holds(&tie, &a, Relation::Left), None);
    }

    #[test]
    fn feedback_polarity_is_balanced() {
        let mut yes = 0;
        for s in 0..400 {
            let q = generate_question(&desk(), &["mug#2".into()], TaskCategory::Feedback, s, 0.5).unwrap();
            yes += (q.answer == "Yes") as usize;
        }
        assert!((160..=240).contains(&yes), "{yes}");
    }

    #[test]
    fn word_boundaries() {
        assert!(contains_word("Is this the Mug?", "mug"));
        assert!(!contains_word("Can I eat bread?", "read"));
        assert!(!contains_word("mugs", "mug"));
    }
}
