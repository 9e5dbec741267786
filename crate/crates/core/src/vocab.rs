//! Built-in object vocabulary and the goal↔category affordance table.

pub struct CategorySpec {
    pub name: &'static str,
    pub colors: &'static [&'static str],
    pub materials: &'static [&'static str],
    pub shapes: &'static [&'static str],
    pub states: &'static [&'static str],
    /// Footprint (long side, short side) and height ranges in meters.
    pub footprint: [(f64, f64); 2],
    pub height: (f64, f64),
}

pub const CATEGORIES: &[CategorySpec] = &[
    CategorySpec {
        name: "mug",
        colors: &["red", "blue", "white", "black", "green", "yellow"],
        materials: &["ceramic", "glass", "plastic", "metal"],
        shapes: &["cylindrical"],
        states: &["empty", "full"],
        footprint: [(0.08, 0.10), (0.08, 0.10)],
        height: (0.09, 0.12),
    },
    CategorySpec {
        name: "cup",
        colors: &["white", "red", "blue", "green", "yellow", "orange"],
        materials: &["paper", "plastic", "ceramic"],
        shapes: &["cylindrical", "conical"],
        states: &["empty", "full"],
        footprint: [(0.07, 0.09), (0.07, 0.09)],
        height: (0.08, 0.12),
    },
    CategorySpec {
        name: "bottle",
        colors: &["green", "blue", "clear", "brown", "white"],
        materials: &["glass", "plastic", "metal"],
        shapes: &["cylindrical"],
        states: &["open", "closed"],
        footprint: [(0.06, 0.08), (0.06, 0.08)],
        height: (0.18, 0.28),
    },
    CategorySpec {
        name: "book",
        colors: &["red", "blue", "green", "black", "brown", "yellow"],
        materials: &["paper"],
        shapes: &["rectangular"],
        states: &["open", "closed"],
        footprint: [(0.20, 0.26), (0.14, 0.18)],
        height: (0.02, 0.05),
    },
    CategorySpec {
        name: "pen",
        colors: &["black", "blue", "red", "silver"],
        materials: &["plastic", "metal"],
        shapes: &["cylindrical"],
        states: &["capped", "uncapped"],
        footprint: [(0.13, 0.15), (0.012, 0.016)],
        height: (0.012, 0.016),
    },
    CategorySpec {
        name: "pencil",
        colors: &["yellow", "green", "red"],
        materials: &["wood"],
        shapes: &["hexagonal"],
        states: &["sharpened", "blunt"],
        footprint: [(0.16, 0.19), (0.008, 0.01)],
        height: (0.008, 0.01),
    },
    CategorySpec {
        name: "apple",
        colors: &["red", "green", "yellow"],
        materials: &["organic"],
        shapes: &["round"],
        states: &["whole", "sliced"],
        footprint: [(0.07, 0.09), (0.07, 0.09)],
        height: (0.07, 0.09),
    },
    CategorySpec {
        name: "banana",
        colors: &["yellow", "green", "brown"],
        materials: &["organic"],
        shapes: &["curved"],
        states: &["whole", "peeled"],
        footprint: [(0.17, 0.21), (0.04, 0.05)],
        height: (0.035, 0.045),
    },
    CategorySpec {
        name: "bowl",
        colors: &["white", "blue", "black", "red"],
        materials: &["ceramic", "glass", "wood", "metal"],
        shapes: &["round"],
        states: &["empty", "full"],
        footprint: [(0.14, 0.18), (0.14, 0.18)],
        height: (0.06, 0.08),
    },
    CategorySpec {
        name: "scissors",
        colors: &["red", "black", "blue", "orange"],
        materials: &["metal", "plastic"],
        shapes: &["tapered"],
        states: &["open", "closed"],
        footprint: [(0.18, 0.21), (0.07, 0.09)],
        height: (0.01, 0.015),
    },
    CategorySpec {
        name: "phone",
        colors: &["black", "white", "silver", "blue"],
        materials: &["glass", "metal", "plastic"],
        shapes: &["rectangular"],
        states: &["on", "off"],
        footprint: [(0.14, 0.16), (0.07, 0.08)],
        height: (0.008, 0.01),
    },
    CategorySpec {
        name: "remote",
        colors: &["black", "gray", "white"],
        materials: &["plastic"],
        shapes: &["rectangular"],
        states: &["on", "off"],
        footprint: [(0.17, 0.21), (0.04, 0.05)],
        height: (0.02, 0.03),
    },
    CategorySpec {
        name: "plate",
        colors: &["white", "blue", "green"],
        materials: &["ceramic", "plastic"],
        shapes: &["round", "square"],
        states: &["clean", "dirty"],
        footprint: [(0.20, 0.26), (0.20, 0.26)],
        height: (0.015, 0.025),
    },
    CategorySpec {
        name: "lamp",
        colors: &["white", "black", "silver"],
        materials: &["metal", "plastic"],
        shapes: &["conical"],
        states: &["on", "off"],
        footprint: [(0.12, 0.16), (0.12, 0.16)],
        height: (0.30, 0.40),
    },
    CategorySpec {
        name: "bread",
        colors: &["brown"],
        materials: &["organic"],
        shapes: &["rectangular", "round"],
        states: &["whole", "sliced"],
        footprint: [(0.20, 0.26), (0.10, 0.12)],
        height: (0.08, 0.11),
    },
    CategorySpec {
        name: "vase",
        colors: &["blue", "white", "green"],
        materials: &["glass", "ceramic"],
        shapes: &["cylindrical", "round"],
        states: &["empty", "full"],
        footprint: [(0.09, 0.12), (0.09, 0.12)],
        height: (0.20, 0.30),
    },
];

/// Attribute keys in the order used for disambiguation and attribute questions.
pub const ATTRIBUTE_KEYS: [&str; 4] = ["color", "material", "shape", "state"];

pub const ALL_COLORS: &[&str] = &[
    "red", "blue", "white", "black", "green", "yellow", "orange", "clear", "brown", "silver", "gray", "purple", "pink",
];
pub const ALL_MATERIALS: &[&str] = &["ceramic", "glass", "plastic", "metal", "paper", "wood", "organic"];
pub const ALL_SHAPES: &[&str] =
    &["cylindrical", "conical", "rectangular", "hexagonal", "round", "curved", "tapered", "square"];
pub const ALL_STATES: &[&str] = &[
    "empty",
    "full",
    "open",
    "closed",
    "capped",
    "uncapped",
    "sharpened",
    "blunt",
    "whole",
    "sliced",
    "peeled",
    "on",
    "off",
    "clean",
    "dirty",
];

pub fn category(name: &str) -> Option<&'static CategorySpec> {
    CATEGORIES.iter().find(|c| c.name == name)
}

/// Values a category can take for `key`, falling back to the global list.
pub fn plausible_values(category_name: &str, key: &str) -> &'static [&'static str] {
    let spec = category(category_name);
    match (key, spec) {
        ("color", Some(s)) => s.colors,
        ("material", Some(s)) => s.materials,
        ("shape", Some(s)) => s.shapes,
        ("state", Some(s)) => s.states,
        _ => all_values(key),
    }
}

pub fn all_values(key: &str) -> &'static [&'static str] {
    match key {
        "color" => ALL_COLORS,
        "material" => ALL_MATERIALS,
        "shape" => ALL_SHAPES,
        "state" => ALL_STATES,
        _ => &[],
    }
}

/// A stated goal and the categories that afford it.
pub struct Affordance {
    pub goal: &'static str,
    /// Template with a single `{obj}` slot for the object mention.
    pub ask: &'static str,
    pub categories: &'static [&'static str],
}

pub const AFFORDANCES: &[Affordance] = &[
    Affordance { goal: "thirsty", ask: "I am thirsty. Can I drink from {obj}?", categories: &["mug", "cup", "bottle"] },
    Affordance {
        goal: "write",
        ask: "I need to write a note. Can I write with {obj}?",
        categories: &["pen", "pencil"],
    },
    Affordance { goal: "hungry", ask: "I am hungry. Can I eat {obj}?", categories: &["apple", "banana", "bread"] },
    Affordance { goal: "read", ask: "I want to read for a while. Can I read {obj}?", categories: &["book"] },
    Affordance { goal: "cut", ask: "I need to cut some paper. Can I use {obj} for that?", categories: &["scissors"] },
    Affordance { goal: "call", ask: "I need to call a friend. Can I use {obj} to do that?", categories: &["phone"] },
    Affordance { goal: "channel", ask: "I want to change the TV channel. Can I use {obj}?", categories: &["remote"] },
    Affordance {
        goal: "soup",
        ask: "I want to serve some soup. Can I pour it into {obj}?",
        categories: &["bowl", "mug"],
    },
    Affordance { goal: "flowers", ask: "I picked some flowers. Can I put them in {obj}?", categories: &["vase"] },
    Affordance { goal: "light", ask: "It is too dark in here. Can I switch on {obj}?", categories: &["lamp"] },
    Affordance {
        goal: "cake",
        ask: "I want to serve a slice of cake. Can I put it on {obj}?",
        categories: &["plate", "bowl"],
    },
];

pub fn affordance(goal: &str) -> Option<&'static Affordance> {
    AFFORDANCES.iter().find(|a| a.goal == goal)
}

/// Words an object description must never contain.
pub const GESTURE_STOP_LIST: [&str; 4] = ["point", "hand", "finger", "gesture"];
