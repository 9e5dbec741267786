use once_cell::sync::Lazy;
use regex::Regex;

static CONTROL_TOKENS: Lazy<Vec<String>> = Lazy::new(|| data_lines(include_str!("../../data/control_tokens.txt")));
static BOILERPLATE: Lazy<Vec<String>> = Lazy::new(|| data_lines(include_str!("../../data/boilerplate_prefixes.txt")));

static ANSWER_TAG: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?is)<answer>(.*?)</answer>").expect("valid regex"));
static PARENTHESIZED: Lazy<Regex> = Lazy::new(|| Regex::new(r"\(([A-Z])\)").expect("valid regex"));
static PUNCTUATED: Lazy<Regex> = Lazy::new(|| Regex::new(r"\b([A-Z])[.)\]]").expect("valid regex"));
static TERMINAL: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)answer\s*:\s*\(?([A-Z])\)?\.?\s*$").expect("valid regex"));

fn data_lines(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_string).collect()
}

fn single_letter(s: &str, num_options: usize) -> Option<usize> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => letter_index(c, num_options),
        _ => None,
    }
}

fn letter_index(c: char, num_options: usize) -> Option<usize> {
    if c.is_ascii_uppercase() {
        let i = (c as u8 - b'A') as usize;
        (i < num_options).then_some(i)
    } else {
        None
    }
}

/// Removes answer markup, trailing control tokens and leading boilerplate.
pub fn clean_output(raw: &str) -> String {
    let mut s = match ANSWER_TAG.captures(raw) {
        Some(c) => c[1].to_string(),
        None => raw.to_string(),
    };
    loop {
        let trimmed = s.trim_end();
        match CONTROL_TOKENS.iter().find(|t| trimmed.ends_with(t.as_str())) {
            Some(t) => s = trimmed[..trimmed.len() - t.len()].to_string(),
            None => break,
        }
    }
    loop {
        let trimmed = s.trim_start();
        let lower = trimmed.to_lowercase();
        match BOILERPLATE.iter().find(|b| lower.starts_with(&b.to_lowercase())) {
            Some(b) => s = trimmed[b.len()..].to_string(),
            None => break,
        }
    }
    s.trim().to_string()
}

/// Option index named by a model's raw output, or `None` when invalid.
///
/// Ladder: whole-string letter; then on the cleaned text a whole-string letter,
/// "(X)", "X." / "X)" / "X]", and a terminal "Answer: X". Only letters below
/// `num_options` count; the first rule with a valid letter wins.
pub fn extract_choice(raw: &str, num_options: usize) -> Option<usize> {
    let num_options = num_options.min(26);
    if let Some(i) = single_letter(raw.trim(), num_options) {
        return Some(i);
    }
    let cleaned = clean_output(raw);
    if let Some(i) = single_letter(&cleaned, num_options) {
        return Some(i);
    }
    for rule in [&*PARENTHESIZED, &*PUNCTUATED] {
        let hit = rule
            .captures_iter(&cleaned)
            .find_map(|c| letter_index(c[1].chars().next().expect("one letter"), num_options));
        if hit.is_some() {
            return hit;
        }
    }
    TERMINAL.captures(&cleaned).and_then(|c| letter_index(c[1].chars().next().expect("one letter"), num_options))
}

pub fn letter(index: usize) -> char {
    (b'A' + index as u8) as char
}
