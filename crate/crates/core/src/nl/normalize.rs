//! Utterance normalization and numeric slot extraction.
//!
//! Lowercases, strips punctuation, splits on whitespace, and replaces every
//! number with `<num>`. A unit word directly after a number is folded into
//! that slot and removed from the token stream.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const NUM_TOKEN: &str = "<num>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Meters,
    MetersPerSecond,
    Seconds,
    Degrees,
    Unitless,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Meters => "meters",
            Unit::MetersPerSecond => "meters_per_second",
            Unit::Seconds => "seconds",
            Unit::Degrees => "degrees",
            Unit::Unitless => "unitless",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "meters" | "m" => Unit::Meters,
            "meters_per_second" | "m/s" => Unit::MetersPerSecond,
            "seconds" | "s" => Unit::Seconds,
            "degrees" | "deg" => Unit::Degrees,
            "unitless" | "" => Unit::Unitless,
            other => return Err(format!("unknown unit `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotValue {
    pub name: String,
    pub value: f64,
    pub unit: Unit,
}

/// A slot declared by a corpus pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("unterminated placeholder in `{0}`")]
    Unterminated(String),
    #[error("bad placeholder `{{{0}}}`")]
    BadPlaceholder(String),
    #[error("slot `{0}` appears more than once")]
    DuplicateSlot(String),
    #[error("pattern `{0}` contains a literal number; use a placeholder")]
    LiteralNumber(String),
}

#[derive(Debug, Clone)]
enum Item {
    Word(String),
    Number(f64),
    Placeholder { name: String, unit: Option<Unit> },
}

const PLACEHOLDER_MARK: char = '\u{1}';

fn unit_word(w: &str) -> Option<Unit> {
    match w {
        "m" | "meter" | "meters" | "metre" | "metres" => Some(Unit::Meters),
        "m/s" | "mps" => Some(Unit::MetersPerSecond),
        "s" | "sec" | "secs" | "second" | "seconds" => Some(Unit::Seconds),
        "°" | "deg" | "degree" | "degrees" => Some(Unit::Degrees),
        _ => None,
    }
}

/// Splits a leading decimal number off `s`, e.g. `2.5m` -> (2.5, "m").
fn split_number(s: &str) -> Option<(f64, &str)> {
    let bytes = s.as_bytes();
    let mut end = 0;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == 0 {
        return None;
    }
    if end + 1 < bytes.len() && bytes[end] == b'.' && bytes[end + 1].is_ascii_digit() {
        end += 1;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
    }
    s[..end].parse().ok().map(|v| (v, &s[end..]))
}

fn strip_punct(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).collect()
}

fn lex_raw(raw: &str, placeholders: &[(String, Option<Unit>)], out: &mut Vec<Item>) {
    if let Some(rest) = raw.strip_prefix(PLACEHOLDER_MARK) {
        if let Ok(i) = rest.parse::<usize>() {
            let (name, unit) = placeholders[i].clone();
            out.push(Item::Placeholder { name, unit });
            return;
        }
    }
    if raw == "m/s" || raw == "°" {
        out.push(Item::Word(raw.to_string()));
        return;
    }
    let trimmed = raw.trim_matches(|c: char| !(c.is_alphanumeric() || c == '°'));
    if let Some((value, suffix)) = split_number(trimmed) {
        out.push(Item::Number(value));
        if !suffix.is_empty() {
            if unit_word(suffix).is_some() {
                out.push(Item::Word(suffix.to_string()));
            } else {
                let w = strip_punct(suffix);
                if !w.is_empty() {
                    out.push(Item::Word(w));
                }
            }
        }
        return;
    }
    let w = strip_punct(raw);
    if !w.is_empty() {
        out.push(Item::Word(w));
    }
}

/// Reads a unit starting at `items[i]`; returns the unit and items consumed.
fn read_unit(items: &[Item], i: usize) -> Option<(Unit, usize)> {
    let word = |k: usize| match items.get(k) {
        Some(Item::Word(w)) => Some(w.as_str()),
        _ => None,
    };
    let first = unit_word(word(i)?)?;
    if first == Unit::Meters && word(i + 1) == Some("per") {
        if let Some(Unit::Seconds) = word(i + 2).and_then(unit_word) {
            return Some((Unit::MetersPerSecond, 3));
        }
    }
    Some((first, 1))
}

struct Normalized {
    tokens: Vec<String>,
    slots: Vec<(Option<String>, f64, Unit)>,
}

fn normalize(text: &str, placeholders: &[(String, Option<Unit>)]) -> Normalized {
    let lowered = text.to_lowercase();
    let mut items = Vec::new();
    for raw in lowered.split_whitespace() {
        lex_raw(raw, placeholders, &mut items);
    }
    let mut tokens = Vec::new();
    let mut slots = Vec::new();
    let mut i = 0;
    while i < items.len() {
        match &items[i] {
            Item::Word(w) => {
                tokens.push(w.clone());
                i += 1;
            }
            Item::Number(_) | Item::Placeholder { .. } => {
                let (name, value, explicit) = match &items[i] {
                    Item::Number(v) => (None, *v, None),
                    Item::Placeholder { name, unit } => (Some(name.clone()), 0.0, *unit),
                    Item::Word(_) => unreachable!(),
                };
                tokens.push(NUM_TOKEN.to_string());
                i += 1;
                let unit = match read_unit(&items, i) {
                    Some((u, used)) => {
                        i += used;
                        explicit.unwrap_or(u)
                    }
                    None => explicit.unwrap_or(Unit::Unitless),
                };
                slots.push((name, value, unit));
            }
        }
    }
    Normalized { tokens, slots }
}

/// Normalizes an operator utterance into pattern tokens and numeric slots in
/// reading order. Query slots are named `s0`, `s1`, ...
pub fn normalize_and_slot(utterance: &str) -> (Vec<String>, Vec<SlotValue>) {
    let n = normalize(&utterance.replace(PLACEHOLDER_MARK, " "), &[]);
    let slots = n
        .slots
        .into_iter()
        .enumerate()
        .map(|(i, (_, value, unit))| SlotValue {
            name: format!("s{i}"),
            value,
            unit,
        })
        .collect();
    (n.tokens, slots)
}

/// Normalizes a corpus pattern with `{name}` / `{name:unit}` placeholders.
///
/// A placeholder takes its unit from an explicit annotation, else from the
/// unit word that follows it, else it is unitless.
pub fn pattern_slots(pattern: &str) -> Result<(Vec<String>, Vec<SlotSpec>), PatternError> {
    let mut text = String::with_capacity(pattern.len());
    let mut placeholders: Vec<(String, Option<Unit>)> = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| PatternError::Unterminated(pattern.to_string()))?;
        let inner = &after[..close];
        let (name, unit) = match inner.split_once(':') {
            Some((n, u)) => (n.trim(), Some(u.trim().parse::<Unit>().map_err(|_| PatternError::BadPlaceholder(inner.to_string()))?)),
            None => (inner.trim(), None),
        };
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(PatternError::BadPlaceholder(inner.to_string()));
        }
        if placeholders.iter().any(|(n, _)| n == name) {
            return Err(PatternError::DuplicateSlot(name.to_string()));
        }
        text.push_str(&format!(" {PLACEHOLDER_MARK}{} ", placeholders.len()));
        placeholders.push((name.to_string(), unit));
        rest = &after[close + 1..];
    }
    text.push_str(rest);
    let n = normalize(&text, &placeholders);
    let mut slots = Vec::with_capacity(n.slots.len());
    for (name, _, unit) in n.slots {
        let name = name.ok_or_else(|| PatternError::LiteralNumber(pattern.to_string()))?;
        slots.push(SlotSpec { name, unit });
    }
    Ok((n.tokens, slots))
}
