//! On-disk corpus formats and deterministic dataset generation.
//!
//! * `corpus.json` holds [`CorpusEntry`] pairs of an NL pattern and a program
//!   template; loading one builds the retrieval index.
//! * `templates.json` holds [`ParaphraseTemplate`] families that expand into
//!   [`DatasetExample`]s and into corpus entries.
//! * `dataset.jsonl` holds one [`DatasetExample`] per line.
//!
//! `docs/corpus-format.md` describes each file with examples.

mod expand;
mod prng;
mod split;

pub use expand::{expand_templates, DatasetExample};
pub use prng::XorShift64Star;
pub use split::{split_by_family, SplitError, SplitResult};

use crate::dsl::{format_number, parse_program, ParseError};
use crate::nl::{pattern_slots, PatternError, SlotSpec, TfIdfIndex};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: u32 = 1;

/// The corpus shipped with the crate (`data/corpus.json`).
pub const SHIPPED_CORPUS_JSON: &str = include_str!("../../data/corpus.json");
/// The paraphrase families the shipped corpus is built from.
pub const SHIPPED_TEMPLATES_JSON: &str = include_str!("../../data/templates.json");

pub fn shipped_corpus() -> Corpus {
    Corpus::from_json(SHIPPED_CORPUS_JSON).expect("shipped corpus is valid")
}

pub fn shipped_templates() -> Vec<ParaphraseTemplate> {
    parse_templates(SHIPPED_TEMPLATES_JSON).expect("shipped templates are valid")
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("entry `{entry_id}`: {reason}")]
    Format { entry_id: String, reason: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
}

impl CorpusError {
    fn format(entry_id: &str, reason: impl Into<String>) -> Self {
        CorpusError::Format {
            entry_id: entry_id.to_string(),
            reason: reason.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub nl_pattern: String,
    pub program_template: String,
    pub required_slots: Vec<SlotSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub defaults: BTreeMap<String, f64>,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

fn decimals(v: f64) -> usize {
    let s = format_number(v);
    s.split_once('.').map(|(_, f)| f.len()).unwrap_or(0)
}

impl SlotRange {
    pub fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.step > 0.0 && self.step.is_finite() && self.min <= self.max
    }

    /// `min, min + step, ...` up to `max`, rounded to the inputs' precision.
    pub fn values(&self) -> Vec<f64> {
        if !self.is_valid() {
            return Vec::new();
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        let places = decimals(self.step).max(decimals(self.min));
        (0..n)
            .map(|i| {
                let v = self.min + i as f64 * self.step;
                format!("{v:.places$}").parse::<f64>().unwrap_or(v)
            })
            .map(|v| if v == 0.0 { 0.0 } else { v })
            .collect()
    }
}

/// One paraphrase family: several NL phrasings of the same program template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseTemplate {
    pub family_id: String,
    pub variants: Vec<String>,
    pub program_template: String,
    #[serde(default)]
    pub slot_ranges: BTreeMap<String, SlotRange>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub defaults: BTreeMap<String, f64>,
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusFile {
    entries: Vec<CorpusEntry>,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct TemplateFile {
    families: Vec<ParaphraseTemplate>,
    version: u32,
}

/// Names of `{slot}` placeholders in a program template, in order of appearance.
pub fn template_placeholders(template: &str) -> Result<Vec<String>, String> {
    let mut names = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or("unterminated placeholder")?;
        let name = after[..close].trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("bad placeholder `{{{name}}}`"));
        }
        if !names.iter().any(|n| n == name) {
            names.push(name.to_string());
        }
        rest = &after[close + 1..];
    }
    Ok(names)
}

/// Substitutes slot values into a template, formatting numbers canonically.
pub fn instantiate(template: &str, values: &BTreeMap<String, f64>) -> Result<String, String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or("unterminated placeholder")?;
        let name = after[..close].trim();
        let v = values.get(name).ok_or_else(|| format!("no value for slot `{name}`"))?;
        out.push_str(&format_number(*v));
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// A validated corpus with its retrieval index.
#[derive(Debug, Clone)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
    patterns: Vec<Vec<String>>,
    index: TfIdfIndex,
}

impl Corpus {
    pub fn new(entries: Vec<CorpusEntry>) -> Result<Self, CorpusError> {
        let mut ids = HashSet::new();
        let mut patterns = Vec::with_capacity(entries.len());
        for e in &entries {
            if !ids.insert(e.id.as_str()) {
                return Err(CorpusError::DuplicateId(e.id.clone()));
            }
            patterns.push(check_entry(e)?);
        }
        let index = TfIdfIndex::build(&patterns);
        Ok(Self {
            entries,
            patterns,
            index,
        })
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Normalized token stream of entry `i`'s pattern.
    pub fn pattern_tokens(&self, i: usize) -> &[String] {
        &self.patterns[i]
    }

    pub fn index(&self) -> &TfIdfIndex {
        &self.index
    }

    pub fn get(&self, id: &str) -> Option<&CorpusEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let file: CorpusFile = serde_json::from_str(text)?;
        Corpus::new(file.entries)
    }

    /// Canonical JSON: sorted keys, two-space indent, `\n` line endings,
    /// trailing newline.
    pub fn to_json(&self) -> String {
        canonical_json(&CorpusFile {
            entries: self.entries.clone(),
            version: FORMAT_VERSION,
        })
    }
}

fn check_entry(e: &CorpusEntry) -> Result<Vec<String>, CorpusError> {
    let fail = |reason: String| CorpusError::format(&e.id, reason);
    let (tokens, pattern_specs) = pattern_slots(&e.nl_pattern).map_err(|err: PatternError| fail(err.to_string()))?;
    if pattern_specs != e.required_slots {
        return Err(fail(format!(
            "required_slots {:?} do not match the pattern's placeholders {:?}",
            e.required_slots, pattern_specs
        )));
    }
    let placeholders = template_placeholders(&e.program_template).map_err(fail)?;
    let mut probe = e.defaults.clone();
    for name in &placeholders {
        let declared = e.required_slots.iter().any(|s| &s.name == name);
        if !declared && !e.defaults.contains_key(name) {
            return Err(fail(format!("template references undeclared slot `{{{name}}}`")));
        }
        if declared {
            probe.insert(name.clone(), 1.0);
        }
    }
    let text = instantiate(&e.program_template, &probe).map_err(fail)?;
    parse_program(&text).map_err(|err: ParseError| fail(format!("template does not parse: {err}")))?;
    Ok(tokens)
}

pub(crate) fn canonical_json<T: Serialize>(value: &T) -> String {
    // serde_json's Value keeps object keys in a BTreeMap, so keys come out sorted.
    let v = serde_json::to_value(value).expect("corpus types serialize");
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

/// Re-emits any corpus JSON in canonical form.
pub fn canonicalize_json(text: &str) -> Result<String, CorpusError> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    Ok(canonical_json(&v))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    Corpus::from_json(&text)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    std::fs::write(path, corpus.to_json()).map_err(|e| CorpusError::io(path, e))
}

pub fn check_family(f: &ParaphraseTemplate) -> Result<(), CorpusError> {
    let fail = |reason: String| CorpusError::format(&f.family_id, reason);
    if f.variants.is_empty() {
        return Err(fail("family has no variants".into()));
    }
    for (name, range) in &f.slot_ranges {
        if range.values().is_empty() {
            return Err(fail(format!("slot range for `{name}` is empty")));
        }
    }
    let placeholders = template_placeholders(&f.program_template).map_err(fail)?;
    for variant in &f.variants {
        let (_, specs) = pattern_slots(variant).map_err(|e| fail(e.to_string()))?;
        for s in &specs {
            if !f.slot_ranges.contains_key(&s.name) {
                return Err(fail(format!("variant `{variant}` uses slot `{}` without a range", s.name)));
            }
        }
        for name in &placeholders {
            if !specs.iter().any(|s| &s.name == name) && !f.defaults.contains_key(name) {
                return Err(fail(format!("variant `{variant}` does not supply slot `{name}`")));
            }
        }
    }
    let mut probe = f.defaults.clone();
    for (name, range) in &f.slot_ranges {
        probe.insert(name.clone(), range.values()[0]);
    }
    let text = instantiate(&f.program_template, &probe).map_err(fail)?;
    parse_program(&text).map_err(|e| fail(format!("template does not parse: {e}")))?;
    Ok(())
}

pub fn parse_templates(text: &str) -> Result<Vec<ParaphraseTemplate>, CorpusError> {
    let file: TemplateFile = serde_json::from_str(text)?;
    let mut ids = HashSet::new();
    for f in &file.families {
        if !ids.insert(f.family_id.as_str()) {
            return Err(CorpusError::DuplicateId(f.family_id.clone()));
        }
        check_family(f)?;
    }
    Ok(file.families)
}

pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<ParaphraseTemplate>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_templates(&text)
}

pub fn templates_to_json(families: &[ParaphraseTemplate]) -> String {
    canonical_json(&TemplateFile {
        families: families.to_vec(),
        version: FORMAT_VERSION,
    })
}

/// One corpus entry per variant, id `<family>.<variant index>`. Variants listed
/// in `exclude` (family id -> variant strings) are left out.
pub fn corpus_from_templates(
    families: &[ParaphraseTemplate],
    exclude: &BTreeMap<String, BTreeSet<String>>,
) -> Result<Corpus, CorpusError> {
    let mut entries = Vec::new();
    for f in families {
        let placeholders = template_placeholders(&f.program_template)
            .map_err(|r| CorpusError::format(&f.family_id, r))?;
        for (i, variant) in f.variants.iter().enumerate() {
            if exclude.get(&f.family_id).is_some_and(|s| s.contains(variant)) {
                continue;
            }
            let (_, required_slots) =
                pattern_slots(variant).map_err(|e| CorpusError::format(&f.family_id, e.to_string()))?;
            let defaults = f
                .defaults
                .iter()
                .filter(|(k, _)| placeholders.contains(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect();
            entries.push(CorpusEntry {
                id: format!("{}.{i:02}", f.family_id),
                nl_pattern: variant.clone(),
                program_template: f.program_template.clone(),
                required_slots,
                defaults,
                tags: f.tags.clone(),
            });
        }
    }
    Corpus::new(entries)
}

pub fn write_jsonl(examples: &[DatasetExample], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for ex in examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
    }
    w.flush().map_err(|e| CorpusError::io(path, e))
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<DatasetExample>, CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nl::Unit;

    fn entry(id: &str, pattern: &str, template: &str) -> CorpusEntry {
        CorpusEntry {
            id: id.into(),
            nl_pattern: pattern.into(),
            program_template: template.into(),
            required_slots: pattern_slots(pattern).unwrap().1,
            defaults: BTreeMap::new(),
            tags: vec!["simple".into()],
        }
    }

    #[test]
    fn undeclared_template_slot() {
        let e = entry("bad", "Fly forward", "moveByVelocityAsync({d}, 0, 0, duration=1)");
        let err = Corpus::new(vec![e]).unwrap_err();
        assert!(matches!(err, CorpusError::Format { ref entry_id, ref reason } if entry_id == "bad" && reason.contains("{d}")));
    }

    #[test]
    fn defaults_cover_template_slots() {
        let mut e = entry("ok", "Fly forward", "moveByVelocityAsync({v}, 0, 0, duration=1)");
        e.defaults.insert("v".into(), 1.0);
        assert!(Corpus::new(vec![e]).is_ok());
    }

    #[test]
    fn duplicate_ids() {
        let a = entry("x", "take off", "takeoffAsync()");
        let b = entry("x", "land", "landAsync()");
        assert!(matches!(Corpus::new(vec![a, b]), Err(CorpusError::DuplicateId(id)) if id == "x"));
    }

    #[test]
    fn unparseable_template() {
        let e = entry("x", "explode", "explode()");
        assert!(matches!(Corpus::new(vec![e]), Err(CorpusError::Format { .. })));
    }

    #[test]
    fn mismatched_required_slots() {
        let mut e = entry("x", "Move forward {d} meters", "moveByVelocityAsync({d}, 0, 0, duration=1)");
        e.required_slots[0].unit = Unit::Seconds;
        assert!(matches!(Corpus::new(vec![e]), Err(CorpusError::Format { .. })));
    }

    #[test]
    fn save_load_round_trip_is_byte_stable() {
        let c = Corpus::new(vec![
            entry("b", "Move the drone forward {d} meters", "moveByVelocityAsync({d}, 0, 0, duration={d})"),
            entry("a", "Get the drone's GPS data", "getGpsData()"),
        ])
        .unwrap();
        let text = c.to_json();
        assert_eq!(canonicalize_json(&text).unwrap(), text);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.json");
        save_corpus(&c, &path).unwrap();
        let again = load_corpus(&path).unwrap();
        assert_eq!(again.to_json(), text);
        assert!(text.contains("\n  \"entries\": ["));
    }

    #[test]
    fn slot_range_values() {
        let r = SlotRange { min: 0.5, max: 2.0, step: 0.5 };
        assert_eq!(r.values(), vec![0.5, 1.0, 1.5, 2.0]);
        let r = SlotRange { min: 0.1, max: 0.3, step: 0.1 };
        assert_eq!(r.values(), vec![0.1, 0.2, 0.3]);
        let r = SlotRange { min: 2.0, max: 2.0, step: 1.0 };
        assert_eq!(r.values(), vec![2.0]);
        assert!(SlotRange { min: 3.0, max: 2.0, step: 1.0 }.values().is_empty());
    }

    #[test]
    fn instantiate_formats_numbers() {
        let mut v = BTreeMap::new();
        v.insert("d".to_string(), 2.0);
        assert_eq!(
            instantiate("moveByVelocityAsync({d}, 0, 0, duration={d})", &v).unwrap(),
            "moveByVelocityAsync(2, 0, 0, duration=2)"
        );
        assert!(instantiate("{e}", &v).is_err());
    }
}
