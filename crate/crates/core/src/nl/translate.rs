use super::backend::{BackendError, ExternalBackend};
use super::normalize::{normalize_and_slot, SlotSpec, SlotValue, Unit};
use crate::corpus::{instantiate, Corpus, CorpusEntry};
use crate::dsl::{parse_program, render_program, Program, SafetyEnvelope};
use crate::sim::{MotionModel, Pose};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_TOP_K: usize = 3;
pub const DEFAULT_MIN_SCORE: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Retrieval,
    External { url: String, timeout_ms: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslatorConfig {
    pub top_k: usize,
    pub min_score: f64,
    pub backend: Backend,
}

impl Default for TranslatorConfig {
    fn default() -> Self {
        Self {
            top_k: DEFAULT_TOP_K,
            min_score: DEFAULT_MIN_SCORE,
            backend: Backend::Retrieval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationCandidate {
    pub program: Program,
    /// Canonical AeroCmd text of `program`.
    pub rendered: String,
    pub score: f64,
    /// `None` for programs produced by an external backend.
    pub corpus_entry_id: Option<String>,
    /// Query values bound to the entry's slots, named and typed by the entry.
    pub filled_slots: Vec<SlotValue>,
}

/// Session metadata sent to an external backend and used to validate what
/// it returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationContext {
    pub pose: Pose,
    pub envelope: SafetyEnvelope,
    pub motion: MotionModel,
}

impl Default for TranslationContext {
    fn default() -> Self {
        let cfg = crate::sim::SimConfig::default();
        Self {
            pose: Pose::grounded_origin(),
            envelope: cfg.envelope,
            motion: cfg.motion,
        }
    }
}

/// A corpus pattern close to, but not confidently matching, an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nearest {
    pub entry_id: String,
    pub nl_pattern: String,
    pub score: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum TranslateError {
    #[error("no confident candidate (best score {best_score:.3})")]
    NoConfidentCandidate { best_score: f64, nearest: Vec<Nearest> },
    #[error("the corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Binds query slots to an entry's required slots.
///
/// Each required slot takes the first unused query slot with the same unit,
/// then the first unused unitless query slot, then the entry default. A
/// unitless required slot only takes unitless query slots. Returns `None`
/// when a slot stays unbound.
pub fn fill_slots(
    required: &[SlotSpec],
    defaults: &BTreeMap<String, f64>,
    query: &[SlotValue],
) -> Option<BTreeMap<String, f64>> {
    let mut used = vec![false; query.len()];
    let mut take = |pred: &dyn Fn(&SlotValue) -> bool| -> Option<f64> {
        let i = (0..query.len()).find(|&i| !used[i] && pred(&query[i]))?;
        used[i] = true;
        Some(query[i].value)
    };
    let mut out = defaults.clone();
    for spec in required {
        let value = if spec.unit == Unit::Unitless {
            take(&|s| s.unit == Unit::Unitless)
        } else {
            take(&|s| s.unit == spec.unit).or_else(|| take(&|s| s.unit == Unit::Unitless))
        };
        let v = value.or_else(|| defaults.get(&spec.name).copied())?;
        out.insert(spec.name.clone(), v);
    }
    Some(out)
}

fn candidate_for(entry: &CorpusEntry, score: f64, slots: &[SlotValue]) -> Option<TranslationCandidate> {
    let values = fill_slots(&entry.required_slots, &entry.defaults, slots)?;
    let text = instantiate(&entry.program_template, &values).ok()?;
    // Slot values can break a template (e.g. a zero duration); such entries
    // are skipped rather than offered.
    let program = parse_program(&text).ok()?;
    Some(TranslationCandidate {
        rendered: render_program(&program),
        program,
        score,
        corpus_entry_id: Some(entry.id.clone()),
        filled_slots: entry
            .required_slots
            .iter()
            .map(|spec| SlotValue {
                name: spec.name.clone(),
                value: values[&spec.name],
                unit: spec.unit,
            })
            .collect(),
    })
}

/// Retrieval translator over a fixed corpus, optionally delegating to an
/// external model service.
#[derive(Debug, Clone)]
pub struct Translator {
    corpus: Corpus,
    config: TranslatorConfig,
}

impl Translator {
    pub fn new(corpus: Corpus, config: TranslatorConfig) -> Self {
        Self { corpus, config }
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn config(&self) -> &TranslatorConfig {
        &self.config
    }

    /// Every entry's score for `utterance`, sorted by score descending and
    /// then entry id ascending.
    pub fn ranked(&self, utterance: &str) -> Vec<(usize, f64)> {
        let (tokens, _) = normalize_and_slot(utterance);
        let mut ranked: Vec<(usize, f64)> = self.corpus.index().scores(&tokens).into_iter().enumerate().collect();
        let entries = self.corpus.entries();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| entries[a.0].id.cmp(&entries[b.0].id)));
        ranked
    }

    /// The `k` closest corpus patterns regardless of threshold.
    pub fn nearest(&self, utterance: &str, k: usize) -> Vec<Nearest> {
        self.ranked(utterance)
            .into_iter()
            .take(k)
            .map(|(i, score)| {
                let e = &self.corpus.entries()[i];
                Nearest {
                    entry_id: e.id.clone(),
                    nl_pattern: e.nl_pattern.clone(),
                    score,
                }
            })
            .collect()
    }

    pub fn translate(&self, utterance: &str) -> Result<Vec<TranslationCandidate>, TranslateError> {
        self.translate_top(utterance, self.config.top_k)
    }

    /// Like [`Translator::translate`] with an explicit candidate limit.
    pub fn translate_top(&self, utterance: &str, top_k: usize) -> Result<Vec<TranslationCandidate>, TranslateError> {
        self.translate_in_context(utterance, top_k, &TranslationContext::default())
    }

    /// Translation for a vehicle in a known pose. Only the external backend
    /// uses the context: its programs are validated from `context.pose`.
    pub fn translate_in_context(
        &self,
        utterance: &str,
        top_k: usize,
        context: &TranslationContext,
    ) -> Result<Vec<TranslationCandidate>, TranslateError> {
        if let Backend::External { url, timeout_ms } = &self.config.backend {
            let backend = ExternalBackend::new(url, std::time::Duration::from_millis(*timeout_ms));
            let mut out = backend.translate(utterance, context)?;
            out.truncate(top_k.max(1));
            return Ok(out);
        }
        if self.corpus.is_empty() {
            return Err(TranslateError::EmptyCorpus);
        }
        let (_, slots) = normalize_and_slot(utterance);
        let ranked = self.ranked(utterance);
        let best_score = ranked.first().map(|r| r.1).unwrap_or(0.0);
        let out: Vec<TranslationCandidate> = ranked
            .iter()
            .take_while(|(_, s)| *s >= self.config.min_score)
            .filter_map(|&(i, score)| candidate_for(&self.corpus.entries()[i], score, &slots))
            .take(top_k.max(1))
            .collect();
        if out.is_empty() {
            return Err(TranslateError::NoConfidentCandidate {
                best_score,
                nearest: self.nearest(utterance, DEFAULT_TOP_K),
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, pattern: &str, template: &str) -> CorpusEntry {
        let (_, required_slots) = super::super::pattern_slots(pattern).unwrap();
        CorpusEntry {
            id: id.into(),
            nl_pattern: pattern.into(),
            program_template: template.into(),
            required_slots,
            defaults: BTreeMap::new(),
            tags: vec![],
        }
    }

    fn translator() -> Translator {
        let corpus = Corpus::new(vec![
            entry("move.forward", "Move the drone forward {d} meters", "moveByVelocityAsync({d}, 0, 0, duration={d})"),
            entry("gps", "Get the drone's GPS data", "getGpsData()"),
            entry("yaw", "Rotate to {h} degrees", "rotateToYawAsync({h})"),
            entry("fly.speed", "Fly north {d} meters at {v} meters per second", "moveByVelocityAsync({v}, 0, 0, duration={d})"),
            entry("land", "Land the drone", "landAsync()"),
        ])
        .unwrap();
        Translator::new(corpus, TranslatorConfig::default())
    }

    #[test]
    fn move_forward_two_meters() {
        let out = translator().translate("Move the drone forward 2 meters").unwrap();
        assert_eq!(out[0].rendered, "moveByVelocityAsync(2, 0, 0, duration=2)");
        assert_eq!(out[0].score, 1.0);
        assert_eq!(out[0].corpus_entry_id.as_deref(), Some("move.forward"));
    }

    #[test]
    fn gps_query() {
        let out = translator().translate("Get the drone's GPS data").unwrap();
        assert_eq!(out[0].rendered, "getGpsData()");
    }

    #[test]
    fn slots_bind_by_unit_not_order() {
        let t = translator();
        let out = t.translate("fly north at 3 meters per second for 12 meters").unwrap();
        assert_eq!(out[0].rendered, "moveByVelocityAsync(3, 0, 0, duration=12)");
    }

    #[test]
    fn nonsense_has_no_candidate() {
        match translator().translate("sing me a song") {
            Err(TranslateError::NoConfidentCandidate { best_score, nearest }) => {
                assert!(best_score < DEFAULT_MIN_SCORE);
                assert_eq!(nearest.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_slot_skips_entry() {
        // "Rotate to degrees" matches the yaw pattern but has no number.
        match translator().translate("Rotate to degrees") {
            Err(TranslateError::NoConfidentCandidate { .. }) => {}
            Ok(c) => assert!(c.iter().all(|c| c.corpus_entry_id.as_deref() != Some("yaw"))),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn ties_break_by_id() {
        let corpus = Corpus::new(vec![entry("b", "hover here", "hoverAsync()"), entry("a", "hover there", "hoverAsync()")]).unwrap();
        let t = Translator::new(corpus, TranslatorConfig::default());
        let ranked = t.ranked("hover");
        assert_eq!(ranked[0].1, ranked[1].1);
        assert_eq!(t.corpus().entries()[ranked[0].0].id, "a");
    }

    #[test]
    fn fill_slot_fallbacks() {
        let req = vec![
            SlotSpec { name: "d".into(), unit: Unit::Meters },
            SlotSpec { name: "t".into(), unit: Unit::Seconds },
        ];
        let q = vec![SlotValue { name: "s0".into(), value: 5.0, unit: Unit::Unitless }];
        let mut defaults = BTreeMap::new();
        assert_eq!(fill_slots(&req, &defaults, &q), None);
        defaults.insert("t".into(), 2.0);
        let got = fill_slots(&req, &defaults, &q).unwrap();
        assert_eq!(got["d"], 5.0);
        assert_eq!(got["t"], 2.0);
    }

    #[test]
    fn unit_mismatch_is_not_coerced() {
        let req = vec![SlotSpec { name: "n".into(), unit: Unit::Unitless }];
        let q = vec![SlotValue { name: "s0".into(), value: 5.0, unit: Unit::Degrees }];
        assert_eq!(fill_slots(&req, &BTreeMap::new(), &q), None);
        let req = vec![SlotSpec { name: "d".into(), unit: Unit::Meters }];
        assert_eq!(fill_slots(&req, &BTreeMap::new(), &q), None);
    }

    #[test]
    fn filled_slots_carry_entry_names() {
        let out = translator().translate("Rotate to 30 degrees").unwrap();
        assert_eq!(out[0].filled_slots, vec![SlotValue { name: "h".into(), value: 30.0, unit: Unit::Degrees }]);
    }
}
