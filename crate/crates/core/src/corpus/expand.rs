//! Deterministic paraphrase expansion into (utterance, gold program) pairs.

use super::prng::XorShift64Star;
use super::{check_family, instantiate, CorpusError, ParaphraseTemplate};
use crate::dsl::{parse_program, render_program};
use crate::nl::pattern_slots;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

/// Above this many combinations per family, draw with rejection instead of
/// shuffling the full index list.
const ENUMERATION_LIMIT: u64 = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DatasetExample {
    pub utterance: String,
    /// Canonical AeroCmd text.
    pub gold_program: String,
    pub family_id: String,
    /// The paraphrase variant the utterance was instantiated from.
    pub nl_pattern: String,
}

struct VariantPlan {
    pattern: String,
    slots: Vec<(String, Vec<f64>)>,
    combos: u64,
}

impl VariantPlan {
    fn values_at(&self, mut k: u64) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (name, values) in self.slots.iter().rev() {
            let n = values.len() as u64;
            out.insert(name.clone(), values[(k % n) as usize]);
            k /= n;
        }
        out
    }
}

fn fill_pattern(pattern: &str, values: &BTreeMap<String, f64>) -> String {
    // Drop `:unit` annotations, then substitute.
    let mut plain = String::with_capacity(pattern.len());
    let mut in_brace = false;
    let mut skipping = false;
    for c in pattern.chars() {
        match c {
            '{' => {
                in_brace = true;
                plain.push(c);
            }
            '}' => {
                in_brace = false;
                skipping = false;
                plain.push(c);
            }
            ':' if in_brace => skipping = true,
            _ if skipping => {}
            _ => plain.push(c),
        }
    }
    instantiate(&plain, values).expect("pattern slots are covered by the plan")
}

/// Expands each family into up to `per_family` distinct examples.
///
/// Every (variant, slot values) combination is indexed; a single
/// [`XorShift64Star`] seeded with `seed` shuffles each family's indices in
/// file order and the first `per_family` are kept. Output is a pure function
/// of the arguments.
pub fn expand_templates(
    families: &[ParaphraseTemplate],
    seed: u64,
    per_family: usize,
) -> Result<Vec<DatasetExample>, CorpusError> {
    let mut rng = XorShift64Star::new(seed);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for family in families {
        check_family(family)?;
        let plans: Vec<VariantPlan> = family
            .variants
            .iter()
            .map(|v| {
                let (_, specs) = pattern_slots(v).expect("checked by check_family");
                let slots: Vec<(String, Vec<f64>)> = specs
                    .iter()
                    .map(|s| (s.name.clone(), family.slot_ranges[&s.name].values()))
                    .collect();
                let combos = slots.iter().map(|(_, vals)| vals.len() as u64).product();
                VariantPlan {
                    pattern: v.clone(),
                    slots,
                    combos,
                }
            })
            .collect();
        let total: u64 = plans.iter().map(|p| p.combos).sum();
        let want = (per_family as u64).min(total);
        let picks: Vec<u64> = if total <= ENUMERATION_LIMIT {
            let mut all: Vec<u64> = (0..total).collect();
            rng.shuffle(&mut all);
            all.truncate(want as usize);
            all
        } else {
            let mut chosen = Vec::new();
            let mut used = HashSet::new();
            let mut attempts = 0;
            while (chosen.len() as u64) < want && attempts < want * 50 {
                attempts += 1;
                let k = rng.below(total);
                if used.insert(k) {
                    chosen.push(k);
                }
            }
            chosen
        };
        for mut k in picks {
            let plan = plans
                .iter()
                .find(|p| {
                    if k < p.combos {
                        true
                    } else {
                        k -= p.combos;
                        false
                    }
                })
                .expect("index within total");
            let mut values = family.defaults.clone();
            values.extend(plan.values_at(k));
            let utterance = fill_pattern(&plan.pattern, &values);
            let program_text = instantiate(&family.program_template, &values)
                .map_err(|r| CorpusError::Format {
                    entry_id: family.family_id.clone(),
                    reason: r,
                })?;
            let program = parse_program(&program_text).map_err(|e| CorpusError::Format {
                entry_id: family.family_id.clone(),
                reason: format!("`{program_text}`: {e}"),
            })?;
            let example = DatasetExample {
                utterance,
                gold_program: render_program(&program),
                family_id: family.family_id.clone(),
                nl_pattern: plan.pattern.clone(),
            };
            if seen.insert((example.utterance.clone(), example.gold_program.clone())) {
                out.push(example);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SlotRange;

    fn family(variants: &[&str], template: &str, ranges: &[(&str, f64, f64, f64)]) -> ParaphraseTemplate {
        ParaphraseTemplate {
            family_id: "f".into(),
            variants: variants.iter().map(|s| s.to_string()).collect(),
            program_template: template.into(),
            slot_ranges: ranges
                .iter()
                .map(|(n, min, max, step)| (n.to_string(), SlotRange { min: *min, max: *max, step: *step }))
                .collect(),
            defaults: BTreeMap::new(),
            tags: vec![],
        }
    }

    #[test]
    fn same_seed_same_output() {
        let f = family(
            &["Move forward {d} meters", "Fly {d} m ahead"],
            "moveByVelocityAsync({d}, 0, 0, duration=1)",
            &[("d", 1.0, 9.0, 0.5)],
        );
        let a = expand_templates(std::slice::from_ref(&f), 42, 10).unwrap();
        let b = expand_templates(std::slice::from_ref(&f), 42, 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let c = expand_templates(&[f], 43, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_combination_dedups() {
        let f = family(&["Move forward {d} meters"], "moveByVelocityAsync({d}, 0, 0, duration={d})", &[("d", 2.0, 2.0, 1.0)]);
        let out = expand_templates(&[f], 42, 5).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].utterance, "Move forward 2 meters");
        assert_eq!(out[0].gold_program, "moveByVelocityAsync(2, 0, 0, duration=2)");
    }

    #[test]
    fn unit_annotations_are_not_spoken() {
        let f = family(&["Turn to {h:degrees}"], "rotateToYawAsync({h})", &[("h", 45.0, 45.0, 1.0)]);
        let out = expand_templates(&[f], 1, 1).unwrap();
        assert_eq!(out[0].utterance, "Turn to 45");
    }

    #[test]
    fn utterance_contains_values_verbatim() {
        let f = family(
            &["Fly {d} meters north at {v} m/s"],
            "moveByVelocityAsync({v}, 0, 0, duration={d})",
            &[("d", 1.0, 3.0, 1.0), ("v", 0.5, 1.5, 0.5)],
        );
        for ex in expand_templates(&[f], 9, 100).unwrap() {
            let p = parse_program(&ex.gold_program).unwrap();
            if let crate::dsl::Command::MoveByVelocity { vx, duration, .. } = p.statements()[0] {
                assert!(ex.utterance.contains(&format!("{} meters", crate::dsl::format_number(duration))));
                assert!(ex.utterance.contains(&format!("{} m/s", crate::dsl::format_number(vx))));
            } else {
                panic!();
            }
        }
    }
}
