//! Family-held-out split: held-out utterances use phrasings never seen in
//! training, while their program templates are shared.

use super::expand::DatasetExample;
use super::prng::XorShift64Star;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("holdout fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub train: Vec<DatasetExample>,
    pub heldout: Vec<DatasetExample>,
    /// Family id -> variants held out.
    pub heldout_variants: BTreeMap<String, BTreeSet<String>>,
    /// Families with a single variant; kept entirely in train.
    pub too_small: Vec<String>,
}

/// Holds out `round(fraction * variants)` variants per family (at least one,
/// and never all of them), chosen by a seeded shuffle over the family's
/// variants in sorted order. Families are visited in sorted id order.
pub fn split_by_family(
    examples: &[DatasetExample],
    holdout_fraction: f64,
    seed: u64,
) -> Result<SplitResult, SplitError> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(SplitError::BadFraction(holdout_fraction));
    }
    let mut variants: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for ex in examples {
        variants
            .entry(ex.family_id.as_str())
            .or_default()
            .insert(ex.nl_pattern.as_str());
    }
    let mut rng = XorShift64Star::new(seed);
    let mut heldout_variants: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut too_small = Vec::new();
    for (family, vs) in &variants {
        if vs.len() < 2 {
            too_small.push(family.to_string());
            continue;
        }
        let n = vs.len();
        let k = ((holdout_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut order: Vec<&str> = vs.iter().copied().collect();
        rng.shuffle(&mut order);
        heldout_variants.insert(
            family.to_string(),
            order[..k].iter().map(|s| s.to_string()).collect(),
        );
    }
    let (heldout, train): (Vec<_>, Vec<_>) = examples.iter().cloned().partition(|ex| {
        heldout_variants
            .get(&ex.family_id)
            .is_some_and(|s| s.contains(&ex.nl_pattern))
    });
    Ok(SplitResult {
        train,
        heldout,
        heldout_variants,
        too_small,
    })
}
