mod common;

use aerocmd::corpus::{
    corpus_from_templates, expand_templates, parse_templates, shipped_corpus, shipped_templates, templates_to_json, SHIPPED_CORPUS_JSON,
    SHIPPED_TEMPLATES_JSON,
};
use aerocmd::nl::{normalize_and_slot, DEFAULT_MIN_SCORE};
use std::collections::BTreeMap;

#[test]
fn shipped_corpus_is_built_from_templates() {
    let built = corpus_from_templates(&shipped_templates(), &BTreeMap::new()).unwrap();
    assert_eq!(built.to_json(), SHIPPED_CORPUS_JSON);
}

#[test]
fn shipped_templates_survive_serialization() {
    let families = shipped_templates();
    assert!(SHIPPED_TEMPLATES_JSON.contains("\"version\": 1"));
    assert_eq!(parse_templates(&templates_to_json(&families)).unwrap(), families);
}

#[test]
fn shipped_dataset_is_the_seed_42_expansion() {
    let mut text = String::new();
    for ex in expand_templates(&shipped_templates(), 42, 50).unwrap() {
        text.push_str(&serde_json::to_string(&ex).unwrap());
        text.push('\n');
    }
    assert_eq!(text, include_str!("../data/dataset.jsonl"));
}

#[test]
fn reference_utterances_are_corpus_patterns() {
    let corpus = shipped_corpus();
    let find = |pattern: &str| corpus.entries().iter().find(|e| e.nl_pattern == pattern).cloned();
    let fwd = find("Move the drone forward {d} meters").expect("forward entry");
    assert_eq!(fwd.program_template, "moveByVelocityAsync({d}, 0, 0, duration={d})");
    let gps = find("Get the drone's GPS data").expect("gps entry");
    assert_eq!(gps.program_template, "getGpsData()");
    let safe = corpus
        .entries()
        .iter()
        .find(|e| e.tags.iter().any(|t| t == "safe-variant"))
        .expect("safe variant");
    assert!(safe.program_template.starts_with("moveToPositionAsync("));
}

/// A pattern that matches another family's pattern perfectly would make
/// retrieval ambiguous no matter how the query is phrased.
#[test]
fn no_cross_family_duplicates() {
    let corpus = shipped_corpus();
    let family = |id: &str| id.rsplit_once('.').map(|(f, _)| f.to_string()).unwrap_or_default();
    let tokens: Vec<_> = corpus.entries().iter().map(|e| normalize_and_slot(&e.nl_pattern).0).collect();
    for (i, a) in corpus.entries().iter().enumerate() {
        for (j, b) in corpus.entries().iter().enumerate().skip(i + 1) {
            if family(&a.id) != family(&b.id) {
                assert_ne!(tokens[i], tokens[j], "{} and {} normalize identically", a.id, b.id);
            }
        }
    }
    let translator = common::shipped_translator();
    for e in corpus.entries() {
        let ranked = translator.ranked(&e.nl_pattern);
        let top = &corpus.entries()[ranked[0].0];
        assert_eq!(family(&top.id), family(&e.id), "`{}` retrieves {}", e.nl_pattern, top.id);
    }
}

#[test]
fn off_topic_request_is_not_confident() {
    let t = common::shipped_translator();
    let best = t.ranked("please compile my tax return").first().map(|r| r.1).unwrap_or(0.0);
    assert!(best < DEFAULT_MIN_SCORE, "{best}");
    assert!(t.translate("please compile my tax return").is_err());
}

#[test]
fn reference_translations() {
    let t = common::shipped_translator();
    let top = |u: &str| t.translate(u).unwrap().remove(0).rendered;
    assert_eq!(top("Move the drone forward 2 meters"), "moveByVelocityAsync(2, 0, 0, duration=2)");
    assert_eq!(top("Get the drone's GPS data"), "getGpsData()");
    assert_eq!(top("Return to live camera image"), "simGetImage(0, ImageType.Scene)");
}
