mod common;

use aerocmd::corpus::XorShift64Star;
use aerocmd::dsl::{parse_program, render_program, validate_with_model, Rule};
use aerocmd::eval::{ast_match, exact_match, execution_match, run_program, score_prediction, scoring_config};
use aerocmd::sim::{Pose, SimConfig, Simulator, SubmitError};
use common::{expander_programs, mutations, random_program, VIOLATING_PROGRAMS};

#[test]
fn validated_random_programs_stay_in_the_geofence() {
    let cfg = SimConfig::default();
    let mut rng = XorShift64Star::new(99);
    let mut accepted = 0;
    while accepted < 200 {
        let p = random_program(&mut rng);
        let mut sim = Simulator::new(cfg.clone());
        if sim.submit_program(&p).is_err() {
            continue;
        }
        accepted += 1;
        while sim.is_busy() {
            sim.step();
            let pos = sim.pose().position;
            assert!(cfg.envelope.geofence.contains(pos), "{} reached {pos:?}", render_program(&p));
        }
    }
}

#[test]
fn violating_programs_rejected_before_running() {
    let cfg = SimConfig::default();
    for text in VIOLATING_PROGRAMS {
        let p = parse_program(text).unwrap();
        let v = validate_with_model(&p, &cfg.envelope, Pose::grounded_origin(), &cfg.motion).unwrap_err();
        assert!(!v.is_empty());
        let mut sim = Simulator::new(cfg.clone());
        assert!(matches!(sim.submit_program(&p), Err(SubmitError::ValidationRejected(_))), "{text}");
        assert_eq!(sim.sim_time(), 0.0);
        assert_eq!(sim.pose(), Pose::grounded_origin());
    }
}

#[test]
fn each_rule_is_exercised() {
    let cfg = SimConfig::default();
    let mut rules = std::collections::BTreeSet::new();
    for text in VIOLATING_PROGRAMS {
        let p = parse_program(text).unwrap();
        for v in validate_with_model(&p, &cfg.envelope, Pose::grounded_origin(), &cfg.motion).unwrap_err() {
            rules.insert(format!("{:?}", v.rule));
        }
    }
    for r in [Rule::Speed, Rule::Duration, Rule::Geofence] {
        assert!(rules.contains(&format!("{r:?}")), "{r:?} never triggered");
    }
}

#[test]
fn metrics_nest_over_mutations() {
    let cfg = scoring_config();
    let mut pairs = 0;
    for gold in expander_programs(60) {
        let g = render_program(&gold);
        let gold_run = run_program(&gold, &cfg);
        for pred in mutations(&gold) {
            let (e, a, x) = (exact_match(&pred, &g), ast_match(&pred, &g), execution_match(&pred, &g, &cfg));
            assert!(!e || a, "exact without ast: {pred:?} vs {g:?}");
            assert!(!a || x, "ast without execution: {pred:?} vs {g:?}");
            let r = score_prediction(Some(&pred), &gold, &gold_run, &cfg);
            assert_eq!((r.exact, r.ast, r.execution), (e, a, x), "{pred:?} vs {g:?}");
            pairs += 1;
        }
    }
    assert!(pairs >= 500);
}

#[test]
fn no_prediction_scores_zero() {
    let cfg = scoring_config();
    let gold = parse_program("getGpsData()").unwrap();
    let r = score_prediction(None, &gold, &run_program(&gold, &cfg), &cfg);
    assert!(!r.exact && !r.ast && !r.execution);
}
