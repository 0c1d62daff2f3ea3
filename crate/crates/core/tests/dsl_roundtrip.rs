mod common;

use aerocmd::dsl::{ast_equiv, parse_program, render_program, Command, ImageType, Program};
use aerocmd::repl::display_program;
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-200i32..200).prop_map(f64::from),
        (-20_000i32..20_000).prop_map(|n| f64::from(n) / 100.0),
        -1e6f64..1e6,
    ]
}

fn command() -> impl Strategy<Value = Command> {
    prop_oneof![
        Just(Command::Takeoff),
        Just(Command::Land),
        Just(Command::Hover),
        Just(Command::GetGpsData),
        Just(Command::GetState),
        Just(Command::Reset),
        (finite(), finite(), finite(), 0.0f64..100.0)
            .prop_map(|(vx, vy, vz, duration)| Command::MoveByVelocity { vx, vy, vz, duration }),
        (finite(), finite(), finite(), 0.01f64..20.0).prop_map(|(x, y, z, speed)| Command::MoveToPosition {
            x,
            y,
            z,
            speed
        }),
        (-179.99f64..180.0).prop_map(|yaw| Command::RotateToYaw { yaw }),
        (0u32..4, prop_oneof![Just(ImageType::Scene), Just(ImageType::Depth)])
            .prop_map(|(camera, image_type)| Command::GetImage { camera, image_type }),
    ]
}

fn program() -> impl Strategy<Value = Program> {
    prop::collection::vec(command(), 1..8).prop_map(|v| Program::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn render_then_parse_is_identity(p in program()) {
        let text = render_program(&p);
        prop_assert_eq!(parse_program(&text).unwrap(), p);
    }

    #[test]
    fn rendering_is_a_fixed_point(p in program()) {
        let once = render_program(&p);
        let twice = render_program(&parse_program(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn displayed_form_parses_to_same_program(p in program()) {
        let shown = display_program(&p, "AirSim_client.");
        prop_assert_eq!(parse_program(&shown).unwrap(), p);
    }

    #[test]
    fn ast_equiv_is_reflexive_and_symmetric(a in program(), b in program()) {
        prop_assert!(ast_equiv(&a, &a));
        prop_assert_eq!(ast_equiv(&a, &b), ast_equiv(&b, &a));
    }
}

#[test]
fn expander_programs_round_trip() {
    let programs = common::expander_programs(1000);
    assert_eq!(programs.len(), 1000);
    for p in &programs {
        assert_eq!(&parse_program(&render_program(p)).unwrap(), p);
    }
}
