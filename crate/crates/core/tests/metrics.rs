mod support;

use proptest::prelude::*;
use protofsm_core::logic::{parse_actions, parse_expr, Logic, LogicLimits, Value};
use protofsm_core::metrics::{diff_fsm, score, split_condition, split_for_scoring, Deviation};
use protofsm_core::par::Exec;
use protofsm_core::synth::{parse_graph, Fsm, StateRef, Transition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph(name: &str) -> Fsm {
    let path = format!("{}/../../data/metrics/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_graph(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn logic() -> Logic {
    Logic::new(LogicLimits::default())
}

fn pair_score(gt: &Fsm, inf: &Fsm) -> (f64, f64) {
    let l = logic();
    let r = score(
        &split_for_scoring(gt, &l).unwrap(),
        &split_for_scoring(inf, &l).unwrap(),
        Exec::Sequential,
    );
    (r.condition_accuracy, r.action_accuracy)
}

#[test]
fn worked_condition_example() {
    let (c, _) = pair_score(
        &graph("worked_conditions_gt.dot"),
        &graph("worked_conditions_inf.dot"),
    );
    assert_eq!(c, 1.0 / 3.0);
}

#[test]
fn worked_action_example() {
    let l = logic();
    let gt = split_for_scoring(&graph("worked_actions_gt.dot"), &l).unwrap();
    let inf = split_for_scoring(&graph("worked_actions_inf.dot"), &l).unwrap();
    let r = score(&gt, &inf, Exec::Sequential);
    let per: Vec<f64> = r.actions.iter().map(|a| a.score).collect();
    assert_eq!(per, [0.5, 0.25, 0.0]);
    assert_eq!(r.action_accuracy, 0.25);
}

#[test]
fn fixtures_score_one_against_themselves() {
    for name in [
        "worked_conditions_gt.dot",
        "worked_conditions_inf.dot",
        "worked_actions_gt.dot",
        "worked_actions_inf.dot",
        "integrity_reference.dot",
    ] {
        let f = graph(name);
        assert_eq!(pair_score(&f, &f), (1.0, 1.0), "{name}");
    }
}

#[test]
fn reordered_equivalent_conditions_score_one() {
    let mk = |c: &str| Fsm {
        participant: "p".into(),
        states: vec!["s".into()],
        initial: "s".into(),
        transitions: vec![Transition::new(
            StateRef::Named("s".into()),
            Some("t".into()),
            parse_expr(c).unwrap(),
            parse_actions("x := 1").unwrap(),
        )],
    };
    let a = mk("(m = a | m = b) & ok");
    let b = mk("ok & m = b | m = a & ok");
    assert!(logic()
        .equivalent(&a.transitions[0].condition, &b.transitions[0].condition)
        .unwrap());
    assert_eq!(pair_score(&a, &b), (1.0, 1.0));
}

#[test]
fn diff_reports_missing_integrity_check() {
    let devs = diff_fsm(
        &graph("integrity_reference.dot"),
        &graph("integrity_subject.dot"),
        &logic(),
    )
    .unwrap();
    assert_eq!(devs.len(), 1);
    let Deviation::Behaviour { assignment, .. } = &devs[0] else {
        panic!("{devs:?}")
    };
    assert!(assignment.contains(&("chan_mme_ue_integrity_ok".to_string(), Value::Bool(false))));
    assert!(assignment.contains(&("chan_mme_ue".to_string(), Value::sym("sm_command"))));
}

#[test]
fn diff_reports_structural_changes_first() {
    let mut other = graph("integrity_reference.dot");
    other.states.push("deregistered".into());
    let devs = diff_fsm(&graph("integrity_reference.dot"), &other, &logic()).unwrap();
    assert_eq!(
        devs,
        [Deviation::ExtraState {
            state: "deregistered".into()
        }]
    );
}

fn random_fsm(seed: u64) -> Fsm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    support::split_fsm::random_split_fsm(&mut rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_bounded_and_monotone(a in 0u64..1000, b in 0u64..1000, extra in 0u64..1000) {
        let gt = random_fsm(a);
        let inf = random_fsm(b);
        let (c1, a1) = pair_score(&gt, &inf);
        prop_assert!((0.0..=1.0).contains(&c1) && (0.0..=1.0).contains(&a1));
        let mut bigger = inf.clone();
        bigger.transitions.extend(random_fsm(extra).transitions);
        let (c2, a2) = pair_score(&gt, &bigger);
        prop_assert!(c2 >= c1 && a2 >= a1);
        prop_assert_eq!(pair_score(&gt, &gt), (1.0, 1.0));
    }

    #[test]
    fn splitting_preserves_conditions(seed in 0u64..1000) {
        let l = logic();
        for t in random_fsm(seed).transitions {
            prop_assert!(l.equivalent(&split_condition(&t, &l).unwrap(), &t.condition).unwrap());
        }
    }
}
