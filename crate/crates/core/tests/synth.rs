mod support;

use protofsm_core::logic::{parse_actions, parse_expr, Logic, LogicLimits, Value};
use protofsm_core::synth::{
    compile_model, emit_graph, merge_split_transitions, parse_graph, CompileConfig, Domain, Fsm,
    StateRef, SynthError, Transition,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::split_fsm::{compare_runs, random_split_fsm};

fn t(from: &str, to: Option<&str>, c: &str, a: &str) -> Transition {
    let from = if from == "*" {
        StateRef::Any
    } else {
        StateRef::Named(from.into())
    };
    Transition::new(
        from,
        to.map(String::from),
        parse_expr(c).unwrap(),
        parse_actions(a).unwrap(),
    )
}

#[test]
fn graph_round_trip() {
    let mut t1 = t(
        "idle",
        Some("wait"),
        "chan_ue_amf = registration_request",
        "chan_amf_ue := auth_request",
    );
    t1.provenance = vec![3, 7];
    let fsm = Fsm {
        participant: "amf".into(),
        states: vec!["idle".into(), "wait".into()],
        initial: "idle".into(),
        transitions: vec![
            t1,
            t(
                "wait",
                None,
                "timer_t3560_expired & counter < 5",
                "counter := counter + 1",
            ),
            t("*", Some("idle"), "abort", "timer_t3560_started := FALSE"),
        ],
    };
    let text = emit_graph(&fsm);
    assert!(text.contains("\"*\" -> \"idle\""));
    assert_eq!(parse_graph(&text).unwrap(), fsm);
    assert!(matches!(
        parse_graph("digraph \"x\" {\n  \"a\" -> \"b\";\n}"),
        Err(SynthError::Graph { line: 2, .. })
    ));
}

#[test]
fn merge_moves_actions_into_stronger_condition() {
    let fsm = Fsm {
        participant: "ue".into(),
        states: vec!["s".into()],
        initial: "s".into(),
        transitions: vec![
            t("s", None, "x & y", "a := TRUE"),
            t("s", None, "x", "b := TRUE"),
        ],
    };
    let r = merge_split_transitions(&fsm, &Logic::new(LogicLimits::default()));
    let labels: Vec<String> = r.fsm.transitions.iter().map(|t| t.label()).collect();
    assert_eq!(
        labels,
        ["x & y / a := TRUE; b := TRUE", "x & !(x & y) / b := TRUE"]
    );
}

#[test]
fn merge_collapses_equivalent_and_skips_conflicts() {
    let logic = Logic::new(LogicLimits::default());
    let fsm = Fsm {
        participant: "ue".into(),
        states: vec!["s".into(), "a".into(), "b".into()],
        initial: "s".into(),
        transitions: vec![
            t("s", None, "x & y", "p := TRUE"),
            t("s", None, "y & x", "q := TRUE"),
            t("s", Some("a"), "z", "r := TRUE"),
            t("s", Some("b"), "z", "r := TRUE"),
            t("s", None, "FALSE", "dead := TRUE"),
        ],
    };
    let r = merge_split_transitions(&fsm, &logic);
    assert_eq!(r.fsm.transitions.len(), 3);
    assert_eq!(r.fsm.transitions[0].label(), "x & y / p := TRUE; q := TRUE");
    let kinds: Vec<&str> = r.diagnostics.iter().map(|d| d.kind.as_str()).collect();
    assert!(kinds.contains(&"unsatisfiable"));
    assert!(kinds.contains(&"merge_conflict"));
}

#[test]
fn merged_random_fsms_match_fire_all() {
    let logic = Logic::new(LogicLimits::default());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..50 {
        let fsm = random_split_fsm(&mut rng);
        let merged = merge_split_transitions(&fsm, &logic);
        for _ in 0..20 {
            compare_runs(&fsm, &merged.fsm, &mut rng, 8)
                .unwrap_or_else(|e| panic!("case {case}: {e}"));
        }
    }
}

#[test]
fn compile_infers_domains_and_channels() {
    let cfg = CompileConfig::default();
    let ts = vec![
        (
            "ue".to_string(),
            t(
                "*",
                Some("registered"),
                "chan_amf_ue = registration_accept",
                "attempts := 0",
            ),
        ),
        (
            "network".to_string(),
            t(
                "*",
                None,
                "chan_ue_amf = registration_request",
                "chan_amf_ue := registration_accept; attempts := 4",
            ),
        ),
    ];
    let m = compile_model(ts, &cfg).unwrap();
    assert_eq!(m.participants, ["ue", "amf"]);
    assert_eq!(m.fsm("amf").unwrap().states, ["idle"]);
    assert_eq!(
        m.vars["chan_amf_ue"].domain,
        Domain::Enum {
            values: vec!["none".into(), "registration_accept".into()]
        }
    );
    assert_eq!(m.vars["attempts"].domain, Domain::Int { min: 0, max: 5 });
    assert_eq!(m.vars["chan_ue_amf"].init, Value::sym("none"));
    assert!(m.channel("chan_ue_amf").is_some());
    let back = protofsm_core::synth::Model::from_json(&m.to_json()).unwrap();
    assert_eq!(back, m);
}

#[test]
fn compile_rejects_mixed_types() {
    let ts = vec![
        ("ue".to_string(), t("*", None, "x", "y := 1")),
        ("ue".to_string(), t("*", None, "y", "x := TRUE")),
    ];
    assert_eq!(
        compile_model(ts, &CompileConfig::default()),
        Err(SynthError::TypeConflict { var: "y".into() })
    );
    let bad = vec![("enb".to_string(), t("*", None, "x", "y := TRUE"))];
    assert!(matches!(
        compile_model(bad, &CompileConfig::default()),
        Err(SynthError::UnknownParticipant(_))
    ));
}
