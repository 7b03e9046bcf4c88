use std::collections::BTreeMap;
use std::path::PathBuf;

use protofsm_core::annotation::parse_annotated;
use protofsm_core::dsl::{load_dsl_rules, ChannelNaming, Env, RuleSet};
use protofsm_core::lexicon::Lexicon;
use protofsm_core::logic::LogicLimits;
use protofsm_core::par::Exec;
use protofsm_core::pipeline::{extract, ExtractOptions, Extraction, TransitionRow};

fn data(rel: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn resources() -> (Lexicon, RuleSet) {
    (
        Lexicon::parse(&data("lexicon.tsv")).unwrap(),
        load_dsl_rules(&data("dsl_rules.txt")).unwrap(),
    )
}

fn sample_rows_options() -> ExtractOptions {
    ExtractOptions {
        env: Env::default(),
        default_participant: "amf".into(),
        merge: false,
        ..ExtractOptions::default()
    }
}

fn run(text: &str, opts: &ExtractOptions, exec: Exec) -> Extraction {
    let (lex, rules) = resources();
    let paras = parse_annotated(text).unwrap();
    extract(&paras, &lex, &rules, opts, LogicLimits::default(), exec).unwrap()
}

fn rows(x: &Extraction, paragraph: usize) -> Vec<(String, String)> {
    x.blocks
        .iter()
        .filter(|b| b.paragraph == paragraph)
        .flat_map(|b| b.transitions.iter())
        .map(|t: &TransitionRow| (t.condition.clone(), t.actions.clone()))
        .collect()
}

const SAMPLE_ROWS: [(&str, &str); 4] = [
    (
        "chan_ue_amf = deregistration_accept",
        "timer_t3522_started = FALSE",
    ),
    (
        "timer_t3460_started & timer_t3460_expired & timer_t3460_expire_counter = 1",
        "chan_amf_ue = auth_request",
    ),
    (
        "accept_sm_command",
        "nas_security_context_update = TRUE, nas_security_context_valid = TRUE",
    ),
    (
        "chan_amf_ue = deregistration_accept & timer_t3519_started",
        "timer_t3519_started = FALSE",
    ),
];

#[test]
fn sample_rows_gold_rows() {
    let x = run(
        &data("corpus/sample_rows_gold.txt"),
        &sample_rows_options(),
        Exec::Sequential,
    );
    for (i, (c, a)) in SAMPLE_ROWS.iter().enumerate() {
        assert_eq!(
            rows(&x, i),
            vec![(c.to_string(), a.to_string())],
            "row {}",
            i + 1
        );
    }
}

#[test]
fn sample_rows_predicted_rows_recover() {
    let x = run(
        &data("corpus/sample_rows_pred.txt"),
        &sample_rows_options(),
        Exec::Sequential,
    );
    for (p, row) in [(0, 0), (1, 2), (2, 3)] {
        let (c, a) = SAMPLE_ROWS[row];
        assert_eq!(
            rows(&x, p),
            vec![(c.to_string(), a.to_string())],
            "row {}",
            row + 1
        );
    }
    assert!(x
        .spans
        .iter()
        .any(|s| s.recovered && s.text == "stop timer T3519"));
}

#[test]
fn reject_span_translates() {
    let opts = ExtractOptions {
        env: Env {
            participants: vec!["ue".into(), "mme".into()],
            agent_aliases: BTreeMap::from([("network".into(), "mme".into())]),
            channel_naming: ChannelNaming::DstSrc,
            ..Env::default()
        },
        default_participant: "ue".into(),
        ..ExtractOptions::default()
    };
    let x = run(&data("corpus/reject.txt"), &opts, Exec::Sequential);
    let cond = x.spans.iter().find(|s| s.label == "condition").unwrap();
    assert_eq!(
        cond.ast.as_deref(),
        Some("receive(UE, or(auth_reject, tau_reject))")
    );
    let ue = x.model.fsm("ue").unwrap();
    assert_eq!(
        ue.transitions[0].condition.to_sigma_string(),
        "assert σ[chan_ue_mme] = auth_reject | assert σ[chan_ue_mme] = tau_reject"
    );
    assert_eq!(ue.transitions[0].to.as_deref(), Some("emm_deregistered"));
}

#[test]
fn untranslatable_spans_are_reported() {
    let text = "<control><condition> when the moon is blue </condition><action> the UE shall stop timer T3410 </action></control>";
    let x = run(text, &sample_rows_options(), Exec::Sequential);
    assert_eq!(x.skipped().count(), 1);
    assert!(x.diagnostics.iter().any(|d| d.kind == "skipped_span"));
    assert_eq!(
        rows(&x, 0),
        vec![(
            "TRUE".to_string(),
            "timer_t3410_started = FALSE".to_string()
        )]
    );
}

#[test]
fn context_fills_missing_agent_from_history() {
    let text = "The MME starts the procedure .\n\n<control><condition> upon receipt of the ATTACH COMPLETE message </condition><action> stop timer T3450 </action></control>";
    let opts = ExtractOptions {
        env: Env {
            participants: vec!["ue".into(), "mme".into()],
            agent_aliases: BTreeMap::from([("network".into(), "mme".into())]),
            ..Env::default()
        },
        default_participant: "ue".into(),
        ..ExtractOptions::default()
    };
    let x = run(text, &opts, Exec::Sequential);
    let t = &x.blocks[0].transitions[0];
    assert_eq!(t.participant, "mme");
    assert_eq!(t.condition, "chan_ue_mme = attach_complete");
}

#[test]
fn modes_agree() {
    let text = data("corpus/sample_rows_gold.txt");
    let a = run(&text, &sample_rows_options(), Exec::Sequential);
    let b = run(&text, &sample_rows_options(), Exec::Parallel);
    assert_eq!(a, b);
}

#[test]
fn paraphrases_translate_identically() {
    use protofsm_core::dsl::{Context, Mode, Translator};
    use protofsm_core::pipeline::sentence_tokens;
    let (lexicon, rules) = resources();
    let env = Env {
        participants: vec!["ue".into(), "mme".into()],
        agent_aliases: BTreeMap::from([("network".into(), "mme".into())]),
        ..Env::default()
    };
    let tr = Translator {
        lexicon: &lexicon,
        rules: &rules,
        env: &env,
        threshold: 0.2,
    };
    let mut n = 0;
    let mut bad = Vec::new();
    for line in data("corpus/paraphrases.tsv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
    {
        let f: Vec<&str> = line.split('\t').collect();
        let mode = if f[0] == "action" {
            Mode::Action
        } else {
            Mode::Condition
        };
        let a = tr.translate(&sentence_tokens(f[1]), mode, &Context::default());
        let b = tr.translate(&sentence_tokens(f[2]), mode, &Context::default());
        match (a, b) {
            (Ok(a), Ok(b)) if a.ir == b.ir => n += 1,
            (Ok(a), Ok(b)) => bad.push(format!("`{}` = {} vs `{}` = {}", f[1], a.ast, f[2], b.ast)),
            (a, b) => bad.push(format!(
                "`{}`: {:?} / `{}`: {:?}",
                f[1],
                a.err(),
                f[2],
                b.err()
            )),
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("\n"));
    assert!(n >= 10);
}

fn nas4g_options() -> ExtractOptions {
    ExtractOptions {
        env: Env {
            participants: vec!["ue".into(), "mme".into()],
            agent_aliases: BTreeMap::from([("network".into(), "mme".into())]),
            ..Env::default()
        },
        default_participant: "ue".into(),
        initial: BTreeMap::from([
            ("ue".into(), "emm_deregistered".into()),
            ("mme".into(), "emm_deregistered".into()),
        ]),
        ..ExtractOptions::default()
    }
}

#[test]
fn nas4g_corpus_against_gold() {
    use protofsm_core::logic::Logic;
    use protofsm_core::metrics::{score, split_for_scoring};
    use protofsm_core::synth::parse_graph;
    let x = run(&data("corpus/nas4g.txt"), &nas4g_options(), Exec::Parallel);
    let logic = Logic::new(LogicLimits::default());
    let mut gold = Vec::new();
    let mut inferred = Vec::new();
    for p in ["ue", "mme"] {
        let g = parse_graph(&data(&format!("corpus/nas4g_gold_{p}.dot"))).unwrap();
        gold.extend(split_for_scoring(&g, &logic).unwrap());
        inferred.extend(split_for_scoring(x.model.fsm(p).unwrap(), &logic).unwrap());
    }
    let r = score(&gold, &inferred, Exec::Sequential);
    assert!(r.condition_accuracy >= 0.85, "{}", r.to_table());
    assert!(r.action_accuracy >= 0.85, "{}", r.to_table());
}
