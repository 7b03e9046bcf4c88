//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fail.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use protofsm_core::checker::{
    check, instrument_adversary, parse_properties, AdversaryConfig, Capability, CheckOptions,
    Verdict,
};
use protofsm_core::dsl::{load_dsl_rules, Context, Env, Mode, Translator};
use protofsm_core::lexicon::Lexicon;
use protofsm_core::logic::{BoolExpr, Logic, LogicLimits};
use protofsm_core::metrics::{score, split_for_scoring};
use protofsm_core::par::Exec;
use protofsm_core::pipeline::sentence_tokens;
use protofsm_core::synth::{merge_split_transitions, parse_graph, Fsm, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data(rel: &str) -> PathBuf {
    root().join("data").join(rel)
}

fn read(p: &Path) -> Result<String, String> {
    fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn protofsm(args: &[&str]) -> Result<(i32, String), String> {
    let mut c = Command::new(env!("CARGO_BIN_EXE_protofsm"));
    c.args(args).current_dir(root());
    for (k, _) in std::env::vars() {
        if k.starts_with("PROTOFSM_") {
            c.env_remove(k);
        }
    }
    let o = c.output().map_err(|e| e.to_string())?;
    let code = o.status.code().unwrap_or(-1);
    if code != 0 && code != 1 {
        return Err(format!(
            "exit {code}: {}",
            String::from_utf8_lossy(&o.stderr)
        ));
    }
    Ok((code, String::from_utf8_lossy(&o.stdout).into_owned()))
}

fn extract(config: &str, corpus: &str, out: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    protofsm(&[
        "-c",
        data(config).to_str().unwrap(),
        "extract",
        data(corpus).to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ])?;
    Ok(start.elapsed())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `(condition, actions)` columns of transitions.tsv, in order.
fn table_rows(out: &Path) -> Result<Vec<(String, String)>, String> {
    Ok(read(&out.join("transitions.tsv"))?
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[3].to_string(), f[4].to_string())
        })
        .collect())
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

fn c1_sample_rows(tmp: &Path) -> Outcome {
    let expect = |rows: &[usize]| -> Vec<(String, String)> {
        rows.iter()
            .map(|&i| (SAMPLE_ROWS[i].0.to_string(), SAMPLE_ROWS[i].1.to_string()))
            .collect()
    };
    let mut slowest = Duration::ZERO;
    for (corpus, rows) in [
        ("corpus/sample_rows_gold.txt", &[0, 1, 2, 3][..]),
        ("corpus/sample_rows_pred.txt", &[0, 2, 3][..]),
    ] {
        let out = tmp.join(corpus.replace('/', "_"));
        let t = extract("config/sample_rows.toml", corpus, &out)?;
        slowest = slowest.max(t);
        let got = table_rows(&out)?;
        ensure(got == expect(rows), || format!("{corpus}: got {got:?}"))?;
    }
    ensure(slowest < Duration::from_secs(1), || {
        format!("took {slowest:?}")
    })?;
    Ok(format!(
        "4 gold rows and 3 predicted rows exact, slowest {slowest:.2?}"
    ))
}

fn c2_reject_span(tmp: &Path) -> Outcome {
    let out = tmp.join("reject");
    extract("config/reject.toml", "corpus/reject.txt", &out)?;
    let spans: Value =
        serde_json::from_str(&read(&out.join("spans.json"))?).map_err(|e| e.to_string())?;
    let cond = spans
        .as_array()
        .and_then(|a| a.iter().find(|s| s["label"] == "condition"))
        .ok_or("no condition span")?;
    let ast = "receive(UE, or(auth_reject, tau_reject))";
    let sigma = "assert σ[chan_ue_mme] = auth_reject | assert σ[chan_ue_mme] = tau_reject";
    ensure(cond["ast"] == ast, || format!("ast {}", cond["ast"]))?;
    ensure(cond["sigma"] == sigma, || {
        format!("sigma {}", cond["sigma"])
    })?;
    Ok(format!("{ast} => {sigma}"))
}

fn self_score(f: &Fsm, logic: &Logic) -> Result<(f64, f64), String> {
    let s = split_for_scoring(f, logic).map_err(|e| e.to_string())?;
    let r = score(&s, &s, Exec::Sequential);
    Ok((r.condition_accuracy, r.action_accuracy))
}

fn c3_scoring() -> Outcome {
    let logic = Logic::new(LogicLimits::default());
    let graph = |rel: &str| -> Result<Fsm, String> {
        parse_graph(&read(&data(rel))?).map_err(|e| format!("{rel}: {e}"))
    };
    let split = |f: &Fsm| split_for_scoring(f, &logic).map_err(|e| e.to_string());
    let cond = score(
        &split(&graph("metrics/worked_conditions_gt.dot")?)?,
        &split(&graph("metrics/worked_conditions_inf.dot")?)?,
        Exec::Sequential,
    )
    .condition_accuracy;
    let act = score(
        &split(&graph("metrics/worked_actions_gt.dot")?)?,
        &split(&graph("metrics/worked_actions_inf.dot")?)?,
        Exec::Sequential,
    )
    .action_accuracy;
    ensure((cond - 1.0 / 3.0).abs() < 1e-9, || {
        format!("condition accuracy {cond}")
    })?;
    ensure((act - 0.25).abs() < 1e-9, || {
        format!("action accuracy {act}")
    })?;

    let mut fixtures: Vec<(String, Fsm)> = Vec::new();
    for dir in ["metrics", "corpus"] {
        let mut names: Vec<PathBuf> = fs::read_dir(data(dir))
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "dot"))
            .collect();
        names.sort();
        for p in names {
            let f = parse_graph(&read(&p)?).map_err(|e| format!("{}: {e}", p.display()))?;
            fixtures.push((p.display().to_string(), f));
        }
    }
    for name in [
        "cag_fragment.json",
        "nas_count_replayable.json",
        "nas_count_strict.json",
    ] {
        let m = Model::from_json(&read(&data(&format!("checker/{name}")))?)
            .map_err(|e| e.to_string())?;
        fixtures.extend(
            m.fsms
                .into_iter()
                .map(|f| (format!("{name}:{}", f.participant), f)),
        );
    }
    for (name, f) in &fixtures {
        let s = self_score(f, &logic)?;
        ensure(s == (1.0, 1.0), || {
            format!("{name} scores {s:?} against itself")
        })?;
    }
    Ok(format!(
        "{cond:.4} and {act:.4}; {} fixture FSMs score 1.0 against themselves",
        fixtures.len()
    ))
}

fn c4_paraphrases() -> Outcome {
    let lexicon = Lexicon::parse(&read(&data("lexicon.tsv"))?).map_err(|e| e.to_string())?;
    let rules = load_dsl_rules(&read(&data("dsl_rules.txt"))?).map_err(|e| e.to_string())?;
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
    let mut same = 0;
    let mut total = 0;
    let mut first_bad = None;
    for line in read(&data("corpus/paraphrases.tsv"))?
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let f: Vec<&str> = line.split('\t').collect();
        let mode = if f[0] == "action" {
            Mode::Action
        } else {
            Mode::Condition
        };
        total += 1;
        let a = tr.translate(&sentence_tokens(f[1]), mode, &Context::default());
        let b = tr.translate(&sentence_tokens(f[2]), mode, &Context::default());
        match (a, b) {
            (Ok(a), Ok(b)) if a.ir == b.ir => same += 1,
            _ => {
                first_bad.get_or_insert_with(|| f[1].to_string());
            }
        }
    }
    ensure(same >= 10, || {
        format!(
            "{same}/{total} identical, first miss `{}`",
            first_bad.unwrap_or_default()
        )
    })?;
    Ok(format!("{same}/{total} pairs identical"))
}

fn c5_truth_tables() -> Outcome {
    use support::exprs::{all_stores, check_pair, random_expr};
    let start = Instant::now();
    let stores = all_stores();
    let logic = Logic::new(LogicLimits::default());
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for case in 0..1000 {
        let n = rng.gen_range(1..=10);
        let a = random_expr(&mut rng, n);
        let b = match rng.gen_range(0..3) {
            0 => {
                let m = rng.gen_range(1..=10);
                random_expr(&mut rng, m)
            }
            1 => BoolExpr::Or(vec![a.clone(), random_expr(&mut rng, 2)]),
            _ => BoolExpr::And(vec![a.clone(), random_expr(&mut rng, 2)]),
        };
        check_pair(&logic, &stores, &a, &b).map_err(|e| format!("case {case}: {e}"))?;
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(30), || format!("took {t:?}"))?;
    Ok(format!(
        "1000 expressions over {} stores in {t:.2?}",
        stores.len()
    ))
}

fn c6_merge() -> Outcome {
    use support::split_fsm::{compare_runs, random_split_fsm};
    let logic = Logic::new(LogicLimits::default());
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for case in 0..50 {
        let fsm = random_split_fsm(&mut rng);
        let merged = merge_split_transitions(&fsm, &logic);
        for _ in 0..20 {
            compare_runs(&fsm, &merged.fsm, &mut rng, 8).map_err(|e| format!("fsm {case}: {e}"))?;
        }
    }
    Ok("50 FSMs x 20 random runs of depth 8".into())
}

fn c7_checker() -> Outcome {
    let model = |name: &str| -> Result<Model, String> {
        Model::from_json(&read(&data(&format!("checker/{name}")))?).map_err(|e| e.to_string())
    };
    let prop = |file: &str, name: &str| -> Result<_, String> {
        parse_properties(&read(&data(&format!("checker/{file}")))?)
            .map_err(|(line, e)| format!("line {line}: {e}"))?
            .into_iter()
            .find(|p| p.name == name)
            .ok_or(format!("no property {name}"))
    };
    let adv = |caps: &[Capability], inj: &[&str]| AdversaryConfig {
        capabilities: caps.to_vec(),
        injectable: inj.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    let timed = |m: &Model, p, opts: &CheckOptions| -> Result<(Verdict, Duration), String> {
        let start = Instant::now();
        let r = check(m, p, opts).map_err(|e| e.to_string())?;
        let t = start.elapsed();
        ensure(t < Duration::from_secs(10), || format!("took {t:?}"))?;
        Ok((r.verdict, t))
    };

    let fresh = prop("nas_count.ltl", "freshness")?;
    let m = instrument_adversary(
        &model("nas_count_replayable.json")?,
        &adv(&[Capability::Replay], &[]),
    );
    let (v, t1) = timed(&m, &fresh, &CheckOptions::default())?;
    let steps = match v {
        Verdict::Violated { trace } if trace.len() <= 12 => trace.len(),
        other => return Err(format!("replay: {other:?}")),
    };

    let m = instrument_adversary(
        &model("nas_count_strict.json")?,
        &adv(&[Capability::Replay], &[]),
    );
    let opts = CheckOptions {
        bound: 40,
        ..Default::default()
    };
    let (v, t2) = timed(&m, &fresh, &opts)?;
    ensure(
        matches!(v, Verdict::Proven | Verdict::HoldsWithinBound { .. }),
        || format!("strict: {v:?}"),
    )?;

    let m = instrument_adversary(
        &model("cag_fragment.json")?,
        &adv(
            &[Capability::Inject, Capability::Modify],
            &["registration_request"],
        ),
    );
    let (v, t3) = timed(
        &m,
        &prop("cag.ltl", "cag_list_kept")?,
        &CheckOptions::default(),
    )?;
    ensure(matches!(v, Verdict::Violated { .. }), || {
        format!("cag: {v:?}")
    })?;
    Ok(format!(
        "replay violated in {steps} steps ({t1:.2?}), strict holds at bound 40 ({t2:.2?}), CAG violated ({t3:.2?})"
    ))
}

fn c8_nas4g(tmp: &Path) -> Outcome {
    let out = tmp.join("nas4g");
    let t = extract("config/nas4g.toml", "corpus/nas4g.txt", &out)?;
    let logic = Logic::new(LogicLimits::default());
    let mut gold = Vec::new();
    let mut inferred = Vec::new();
    for p in ["ue", "mme"] {
        let g = parse_graph(&read(&data(&format!("corpus/nas4g_gold_{p}.dot")))?)
            .map_err(|e| e.to_string())?;
        let i = parse_graph(&read(&out.join(format!("{p}.dot")))?).map_err(|e| e.to_string())?;
        gold.extend(split_for_scoring(&g, &logic).map_err(|e| e.to_string())?);
        inferred.extend(split_for_scoring(&i, &logic).map_err(|e| e.to_string())?);
    }
    let r = score(&gold, &inferred, Exec::Sequential);
    ensure(
        r.condition_accuracy >= 0.85 && r.action_accuracy >= 0.85,
        || r.to_table(),
    )?;
    ensure(t < Duration::from_secs(120), || format!("took {t:?}"))?;
    Ok(format!(
        "condition {:.4}, action {:.4}, pipeline {t:.2?}",
        r.condition_accuracy, r.action_accuracy
    ))
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = e.map_err(|e| e.to_string())?.path();
        out.insert(
            p.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&p).map_err(|e| e.to_string())?,
        );
    }
    Ok(out)
}

fn c9_determinism(tmp: &Path) -> Outcome {
    let mut files = 0;
    for (config, corpus) in [
        ("config/sample_rows.toml", "corpus/sample_rows_gold.txt"),
        ("config/reject.toml", "corpus/reject.txt"),
        ("config/nas4g.toml", "corpus/nas4g.txt"),
    ] {
        let mut runs = Vec::new();
        for i in 0..2 {
            let out = tmp.join(format!("det_{i}_{}", corpus.replace('/', "_")));
            extract(config, corpus, &out)?;
            runs.push(snapshot(&out)?);
        }
        ensure(runs[0] == runs[1], || format!("{corpus} outputs differ"))?;
        files += runs[0].len();
    }
    let mut reports = Vec::new();
    for i in 0..2 {
        let json = tmp.join(format!("check_{i}.json"));
        protofsm(&[
            "--capability",
            "replay,drop",
            "check",
            data("checker/nas_count_replayable.json").to_str().unwrap(),
            data("checker/nas_count.ltl").to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
        ])?;
        reports.push(fs::read(&json).map_err(|e| e.to_string())?);
    }
    ensure(reports[0] == reports[1], || "check reports differ".into())?;
    Ok(format!(
        "{} files byte-identical across two runs",
        files + 1
    ))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let t = tmp.path();
    let criteria: Vec<Criterion> = vec![
        ("reference rows", Box::new(|| c1_sample_rows(t))),
        ("reject span", Box::new(|| c2_reject_span(t))),
        ("worked scoring examples", Box::new(c3_scoring)),
        ("paraphrase invariance", Box::new(c4_paraphrases)),
        ("logic against truth tables", Box::new(c5_truth_tables)),
        ("merge soundness", Box::new(c6_merge)),
        ("checker fixtures", Box::new(c7_checker)),
        ("4G corpus accuracy", Box::new(|| c8_nas4g(t))),
        ("determinism", Box::new(|| c9_determinism(t))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {}  {name}: {detail}", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {}  {name}: {e}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
