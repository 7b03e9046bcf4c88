//! Random FSMs whose behaviour is split over overlapping transitions, and a
//! fire-all reference semantics to compare merged FSMs against.

use std::collections::BTreeMap;

use protofsm_core::logic::{parse_actions, parse_expr, Value};
use protofsm_core::synth::{Fsm, StateRef, Transition};
use rand::seq::SliceRandom;
use rand::Rng;

pub const MSGS: [&str; 4] = ["m0", "m1", "m2", "m3"];
pub const FLAGS: [&str; 3] = ["f1", "f2", "f3"];

/// Each state gets up to three groups keyed by a distinct `msg` value. A
/// group is a chain `C`, `C & f1`, `C & f1 & f2`… whose members write
/// distinct outputs and agree on at most one target.
pub fn random_split_fsm(rng: &mut impl Rng) -> Fsm {
    let states: Vec<String> = (0..3).map(|i| format!("s{i}")).collect();
    let mut transitions = Vec::new();
    let mut out = 0;
    for s in &states {
        let mut msgs = MSGS.to_vec();
        msgs.shuffle(rng);
        for m in msgs.iter().take(rng.gen_range(1..=3)) {
            let mut flags = FLAGS.to_vec();
            flags.shuffle(rng);
            let len = rng.gen_range(1..=3);
            let target = rng
                .gen_bool(0.5)
                .then(|| states[rng.gen_range(0..states.len())].clone());
            for k in 0..len {
                let mut cond = format!("msg = {m}");
                for f in &flags[..k] {
                    cond.push_str(&format!(" & {f}"));
                }
                let mut acts = format!("o{out} := TRUE");
                out += 1;
                if rng.gen_bool(0.3) {
                    acts.push_str(&format!(
                        "; level := {}",
                        msgs.iter().position(|x| x == m).unwrap()
                    ));
                }
                let to = if rng.gen_bool(0.5) {
                    target.clone()
                } else {
                    None
                };
                transitions.push(Transition::new(
                    StateRef::Named(s.clone()),
                    to,
                    parse_expr(&cond).unwrap(),
                    parse_actions(&acts).unwrap(),
                ));
            }
        }
        if rng.gen_bool(0.2) {
            transitions.push(Transition::new(
                StateRef::Named(s.clone()),
                Some(states[0].clone()),
                parse_expr("msg = m0 & msg = m1").unwrap(),
                parse_actions("dead := TRUE").unwrap(),
            ));
        }
    }
    transitions.shuffle(rng);
    Fsm {
        participant: "p".into(),
        initial: states[0].clone(),
        states,
        transitions,
    }
}

pub type Store = BTreeMap<String, Value>;

pub fn random_inputs(rng: &mut impl Rng) -> Store {
    let mut m = Store::new();
    m.insert("msg".into(), Value::sym(*MSGS.choose(rng).unwrap()));
    for f in FLAGS {
        m.insert(f.into(), Value::Bool(rng.gen_bool(0.5)));
    }
    m
}

fn enabled<'a>(fsm: &'a Fsm, state: &str, env: &Store) -> Vec<&'a Transition> {
    fsm.transitions
        .iter()
        .filter(|t| t.from == StateRef::Any || t.from == StateRef::Named(state.to_string()))
        .filter(|t| t.condition.eval_with(&|v| env.get(v).cloned()))
        .collect()
}

fn apply(ts: &[&Transition], state: &str, store: &Store) -> (String, Store) {
    let mut next = store.clone();
    let mut to = state.to_string();
    for t in ts {
        for a in &t.actions {
            if let protofsm_core::logic::Rhs::Const(v) = &a.rhs {
                next.insert(a.var.clone(), v.clone());
            }
        }
        if let Some(x) = &t.to {
            to = x.clone();
        }
    }
    (to, next)
}

/// Runs `original` with every enabled transition firing at once and
/// `merged` with exactly one, over random inputs for `depth` steps.
pub fn compare_runs(
    original: &Fsm,
    merged: &Fsm,
    rng: &mut impl Rng,
    depth: usize,
) -> Result<(), String> {
    let mut a = (original.initial.clone(), Store::new());
    let mut b = a.clone();
    for step in 0..depth {
        let env = random_inputs(rng);
        let ea = enabled(original, &a.0, &env);
        let eb = enabled(merged, &b.0, &env);
        if eb.len() > 1 {
            return Err(format!(
                "step {step}: {} merged transitions enabled together",
                eb.len()
            ));
        }
        a = apply(&ea, &a.0, &a.1);
        b = apply(&eb, &b.0, &b.1);
        if a != b {
            return Err(format!(
                "step {step}: fire-all gives {a:?}, merged gives {b:?}"
            ));
        }
    }
    Ok(())
}
