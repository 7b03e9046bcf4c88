//! NuSMV rendering of a model, for cross-checking with an external tool.
//! The adversary is not encoded; channels behave as reliable one-slot
//! buffers.

use std::fmt::Write;

use super::ltl::{Ltl, LtlProperty};
use crate::logic::{BoolExpr, Rhs, Value};
use crate::synth::{Domain, Model, StateRef};

fn ident(v: &str) -> String {
    v.replace('.', "_")
}

fn expr(e: &BoolExpr) -> String {
    e.map_vars(&|v| ident(v)).to_string()
}

fn ltl(f: &Ltl) -> String {
    match f {
        Ltl::Prop(p) => format!("({})", expr(p)),
        Ltl::Not(a) => format!("!{}", ltl(a)),
        Ltl::And(x, y) => format!("({} & {})", ltl(x), ltl(y)),
        Ltl::Or(x, y) => format!("({} | {})", ltl(x), ltl(y)),
        Ltl::Next(a) => format!("X {}", ltl(a)),
        Ltl::Until(x, y) => format!("({} U {})", ltl(x), ltl(y)),
        Ltl::Release(x, y) => format!("({} V {})", ltl(x), ltl(y)),
        Ltl::Globally(a) => format!("G {}", ltl(a)),
        Ltl::Finally(a) => format!("F {}", ltl(a)),
    }
}

fn domain(d: &Domain) -> String {
    match d {
        Domain::Bool => "boolean".into(),
        Domain::Enum { values } => format!("{{{}}}", values.join(", ")),
        Domain::Int { min, max } => format!("{min}..{max}"),
    }
}

/// Transition id of FSM `p`, index `i` in its wildcard-expanded list.
fn tid(p: &str, i: usize) -> String {
    format!("{p}_t{i}")
}

pub fn to_smv(model: &Model, properties: &[LtlProperty]) -> String {
    let mut o = String::new();
    let expanded: Vec<_> = model.fsms.iter().map(|f| f.expand_wildcards()).collect();
    writeln!(o, "MODULE main").unwrap();
    writeln!(o, "VAR").unwrap();
    for f in &model.fsms {
        writeln!(
            o,
            "  {}_state : {{{}}};",
            f.participant,
            f.states.join(", ")
        )
        .unwrap();
    }
    for (v, d) in &model.vars {
        writeln!(o, "  {v} : {};", domain(&d.domain)).unwrap();
    }
    writeln!(o, "IVAR").unwrap();
    for (f, ts) in model.fsms.iter().zip(&expanded) {
        let mut picks = vec![format!("{}_idle", f.participant)];
        picks.extend((0..ts.len()).map(|i| tid(&f.participant, i)));
        writeln!(o, "  {}_pick : {{{}}};", f.participant, picks.join(", ")).unwrap();
    }
    writeln!(o, "DEFINE").unwrap();
    for (f, ts) in model.fsms.iter().zip(&expanded) {
        for (i, t) in ts.iter().enumerate() {
            let StateRef::Named(from) = &t.from else {
                unreachable!()
            };
            writeln!(
                o,
                "  {}_en := {}_state = {from} & ({});",
                tid(&f.participant, i),
                f.participant,
                expr(&t.condition)
            )
            .unwrap();
        }
    }
    // A participant fires one enabled transition, or idles when none is.
    for (f, ts) in model.fsms.iter().zip(&expanded) {
        let p = &f.participant;
        let mut parts: Vec<String> = (0..ts.len())
            .map(|i| format!("({p}_pick = {t} -> {t}_en)", t = tid(p, i)))
            .collect();
        let any: Vec<String> = (0..ts.len()).map(|i| format!("{}_en", tid(p, i))).collect();
        let any = if any.is_empty() {
            "FALSE".to_string()
        } else {
            any.join(" | ")
        };
        parts.push(format!("({p}_pick = {p}_idle -> !({any}))"));
        writeln!(o, "TRANS\n  {};", parts.join("\n  & ")).unwrap();
    }
    writeln!(o, "ASSIGN").unwrap();
    for f in &model.fsms {
        writeln!(o, "  init({}_state) := {};", f.participant, f.initial).unwrap();
    }
    for (v, d) in &model.vars {
        if !d.nondet {
            writeln!(o, "  init({v}) := {};", d.init).unwrap();
        }
    }
    for (f, ts) in model.fsms.iter().zip(&expanded) {
        let p = &f.participant;
        writeln!(o, "  next({p}_state) := case").unwrap();
        for (i, t) in ts.iter().enumerate() {
            if let Some(to) = &t.to {
                writeln!(o, "    {p}_pick = {} : {to};", tid(p, i)).unwrap();
            }
        }
        writeln!(o, "    TRUE : {p}_state;\n  esac;").unwrap();
    }
    for (v, d) in &model.vars {
        if d.nondet {
            continue;
        }
        let mut arms = Vec::new();
        // Later participants win conflicting writes.
        for (f, ts) in model.fsms.iter().zip(&expanded).rev() {
            for (i, t) in ts.iter().enumerate() {
                for a in t.actions.iter().filter(|a| a.var == *v) {
                    let rhs = match (&a.rhs, &d.domain) {
                        (Rhs::Const(Value::Int(n)), Domain::Int { min, max }) => {
                            n.clamp(min, max).to_string()
                        }
                        (Rhs::Const(c), _) => c.to_string(),
                        (Rhs::Inc, Domain::Int { max, .. }) => format!("min({v} + 1, {max})"),
                        (Rhs::Dec, Domain::Int { min, .. }) => format!("max({v} - 1, {min})"),
                        _ => v.clone(),
                    };
                    arms.push(format!(
                        "{}_pick = {} : {rhs};",
                        f.participant,
                        tid(&f.participant, i)
                    ));
                }
            }
        }
        let chan = model.channel(v).or_else(|| model.field_channel(v));
        if let Some(c) = chan {
            let fired_reader: Vec<String> = model
                .fsms
                .iter()
                .zip(&expanded)
                .filter(|(f, _)| f.participant == c.dst)
                .flat_map(|(f, ts)| {
                    ts.iter()
                        .enumerate()
                        .filter(|(_, t)| t.condition.variables().contains(&c.name))
                        .map(|(i, _)| {
                            format!("{}_pick = {}", f.participant, tid(&f.participant, i))
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
            if model.channel(v).is_none() {
                // A field resets whenever its message slot is rewritten.
                let writers: Vec<String> = model
                    .fsms
                    .iter()
                    .zip(&expanded)
                    .flat_map(|(f, ts)| {
                        ts.iter()
                            .enumerate()
                            .filter(|(_, t)| t.actions.iter().any(|a| a.var == c.name))
                            .map(|(i, _)| {
                                format!("{}_pick = {}", f.participant, tid(&f.participant, i))
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect();
                if !writers.is_empty() {
                    arms.push(format!("{} : {};", writers.join(" | "), d.init));
                }
            }
            if !fired_reader.is_empty() {
                arms.push(format!("{} : {};", fired_reader.join(" | "), d.init));
            }
        }
        if arms.is_empty() {
            writeln!(o, "  next({v}) := {v};").unwrap();
        } else {
            writeln!(o, "  next({v}) := case").unwrap();
            for a in arms {
                writeln!(o, "    {a}").unwrap();
            }
            writeln!(o, "    TRUE : {v};\n  esac;").unwrap();
        }
    }
    for p in properties {
        writeln!(o, "LTLSPEC NAME {} := {};", p.name, ltl(&p.formula)).unwrap();
    }
    o
}
