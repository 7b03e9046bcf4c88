use std::collections::{BTreeMap, BTreeSet};

use super::{Channel, Domain, Fsm, Model, StateRef, SynthError, Transition, VarDecl};
use crate::dsl::Env;
use crate::logic::{Atom, Rhs, Value};

#[derive(Clone, Debug, Default)]
pub struct CompileConfig {
    pub env: Env,
    /// Initial state per participant; otherwise the first named state.
    pub initial: BTreeMap<String, String>,
    /// Variables introduced by directives.
    pub nondet: BTreeSet<String>,
}

#[derive(Default)]
struct Usage {
    boolean: bool,
    ints: Option<i64>,
    syms: BTreeSet<String>,
}

fn note(usage: &mut BTreeMap<String, Usage>, var: &str, v: Option<&Value>) {
    let u = usage.entry(var.to_string()).or_default();
    match v {
        None | Some(Value::Bool(_)) => u.boolean = true,
        Some(Value::Int(n)) => u.ints = Some(u.ints.map_or(*n, |m| m.max(*n))),
        Some(Value::Sym(s)) => {
            u.syms.insert(s.clone());
        }
    }
}

/// Partitions attributed transitions into one FSM per participant, builds a
/// channel for every ordered participant pair and declares every variable
/// with a domain inferred from use.
pub fn compile_model(
    transitions: Vec<(String, Transition)>,
    cfg: &CompileConfig,
) -> Result<Model, SynthError> {
    if transitions.is_empty() {
        return Err(SynthError::EmptyModel);
    }
    let participants = cfg.env.participants.clone();
    let mut per: BTreeMap<String, Vec<Transition>> = BTreeMap::new();
    for (p, t) in transitions {
        let p = cfg.env.participant(&p);
        if !participants.contains(&p) {
            return Err(SynthError::UnknownParticipant(p));
        }
        per.entry(p).or_default().push(t);
    }

    let mut channels = Vec::new();
    for src in &participants {
        for dst in &participants {
            if src != dst {
                channels.push(Channel {
                    name: cfg.env.channel(src, dst),
                    src: src.clone(),
                    dst: dst.clone(),
                });
            }
        }
    }

    let mut fsms = Vec::new();
    let mut usage: BTreeMap<String, Usage> = BTreeMap::new();
    for p in &participants {
        let ts = per.remove(p).unwrap_or_default();
        let mut states: Vec<String> = Vec::new();
        let named = ts.iter().flat_map(|t| {
            let from = match &t.from {
                StateRef::Named(s) => Some(s),
                StateRef::Any => None,
            };
            from.into_iter().chain(t.to.as_ref())
        });
        for s in cfg.initial.get(p).into_iter().chain(named) {
            if !states.contains(s) {
                states.push(s.clone());
            }
        }
        if states.is_empty() {
            states.push("idle".to_string());
        }
        for t in &ts {
            for a in t.condition.atoms() {
                match &a {
                    Atom::Flag(v) => note(&mut usage, v, None),
                    Atom::Cmp { var, value, .. } => note(&mut usage, var, Some(value)),
                }
            }
            for a in &t.actions {
                match &a.rhs {
                    Rhs::Const(v) => note(&mut usage, &a.var, Some(v)),
                    Rhs::Inc | Rhs::Dec => note(&mut usage, &a.var, Some(&Value::Int(0))),
                }
            }
        }
        let initial = states[0].clone();
        fsms.push(Fsm {
            participant: p.clone(),
            states,
            initial,
            transitions: ts,
        });
    }

    let channel_names: BTreeSet<&str> = channels.iter().map(|c| c.name.as_str()).collect();
    let mut vars = BTreeMap::new();
    for name in &channel_names {
        usage.entry(name.to_string()).or_default();
    }
    for (name, u) in usage {
        let is_chan = channel_names.contains(name.as_str());
        let kinds =
            u.boolean as u8 + u.ints.is_some() as u8 + (!u.syms.is_empty() || is_chan) as u8;
        if kinds > 1 {
            return Err(SynthError::TypeConflict { var: name });
        }
        let decl = if is_chan || !u.syms.is_empty() {
            let mut values = vec!["none".to_string()];
            values.extend(u.syms.into_iter().filter(|s| s != "none"));
            VarDecl {
                domain: Domain::Enum { values },
                init: Value::sym("none"),
                nondet: false,
            }
        } else if let Some(max) = u.ints {
            VarDecl {
                domain: Domain::Int {
                    min: 0,
                    max: max.max(0) + 1,
                },
                init: Value::Int(0),
                nondet: false,
            }
        } else {
            VarDecl {
                domain: Domain::Bool,
                init: Value::Bool(false),
                nondet: cfg.nondet.contains(&name),
            }
        };
        vars.insert(name, decl);
    }
    Ok(Model {
        participants,
        fsms,
        channels,
        vars,
        adversary: None,
    })
}
