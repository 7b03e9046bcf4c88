//! Explicit-state step relation of a model composed with the adversary.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{AdversaryConfig, Capability, CheckError};
use crate::logic::{BoolExpr, Rhs, Value};
use crate::synth::{Domain, Model, StateRef};

/// Global state: FSM state indices, variable value indices, and per channel
/// a FIFO of buffered `[message, field…]` entries for replay.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub fsm: Vec<u16>,
    pub vars: Vec<u16>,
    pub buffers: Vec<Vec<Vec<u16>>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AdvAction {
    Drop { channel: String },
    Inject { channel: String, msg: String },
    Modify { channel: String, msg: String },
    Replay { channel: String, entry: usize },
}

impl std::fmt::Display for AdvAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdvAction::Drop { channel } => write!(f, "drop {channel}"),
            AdvAction::Inject { channel, msg } => write!(f, "inject {msg} on {channel}"),
            AdvAction::Modify { channel, msg } => write!(f, "modify {channel} to {msg}"),
            AdvAction::Replay { channel, entry } => {
                write!(f, "replay buffered #{entry} on {channel}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fired {
    pub participant: String,
    /// Index into the FSM's wildcard-expanded transition list.
    pub index: usize,
    pub label: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepLabel {
    pub adversary: Vec<AdvAction>,
    /// Fresh values of nondeterministic inputs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<(String, Value)>,
    pub fired: Vec<Fired>,
}

pub(crate) struct CTrans {
    pub from: u16,
    pub to: u16,
    pub cond: BoolExpr,
    pub actions: Vec<(usize, Rhs)>,
    pub reads: Vec<usize>,
    pub label: String,
}

pub(crate) struct CFsm {
    pub participant: String,
    pub states: Vec<String>,
    pub trans: Vec<CTrans>,
}

pub(crate) struct CChan {
    pub name: String,
    pub var: usize,
    pub fields: Vec<usize>,
    pub dst: Option<usize>,
    pub injectable: Vec<u16>,
}

/// Index-based form of a model used by the explorer.
pub struct Compiled {
    pub(crate) names: Vec<String>,
    pub(crate) domains: Vec<Vec<Value>>,
    pub(crate) index: HashMap<String, usize>,
    pub(crate) inits: Vec<u16>,
    pub(crate) nondet: Vec<usize>,
    pub(crate) fsms: Vec<CFsm>,
    pub(crate) chans: Vec<CChan>,
    pub(crate) adversary: AdversaryConfig,
}

fn value_index(domain: &[Value], v: &Value) -> Option<u16> {
    domain.iter().position(|d| d == v).map(|i| i as u16)
}

impl Compiled {
    pub fn new(model: &Model) -> Result<Compiled, CheckError> {
        let bad = |msg: String| CheckError::BadModel(msg);
        let names: Vec<String> = model.vars.keys().cloned().collect();
        let index: HashMap<String, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut domains = Vec::new();
        let mut inits = Vec::new();
        for (name, d) in &model.vars {
            if let Domain::Int { min, max } = d.domain {
                if max < min || max - min > 4096 {
                    return Err(CheckError::UnboundedDomain(name.clone()));
                }
            }
            let vals = d.domain.values();
            let init = value_index(&vals, &d.init)
                .ok_or_else(|| bad(format!("init of `{name}` outside its domain")))?;
            domains.push(vals);
            inits.push(init);
        }
        let nondet = model
            .vars
            .iter()
            .filter(|(_, d)| d.nondet)
            .map(|(n, _)| index[n])
            .collect();
        let adversary = model.adversary.clone().unwrap_or_default();
        let fsm_index = |p: &str| model.fsms.iter().position(|f| f.participant == p);
        let mut chans = Vec::new();
        for c in &model.channels {
            let var = *index
                .get(&c.name)
                .ok_or_else(|| bad(format!("channel `{}` is not declared", c.name)))?;
            let fields = names
                .iter()
                .enumerate()
                .filter(|(_, n)| model.field_channel(n).is_some_and(|fc| fc.name == c.name))
                .map(|(i, _)| i)
                .collect();
            let injectable = adversary
                .injectable
                .iter()
                .filter_map(|m| value_index(&domains[var], &Value::sym(m.clone())))
                .collect();
            chans.push(CChan {
                name: c.name.clone(),
                var,
                fields,
                dst: fsm_index(&c.dst),
                injectable,
            });
        }
        let mut fsms = Vec::new();
        for f in &model.fsms {
            let sidx = |s: &str| f.states.iter().position(|x| x == s).map(|i| i as u16);
            let mut trans = Vec::new();
            for t in f.expand_wildcards() {
                let StateRef::Named(from) = &t.from else {
                    unreachable!()
                };
                let from_i = sidx(from).ok_or_else(|| bad(format!("unknown state `{from}`")))?;
                let to_i = match &t.to {
                    Some(s) => sidx(s).ok_or_else(|| bad(format!("unknown state `{s}`")))?,
                    None => from_i,
                };
                let mut actions = Vec::new();
                for a in &t.actions {
                    let v = *index
                        .get(&a.var)
                        .ok_or_else(|| bad(format!("undeclared variable `{}`", a.var)))?;
                    if let Rhs::Const(c) = &a.rhs {
                        let ok =
                            matches!(c, Value::Int(_)) || value_index(&domains[v], c).is_some();
                        if !ok {
                            return Err(bad(format!("`{}` outside the domain of `{}`", c, a.var)));
                        }
                    }
                    actions.push((v, a.rhs.clone()));
                }
                let vars = t.condition.variables();
                for v in &vars {
                    if !index.contains_key(v) && !is_state_atom(v) {
                        return Err(bad(format!("undeclared variable `{v}`")));
                    }
                }
                let reads = chans
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| vars.contains(&names[c.var]))
                    .map(|(i, _)| i)
                    .collect();
                trans.push(CTrans {
                    from: from_i,
                    to: to_i,
                    cond: t.condition.clone(),
                    actions,
                    reads,
                    label: t.label(),
                });
            }
            fsms.push(CFsm {
                participant: f.participant.clone(),
                states: f.states.clone(),
                trans,
            });
        }
        let initial_ok = model.fsms.iter().all(|f| f.states.contains(&f.initial));
        if !initial_ok {
            return Err(bad("initial state not among the FSM states".into()));
        }
        Ok(Compiled {
            names,
            domains,
            index,
            inits,
            nondet,
            fsms,
            chans,
            adversary,
        })
    }

    pub fn initial(&self, model: &Model) -> State {
        State {
            fsm: model
                .fsms
                .iter()
                .map(|f| f.states.iter().position(|s| *s == f.initial).unwrap() as u16)
                .collect(),
            vars: self.inits.clone(),
            buffers: vec![Vec::new(); self.chans.len()],
        }
    }

    pub fn value(&self, s: &State, var: &str) -> Option<Value> {
        if let Some(&i) = self.index.get(var) {
            return Some(self.domains[i][s.vars[i] as usize].clone());
        }
        let p = var.strip_suffix(".state")?;
        let f = self.fsms.iter().position(|f| f.participant == p)?;
        Some(Value::sym(self.fsms[f].states[s.fsm[f] as usize].clone()))
    }

    pub fn holds(&self, s: &State, e: &BoolExpr) -> bool {
        e.eval_with(&|v| self.value(s, v))
    }

    fn reset_fields(&self, s: &mut State, c: usize) {
        for &f in &self.chans[c].fields {
            s.vars[f] = self.inits[f];
        }
    }

    fn adversary_options(&self, s: &State, c: usize) -> Vec<(Option<AdvAction>, Option<Vec<u16>>)> {
        let ch = &self.chans[c];
        let caps = &self.adversary.capabilities;
        let cur = s.vars[ch.var];
        let empty = self.inits[ch.var];
        let name = ch.name.clone();
        let msg = |m: u16| self.domains[ch.var][m as usize].to_string();
        let blank = |m: u16| {
            let mut e = vec![m];
            e.extend(ch.fields.iter().map(|&f| self.inits[f]));
            e
        };
        let mut out = vec![(None, None)];
        if caps.contains(&Capability::Drop) && cur != empty {
            out.push((
                Some(AdvAction::Drop {
                    channel: name.clone(),
                }),
                Some(blank(empty)),
            ));
        }
        if caps.contains(&Capability::Inject) && cur == empty {
            for &m in &ch.injectable {
                out.push((
                    Some(AdvAction::Inject {
                        channel: name.clone(),
                        msg: msg(m),
                    }),
                    Some(blank(m)),
                ));
            }
        }
        if caps.contains(&Capability::Modify) && cur != empty {
            for &m in &ch.injectable {
                out.push((
                    Some(AdvAction::Modify {
                        channel: name.clone(),
                        msg: msg(m),
                    }),
                    Some(blank(m)),
                ));
            }
        }
        if caps.contains(&Capability::Replay) {
            for (k, e) in s.buffers[c].iter().enumerate() {
                out.push((
                    Some(AdvAction::Replay {
                        channel: name.clone(),
                        entry: k,
                    }),
                    Some(e.clone()),
                ));
            }
        }
        out
    }

    fn write_entry(&self, s: &mut State, c: usize, entry: &[u16]) {
        let ch = &self.chans[c];
        s.vars[ch.var] = entry[0];
        for (k, &f) in ch.fields.iter().enumerate() {
            s.vars[f] = entry[k + 1];
        }
    }

    fn apply_rhs(&self, s: &State, var: usize, rhs: &Rhs) -> u16 {
        let dom = &self.domains[var];
        let cur = s.vars[var];
        match rhs {
            Rhs::Inc => (cur + 1).min(dom.len() as u16 - 1),
            Rhs::Dec => cur.saturating_sub(1),
            Rhs::Const(v) => match (value_index(dom, v), v) {
                (Some(i), _) => i,
                // Integer constants saturate into range.
                (None, Value::Int(n)) => {
                    let lo = match dom.first() {
                        Some(Value::Int(m)) => *m,
                        _ => 0,
                    };
                    if *n < lo {
                        0
                    } else {
                        dom.len() as u16 - 1
                    }
                }
                (None, _) => cur,
            },
        }
    }

    /// All successors of `s`, each with the adversary moves and the
    /// transitions that fired. Every state has at least one successor.
    pub fn successors(&self, s: &State) -> Vec<(StepLabel, State)> {
        // Adversary stage, channel by channel.
        let mut staged: Vec<(Vec<AdvAction>, State)> = vec![(vec![], s.clone())];
        for c in 0..self.chans.len() {
            let mut next = Vec::new();
            for (acts, st) in &staged {
                for (a, entry) in self.adversary_options(st, c) {
                    let mut st2 = st.clone();
                    let mut acts2 = acts.clone();
                    if let Some(e) = entry {
                        self.write_entry(&mut st2, c, &e);
                    }
                    if let Some(a) = a {
                        acts2.push(a);
                    }
                    next.push((acts2, st2));
                }
            }
            staged = next;
        }
        // Fresh values for nondeterministic inputs.
        #[allow(clippy::type_complexity)]
        let mut staged: Vec<(Vec<AdvAction>, Vec<(String, Value)>, State)> =
            staged.into_iter().map(|(a, st)| (a, vec![], st)).collect();
        for &v in &self.nondet {
            let n = self.domains[v].len() as u16;
            staged = staged
                .into_iter()
                .flat_map(|(a, ins, st)| {
                    (0..n).map(move |k| {
                        let mut st2 = st.clone();
                        st2.vars[v] = k;
                        let mut ins2 = ins.clone();
                        ins2.push((self.names[v].clone(), self.domains[v][k as usize].clone()));
                        (a.clone(), ins2, st2)
                    })
                })
                .collect();
        }
        let mut out = Vec::new();
        for (acts, inputs, mid) in staged {
            // Each FSM fires one enabled transition, or idles if none is.
            let mut choices: Vec<Vec<Option<usize>>> = Vec::new();
            for (fi, f) in self.fsms.iter().enumerate() {
                let en: Vec<Option<usize>> = f
                    .trans
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.from == mid.fsm[fi] && self.holds(&mid, &t.cond))
                    .map(|(i, _)| Some(i))
                    .collect();
                choices.push(if en.is_empty() { vec![None] } else { en });
            }
            let mut combos: Vec<Vec<Option<usize>>> = vec![vec![]];
            for ch in &choices {
                combos = combos
                    .into_iter()
                    .flat_map(|c| {
                        ch.iter().map(move |x| {
                            let mut c2 = c.clone();
                            c2.push(*x);
                            c2
                        })
                    })
                    .collect();
            }
            for combo in combos {
                let (mut label, next) = self.fire(&mid, &acts, &combo);
                label.inputs = inputs.clone();
                out.push((label, next));
            }
        }
        out
    }

    /// Applies one choice of transitions to the post-adversary state.
    pub(crate) fn fire(
        &self,
        mid: &State,
        acts: &[AdvAction],
        combo: &[Option<usize>],
    ) -> (StepLabel, State) {
        let mut next = mid.clone();
        let mut written = vec![false; self.names.len()];
        let mut fired = Vec::new();
        for (fi, choice) in combo.iter().enumerate() {
            let Some(ti) = choice else { continue };
            let t = &self.fsms[fi].trans[*ti];
            for (v, rhs) in &t.actions {
                next.vars[*v] = self.apply_rhs(mid, *v, rhs);
                written[*v] = true;
            }
            next.fsm[fi] = t.to;
            fired.push(Fired {
                participant: self.fsms[fi].participant.clone(),
                index: *ti,
                label: t.label.clone(),
            });
        }
        // Receivers consume what they read; fields of a fresh send that
        // were not set are cleared.
        for (fi, choice) in combo.iter().enumerate() {
            let Some(ti) = choice else { continue };
            for &c in &self.fsms[fi].trans[*ti].reads {
                let ch = &self.chans[c];
                if ch.dst == Some(fi) && !written[ch.var] {
                    next.vars[ch.var] = self.inits[ch.var];
                    self.reset_fields(&mut next, c);
                }
            }
        }
        for (c, ch) in self.chans.iter().enumerate() {
            if !written[ch.var] {
                continue;
            }
            for &f in &ch.fields {
                if !written[f] {
                    next.vars[f] = self.inits[f];
                }
            }
            let cap = self.adversary.replay_buffer_size;
            if self.adversary.capabilities.contains(&Capability::Replay)
                && cap > 0
                && next.vars[ch.var] != self.inits[ch.var]
            {
                let mut e = vec![next.vars[ch.var]];
                e.extend(ch.fields.iter().map(|&f| next.vars[f]));
                let buf = &mut next.buffers[c];
                if !buf.contains(&e) {
                    buf.push(e);
                    if buf.len() > cap {
                        buf.remove(0);
                    }
                }
            }
        }
        (
            StepLabel {
                adversary: acts.to_vec(),
                inputs: vec![],
                fired,
            },
            next,
        )
    }
}

pub(crate) fn is_state_atom(v: &str) -> bool {
    v.ends_with(".state")
}
