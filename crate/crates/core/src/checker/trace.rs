//! Counterexample traces and a replay validator that re-derives each step
//! from the model text alone.

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use super::explore::{AdvAction, StepLabel};
use super::ltl::{eval_lasso, Ltl};
use super::Capability;
use crate::logic::{Rhs, Value};
use crate::synth::{Domain, Model, StateRef};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceState {
    /// Current state per participant.
    pub fsm: BTreeMap<String, String>,
    pub vars: BTreeMap<String, Value>,
    /// Replay buffer per channel, oldest first; entries are `[msg, fields…]`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub buffers: BTreeMap<String, Vec<Vec<Value>>>,
}

impl TraceState {
    /// Valuation seen by propositions, including `<participant>.state`.
    pub fn valuation(&self) -> BTreeMap<String, Value> {
        let mut m = self.vars.clone();
        for (p, s) in &self.fsm {
            m.insert(format!("{p}.state"), Value::sym(s.clone()));
        }
        m
    }
}

/// `states[i]` steps to `states[i + 1]` via `steps[i]`. For a lasso the
/// final state repeats `states[loop_start]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub states: Vec<TraceState>,
    pub steps: Vec<StepLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_start: Option<usize>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.states.iter().enumerate() {
            if self.loop_start == Some(i) {
                writeln!(f, "-- loop starts here")?;
            }
            let fsm: Vec<String> = s.fsm.iter().map(|(p, st)| format!("{p}={st}")).collect();
            writeln!(f, "state {i}: {}", fsm.join(" "))?;
            let prev = i.checked_sub(1).map(|j| &self.states[j]);
            for (k, v) in &s.vars {
                if prev.is_none_or(|p| p.vars.get(k) != Some(v)) {
                    writeln!(f, "  {k} = {v}")?;
                }
            }
            if let Some(step) = self.steps.get(i) {
                let mut line = String::new();
                for a in &step.adversary {
                    write!(line, " [{a}]").unwrap();
                }
                for (v, x) in &step.inputs {
                    write!(line, " [{v} <- {x}]").unwrap();
                }
                for t in &step.fired {
                    write!(line, " {}: {}", t.participant, t.label).unwrap();
                }
                if line.is_empty() {
                    line.push_str(" (stutter)");
                }
                writeln!(f, "step {i}:{line}")?;
            }
        }
        Ok(())
    }
}

fn clamp_int(domain: &Domain, n: i64) -> Value {
    match domain {
        Domain::Int { min, max } => Value::Int(n.clamp(*min, *max)),
        _ => Value::Int(n),
    }
}

fn fields<'a>(model: &'a Model, channel: &str) -> Vec<&'a String> {
    model
        .vars
        .keys()
        .filter(|v| model.field_channel(v).is_some_and(|c| c.name == channel))
        .collect()
}

/// Replays `trace` against `model` and, if given, checks that it refutes
/// `property`. Returns the first discrepancy.
pub fn validate_trace(model: &Model, trace: &Trace, property: Option<&Ltl>) -> Result<(), String> {
    if trace.states.len() != trace.steps.len() + 1 {
        return Err("states and steps do not line up".into());
    }
    let adv = model.adversary.clone().unwrap_or_default();
    let init = |v: &str| model.vars[v].init.clone();
    let first = &trace.states[0];
    for f in &model.fsms {
        if first.fsm.get(&f.participant) != Some(&f.initial) {
            return Err(format!("{} does not start in {}", f.participant, f.initial));
        }
    }
    for (v, d) in &model.vars {
        if !d.nondet && first.vars.get(v) != Some(&d.init) {
            return Err(format!("`{v}` does not start at its initial value"));
        }
    }

    for (i, step) in trace.steps.iter().enumerate() {
        let cur = &trace.states[i];
        let mut mid = cur.clone();
        let mut touched = Vec::new();
        for a in &step.adversary {
            let (ch, cap) = match a {
                AdvAction::Drop { channel } => (channel, Capability::Drop),
                AdvAction::Inject { channel, .. } => (channel, Capability::Inject),
                AdvAction::Modify { channel, .. } => (channel, Capability::Modify),
                AdvAction::Replay { channel, .. } => (channel, Capability::Replay),
            };
            if !adv.capabilities.contains(&cap) {
                return Err(format!("step {i}: adversary lacks {cap:?}"));
            }
            if touched.contains(ch) {
                return Err(format!("step {i}: two adversary moves on {ch}"));
            }
            touched.push(ch.clone());
            let empty = init(ch);
            let occupied = mid.vars.get(ch) != Some(&empty);
            let fs = fields(model, ch);
            let msg = match a {
                AdvAction::Drop { .. } if occupied => empty.clone(),
                AdvAction::Inject { msg, .. } if !occupied && adv.injectable.contains(msg) => {
                    Value::sym(msg.clone())
                }
                AdvAction::Modify { msg, .. } if occupied && adv.injectable.contains(msg) => {
                    Value::sym(msg.clone())
                }
                AdvAction::Replay { entry, .. } => {
                    let e = cur
                        .buffers
                        .get(ch)
                        .and_then(|b| b.get(*entry))
                        .ok_or_else(|| format!("step {i}: no buffered entry {entry} on {ch}"))?;
                    for (k, f) in fs.iter().enumerate() {
                        mid.vars.insert((*f).clone(), e[k + 1].clone());
                    }
                    mid.vars.insert(ch.clone(), e[0].clone());
                    continue;
                }
                _ => return Err(format!("step {i}: `{a}` not allowed here")),
            };
            for f in fs {
                mid.vars.insert(f.clone(), init(f));
            }
            mid.vars.insert(ch.clone(), msg);
        }
        for (v, d) in &model.vars {
            if d.nondet {
                let x = step
                    .inputs
                    .iter()
                    .find(|(n, _)| n == v)
                    .map(|(_, x)| x)
                    .ok_or_else(|| format!("step {i}: no value chosen for `{v}`"))?;
                mid.vars.insert(v.clone(), x.clone());
            }
        }
        let look = mid.valuation();
        let holds = |t: &crate::synth::Transition| t.condition.eval_with(&|v| look.get(v).cloned());

        let mut next = mid.clone();
        let mut written: Vec<String> = Vec::new();
        let mut consumed: Vec<String> = Vec::new();
        for f in &model.fsms {
            let here = &cur.fsm[&f.participant];
            let expanded = f.expand_wildcards();
            let at_here = |t: &crate::synth::Transition| t.from == StateRef::Named(here.clone());
            let fired: Vec<_> = step
                .fired
                .iter()
                .filter(|x| x.participant == f.participant)
                .collect();
            match fired.as_slice() {
                [] => {
                    if expanded.iter().any(|t| at_here(t) && holds(t)) {
                        return Err(format!(
                            "step {i}: {} idles with an enabled transition",
                            f.participant
                        ));
                    }
                }
                [x] => {
                    let t = expanded
                        .get(x.index)
                        .ok_or_else(|| format!("step {i}: bad transition index"))?;
                    if !at_here(t) || !holds(t) || t.label() != x.label {
                        return Err(format!(
                            "step {i}: `{}` is not enabled for {}",
                            x.label, f.participant
                        ));
                    }
                    for a in &t.actions {
                        let d = &model.vars[&a.var].domain;
                        let old = mid.vars[&a.var].clone();
                        let new = match (&a.rhs, &old) {
                            (Rhs::Const(Value::Int(n)), _) => clamp_int(d, *n),
                            (Rhs::Const(c), _) => c.clone(),
                            (Rhs::Inc, Value::Int(n)) => clamp_int(d, n + 1),
                            (Rhs::Dec, Value::Int(n)) => clamp_int(d, n - 1),
                            _ => {
                                return Err(format!(
                                    "step {i}: arithmetic on non-integer `{}`",
                                    a.var
                                ))
                            }
                        };
                        next.vars.insert(a.var.clone(), new);
                        written.push(a.var.clone());
                    }
                    next.fsm.insert(f.participant.clone(), t.target_in(here));
                    let read = t.condition.variables();
                    for c in &model.channels {
                        if c.dst == f.participant && read.contains(&c.name) {
                            consumed.push(c.name.clone());
                        }
                    }
                }
                _ => return Err(format!("step {i}: {} fires twice", f.participant)),
            }
        }
        for c in &consumed {
            if !written.contains(c) {
                next.vars.insert(c.clone(), init(c));
                for f in fields(model, c) {
                    next.vars.insert(f.clone(), init(f));
                }
            }
        }
        for c in &model.channels {
            if !written.contains(&c.name) {
                continue;
            }
            let fs = fields(model, &c.name);
            for f in &fs {
                if !written.contains(f) {
                    next.vars.insert((*f).clone(), init(f));
                }
            }
            let v = next.vars[&c.name].clone();
            if adv.capabilities.contains(&Capability::Replay)
                && adv.replay_buffer_size > 0
                && v != init(&c.name)
            {
                let mut e = vec![v];
                e.extend(fs.iter().map(|f| next.vars[*f].clone()));
                let buf = next.buffers.entry(c.name.clone()).or_default();
                if !buf.contains(&e) {
                    buf.push(e);
                    if buf.len() > adv.replay_buffer_size {
                        buf.remove(0);
                    }
                }
            }
        }
        let mut expect = trace.states[i + 1].clone();
        next.buffers.retain(|_, b| !b.is_empty());
        expect.buffers.retain(|_, b| !b.is_empty());
        if next != expect {
            return Err(format!("step {i}: successor state differs from the trace"));
        }
    }

    if let Some(ls) = trace.loop_start {
        let last = trace.states.len() - 1;
        if ls >= last || trace.states[ls] != trace.states[last] {
            return Err("loop does not close".into());
        }
    }
    if let Some(p) = property {
        let word: Vec<_> = trace.states.iter().map(TraceState::valuation).collect();
        let refuted = match trace.loop_start {
            Some(ls) => !eval_lasso(p, &word[..word.len() - 1], ls),
            None => {
                // A finite witness must already decide the negation.
                let mut obl = Ltl::Not(Box::new(p.clone())).nnf();
                for w in &word {
                    obl = obl.progress(&|e| e.eval_with(&|v| w.get(v).cloned()));
                }
                obl.is_trivially_true()
            }
        };
        if !refuted {
            return Err("trace does not violate the property".into());
        }
    }
    Ok(())
}
