//! Comparing an inferred FSM set against a ground truth: per-term
//! condition matching over DNF-split transitions, and an exhaustive
//! behavioural diff.

use std::collections::BTreeSet;
use std::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use crate::logic::{Alphabet, Atom, BoolExpr, CmpOp, Literal, Logic, LogicError, Value};
use crate::par::{self, Exec};
use crate::synth::{Fsm, Model, StateRef, Transition};

/// One conjunctive piece of a transition, in the form used for scoring.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitTransition {
    pub participant: String,
    /// Index of the originating transition in its FSM.
    pub origin: usize,
    /// Canonical condition terms, sorted; includes the start-state match.
    pub terms: Vec<String>,
    /// Canonical actions, including reaching the end state.
    pub actions: Vec<String>,
    pub label: String,
}

/// Canonical text of a literal for matching. Boolean literals compare by
/// value, so `!x`, `x = FALSE` and `x != TRUE` coincide.
pub fn term_key(l: &Literal) -> String {
    match (&l.atom, l.positive) {
        (Atom::Flag(v), pos) => format!("{v} = {}", Value::Bool(pos)),
        (
            Atom::Cmp {
                var,
                op: CmpOp::Eq,
                value: Value::Bool(b),
            },
            pos,
        ) => format!("{var} = {}", Value::Bool(*b == pos)),
        _ => l.canonical(),
    }
}

fn state_var(participant: &str) -> String {
    format!("{participant}.state")
}

/// Splits each transition into one piece per DNF term of its condition.
pub fn split_for_scoring(fsm: &Fsm, logic: &Logic) -> Result<Vec<SplitTransition>, LogicError> {
    let mut out = Vec::new();
    for (i, t) in fsm.transitions.iter().enumerate() {
        let mut actions: Vec<String> = t.actions.iter().map(|a| a.to_string()).collect();
        if let Some(to) = &t.to {
            actions.push(format!("{} := {to}", state_var(&fsm.participant)));
        }
        for term in logic.to_dnf(&t.condition)? {
            let mut terms: BTreeSet<String> = term.iter().map(term_key).collect();
            if let StateRef::Named(s) = &t.from {
                terms.insert(format!("{} = {s}", state_var(&fsm.participant)));
            }
            out.push(SplitTransition {
                participant: fsm.participant.clone(),
                origin: i,
                terms: terms.into_iter().collect(),
                actions: actions.clone(),
                label: t.label(),
            });
        }
    }
    Ok(out)
}

pub fn split_model(model: &Model, logic: &Logic) -> Result<Vec<SplitTransition>, LogicError> {
    let mut out = Vec::new();
    for f in &model.fsms {
        out.extend(split_for_scoring(f, logic)?);
    }
    Ok(out)
}

/// The disjunction of a transition's split conditions, without the state
/// term, as an expression (for checking that splitting is lossless).
pub fn split_condition(t: &Transition, logic: &Logic) -> Result<BoolExpr, LogicError> {
    let terms = logic.to_dnf(&t.condition)?;
    Ok(crate::logic::dnf::dnf_to_expr(&terms))
}

/// Ground-truth terms present with the same value in `inf`, over the
/// ground-truth term count. A ground truth without terms matches only an
/// inferred condition without terms.
pub fn condition_match(gt: &[String], inf: &[String]) -> (usize, usize) {
    if gt.is_empty() {
        return if inf.is_empty() { (1, 1) } else { (0, 1) };
    }
    (gt.iter().filter(|t| inf.contains(t)).count(), gt.len())
}

fn ratio((m, n): (usize, usize)) -> f64 {
    m as f64 / n as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionScore {
    pub gt: String,
    pub terms: Vec<String>,
    pub matched: usize,
    pub total: usize,
    pub score: f64,
    /// Index of the first best-scoring inferred split.
    pub best: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionScore {
    pub gt: String,
    pub action: String,
    pub score: f64,
    pub best: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub conditions: Vec<ConditionScore>,
    pub actions: Vec<ActionScore>,
    pub condition_accuracy: f64,
    pub action_accuracy: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        1.0
    } else {
        s / n as f64
    }
}

fn best_over<'a>(
    gt: &SplitTransition,
    cands: impl Iterator<Item = (usize, &'a SplitTransition)>,
) -> (usize, usize, Option<usize>) {
    let mut best = (0, 1, None);
    for (j, t) in cands {
        let (m, n) = condition_match(&gt.terms, &t.terms);
        if best.2.is_none() || ratio((m, n)) > ratio((best.0, best.1)) {
            best = (m, n, Some(j));
        }
    }
    if best.2.is_none() {
        best.1 = gt.terms.len().max(1);
    }
    best
}

pub fn score_conditions(
    gt: &[SplitTransition],
    inf: &[SplitTransition],
    exec: Exec,
) -> Vec<ConditionScore> {
    par::map(exec, gt, |g| {
        let (matched, total, best) = best_over(g, inf.iter().enumerate());
        ConditionScore {
            gt: g.label.clone(),
            terms: g.terms.clone(),
            matched,
            total,
            score: ratio((matched, total)),
            best,
        }
    })
}

pub fn score_actions(
    gt: &[SplitTransition],
    inf: &[SplitTransition],
    exec: Exec,
) -> Vec<ActionScore> {
    let items: Vec<(&SplitTransition, &String)> = gt
        .iter()
        .flat_map(|g| g.actions.iter().map(move |a| (g, a)))
        .collect();
    par::map(exec, &items, |(g, a)| {
        let cands = inf
            .iter()
            .enumerate()
            .filter(|(_, t)| t.actions.contains(a));
        let (m, n, best) = best_over(g, cands);
        ActionScore {
            gt: g.label.clone(),
            action: (*a).clone(),
            score: if best.is_some() { ratio((m, n)) } else { 0.0 },
            best,
        }
    })
}

pub fn score(gt: &[SplitTransition], inf: &[SplitTransition], exec: Exec) -> MatchReport {
    let conditions = score_conditions(gt, inf, exec);
    let actions = score_actions(gt, inf, exec);
    MatchReport {
        condition_accuracy: mean(conditions.iter().map(|c| c.score)),
        action_accuracy: mean(actions.iter().map(|a| a.score)),
        conditions,
        actions,
    }
}

pub fn score_models(
    gold: &Model,
    inferred: &Model,
    logic: &Logic,
) -> Result<MatchReport, LogicError> {
    Ok(score(
        &split_model(gold, logic)?,
        &split_model(inferred, logic)?,
        logic.exec,
    ))
}

impl MatchReport {
    pub fn to_table(&self) -> String {
        let mut o = String::new();
        writeln!(o, "condition accuracy: {:.4}", self.condition_accuracy).unwrap();
        writeln!(o, "action accuracy:    {:.4}", self.action_accuracy).unwrap();
        writeln!(o, "\nconditions").unwrap();
        for c in &self.conditions {
            writeln!(o, "  {}/{}  {}", c.matched, c.total, c.terms.join(" & ")).unwrap();
        }
        writeln!(o, "\nactions").unwrap();
        for a in &self.actions {
            writeln!(o, "  {:.2}  {}", a.score, a.action).unwrap();
        }
        o
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Deviation {
    MissingState {
        state: String,
    },
    ExtraState {
        state: String,
    },
    Behaviour {
        state: String,
        /// Labels of the subject transitions enabled under `assignment`.
        subject: Vec<String>,
        reference: Vec<String>,
        assignment: Vec<(String, Value)>,
        expected: Behaviour,
        actual: Behaviour,
    },
}

/// What firing every enabled transition does: the sorted action set and
/// the end state (`None` stays).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Behaviour {
    pub actions: Vec<String>,
    pub to: Option<String>,
}

impl fmt::Display for Behaviour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let acts = if self.actions.is_empty() {
            "no action".to_string()
        } else {
            self.actions.join("; ")
        };
        match &self.to {
            Some(s) => write!(f, "{acts} -> {s}"),
            None => f.write_str(&acts),
        }
    }
}

fn behaviour(enabled: &[&Transition]) -> Behaviour {
    let actions: BTreeSet<String> = enabled
        .iter()
        .flat_map(|t| t.actions.iter().map(|a| a.to_string()))
        .collect();
    let to = enabled.iter().find_map(|t| t.to.clone());
    Behaviour {
        actions: actions.into_iter().collect(),
        to,
    }
}

/// Compares two FSMs state by state over every assignment of the finite
/// alphabet of their conditions. One deviation is reported per distinct
/// pair of enabled-transition sets, with the first distinguishing
/// assignment.
pub fn diff_fsm(
    reference: &Fsm,
    subject: &Fsm,
    logic: &Logic,
) -> Result<Vec<Deviation>, LogicError> {
    let mut out = Vec::new();
    for s in &reference.states {
        if !subject.states.contains(s) {
            out.push(Deviation::MissingState { state: s.clone() });
        }
    }
    for s in &subject.states {
        if !reference.states.contains(s) {
            out.push(Deviation::ExtraState { state: s.clone() });
        }
    }
    let rt = reference.expand_wildcards();
    let st = subject.expand_wildcards();
    for s in reference
        .states
        .iter()
        .filter(|s| subject.states.contains(s))
    {
        let here = StateRef::Named(s.clone());
        let r: Vec<&Transition> = rt.iter().filter(|t| t.from == here).collect();
        let u: Vec<&Transition> = st.iter().filter(|t| t.from == here).collect();
        let exprs: Vec<&BoolExpr> = r.iter().chain(&u).map(|t| &t.condition).collect();
        let alphabet = Alphabet::of(&exprs, &logic.limits)?;
        let total = alphabet.size().ok_or(LogicError::BlowupLimit {
            what: "assignments",
            limit: u64::MAX as usize,
            actual: usize::MAX,
        })?;
        let rc: Vec<_> = r.iter().map(|t| alphabet.compile(&t.condition)).collect();
        let uc: Vec<_> = u.iter().map(|t| alphabet.compile(&t.condition)).collect();
        let mut seen: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        let mut idx = Vec::new();
        for n in 0..total {
            alphabet.decode(n, &mut idx);
            let re: Vec<usize> = (0..r.len()).filter(|&i| rc[i].eval(&idx)).collect();
            let ue: Vec<usize> = (0..u.len()).filter(|&i| uc[i].eval(&idx)).collect();
            if seen.contains(&(re.clone(), ue.clone())) {
                continue;
            }
            let expected = behaviour(&re.iter().map(|&i| r[i]).collect::<Vec<_>>());
            let actual = behaviour(&ue.iter().map(|&i| u[i]).collect::<Vec<_>>());
            seen.push((re.clone(), ue.clone()));
            if expected != actual {
                out.push(Deviation::Behaviour {
                    state: s.clone(),
                    subject: ue.iter().map(|&i| u[i].label()).collect(),
                    reference: re.iter().map(|&i| r[i].label()).collect(),
                    assignment: alphabet.assignment(n),
                    expected,
                    actual,
                });
            }
        }
    }
    Ok(out)
}

/// Diffs every participant present in either model.
pub fn diff_models(
    reference: &Model,
    subject: &Model,
    logic: &Logic,
) -> Result<Vec<(String, Vec<Deviation>)>, LogicError> {
    let mut names: Vec<&String> = reference.participants.iter().collect();
    for p in &subject.participants {
        if !names.contains(&p) {
            names.push(p);
        }
    }
    let empty = |p: &str| Fsm {
        participant: p.to_string(),
        states: vec![],
        initial: String::new(),
        transitions: vec![],
    };
    let mut out = Vec::new();
    for p in names {
        let r = reference.fsm(p).cloned().unwrap_or_else(|| empty(p));
        let s = subject.fsm(p).cloned().unwrap_or_else(|| empty(p));
        out.push((p.clone(), diff_fsm(&r, &s, logic)?));
    }
    Ok(out)
}
