//! Transitions, per-participant FSMs and the compiled model.

mod combine;
mod compile;
mod graph;
mod merge;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use combine::{combine_block, BlockIrs, BlockResult, ComponentIr, Inherited};
pub use compile::{compile_model, CompileConfig};
pub use graph::{emit_graph, parse_graph};
pub use merge::{merge_split_transitions, MergeReport};

use crate::checker::AdversaryConfig;
use crate::logic::{parse_actions, parse_expr, Assignment, BoolExpr, LogicError, Value};

/// Name of the store variable whose assignment denotes an end state.
pub const STATE_VAR: &str = "state";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum StateRef {
    Named(String),
    /// Wildcard start state: the transition applies in every state.
    Any,
}

impl From<String> for StateRef {
    fn from(s: String) -> Self {
        if s == "*" {
            StateRef::Any
        } else {
            StateRef::Named(s)
        }
    }
}

impl From<StateRef> for String {
    fn from(s: StateRef) -> Self {
        s.to_string()
    }
}

impl fmt::Display for StateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateRef::Named(s) => f.write_str(s),
            StateRef::Any => f.write_str("*"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "TransitionRepr", try_from = "TransitionRepr")]
pub struct Transition {
    pub from: StateRef,
    /// `None` keeps the current state.
    pub to: Option<String>,
    pub condition: BoolExpr,
    pub actions: Vec<Assignment>,
    /// Ids of the control blocks this transition came from.
    pub provenance: Vec<usize>,
}

impl Transition {
    pub fn new(
        from: StateRef,
        to: Option<String>,
        condition: BoolExpr,
        actions: Vec<Assignment>,
    ) -> Self {
        let mut t = Transition {
            from,
            to,
            condition,
            actions,
            provenance: vec![],
        };
        t.normalize();
        t
    }

    /// A target equal to the source state is written as a stay.
    pub fn normalize(&mut self) {
        if let (StateRef::Named(f), Some(t)) = (&self.from, &self.to) {
            if f == t {
                self.to = None;
            }
        }
    }

    pub fn target_in(&self, current: &str) -> String {
        self.to.clone().unwrap_or_else(|| current.to_string())
    }

    /// `C / A1; A2` edge label.
    pub fn label(&self) -> String {
        format!(
            "{} / {}",
            self.condition,
            crate::logic::expr::actions_to_string(&self.actions)
        )
    }
}

#[derive(Serialize, Deserialize)]
struct TransitionRepr {
    from: StateRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<String>,
    condition: String,
    actions: Vec<String>,
    #[serde(default)]
    provenance: Vec<usize>,
}

impl From<Transition> for TransitionRepr {
    fn from(t: Transition) -> Self {
        TransitionRepr {
            from: t.from,
            to: t.to,
            condition: t.condition.to_string(),
            actions: t.actions.iter().map(|a| a.to_string()).collect(),
            provenance: t.provenance,
        }
    }
}

impl TryFrom<TransitionRepr> for Transition {
    type Error = LogicError;
    fn try_from(r: TransitionRepr) -> Result<Self, LogicError> {
        let actions = parse_actions(&r.actions.join("; "))?;
        let mut t = Transition {
            from: r.from,
            to: r.to,
            condition: parse_expr(&r.condition)?,
            actions,
            provenance: r.provenance,
        };
        t.normalize();
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fsm {
    pub participant: String,
    pub states: Vec<String>,
    pub initial: String,
    pub transitions: Vec<Transition>,
}

impl Fsm {
    /// Copies of every wildcard transition at each named state.
    pub fn expand_wildcards(&self) -> Vec<Transition> {
        let mut out = Vec::new();
        for t in &self.transitions {
            match &t.from {
                StateRef::Named(_) => out.push(t.clone()),
                StateRef::Any => {
                    for s in &self.states {
                        let mut c = t.clone();
                        c.from = StateRef::Named(s.clone());
                        c.normalize();
                        out.push(c);
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub src: String,
    pub dst: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Domain {
    Bool,
    Enum { values: Vec<String> },
    Int { min: i64, max: i64 },
}

impl Domain {
    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Domain::Bool, Value::Bool(_)) => true,
            (Domain::Enum { values }, Value::Sym(s)) => values.contains(s),
            (Domain::Int { min, max }, Value::Int(n)) => min <= n && n <= max,
            _ => false,
        }
    }

    pub fn values(&self) -> Vec<Value> {
        match self {
            Domain::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Domain::Enum { values } => values.iter().map(Value::sym).collect(),
            Domain::Int { min, max } => (*min..=*max).map(Value::Int).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDecl {
    pub domain: Domain,
    pub init: Value,
    /// Chosen freshly at every step rather than stored.
    #[serde(default)]
    pub nondet: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Model {
    pub participants: Vec<String>,
    pub fsms: Vec<Fsm>,
    pub channels: Vec<Channel>,
    pub vars: BTreeMap<String, VarDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversaryConfig>,
}

impl Model {
    pub fn fsm(&self, participant: &str) -> Option<&Fsm> {
        self.fsms.iter().find(|f| f.participant == participant)
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// Channel that a per-message field variable (`<chan>_<field>`) belongs to.
    pub fn field_channel(&self, var: &str) -> Option<&Channel> {
        self.channels
            .iter()
            .filter(|c| {
                var.len() > c.name.len() + 1
                    && var.starts_with(&c.name)
                    && var.as_bytes()[c.name.len()] == b'_'
            })
            .max_by_key(|c| c.name.len())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Model, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("no transitions to compile")]
    EmptyModel,
    #[error("participant `{0}` is not declared")]
    UnknownParticipant(String),
    #[error("variable `{var}` is used with incompatible types")]
    TypeConflict { var: String },
    #[error("graph line {line}: {msg}")]
    Graph { line: usize, msg: String },
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// A non-fatal note produced while synthesizing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    pub kind: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(block: Option<usize>, kind: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            block,
            kind: kind.to_string(),
            message: message.into(),
        }
    }
}
