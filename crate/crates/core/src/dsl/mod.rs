//! From restructured dependency trees to DSL commands and on to logical IR.

pub mod ast;
pub mod interp;
pub mod rules;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{
    map_to_ast, resolve_ast, resolve_context, Arg, Context, DslAst, Origin, SlotValue, Source,
};
pub use interp::{apply_directives, interpret_ast};
pub use rules::{load_dsl_rules, DslRule, Mode, RuleSet, Slot, SlotMode, SlotType};

use crate::depparse::{parse_dependencies, restructure_logical, DepError, DepNode};
use crate::lexicon::{link_keywords, Lexicon, LinkedText};
use crate::logic::{Assignment, BoolExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DslError {
    #[error("command `{command}` defined twice")]
    DuplicateCommand { command: String },
    #[error("slot `{slot}` has unknown type `{ty}`")]
    UnknownSlotType { slot: String, ty: String },
    #[error("rules file line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("no DSL command for verb `{verb}`")]
    NoRuleForVerb { verb: String },
    #[error("`{command}` has no binding for required slot `{slot}`")]
    MissingRequiredSlot { command: String, slot: String },
    #[error("`{command}` slot `{slot}` expects {expected}")]
    TypeMismatch {
        command: String,
        slot: String,
        expected: String,
    },
    #[error("`{command}` cannot be used in {mode:?} mode")]
    ModeUnsupported { command: String, mode: Mode },
    #[error("`{command}` slot `{slot}` could not be resolved from context")]
    Unresolvable { command: String, slot: String },
    #[error("template for `{command}`: {msg}")]
    Template { command: String, msg: String },
    #[error(transparent)]
    Dep(#[from] DepError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelNaming {
    /// `chan_<sender>_<receiver>`
    #[default]
    SrcDst,
    /// `chan_<receiver>_<sender>`
    DstSrc,
}

/// Naming and participant conventions used when instantiating templates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Env {
    pub participants: Vec<String>,
    /// Maps agent keywords onto participant names (`network` -> `amf`).
    pub agent_aliases: BTreeMap<String, String>,
    pub channel_naming: ChannelNaming,
    /// Explicit names for `src>dst` pairs, overriding `channel_naming`.
    pub channel_overrides: BTreeMap<String, String>,
}

impl Default for Env {
    fn default() -> Self {
        Env {
            participants: vec!["ue".into(), "amf".into()],
            agent_aliases: BTreeMap::from([("network".into(), "amf".into())]),
            channel_naming: ChannelNaming::SrcDst,
            channel_overrides: BTreeMap::new(),
        }
    }
}

impl Env {
    pub fn participant(&self, agent: &str) -> String {
        let a = agent.to_lowercase();
        self.agent_aliases.get(&a).cloned().unwrap_or(a)
    }

    /// The first participant distinct from `p`.
    pub fn other(&self, p: &str) -> Option<String> {
        let p = self.participant(p);
        self.participants.iter().find(|q| **q != p).cloned()
    }

    pub fn channel(&self, src: &str, dst: &str) -> String {
        let (src, dst) = (self.participant(src), self.participant(dst));
        if let Some(name) = self.channel_overrides.get(&format!("{src}>{dst}")) {
            return name.clone();
        }
        match self.channel_naming {
            ChannelNaming::SrcDst => format!("chan_{src}_{dst}"),
            ChannelNaming::DstSrc => format!("chan_{dst}_{src}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrFormula {
    pub condition: BoolExpr,
    pub actions: Vec<Assignment>,
    /// Fresh nondeterministic flags introduced by directives.
    pub nondet: Vec<String>,
}

/// Intermediate artifacts of translating one span, kept for reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpanTrace {
    pub linked: LinkedText,
    pub tree: DepNode,
    pub ast: DslAst,
    pub ir: IrFormula,
}

/// Everything a span translation needs besides the span itself.
pub struct Translator<'a> {
    pub lexicon: &'a Lexicon,
    pub rules: &'a RuleSet,
    pub env: &'a Env,
    pub threshold: f64,
}

impl Translator<'_> {
    /// link -> parse -> restructure -> map -> resolve -> interpret.
    /// Directives are left to the caller, which owns per-block numbering.
    pub fn translate(
        &self,
        tokens: &[String],
        mode: Mode,
        ctx: &Context,
    ) -> Result<SpanTrace, DslError> {
        let linked = link_keywords(tokens, self.lexicon, self.threshold);
        let parsed = parse_dependencies(&linked, &self.rules.verbs())?;
        let tree = restructure_logical(&parsed)?;
        let mut ast = map_to_ast(&tree, self.rules)?;
        resolve_ast(&mut ast, self.rules, ctx, self.env);
        let ir = interpret_ast(&ast, mode, self.rules, self.env)?;
        Ok(SpanTrace {
            linked,
            tree,
            ast,
            ir,
        })
    }
}
