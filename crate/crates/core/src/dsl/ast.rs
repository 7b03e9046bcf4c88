use std::fmt;

use serde::{Deserialize, Serialize};

use super::rules::{DslRule, RuleSet, SlotMode, SlotType};
use super::{DslError, Env};
use crate::depparse::{DepNode, LogicOp, NodeToken, Pos, Rel};
use crate::lexicon::KwType;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotValue {
    Key { id: String, kind: KwType },
    Value(i64),
    Logic { op: LogicOp, items: Vec<SlotValue> },
}

impl SlotValue {
    /// Keyword type, or the common type of a logical group's members.
    pub fn kind(&self) -> Option<KwType> {
        match self {
            SlotValue::Key { kind, .. } => Some(*kind),
            SlotValue::Value(_) => None,
            SlotValue::Logic { items, .. } => {
                let first = items.first()?.kind()?;
                items
                    .iter()
                    .all(|i| i.kind() == Some(first))
                    .then_some(first)
            }
        }
    }

    fn is_value(&self) -> bool {
        match self {
            SlotValue::Value(_) => true,
            SlotValue::Key { .. } => false,
            SlotValue::Logic { items, .. } => items.iter().all(SlotValue::is_value),
        }
    }
}

impl fmt::Display for SlotValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotValue::Key { id, kind } if *kind == KwType::Agent => {
                f.write_str(&id.to_uppercase())
            }
            SlotValue::Key { id, .. } => f.write_str(id),
            SlotValue::Value(v) => write!(f, "{v}"),
            SlotValue::Logic { op, items } => {
                let inner: Vec<String> = items.iter().map(|i| i.to_string()).collect();
                write!(f, "{}({})", op.word(), inner.join(", "))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Block,
    Paragraph,
    /// Previous paragraph, 1 = immediately preceding.
    History(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Text,
    /// Subject carried over from the governing clause.
    Inherited,
    Context(Source),
    Peer,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arg {
    pub slot: String,
    pub value: SlotValue,
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DslAst {
    Command {
        command: String,
        args: Vec<Arg>,
        /// Required slots still unbound after matching the text.
        missing: Vec<String>,
    },
    Logic {
        op: LogicOp,
        children: Vec<DslAst>,
    },
}

impl DslAst {
    pub fn commands(&self) -> Vec<&str> {
        match self {
            DslAst::Command { command, .. } => vec![command],
            DslAst::Logic { children, .. } => children.iter().flat_map(|c| c.commands()).collect(),
        }
    }

    pub fn arg(&self, slot: &str) -> Option<&Arg> {
        match self {
            DslAst::Command { args, .. } => args.iter().find(|a| a.slot == slot),
            DslAst::Logic { .. } => None,
        }
    }
}

/// Text-bound arguments in slot order, e.g. `receive(UE, or(a, b))`.
impl fmt::Display for DslAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DslAst::Command { command, args, .. } => {
                let shown: Vec<String> = args
                    .iter()
                    .filter(|a| matches!(a.origin, Origin::Text | Origin::Inherited))
                    .map(|a| a.value.to_string())
                    .collect();
                write!(f, "{command}({})", shown.join(", "))
            }
            DslAst::Logic { op, children } => {
                let inner: Vec<String> = children.iter().map(|c| c.to_string()).collect();
                write!(f, "{}({})", op.word(), inner.join(", "))
            }
        }
    }
}

struct Cand {
    value: SlotValue,
    rel: Rel,
    prep: Option<String>,
    origin: Origin,
}

fn contains_verb(n: &DepNode) -> bool {
    n.pos == Pos::Verb || (n.logic_op().is_some() && n.children.iter().any(contains_verb))
}

fn slot_value(n: &DepNode) -> Option<SlotValue> {
    match (&n.token, n.logic_op()) {
        (NodeToken::Key { id, kind }, _) => Some(SlotValue::Key {
            id: id.clone(),
            kind: *kind,
        }),
        (NodeToken::Value(v), _) => Some(SlotValue::Value(*v)),
        (_, Some(op)) => {
            let items: Vec<SlotValue> = n.children.iter().filter_map(slot_value).collect();
            (!items.is_empty()).then_some(SlotValue::Logic { op, items })
        }
        _ => None,
    }
}

fn collect(n: &DepNode, prep: Option<&str>, out: &mut Vec<Cand>) {
    for c in &n.children {
        if contains_verb(c) {
            continue;
        }
        if c.pos == Pos::Preposition {
            let word = c.label();
            collect(c, Some(&word), out);
            continue;
        }
        if let Some(value) = slot_value(c) {
            out.push(Cand {
                value,
                rel: if prep.is_some() { Rel::Prep } else { c.rel },
                prep: prep.map(str::to_string),
                origin: Origin::Text,
            });
        }
    }
}

fn hint_matches(hint: &str, c: &Cand) -> bool {
    match hint {
        "subject" => c.rel == Rel::Subject,
        "object" => c.prep.is_none() && c.rel != Rel::Subject,
        p => c.prep.as_deref() == Some(p),
    }
}

fn accepts(ty: &SlotType, v: &SlotValue) -> bool {
    match ty {
        SlotType::Expression => v.is_value(),
        SlotType::Kw(_) => ty.accepts(v.kind()),
    }
}

fn bind(rule: &DslRule, cands: &[Cand]) -> (Vec<Arg>, Vec<String>) {
    let mut used = vec![false; cands.len()];
    let mut args = Vec::new();
    let mut missing = Vec::new();
    for slot in &rule.slots {
        let pick = |pred: &dyn Fn(&Cand) -> bool, used: &[bool]| {
            (0..cands.len())
                .find(|&i| !used[i] && accepts(&slot.ty, &cands[i].value) && pred(&cands[i]))
        };
        let found = match (&slot.hint, slot.ty.is_agent()) {
            (Some(h), true) => pick(&|c| hint_matches(h, c), &used),
            (Some(h), false) => {
                pick(&|c| hint_matches(h, c), &used).or_else(|| pick(&|_| true, &used))
            }
            (None, _) => pick(&|_| true, &used),
        };
        match found {
            Some(i) => {
                used[i] = true;
                args.push(Arg {
                    slot: slot.name.clone(),
                    value: cands[i].value.clone(),
                    origin: cands[i].origin,
                });
            }
            None if slot.mode == SlotMode::Required => missing.push(slot.name.clone()),
            None => {}
        }
    }
    (args, missing)
}

fn subject_of(cands: &[Cand]) -> Option<SlotValue> {
    cands
        .iter()
        .find(|c| c.rel == Rel::Subject && c.value.kind() == Some(KwType::Agent))
        .map(|c| c.value.clone())
}

/// Top-down mapping of a restructured tree: the verb selects the rule, then
/// arguments are bound by type and relation, independent of position.
/// Subordinate and coordinated clauses inherit the governing subject.
pub fn map_to_ast(tree: &DepNode, rules: &RuleSet) -> Result<DslAst, DslError> {
    map_node(tree, rules, None)
}

fn map_node(
    n: &DepNode,
    rules: &RuleSet,
    inherited: Option<&SlotValue>,
) -> Result<DslAst, DslError> {
    if let Some(op) = n.logic_op() {
        if n.children.iter().any(contains_verb) {
            let children = n
                .children
                .iter()
                .map(|c| map_node(c, rules, inherited))
                .collect::<Result<_, _>>()?;
            return Ok(DslAst::Logic { op, children });
        }
    }
    if n.pos != Pos::Verb {
        return Err(DslError::NoRuleForVerb { verb: n.label() });
    }
    let lemma = n.label();
    let candidates: Vec<&DslRule> = rules.rules_for(&lemma).collect();
    if candidates.is_empty() {
        return Err(DslError::NoRuleForVerb { verb: lemma });
    }
    let mut cands = Vec::new();
    collect(n, None, &mut cands);
    let own_subject = subject_of(&cands);
    if own_subject.is_none() {
        if let Some(s) = inherited {
            cands.push(Cand {
                value: s.clone(),
                rel: Rel::Subject,
                prep: None,
                origin: Origin::Inherited,
            });
        }
    }
    let subject = own_subject.or_else(|| inherited.cloned());
    // First rule whose required non-agent slots all bind from the text.
    let rule = candidates
        .iter()
        .find(|r| {
            let (_, missing) = bind(r, &cands);
            missing
                .iter()
                .all(|m| r.slot(m).is_some_and(|s| s.ty.is_agent()))
        })
        .unwrap_or(&candidates[0]);
    let (args, missing) = bind(rule, &cands);
    let cmd = DslAst::Command {
        command: rule.command.clone(),
        args,
        missing,
    };
    let subs: Vec<DslAst> = n
        .children
        .iter()
        .filter(|c| contains_verb(c))
        .map(|c| map_node(c, rules, subject.as_ref()))
        .collect::<Result<_, _>>()?;
    if subs.is_empty() {
        return Ok(cmd);
    }
    let mut children = vec![cmd];
    children.extend(subs);
    Ok(DslAst::Logic {
        op: LogicOp::And,
        children,
    })
}

/// Keywords visible to the context resolver, each list ordered by search
/// priority.
#[derive(Clone, Debug, Default)]
pub struct Context {
    /// Current control block, document order.
    pub block: Vec<(String, KwType)>,
    /// Rest of the paragraph, nearest to the span first.
    pub paragraph: Vec<(String, KwType)>,
    /// Previous paragraphs, newest first; each nearest-first.
    pub history: Vec<Vec<(String, KwType)>>,
}

/// First keyword of the slot's type in block, paragraph, then history.
pub fn resolve_context(
    ty: &SlotType,
    ctx: &Context,
    reject: &dyn Fn(&str) -> bool,
) -> Option<(SlotValue, Source)> {
    let find = |keys: &[(String, KwType)]| {
        keys.iter()
            .find(|(id, k)| ty.accepts(Some(*k)) && !reject(id))
            .map(|(id, k)| SlotValue::Key {
                id: id.clone(),
                kind: *k,
            })
    };
    if let Some(v) = find(&ctx.block) {
        return Some((v, Source::Block));
    }
    if let Some(v) = find(&ctx.paragraph) {
        return Some((v, Source::Paragraph));
    }
    ctx.history
        .iter()
        .enumerate()
        .find_map(|(i, p)| find(p).map(|v| (v, Source::History(i + 1))))
}

/// Fills missing required slots from context, then peer slots with the
/// other participant. Slots that stay unbound remain in `missing`.
pub fn resolve_ast(ast: &mut DslAst, rules: &RuleSet, ctx: &Context, env: &Env) {
    match ast {
        DslAst::Logic { children, .. } => {
            for c in children {
                resolve_ast(c, rules, ctx, env);
            }
        }
        DslAst::Command {
            command,
            args,
            missing,
        } => {
            let Some(rule) = rules.get(command) else {
                return;
            };
            let agent_of = |args: &[Arg]| -> Vec<String> {
                args.iter()
                    .filter_map(|a| match &a.value {
                        SlotValue::Key {
                            id,
                            kind: KwType::Agent,
                        } => Some(env.participant(id)),
                        _ => None,
                    })
                    .collect()
            };
            let mut still = Vec::new();
            for name in std::mem::take(missing) {
                let slot = rule.slot(&name).expect("missing slot is declared");
                let bound = agent_of(args);
                let is_agent = slot.ty.is_agent();
                let reject = |id: &str| is_agent && bound.contains(&env.participant(id));
                match resolve_context(&slot.ty, ctx, &reject) {
                    Some((value, src)) => args.push(Arg {
                        slot: name,
                        value,
                        origin: Origin::Context(src),
                    }),
                    None => still.push(name),
                }
            }
            for slot in rule.slots.iter().filter(|s| s.mode == SlotMode::Peer) {
                if args.iter().any(|a| a.slot == slot.name) {
                    continue;
                }
                let bound = agent_of(args);
                if let Some(other) = bound.first().and_then(|p| env.other(p)) {
                    args.push(Arg {
                        slot: slot.name.clone(),
                        value: SlotValue::Key {
                            id: other,
                            kind: KwType::Agent,
                        },
                        origin: Origin::Peer,
                    });
                }
            }
            // Keep slot order stable for display and comparison.
            args.sort_by_key(|a| rule.slots.iter().position(|s| s.name == a.slot));
            *missing = still;
        }
    }
}
