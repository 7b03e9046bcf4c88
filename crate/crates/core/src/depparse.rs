//! Deterministic dependency trees for keyword-linked spans.
//!
//! The grammar covers the constrained sublanguage of specification spans:
//! subject, modal, verb and arguments; passives ("X is sent by Y");
//! subordinate clauses ("upon receiving X", "by sending X"); coordinated
//! clauses and coordinated arguments. Conjuncts are first built in the usual
//! dependency style (later conjuncts hang off the first, the connective is a
//! leaf of the conjunct it precedes) and then [`restructure_logical`] lifts
//! every connective into an internal node.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{is_punct, KwType, Linked, LinkedText};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pos {
    Verb,
    Noun,
    AgentNoun,
    Modal,
    Negation,
    Connective,
    Preposition,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rel {
    Root,
    Subject,
    Object,
    Modifier,
    Conjunct,
    Operand,
    Prep,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeToken {
    Word(String),
    Key { id: String, kind: KwType },
    Value(i64),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DepNode {
    pub token: NodeToken,
    pub pos: Pos,
    pub rel: Rel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub passive: bool,
    /// On a connective leaf: a comma preceded it, closing the scope to its left.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub scope_break: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<DepNode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicOp {
    And,
    Or,
    Not,
}

impl LogicOp {
    pub fn word(self) -> &'static str {
        match self {
            LogicOp::And => "and",
            LogicOp::Or => "or",
            LogicOp::Not => "not",
        }
    }
}

impl DepNode {
    fn leaf(token: NodeToken, pos: Pos, rel: Rel) -> Self {
        DepNode {
            token,
            pos,
            rel,
            lemma: None,
            modal: None,
            marker: None,
            passive: false,
            scope_break: false,
            children: Vec::new(),
        }
    }

    fn connective(op: LogicOp, rel: Rel, children: Vec<DepNode>) -> Self {
        let pos = if op == LogicOp::Not {
            Pos::Negation
        } else {
            Pos::Connective
        };
        let mut n = DepNode::leaf(NodeToken::Word(op.word().into()), pos, rel);
        n.children = children
            .into_iter()
            .map(|mut c| {
                c.rel = Rel::Operand;
                c
            })
            .collect();
        n
    }

    pub fn label(&self) -> String {
        match &self.token {
            NodeToken::Word(w) => self.lemma.clone().unwrap_or_else(|| w.clone()),
            NodeToken::Key { id, .. } => id.clone(),
            NodeToken::Value(v) => v.to_string(),
        }
    }

    pub fn key(&self) -> Option<(&str, KwType)> {
        match &self.token {
            NodeToken::Key { id, kind } => Some((id, *kind)),
            _ => None,
        }
    }

    /// Connective or negation, as an internal node.
    pub fn logic_op(&self) -> Option<LogicOp> {
        match (&self.token, self.pos) {
            (NodeToken::Word(w), Pos::Connective) if w == "and" => Some(LogicOp::And),
            (NodeToken::Word(w), Pos::Connective) if w == "or" => Some(LogicOp::Or),
            (NodeToken::Word(_), Pos::Negation) => Some(LogicOp::Not),
            _ => None,
        }
    }

    pub fn keyword_leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let Some((id, _)) = n.key() {
                out.push(id);
            }
        });
        out
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a DepNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(DepNode::node_count).sum::<usize>()
    }

    fn describe(&self) -> String {
        let mut s = format!("{} [{:?}/{:?}", self.label(), self.pos, self.rel).to_lowercase();
        if let Some(m) = &self.modal {
            let _ = write!(s, " modal={m}");
        }
        if let Some(m) = &self.marker {
            let _ = write!(s, " marker={m}");
        }
        if self.passive {
            s.push_str(" passive");
        }
        s.push(']');
        s
    }

    pub fn to_indented(&self) -> String {
        let mut out = String::new();
        self.indent_into(0, &mut out);
        out
    }

    fn indent_into(&self, depth: usize, out: &mut String) {
        let _ = writeln!(out, "{}{}", "  ".repeat(depth), self.describe());
        for c in &self.children {
            c.indent_into(depth + 1, out);
        }
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dep {\n");
        let mut next = 0;
        self.dot_into(&mut next, &mut out);
        out.push_str("}\n");
        out
    }

    fn dot_into(&self, next: &mut usize, out: &mut String) -> usize {
        let me = *next;
        *next += 1;
        let _ = writeln!(
            out,
            "  n{me} [label=\"{}\"];",
            self.label().replace('"', "'")
        );
        for c in &self.children {
            let id = c.dot_into(next, out);
            let _ = writeln!(out, "  n{me} -> n{id} [label=\"{:?}\"];", c.rel);
        }
        me
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DepError {
    #[error("span has no recognizable action verb")]
    NoVerbFound,
    #[error("connective `{op}` has fewer than two operands")]
    DanglingConnective { op: String },
}

/// Trigger-verb lemmas with a small suffix-stripping lemmatizer that only
/// accepts lemmas it knows.
#[derive(Clone, Debug, Default)]
pub struct Verbs {
    lemmas: BTreeSet<String>,
}

const IRREGULAR: &[(&str, &str)] = &[
    ("sent", "send"),
    ("took", "take"),
    ("taken", "take"),
    ("ran", "run"),
    ("began", "begin"),
    ("begun", "begin"),
    ("kept", "keep"),
    ("held", "hold"),
    ("found", "find"),
    ("left", "leave"),
    ("made", "make"),
    ("gave", "give"),
    ("given", "give"),
    ("got", "get"),
    ("chose", "choose"),
    ("chosen", "choose"),
];

const PARTICIPLES_EXTRA: &[&str] = &["set", "run", "put", "read", "reset", "sent"];

impl Verbs {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(lemmas: I) -> Self {
        Verbs {
            lemmas: lemmas
                .into_iter()
                .map(|s| s.into().to_lowercase())
                .collect(),
        }
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.lemmas.contains(lemma)
    }

    pub fn lemma(&self, word: &str) -> Option<String> {
        let w = word.to_lowercase();
        if let Some((_, l)) = IRREGULAR.iter().find(|(f, _)| *f == w) {
            return self.contains(l).then(|| l.to_string());
        }
        let mut cands = vec![w.clone()];
        let mut strip = |suffix: &str, add: &[&str]| {
            if let Some(stem) = w.strip_suffix(suffix) {
                if stem.len() >= 2 {
                    for a in add {
                        cands.push(format!("{stem}{a}"));
                    }
                    let b = stem.as_bytes();
                    if b.len() >= 3 && b[b.len() - 1] == b[b.len() - 2] {
                        cands.push(stem[..stem.len() - 1].to_string());
                    }
                }
            }
        };
        strip("ing", &["", "e"]);
        strip("ed", &["", "e"]);
        strip("ies", &["y"]);
        strip("ied", &["y"]);
        strip("es", &[""]);
        strip("s", &[""]);
        cands.into_iter().find(|c| self.contains(c))
    }
}

fn is_participle(word: &str) -> bool {
    let w = word.to_lowercase();
    w.ends_with("ed")
        || w.ends_with("en")
        || PARTICIPLES_EXTRA.contains(&w.as_str())
        || IRREGULAR.iter().any(|(f, _)| *f == w)
}

/// Nominal trigger forms ("receipt", "expiry"); like passives, they take
/// their agent through "by".
fn is_nominal(word: &str) -> bool {
    let w = word.to_lowercase();
    ["ipt", "ion", "iry", "ure"].iter().any(|s| w.ends_with(s))
}

const MODALS: &[&str] = &[
    "shall", "should", "may", "can", "must", "will", "could", "might", "would",
];
const BE: &[&str] = &["is", "are", "was", "were", "be", "been", "being"];
const OTHER_AUX: &[&str] = &["has", "have", "had", "does", "do", "did"];
const NEGATIONS: &[&str] = &["not", "never"];
const MARKERS: &[&str] = &["if", "when", "whenever", "once", "while", "unless", "until"];
/// Words that are markers before a verb and prepositions before a noun.
const MARKER_PREPS: &[&str] = &["upon", "on", "after", "before", "by"];
const PREPS: &[&str] = &[
    "to", "from", "of", "in", "with", "into", "for", "at", "via", "within", "over", "by", "upon",
    "on", "after", "before",
];
const ORDINALS: &[&str] = &[
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
];

#[derive(Clone, Debug, PartialEq)]
enum El {
    Verb { lemma: String, word: String },
    Key { id: String, kind: KwType },
    Value(i64),
    Conn(LogicOp),
    Neg,
    Modal(String),
    Aux { be: bool },
    Prep(String),
    Marker(String),
    Comma,
}

fn classify(text: &LinkedText, verbs: &Verbs) -> Vec<El> {
    let mut out = Vec::new();
    for item in &text.items {
        let w = match item {
            Linked::Key { id, kind, .. } => {
                out.push(El::Key {
                    id: id.clone(),
                    kind: *kind,
                });
                continue;
            }
            Linked::Raw { text, .. } => text,
        };
        let lw = w.to_lowercase();
        let l = lw.as_str();
        let el = if l == "," {
            El::Comma
        } else if is_punct(l) {
            continue;
        } else if l == "and" {
            El::Conn(LogicOp::And)
        } else if l == "or" || l == "and/or" {
            El::Conn(LogicOp::Or)
        } else if l == "cannot" {
            out.push(El::Modal("can".into()));
            El::Neg
        } else if NEGATIONS.contains(&l) {
            El::Neg
        } else if MODALS.contains(&l) {
            El::Modal(l.to_string())
        } else if BE.contains(&l) {
            El::Aux { be: true }
        } else if OTHER_AUX.contains(&l) {
            El::Aux { be: false }
        } else if MARKERS.contains(&l) {
            El::Marker(l.to_string())
        } else if let Some(n) = ORDINALS.iter().position(|o| *o == l) {
            El::Value(n as i64 + 1)
        } else if let Ok(n) = l.parse::<i64>() {
            El::Value(n)
        } else if let Some(lemma) = verbs.lemma(l) {
            El::Verb {
                lemma,
                word: l.to_string(),
            }
        } else if PREPS.contains(&l) {
            El::Prep(l.to_string())
        } else {
            continue;
        };
        out.push(el);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Link {
    Root,
    Coord { op: LogicOp, comma: bool },
    Sub(String),
}

struct Clause {
    verb: usize,
    pre: (usize, usize),
    post: (usize, usize),
    link: Link,
}

fn segment(els: &[El], verbs: &[usize]) -> Vec<Clause> {
    let mut clauses: Vec<Clause> = Vec::new();
    let mut pre_start = 0;
    let mut link = Link::Root;
    for (k, &v) in verbs.iter().enumerate() {
        let post_end;
        let mut next_link = Link::Root;
        let mut next_pre = els.len();
        if let Some(&nv) = verbs.get(k + 1) {
            // Pre-region of the next verb: modals, auxiliaries, negation,
            // markers and agent subjects directly before it.
            let mut s = nv;
            while s > v + 1 {
                match &els[s - 1] {
                    El::Modal(_) | El::Aux { .. } | El::Neg | El::Marker(_) => s -= 1,
                    El::Key { kind, .. } if *kind == KwType::Agent => s -= 1,
                    _ => break,
                }
            }
            next_pre = s;
            let mut link_start = s;
            let before = s.checked_sub(1).filter(|&i| i > v).map(|i| &els[i]);
            next_link = match before {
                Some(El::Conn(op)) => {
                    link_start = s - 1;
                    let comma = link_start > v + 1 && els[link_start - 1] == El::Comma;
                    if comma {
                        link_start -= 1;
                    }
                    Link::Coord { op: *op, comma }
                }
                Some(El::Prep(p)) if MARKER_PREPS.contains(&p.as_str()) => {
                    link_start = s - 1;
                    Link::Sub(p.clone())
                }
                Some(El::Comma) => {
                    link_start = s - 1;
                    Link::Coord {
                        op: LogicOp::And,
                        comma: true,
                    }
                }
                _ => Link::Coord {
                    op: LogicOp::And,
                    comma: false,
                },
            };
            // A subordinator opens a subordinate clause unless an explicit
            // connective coordinates it.
            if let Some(El::Marker(m)) = els.get(s) {
                if !matches!(before, Some(El::Conn(_))) {
                    next_link = Link::Sub(m.clone());
                }
            }
            post_end = link_start;
        } else {
            post_end = els.len();
        }
        clauses.push(Clause {
            verb: v,
            pre: (pre_start, v),
            post: (v + 1, post_end),
            link: std::mem::replace(&mut link, next_link),
        });
        pre_start = next_pre;
    }
    clauses
}

fn key_node(id: &str, kind: KwType, rel: Rel) -> DepNode {
    let pos = if kind == KwType::Agent {
        Pos::AgentNoun
    } else {
        Pos::Noun
    };
    DepNode::leaf(
        NodeToken::Key {
            id: id.to_string(),
            kind,
        },
        pos,
        rel,
    )
}

enum Item {
    Atom(DepNode),
    Conn(LogicOp),
    Comma,
}

/// Groups a region into argument atoms (keys, values, prepositional phrases)
/// with coordination applied. Negation before an atom becomes its leaf
/// child; a trailing negation is returned for the verb.
fn region_args(els: &[El], passive: bool, pre: bool) -> (Vec<DepNode>, bool) {
    let mut items: Vec<Item> = Vec::new();
    let mut pending_neg = false;
    let mut i = 0;
    let atom_rel = |kind: KwType| match (pre, passive, kind) {
        (true, false, _) => Rel::Subject,
        (true, true, _) => Rel::Object,
        (false, _, _) => Rel::Object,
    };
    while i < els.len() {
        match &els[i] {
            El::Key { id, kind } => {
                let mut n = key_node(id, *kind, atom_rel(*kind));
                if std::mem::take(&mut pending_neg) {
                    n.children.push(DepNode::leaf(
                        NodeToken::Word("not".into()),
                        Pos::Negation,
                        Rel::Modifier,
                    ));
                }
                items.push(Item::Atom(n));
            }
            El::Value(v) => items.push(Item::Atom(DepNode::leaf(
                NodeToken::Value(*v),
                Pos::Other,
                Rel::Operand,
            ))),
            El::Conn(op) => items.push(Item::Conn(*op)),
            El::Comma => items.push(Item::Comma),
            El::Neg => pending_neg = true,
            El::Prep(p) => {
                // The preposition governs the following run of keys and
                // connectives between them.
                let mut j = i + 1;
                let mut inner = Vec::new();
                while j < els.len() {
                    match &els[j] {
                        El::Key { id, kind } => {
                            inner.push(Item::Atom(key_node(id, *kind, Rel::Object)))
                        }
                        El::Conn(op)
                            if matches!(els.get(j + 1), Some(El::Key { .. }))
                                && !inner.is_empty() =>
                        {
                            inner.push(Item::Conn(*op))
                        }
                        El::Value(v) => inner.push(Item::Atom(DepNode::leaf(
                            NodeToken::Value(*v),
                            Pos::Other,
                            Rel::Operand,
                        ))),
                        _ => break,
                    }
                    j += 1;
                }
                if inner.is_empty() {
                    i += 1;
                    continue;
                }
                let args = coordinate(inner);
                if p == "by" && passive && args.iter().all(|a| a.pos == Pos::AgentNoun) {
                    for mut a in args {
                        a.rel = Rel::Subject;
                        items.push(Item::Atom(a));
                    }
                } else {
                    let mut pn =
                        DepNode::leaf(NodeToken::Word(p.clone()), Pos::Preposition, Rel::Prep);
                    pn.children = args;
                    items.push(Item::Atom(pn));
                }
                i = j;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    (coordinate(items), pending_neg)
}

/// Builds conjunct structure: within a run of atoms joined by connectives or
/// commas, the first atom is the head, later atoms attach to it as conjuncts,
/// and each connective is a leaf of the conjunct it precedes. A comma run
/// without any connective separates independent arguments.
fn coordinate(items: Vec<Item>) -> Vec<DepNode> {
    let mut groups: Vec<Vec<Item>> = vec![Vec::new()];
    for it in items {
        let starts_new = matches!(it, Item::Atom(_))
            && matches!(groups.last().unwrap().last(), Some(Item::Atom(_)));
        if starts_new {
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(it);
    }
    let mut out = Vec::new();
    for g in groups {
        let has_conn = g.iter().any(|i| matches!(i, Item::Conn(_)));
        let mut head: Option<DepNode> = None;
        let mut pending_op: Option<(LogicOp, bool)> = None;
        let mut comma = false;
        for it in g {
            match it {
                Item::Comma => {
                    comma = true;
                }
                Item::Conn(op) => {
                    if let Some((prev, sb)) = pending_op.take() {
                        // Two connectives in a row: the first dangles.
                        attach_dangling(&mut head, &mut out, prev, sb);
                    }
                    pending_op = Some((op, std::mem::take(&mut comma)));
                }
                Item::Atom(mut a) => {
                    match head.as_mut() {
                        Some(h) if pending_op.is_some() || (comma && has_conn) => {
                            if let Some((op, sb)) = pending_op.take() {
                                let mut cc = DepNode::leaf(
                                    NodeToken::Word(op.word().into()),
                                    Pos::Connective,
                                    Rel::Conjunct,
                                );
                                cc.scope_break = sb;
                                a.children.push(cc);
                            }
                            a.rel = Rel::Conjunct;
                            h.children.push(a);
                        }
                        _ => {
                            if let Some(h) = head.take() {
                                out.push(h);
                            }
                            if let Some((op, sb)) = pending_op.take() {
                                // Leading connective with nothing to its left.
                                let mut cc = DepNode::leaf(
                                    NodeToken::Word(op.word().into()),
                                    Pos::Connective,
                                    Rel::Conjunct,
                                );
                                cc.scope_break = sb;
                                a.children.push(cc);
                            }
                            head = Some(a);
                        }
                    }
                    comma = false;
                }
            }
        }
        if let Some((op, sb)) = pending_op.take() {
            attach_dangling(&mut head, &mut out, op, sb);
        }
        if let Some(h) = head {
            out.push(h);
        }
    }
    out
}

fn attach_dangling(head: &mut Option<DepNode>, out: &mut Vec<DepNode>, op: LogicOp, sb: bool) {
    let mut cc = DepNode::leaf(
        NodeToken::Word(op.word().into()),
        Pos::Connective,
        Rel::Conjunct,
    );
    cc.scope_break = sb;
    match head.as_mut() {
        Some(h) => h.children.push(cc),
        None => out.push(cc),
    }
}

/// Dependency tree of a linked span, before logical restructuring.
pub fn parse_dependencies(text: &LinkedText, verbs: &Verbs) -> Result<DepNode, DepError> {
    let els = classify(text, verbs);
    let verb_idx: Vec<usize> = (0..els.len())
        .filter(|&i| matches!(els[i], El::Verb { .. }))
        .collect();
    if verb_idx.is_empty() {
        let keys: Vec<&El> = els.iter().filter(|e| matches!(e, El::Key { .. })).collect();
        let only_keys = els
            .iter()
            .all(|e| matches!(e, El::Key { .. } | El::Conn(_) | El::Comma | El::Neg));
        if !keys.is_empty() && only_keys {
            let (args, neg) = region_args(&els, false, false);
            if args.len() == 1 && !neg {
                let mut root = args.into_iter().next().unwrap();
                root.rel = Rel::Root;
                return Ok(root);
            }
        }
        return Err(DepError::NoVerbFound);
    }
    let clauses = segment(&els, &verb_idx);
    let mut nodes: Vec<DepNode> = Vec::new();
    for c in &clauses {
        let El::Verb { lemma, word } = &els[c.verb] else {
            unreachable!()
        };
        let pre = &els[c.pre.0..c.pre.1];
        let post = &els[c.post.0..c.post.1];
        let mut v = DepNode::leaf(NodeToken::Word(word.clone()), Pos::Verb, Rel::Root);
        v.lemma = Some(lemma.clone());
        v.passive = pre.contains(&El::Aux { be: true }) && is_participle(word);
        v.modal = pre.iter().find_map(|e| match e {
            El::Modal(m) => Some(m.clone()),
            _ => None,
        });
        v.marker = pre.iter().find_map(|e| match e {
            El::Marker(m) => Some(m.clone()),
            El::Prep(p) if MARKER_PREPS.contains(&p.as_str()) => Some(p.clone()),
            _ => None,
        });
        if let Link::Sub(m) = &c.link {
            v.marker.get_or_insert_with(|| m.clone());
        }
        let pre_args: Vec<El> = pre
            .iter()
            .filter(|e| !matches!(e, El::Prep(p) if MARKER_PREPS.contains(&p.as_str())))
            .cloned()
            .collect();
        let (mut a1, neg1) = region_args(&pre_args, v.passive, true);
        let (a2, neg2) = region_args(post, v.passive || is_nominal(word), false);
        a1.extend(a2);
        v.children = a1;
        if neg1 || neg2 {
            v.children.push(DepNode::leaf(
                NodeToken::Word("not".into()),
                Pos::Negation,
                Rel::Modifier,
            ));
        }
        nodes.push(v);
    }
    // Attach clauses back to front so children are complete when moved.
    let mut parent: Vec<Option<usize>> = vec![None; clauses.len()];
    let mut chain_head = vec![0usize; clauses.len()];
    for k in 0..clauses.len() {
        chain_head[k] = k;
        match &clauses[k].link {
            Link::Root => {}
            Link::Coord { .. } => {
                let h = chain_head[k - 1];
                parent[k] = Some(h);
                chain_head[k] = h;
            }
            Link::Sub(_) => parent[k] = Some(k - 1),
        }
    }
    let mut slots: Vec<Option<DepNode>> = nodes.into_iter().map(Some).collect();
    for k in (1..clauses.len()).rev() {
        let mut n = slots[k].take().unwrap();
        let p = parent[k].unwrap_or(0);
        match &clauses[k].link {
            Link::Coord { op, comma } => {
                n.rel = Rel::Conjunct;
                let mut cc = DepNode::leaf(
                    NodeToken::Word(op.word().into()),
                    Pos::Connective,
                    Rel::Conjunct,
                );
                cc.scope_break = *comma;
                n.children.insert(0, cc);
            }
            _ => n.rel = Rel::Modifier,
        }
        let parent_node = slots[p].as_mut().unwrap();
        // Conjuncts were attached back to front; keep document order.
        let at = parent_node
            .children
            .iter()
            .position(|c| c.pos == Pos::Verb || (c.rel == Rel::Conjunct && c.lemma.is_some()))
            .unwrap_or(parent_node.children.len());
        parent_node.children.insert(at, n);
    }
    let mut root = slots[0].take().unwrap();
    root.rel = Rel::Root;
    Ok(root)
}

fn is_cc_leaf(n: &DepNode) -> bool {
    n.pos == Pos::Connective && n.children.is_empty()
}

fn is_neg_leaf(n: &DepNode) -> bool {
    n.pos == Pos::Negation && n.children.is_empty()
}

/// Post-order promotion of connectives to internal nodes. Conjunct chains
/// are combined left-associatively with same-operator flattening; a comma
/// before a connective closes the scope to its left. Negation leaves wrap
/// their head in a unary `not`.
pub fn restructure_logical(tree: &DepNode) -> Result<DepNode, DepError> {
    let mut node = tree.clone();
    node.children = tree
        .children
        .iter()
        .map(restructure_logical)
        .collect::<Result<_, _>>()?;
    let (conjuncts, rest): (Vec<DepNode>, Vec<DepNode>) = node
        .children
        .into_iter()
        .partition(|c| c.rel == Rel::Conjunct && !is_cc_leaf(c));
    // A conjunct keeps its own connective leaf for the parent to consume.
    let own_cc = node.rel == Rel::Conjunct;
    let (stray_cc, rest): (Vec<DepNode>, Vec<DepNode>) =
        rest.into_iter().partition(|c| is_cc_leaf(c) && !own_cc);
    let (negs, rest): (Vec<DepNode>, Vec<DepNode>) = rest.into_iter().partition(is_neg_leaf);
    node.children = rest;
    if let Some(cc) = stray_cc.first() {
        if conjuncts.is_empty() {
            return Err(DepError::DanglingConnective { op: cc.label() });
        }
    }
    let rel = node.rel;
    if !negs.is_empty() {
        node = DepNode::connective(LogicOp::Not, rel, vec![node]);
    }
    if conjuncts.is_empty() {
        return Ok(node);
    }
    let mut seq: Vec<(Option<(LogicOp, bool)>, DepNode)> = Vec::new();
    for mut c in conjuncts {
        let cc = c
            .children
            .iter()
            .position(is_cc_leaf)
            .map(|i| c.children.remove(i));
        let op = cc.map(|cc| (cc.logic_op().unwrap_or(LogicOp::And), cc.scope_break));
        seq.push((op, c));
    }
    // A conjunct without its own connective takes the next one ("A, B or C").
    let mut next: Option<LogicOp> = None;
    for (op, _) in seq.iter_mut().rev() {
        match op {
            Some((o, _)) => next = Some(*o),
            None => *op = next.map(|o| (o, false)),
        }
    }
    if seq.iter().any(|(op, _)| op.is_none()) {
        let op = stray_cc
            .first()
            .and_then(DepNode::logic_op)
            .unwrap_or(LogicOp::And);
        return Err(DepError::DanglingConnective {
            op: op.word().into(),
        });
    }
    // Scope segments start at comma-preceded connectives; each is folded
    // left to right, then segments are joined in order.
    let mut segments: Vec<(LogicOp, Vec<(LogicOp, DepNode)>)> = vec![(LogicOp::And, Vec::new())];
    for (op, n) in seq {
        let (op, sb) = op.unwrap();
        if sb {
            segments.push((op, Vec::new()));
        }
        segments.last_mut().unwrap().1.push((op, n));
    }
    let mut acc: Option<(DepNode, bool)> = Some((node, false));
    for (i, (join, items)) in segments.into_iter().enumerate() {
        let mut seg: Option<(DepNode, bool)> = if i == 0 { acc.take() } else { None };
        for (op, n) in items {
            seg = Some(match seg {
                None => (n, false),
                Some((a, built)) => (fold(a, built, op, n, rel), true),
            });
        }
        let Some(seg) = seg else { continue };
        acc = Some(match acc {
            None => seg,
            Some((a, built)) => (fold(a, built, join, seg.0, rel), true),
        });
    }
    let mut out = acc.unwrap().0;
    out.rel = rel;
    Ok(out)
}

fn fold(acc: DepNode, acc_built: bool, op: LogicOp, n: DepNode, rel: Rel) -> DepNode {
    if acc_built && acc.logic_op() == Some(op) {
        let mut acc = acc;
        let mut n = n;
        n.rel = Rel::Operand;
        acc.children.push(n);
        acc
    } else {
        DepNode::connective(op, rel, vec![acc, n])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::tokenize;
    use crate::lexicon::{link_keywords, Lexicon};

    fn lex() -> Lexicon {
        Lexicon::parse(
            "ue\tagent\tUE\n\
             mme\tagent\tMME\n\
             auth_reject\tmessage\tAUTHENTICATION REJECT\n\
             tau_reject\tmessage\tTRACKING AREA UPDATE REJECT\n\
             attach_accept\tmessage\tATTACH ACCEPT\n\
             service_req_attempt_counter\tcounter\tservice request attempt counter\n\
             timer_t3460\ttimer\ttimer T3460|T3460\n\
             sm_command\tmessage\tSECURITY MODE COMMAND\n\
             xa\tvariable\tXA\n\
             xb\tvariable\tXB\n\
             xc\tvariable\tXC\n\
             xd\tvariable\tXD\n",
        )
        .unwrap()
    }

    fn verbs() -> Verbs {
        Verbs::new([
            "receive", "reset", "send", "start", "initiate", "stop", "include", "expiry",
            "receipt", "accept",
        ])
    }

    fn parse(s: &str) -> DepNode {
        let toks: Vec<String> = tokenize(s, 0).into_iter().map(|t| t.0).collect();
        parse_dependencies(&link_keywords(&toks, &lex(), 0.2), &verbs()).unwrap()
    }

    fn shape(n: &DepNode) -> String {
        if n.children.is_empty() {
            n.label()
        } else {
            let kids: Vec<String> = n.children.iter().map(shape).collect();
            format!("{}({})", n.label(), kids.join(", "))
        }
    }

    #[test]
    fn lemmatizer() {
        let v = verbs();
        assert_eq!(v.lemma("receives").as_deref(), Some("receive"));
        assert_eq!(v.lemma("receiving").as_deref(), Some("receive"));
        assert_eq!(v.lemma("stopped").as_deref(), Some("stop"));
        assert_eq!(v.lemma("sent").as_deref(), Some("send"));
        assert_eq!(v.lemma("starting").as_deref(), Some("start"));
        assert_eq!(v.lemma("reset").as_deref(), Some("reset"));
        assert_eq!(v.lemma("message"), None);
    }

    #[test]
    fn original_tree_keeps_connective_as_leaf() {
        let t = parse("If the UE receives auth_reject or tau_reject");
        assert_eq!(t.label(), "receive");
        assert_eq!(t.marker.as_deref(), Some("if"));
        assert_eq!(shape(&t), "receive(ue, auth_reject(tau_reject(or)))");
        assert_eq!(t.children[0].rel, Rel::Subject);
        let r = restructure_logical(&t).unwrap();
        assert_eq!(shape(&r), "receive(ue, or(auth_reject, tau_reject))");
        assert_eq!(r.children[1].rel, Rel::Object);
    }

    #[test]
    fn reset_with_subject_and_object() {
        let t = parse("the UE shall reset the service request attempt counter");
        assert_eq!(shape(&t), "reset(ue, service_req_attempt_counter)");
        assert_eq!(t.modal.as_deref(), Some("shall"));
        assert_eq!(t.children[1].rel, Rel::Object);
    }

    #[test]
    fn single_keyword_is_root() {
        let t = parse("tau_reject");
        assert_eq!(shape(&t), "tau_reject");
        assert_eq!(t.rel, Rel::Root);
    }

    #[test]
    fn no_verb() {
        let toks: Vec<String> = ["the", "message"].map(String::from).to_vec();
        assert_eq!(
            parse_dependencies(&link_keywords(&toks, &lex(), 0.2), &verbs()),
            Err(DepError::NoVerbFound)
        );
    }

    #[test]
    fn nominal_takes_by_agent() {
        let t = parse("upon receipt of the ATTACH ACCEPT message by the UE");
        assert!(t
            .children
            .iter()
            .any(|c| c.rel == Rel::Subject && c.pos == Pos::AgentNoun));
    }

    #[test]
    fn passive_normalises_by_agent() {
        let t = parse("If auth_reject or tau_reject is received by the UE");
        assert!(t.passive);
        let r = restructure_logical(&t).unwrap();
        let active =
            restructure_logical(&parse("If the UE receives auth_reject or tau_reject")).unwrap();
        let subj = |n: &DepNode| n.children.iter().find(|c| c.rel == Rel::Subject).map(shape);
        assert_eq!(subj(&r), subj(&active));
        assert_eq!(subj(&r).as_deref(), Some("ue"));
    }

    #[test]
    fn left_associative_flat_conjuncts() {
        let r = restructure_logical(&parse("the UE receives XA and XB or XC")).unwrap();
        assert_eq!(shape(&r), "receive(ue, or(and(xa, xb), xc))");
        let r = restructure_logical(&parse("the UE receives XA and XB and XC or XD")).unwrap();
        assert_eq!(shape(&r), "receive(ue, or(and(xa, xb, xc), xd))");
    }

    #[test]
    fn comma_delimits_scope() {
        let r = restructure_logical(&parse("the UE receives XA, and XB or XC")).unwrap();
        assert_eq!(shape(&r), "receive(ue, and(xa, or(xb, xc)))");
        let r = restructure_logical(&parse("the UE receives XA, XB or XC")).unwrap();
        assert_eq!(shape(&r), "receive(ue, or(xa, xb, xc))");
    }

    #[test]
    fn clause_coordination_and_subordination() {
        let t = parse("The MME initiates the procedure by sending a SECURITY MODE COMMAND message to the UE and starting timer T3460");
        let r = restructure_logical(&t).unwrap();
        assert_eq!(
            shape(&r),
            "initiate(mme, and(send(sm_command, to(ue)), start(timer_t3460)))"
        );
        assert_eq!(r.children[1].rel, Rel::Modifier);
    }

    #[test]
    fn negation_wraps_clause() {
        let r = restructure_logical(&parse("if the UE does not receive attach_accept")).unwrap();
        assert_eq!(shape(&r), "not(receive(ue, attach_accept))");
        assert_eq!(r.rel, Rel::Root);
    }

    #[test]
    fn cannot_is_negated_can() {
        let t = parse("if the SECURITY MODE COMMAND message cannot be accepted");
        assert_eq!(t.modal.as_deref(), Some("can"));
        assert!(t.children.iter().any(|c| c.pos == Pos::Negation));
    }

    #[test]
    fn dangling_connective() {
        let t = parse("the UE receives XA and");
        assert!(matches!(
            restructure_logical(&t),
            Err(DepError::DanglingConnective { .. })
        ));
    }

    #[test]
    fn no_connectives_is_identity() {
        let t = parse("the UE shall reset the service request attempt counter");
        assert_eq!(restructure_logical(&t).unwrap(), t);
    }

    #[test]
    fn idempotent_and_leaf_preserving() {
        for s in [
            "the UE receives XA, and XB or XC",
            "The MME initiates the procedure by sending a SECURITY MODE COMMAND message to the UE and starting timer T3460",
            "if the UE does not receive attach_accept",
        ] {
            let t = parse(s);
            let once = restructure_logical(&t).unwrap();
            assert_eq!(restructure_logical(&once).unwrap(), once);
            let mut a = t.keyword_leaves();
            let mut b = once.keyword_leaves();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn text_and_dot_output() {
        let t =
            restructure_logical(&parse("If the UE receives auth_reject or tau_reject")).unwrap();
        let txt = t.to_indented();
        assert!(txt.starts_with("receive [verb/root marker=if]\n"));
        assert!(txt.contains("    auth_reject [noun/operand]"));
        let dot = t.to_dot();
        assert!(dot.contains("n0 -> n1"));
        assert_eq!(dot.matches("label=\"or\"").count(), 1);
    }
}
