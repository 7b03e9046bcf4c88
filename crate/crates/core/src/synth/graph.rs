use std::collections::BTreeMap;
use std::fmt::Write;

use super::{Fsm, StateRef, SynthError, Transition};
use crate::logic::{parse_actions, parse_expr};

const WILDCARD: &str = "*";

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT text: one node per state (the initial one marked `init=true`), one
/// edge per transition labelled `C / A1; A2`. Wildcard transitions start at
/// the `*` node; a stay is a self-loop.
pub fn emit_graph(fsm: &Fsm) -> String {
    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(&fsm.participant)).unwrap();
    for s in &fsm.states {
        if *s == fsm.initial {
            writeln!(out, "  {} [init=true, shape=doublecircle];", quote(s)).unwrap();
        } else {
            writeln!(out, "  {};", quote(s)).unwrap();
        }
    }
    if fsm.transitions.iter().any(|t| t.from == StateRef::Any) {
        writeln!(out, "  {} [shape=plaintext];", quote(WILDCARD)).unwrap();
    }
    for t in &fsm.transitions {
        let from = t.from.to_string();
        let to = t.to.clone().unwrap_or_else(|| from.clone());
        let blocks: Vec<String> = t.provenance.iter().map(|b| b.to_string()).collect();
        writeln!(
            out,
            "  {} -> {} [label={}, blocks={}];",
            quote(&from),
            quote(&to),
            quote(&t.label()),
            quote(&blocks.join(","))
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

struct Scanner<'a> {
    s: &'a [u8],
    i: usize,
}

impl Scanner<'_> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, lit: &str) -> bool {
        self.ws();
        if self.s[self.i..].starts_with(lit.as_bytes()) {
            self.i += lit.len();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.ws();
        if self.s.get(self.i) == Some(&b'"') {
            self.i += 1;
            let mut out = Vec::new();
            while self.i < self.s.len() {
                match self.s[self.i] {
                    b'\\' if self.i + 1 < self.s.len() => {
                        out.push(self.s[self.i + 1]);
                        self.i += 2;
                    }
                    b'"' => {
                        self.i += 1;
                        return String::from_utf8(out).ok();
                    }
                    c => {
                        out.push(c);
                        self.i += 1;
                    }
                }
            }
            return None;
        }
        let start = self.i;
        while self.i < self.s.len()
            && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_')
        {
            self.i += 1;
        }
        (self.i > start).then(|| String::from_utf8_lossy(&self.s[start..self.i]).into_owned())
    }

    fn attrs(&mut self) -> Option<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        if !self.eat("[") {
            return Some(out);
        }
        loop {
            if self.eat("]") {
                return Some(out);
            }
            let k = self.ident()?;
            if !self.eat("=") {
                return None;
            }
            let v = self.ident()?;
            out.insert(k, v);
            self.eat(",");
        }
    }
}

/// Parses text produced by [`emit_graph`].
pub fn parse_graph(text: &str) -> Result<Fsm, SynthError> {
    let err = |line: usize, msg: &str| SynthError::Graph {
        line,
        msg: msg.to_string(),
    };
    let mut participant = None;
    let mut states = Vec::new();
    let mut initial = None;
    let mut transitions = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let l = raw.trim();
        if l.is_empty() || l == "}" || l.starts_with("//") {
            continue;
        }
        let mut sc = Scanner {
            s: l.as_bytes(),
            i: 0,
        };
        if sc.eat("digraph") {
            participant = Some(sc.ident().ok_or_else(|| err(line, "missing graph name"))?);
            continue;
        }
        let a = sc.ident().ok_or_else(|| err(line, "expected node id"))?;
        if sc.eat("->") {
            let b = sc
                .ident()
                .ok_or_else(|| err(line, "expected edge target"))?;
            let attrs = sc.attrs().ok_or_else(|| err(line, "bad attribute list"))?;
            let label = attrs
                .get("label")
                .ok_or_else(|| err(line, "edge without label"))?;
            let (c, acts) = label
                .split_once(" / ")
                .ok_or_else(|| err(line, "label is not `C / A`"))?;
            let from = if a == WILDCARD {
                StateRef::Any
            } else {
                StateRef::Named(a.clone())
            };
            let to = (b != a).then_some(b);
            let mut t = Transition::new(from, to, parse_expr(c)?, parse_actions(acts)?);
            t.provenance = attrs
                .get("blocks")
                .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect())
                .unwrap_or_default();
            transitions.push(t);
        } else {
            let attrs = sc.attrs().ok_or_else(|| err(line, "bad attribute list"))?;
            if a == WILDCARD {
                continue;
            }
            if attrs.get("init").map(String::as_str) == Some("true") {
                initial = Some(a.clone());
            }
            states.push(a);
        }
    }
    let participant = participant.ok_or_else(|| err(0, "no digraph header"))?;
    let initial = initial
        .or_else(|| states.first().cloned())
        .ok_or_else(|| err(0, "no states"))?;
    Ok(Fsm {
        participant,
        states,
        initial,
        transitions,
    })
}
