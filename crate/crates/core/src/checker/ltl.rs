//! Temporal formulas: parsing, negation normal form, progression and a
//! tableau translation to a generalized Büchi automaton.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::logic::syntax::{lex, Cursor, Tok};
use crate::logic::{BoolExpr, LogicError, Value};

/// Temporal formula. Propositional parts are kept whole as [`BoolExpr`]s.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ltl {
    Prop(BoolExpr),
    Not(Box<Ltl>),
    And(Box<Ltl>, Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
    /// Dual of until: `a R b` holds while `b` holds up to and including a
    /// step where `a` holds.
    Release(Box<Ltl>, Box<Ltl>),
    Globally(Box<Ltl>),
    Finally(Box<Ltl>),
}

use Ltl::*;

fn b(l: Ltl) -> Box<Ltl> {
    Box::new(l)
}

impl Ltl {
    pub fn tt() -> Ltl {
        Prop(BoolExpr::True)
    }

    pub fn ff() -> Ltl {
        Prop(BoolExpr::False)
    }

    fn is_true(&self) -> bool {
        matches!(self, Prop(BoolExpr::True))
    }

    fn is_false(&self) -> bool {
        matches!(self, Prop(BoolExpr::False))
    }

    pub fn and(self, o: Ltl) -> Ltl {
        match (self, o) {
            (Prop(a), Prop(b)) => Prop(a.and(b)),
            (a, _) if a.is_false() => Ltl::ff(),
            (_, c) if c.is_false() => Ltl::ff(),
            (a, c) if a.is_true() => c,
            (a, c) if c.is_true() => a,
            (a, c) if a == c => a,
            (a, c) => And(b(a), b(c)),
        }
    }

    pub fn or(self, o: Ltl) -> Ltl {
        match (self, o) {
            (Prop(a), Prop(b)) => Prop(a.or(b)),
            (a, _) if a.is_true() => Ltl::tt(),
            (_, c) if c.is_true() => Ltl::tt(),
            (a, c) if a.is_false() => c,
            (a, c) if c.is_false() => a,
            (a, c) if a == c => a,
            (a, c) => Or(b(a), b(c)),
        }
    }

    /// Negation normal form with `G`/`F` rewritten to `R`/`U`.
    pub fn nnf(&self) -> Ltl {
        self.nnf_pol(true)
    }

    fn nnf_pol(&self, pos: bool) -> Ltl {
        match (self, pos) {
            (Prop(p), true) => Prop(p.clone()),
            (Prop(p), false) => Prop(p.clone().negate()),
            (Not(a), _) => a.nnf_pol(!pos),
            (And(x, y), true) => x.nnf_pol(true).and(y.nnf_pol(true)),
            (And(x, y), false) => x.nnf_pol(false).or(y.nnf_pol(false)),
            (Or(x, y), true) => x.nnf_pol(true).or(y.nnf_pol(true)),
            (Or(x, y), false) => x.nnf_pol(false).and(y.nnf_pol(false)),
            (Next(a), _) => Next(b(a.nnf_pol(pos))),
            (Until(x, y), true) => Until(b(x.nnf_pol(true)), b(y.nnf_pol(true))),
            (Until(x, y), false) => Release(b(x.nnf_pol(false)), b(y.nnf_pol(false))),
            (Release(x, y), true) => Release(b(x.nnf_pol(true)), b(y.nnf_pol(true))),
            (Release(x, y), false) => Until(b(x.nnf_pol(false)), b(y.nnf_pol(false))),
            (Globally(a), true) => Release(b(Ltl::ff()), b(a.nnf_pol(true))),
            (Globally(a), false) => Until(b(Ltl::tt()), b(a.nnf_pol(false))),
            (Finally(a), true) => Until(b(Ltl::tt()), b(a.nnf_pol(true))),
            (Finally(a), false) => Release(b(Ltl::ff()), b(a.nnf_pol(false))),
        }
    }

    /// True when an NNF formula has no release operator, so every
    /// satisfying run has a finite good prefix.
    pub fn is_cosafety(&self) -> bool {
        match self {
            Prop(_) => true,
            Release(..) | Globally(_) => false,
            Not(a) | Next(a) | Finally(a) => a.is_cosafety(),
            And(x, y) | Or(x, y) | Until(x, y) => x.is_cosafety() && y.is_cosafety(),
        }
    }

    /// Propositions used anywhere in the formula.
    pub fn props(&self) -> Vec<&BoolExpr> {
        let mut out = Vec::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props<'a>(&'a self, out: &mut Vec<&'a BoolExpr>) {
        match self {
            Prop(p) => out.push(p),
            Not(a) | Next(a) | Globally(a) | Finally(a) => a.collect_props(out),
            And(x, y) | Or(x, y) | Until(x, y) | Release(x, y) => {
                x.collect_props(out);
                y.collect_props(out);
            }
        }
    }

    /// Rewrites an NNF formula into the obligation for the next step after
    /// observing a state where `holds` decides propositions.
    pub fn progress(&self, holds: &impl Fn(&BoolExpr) -> bool) -> Ltl {
        match self {
            Prop(p) => {
                if holds(p) {
                    Ltl::tt()
                } else {
                    Ltl::ff()
                }
            }
            And(x, y) => x.progress(holds).and(y.progress(holds)),
            Or(x, y) => x.progress(holds).or(y.progress(holds)),
            Next(a) => (**a).clone(),
            Until(x, y) => y.progress(holds).or(x.progress(holds).and(self.clone())),
            Release(x, y) => y.progress(holds).and(x.progress(holds).or(self.clone())),
            Not(_) | Globally(_) | Finally(_) => self.nnf().progress(holds),
        }
    }

    pub fn is_trivially_true(&self) -> bool {
        self.is_true()
    }

    pub fn is_trivially_false(&self) -> bool {
        self.is_false()
    }
}

impl fmt::Display for Ltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prop(p) => write!(f, "({p})"),
            Not(a) => write!(f, "!{a}"),
            And(x, y) => write!(f, "({x} & {y})"),
            Or(x, y) => write!(f, "({x} | {y})"),
            Next(a) => write!(f, "X {a}"),
            Until(x, y) => write!(f, "({x} U {y})"),
            Release(x, y) => write!(f, "({x} R {y})"),
            Globally(a) => write!(f, "G {a}"),
            Finally(a) => write!(f, "F {a}"),
        }
    }
}

fn is_op(c: &Cursor, name: &str) -> bool {
    matches!(c.peek(), Some(Tok::Ident(s)) if s == name)
        && !matches!(
            c.peek_at(1),
            None | Some(Tok::Cmp(_) | Tok::Ne | Tok::And | Tok::Or | Tok::RParen | Tok::Implies)
        )
}

struct P<'a> {
    c: Cursor<'a>,
}

impl P<'_> {
    fn implication(&mut self) -> Result<Ltl, LogicError> {
        let lhs = self.disj()?;
        if self.c.eat(&Tok::Implies) {
            let rhs = self.implication()?;
            return Ok(Not(b(lhs)).or(rhs));
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> Result<Ltl, LogicError> {
        let mut l = self.conj()?;
        while self.c.eat(&Tok::Or) {
            let r = self.conj()?;
            l = Or(b(l), b(r));
        }
        Ok(l)
    }

    fn conj(&mut self) -> Result<Ltl, LogicError> {
        let mut l = self.binary()?;
        while self.c.eat(&Tok::And) {
            let r = self.binary()?;
            l = And(b(l), b(r));
        }
        Ok(l)
    }

    fn binary(&mut self) -> Result<Ltl, LogicError> {
        let l = self.unary()?;
        for (name, ctor) in [
            ("U", Until as fn(_, _) -> Ltl),
            ("R", Release as fn(_, _) -> Ltl),
        ] {
            if matches!(self.c.peek(), Some(Tok::Ident(s)) if s == name) {
                self.c.bump();
                let r = self.binary()?;
                return Ok(ctor(b(l), b(r)));
            }
        }
        Ok(l)
    }

    fn unary(&mut self) -> Result<Ltl, LogicError> {
        if self.c.eat(&Tok::Not) {
            return Ok(Not(b(self.unary()?)));
        }
        for (name, ctor) in [
            ("G", Globally as fn(_) -> Ltl),
            ("F", Finally as fn(_) -> Ltl),
            ("X", Next as fn(_) -> Ltl),
        ] {
            if is_op(&self.c, name) {
                self.c.bump();
                return Ok(ctor(b(self.unary()?)));
            }
        }
        if self.c.eat(&Tok::LParen) {
            let e = self.implication()?;
            self.c.expect(&Tok::RParen, "`)`")?;
            return Ok(e);
        }
        Ok(Prop(self.c.atom()?))
    }
}

/// Parses `G (a -> F b)`-style formulas over IR atoms.
pub fn parse_ltl(src: &str) -> Result<Ltl, LogicError> {
    let toks = lex(src)?;
    let mut p = P {
        c: Cursor::new(&toks, src.len()),
    };
    let f = p.implication()?;
    if !p.c.at_end() {
        return Err(p.c.error("trailing input".into()));
    }
    Ok(collapse(f))
}

/// Folds purely propositional subtrees into single propositions.
fn collapse(f: Ltl) -> Ltl {
    match f {
        Not(a) => match collapse(*a) {
            Prop(p) => Prop(p.negate()),
            a => Not(b(a)),
        },
        And(x, y) => match (collapse(*x), collapse(*y)) {
            (Prop(p), Prop(q)) => Prop(BoolExpr::And(vec![p, q])),
            (x, y) => And(b(x), b(y)),
        },
        Or(x, y) => match (collapse(*x), collapse(*y)) {
            (Prop(p), Prop(q)) => Prop(BoolExpr::Or(vec![p, q])),
            (x, y) => Or(b(x), b(y)),
        },
        Next(a) => Next(b(collapse(*a))),
        Globally(a) => Globally(b(collapse(*a))),
        Finally(a) => Finally(b(collapse(*a))),
        Until(x, y) => Until(b(collapse(*x)), b(collapse(*y))),
        Release(x, y) => Release(b(collapse(*x)), b(collapse(*y))),
        p => p,
    }
}

/// A named property from a property file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LtlProperty {
    pub name: String,
    pub formula: Ltl,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
}

/// One `name: formula` per line; `#` comments. A `[bound=N]` suffix on the
/// name overrides the step bound.
pub fn parse_properties(text: &str) -> Result<Vec<LtlProperty>, (usize, LogicError)> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |e| (n + 1, e);
        let (head, body) = line.split_once(':').ok_or_else(|| {
            err(LogicError::Parse {
                pos: 0,
                msg: "expected `name: formula`".into(),
            })
        })?;
        let (name, bound) = match head.split_once("[bound=") {
            Some((nm, rest)) => {
                let v = rest.trim_end_matches(']').trim().parse().map_err(|_| {
                    err(LogicError::Parse {
                        pos: 0,
                        msg: format!("bad bound in `{head}`"),
                    })
                })?;
                (nm.trim(), Some(v))
            }
            None => (head.trim(), None),
        };
        out.push(LtlProperty {
            name: name.to_string(),
            formula: parse_ltl(body.trim()).map_err(err)?,
            source: body.trim().to_string(),
            bound,
        });
    }
    Ok(out)
}

/// Generalized Büchi automaton from the tableau construction. Node `i`
/// constrains the state it reads with the conjunction of `labels[i]`.
#[derive(Clone, Debug)]
pub struct Gba {
    pub labels: Vec<Vec<BoolExpr>>,
    pub initial: Vec<usize>,
    pub succ: Vec<Vec<usize>>,
    /// One set per until-subformula; a run must visit each infinitely often.
    pub accepting: Vec<BTreeSet<usize>>,
}

#[derive(Clone)]
struct TNode {
    incoming: BTreeSet<usize>,
    new: BTreeSet<Ltl>,
    old: BTreeSet<Ltl>,
    next: BTreeSet<Ltl>,
}

const INIT: usize = usize::MAX;

struct Builder {
    done: Vec<TNode>,
}

impl Builder {
    fn expand(&mut self, mut node: TNode) {
        let Some(eta) = node.new.iter().next().cloned() else {
            if let Some(nd) = self
                .done
                .iter_mut()
                .find(|d| d.old == node.old && d.next == node.next)
            {
                nd.incoming.extend(node.incoming);
                return;
            }
            let id = self.done.len();
            let next = node.next.clone();
            self.done.push(node);
            self.expand(TNode {
                incoming: BTreeSet::from([id]),
                new: next,
                old: BTreeSet::new(),
                next: BTreeSet::new(),
            });
            return;
        };
        node.new.remove(&eta);
        if node.old.contains(&eta) {
            return self.expand(node);
        }
        match &eta {
            Prop(p) => {
                if *p == BoolExpr::False {
                    return;
                }
                node.old.insert(eta);
                self.expand(node);
            }
            And(x, y) => {
                for f in [x, y] {
                    if !node.old.contains(f) {
                        node.new.insert((**f).clone());
                    }
                }
                node.old.insert(eta);
                self.expand(node);
            }
            Next(x) => {
                node.next.insert((**x).clone());
                node.old.insert(eta);
                self.expand(node);
            }
            Or(x, y) | Until(x, y) | Release(x, y) => {
                let (mut n1, mut n2) = (node.clone(), node);
                let (a1, a2): (Vec<&Ltl>, Vec<&Ltl>) = match &eta {
                    Or(..) => (vec![x], vec![y]),
                    Until(..) => (vec![x], vec![y]),
                    _ => (vec![y], vec![x, y]),
                };
                for f in a1 {
                    if !n1.old.contains(f) {
                        n1.new.insert(f.clone());
                    }
                }
                if !matches!(eta, Or(..)) {
                    n1.next.insert(eta.clone());
                }
                for f in a2 {
                    if !n2.old.contains(f) {
                        n2.new.insert(f.clone());
                    }
                }
                n1.old.insert(eta.clone());
                n2.old.insert(eta);
                self.expand(n1);
                self.expand(n2);
            }
            Not(_) | Globally(_) | Finally(_) => {
                node.new.insert(eta.nnf());
                self.expand(node);
            }
        }
    }
}

fn untils(f: &Ltl, out: &mut BTreeSet<Ltl>) {
    match f {
        Until(x, y) => {
            out.insert(f.clone());
            untils(x, out);
            untils(y, out);
        }
        And(x, y) | Or(x, y) | Release(x, y) => {
            untils(x, out);
            untils(y, out);
        }
        Next(a) | Not(a) | Globally(a) | Finally(a) => untils(a, out),
        Prop(_) => {}
    }
}

/// Tableau construction over the NNF of `f`.
pub fn to_gba(f: &Ltl) -> Gba {
    let f = f.nnf();
    let mut bld = Builder { done: vec![] };
    bld.expand(TNode {
        incoming: BTreeSet::from([INIT]),
        new: BTreeSet::from([f.clone()]),
        old: BTreeSet::new(),
        next: BTreeSet::new(),
    });
    let nodes = bld.done;
    let mut succ = vec![Vec::new(); nodes.len()];
    let mut initial = Vec::new();
    for (j, n) in nodes.iter().enumerate() {
        for &i in &n.incoming {
            if i == INIT {
                initial.push(j);
            } else {
                succ[i].push(j);
            }
        }
    }
    for s in &mut succ {
        s.sort_unstable();
        s.dedup();
    }
    let labels = nodes
        .iter()
        .map(|n| {
            n.old
                .iter()
                .filter_map(|l| match l {
                    Prop(p) if *p != BoolExpr::True => Some(p.clone()),
                    _ => None,
                })
                .collect()
        })
        .collect();
    let mut us = BTreeSet::new();
    untils(&f, &mut us);
    let accepting = us
        .iter()
        .map(|u| {
            let Until(_, psi) = u else { unreachable!() };
            nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| n.old.contains(psi) || !n.old.contains(u))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    Gba {
        labels,
        initial,
        succ,
        accepting,
    }
}

/// Evaluates a formula on the ultimately periodic word `word[..]` whose
/// last position loops back to `loop_start`. Written directly from the
/// semantics, for checking traces and automata.
pub fn eval_lasso(f: &Ltl, word: &[BTreeMap<String, Value>], loop_start: usize) -> bool {
    let n = word.len();
    let succ = |i: usize| if i + 1 < n { i + 1 } else { loop_start };
    fn sat(
        f: &Ltl,
        i: usize,
        word: &[BTreeMap<String, Value>],
        succ: &dyn Fn(usize) -> usize,
    ) -> bool {
        let n = word.len();
        match f {
            Prop(p) => p.eval_with(&|v| word[i].get(v).cloned()),
            Not(a) => !sat(a, i, word, succ),
            And(x, y) => sat(x, i, word, succ) && sat(y, i, word, succ),
            Or(x, y) => sat(x, i, word, succ) || sat(y, i, word, succ),
            Next(a) => sat(a, succ(i), word, succ),
            Finally(a) => sat(&Until(b(Ltl::tt()), a.clone()), i, word, succ),
            Globally(a) => !sat(&Finally(b(Not(a.clone()))), i, word, succ),
            Release(x, y) => !sat(&Until(b(Not(x.clone())), b(Not(y.clone()))), i, word, succ),
            Until(x, y) => {
                // Positions reachable from i, in order, each visited once.
                let mut j = i;
                let mut seen = vec![false; n];
                loop {
                    if sat(y, j, word, succ) {
                        return true;
                    }
                    if !sat(x, j, word, succ) || seen[j] {
                        return false;
                    }
                    seen[j] = true;
                    j = succ(j);
                }
            }
        }
    }
    sat(f, 0, word, &succ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Ltl {
        Prop(BoolExpr::flag(s))
    }

    fn arb_ltl() -> impl Strategy<Value = Ltl> {
        let leaf = prop_oneof![Just(p("a")), Just(p("b")), Just(p("a").and(p("b")))];
        leaf.prop_recursive(4, 16, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|x| Not(b(x))),
                inner.clone().prop_map(|x| Next(b(x))),
                inner.clone().prop_map(|x| Globally(b(x))),
                inner.clone().prop_map(|x| Finally(b(x))),
                (inner.clone(), inner.clone()).prop_map(|(x, y)| Until(b(x), b(y))),
                (inner.clone(), inner.clone()).prop_map(|(x, y)| Release(b(x), b(y))),
                (inner.clone(), inner.clone()).prop_map(|(x, y)| And(b(x), b(y))),
                (inner.clone(), inner).prop_map(|(x, y)| Or(b(x), b(y))),
            ]
        })
    }

    fn arb_word() -> impl Strategy<Value = (Vec<BTreeMap<String, Value>>, usize)> {
        prop::collection::vec((any::<bool>(), any::<bool>()), 1..5).prop_flat_map(|w| {
            let n = w.len();
            let word: Vec<_> = w
                .into_iter()
                .map(|(a, bb)| {
                    BTreeMap::from([
                        ("a".to_string(), Value::Bool(a)),
                        ("b".to_string(), Value::Bool(bb)),
                    ])
                })
                .collect();
            (Just(word), 0..n)
        })
    }

    /// Does the automaton accept the lasso word? Searches the product of
    /// automaton nodes and word positions for a fair cycle.
    fn gba_accepts(g: &Gba, word: &[BTreeMap<String, Value>], ls: usize) -> bool {
        let n = word.len();
        let next = |i: usize| if i + 1 < n { i + 1 } else { ls };
        let ok = |q: usize, i: usize| {
            g.labels[q]
                .iter()
                .all(|e| e.eval_with(&|v| word[i].get(v).cloned()))
        };
        let nodes: Vec<(usize, usize)> = (0..g.labels.len())
            .flat_map(|q| (0..n).map(move |i| (q, i)))
            .collect();
        let succ = |(q, i): (usize, usize)| -> Vec<(usize, usize)> {
            g.succ[q]
                .iter()
                .filter(|&&q2| ok(q2, next(i)))
                .map(|&q2| (q2, next(i)))
                .collect()
        };
        let reach = |from: Vec<(usize, usize)>| {
            let mut seen: BTreeSet<(usize, usize)> = from.iter().copied().collect();
            let mut stack = from;
            while let Some(x) = stack.pop() {
                for y in succ(x) {
                    if seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
            seen
        };
        let init: Vec<_> = g
            .initial
            .iter()
            .filter(|&&q| ok(q, 0))
            .map(|&q| (q, 0))
            .collect();
        let reachable = reach(init);
        // A fair cycle exists iff some reachable node lies on a cycle whose
        // strongly connected part meets every acceptance set.
        nodes.iter().filter(|x| reachable.contains(x)).any(|&x| {
            let fwd = reach(succ(x));
            if !fwd.contains(&x) {
                return false;
            }
            let scc: Vec<_> = fwd
                .iter()
                .filter(|&&y| reach(succ(y)).contains(&x))
                .collect();
            g.accepting
                .iter()
                .all(|set| scc.iter().any(|(q, _)| set.contains(q)))
        })
    }

    #[test]
    fn parses_and_collapses() {
        let f = parse_ltl("G(ue_accepted -> ue_fresh)").unwrap();
        assert_eq!(
            f,
            Globally(b(Prop(parse_expr_ok("!ue_accepted | ue_fresh"))))
        );
        let g = parse_ltl("F x = 3 U !y").unwrap();
        assert!(matches!(g, Until(..)));
        assert!(parse_ltl("G (a").is_err());
    }

    fn parse_expr_ok(s: &str) -> BoolExpr {
        crate::logic::parse_expr(s).unwrap()
    }

    #[test]
    fn property_file() {
        let ps = parse_properties("# c\nsafe[bound=12]: G ok\nlive: F done\n").unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[0].bound, Some(12));
        assert_eq!(ps[1].name, "live");
        assert!(parse_properties("nocolon").is_err());
    }

    #[test]
    fn cosafety_class() {
        assert!(parse_ltl("F a").unwrap().nnf().is_cosafety());
        assert!(!parse_ltl("G a").unwrap().nnf().is_cosafety());
        assert!(Not(b(parse_ltl("G a").unwrap())).nnf().is_cosafety());
    }

    proptest! {
        #[test]
        fn nnf_preserves_meaning(f in arb_ltl(), (w, ls) in arb_word()) {
            prop_assert_eq!(eval_lasso(&f, &w, ls), eval_lasso(&f.nnf(), &w, ls));
        }

        #[test]
        fn automaton_matches_semantics(f in arb_ltl(), (w, ls) in arb_word()) {
            prop_assert_eq!(gba_accepts(&to_gba(&f), &w, ls), eval_lasso(&f, &w, ls));
        }

        #[test]
        fn progression_matches_semantics(f in arb_ltl(), (w, ls) in arb_word()) {
            // Progress through the prefix; the residue must hold from there.
            let n = f.nnf();
            let mut residue = n.clone();
            for st in &w[..ls] {
                residue = residue.progress(&|e| e.eval_with(&|v| st.get(v).cloned()));
            }
            let suffix: Vec<_> = w[ls..].to_vec();
            prop_assert_eq!(eval_lasso(&f, &w, ls), eval_lasso(&residue, &suffix, 0));
        }
    }
}
