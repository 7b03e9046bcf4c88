use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::domain::Alphabet;
use super::expr::{Atom, BoolExpr, CmpOp, Value};
use super::{LogicError, LogicLimits};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn to_expr(&self) -> BoolExpr {
        let a = BoolExpr::Atom(self.atom.clone());
        if self.positive {
            a
        } else {
            a.negate()
        }
    }

    /// Canonical text: negated flags print as `!x`, negated orderings flip
    /// (`!(x >= 3)` is `x < 3`), negated equalities print as `x != v`.
    pub fn canonical(&self) -> String {
        match (&self.atom, self.positive) {
            (a, true) => a.to_string(),
            (Atom::Flag(v), false) => format!("!{v}"),
            (Atom::Cmp { var, op, value }, false) => {
                let flipped = match op {
                    CmpOp::Eq => return format!("{var} != {value}"),
                    CmpOp::Lt => CmpOp::Ge,
                    CmpOp::Le => CmpOp::Gt,
                    CmpOp::Gt => CmpOp::Le,
                    CmpOp::Ge => CmpOp::Lt,
                };
                format!("{var} {} {value}", flipped.symbol())
            }
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// A conjunction of literals. The empty term is `TRUE`.
pub type Term = BTreeSet<Literal>;

pub fn term_to_expr(term: &Term) -> BoolExpr {
    BoolExpr::and_all(term.iter().map(Literal::to_expr))
}

pub fn dnf_to_expr(terms: &[Term]) -> BoolExpr {
    BoolExpr::or_all(terms.iter().map(term_to_expr))
}

/// Negation normal form as a tree whose leaves are literals.
enum Nnf {
    Lit(Literal),
    Const(bool),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
}

fn nnf(e: &BoolExpr, positive: bool) -> Nnf {
    match e {
        BoolExpr::True => Nnf::Const(positive),
        BoolExpr::False => Nnf::Const(!positive),
        BoolExpr::Atom(a) => Nnf::Lit(Literal {
            atom: a.clone(),
            positive,
        }),
        BoolExpr::Not(inner) => nnf(inner, !positive),
        BoolExpr::And(es) if positive => Nnf::And(es.iter().map(|e| nnf(e, true)).collect()),
        BoolExpr::And(es) => Nnf::Or(es.iter().map(|e| nnf(e, false)).collect()),
        BoolExpr::Or(es) if positive => Nnf::Or(es.iter().map(|e| nnf(e, true)).collect()),
        BoolExpr::Or(es) => Nnf::And(es.iter().map(|e| nnf(e, false)).collect()),
    }
}

fn distribute(n: &Nnf, cap: usize) -> Result<Vec<Term>, LogicError> {
    let blowup = |actual| LogicError::BlowupLimit {
        what: "DNF terms",
        limit: cap,
        actual,
    };
    match n {
        Nnf::Const(true) => Ok(vec![Term::new()]),
        Nnf::Const(false) => Ok(vec![]),
        Nnf::Lit(l) => Ok(vec![Term::from([l.clone()])]),
        Nnf::Or(items) => {
            let mut out = Vec::new();
            for item in items {
                out.extend(distribute(item, cap)?);
                if out.len() > cap {
                    return Err(blowup(out.len()));
                }
            }
            Ok(out)
        }
        Nnf::And(items) => {
            let mut acc = vec![Term::new()];
            for item in items {
                let rhs = distribute(item, cap)?;
                if acc.len().saturating_mul(rhs.len()) > cap {
                    return Err(blowup(acc.len().saturating_mul(rhs.len())));
                }
                let mut next = Vec::with_capacity(acc.len() * rhs.len());
                for a in &acc {
                    for b in &rhs {
                        let mut t = a.clone();
                        t.extend(b.iter().cloned());
                        next.push(t);
                    }
                }
                acc = next;
            }
            Ok(acc)
        }
    }
}

/// A conjunction of literals is satisfiable iff each variable independently
/// has a value meeting all of its literals.
pub fn term_satisfiable(term: &Term) -> bool {
    let mut by_var: std::collections::BTreeMap<&str, Vec<&Literal>> = Default::default();
    for lit in term {
        by_var.entry(lit.atom.var()).or_default().push(lit);
    }
    by_var.values().all(|lits| {
        let Ok(al) = Alphabet::from_atoms(lits.iter().map(|l| &l.atom)) else {
            return false;
        };
        let Some(dom) = al.vars.first() else {
            return true;
        };
        dom.values.iter().any(|v| {
            lits.iter()
                .all(|l| super::expr::eval_atom(&l.atom, Some(v)) == l.positive)
        })
    })
}

/// Converts to disjunctive normal form: unsatisfiable terms (including ones
/// naming two values of one enumeration) are dropped, duplicates merged, and
/// terms subsumed by a smaller term removed. The result is sorted.
pub fn to_dnf(e: &BoolExpr, limits: &LogicLimits) -> Result<Vec<Term>, LogicError> {
    let atoms = e.atoms();
    if atoms.len() > limits.max_atoms {
        return Err(LogicError::BlowupLimit {
            what: "distinct atoms",
            limit: limits.max_atoms,
            actual: atoms.len(),
        });
    }
    // Surfaces enumeration/integer/boolean conflicts up front.
    Alphabet::from_atoms(atoms.iter())?;
    let raw = distribute(&nnf(e, true), limits.max_terms)?;
    let mut terms: Vec<Term> = raw
        .into_iter()
        .filter(term_satisfiable)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    terms.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut kept: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        if !kept.iter().any(|k| k.is_subset(&t)) {
            kept.push(t);
        }
    }
    kept.sort();
    Ok(kept)
}

/// Convenience for building literals in tests and fixtures.
pub fn lit(atom: Atom, positive: bool) -> Literal {
    Literal { atom, positive }
}

pub fn eq_atom(var: &str, value: Value) -> Atom {
    Atom::Cmp {
        var: var.to_string(),
        op: CmpOp::Eq,
        value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::syntax::parse_expr;

    fn dnf_str(src: &str) -> Vec<String> {
        to_dnf(&parse_expr(src).unwrap(), &LogicLimits::default())
            .unwrap()
            .iter()
            .map(|t| term_to_expr(t).to_string())
            .collect()
    }

    #[test]
    fn distribution() {
        assert_eq!(dnf_str("(a | b) & c"), ["a & c", "b & c"]);
    }

    #[test]
    fn contradiction_is_empty() {
        assert!(dnf_str("a & !a").is_empty());
        assert!(dnf_str("x = p & x = q").is_empty());
        assert!(dnf_str("n < 2 & n > 3").is_empty());
    }

    #[test]
    fn subsumption_and_duplicates() {
        assert_eq!(dnf_str("a | a & b | a"), ["a"]);
    }

    #[test]
    fn true_is_one_empty_term() {
        let d = to_dnf(&BoolExpr::True, &LogicLimits::default()).unwrap();
        assert_eq!(d, vec![Term::new()]);
    }

    #[test]
    fn term_cap() {
        let e = parse_expr("(a|b)&(c|d)&(e|f)&(g|h)").unwrap();
        let limits = LogicLimits {
            max_terms: 8,
            ..Default::default()
        };
        assert!(matches!(
            to_dnf(&e, &limits),
            Err(LogicError::BlowupLimit { .. })
        ));
    }

    #[test]
    fn canonical_negations() {
        let d = to_dnf(
            &parse_expr("!(n >= 3) & !x & !(c = e)").unwrap(),
            &LogicLimits::default(),
        )
        .unwrap();
        let s: Vec<String> = d[0].iter().map(|l| l.canonical()).collect();
        assert!(s.contains(&"n < 3".to_string()));
        assert!(s.contains(&"!x".to_string()));
        assert!(s.contains(&"c != e".to_string()));
    }
}
