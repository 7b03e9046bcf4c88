//! Propositional logic over IR conditions: normal forms and exact decision
//! procedures under finite-domain semantics.
//!
//! Every variable holds exactly one value at a time, so `x = A & x = B` is
//! unsatisfiable for distinct symbols `A` and `B`.

pub mod dnf;
pub mod domain;
pub mod expr;
pub mod syntax;

use thiserror::Error;

use crate::par::{self, Exec};

pub use dnf::{to_dnf, Literal, Term};
pub use domain::Alphabet;
pub use expr::{Assignment, Atom, BoolExpr, CmpOp, Rhs, Value};
pub use syntax::{parse_actions, parse_expr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("{what} exceed limit {limit} (got {actual})")]
    BlowupLimit {
        what: &'static str,
        limit: usize,
        actual: usize,
    },
    #[error("variable `{var}` is used both as a boolean, enumeration or integer")]
    TypeConflict { var: String },
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Size limits for normalisation and enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogicLimits {
    pub max_atoms: usize,
    pub max_terms: usize,
}

impl Default for LogicLimits {
    fn default() -> Self {
        LogicLimits {
            max_atoms: 24,
            max_terms: 4096,
        }
    }
}

/// Decision procedures bound to a set of limits and an execution mode.
#[derive(Clone, Copy, Debug, Default)]
pub struct Logic {
    pub limits: LogicLimits,
    pub exec: Exec,
}

impl Logic {
    pub fn new(limits: LogicLimits) -> Self {
        Logic {
            limits,
            exec: Exec::default(),
        }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// Smallest-numbered assignment on which `pred` holds over the compiled
    /// expressions, by exhaustive enumeration.
    fn search(
        &self,
        exprs: &[&BoolExpr],
        pred: impl Fn(&[bool]) -> bool + Sync + Send,
    ) -> Result<Option<Vec<(String, Value)>>, LogicError> {
        let alphabet = Alphabet::of(exprs, &self.limits)?;
        let compiled: Vec<_> = exprs.iter().map(|e| alphabet.compile(e)).collect();
        let total = alphabet.size().ok_or(LogicError::BlowupLimit {
            what: "assignments",
            limit: u64::MAX as usize,
            actual: usize::MAX,
        })?;
        let hit = par::find_first(self.exec, total, |n| {
            let mut idx = Vec::with_capacity(alphabet.vars.len());
            alphabet.decode(n, &mut idx);
            let vals: Vec<bool> = compiled.iter().map(|c| c.eval(&idx)).collect();
            pred(&vals)
        });
        Ok(hit.map(|n| alphabet.assignment(n)))
    }

    pub fn satisfiable(&self, c: &BoolExpr) -> Result<bool, LogicError> {
        Ok(self.witness(c)?.is_some())
    }

    /// A satisfying assignment over the variables of `c`, if one exists.
    pub fn witness(&self, c: &BoolExpr) -> Result<Option<Vec<(String, Value)>>, LogicError> {
        self.search(&[c], |v| v[0])
    }

    pub fn equivalent(&self, a: &BoolExpr, b: &BoolExpr) -> Result<bool, LogicError> {
        Ok(self.search(&[a, b], |v| v[0] != v[1])?.is_none())
    }

    pub fn implies(&self, a: &BoolExpr, b: &BoolExpr) -> Result<bool, LogicError> {
        Ok(self.search(&[a, b], |v| v[0] && !v[1])?.is_none())
    }

    pub fn to_dnf(&self, e: &BoolExpr) -> Result<Vec<Term>, LogicError> {
        dnf::to_dnf(e, &self.limits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> BoolExpr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn implication_example() {
        let l = Logic::default();
        assert!(l.implies(&p("x & y"), &p("x")).unwrap());
        assert!(!l.implies(&p("x"), &p("x & y")).unwrap());
    }

    #[test]
    fn commutativity() {
        assert!(Logic::default()
            .equivalent(&p("a | b"), &p("b | a"))
            .unwrap());
    }

    #[test]
    fn enumeration_exclusivity() {
        let l = Logic::default();
        assert!(!l.satisfiable(&p("x = A & x = B")).unwrap());
        assert!(l.satisfiable(&p("x = A & !(x = B)")).unwrap());
        assert!(l.satisfiable(&p("!(x = A) & !(x = B)")).unwrap());
    }

    #[test]
    fn integer_regions() {
        let l = Logic::default();
        assert!(l.equivalent(&p("n < 3"), &p("n <= 2")).unwrap());
        assert!(!l.satisfiable(&p("n > 2 & n < 3")).unwrap());
        assert!(l.implies(&p("n = 1"), &p("n < 3")).unwrap());
    }

    #[test]
    fn witness_reports_assignment() {
        let w = Logic::default().witness(&p("a & !b")).unwrap().unwrap();
        assert_eq!(
            w,
            vec![
                ("a".to_string(), Value::Bool(true)),
                ("b".to_string(), Value::Bool(false))
            ]
        );
    }
}
