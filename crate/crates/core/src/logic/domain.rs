//! Finite candidate domains for the variables of a set of expressions, and
//! exhaustive enumeration of their joint assignments.
//!
//! Each variable contributes one multi-valued coordinate: a boolean has two
//! values, an enumeration has every symbol it is compared against plus one
//! stand-in for "any other symbol", and an integer has the representatives
//! `c - 1, c, c + 1` of every constant it is compared against. Those
//! representatives cover every region the comparisons can distinguish, so
//! enumeration over them is exact.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::expr::{Atom, BoolExpr, Value};
use super::{LogicError, LogicLimits};

/// Stand-in for an enumeration value not mentioned by any atom.
pub const OTHER_SYMBOL: &str = "__other__";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Bool,
    Enum,
    Int,
}

#[derive(Clone, Debug)]
pub struct VarDomain {
    pub name: String,
    pub values: Vec<Value>,
}

/// The enumeration alphabet for a set of expressions.
#[derive(Clone, Debug, Default)]
pub struct Alphabet {
    pub vars: Vec<VarDomain>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub fn of(exprs: &[&BoolExpr], limits: &LogicLimits) -> Result<Self, LogicError> {
        let mut atoms = BTreeSet::new();
        for e in exprs {
            atoms.extend(e.atoms());
        }
        if atoms.len() > limits.max_atoms {
            return Err(LogicError::BlowupLimit {
                what: "distinct atoms",
                limit: limits.max_atoms,
                actual: atoms.len(),
            });
        }
        Self::from_atoms(atoms.iter())
    }

    pub fn from_atoms<'a>(atoms: impl Iterator<Item = &'a Atom>) -> Result<Self, LogicError> {
        let mut kinds: BTreeMap<String, Kind> = BTreeMap::new();
        let mut syms: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut ints: BTreeMap<String, BTreeSet<i64>> = BTreeMap::new();
        for atom in atoms {
            let (var, kind) = match atom {
                Atom::Flag(v) => (v, Kind::Bool),
                Atom::Cmp { var, value, .. } => match value {
                    Value::Sym(s) => {
                        syms.entry(var.clone()).or_default().insert(s.clone());
                        (var, Kind::Enum)
                    }
                    Value::Int(i) => {
                        ints.entry(var.clone()).or_default().insert(*i);
                        (var, Kind::Int)
                    }
                    Value::Bool(_) => (var, Kind::Bool),
                },
            };
            match kinds.get(var) {
                Some(k) if *k != kind => {
                    return Err(LogicError::TypeConflict { var: var.clone() });
                }
                _ => {
                    kinds.insert(var.clone(), kind);
                }
            }
        }
        let mut vars = Vec::with_capacity(kinds.len());
        for (name, kind) in kinds {
            let values = match kind {
                Kind::Bool => vec![Value::Bool(false), Value::Bool(true)],
                Kind::Enum => {
                    let mut v: Vec<Value> = syms[&name].iter().cloned().map(Value::Sym).collect();
                    v.push(Value::sym(OTHER_SYMBOL));
                    v
                }
                Kind::Int => {
                    let mut reps = BTreeSet::new();
                    for &c in &ints[&name] {
                        reps.insert(c.saturating_sub(1));
                        reps.insert(c);
                        reps.insert(c.saturating_add(1));
                    }
                    reps.into_iter().map(Value::Int).collect()
                }
            };
            vars.push(VarDomain { name, values });
        }
        let index = vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
        Ok(Alphabet { vars, index })
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Number of joint assignments, or `None` on overflow.
    pub fn size(&self) -> Option<u64> {
        self.vars
            .iter()
            .try_fold(1u64, |acc, v| acc.checked_mul(v.values.len() as u64))
    }

    /// Decodes assignment number `n` (mixed radix, first variable fastest).
    pub fn decode(&self, mut n: u64, out: &mut Vec<usize>) {
        out.clear();
        for v in &self.vars {
            let k = v.values.len() as u64;
            out.push((n % k) as usize);
            n /= k;
        }
    }

    pub fn assignment(&self, n: u64) -> Vec<(String, Value)> {
        let mut idx = Vec::new();
        self.decode(n, &mut idx);
        self.vars
            .iter()
            .zip(idx)
            .map(|(v, i)| (v.name.clone(), v.values[i].clone()))
            .collect()
    }

    /// Compiles an expression against this alphabet for fast evaluation.
    pub fn compile(&self, e: &BoolExpr) -> Compiled {
        match e {
            BoolExpr::True => Compiled::Const(true),
            BoolExpr::False => Compiled::Const(false),
            BoolExpr::Atom(a) => {
                let var = self
                    .var_index(a.var())
                    .expect("atom variable missing from alphabet");
                let table = self.vars[var]
                    .values
                    .iter()
                    .map(|v| super::expr::eval_atom(a, Some(v)))
                    .collect();
                Compiled::Atom { var, table }
            }
            BoolExpr::Not(inner) => Compiled::Not(Box::new(self.compile(inner))),
            BoolExpr::And(es) => Compiled::And(es.iter().map(|e| self.compile(e)).collect()),
            BoolExpr::Or(es) => Compiled::Or(es.iter().map(|e| self.compile(e)).collect()),
        }
    }
}

/// An expression with atoms replaced by per-value truth tables.
#[derive(Clone, Debug)]
pub enum Compiled {
    Const(bool),
    Atom { var: usize, table: Vec<bool> },
    Not(Box<Compiled>),
    And(Vec<Compiled>),
    Or(Vec<Compiled>),
}

impl Compiled {
    pub fn eval(&self, assignment: &[usize]) -> bool {
        match self {
            Compiled::Const(b) => *b,
            Compiled::Atom { var, table } => table[assignment[*var]],
            Compiled::Not(e) => !e.eval(assignment),
            Compiled::And(es) => es.iter().all(|e| e.eval(assignment)),
            Compiled::Or(es) => es.iter().any(|e| e.eval(assignment)),
        }
    }
}
