//! Propositional expressions over a variable store and the action statements
//! that update it.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A constant a variable can hold.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Sym(String),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Self {
        Value::Sym(s.into())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(true) => f.write_str("TRUE"),
            Value::Bool(false) => f.write_str("FALSE"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

/// An atomic proposition. Comparisons against `TRUE`/`FALSE` are folded into
/// [`Atom::Flag`] by the smart constructors, so a boolean variable has exactly
/// one atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Atom {
    Flag(String),
    Cmp {
        var: String,
        op: CmpOp,
        value: Value,
    },
}

impl Atom {
    pub fn var(&self) -> &str {
        match self {
            Atom::Flag(v) => v,
            Atom::Cmp { var, .. } => var,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Flag(v) => f.write_str(v),
            Atom::Cmp { var, op, value } => write!(f, "{var} {} {value}", op.symbol()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoolExpr {
    True,
    False,
    Atom(Atom),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn flag(var: impl Into<String>) -> Self {
        BoolExpr::Atom(Atom::Flag(var.into()))
    }

    /// `var op value`, folding boolean constants into flags.
    pub fn cmp(var: impl Into<String>, op: CmpOp, value: Value) -> Self {
        let var = var.into();
        match (op, value) {
            (CmpOp::Eq, Value::Bool(true)) => BoolExpr::flag(var),
            (CmpOp::Eq, Value::Bool(false)) => BoolExpr::flag(var).negate(),
            (op, value) => BoolExpr::Atom(Atom::Cmp { var, op, value }),
        }
    }

    pub fn eq(var: impl Into<String>, value: Value) -> Self {
        Self::cmp(var, CmpOp::Eq, value)
    }

    pub fn negate(self) -> Self {
        match self {
            BoolExpr::True => BoolExpr::False,
            BoolExpr::False => BoolExpr::True,
            BoolExpr::Not(inner) => *inner,
            other => BoolExpr::Not(Box::new(other)),
        }
    }

    /// Conjunction that flattens nested conjunctions and drops `TRUE`.
    pub fn and_all(items: impl IntoIterator<Item = BoolExpr>) -> Self {
        let mut out = Vec::new();
        for item in items {
            match item {
                BoolExpr::True => {}
                BoolExpr::False => return BoolExpr::False,
                BoolExpr::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => BoolExpr::True,
            1 => out.pop().unwrap(),
            _ => BoolExpr::And(out),
        }
    }

    /// Disjunction that flattens nested disjunctions and drops `FALSE`.
    pub fn or_all(items: impl IntoIterator<Item = BoolExpr>) -> Self {
        let mut out = Vec::new();
        for item in items {
            match item {
                BoolExpr::False => {}
                BoolExpr::True => return BoolExpr::True,
                BoolExpr::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => BoolExpr::False,
            1 => out.pop().unwrap(),
            _ => BoolExpr::Or(out),
        }
    }

    pub fn and(self, other: BoolExpr) -> Self {
        Self::and_all([self, other])
    }

    pub fn or(self, other: BoolExpr) -> Self {
        Self::or_all([self, other])
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Atom(a) => {
                out.insert(a.clone());
            }
            BoolExpr::Not(e) => e.collect_atoms(out),
            BoolExpr::And(es) | BoolExpr::Or(es) => es.iter().for_each(|e| e.collect_atoms(out)),
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.atoms()
            .into_iter()
            .map(|a| a.var().to_string())
            .collect()
    }

    /// Evaluates under a total lookup function.
    pub fn eval_with(&self, lookup: &impl Fn(&str) -> Option<Value>) -> bool {
        match self {
            BoolExpr::True => true,
            BoolExpr::False => false,
            BoolExpr::Atom(a) => eval_atom(a, lookup(a.var()).as_ref()),
            BoolExpr::Not(e) => !e.eval_with(lookup),
            BoolExpr::And(es) => es.iter().all(|e| e.eval_with(lookup)),
            BoolExpr::Or(es) => es.iter().any(|e| e.eval_with(lookup)),
        }
    }

    /// Renders in the variable-store dump syntax, e.g.
    /// `assert σ[chan_ue_mme] = auth_reject | assert σ[chan_ue_mme] = tau_reject`.
    pub fn to_sigma_string(&self) -> String {
        let mut s = String::new();
        write_expr(&mut s, self, 0, true);
        s
    }

    /// Renames variables in place.
    pub fn map_vars(&self, f: &impl Fn(&str) -> String) -> BoolExpr {
        match self {
            BoolExpr::True | BoolExpr::False => self.clone(),
            BoolExpr::Atom(Atom::Flag(v)) => BoolExpr::Atom(Atom::Flag(f(v))),
            BoolExpr::Atom(Atom::Cmp { var, op, value }) => BoolExpr::Atom(Atom::Cmp {
                var: f(var),
                op: *op,
                value: value.clone(),
            }),
            BoolExpr::Not(e) => BoolExpr::Not(Box::new(e.map_vars(f))),
            BoolExpr::And(es) => BoolExpr::And(es.iter().map(|e| e.map_vars(f)).collect()),
            BoolExpr::Or(es) => BoolExpr::Or(es.iter().map(|e| e.map_vars(f)).collect()),
        }
    }
}

/// Atom semantics. A missing value makes every atom false; flags read `TRUE`
/// only from `Value::Bool(true)`.
pub fn eval_atom(atom: &Atom, value: Option<&Value>) -> bool {
    match (atom, value) {
        (Atom::Flag(_), Some(Value::Bool(b))) => *b,
        (Atom::Flag(_), _) => false,
        (Atom::Cmp { op, value: rhs, .. }, Some(lhs)) => match (lhs, rhs) {
            (Value::Int(l), Value::Int(r)) => op.holds(*l, *r),
            (l, r) => *op == CmpOp::Eq && l == r,
        },
        (Atom::Cmp { .. }, None) => false,
    }
}

fn precedence(e: &BoolExpr) -> u8 {
    match e {
        BoolExpr::Or(_) => 1,
        BoolExpr::And(_) => 2,
        _ => 3,
    }
}

fn write_expr(out: &mut String, e: &BoolExpr, parent: u8, sigma: bool) {
    let prec = precedence(e);
    let paren = prec < parent;
    if paren {
        out.push('(');
    }
    match e {
        BoolExpr::True => out.push_str("TRUE"),
        BoolExpr::False => out.push_str("FALSE"),
        BoolExpr::Atom(a) => {
            if sigma {
                match a {
                    Atom::Flag(v) => out.push_str(&format!("assert σ[{v}]")),
                    Atom::Cmp { var, op, value } => {
                        out.push_str(&format!("assert σ[{var}] {} {value}", op.symbol()))
                    }
                }
            } else {
                out.push_str(&a.to_string());
            }
        }
        BoolExpr::Not(inner) => {
            out.push('!');
            write_expr(out, inner, 3, sigma);
        }
        BoolExpr::And(es) | BoolExpr::Or(es) => {
            let sep = if matches!(e, BoolExpr::And(_)) {
                " & "
            } else {
                " | "
            };
            for (i, sub) in es.iter().enumerate() {
                if i > 0 {
                    out.push_str(sep);
                }
                // Same-operator children are parenthesised so that the printed
                // form re-parses to the same tree shape.
                write_expr(out, sub, prec + 1, sigma);
            }
        }
    }
    if paren {
        out.push(')');
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self, 0, false);
        f.write_str(&s)
    }
}

/// Right-hand side of an assignment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rhs {
    Const(Value),
    Inc,
    Dec,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub var: String,
    pub rhs: Rhs,
}

impl Assignment {
    pub fn set(var: impl Into<String>, value: Value) -> Self {
        Assignment {
            var: var.into(),
            rhs: Rhs::Const(value),
        }
    }

    fn rhs_string(&self) -> String {
        match &self.rhs {
            Rhs::Const(v) => v.to_string(),
            Rhs::Inc => format!("{} + 1", self.var),
            Rhs::Dec => format!("{} - 1", self.var),
        }
    }

    /// Table form used in reports: `timer_t3522_started = FALSE`.
    pub fn to_table_string(&self) -> String {
        format!("{} = {}", self.var, self.rhs_string())
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} := {}", self.var, self.rhs_string())
    }
}

/// Joins actions in the `x := a; y := b` form.
pub fn actions_to_string(actions: &[Assignment]) -> String {
    actions
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Joins actions in the `x = a, y = b` report form.
pub fn actions_to_table_string(actions: &[Assignment]) -> String {
    actions
        .iter()
        .map(|a| a.to_table_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boolean_comparisons_fold_into_flags() {
        assert_eq!(BoolExpr::eq("x", Value::Bool(true)), BoolExpr::flag("x"));
        assert_eq!(
            BoolExpr::eq("x", Value::Bool(false)),
            BoolExpr::Not(Box::new(BoolExpr::flag("x")))
        );
    }

    #[test]
    fn display_parenthesises_by_precedence() {
        let e = BoolExpr::flag("a")
            .or(BoolExpr::flag("b"))
            .and(BoolExpr::flag("c"));
        assert_eq!(e.to_string(), "(a | b) & c");
        let e = BoolExpr::flag("a").and(BoolExpr::flag("b")).negate();
        assert_eq!(e.to_string(), "!(a & b)");
    }

    #[test]
    fn sigma_form() {
        let e = BoolExpr::eq("chan_ue_mme", Value::sym("auth_reject"))
            .or(BoolExpr::eq("chan_ue_mme", Value::sym("tau_reject")));
        assert_eq!(
            e.to_sigma_string(),
            "assert σ[chan_ue_mme] = auth_reject | assert σ[chan_ue_mme] = tau_reject"
        );
    }

    #[test]
    fn assignment_forms() {
        let a = Assignment::set("UE_service_req_attempt_counter", Value::Int(0));
        assert_eq!(a.to_string(), "UE_service_req_attempt_counter := 0");
        let b = Assignment {
            var: "c".into(),
            rhs: Rhs::Inc,
        };
        assert_eq!(b.to_table_string(), "c = c + 1");
    }
}
