//! Random typed expressions and a brute-force truth-table oracle that
//! shares no code with the library's decision procedures.

use std::collections::BTreeMap;

use protofsm_core::logic::{dnf::dnf_to_expr, Atom, BoolExpr, CmpOp, Logic, Value};
use rand::Rng;

const FLAGS: [&str; 3] = ["f0", "f1", "f2"];
const ENUMS: [&str; 2] = ["e0", "e1"];
const SYMS: [&str; 2] = ["a", "b"];
const INTS: [&str; 2] = ["n0", "n1"];
const OPS: [CmpOp; 5] = [CmpOp::Eq, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

fn random_atom(rng: &mut impl Rng) -> BoolExpr {
    match rng.gen_range(0..3) {
        0 => BoolExpr::Atom(Atom::Flag(FLAGS[rng.gen_range(0..FLAGS.len())].into())),
        1 => BoolExpr::Atom(Atom::Cmp {
            var: ENUMS[rng.gen_range(0..ENUMS.len())].into(),
            op: CmpOp::Eq,
            value: Value::sym(SYMS[rng.gen_range(0..SYMS.len())]),
        }),
        _ => BoolExpr::Atom(Atom::Cmp {
            var: INTS[rng.gen_range(0..INTS.len())].into(),
            op: OPS[rng.gen_range(0..OPS.len())],
            value: Value::Int(rng.gen_range(0..=2)),
        }),
    }
}

/// An expression with exactly `atoms` atom occurrences (at least one).
pub fn random_expr(rng: &mut impl Rng, atoms: usize) -> BoolExpr {
    let e = if atoms <= 1 {
        match rng.gen_range(0..20) {
            0 => BoolExpr::True,
            1 => BoolExpr::False,
            _ => random_atom(rng),
        }
    } else {
        let k = rng.gen_range(2..=atoms.min(3));
        let mut sizes = vec![1; k];
        for _ in k..atoms {
            let i = rng.gen_range(0..k);
            sizes[i] += 1;
        }
        let kids: Vec<BoolExpr> = sizes.into_iter().map(|n| random_expr(rng, n)).collect();
        if rng.gen_bool(0.5) {
            BoolExpr::And(kids)
        } else {
            BoolExpr::Or(kids)
        }
    };
    if rng.gen_bool(0.25) {
        BoolExpr::Not(Box::new(e))
    } else {
        e
    }
}

fn holds(op: CmpOp, l: i64, r: i64) -> bool {
    match op {
        CmpOp::Eq => l == r,
        CmpOp::Lt => l < r,
        CmpOp::Le => l <= r,
        CmpOp::Gt => l > r,
        CmpOp::Ge => l >= r,
    }
}

pub fn oracle_eval(e: &BoolExpr, env: &BTreeMap<&str, Value>) -> bool {
    match e {
        BoolExpr::True => true,
        BoolExpr::False => false,
        BoolExpr::Not(x) => !oracle_eval(x, env),
        BoolExpr::And(xs) => xs.iter().all(|x| oracle_eval(x, env)),
        BoolExpr::Or(xs) => xs.iter().any(|x| oracle_eval(x, env)),
        BoolExpr::Atom(Atom::Flag(v)) => env[v.as_str()] == Value::Bool(true),
        BoolExpr::Atom(Atom::Cmp { var, op, value }) => match (&env[var.as_str()], value) {
            (Value::Int(l), Value::Int(r)) => holds(*op, *l, *r),
            (l, r) => *op == CmpOp::Eq && l == r,
        },
    }
}

/// Every store over the pool: flags both ways, enums over the mentioned
/// symbols plus one unmentioned, ints one past each end of the constants.
pub fn all_stores() -> Vec<BTreeMap<&'static str, Value>> {
    let mut domains: Vec<(&str, Vec<Value>)> = Vec::new();
    for f in FLAGS {
        domains.push((f, vec![Value::Bool(false), Value::Bool(true)]));
    }
    for e in ENUMS {
        let mut vs: Vec<Value> = SYMS.iter().map(|s| Value::sym(*s)).collect();
        vs.push(Value::sym("other"));
        domains.push((e, vs));
    }
    for n in INTS {
        domains.push((n, (-1..=3).map(Value::Int).collect()));
    }
    let mut out = vec![BTreeMap::new()];
    for (v, vals) in domains {
        out = out
            .into_iter()
            .flat_map(|m| {
                vals.iter().map(move |x| {
                    let mut m = m.clone();
                    m.insert(v, x.clone());
                    m
                })
            })
            .collect();
    }
    out
}

/// Checks `to_dnf`, `satisfiable`, `equivalent` and `implies` on one pair.
pub fn check_pair(
    logic: &Logic,
    stores: &[BTreeMap<&'static str, Value>],
    a: &BoolExpr,
    b: &BoolExpr,
) -> Result<(), String> {
    let va: Vec<bool> = stores.iter().map(|s| oracle_eval(a, s)).collect();
    let vb: Vec<bool> = stores.iter().map(|s| oracle_eval(b, s)).collect();
    let dnf = dnf_to_expr(&logic.to_dnf(a).map_err(|e| e.to_string())?);
    if let Some(i) = (0..stores.len()).find(|&i| oracle_eval(&dnf, &stores[i]) != va[i]) {
        return Err(format!("to_dnf({a}) = {dnf} differs at {:?}", stores[i]));
    }
    let sat = va.iter().any(|x| *x);
    if logic.satisfiable(a).map_err(|e| e.to_string())? != sat {
        return Err(format!("satisfiable({a}) should be {sat}"));
    }
    let eq = va == vb;
    if logic.equivalent(a, b).map_err(|e| e.to_string())? != eq {
        return Err(format!("equivalent({a}, {b}) should be {eq}"));
    }
    let imp = va.iter().zip(&vb).all(|(x, y)| !x || *y);
    if logic.implies(a, b).map_err(|e| e.to_string())? != imp {
        return Err(format!("implies({a}, {b}) should be {imp}"));
    }
    Ok(())
}
