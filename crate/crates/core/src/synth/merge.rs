use super::{Diagnostic, Fsm, Transition};
use crate::logic::{Assignment, BoolExpr, Logic};

#[derive(Clone, Debug, PartialEq)]
pub struct MergeReport {
    pub fsm: Fsm,
    pub diagnostics: Vec<Diagnostic>,
}

fn extend_actions(into: &mut Vec<Assignment>, from: &[Assignment]) {
    for a in from {
        if !into.contains(a) {
            into.push(a.clone());
        }
    }
}

fn conflicting(a: &Transition, b: &Transition) -> bool {
    let targets = matches!((&a.to, &b.to), (Some(x), Some(y)) if x != y);
    let writes = a
        .actions
        .iter()
        .any(|x| b.actions.iter().any(|y| x.var == y.var && x.rhs != y.rhs));
    targets || writes
}

/// Re-indexes remembered pairs after transition `j` is removed.
fn forget(pairs: &mut Vec<(usize, usize)>, j: usize) {
    let shift = |k: usize| if k > j { k - 1 } else { k };
    pairs.retain(|&(a, b)| a != j && b != j);
    for p in pairs.iter_mut() {
        *p = (shift(p.0), shift(p.1));
    }
}

enum Step {
    Equivalent(usize, usize),
    Implies(usize, usize),
}

/// Merges transitions that fire together. Equivalent conditions collapse
/// into one transition; when `C1` strictly implies `C2`, the first gains the
/// second's actions and `C2` becomes `C2 & !C1`. Repeats to a fixed point.
/// Pairs with contradicting targets or writes are left apart.
pub fn merge_split_transitions(fsm: &Fsm, logic: &Logic) -> MergeReport {
    let mut diagnostics = Vec::new();
    // A condition that can never hold would imply every other one.
    let ts: Vec<Transition> = fsm
        .transitions
        .iter()
        .filter(|t| {
            let sat = logic.satisfiable(&t.condition).unwrap_or(true);
            if !sat {
                diagnostics.push(Diagnostic::new(None, "unsatisfiable", t.label()));
            }
            sat
        })
        .cloned()
        .collect();
    let mut ts = ts;
    let mut skipped: Vec<(usize, usize)> = Vec::new();
    'outer: loop {
        let mut step = None;
        'search: for i in 0..ts.len() {
            for j in 0..ts.len() {
                if i == j || ts[i].from != ts[j].from || skipped.contains(&(i.min(j), i.max(j))) {
                    continue;
                }
                let res = logic
                    .implies(&ts[i].condition, &ts[j].condition)
                    .and_then(|ij| {
                        Ok((ij, ij && logic.implies(&ts[j].condition, &ts[i].condition)?))
                    });
                match res {
                    Ok((_, true)) if i < j => {
                        step = Some(Step::Equivalent(i, j));
                        break 'search;
                    }
                    Ok((true, false)) => {
                        step = Some(Step::Implies(i, j));
                        break 'search;
                    }
                    Ok(_) => {}
                    Err(e) => {
                        diagnostics.push(Diagnostic::new(
                            None,
                            "merge_skipped",
                            format!("{} vs {}: {e}", ts[i].label(), ts[j].label()),
                        ));
                        skipped.push((i.min(j), i.max(j)));
                    }
                }
            }
        }
        let Some(step) = step else { break 'outer };
        let (i, j) = match step {
            Step::Equivalent(i, j) | Step::Implies(i, j) => (i, j),
        };
        if conflicting(&ts[i], &ts[j]) {
            diagnostics.push(Diagnostic::new(
                None,
                "merge_conflict",
                format!("{} vs {}", ts[i].label(), ts[j].label()),
            ));
            skipped.push((i.min(j), i.max(j)));
            continue;
        }
        let tj = ts[j].clone();
        let ti = &mut ts[i];
        extend_actions(&mut ti.actions, &tj.actions);
        if ti.to.is_none() {
            ti.to = tj.to.clone();
        }
        for p in &tj.provenance {
            if !ti.provenance.contains(p) {
                ti.provenance.push(*p);
            }
        }
        match step {
            Step::Equivalent(..) => {
                ts.remove(j);
                forget(&mut skipped, j);
            }
            Step::Implies(..) => {
                let ci = ts[i].condition.clone();
                let rewritten =
                    BoolExpr::And(vec![tj.condition.clone(), BoolExpr::Not(Box::new(ci))]);
                match logic.satisfiable(&rewritten) {
                    Ok(false) => {
                        ts.remove(j);
                        forget(&mut skipped, j);
                    }
                    _ => ts[j].condition = rewritten,
                }
            }
        }
    }
    MergeReport {
        fsm: Fsm {
            transitions: ts,
            ..fsm.clone()
        },
        diagnostics,
    }
}
