use super::ast::{Arg, DslAst, SlotValue};
use super::rules::{template_parts, DslRule, Mode, Placeholder, RuleSet};
use super::{DslError, Env, IrFormula};
use crate::depparse::LogicOp;
use crate::lexicon::KwType;
use crate::logic::{parse_actions, parse_expr, Assignment, BoolExpr};

enum Part {
    Cond(BoolExpr),
    Acts(Vec<Assignment>),
}

/// Instantiates command templates bottom-up. Conditions combine with
/// and/or/not; actions only with `and` (sequencing).
pub fn interpret_ast(
    ast: &DslAst,
    mode: Mode,
    rules: &RuleSet,
    env: &Env,
) -> Result<IrFormula, DslError> {
    Ok(match interp(ast, mode, rules, env)? {
        Part::Cond(condition) => IrFormula {
            condition,
            actions: vec![],
            nondet: vec![],
        },
        Part::Acts(actions) => IrFormula {
            condition: BoolExpr::True,
            actions,
            nondet: vec![],
        },
    })
}

fn interp(ast: &DslAst, mode: Mode, rules: &RuleSet, env: &Env) -> Result<Part, DslError> {
    match ast {
        DslAst::Command {
            command,
            args,
            missing,
        } => {
            let rule = rules.get(command).ok_or_else(|| DslError::NoRuleForVerb {
                verb: command.clone(),
            })?;
            expand(rule, args.clone(), mode, env).map_err(|e| match e {
                // A peer slot is unbound only because its counterpart is.
                DslError::MissingRequiredSlot { command, .. } if !missing.is_empty() => {
                    DslError::Unresolvable {
                        command,
                        slot: missing[0].clone(),
                    }
                }
                e => e,
            })
        }
        DslAst::Logic { op, children } => {
            let parts = children
                .iter()
                .map(|c| interp(c, mode, rules, env))
                .collect::<Result<Vec<_>, _>>()?;
            combine(*op, parts, mode, "logic")
        }
    }
}

fn combine(op: LogicOp, parts: Vec<Part>, mode: Mode, command: &str) -> Result<Part, DslError> {
    match mode {
        Mode::Condition => {
            let exprs = parts.into_iter().map(|p| match p {
                Part::Cond(e) => e,
                Part::Acts(_) => unreachable!("condition mode yields conditions"),
            });
            Ok(Part::Cond(match op {
                LogicOp::And => BoolExpr::and_all(exprs),
                LogicOp::Or => BoolExpr::or_all(exprs),
                LogicOp::Not => BoolExpr::and_all(exprs).negate(),
            }))
        }
        Mode::Action if op == LogicOp::And => Ok(Part::Acts(
            parts
                .into_iter()
                .flat_map(|p| match p {
                    Part::Acts(a) => a,
                    Part::Cond(_) => unreachable!("action mode yields actions"),
                })
                .collect(),
        )),
        Mode::Action => Err(DslError::ModeUnsupported {
            command: format!("{command} ({})", op.word()),
            mode,
        }),
    }
}

/// A slot holding a logical group instantiates the command once per member.
fn expand(rule: &DslRule, args: Vec<Arg>, mode: Mode, env: &Env) -> Result<Part, DslError> {
    let grouped = args
        .iter()
        .position(|a| matches!(a.value, SlotValue::Logic { .. }));
    let Some(i) = grouped else {
        return instantiate(rule, &args, mode, env);
    };
    let SlotValue::Logic { op, items } = args[i].value.clone() else {
        unreachable!()
    };
    let parts = items
        .into_iter()
        .map(|item| {
            let mut a = args.clone();
            a[i].value = item;
            expand(rule, a, mode, env)
        })
        .collect::<Result<Vec<_>, _>>()?;
    combine(op, parts, mode, &rule.command)
}

fn render(v: &SlotValue, env: &Env) -> Option<String> {
    match v {
        SlotValue::Key { id, kind } if *kind == KwType::Agent => Some(env.participant(id)),
        SlotValue::Key { id, .. } => Some(id.clone()),
        SlotValue::Value(n) => Some(n.to_string()),
        SlotValue::Logic { .. } => None,
    }
}

fn instantiate(rule: &DslRule, args: &[Arg], mode: Mode, env: &Env) -> Result<Part, DslError> {
    let templates = rule.templates(mode);
    if templates.is_empty() {
        return Err(DslError::ModeUnsupported {
            command: rule.command.clone(),
            mode,
        });
    }
    let lookup = |name: &str| {
        args.iter()
            .find(|a| a.slot == name)
            .and_then(|a| render(&a.value, env))
    };
    let mut first_unbound = None;
    'templates: for t in templates {
        let parts = template_parts(t).map_err(|msg| DslError::Template {
            command: rule.command.clone(),
            msg,
        })?;
        let mut out = String::new();
        for p in parts {
            match p {
                Ok(lit) => out.push_str(&lit),
                Err(ph) => {
                    let unbound = ph.slots().into_iter().find(|s| lookup(s).is_none());
                    if let Some(s) = unbound {
                        first_unbound.get_or_insert_with(|| s.to_string());
                        continue 'templates;
                    }
                    match ph {
                        Placeholder::Slot { name, upper } => {
                            let v = lookup(&name).unwrap();
                            out.push_str(&if upper { v.to_uppercase() } else { v });
                        }
                        Placeholder::Chan { src, dst } => {
                            out.push_str(
                                &env.channel(&lookup(&src).unwrap(), &lookup(&dst).unwrap()),
                            );
                        }
                    }
                }
            }
        }
        let parsed = match mode {
            Mode::Condition => parse_expr(&out).map(Part::Cond),
            Mode::Action => parse_actions(&out).map(Part::Acts),
        };
        return parsed.map_err(|e| DslError::Template {
            command: rule.command.clone(),
            msg: format!("`{out}`: {e}"),
        });
    }
    Err(DslError::MissingRequiredSlot {
        command: rule.command.clone(),
        slot: first_unbound.unwrap_or_default(),
    })
}

/// Weak modals (may, should, can) in an action span guard the formula with
/// a fresh nondeterministic flag each. `counter` numbers flags per block.
pub fn apply_directives(
    tokens: &[String],
    mut ir: IrFormula,
    block: usize,
    counter: &mut usize,
) -> IrFormula {
    for t in tokens {
        if matches!(t.to_lowercase().as_str(), "may" | "should" | "can") {
            *counter += 1;
            let name = format!("nd_b{block}_{counter}");
            ir.condition =
                std::mem::replace(&mut ir.condition, BoolExpr::True).and(BoolExpr::flag(&name));
            ir.nondet.push(name);
        }
    }
    ir
}
