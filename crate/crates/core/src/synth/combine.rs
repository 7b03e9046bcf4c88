use super::{StateRef, Transition, STATE_VAR};
use crate::annotation::{CtlBlock, TagLabel};
use crate::dsl::IrFormula;
use crate::logic::{Assignment, BoolExpr, Rhs, Value};

/// Translation outcome of one block component, aligned with
/// `CtlBlock::components`.
#[derive(Clone, Debug, PartialEq)]
pub enum ComponentIr {
    /// `None` when the span could not be translated.
    Condition {
        expr: Option<BoolExpr>,
        actor: Option<String>,
    },
    Action {
        ir: Option<IrFormula>,
        actor: Option<String>,
    },
    StartState(Vec<String>),
    EndState(Vec<String>),
    /// A nested control block, handled on its own.
    Control,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlockIrs {
    pub components: Vec<ComponentIr>,
    /// Actions found in untagged text, with their actor.
    pub recovered: Vec<(IrFormula, Option<String>)>,
}

/// What a nested block takes over from its enclosing block.
#[derive(Clone, Debug, PartialEq)]
pub struct Inherited {
    pub condition: BoolExpr,
    pub from: Vec<StateRef>,
    pub participant: Option<String>,
}

impl Default for Inherited {
    fn default() -> Self {
        Inherited {
            condition: BoolExpr::True,
            from: vec![],
            participant: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockResult {
    /// `(participant, transition)` pairs.
    pub transitions: Vec<(String, Transition)>,
    pub inherit: Inherited,
}

fn connective_in(tokens: &[String]) -> Option<bool> {
    tokens
        .iter()
        .rev()
        .find_map(|t| match t.to_lowercase().as_str() {
            "and" => Some(true),
            "or" => Some(false),
            _ => None,
        })
}

/// Folds one block into transitions. Conditions are joined left to right by
/// the last `and`/`or` found between consecutive condition components
/// (default `and`); the inherited condition is conjoined first. Action
/// guards from directives are conjoined as well. `state := S` actions are
/// turned into end states.
pub fn combine_block(
    block: &CtlBlock,
    irs: &BlockIrs,
    inherited: &Inherited,
    default_participant: &str,
) -> BlockResult {
    let mut cond: Option<BoolExpr> = None;
    let mut between: Vec<String> = Vec::new();
    let mut starts = Vec::new();
    let mut ends: Vec<String> = Vec::new();
    let mut actions: Vec<Assignment> = Vec::new();
    let mut guards = Vec::new();
    let mut action_actor = None;
    let mut cond_actor = None;

    for (i, (comp, ir)) in block.components.iter().zip(&irs.components).enumerate() {
        between.extend(block.gaps[i].iter().cloned());
        match ir {
            ComponentIr::Condition { expr, actor } => {
                if let Some(e) = expr {
                    cond = Some(match cond.take() {
                        None => e.clone(),
                        Some(prev) if connective_in(&between) == Some(false) => prev.or(e.clone()),
                        Some(prev) => prev.and(e.clone()),
                    });
                    between.clear();
                }
                if cond_actor.is_none() {
                    cond_actor = actor.clone();
                }
            }
            ComponentIr::Action { ir, actor } => {
                if let Some(f) = ir {
                    actions.extend(f.actions.iter().cloned());
                    if f.condition != BoolExpr::True {
                        guards.push(f.condition.clone());
                    }
                }
                if action_actor.is_none() {
                    action_actor = actor.clone();
                }
            }
            ComponentIr::StartState(s) => starts.extend(s.iter().cloned()),
            ComponentIr::EndState(s) => ends.extend(s.iter().cloned()),
            ComponentIr::Control => {}
        }
        // Tokens of non-condition components do not carry connectives.
        if !matches!(comp.label, TagLabel::Condition) {
            between.clear();
        }
    }
    for (ir, actor) in &irs.recovered {
        actions.extend(ir.actions.iter().cloned());
        if ir.condition != BoolExpr::True {
            guards.push(ir.condition.clone());
        }
        if action_actor.is_none() {
            action_actor = actor.clone();
        }
    }

    // End states written as assignments to the state variable.
    actions.retain(|a| {
        if a.var != STATE_VAR {
            return true;
        }
        if let Rhs::Const(Value::Sym(s)) = &a.rhs {
            if !ends.contains(s) {
                ends.push(s.clone());
            }
        }
        false
    });

    let own = cond.unwrap_or(BoolExpr::True);
    let condition = inherited.condition.clone().and(own);
    let from: Vec<StateRef> = if !starts.is_empty() {
        starts.into_iter().map(StateRef::Named).collect()
    } else if !inherited.from.is_empty() {
        inherited.from.clone()
    } else {
        vec![StateRef::Any]
    };
    let participant = action_actor
        .or(cond_actor)
        .or_else(|| inherited.participant.clone())
        .unwrap_or_else(|| default_participant.to_string());

    let mut transitions = Vec::new();
    if !actions.is_empty() || !ends.is_empty() {
        let guarded = BoolExpr::and_all(std::iter::once(condition.clone()).chain(guards));
        let targets: Vec<Option<String>> = if ends.is_empty() {
            vec![None]
        } else {
            ends.iter().cloned().map(Some).collect()
        };
        for f in &from {
            for to in &targets {
                let mut t =
                    Transition::new(f.clone(), to.clone(), guarded.clone(), actions.clone());
                t.provenance = vec![block.id];
                transitions.push((participant.clone(), t));
            }
        }
    }
    BlockResult {
        transitions,
        inherit: Inherited {
            condition,
            from,
            participant: Some(participant),
        },
    }
}
