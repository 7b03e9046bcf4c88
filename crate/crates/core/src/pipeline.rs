//! Annotated document in, compiled model out: context gathering, span
//! translation, recovery of untagged actions, block combination,
//! filtering, compilation and merging.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{
    extract_all_blocks, tokenize, AnnotationTree, CtlBlock, Paragraph, TagLabel,
};
use crate::dsl::{
    apply_directives, Context, DslAst, DslError, Env, IrFormula, Mode, RuleSet, Translator,
};
use crate::lexicon::{canonical_id, is_punct, link_keywords, KwType, Lexicon, Linked};
use crate::logic::expr::actions_to_table_string;
use crate::logic::{BoolExpr, Logic, LogicLimits};
use crate::par::{self, Exec};
use crate::synth::{
    combine_block, compile_model, merge_split_transitions, BlockIrs, CompileConfig, ComponentIr,
    Diagnostic, Inherited, Model, SynthError, Transition,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractOptions {
    pub env: Env,
    /// Normalised edit distance accepted when linking keywords.
    pub threshold: f64,
    /// Number of preceding paragraphs searched for missing arguments.
    pub context_depth: usize,
    /// Owner of transitions whose spans name no agent.
    pub default_participant: String,
    pub initial: BTreeMap<String, String>,
    /// Translate verb phrases found outside action tags.
    pub recover: bool,
    pub merge: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            env: Env::default(),
            threshold: 0.2,
            context_depth: 5,
            default_participant: "ue".into(),
            initial: BTreeMap::new(),
            recover: true,
            merge: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("the corpus contains no control blocks")]
    NoBlocks,
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// One translated (or rejected) span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub block: usize,
    pub label: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ast: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ir: Option<String>,
    /// Condition in variable-store form (`assert σ[x] = v`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Found in untagged text rather than inside a tag.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recovered: bool,
}

/// Transitions produced by one block, in report form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub id: usize,
    pub paragraph: usize,
    pub text: String,
    pub transitions: Vec<TransitionRow>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub participant: String,
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    pub condition: String,
    pub actions: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub model: Model,
    pub blocks: Vec<BlockReport>,
    pub spans: Vec<SpanRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Extraction {
    pub fn skipped(&self) -> impl Iterator<Item = &SpanRecord> {
        self.spans.iter().filter(|s| s.error.is_some())
    }
}

/// Keyword occurrences of a paragraph with the byte offset of their first
/// token.
fn paragraph_keys(p: &Paragraph, lex: &Lexicon, threshold: f64) -> Vec<(usize, String, KwType)> {
    let mut leaves = Vec::new();
    for n in &p.nodes {
        collect_leaves(n, &mut leaves);
    }
    let toks: Vec<String> = leaves.iter().map(|(t, _)| t.clone()).collect();
    link_keywords(&toks, lex, threshold)
        .items
        .into_iter()
        .filter_map(|i| match i {
            Linked::Key {
                id, kind, start, ..
            } => Some((leaves[start].1, id, kind)),
            Linked::Raw { .. } => None,
        })
        .collect()
}

fn collect_leaves(t: &AnnotationTree, out: &mut Vec<(String, usize)>) {
    match &t.text {
        Some(s) => out.push((s.clone(), t.span.start)),
        None => t.children.iter().for_each(|c| collect_leaves(c, out)),
    }
}

fn tokens_of(t: &AnnotationTree) -> Vec<String> {
    t.tokens().into_iter().map(String::from).collect()
}

/// Drops connectives and punctuation left at the front of a span by the
/// tagging ("and start timer T3410").
fn trim_leading(toks: &[String]) -> &[String] {
    let n = toks
        .iter()
        .take_while(|t| is_punct(t) || matches!(t.to_lowercase().as_str(), "and" | "or" | "then"))
        .count();
    &toks[n..]
}

fn keys_only(ks: &[(usize, String, KwType)]) -> Vec<(String, KwType)> {
    ks.iter().map(|(_, id, k)| (id.clone(), *k)).collect()
}

fn nearest_first(ks: &[(usize, String, KwType)], pos: usize) -> Vec<(String, KwType)> {
    let mut v: Vec<&(usize, String, KwType)> = ks.iter().collect();
    v.sort_by_key(|(p, _, _)| p.abs_diff(pos));
    v.into_iter().map(|(_, id, k)| (id.clone(), *k)).collect()
}

/// The participant performing a command, when it names one.
fn actor(ast: &DslAst, rules: &RuleSet, env: &Env) -> Option<String> {
    match ast {
        DslAst::Command { command, .. } => {
            let slot = rules.get(command)?.actor_slot()?;
            match &ast.arg(slot)?.value {
                crate::dsl::SlotValue::Key { id, .. } => {
                    let p = env.participant(id);
                    env.participants.contains(&p).then_some(p)
                }
                _ => None,
            }
        }
        DslAst::Logic { children, .. } => children.iter().find_map(|c| actor(c, rules, env)),
    }
}

const CONNECTIVES: &[&str] = &["and", "or", "then", "also", "shall", "will", "must"];
const MARKERS: &[&str] = &[
    "if", "when", "whenever", "upon", "on", "after", "before", "once", "unless", "while",
];

/// Candidate verb phrases in untagged text: runs between punctuation, with
/// leading connectives stripped and clause-introducing runs skipped.
fn recovery_runs(gap: &[String]) -> Vec<Vec<String>> {
    let mut runs = Vec::new();
    let mut cur: Vec<String> = Vec::new();
    for t in gap.iter().chain(std::iter::once(&".".to_string())) {
        if is_punct(t) {
            let start = cur
                .iter()
                .position(|w| !CONNECTIVES.contains(&w.to_lowercase().as_str()))
                .unwrap_or(cur.len());
            let run: Vec<String> = cur[start..].to_vec();
            let skip = run
                .first()
                .is_none_or(|w| MARKERS.contains(&w.to_lowercase().as_str()));
            if !skip {
                runs.push(run);
            }
            cur.clear();
        } else {
            cur.push(t.clone());
        }
    }
    runs
}

struct Translated {
    irs: BlockIrs,
    spans: Vec<SpanRecord>,
    nondet: Vec<String>,
}

fn state_ids(tokens: &[String], lex: &Lexicon, threshold: f64) -> Vec<String> {
    let linked = link_keywords(tokens, lex, threshold);
    let ids: Vec<String> = linked
        .keys()
        .filter(|(_, k)| matches!(k, KwType::State | KwType::Mode))
        .map(|(id, _)| id.to_string())
        .collect();
    if !ids.is_empty() {
        return ids;
    }
    let words: Vec<&str> = tokens
        .iter()
        .map(String::as_str)
        .filter(|t| !is_punct(t))
        .collect();
    let id = canonical_id(&words);
    if id.is_empty() {
        vec![]
    } else {
        vec![id]
    }
}

fn translate_block(
    block: &CtlBlock,
    ctx: &Context,
    tr: &Translator,
    opts: &ExtractOptions,
) -> Translated {
    let mut spans = Vec::new();
    let mut comps = Vec::new();
    let mut nondet = Vec::new();
    let mut counter = 0;
    let mut record =
        |label: &str, toks: &[String], res: &Result<(String, IrFormula), DslError>, recovered| {
            let (ast, ir, sigma, error) = match res {
                Ok((ast, ir)) => {
                    let irs = if ir.actions.is_empty() {
                        ir.condition.to_string()
                    } else if ir.condition == BoolExpr::True {
                        actions_to_table_string(&ir.actions)
                    } else {
                        format!(
                            "{} / {}",
                            ir.condition,
                            actions_to_table_string(&ir.actions)
                        )
                    };
                    let sigma = (label == "condition").then(|| ir.condition.to_sigma_string());
                    (Some(ast.clone()), Some(irs), sigma, None)
                }
                Err(e) => (None, None, None, Some(e.to_string())),
            };
            spans.push(SpanRecord {
                block: block.id,
                label: label.to_string(),
                text: toks.join(" "),
                ast,
                ir,
                sigma,
                error,
                recovered,
            });
        };
    for c in &block.components {
        let toks = tokens_of(&c.tree);
        let ir = match c.label {
            TagLabel::Condition => {
                let r = tr.translate(trim_leading(&toks), Mode::Condition, ctx);
                let out = r
                    .as_ref()
                    .map(|t| (t.ast.to_string(), t.ir.clone()))
                    .map_err(Clone::clone);
                record("condition", &toks, &out, false);
                match r {
                    Ok(t) => ComponentIr::Condition {
                        expr: Some(t.ir.condition),
                        actor: actor(&t.ast, tr.rules, tr.env),
                    },
                    Err(_) => ComponentIr::Condition {
                        expr: None,
                        actor: None,
                    },
                }
            }
            TagLabel::Action => {
                let r = tr
                    .translate(trim_leading(&toks), Mode::Action, ctx)
                    .map(|t| {
                        let ir = apply_directives(&toks, t.ir.clone(), block.id, &mut counter);
                        (t, ir)
                    });
                let out = r
                    .as_ref()
                    .map(|(t, ir)| (t.ast.to_string(), ir.clone()))
                    .map_err(Clone::clone);
                record("action", &toks, &out, false);
                match r {
                    Ok((t, ir)) => {
                        nondet.extend(ir.nondet.iter().cloned());
                        ComponentIr::Action {
                            ir: Some(ir),
                            actor: actor(&t.ast, tr.rules, tr.env),
                        }
                    }
                    Err(_) => ComponentIr::Action {
                        ir: None,
                        actor: None,
                    },
                }
            }
            TagLabel::StartState => {
                ComponentIr::StartState(state_ids(&toks, tr.lexicon, tr.threshold))
            }
            TagLabel::EndState => ComponentIr::EndState(state_ids(&toks, tr.lexicon, tr.threshold)),
            TagLabel::Control | TagLabel::Token => ComponentIr::Control,
        };
        comps.push(ir);
    }
    let mut recovered = Vec::new();
    if opts.recover {
        for gap in &block.gaps {
            for run in recovery_runs(gap) {
                if let Ok(t) = tr.translate(&run, Mode::Action, ctx) {
                    if t.ir.actions.is_empty() {
                        continue;
                    }
                    let ir = apply_directives(&run, t.ir.clone(), block.id, &mut counter);
                    record("action", &run, &Ok((t.ast.to_string(), ir.clone())), true);
                    nondet.extend(ir.nondet.iter().cloned());
                    recovered.push((ir, actor(&t.ast, tr.rules, tr.env)));
                }
            }
        }
    }
    Translated {
        irs: BlockIrs {
            components: comps,
            recovered,
        },
        spans,
        nondet,
    }
}

/// Runs the whole extraction over parsed paragraphs.
pub fn extract(
    paragraphs: &[Paragraph],
    lexicon: &Lexicon,
    rules: &RuleSet,
    opts: &ExtractOptions,
    limits: LogicLimits,
    exec: Exec,
) -> Result<Extraction, PipelineError> {
    let blocks = extract_all_blocks(paragraphs);
    if blocks.is_empty() {
        return Err(PipelineError::NoBlocks);
    }
    let tr = Translator {
        lexicon,
        rules,
        env: &opts.env,
        threshold: opts.threshold,
    };
    let para_keys: Vec<Vec<(usize, String, KwType)>> = par::map(exec, paragraphs, |p| {
        paragraph_keys(p, lexicon, opts.threshold)
    });
    let para_pos: BTreeMap<usize, usize> = paragraphs
        .iter()
        .enumerate()
        .map(|(i, p)| (p.index, i))
        .collect();

    let contexts: Vec<Context> = blocks
        .iter()
        .map(|b| {
            let pi = para_pos[&b.paragraph];
            let block_keys = link_keywords(&tokens_of(&b.tree), lexicon, opts.threshold);
            let history = (1..=opts.context_depth)
                .filter_map(|d| pi.checked_sub(d))
                .map(|j| {
                    let mut ks = keys_only(&para_keys[j]);
                    ks.reverse();
                    ks
                })
                .collect();
            Context {
                block: block_keys
                    .keys()
                    .map(|(id, k)| (id.to_string(), k))
                    .collect(),
                paragraph: nearest_first(&para_keys[pi], b.tree.span.start),
                history,
            }
        })
        .collect();
    let idx: Vec<usize> = (0..blocks.len()).collect();
    let translated = par::map(exec, &idx, |&i| {
        translate_block(&blocks[i], &contexts[i], &tr, opts)
    });

    let logic = Logic::new(limits).with_exec(exec);
    let mut diagnostics = Vec::new();
    let mut spans = Vec::new();
    let mut nondet = BTreeSet::new();
    let mut inherit: BTreeMap<usize, Inherited> = BTreeMap::new();
    let mut all: Vec<(String, Transition)> = Vec::new();
    let mut reports = Vec::new();
    for (b, t) in blocks.iter().zip(translated) {
        for s in &t.spans {
            if let Some(e) = &s.error {
                diagnostics.push(Diagnostic::new(
                    Some(b.id),
                    "skipped_span",
                    format!("{} span `{}`: {e}", s.label, s.text),
                ));
            } else if s.recovered {
                diagnostics.push(Diagnostic::new(
                    Some(b.id),
                    "recovered_action",
                    format!("`{}`", s.text),
                ));
            }
        }
        spans.extend(t.spans);
        nondet.extend(t.nondet);
        let inherited = b
            .parent
            .and_then(|p| inherit.get(&p).cloned())
            .unwrap_or_default();
        let res = combine_block(b, &t.irs, &inherited, &opts.default_participant);
        inherit.insert(b.id, res.inherit);
        let mut rows = Vec::new();
        for (p, tr) in res.transitions {
            match logic.satisfiable(&tr.condition) {
                Ok(false) => {
                    diagnostics.push(Diagnostic::new(Some(b.id), "unsatisfiable", tr.label()));
                    continue;
                }
                Err(e) => {
                    diagnostics.push(Diagnostic::new(
                        Some(b.id),
                        "logic_limit",
                        format!("{}: {e}", tr.label()),
                    ));
                }
                Ok(true) => {}
            }
            if tr.actions.is_empty() && tr.to.is_none() {
                diagnostics.push(Diagnostic::new(Some(b.id), "no_effect", tr.label()));
                continue;
            }
            let p = if opts.env.participants.contains(&opts.env.participant(&p)) {
                opts.env.participant(&p)
            } else {
                diagnostics.push(Diagnostic::new(
                    Some(b.id),
                    "unknown_participant",
                    format!("`{p}` replaced by `{}`", opts.default_participant),
                ));
                opts.default_participant.clone()
            };
            rows.push(TransitionRow {
                participant: p.clone(),
                from: tr.from.to_string(),
                to: tr.to.clone(),
                condition: tr.condition.to_string(),
                actions: actions_to_table_string(&tr.actions),
            });
            all.push((p, tr));
        }
        reports.push(BlockReport {
            id: b.id,
            paragraph: b.paragraph,
            text: b.tree.text(),
            transitions: rows,
        });
    }

    let cfg = CompileConfig {
        env: opts.env.clone(),
        initial: opts.initial.clone(),
        nondet,
    };
    let mut model = compile_model(all, &cfg)?;
    if opts.merge {
        for f in &mut model.fsms {
            let r = merge_split_transitions(f, &logic);
            diagnostics.extend(r.diagnostics.into_iter().map(|mut d| {
                d.message = format!("{}: {}", f.participant, d.message);
                d
            }));
            *f = r.fsm;
        }
    }
    Ok(Extraction {
        model,
        blocks: reports,
        spans,
        diagnostics,
    })
}

/// Tokens of free text, for translating a single sentence outside a
/// document.
pub fn sentence_tokens(text: &str) -> Vec<String> {
    tokenize(text, 0).into_iter().map(|t| t.0).collect()
}
