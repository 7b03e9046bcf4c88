//! Bounded explicit-state model checking of a synthesized model composed
//! with a Dolev-Yao style adversary on the channels.

mod explore;
pub mod ltl;
mod smv;
mod trace;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use explore::{AdvAction, Compiled, Fired, State, StepLabel};
pub use ltl::{parse_ltl, parse_properties, Ltl, LtlProperty};
pub use smv::to_smv;
pub use trace::{validate_trace, Trace, TraceState};

use crate::logic::LogicError;
use crate::par::{self, Exec};
use crate::synth::{Domain, Model};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Drop,
    Modify,
    Inject,
    Replay,
}

impl std::str::FromStr for Capability {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "drop" => Ok(Capability::Drop),
            "modify" => Ok(Capability::Modify),
            "inject" => Ok(Capability::Inject),
            "replay" => Ok(Capability::Replay),
            other => Err(format!("unknown capability `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdversaryConfig {
    pub capabilities: Vec<Capability>,
    /// Distinct legitimate messages remembered per channel for replay.
    pub replay_buffer_size: usize,
    /// Messages the adversary can forge (inject or substitute).
    #[serde(alias = "injectable_messages")]
    pub injectable: Vec<String>,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            capabilities: vec![],
            replay_buffer_size: 2,
            injectable: vec![],
        }
    }
}

/// Attaches the adversary to every channel. Forgeable messages missing
/// from a channel's domain are added to it.
pub fn instrument_adversary(model: &Model, adversary: &AdversaryConfig) -> Model {
    let mut m = model.clone();
    if adversary
        .capabilities
        .iter()
        .any(|c| matches!(c, Capability::Inject | Capability::Modify))
    {
        for c in &model.channels {
            if let Some(Domain::Enum { values }) = m.vars.get_mut(&c.name).map(|d| &mut d.domain) {
                for msg in &adversary.injectable {
                    if !values.contains(msg) {
                        values.push(msg.clone());
                    }
                }
            }
        }
    }
    m.adversary = Some(adversary.clone());
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    /// Maximum number of steps explored from the initial state.
    pub bound: usize,
    /// Maximum number of distinct product states kept.
    pub memory_cap: usize,
    pub exec: Exec,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            bound: 40,
            memory_cap: 2_000_000,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Verdict {
    /// Every reachable state was explored.
    Proven,
    /// No violation within the bound; deeper states exist.
    HoldsWithinBound {
        bound: usize,
    },
    Violated {
        trace: Trace,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub property: String,
    #[serde(flatten)]
    pub verdict: Verdict,
    pub states: usize,
    pub depth: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckError {
    #[error("variable `{0}` has an unbounded or oversized domain")]
    UnboundedDomain(String),
    #[error("bad model: {0}")]
    BadModel(String),
    #[error("state cap of {0} reached")]
    MemoryCap(usize),
    #[error("no accepting lasso within {bound} steps and the search was truncated")]
    BoundExhausted { bound: usize },
    #[error(transparent)]
    Parse(#[from] LogicError),
}

/// Checks `property` on `model`. Properties whose negation is co-safety
/// are decided by progression over a breadth-first search, which yields a
/// shortest counterexample. Others go through a Büchi product and a search
/// for an accepting lasso.
pub fn check(
    model: &Model,
    property: &LtlProperty,
    opts: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    let cm = Compiled::new(model)?;
    let bound = property.bound.unwrap_or(opts.bound);
    let neg = Ltl::Not(Box::new(property.formula.clone())).nnf();
    let (verdict, states, depth) = if neg.is_cosafety() {
        check_cosafety(&cm, model, &neg, bound, opts)?
    } else {
        check_lasso(&cm, model, &neg, bound, opts)?
    };
    Ok(CheckReport {
        property: property.name.clone(),
        verdict,
        states,
        depth,
    })
}

fn named_state(cm: &Compiled, s: &State) -> TraceState {
    let fsm = cm
        .fsms
        .iter()
        .zip(&s.fsm)
        .map(|(f, &i)| (f.participant.clone(), f.states[i as usize].clone()))
        .collect();
    let vars = cm
        .names
        .iter()
        .zip(&s.vars)
        .enumerate()
        .map(|(k, (n, &i))| (n.clone(), cm.domains[k][i as usize].clone()))
        .collect();
    let buffers = cm
        .chans
        .iter()
        .zip(&s.buffers)
        .filter(|(_, b)| !b.is_empty())
        .map(|(c, b)| {
            let entries = b
                .iter()
                .map(|e| {
                    let mut vals = vec![cm.domains[c.var][e[0] as usize].clone()];
                    vals.extend(
                        c.fields
                            .iter()
                            .zip(&e[1..])
                            .map(|(&f, &x)| cm.domains[f][x as usize].clone()),
                    );
                    vals
                })
                .collect();
            (c.name.clone(), entries)
        })
        .collect();
    TraceState { fsm, vars, buffers }
}

fn build_trace(
    cm: &Compiled,
    path: Vec<(Option<StepLabel>, State)>,
    loop_start: Option<usize>,
) -> Trace {
    let mut states = Vec::new();
    let mut steps = Vec::new();
    for (label, s) in path {
        if let Some(l) = label {
            steps.push(l);
        }
        states.push(named_state(cm, &s));
    }
    Trace {
        states,
        steps,
        loop_start,
    }
}

type Node = (State, Ltl);

fn check_cosafety(
    cm: &Compiled,
    model: &Model,
    neg: &Ltl,
    bound: usize,
    opts: &CheckOptions,
) -> Result<(Verdict, usize, usize), CheckError> {
    let s0 = cm.initial(model);
    let init_states = initial_variants(cm, &s0);
    // parent[k] = (predecessor index, label into k)
    let mut nodes: Vec<Node> = Vec::new();
    let mut parent: Vec<Option<(usize, StepLabel)>> = Vec::new();
    let mut seen: HashMap<Node, usize> = HashMap::new();
    let mut frontier = Vec::new();

    let unwind = |nodes: &Vec<Node>, parent: &Vec<Option<(usize, StepLabel)>>, mut k: usize| {
        let mut path = vec![];
        loop {
            match &parent[k] {
                Some((p, l)) => {
                    path.push((Some(l.clone()), nodes[k].0.clone()));
                    k = *p;
                }
                None => {
                    path.push((None, nodes[k].0.clone()));
                    break;
                }
            }
        }
        path.reverse();
        build_trace(cm, path, None)
    };

    for s in init_states {
        let obl = neg.progress(&|e| cm.holds(&s, e));
        if obl.is_trivially_false() {
            continue;
        }
        let node = (s.clone(), obl.clone());
        if seen.contains_key(&node) {
            continue;
        }
        nodes.push(node.clone());
        parent.push(None);
        seen.insert(node, nodes.len() - 1);
        if obl.is_trivially_true() {
            return Ok((
                Verdict::Violated {
                    trace: unwind(&nodes, &parent, nodes.len() - 1),
                },
                nodes.len(),
                0,
            ));
        }
        frontier.push(nodes.len() - 1);
    }

    let mut depth = 0;
    while !frontier.is_empty() {
        if depth == bound {
            return Ok((Verdict::HoldsWithinBound { bound }, nodes.len(), depth));
        }
        depth += 1;
        let expanded = par::map(opts.exec, &frontier, |&k| {
            let (s, obl) = &nodes[k];
            cm.successors(s)
                .into_iter()
                .map(|(l, t)| {
                    let o = obl.progress(&|e| cm.holds(&t, e));
                    (l, t, o)
                })
                .collect::<Vec<_>>()
        });
        let mut next = Vec::new();
        for (&k, succ) in frontier.iter().zip(expanded) {
            for (l, t, o) in succ {
                if o.is_trivially_false() {
                    continue;
                }
                let node = (t, o);
                if seen.contains_key(&node) {
                    continue;
                }
                let hit = node.1.is_trivially_true();
                nodes.push(node.clone());
                parent.push(Some((k, l)));
                seen.insert(node, nodes.len() - 1);
                if hit {
                    let trace = unwind(&nodes, &parent, nodes.len() - 1);
                    return Ok((Verdict::Violated { trace }, nodes.len(), depth));
                }
                if nodes.len() > opts.memory_cap {
                    return Err(CheckError::MemoryCap(opts.memory_cap));
                }
                next.push(nodes.len() - 1);
            }
        }
        frontier = next;
    }
    Ok((Verdict::Proven, nodes.len(), depth))
}

/// Initial states, one per combination of nondeterministic inputs.
fn initial_variants(cm: &Compiled, s0: &State) -> Vec<State> {
    let mut out = vec![s0.clone()];
    for &v in &cm.nondet {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..cm.domains[v].len() as u16).map(move |k| {
                    let mut t = s.clone();
                    t.vars[v] = k;
                    t
                })
            })
            .collect();
    }
    out
}

fn check_lasso(
    cm: &Compiled,
    model: &Model,
    neg: &Ltl,
    bound: usize,
    opts: &CheckOptions,
) -> Result<(Verdict, usize, usize), CheckError> {
    let gba = ltl::to_gba(neg);
    let label_ok = |q: usize, s: &State| gba.labels[q].iter().all(|p| cm.holds(s, p));
    let s0 = cm.initial(model);

    let mut nodes: Vec<(State, usize)> = Vec::new();
    let mut index: HashMap<(State, usize), usize> = HashMap::new();
    let mut edges: Vec<Vec<(usize, StepLabel)>> = Vec::new();
    let mut parent: Vec<Option<(usize, StepLabel)>> = Vec::new();
    let mut frontier = Vec::new();
    for s in initial_variants(cm, &s0) {
        for &q in &gba.initial {
            let key = (s.clone(), q);
            if label_ok(q, &s) && !index.contains_key(&key) {
                index.insert(key.clone(), nodes.len());
                frontier.push(nodes.len());
                nodes.push(key);
                edges.push(vec![]);
                parent.push(None);
            }
        }
    }

    let mut depth = 0;
    let mut truncated = false;
    while !frontier.is_empty() {
        if depth == bound {
            truncated = true;
            break;
        }
        depth += 1;
        let expanded = par::map(opts.exec, &frontier, |&k| {
            let (s, q) = &nodes[k];
            let mut out = Vec::new();
            for (l, t) in cm.successors(s) {
                for &q2 in &gba.succ[*q] {
                    if label_ok(q2, &t) {
                        out.push((l.clone(), t.clone(), q2));
                    }
                }
            }
            out
        });
        let mut next = Vec::new();
        for (&k, succ) in frontier.iter().zip(expanded) {
            for (l, t, q2) in succ {
                let key = (t, q2);
                let j = match index.get(&key) {
                    Some(&j) => j,
                    None => {
                        let j = nodes.len();
                        index.insert(key.clone(), j);
                        nodes.push(key);
                        edges.push(vec![]);
                        parent.push(Some((k, l.clone())));
                        next.push(j);
                        if nodes.len() > opts.memory_cap {
                            return Err(CheckError::MemoryCap(opts.memory_cap));
                        }
                        j
                    }
                };
                if !edges[k].iter().any(|(x, y)| *x == j && *y == l) {
                    edges[k].push((j, l));
                }
            }
        }
        frontier = next;
    }

    let n = nodes.len();
    let adj: Vec<Vec<usize>> = edges
        .iter()
        .map(|es| es.iter().map(|(j, _)| *j).collect())
        .collect();
    for comp in tarjan(&adj) {
        let nontrivial = comp.len() > 1 || adj[comp[0]].contains(&comp[0]);
        if !nontrivial {
            continue;
        }
        let in_comp: Vec<bool> = {
            let mut v = vec![false; n];
            for &c in &comp {
                v[c] = true;
            }
            v
        };
        let accepts = gba
            .accepting
            .iter()
            .all(|set| comp.iter().any(|&c| set.contains(&nodes[c].1)));
        if !accepts {
            continue;
        }
        let entry = *comp.iter().min().unwrap();
        // Stem: BFS tree path to the entry node.
        let mut stem = vec![];
        let mut k = entry;
        loop {
            match &parent[k] {
                Some((p, l)) => {
                    stem.push((Some(l.clone()), nodes[k].0.clone()));
                    k = *p;
                }
                None => {
                    stem.push((None, nodes[k].0.clone()));
                    break;
                }
            }
        }
        stem.reverse();
        let loop_start = stem.len() - 1;
        // Cycle: from the entry, visit a node of every acceptance set, then
        // return to the entry, staying inside the component.
        let mut targets: Vec<usize> = gba
            .accepting
            .iter()
            .map(|set| {
                *comp
                    .iter()
                    .filter(|&&c| set.contains(&nodes[c].1))
                    .min()
                    .unwrap()
            })
            .collect();
        targets.push(entry);
        let mut cur = entry;
        let mut cycle = vec![];
        for (ti, &t) in targets.iter().enumerate() {
            let must_move = ti == targets.len() - 1 && cycle.is_empty();
            let seg = path_within(&edges, &in_comp, cur, t, must_move);
            cycle.extend(seg);
            cur = t;
        }
        let mut path = stem;
        for (j, l) in cycle {
            path.push((Some(l), nodes[j].0.clone()));
        }
        let trace = build_trace(cm, path, Some(loop_start));
        return Ok((Verdict::Violated { trace }, n, depth));
    }
    if truncated {
        return Err(CheckError::BoundExhausted { bound });
    }
    Ok((Verdict::Proven, n, depth))
}

/// Shortest path inside a component as `(node, label)` steps. With
/// `nonempty`, a path from a node to itself has at least one edge.
fn path_within(
    edges: &[Vec<(usize, StepLabel)>],
    in_comp: &[bool],
    from: usize,
    to: usize,
    nonempty: bool,
) -> Vec<(usize, StepLabel)> {
    if from == to && !nonempty {
        return vec![];
    }
    let mut prev: BTreeMap<usize, (usize, StepLabel)> = BTreeMap::new();
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(k) = queue.pop_front() {
        for (j, l) in &edges[k] {
            if !in_comp[*j] || prev.contains_key(j) {
                continue;
            }
            prev.insert(*j, (k, l.clone()));
            if *j == to {
                let mut out = vec![];
                let mut c = to;
                loop {
                    let (p, l) = prev[&c].clone();
                    out.push((c, l));
                    if p == from {
                        break;
                    }
                    c = p;
                }
                out.reverse();
                return out;
            }
            queue.push_back(*j);
        }
    }
    unreachable!("nodes of one component are mutually reachable")
}

/// Strongly connected components, iteratively, in discovery order.
fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < adj[v].len() {
                let w = adj[v][*i];
                *i += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}
