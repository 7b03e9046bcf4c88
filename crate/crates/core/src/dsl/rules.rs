use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DslError;
use crate::depparse::Verbs;
use crate::lexicon::KwType;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotType {
    Kw(Vec<KwType>),
    Expression,
}

impl SlotType {
    pub fn accepts(&self, kind: Option<KwType>) -> bool {
        match (self, kind) {
            (SlotType::Kw(ks), Some(k)) => ks.contains(&k),
            (SlotType::Expression, None) => true,
            _ => false,
        }
    }

    pub fn is_agent(&self) -> bool {
        matches!(self, SlotType::Kw(ks) if ks == &[KwType::Agent])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotMode {
    Required,
    Optional,
    /// An agent slot that defaults to the other participant.
    Peer,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub ty: SlotType,
    pub mode: SlotMode,
    /// `subject`, `object`, or a preposition the argument must follow.
    pub hint: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Condition,
    Action,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DslRule {
    pub command: String,
    pub verbs: Vec<String>,
    pub slots: Vec<Slot>,
    pub actor: Option<String>,
    pub conditions: Vec<String>,
    pub actions: Vec<String>,
}

impl DslRule {
    pub fn supports(&self, mode: Mode) -> bool {
        match mode {
            Mode::Condition => !self.conditions.is_empty(),
            Mode::Action => !self.actions.is_empty(),
        }
    }

    pub fn templates(&self, mode: Mode) -> &[String] {
        match mode {
            Mode::Condition => &self.conditions,
            Mode::Action => &self.actions,
        }
    }

    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.name == name)
    }

    /// The participant performing the command: the declared actor, else the
    /// first agent slot.
    pub fn actor_slot(&self) -> Option<&str> {
        self.actor.as_deref().or_else(|| {
            self.slots
                .iter()
                .find(|s| s.ty.is_agent())
                .map(|s| s.name.as_str())
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleSet {
    pub rules: Vec<DslRule>,
    by_verb: BTreeMap<String, Vec<usize>>,
}

impl RuleSet {
    pub fn rules_for(&self, lemma: &str) -> impl Iterator<Item = &DslRule> {
        self.by_verb
            .get(lemma)
            .into_iter()
            .flatten()
            .map(|&i| &self.rules[i])
    }

    pub fn get(&self, command: &str) -> Option<&DslRule> {
        self.rules.iter().find(|r| r.command == command)
    }

    pub fn verbs(&self) -> Verbs {
        Verbs::new(self.by_verb.keys().cloned())
    }

    pub fn action_verbs(&self) -> Verbs {
        Verbs::new(
            self.by_verb
                .iter()
                .filter(|(_, rs)| rs.iter().any(|&i| self.rules[i].supports(Mode::Action)))
                .map(|(v, _)| v.clone()),
        )
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// One placeholder inside a template.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Placeholder {
    Slot { name: String, upper: bool },
    Chan { src: String, dst: String },
}

impl Placeholder {
    pub fn slots(&self) -> Vec<&str> {
        match self {
            Placeholder::Slot { name, .. } => vec![name],
            Placeholder::Chan { src, dst } => vec![src, dst],
        }
    }
}

/// Splits a template into literal text and placeholders.
pub fn template_parts(t: &str) -> Result<Vec<Result<String, Placeholder>>, String> {
    let mut out = Vec::new();
    let mut rest = t;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(Ok(rest[..open].to_string()));
        }
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| format!("unclosed placeholder in `{t}`"))?
            + open;
        let inner = &rest[open + 1..close];
        let ph = match inner.split_once(':') {
            None => Placeholder::Slot {
                name: inner.to_string(),
                upper: false,
            },
            Some((name, "upper")) => Placeholder::Slot {
                name: name.to_string(),
                upper: true,
            },
            Some(("chan", args)) => {
                let (s, d) = args
                    .split_once(',')
                    .ok_or_else(|| format!("`{{chan:…}}` needs two agent slots in `{t}`"))?;
                Placeholder::Chan {
                    src: s.trim().to_string(),
                    dst: d.trim().to_string(),
                }
            }
            Some((_, m)) => return Err(format!("unknown placeholder modifier `{m}` in `{t}`")),
        };
        out.push(Err(ph));
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        out.push(Ok(rest.to_string()));
    }
    Ok(out)
}

fn parse_slot(spec: &str, line: usize) -> Result<Slot, DslError> {
    let (body, hint) = match spec.split_once('@') {
        Some((b, h)) => (b, Some(h.trim().to_string())),
        None => (spec, None),
    };
    let parts: Vec<&str> = body.split(':').map(str::trim).collect();
    if parts.len() < 2 || parts[0].is_empty() {
        return Err(DslError::Malformed {
            line,
            msg: format!("slot `{spec}` needs name:type"),
        });
    }
    let ty = if parts[1] == "expression" {
        SlotType::Expression
    } else {
        let kinds = parts[1]
            .split('|')
            .map(|t| {
                t.parse::<KwType>().map_err(|_| DslError::UnknownSlotType {
                    slot: parts[0].to_string(),
                    ty: t.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        SlotType::Kw(kinds)
    };
    let mode = match parts.get(2).copied() {
        None => SlotMode::Required,
        Some("optional") => SlotMode::Optional,
        Some("peer") if ty.is_agent() => SlotMode::Peer,
        Some(other) => {
            return Err(DslError::Malformed {
                line,
                msg: format!("unknown slot flag `{other}`"),
            })
        }
    };
    Ok(Slot {
        name: parts[0].to_string(),
        ty,
        mode,
        hint,
    })
}

fn finish(rule: DslRule, line: usize, set: &mut RuleSet) -> Result<(), DslError> {
    if set.get(&rule.command).is_some() {
        return Err(DslError::DuplicateCommand {
            command: rule.command,
        });
    }
    if rule.verbs.is_empty() {
        return Err(DslError::Malformed {
            line,
            msg: format!("command `{}` names no trigger verb", rule.command),
        });
    }
    for t in rule.conditions.iter().chain(&rule.actions) {
        for part in template_parts(t).map_err(|msg| DslError::Malformed { line, msg })? {
            if let Err(ph) = part {
                for s in ph.slots() {
                    let slot = rule.slot(s).ok_or_else(|| DslError::Malformed {
                        line,
                        msg: format!("`{}` template uses undeclared slot `{s}`", rule.command),
                    })?;
                    if matches!(ph, Placeholder::Chan { .. }) && !slot.ty.is_agent() {
                        return Err(DslError::Malformed {
                            line,
                            msg: format!("channel endpoint `{s}` is not an agent slot"),
                        });
                    }
                }
            }
        }
    }
    if let Some(a) = &rule.actor {
        if rule.slot(a).is_none() {
            return Err(DslError::Malformed {
                line,
                msg: format!("actor `{a}` is not a slot"),
            });
        }
    }
    let idx = set.rules.len();
    for v in &rule.verbs {
        set.by_verb.entry(v.clone()).or_default().push(idx);
    }
    set.rules.push(rule);
    Ok(())
}

/// Parses the rules file: blank-line separated stanzas of `key: value`
/// lines (`command`, `verbs`, `slots`, `actor`, `condition`, `action`).
/// `condition` and `action` may repeat; the first template whose
/// placeholders are all bound is used.
pub fn load_dsl_rules(text: &str) -> Result<RuleSet, DslError> {
    let mut set = RuleSet::default();
    let mut cur: Option<(DslRule, usize)> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            if let Some((r, l)) = cur.take() {
                finish(r, l, &mut set)?;
            }
            continue;
        }
        let (key, value) = content.split_once(':').ok_or_else(|| DslError::Malformed {
            line,
            msg: format!("expected `key: value`, got `{content}`"),
        })?;
        let value = value.trim();
        if key.trim() == "command" {
            if let Some((r, l)) = cur.take() {
                finish(r, l, &mut set)?;
            }
            cur = Some((
                DslRule {
                    command: value.to_string(),
                    verbs: Vec::new(),
                    slots: Vec::new(),
                    actor: None,
                    conditions: Vec::new(),
                    actions: Vec::new(),
                },
                line,
            ));
            continue;
        }
        let (rule, _) = cur.as_mut().ok_or_else(|| DslError::Malformed {
            line,
            msg: "field before `command:`".into(),
        })?;
        match key.trim() {
            "verbs" => rule.verbs.extend(
                value
                    .split(',')
                    .map(|v| v.trim().to_lowercase())
                    .filter(|v| !v.is_empty()),
            ),
            "slots" => {
                for s in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    rule.slots.push(parse_slot(s, line)?);
                }
            }
            "actor" => rule.actor = Some(value.to_string()),
            "condition" => rule.conditions.push(value.to_string()),
            "action" => rule.actions.push(value.to_string()),
            other => {
                return Err(DslError::Malformed {
                    line,
                    msg: format!("unknown field `{other}`"),
                })
            }
        }
    }
    if let Some((r, l)) = cur.take() {
        finish(r, l, &mut set)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RULES: &str = "\
# channel commands
command: receive
verbs: receive, receipt
slots: dst:agent@subject, msg:message, src:agent:peer@from
actor: dst
condition: {chan:src,dst} = {msg}
action: {chan:src,dst} := {msg}

command: reset
verbs: reset
slots: agent:agent@subject, counter:counter|variable
action: {agent:upper}_{counter} := 0
";

    #[test]
    fn loads_rules() {
        let rs = load_dsl_rules(RULES).unwrap();
        assert_eq!(rs.len(), 2);
        let r = rs.get("receive").unwrap();
        assert_eq!(r.slots.len(), 3);
        assert_eq!(r.slots[2].mode, SlotMode::Peer);
        assert_eq!(r.slots[2].hint.as_deref(), Some("from"));
        assert_eq!(r.actor_slot(), Some("dst"));
        assert!(r.supports(Mode::Condition) && r.supports(Mode::Action));
        assert_eq!(rs.rules_for("receipt").next().unwrap().command, "receive");
        assert!(rs.verbs().contains("reset"));
        let reset = rs.get("reset").unwrap();
        assert_eq!(
            reset.slots[1].ty,
            SlotType::Kw(vec![KwType::Counter, KwType::Variable])
        );
        assert!(!reset.supports(Mode::Condition));
    }

    #[test]
    fn empty_file_is_empty_ruleset() {
        assert!(load_dsl_rules("# nothing\n").unwrap().is_empty());
    }

    #[test]
    fn rule_errors() {
        let dup =
            format!("{RULES}\ncommand: reset\nverbs: zero\nslots: c:counter\naction: {{c}} := 0\n");
        assert!(matches!(
            load_dsl_rules(&dup),
            Err(DslError::DuplicateCommand { .. })
        ));
        assert!(matches!(
            load_dsl_rules("command: x\nverbs: x\nslots: a:gizmo\n"),
            Err(DslError::UnknownSlotType { .. })
        ));
        assert!(matches!(
            load_dsl_rules("command: x\nverbs: x\nslots: a:timer\naction: {b} := 0\n"),
            Err(DslError::Malformed { .. })
        ));
        assert!(matches!(
            load_dsl_rules("command: x\nslots: a:timer\n"),
            Err(DslError::Malformed { .. })
        ));
    }

    #[test]
    fn template_placeholders() {
        let parts = template_parts("{agent:upper}_{counter} := {chan:src,dst}").unwrap();
        assert_eq!(parts.len(), 5);
        assert_eq!(
            parts[4],
            Err(Placeholder::Chan {
                src: "src".into(),
                dst: "dst".into()
            })
        );
    }
}
