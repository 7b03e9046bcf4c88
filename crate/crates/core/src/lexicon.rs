//! Typed keyword lexicon and fuzzy longest-match linking of token runs.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::{tokenize, Paragraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KwType {
    Agent,
    Message,
    State,
    Timer,
    Counter,
    Variable,
    Procedure,
    Mode,
    Service,
    Cause,
    Misc,
}

impl KwType {
    pub const ALL: [KwType; 11] = [
        KwType::Agent,
        KwType::Message,
        KwType::State,
        KwType::Timer,
        KwType::Counter,
        KwType::Variable,
        KwType::Procedure,
        KwType::Mode,
        KwType::Service,
        KwType::Cause,
        KwType::Misc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KwType::Agent => "agent",
            KwType::Message => "message",
            KwType::State => "state",
            KwType::Timer => "timer",
            KwType::Counter => "counter",
            KwType::Variable => "variable",
            KwType::Procedure => "procedure",
            KwType::Mode => "mode",
            KwType::Service => "service",
            KwType::Cause => "cause",
            KwType::Misc => "misc",
        }
    }
}

impl fmt::Display for KwType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KwType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        KwType::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown keyword type `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyword {
    pub id: String,
    pub kind: KwType,
    pub surface_forms: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub mined: bool,
}

impl Keyword {
    pub fn new(id: &str, kind: KwType, forms: &[&str]) -> Self {
        Keyword {
            id: id.to_string(),
            kind,
            surface_forms: forms.iter().map(|f| form_tokens(f)).collect(),
            mined: false,
        }
    }

    fn to_line(&self) -> String {
        let forms: Vec<String> = self.surface_forms.iter().map(|f| f.join(" ")).collect();
        format!("{}\t{}\t{}", self.id, self.kind, forms.join("|"))
    }
}

fn form_tokens(form: &str) -> Vec<String> {
    tokenize(form, 0)
        .into_iter()
        .map(|t| t.0)
        .filter(|t| !is_punct(t))
        .collect()
}

pub fn is_punct(tok: &str) -> bool {
    tok.chars().all(|c| !c.is_alphanumeric())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexiconError {
    #[error("line {line}: duplicate keyword id `{id}`")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: keyword `{id}` has no type")]
    TypelessSeedEntry { id: String, line: usize },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub entries: Vec<Keyword>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Lexicon {
    pub fn from_entries(entries: Vec<Keyword>) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        for (i, e) in entries.into_iter().enumerate() {
            lex.insert(e, i + 1)?;
        }
        Ok(lex)
    }

    fn insert(&mut self, e: Keyword, line: usize) -> Result<(), LexiconError> {
        if self.index.contains_key(&e.id) {
            return Err(LexiconError::DuplicateId { id: e.id, line });
        }
        self.index.insert(e.id.clone(), self.entries.len());
        self.entries.push(e);
        Ok(())
    }

    /// Parses `id<TAB>type<TAB>form|form…` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = content.split('\t').map(str::trim).collect();
            let id = cols[0];
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(LexiconError::Malformed {
                    line,
                    msg: format!("bad keyword id `{id}`"),
                });
            }
            let kind_str = cols.get(1).copied().unwrap_or("");
            if kind_str.is_empty() {
                return Err(LexiconError::TypelessSeedEntry {
                    id: id.to_string(),
                    line,
                });
            }
            let kind = kind_str
                .parse()
                .map_err(|msg| LexiconError::Malformed { line, msg })?;
            let mut forms: Vec<Vec<String>> = cols
                .get(2)
                .map(|f| {
                    f.split('|')
                        .map(form_tokens)
                        .filter(|t| !t.is_empty())
                        .collect()
                })
                .unwrap_or_default();
            if forms.is_empty() {
                forms.push(id.split('_').map(str::to_string).collect());
            }
            lex.insert(
                Keyword {
                    id: id.to_string(),
                    kind,
                    surface_forms: forms,
                    mined: false,
                },
                line,
            )?;
        }
        Ok(lex)
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| e.to_line() + "\n").collect()
    }

    pub fn get(&self, id: &str) -> Option<&Keyword> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn kind_of(&self, id: &str) -> Option<KwType> {
        self.get(id).map(|k| k.kind)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mined(&self) -> impl Iterator<Item = &Keyword> {
        self.entries.iter().filter(|k| k.mined)
    }

    /// Serde skips the index; call after deserializing.
    pub fn reindex(&mut self) {
        self.index = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), i))
            .collect();
    }
}

const ABBREVIATIONS: &[(&str, &str)] = &[("request", "req"), ("authentication", "auth")];

/// Canonical id for a mined phrase: lowercase, underscores, abbreviations.
pub fn canonical_id(words: &[&str]) -> String {
    words
        .iter()
        .map(|w| {
            let lw = w.to_lowercase();
            ABBREVIATIONS
                .iter()
                .find(|(long, _)| *long == lw)
                .map(|(_, short)| short.to_string())
                .unwrap_or(lw)
        })
        .map(|w| w.replace(['-', '.', '"'], "_"))
        .collect::<Vec<_>>()
        .join("_")
}

const STOPWORDS: &[&str] = &[
    "the", "a", "an", "of", "and", "or", "to", "in", "on", "if", "is", "be", "by", "its", "their",
    "shall", "should", "may", "can", "not", "with", "for", "this", "that", "when", "any", "each",
];

fn is_caps_word(t: &str) -> bool {
    t.chars().filter(|c| c.is_alphabetic()).count() >= 2
        && t.chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '-')
}

fn is_timer_name(t: &str) -> bool {
    let b = t.as_bytes();
    b.len() >= 4 && (b[0] == b'T' || b[0] == b't') && b[1..].iter().all(u8::is_ascii_digit)
}

/// Seed lexicon plus candidates mined from corpus paragraphs. Mined entries
/// carry `mined = true` and type `misc`, except `timer Tnnnn` which is typed
/// `timer`. Phrases that already link exactly to a seed entry are skipped.
pub fn build_lexicon(seed: Lexicon, corpus: &[Paragraph]) -> Lexicon {
    let mut lex = seed;
    let mut seen: BTreeSet<String> = lex.entries.iter().map(|e| e.id.clone()).collect();
    let mut add = |lex: &mut Lexicon, words: &[&str], kind: KwType| {
        let id = canonical_id(words);
        if id.is_empty() || seen.contains(&id) {
            return;
        }
        let toks: Vec<String> = words.iter().map(|w| w.to_string()).collect();
        let linked = link_keywords(&toks, lex, 0.0);
        if linked.items.len() == 1 && matches!(linked.items[0], Linked::Key { .. }) {
            return;
        }
        seen.insert(id.clone());
        lex.entries.push(Keyword {
            id: id.clone(),
            kind,
            surface_forms: vec![toks],
            mined: true,
        });
        let n = lex.entries.len() - 1;
        lex.index.insert(id, n);
    };
    for p in corpus {
        let toks: Vec<&str> = p.tokens();
        let mut i = 0;
        while i < toks.len() {
            let t = toks[i];
            if t.eq_ignore_ascii_case("timer") && i + 1 < toks.len() && is_timer_name(toks[i + 1]) {
                add(&mut lex, &toks[i..i + 2], KwType::Timer);
                i += 2;
                continue;
            }
            if is_caps_word(t) {
                let start = i;
                while i < toks.len() && is_caps_word(toks[i]) {
                    i += 1;
                }
                if i - start >= 2 || t.contains('-') {
                    add(&mut lex, &toks[start..i], KwType::Misc);
                }
                continue;
            }
            if t.eq_ignore_ascii_case("counter") {
                let mut s = i;
                while s > 0
                    && i - s < 4
                    && toks[s - 1].chars().all(|c| c.is_ascii_lowercase())
                    && !STOPWORDS.contains(&toks[s - 1])
                {
                    s -= 1;
                }
                if s < i {
                    add(&mut lex, &toks[s..=i], KwType::Misc);
                }
            }
            if t.starts_with('"') {
                let close = toks[i..]
                    .iter()
                    .take(6)
                    .enumerate()
                    .position(|(j, w)| w.ends_with('"') && (j > 0 || w.len() > 1));
                if let Some(len) = close {
                    let words: Vec<&str> = toks[i..=i + len]
                        .iter()
                        .map(|w| w.trim_matches('"'))
                        .filter(|w| !w.is_empty())
                        .collect();
                    add(&mut lex, &words, KwType::Misc);
                    i += len + 1;
                    continue;
                }
            }
            i += 1;
        }
    }
    lex
}

/// One item of linked text. `start..end` index the input tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Linked {
    Raw {
        text: String,
        index: usize,
    },
    Key {
        id: String,
        #[serde(rename = "type")]
        kind: KwType,
        start: usize,
        end: usize,
        distance: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkedText {
    pub items: Vec<Linked>,
}

impl LinkedText {
    pub fn keys(&self) -> impl Iterator<Item = (&str, KwType)> {
        self.items.iter().filter_map(|i| match i {
            Linked::Key { id, kind, .. } => Some((id.as_str(), *kind)),
            Linked::Raw { .. } => None,
        })
    }

    /// Input token indices covered by a link.
    pub fn covered(&self) -> BTreeSet<usize> {
        self.items
            .iter()
            .flat_map(|i| match i {
                Linked::Key { start, end, .. } => *start..*end,
                Linked::Raw { .. } => 0..0,
            })
            .collect()
    }
}

impl fmt::Display for LinkedText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let words: Vec<&str> = self
            .items
            .iter()
            .map(|i| match i {
                Linked::Raw { text, .. } => text.as_str(),
                Linked::Key { id, .. } => id.as_str(),
            })
            .collect();
        f.write_str(&words.join(" "))
    }
}

fn normalized_distance(a: &str, b: &str) -> f64 {
    let max = a.chars().count().max(b.chars().count());
    if max == 0 {
        return 0.0;
    }
    strsim::levenshtein(a, b) as f64 / max as f64
}

fn has_digit(s: &str) -> bool {
    s.chars().any(|c| c.is_ascii_digit())
}

struct Match {
    key: usize,
    form_len: usize,
    distance: f64,
    end: usize,
}

/// Greedy left-to-right longest-match linking. A window of `n` non-punctuation
/// tokens matches an `n`-token surface form when their lowercase texts are
/// within `threshold` normalised edit distance and every token containing a
/// digit matches exactly. A keyword id written verbatim always links.
pub fn link_keywords(tokens: &[String], lex: &Lexicon, threshold: f64) -> LinkedText {
    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let words: Vec<usize> = (0..tokens.len())
        .filter(|&i| !is_punct(&tokens[i]))
        .collect();
    let mut items = Vec::new();
    let mut w = 0;
    let mut next_tok = 0;
    while w < words.len() {
        let start = words[w];
        while next_tok < start {
            items.push(Linked::Raw {
                text: tokens[next_tok].clone(),
                index: next_tok,
            });
            next_tok += 1;
        }
        let mut best: Option<Match> = None;
        let better = |m: &Match, b: &Option<Match>| match b {
            None => true,
            Some(b) => {
                m.form_len > b.form_len || (m.form_len == b.form_len && m.distance < b.distance)
            }
        };
        for (k, entry) in lex.entries.iter().enumerate() {
            if lower[start] == entry.id.to_lowercase() {
                let m = Match {
                    key: k,
                    form_len: 1,
                    distance: 0.0,
                    end: start + 1,
                };
                if better(&m, &best) {
                    best = Some(m);
                }
            }
            for form in &entry.surface_forms {
                let n = form.len();
                if n == 0 || w + n > words.len() {
                    continue;
                }
                let window = &words[w..w + n];
                let digits_ok = window.iter().zip(form).all(|(&i, f)| {
                    !(has_digit(&lower[i]) || has_digit(f)) || lower[i] == f.to_lowercase()
                });
                if !digits_ok {
                    continue;
                }
                let cand: Vec<&str> = window.iter().map(|&i| lower[i].as_str()).collect();
                let cand = cand.join(" ");
                let target = form.join(" ").to_lowercase();
                let (lc, lt) = (cand.chars().count(), target.chars().count());
                if (lc.abs_diff(lt) as f64) > threshold * lc.max(lt) as f64 {
                    continue;
                }
                let d = normalized_distance(&cand, &target);
                if d <= threshold + 1e-12 {
                    let m = Match {
                        key: k,
                        form_len: n,
                        distance: d,
                        end: window[n - 1] + 1,
                    };
                    if better(&m, &best) {
                        best = Some(m);
                    }
                }
            }
        }
        match best {
            Some(m) => {
                let entry = &lex.entries[m.key];
                let mut end = m.end;
                let mut consumed = m.form_len;
                let ends_in_message = entry
                    .surface_forms
                    .iter()
                    .any(|f| f.last().is_some_and(|l| l.eq_ignore_ascii_case("message")));
                if entry.kind == KwType::Message && !ends_in_message {
                    if let Some(&nxt) = words.get(w + consumed) {
                        if lower[nxt] == "message" {
                            end = nxt + 1;
                            consumed += 1;
                        }
                    }
                }
                items.push(Linked::Key {
                    id: entry.id.clone(),
                    kind: entry.kind,
                    start,
                    end,
                    distance: m.distance,
                });
                next_tok = end;
                w += consumed;
            }
            None => {
                items.push(Linked::Raw {
                    text: tokens[start].clone(),
                    index: start,
                });
                next_tok = start + 1;
                w += 1;
            }
        }
    }
    while next_tok < tokens.len() {
        items.push(Linked::Raw {
            text: tokens[next_tok].clone(),
            index: next_tok,
        });
        next_tok += 1;
    }
    LinkedText { items }
}
