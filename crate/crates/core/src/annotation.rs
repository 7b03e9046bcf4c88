//! Tagged specification text: `<control>`, `<condition>`, `<action>`,
//! `<start_state>` and `<end_state>` spans over whitespace-tokenised prose,
//! one tree per blank-line separated paragraph.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagLabel {
    Control,
    Condition,
    Action,
    StartState,
    EndState,
    Token,
}

impl TagLabel {
    pub fn tag_name(self) -> &'static str {
        match self {
            TagLabel::Control => "control",
            TagLabel::Condition => "condition",
            TagLabel::Action => "action",
            TagLabel::StartState => "start_state",
            TagLabel::EndState => "end_state",
            TagLabel::Token => "token",
        }
    }

    fn from_tag(name: &str) -> Option<Self> {
        Some(match name {
            "control" => TagLabel::Control,
            "condition" => TagLabel::Condition,
            "action" => TagLabel::Action,
            "start_state" => TagLabel::StartState,
            "end_state" => TagLabel::EndState,
            _ => return None,
        })
    }

    pub fn is_state(self) -> bool {
        matches!(self, TagLabel::StartState | TagLabel::EndState)
    }
}

impl fmt::Display for TagLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag_name())
    }
}

/// Byte range in the input document.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub paragraph: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTree {
    pub label: TagLabel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<AnnotationTree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub span: Span,
}

impl AnnotationTree {
    pub fn is_token(&self) -> bool {
        self.label == TagLabel::Token
    }

    /// Leaf token texts in document order.
    pub fn tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_tokens(&mut out);
        out
    }

    fn collect_tokens<'a>(&'a self, out: &mut Vec<&'a str>) {
        match &self.text {
            Some(t) => out.push(t),
            None => self.children.iter().for_each(|c| c.collect_tokens(out)),
        }
    }

    pub fn text(&self) -> String {
        self.tokens().join(" ")
    }

    /// Structural equality ignoring source spans.
    pub fn same_shape(&self, other: &AnnotationTree) -> bool {
        self.label == other.label
            && self.text == other.text
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.same_shape(b))
    }

    pub fn has_descendant(&self, pred: &impl Fn(&AnnotationTree) -> bool) -> bool {
        self.children
            .iter()
            .any(|c| pred(c) || c.has_descendant(pred))
    }

    fn render_into(&self, out: &mut Vec<String>) {
        match &self.text {
            Some(t) => out.push(t.clone()),
            None => {
                out.push(format!("<{}>", self.label));
                self.children.iter().for_each(|c| c.render_into(out));
                out.push(format!("</{}>", self.label));
            }
        }
    }
}

/// One paragraph: the root of an annotation tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub index: usize,
    pub nodes: Vec<AnnotationTree>,
    pub span: Span,
}

impl Paragraph {
    pub fn tokens(&self) -> Vec<&str> {
        self.nodes.iter().flat_map(|n| n.tokens()).collect()
    }

    pub fn same_shape(&self, other: &Paragraph) -> bool {
        self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| a.same_shape(b))
    }

    pub fn control_count(&self) -> usize {
        fn count(t: &AnnotationTree) -> usize {
            usize::from(t.label == TagLabel::Control) + t.children.iter().map(count).sum::<usize>()
        }
        self.nodes.iter().map(count).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotationError {
    #[error("unbalanced tag at byte {pos}: {detail}")]
    UnbalancedTag { pos: usize, detail: String },
    #[error("unknown tag `{name}` at byte {pos}")]
    UnknownTag { name: String, pos: usize },
    #[error("empty <{label}> span at byte {pos}")]
    EmptySpan { label: TagLabel, pos: usize },
    #[error("malformed tag at byte {pos} (attributes are not allowed)")]
    MalformedTag { pos: usize },
    #[error("<control> at byte {pos} has no condition or action")]
    EmptyControl { pos: usize },
    #[error("state tag nested inside a state tag at byte {pos}")]
    NestedState { pos: usize },
}

impl AnnotationError {
    /// Byte offset of the error in the document.
    pub fn pos(&self) -> usize {
        match self {
            AnnotationError::UnbalancedTag { pos, .. }
            | AnnotationError::UnknownTag { pos, .. }
            | AnnotationError::EmptySpan { pos, .. }
            | AnnotationError::MalformedTag { pos }
            | AnnotationError::EmptyControl { pos }
            | AnnotationError::NestedState { pos } => *pos,
        }
    }
}

const DETACHED: &[char] = &[',', '.', ';', ':', '(', ')'];

/// Splits on whitespace and detaches leading and trailing `, . ; : ( )`.
/// Interior punctuation (section numbers, hyphenated terms) stays attached.
/// Offsets are relative to `text` plus `base`.
pub fn tokenize(text: &str, base: usize) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut word_start = None;
    let flush = |start: usize, end: usize, out: &mut Vec<(String, usize, usize)>| {
        let mut s = start;
        let mut e = end;
        let mut lead = Vec::new();
        while s < e {
            let c = text[s..e].chars().next().unwrap();
            if DETACHED.contains(&c) {
                lead.push((c.to_string(), base + s, base + s + 1));
                s += 1;
            } else {
                break;
            }
        }
        let mut trail = Vec::new();
        while e > s {
            let c = text[s..e].chars().next_back().unwrap();
            if DETACHED.contains(&c) {
                trail.push((c.to_string(), base + e - 1, base + e));
                e -= 1;
            } else {
                break;
            }
        }
        out.extend(lead);
        if s < e {
            out.push((text[s..e].to_string(), base + s, base + e));
        }
        out.extend(trail.into_iter().rev());
    };
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = word_start.take() {
                flush(s, i, &mut out);
            }
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(s) = word_start {
        flush(s, text.len(), &mut out);
    }
    out
}

/// Splits a document into paragraphs on blank lines, returning byte ranges.
fn paragraph_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut end = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim().is_empty() {
            if let Some(s) = start.take() {
                out.push((s, end));
            }
        } else {
            if start.is_none() {
                start = Some(offset);
            }
            end = offset + line.trim_end().len();
        }
        offset += line.len();
    }
    if let Some(s) = start {
        out.push((s, end));
    }
    out
}

struct Frame {
    label: TagLabel,
    open_pos: usize,
    children: Vec<AnnotationTree>,
}

/// Parses a tagged document into one tree per paragraph.
pub fn parse_annotated(text: &str) -> Result<Vec<Paragraph>, AnnotationError> {
    paragraph_ranges(text)
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| parse_paragraph(text, index, start, end))
        .collect()
}

fn parse_paragraph(
    doc: &str,
    index: usize,
    start: usize,
    end: usize,
) -> Result<Paragraph, AnnotationError> {
    let span_of = |s, e| Span {
        paragraph: index,
        start: s,
        end: e,
    };
    let mut stack = vec![Frame {
        label: TagLabel::Token,
        open_pos: start,
        children: Vec::new(),
    }];
    let mut text_start = start;
    let bytes = doc.as_bytes();
    let mut i = start;
    let flush_text = |stack: &mut Vec<Frame>, s: usize, e: usize| {
        for (tok, ts, te) in tokenize(&doc[s..e], s) {
            stack.last_mut().unwrap().children.push(AnnotationTree {
                label: TagLabel::Token,
                children: Vec::new(),
                text: Some(tok),
                span: span_of(ts, te),
            });
        }
    };
    while i < end {
        let is_tag_start = bytes[i] == b'<'
            && i + 1 < end
            && (bytes[i + 1] == b'/' || bytes[i + 1].is_ascii_alphabetic());
        if !is_tag_start {
            i += 1;
            continue;
        }
        flush_text(&mut stack, text_start, i);
        let tag_pos = i;
        let closing = bytes[i + 1] == b'/';
        let mut j = i + 1 + usize::from(closing);
        while j < end && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
            j += 1;
        }
        let name = &doc[i + 1 + usize::from(closing)..j];
        while j < end && bytes[j] == b' ' {
            j += 1;
        }
        if j >= end || bytes[j] != b'>' {
            return Err(AnnotationError::MalformedTag { pos: tag_pos });
        }
        let label = TagLabel::from_tag(name).ok_or_else(|| AnnotationError::UnknownTag {
            name: name.to_string(),
            pos: tag_pos,
        })?;
        if closing {
            let frame = stack.pop().unwrap();
            if stack.is_empty() || frame.label != label {
                let detail = if stack.is_empty() {
                    format!("</{label}> without matching open tag")
                } else {
                    format!("</{label}> closes <{}>", frame.label)
                };
                return Err(AnnotationError::UnbalancedTag {
                    pos: tag_pos,
                    detail,
                });
            }
            if frame.children.is_empty() {
                return Err(AnnotationError::EmptySpan {
                    label,
                    pos: frame.open_pos,
                });
            }
            let node = AnnotationTree {
                label,
                children: frame.children,
                text: None,
                span: span_of(frame.open_pos, j + 1),
            };
            validate(&node)?;
            stack.last_mut().unwrap().children.push(node);
        } else {
            if label.is_state() && stack.iter().any(|f| f.label.is_state()) {
                return Err(AnnotationError::NestedState { pos: tag_pos });
            }
            stack.push(Frame {
                label,
                open_pos: tag_pos,
                children: Vec::new(),
            });
        }
        i = j + 1;
        text_start = i;
    }
    flush_text(&mut stack, text_start, end);
    if stack.len() > 1 {
        let open = stack.last().unwrap();
        return Err(AnnotationError::UnbalancedTag {
            pos: open.open_pos,
            detail: format!("<{}> is never closed", open.label),
        });
    }
    Ok(Paragraph {
        index,
        nodes: stack.pop().unwrap().children,
        span: span_of(start, end),
    })
}

fn validate(node: &AnnotationTree) -> Result<(), AnnotationError> {
    if node.label == TagLabel::Control
        && !node.has_descendant(&|c| matches!(c.label, TagLabel::Condition | TagLabel::Action))
    {
        return Err(AnnotationError::EmptyControl {
            pos: node.span.start,
        });
    }
    Ok(())
}

/// Renders trees back to tagged text, tokens separated by single spaces and
/// paragraphs by a blank line.
pub fn render_annotated(paragraphs: &[Paragraph]) -> String {
    paragraphs
        .iter()
        .map(|p| {
            let mut parts = Vec::new();
            p.nodes.iter().for_each(|n| n.render_into(&mut parts));
            parts.join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// A direct tagged child of a control node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub label: TagLabel,
    pub tree: AnnotationTree,
}

/// A control node with its tagged children and the untagged tokens around
/// them. `gaps[i]` holds the tokens before component `i`; the last entry
/// holds the trailing tokens, so `gaps.len() == components.len() + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtlBlock {
    pub id: usize,
    pub paragraph: usize,
    pub parent: Option<usize>,
    pub tree: AnnotationTree,
    pub components: Vec<Component>,
    pub gaps: Vec<Vec<String>>,
}

impl CtlBlock {
    fn from_tree(
        tree: &AnnotationTree,
        id: usize,
        paragraph: usize,
        parent: Option<usize>,
    ) -> Self {
        let mut components = Vec::new();
        let mut gaps = vec![Vec::new()];
        for child in &tree.children {
            match &child.text {
                Some(t) => gaps.last_mut().unwrap().push(t.clone()),
                None => {
                    components.push(Component {
                        label: child.label,
                        tree: child.clone(),
                    });
                    gaps.push(Vec::new());
                }
            }
        }
        CtlBlock {
            id,
            paragraph,
            parent,
            tree: tree.clone(),
            components,
            gaps,
        }
    }

    pub fn components_with(&self, label: TagLabel) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(move |c| c.label == label)
    }
}

/// Control blocks of one paragraph in pre-order, numbered from `first_id`.
pub fn extract_ctl_blocks(paragraph: &Paragraph, first_id: usize) -> Vec<CtlBlock> {
    fn walk(
        t: &AnnotationTree,
        paragraph: usize,
        parent: Option<usize>,
        next: &mut usize,
        out: &mut Vec<CtlBlock>,
    ) {
        let mut parent = parent;
        if t.label == TagLabel::Control {
            let id = *next;
            *next += 1;
            out.push(CtlBlock::from_tree(t, id, paragraph, parent));
            parent = Some(id);
        }
        for c in &t.children {
            walk(c, paragraph, parent, next, out);
        }
    }
    let mut out = Vec::new();
    let mut next = first_id;
    for n in &paragraph.nodes {
        walk(n, paragraph.index, None, &mut next, &mut out);
    }
    out
}

/// Control blocks of a whole document with document-wide ids.
pub fn extract_all_blocks(paragraphs: &[Paragraph]) -> Vec<CtlBlock> {
    let mut out = Vec::new();
    for p in paragraphs {
        let first = out.len();
        out.extend(extract_ctl_blocks(p, first));
    }
    out
}
