//! The line-oriented outline format for attack forests (`.atk` files).
//!
//! A document holds one or more trees:
//!
//! ```text
//! # comment
//! tree: C.7.1
//! asset: signing-keys
//! property: integrity
//! goal: Modification of the Certificate Signing Keys [8/2/6]
//! 1. Exploit a service running with elevated privileges AND [8/2/6]
//! 2. Access the serial connection [6/2/8] -> C.7.2:1.2
//! ```
//!
//! Node lines are `<outline>. <title>` followed by any of: an `[E/R/G]`
//! value, the `AND` marker (before or after the value), a `-> tree:outline`
//! cross-reference, and a trailing `@tag,tag` list. Depth comes from the
//! outline number's segment count; indentation is cosmetic. A parent is an
//! AND node exactly when every child but the last carries the marker, an OR
//! node when none does; anything in between is an error rather than a
//! warning, since a half-marked group usually means a transcription slip.
//! An optional `title:` header names the tree when it differs from the goal
//! title.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{
    AttackNode, AttackTree, Combinator, Forest, ModelError, NodeId, Outline, ProtectionProperty,
    RiskTriple, Tag,
};

/// Position of a parsed node or a parse error in its source document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SourceSpan {
    pub file: String,
    /// 1-based line number.
    pub line: usize,
    /// 1-based column of the offending or defining token.
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    BadOutlineNumber,
    BadTriple,
    MixedAndMarking,
    UnknownHeader,
    BadRef,
    BadTag,
    BadTitle,
    MissingHeader,
    DuplicateTree,
}

impl ParseErrorKind {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ParseErrorKind::BadOutlineNumber => "bad-outline-number",
            ParseErrorKind::BadTriple => "bad-triple",
            ParseErrorKind::MixedAndMarking => "mixed-and-marking",
            ParseErrorKind::UnknownHeader => "unknown-header",
            ParseErrorKind::BadRef => "bad-ref",
            ParseErrorKind::BadTag => "bad-tag",
            ParseErrorKind::BadTitle => "bad-title",
            ParseErrorKind::MissingHeader => "missing-header",
            ParseErrorKind::DuplicateTree => "duplicate-tree",
        }
    }
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.span, self.kind, self.message)
    }
}

impl std::error::Error for ParseError {}

/// A parsed forest plus the source position of every node, for error
/// reporting after parsing.
#[derive(Debug, Clone)]
pub struct ParsedForest {
    pub forest: Forest,
    pub spans: BTreeMap<NodeId, SourceSpan>,
}

struct NodeDraft {
    outline: Vec<u32>,
    title: String,
    recorded: Option<RiskTriple>,
    reference: Option<NodeId>,
    tags: BTreeSet<Tag>,
    and_marker: bool,
    children: Vec<NodeDraft>,
    span: SourceSpan,
}

struct TreeDraft {
    id: String,
    span: SourceSpan,
    title: Option<String>,
    asset: Option<String>,
    property: Option<ProtectionProperty>,
    root: Option<NodeDraft>,
    /// Open chain of nodes from depth 1 downwards.
    stack: Vec<NodeDraft>,
}

struct Tail {
    title: String,
    recorded: Option<RiskTriple>,
    reference: Option<NodeId>,
    tags: BTreeSet<Tag>,
    and_marker: bool,
}

/// Parse an outline document into a forest. `file` only labels spans.
pub fn parse_outline(text: &str, file: &str) -> Result<ParsedForest, ParseError> {
    let mut trees: Vec<(TreeDraft, ())> = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    let mut current: Option<TreeDraft> = None;

    let err = |line: usize, column: usize, kind: ParseErrorKind, message: String| ParseError {
        span: SourceSpan {
            file: file.to_string(),
            line,
            column,
        },
        kind,
        message,
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end();
        let trimmed = line.trim_start();
        let indent = line.len() - trimmed.len();
        let col = indent + 1;

        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }

        if trimmed.chars().next().is_some_and(|c| c.is_ascii_digit()) {
            // Outline item line.
            let tree = current.as_mut().ok_or_else(|| {
                err(
                    lineno,
                    col,
                    ParseErrorKind::MissingHeader,
                    "outline item before any `tree:` header".into(),
                )
            })?;
            if tree.root.is_none() {
                return Err(err(
                    lineno,
                    col,
                    ParseErrorKind::MissingHeader,
                    "outline item before the `goal:` line".into(),
                ));
            }

            let (token, rest) = match trimmed.split_once(char::is_whitespace) {
                Some((token, rest)) => (token, rest.trim_start()),
                None => (trimmed, ""),
            };
            let segments = parse_outline_token(token)
                .map_err(|reason| err(lineno, col, ParseErrorKind::BadOutlineNumber, reason))?;

            let tail_col = col + (trimmed.len() - rest.len());
            let tail = parse_tail(rest, file, lineno, tail_col, true)?;
            if tail.title.is_empty() {
                return Err(err(
                    lineno,
                    col,
                    ParseErrorKind::BadTitle,
                    "outline item without a title".into(),
                ));
            }

            place_node(
                tree,
                NodeDraft {
                    outline: segments,
                    title: tail.title,
                    recorded: tail.recorded,
                    reference: tail.reference,
                    tags: tail.tags,
                    and_marker: tail.and_marker,
                    children: Vec::new(),
                    span: SourceSpan {
                        file: file.to_string(),
                        line: lineno,
                        column: col,
                    },
                },
                file,
                lineno,
                col,
            )?;
            continue;
        }

        // Header line.
        let Some((key_raw, value_raw)) = trimmed.split_once(':') else {
            return Err(err(
                lineno,
                col,
                ParseErrorKind::UnknownHeader,
                format!("expected a `key:` header or an outline item, got {trimmed:?}"),
            ));
        };
        let key = key_raw.trim();
        let value = value_raw.trim();
        let value_col = col + key_raw.len() + 1 + (value_raw.len() - value_raw.trim_start().len());

        match key {
            "tree" => {
                if let Some(done) = current.take() {
                    trees.push((done, ()));
                }
                if !seen_ids.insert(value.to_string()) {
                    return Err(err(
                        lineno,
                        col,
                        ParseErrorKind::DuplicateTree,
                        format!("tree {value:?} already defined"),
                    ));
                }
                let _ = value.parse::<NodeId>().map_err(|e| {
                    err(lineno, col, ParseErrorKind::UnknownHeader, e.to_string())
                })?;
                if value.contains(':') {
                    return Err(err(
                        lineno,
                        col,
                        ParseErrorKind::UnknownHeader,
                        "tree id must not contain ':'".into(),
                    ));
                }
                current = Some(TreeDraft {
                    id: value.to_string(),
                    span: SourceSpan {
                        file: file.to_string(),
                        line: lineno,
                        column: col,
                    },
                    title: None,
                    asset: None,
                    property: None,
                    root: None,
                    stack: Vec::new(),
                });
            }
            "title" | "asset" | "property" | "goal" => {
                let tree = current.as_mut().ok_or_else(|| {
                    err(
                        lineno,
                        col,
                        ParseErrorKind::MissingHeader,
                        format!("`{key}:` before any `tree:` header"),
                    )
                })?;
                if tree.root.is_some() {
                    return Err(err(
                        lineno,
                        col,
                        ParseErrorKind::UnknownHeader,
                        format!("`{key}:` after the goal line"),
                    ));
                }
                match key {
                    "title" => tree.title = Some(value.to_string()),
                    "asset" => tree.asset = Some(value.to_string()),
                    "property" => {
                        tree.property = Some(ProtectionProperty::parse(value).map_err(|e| {
                            err(lineno, col, ParseErrorKind::UnknownHeader, e.to_string())
                        })?)
                    }
                    "goal" => {
                        if tree.asset.is_none() || tree.property.is_none() {
                            return Err(err(
                                lineno,
                                col,
                                ParseErrorKind::MissingHeader,
                                "goal requires `asset:` and `property:` headers first".into(),
                            ));
                        }
                        let tail = parse_tail(value, file, lineno, value_col, false)?;
                        if tail.title.is_empty() {
                            return Err(err(
                                lineno,
                                col,
                                ParseErrorKind::BadTitle,
                                "goal without a title".into(),
                            ));
                        }
                        tree.root = Some(NodeDraft {
                            outline: Vec::new(),
                            title: tail.title,
                            recorded: tail.recorded,
                            reference: tail.reference,
                            tags: tail.tags,
                            and_marker: false,
                            children: Vec::new(),
                            span: SourceSpan {
                                file: file.to_string(),
                                line: lineno,
                                column: col,
                            },
                        });
                    }
                    _ => unreachable!(),
                }
            }
            _ => {
                return Err(err(
                    lineno,
                    col,
                    ParseErrorKind::UnknownHeader,
                    format!("unknown header {key:?}"),
                ));
            }
        }
    }
    if let Some(done) = current.take() {
        trees.push((done, ()));
    }

    let mut forest = Forest::new();
    let mut spans = BTreeMap::new();
    for (draft, ()) in trees {
        let tree = finish_tree(draft, &mut spans)?;
        forest
            .insert(tree)
            .expect("duplicate tree ids rejected during parsing");
    }
    Ok(ParsedForest { forest, spans })
}

/// Outline token of an item line: digits separated by dots, trailing dot
/// required, as in `4.3.3.4.`.
fn parse_outline_token(token: &str) -> Result<Vec<u32>, String> {
    let body = token
        .strip_suffix('.')
        .ok_or_else(|| format!("outline number {token:?} must end with '.'"))?;
    if body.is_empty() {
        return Err(format!("empty outline number {token:?}"));
    }
    let mut segments = Vec::new();
    for part in body.split('.') {
        let seg: u32 = part
            .parse()
            .map_err(|_| format!("outline segment {part:?} is not a number"))?;
        if seg == 0 {
            return Err("outline segments start at 1".into());
        }
        segments.push(seg);
    }
    Ok(segments)
}

/// Strip structural suffixes off a node line, right to left: a trailing
/// `@tag,tag` list, then a `-> target` reference, then the `AND` marker and
/// the `[E/R/G]` value in either order. Whatever remains is the title.
fn parse_tail(
    rest: &str,
    file: &str,
    lineno: usize,
    base_col: usize,
    allow_and: bool,
) -> Result<Tail, ParseError> {
    let err = |column: usize, kind: ParseErrorKind, message: String| ParseError {
        span: SourceSpan {
            file: file.to_string(),
            line: lineno,
            column,
        },
        kind,
        message,
    };
    let col_of = |remaining: &str, offset: usize| base_col + remaining.len() - offset;

    let mut rest = rest.trim_end();
    let mut tags = BTreeSet::new();
    let mut reference = None;
    let mut recorded = None;
    let mut and_marker = false;

    // Tags come last.
    let last_token_start = rest
        .rfind(char::is_whitespace)
        .map(|i| i + 1)
        .unwrap_or(0);
    if rest[last_token_start..].starts_with('@') {
        let list = &rest[last_token_start + 1..];
        let tag_col = base_col + last_token_start;
        for part in list.split(',') {
            let tag = Tag::parse(part.trim())
                .map_err(|e| err(tag_col, ParseErrorKind::BadTag, e.to_string()))?;
            tags.insert(tag);
        }
        rest = rest[..last_token_start].trim_end();
    }

    // Then a cross-reference.
    if let Some(idx) = rest.rfind("->") {
        let before_ok = rest[..idx].ends_with(char::is_whitespace);
        let target = rest[idx + 2..].trim();
        if before_ok {
            let ref_col = base_col + idx;
            if target.is_empty() || target.contains(char::is_whitespace) {
                return Err(err(
                    ref_col,
                    ParseErrorKind::BadRef,
                    format!("reference target {target:?} must be a single `tree:outline` id"),
                ));
            }
            let id: NodeId = target
                .parse()
                .map_err(|e: ModelError| err(ref_col, ParseErrorKind::BadRef, e.to_string()))?;
            reference = Some(id);
            rest = rest[..idx].trim_end();
        }
    }

    // AND marker and recorded value, at most once each, in either order.
    loop {
        if !and_marker && (rest == "AND" || rest.ends_with(" AND")) {
            and_marker = true;
            rest = rest[..rest.len() - 3].trim_end();
            continue;
        }
        if recorded.is_none() && rest.ends_with(']') {
            let open = rest.rfind('[').ok_or_else(|| {
                err(
                    col_of(rest, 1),
                    ParseErrorKind::BadTriple,
                    "']' without matching '['".into(),
                )
            })?;
            if open > 0 && !rest[..open].ends_with(char::is_whitespace) {
                // Glued to the title; not a value of this node.
                break;
            }
            let triple_col = col_of(rest, rest.len() - open);
            let body = &rest[open + 1..rest.len() - 1];
            recorded = Some(parse_triple(body).map_err(|reason| {
                err(triple_col, ParseErrorKind::BadTriple, reason)
            })?);
            rest = rest[..open].trim_end();
            continue;
        }
        break;
    }

    if and_marker && !allow_and {
        return Err(err(
            base_col,
            ParseErrorKind::MixedAndMarking,
            "AND marker on a root goal line".into(),
        ));
    }

    Ok(Tail {
        title: rest.trim().to_string(),
        recorded,
        reference,
        tags,
        and_marker,
    })
}

fn parse_triple(body: &str) -> Result<RiskTriple, String> {
    let parts: Vec<&str> = body.split('/').collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected three '/'-separated scores, got {body:?}"
        ));
    }
    let mut scores = [0u8; 3];
    for (slot, part) in scores.iter_mut().zip(&parts) {
        let text = part.trim();
        let value: i64 = text
            .parse()
            .map_err(|_| format!("score {text:?} is not an integer"))?;
        *slot = u8::try_from(value).unwrap_or(u8::MAX);
        if !(1..=9).contains(&value) {
            return Err(format!("score {value} is outside the 1..9 scale"));
        }
    }
    RiskTriple::new(scores[0], scores[1], scores[2]).map_err(|e| e.to_string())
}

fn place_node(
    tree: &mut TreeDraft,
    node: NodeDraft,
    file: &str,
    lineno: usize,
    col: usize,
) -> Result<(), ParseError> {
    let err = |kind: ParseErrorKind, message: String| ParseError {
        span: SourceSpan {
            file: file.to_string(),
            line: lineno,
            column: col,
        },
        kind,
        message,
    };

    let depth = node.outline.len();
    if depth > tree.stack.len() + 1 {
        return Err(err(
            ParseErrorKind::BadOutlineNumber,
            format!(
                "outline {} skips a level (current depth {})",
                render_outline(&node.outline),
                tree.stack.len()
            ),
        ));
    }
    // Close deeper open nodes.
    while tree.stack.len() >= depth {
        let done = tree.stack.pop().expect("stack checked non-empty");
        attach(tree, done);
    }

    let parent_outline: &[u32] = tree.stack.last().map(|n| &n.outline[..]).unwrap_or(&[]);
    if node.outline[..depth - 1] != *parent_outline {
        return Err(err(
            ParseErrorKind::BadOutlineNumber,
            format!(
                "outline {} does not extend its parent {}",
                render_outline(&node.outline),
                if parent_outline.is_empty() {
                    "the goal".to_string()
                } else {
                    render_outline(parent_outline)
                }
            ),
        ));
    }

    let siblings = match tree.stack.last() {
        Some(parent) => &parent.children,
        None => &tree.root.as_ref().expect("goal checked above").children,
    };
    if let Some(prev) = siblings.last() {
        let prev_seg = *prev.outline.last().expect("sibling outlines non-empty");
        let this_seg = *node.outline.last().expect("depth >= 1");
        if this_seg <= prev_seg {
            return Err(err(
                ParseErrorKind::BadOutlineNumber,
                format!(
                    "outline {} does not increase over sibling {}",
                    render_outline(&node.outline),
                    render_outline(&prev.outline)
                ),
            ));
        }
    }

    tree.stack.push(node);
    Ok(())
}

fn attach(tree: &mut TreeDraft, node: NodeDraft) {
    match tree.stack.last_mut() {
        Some(parent) => parent.children.push(node),
        None => tree
            .root
            .as_mut()
            .expect("goal precedes items")
            .children
            .push(node),
    }
}

fn render_outline(segments: &[u32]) -> String {
    segments
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(".")
}

fn finish_tree(
    mut draft: TreeDraft,
    spans: &mut BTreeMap<NodeId, SourceSpan>,
) -> Result<AttackTree, ParseError> {
    while let Some(done) = draft.stack.pop() {
        attach(&mut draft, done);
    }
    let root_draft = draft.root.ok_or(ParseError {
        span: draft.span.clone(),
        kind: ParseErrorKind::MissingHeader,
        message: format!("tree {:?} has no `goal:` line", draft.id),
    })?;

    let root = finish_node(root_draft, &draft.id, spans)?;
    Ok(AttackTree {
        id: draft.id.clone(),
        title: draft.title.unwrap_or_else(|| root.title.clone()),
        asset: draft.asset.expect("goal line requires asset"),
        property: draft.property.expect("goal line requires property"),
        root,
    })
}

fn finish_node(
    draft: NodeDraft,
    tree_id: &str,
    spans: &mut BTreeMap<NodeId, SourceSpan>,
) -> Result<AttackNode, ParseError> {
    let combinator = infer_combinator(&draft)?;
    let id = NodeId::new(
        tree_id,
        Outline::from_segments(draft.outline).expect("outline segments validated"),
    );
    spans.insert(id.clone(), draft.span);

    let mut children = Vec::with_capacity(draft.children.len());
    for child in draft.children {
        children.push(finish_node(child, tree_id, spans)?);
    }

    Ok(AttackNode {
        id,
        title: draft.title,
        combinator,
        recorded: draft.recorded,
        reference: draft.reference,
        tags: draft.tags,
        children,
    })
}

/// AND exactly when every child but the last carries the marker, OR when
/// none does; any other pattern is an error.
fn infer_combinator(node: &NodeDraft) -> Result<Combinator, ParseError> {
    let children = &node.children;
    if children.is_empty() {
        return Ok(Combinator::Leaf);
    }
    let markers: Vec<bool> = children.iter().map(|c| c.and_marker).collect();
    if markers.iter().all(|&m| !m) {
        return Ok(Combinator::Or);
    }
    let (last, init) = markers.split_last().expect("non-empty");
    if !last && init.iter().all(|&m| m) && !init.is_empty() {
        return Ok(Combinator::And);
    }
    // Point at a line that holds an offending AND token.
    let offender = if *last {
        children.last().expect("non-empty")
    } else {
        children
            .iter()
            .find(|c| c.and_marker)
            .expect("some marker set")
    };
    Err(ParseError {
        span: offender.span.clone(),
        kind: ParseErrorKind::MixedAndMarking,
        message: format!(
            "children of {} mix AND markers: every child but the last must carry one",
            if node.outline.is_empty() {
                "the goal".to_string()
            } else {
                render_outline(&node.outline)
            }
        ),
    })
}

/// Emit a forest in the outline format. Parsing the result yields a forest
/// structurally identical to the input, provided it validates cleanly.
pub fn emit_outline(forest: &Forest) -> String {
    let mut out = String::new();
    for (i, tree) in forest.trees().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("tree: {}\n", tree.id));
        if tree.title != tree.root.title {
            out.push_str(&format!("title: {}\n", tree.title));
        }
        out.push_str(&format!("asset: {}\n", tree.asset));
        out.push_str(&format!("property: {}\n", tree.property));
        out.push_str(&format!(
            "goal: {}{}\n",
            tree.root.title,
            suffixes(&tree.root, false)
        ));
        for (idx, child) in tree.root.children.iter().enumerate() {
            emit_node(
                &mut out,
                child,
                tree.root.combinator == Combinator::And
                    && idx + 1 < tree.root.children.len(),
            );
        }
    }
    out
}

fn emit_node(out: &mut String, node: &AttackNode, and_marker: bool) {
    let depth = node.id.outline.depth();
    let indent = "  ".repeat(depth.saturating_sub(1));
    out.push_str(&format!(
        "{indent}{}. {}{}\n",
        node.id.outline,
        node.title,
        suffixes(node, and_marker)
    ));
    for (idx, child) in node.children.iter().enumerate() {
        emit_node(
            out,
            child,
            node.combinator == Combinator::And && idx + 1 < node.children.len(),
        );
    }
}

fn suffixes(node: &AttackNode, and_marker: bool) -> String {
    let mut out = String::new();
    if let Some(triple) = &node.recorded {
        out.push_str(&format!(" [{triple}]"));
    }
    if and_marker {
        out.push_str(" AND");
    }
    if let Some(reference) = &node.reference {
        out.push_str(&format!(" -> {reference}"));
    }
    if !node.tags.is_empty() {
        let tags: Vec<String> = node.tags.iter().map(|t| t.to_string()).collect();
        out.push_str(&format!(" @{}", tags.join(",")));
    }
    out
}
