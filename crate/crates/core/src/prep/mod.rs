//! Corpus preprocessing: canonical code, string-literal placeholders, member
//! access simplification, description tokenization and the shared
//! vocabulary.

pub mod subtoken;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::Grammar;
use crate::jsfront::{self, parse_js, print_js, to_abstract, ConcreteNode, JsError, LiteralValue};
use crate::transit::{self, Action, EOS, EOT, SOS, UNK};

pub use subtoken::{join_subtokens, split_string, subtokenize};

pub const PAD: &str = "<pad>";

/// Placeholders with a reserved vocabulary slot.
pub const MAX_PLACEHOLDERS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    STE,
    OLE,
    CE,
    DPE,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::STE, Category::OLE, Category::CE, Category::DPE];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::STE => "STE",
            Category::OLE => "OLE",
            Category::CE => "CE",
            Category::DPE => "DPE",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Main,
    AuxCg,
    AuxVp,
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub description: String,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub literals: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "is_main")]
    pub provenance: Provenance,
}

fn is_main(p: &Provenance) -> bool {
    *p == Provenance::Main
}

impl Record {
    pub fn new(description: impl Into<String>, code: impl Into<String>) -> Record {
        Record {
            description: description.into(),
            code: code.into(),
            category: None,
            literals: BTreeMap::new(),
            provenance: Provenance::Main,
        }
    }
}

/// A tokenized training or test pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub description: Vec<String>,
    pub code: String,
    pub category: Option<Category>,
    pub provenance: Provenance,
    pub placeholder_map: BTreeMap<String, String>,
}

impl Example {
    pub fn from_record(r: &Record) -> Example {
        Example {
            description: tokenize_description(&r.description),
            code: r.code.clone(),
            category: r.category,
            provenance: r.provenance,
            placeholder_map: r.literals.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(r: impl BufRead) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn placeholder(k: usize) -> String {
    format!("<STR{k}>")
}

/// Length in bytes of a `<STRk>` placeholder at the start of `s`.
fn placeholder_len(s: &str) -> Option<usize> {
    let rest = s.strip_prefix("<STR")?;
    let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || rest.as_bytes().get(digits) != Some(&b'>') {
        return None;
    }
    Some(4 + digits + 1)
}

fn placeholder_number(s: &str) -> Option<usize> {
    if placeholder_len(s) != Some(s.len()) {
        return None;
    }
    s[4..s.len() - 1].parse().ok()
}

pub fn is_placeholder(s: &str) -> bool {
    placeholder_len(s) == Some(s.len())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replacement {
    pub description: String,
    pub code: String,
    pub placeholder_map: BTreeMap<String, String>,
    /// Literals that do not occur in the description and were kept.
    pub unmatched: Vec<String>,
}

/// String constants in source order; template quasis count segment-wise.
fn string_constants(node: &ConcreteNode, out: &mut Vec<String>) {
    match node {
        ConcreteNode::Literal {
            value: LiteralValue::String(s),
        } => out.push(s.clone()),
        ConcreteNode::TemplateLiteral {
            quasis,
            expressions,
        } => {
            for (i, q) in quasis.iter().enumerate() {
                out.push(q.clone());
                if let Some(e) = expressions.get(i) {
                    string_constants(e, out);
                }
            }
        }
        _ => for_each_child(node, |c| string_constants(c, out)),
    }
}

fn for_each_child<'a>(node: &'a ConcreteNode, mut f: impl FnMut(&'a ConcreteNode)) {
    match node {
        ConcreteNode::BlockStatement { body } => body.iter().for_each(f),
        ConcreteNode::ExpressionStatement { expression } => f(expression),
        ConcreteNode::BreakStatement { label } => {
            if let Some(l) = label {
                f(l)
            }
        }
        ConcreteNode::Identifier { .. } | ConcreteNode::Literal { .. } => {}
        ConcreteNode::TemplateLiteral { expressions, .. } => expressions.iter().for_each(f),
        ConcreteNode::ConditionalExpression {
            test,
            consequent,
            alternate,
        } => {
            f(test);
            f(consequent);
            f(alternate);
        }
        ConcreteNode::BinaryExpression { left, right, .. }
        | ConcreteNode::LogicalExpression { left, right, .. } => {
            f(left);
            f(right);
        }
        ConcreteNode::UnaryExpression { argument, .. } => f(argument),
        ConcreteNode::MemberExpression {
            object, property, ..
        } => {
            f(object);
            f(property);
        }
        ConcreteNode::CallExpression { callee, arguments } => {
            f(callee);
            arguments.iter().for_each(f);
        }
    }
}

fn map_children(
    node: ConcreteNode,
    f: &mut impl FnMut(ConcreteNode) -> ConcreteNode,
) -> ConcreteNode {
    let mut bx = |b: Box<ConcreteNode>| Box::new(f(*b));
    match node {
        ConcreteNode::BlockStatement { body } => ConcreteNode::BlockStatement {
            body: body.into_iter().map(&mut *f).collect(),
        },
        ConcreteNode::ExpressionStatement { expression } => ConcreteNode::ExpressionStatement {
            expression: bx(expression),
        },
        ConcreteNode::BreakStatement { label } => ConcreteNode::BreakStatement {
            label: label.map(bx),
        },
        leaf @ (ConcreteNode::Identifier { .. } | ConcreteNode::Literal { .. }) => leaf,
        ConcreteNode::TemplateLiteral {
            quasis,
            expressions,
        } => ConcreteNode::TemplateLiteral {
            quasis,
            expressions: expressions.into_iter().map(&mut *f).collect(),
        },
        ConcreteNode::ConditionalExpression {
            test,
            consequent,
            alternate,
        } => ConcreteNode::ConditionalExpression {
            test: bx(test),
            consequent: bx(consequent),
            alternate: bx(alternate),
        },
        ConcreteNode::BinaryExpression {
            operator,
            left,
            right,
        } => ConcreteNode::BinaryExpression {
            operator,
            left: bx(left),
            right: bx(right),
        },
        ConcreteNode::LogicalExpression {
            operator,
            left,
            right,
        } => ConcreteNode::LogicalExpression {
            operator,
            left: bx(left),
            right: bx(right),
        },
        ConcreteNode::UnaryExpression { operator, argument } => ConcreteNode::UnaryExpression {
            operator,
            argument: bx(argument),
        },
        ConcreteNode::MemberExpression {
            object,
            property,
            computed,
        } => ConcreteNode::MemberExpression {
            object: bx(object),
            property: bx(property),
            computed,
        },
        ConcreteNode::CallExpression { callee, arguments } => ConcreteNode::CallExpression {
            callee: bx(callee),
            arguments: arguments.into_iter().map(&mut *f).collect(),
        },
    }
}

fn substitute_strings(node: ConcreteNode, map: &HashMap<&str, String>) -> ConcreteNode {
    match node {
        ConcreteNode::Literal {
            value: LiteralValue::String(s),
        } => ConcreteNode::string(map.get(s.as_str()).cloned().unwrap_or(s)),
        ConcreteNode::TemplateLiteral {
            quasis,
            expressions,
        } => ConcreteNode::TemplateLiteral {
            quasis: quasis
                .into_iter()
                .map(|q| map.get(q.as_str()).cloned().unwrap_or(q))
                .collect(),
            expressions: expressions
                .into_iter()
                .map(|e| substitute_strings(e, map))
                .collect(),
        },
        other => map_children(other, &mut |c| substitute_strings(c, map)),
    }
}

fn wants_pad(c: char) -> bool {
    c.is_ascii_alphanumeric() || c.is_whitespace()
}

/// Replaces string constants of `code` that occur verbatim in `description`
/// by `<STR1>`, `<STR2>`, ... (numbered in code order) in both texts.
///
/// A placeholder is separated by one space from an adjacent ASCII
/// alphanumeric or whitespace character, so `满xx使用` becomes
/// `<STR1> xx <STR2>`. Whitespace-only constants are never replaced, and
/// constants that already are placeholders are kept as they are.
pub fn replace_string_literals(description: &str, code: &str) -> Result<Replacement, JsError> {
    let tree = parse_js(code)?;
    let mut constants = Vec::new();
    string_constants(&tree, &mut constants);

    let mut distinct: Vec<String> = Vec::new();
    let mut reserved = BTreeSet::new();
    for c in constants {
        if let Some(k) = placeholder_number(&c) {
            reserved.insert(k);
            continue;
        }
        if c.trim().is_empty() || distinct.contains(&c) {
            continue;
        }
        distinct.push(c);
    }

    // Longer constants claim their span first so that a short constant
    // cannot split a longer one.
    let mut by_length: Vec<usize> = (0..distinct.len()).collect();
    by_length.sort_by_key(|&i| std::cmp::Reverse(distinct[i].len()));
    let mut claims: Vec<Option<Range<usize>>> = vec![None; distinct.len()];
    let mut taken: Vec<Range<usize>> = Vec::new();
    for i in by_length {
        let lit = &distinct[i];
        let found = description.match_indices(lit.as_str()).find_map(|(s, _)| {
            let r = s..s + lit.len();
            taken
                .iter()
                .all(|t| r.end <= t.start || t.end <= r.start)
                .then_some(r)
        });
        if let Some(r) = found {
            taken.push(r.clone());
            claims[i] = Some(r);
        }
    }

    let mut next = 1;
    let mut map = BTreeMap::new();
    let mut names: HashMap<&str, String> = HashMap::new();
    let mut spans: Vec<(Range<usize>, String)> = Vec::new();
    let mut unmatched = Vec::new();
    for (lit, claim) in distinct.iter().zip(claims) {
        match claim {
            Some(r) => {
                while reserved.contains(&next) {
                    next += 1;
                }
                let ph = placeholder(next);
                next += 1;
                map.insert(ph.clone(), lit.clone());
                names.insert(lit.as_str(), ph.clone());
                spans.push((r, ph));
            }
            None => unmatched.push(lit.clone()),
        }
    }
    spans.sort_by_key(|(r, _)| r.start);

    let mut desc = String::with_capacity(description.len());
    let mut cursor = 0;
    for (i, (r, ph)) in spans.iter().enumerate() {
        desc.push_str(&description[cursor..r.start]);
        let joined_left = i > 0 && spans[i - 1].0.end == r.start;
        let joined_right = spans.get(i + 1).is_some_and(|(n, _)| n.start == r.end);
        if !joined_left
            && description[..r.start]
                .chars()
                .next_back()
                .is_some_and(wants_pad)
        {
            desc.push(' ');
        }
        desc.push_str(ph);
        if !joined_right && description[r.end..].chars().next().is_some_and(wants_pad) {
            desc.push(' ');
        }
        cursor = r.end;
    }
    desc.push_str(&description[cursor..]);

    let code = print_js(&substitute_strings(tree, &names));
    Ok(Replacement {
        description: desc,
        code,
        placeholder_map: map,
        unmatched,
    })
}

/// Inverse of the description side of [`replace_string_literals`].
pub fn restore_description(description: &str, map: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(description.len());
    let mut last_raw = false;
    let mut skip_space = false;
    let mut rest = description;
    while let Some(c) = rest.chars().next() {
        if let Some(n) = placeholder_len(rest) {
            if let Some(value) = map.get(&rest[..n]) {
                if last_raw && out.ends_with(' ') {
                    out.pop();
                }
                out.push_str(value);
                rest = &rest[n..];
                last_raw = false;
                skip_space = true;
                continue;
            }
        }
        if !(skip_space && c == ' ') {
            out.push(c);
            last_raw = true;
        }
        skip_space = false;
        rest = &rest[c.len_utf8()..];
    }
    out
}

/// Puts the original literals back into placeholder code.
pub fn restore_code(code: &str, map: &BTreeMap<String, String>) -> Result<String, JsError> {
    let lookup: HashMap<&str, String> = map.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    Ok(print_js(&substitute_strings(parse_js(code)?, &lookup)))
}

fn is_static_chain(node: &ConcreteNode) -> bool {
    match node {
        ConcreteNode::Identifier { .. } => true,
        ConcreteNode::MemberExpression {
            object,
            computed: false,
            ..
        } => is_static_chain(object),
        _ => false,
    }
}

fn simplify(node: ConcreteNode, callee: bool) -> ConcreteNode {
    match node {
        ConcreteNode::MemberExpression {
            object,
            property,
            computed: false,
        } if !callee && is_static_chain(&object) => *property,
        ConcreteNode::MemberExpression {
            object,
            property,
            computed,
        } => ConcreteNode::MemberExpression {
            object: Box::new(simplify(*object, false)),
            property: if computed {
                Box::new(simplify(*property, false))
            } else {
                property
            },
            computed,
        },
        ConcreteNode::CallExpression { callee, arguments } => ConcreteNode::CallExpression {
            callee: Box::new(simplify(*callee, true)),
            arguments: arguments.into_iter().map(|a| simplify(a, false)).collect(),
        },
        other => map_children(other, &mut |c| simplify(c, false)),
    }
}

/// Collapses static member chains to their last property. A chain used as
/// a call callee keeps its method: `data.price.split('.')` becomes
/// `price.split('.')`. Bracket access is left alone.
pub fn simplify_member_access(code: &str) -> Result<String, JsError> {
    Ok(print_js(&simplify(parse_js(code)?, false)))
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Token spans of a description: CJK and punctuation characters one by one,
/// ASCII letter/digit runs and `<STRk>` placeholders whole. Whitespace
/// separates tokens and is dropped.
pub fn tokenize_description_spans(text: &str) -> Vec<(String, Range<usize>)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let rest = &text[i..];
        let c = rest.chars().next().unwrap();
        let len = if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        } else if let Some(n) = placeholder_len(rest) {
            n
        } else if is_word_char(c) {
            rest.find(|c: char| !is_word_char(c)).unwrap_or(rest.len())
        } else {
            c.len_utf8()
        };
        out.push((rest[..len].to_string(), i..i + len));
        i += len;
    }
    out
}

pub fn tokenize_description(text: &str) -> Vec<String> {
    tokenize_description_spans(text)
        .into_iter()
        .map(|(t, _)| t)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preprocessed {
    pub record: Record,
    pub unmatched: Vec<String>,
}

/// Canonicalization, literal replacement and member simplification of one
/// record.
pub fn preprocess_record(r: &Record) -> Result<Preprocessed, JsError> {
    let canonical = jsfront::canonicalize(&r.code)?;
    let rep = replace_string_literals(&r.description, &canonical)?;
    let code = simplify_member_access(&rep.code)?;
    let mut literals = r.literals.clone();
    literals.extend(rep.placeholder_map);
    Ok(Preprocessed {
        record: Record {
            description: rep.description,
            code,
            category: r.category,
            literals,
            provenance: r.provenance,
        },
        unmatched: rep.unmatched,
    })
}

/// Subtokens a code text contributes to the vocabulary: the payloads of its
/// oracle derivation, or the split name for bare-identifier codes.
pub fn code_subtokens(code: &str, g: &Grammar, split: bool) -> Vec<String> {
    let derived = parse_js(code)
        .ok()
        .and_then(|c| to_abstract(&c, g).ok())
        .and_then(|a| transit::oracle_actions(&a, g, split).ok());
    match derived {
        Some(actions) => actions
            .into_iter()
            .filter_map(|a| match a {
                Action::GenSubtoken(t) if !transit::is_sentinel(&t) => Some(t),
                _ => None,
            })
            .collect(),
        None if split => subtokenize(code.trim()),
        None => vec![code.trim().to_string()],
    }
}

pub fn reserved_tokens() -> Vec<String> {
    let mut v: Vec<String> = [PAD, UNK, EOT, SOS, EOS]
        .iter()
        .map(|s| s.to_string())
        .collect();
    v.extend((1..=MAX_PLACEHOLDERS).map(placeholder));
    v
}

/// Shared table of description tokens and code subtokens, plus the
/// constructor names of the grammar it was built against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabFile", into = "VocabFile")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    constructors: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    constructors: Vec<String>,
}

impl From<VocabFile> for Vocabulary {
    fn from(f: VocabFile) -> Self {
        Vocabulary::from_tokens(f.tokens, f.constructors)
    }
}

impl From<Vocabulary> for VocabFile {
    fn from(v: Vocabulary) -> Self {
        VocabFile {
            tokens: v.tokens,
            constructors: v.constructors,
        }
    }
}

impl Vocabulary {
    pub const PAD_ID: usize = 0;
    pub const UNK_ID: usize = 1;

    fn from_tokens(tokens: Vec<String>, constructors: Vec<String>) -> Vocabulary {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            index,
            constructors,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, tok: &str) -> Option<usize> {
        self.index.get(tok).copied()
    }

    /// Index of `tok`, or of `<unk>`.
    pub fn id(&self, tok: &str) -> usize {
        self.get(tok).unwrap_or(Self::UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn constructors(&self) -> &[String] {
        &self.constructors
    }

    /// Whether `g` has the constructor table this vocabulary was built with.
    pub fn matches_grammar(&self, g: &Grammar) -> bool {
        self.constructors.len() == g.constructors().len()
            && self
                .constructors
                .iter()
                .zip(g.constructors())
                .all(|(a, c)| *a == c.name)
    }
}

/// Indexes every token seen at least `min_count` times, after the reserved
/// symbols, by descending frequency then lexically.
pub fn build_vocab(examples: &[Example], min_count: usize, g: &Grammar, split: bool) -> Vocabulary {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for ex in examples {
        let code = code_subtokens(&ex.code, g, split);
        for t in ex.description.iter().chain(code.iter()) {
            *counts.entry(t.clone()).or_default() += 1;
        }
    }
    let mut tokens = reserved_tokens();
    let reserved: BTreeSet<String> = tokens.iter().cloned().collect();
    let mut rest: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, n)| *n >= min_count && !reserved.contains(t))
        .collect();
    rest.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    tokens.extend(rest.into_iter().map(|(t, _)| t));
    let constructors = g.constructors().iter().map(|c| c.name.clone()).collect();
    Vocabulary::from_tokens(tokens, constructors)
}
