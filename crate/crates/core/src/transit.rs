//! The transition system: oracle action sequences for trees, replay of
//! action sequences into trees, and per-step legality.
//!
//! A derivation is depth-first and left to right. `ApplyConstr` expands the
//! frontier field, `Reduce` closes an optional or multiple field, and runs of
//! `GenSubtoken` fill primitive fields. Identifier-like leaves end with
//! `<EOT>`; string leaves are bracketed by `<SOS>` and `<EOS>`.

use std::fmt;

use thiserror::Error;

use crate::grammar::{Cardinality, CtorId, FieldId, Grammar};
use crate::jsfront::{AbstractNode, Child, Token};
use crate::prep::subtoken::{join_subtokens, split_string, subtokenize};

pub const EOT: &str = "<EOT>";
pub const SOS: &str = "<SOS>";
pub const EOS: &str = "<EOS>";
pub const UNK: &str = "<unk>";

pub const SENTINELS: [&str; 4] = [EOT, SOS, EOS, UNK];

/// Hard cap on derivation length at decode time.
pub const MAX_ACTIONS: usize = 200;

pub fn is_sentinel(tok: &str) -> bool {
    matches!(tok, EOT | SOS | EOS)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    ApplyConstr(CtorId),
    Reduce,
    GenSubtoken(String),
}

impl Action {
    pub fn gen(tok: impl Into<String>) -> Action {
        Action::GenSubtoken(tok.into())
    }

    pub fn display<'a>(&'a self, g: &'a Grammar) -> impl fmt::Display + 'a {
        ActionDisplay { action: self, g }
    }
}

struct ActionDisplay<'a> {
    action: &'a Action,
    g: &'a Grammar,
}

impl fmt::Display for ActionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.action {
            Action::ApplyConstr(c) => write!(f, "{}", self.g.constructor(*c)),
            Action::Reduce => f.write_str("Reduce"),
            Action::GenSubtoken(t) => write!(f, "GenSubtoken[{t}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitError {
    #[error("illegal action {action} at step {step}: {reason}")]
    IllegalAction {
        step: usize,
        action: String,
        reason: String,
    },
    #[error("derivation incomplete after {0} actions")]
    IncompleteDerivation(usize),
    #[error("tree does not conform to the grammar: {0}")]
    Grammar(String),
    #[error("leaf `{0}` cannot be encoded as subtokens")]
    Unencodable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Buffer {
    Empty,
    Name,
    Str,
}

#[derive(Debug, Clone)]
struct Frame {
    ctor: CtorId,
    children: Vec<Vec<Child>>,
    field: usize,
    /// Label number of the frame's first field.
    label_base: usize,
    /// Step at which the constructor was applied.
    step: usize,
}

/// The frontier field a derivation will fill next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frontier {
    pub field: FieldId,
    pub ty: String,
    pub cardinality: Cardinality,
    /// Items already placed in the field.
    pub emitted: usize,
    /// `None` for the root pseudo-field, otherwise the creation-order number
    /// (`f1`, `f2`, ...).
    pub label: Option<usize>,
    /// Step at which the field's owner was constructed.
    pub parent_step: Option<usize>,
}

impl Frontier {
    pub fn label_text(&self) -> String {
        match self.label {
            None => "root".to_string(),
            Some(k) => format!("f{k}"),
        }
    }
}

/// Which `GenSubtoken` payloads may come next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenRule {
    pub sos: bool,
    pub eos: bool,
    pub eot: bool,
}

/// The set of actions permitted at one step. Plain (non-sentinel) subtokens
/// are allowed exactly when `tokens` is set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegalActions {
    pub constructors: Vec<CtorId>,
    pub reduce: bool,
    pub tokens: Option<TokenRule>,
}

impl LegalActions {
    pub fn none() -> LegalActions {
        LegalActions {
            constructors: Vec::new(),
            reduce: false,
            tokens: None,
        }
    }

    pub fn permits(&self, action: &Action) -> bool {
        match action {
            Action::ApplyConstr(c) => self.constructors.contains(c),
            Action::Reduce => self.reduce,
            Action::GenSubtoken(t) => match self.tokens {
                None => false,
                Some(rule) => match t.as_str() {
                    SOS => rule.sos,
                    EOS => rule.eos,
                    EOT => rule.eot,
                    _ => true,
                },
            },
        }
    }

    pub fn is_empty(&self) -> bool {
        self.constructors.is_empty() && !self.reduce && self.tokens.is_none()
    }
}

/// A partial derivation. Cheap to clone for beam hypotheses.
#[derive(Debug, Clone)]
pub struct FrontierState {
    stack: Vec<Frame>,
    done: Option<AbstractNode>,
    buffer: Vec<String>,
    mode: Buffer,
    next_label: usize,
    steps: usize,
}

impl Default for FrontierState {
    fn default() -> Self {
        Self::new()
    }
}

impl FrontierState {
    pub fn new() -> FrontierState {
        FrontierState {
            stack: Vec::new(),
            done: None,
            buffer: Vec::new(),
            mode: Buffer::Empty,
            next_label: 1,
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_complete(&self) -> bool {
        self.done.is_some()
    }

    pub fn tree(&self) -> Option<&AbstractNode> {
        self.done.as_ref()
    }

    /// Subtokens gathered so far for the current primitive field.
    pub fn pending(&self) -> &[String] {
        &self.buffer
    }

    pub fn frontier(&self, g: &Grammar) -> Option<Frontier> {
        if self.done.is_some() {
            return None;
        }
        match self.stack.last() {
            None => Some(Frontier {
                field: g.root_field(),
                ty: g.root_type().to_string(),
                cardinality: Cardinality::Single,
                emitted: 0,
                label: None,
                parent_step: None,
            }),
            Some(frame) => {
                let field = &g.constructor(frame.ctor).fields[frame.field];
                Some(Frontier {
                    field: g.field_id(frame.ctor, frame.field),
                    ty: field.ty.clone(),
                    cardinality: field.cardinality,
                    emitted: frame.children[frame.field].len(),
                    label: Some(frame.label_base + frame.field),
                    parent_step: Some(frame.step),
                })
            }
        }
    }

    pub fn legal_actions(&self, g: &Grammar) -> LegalActions {
        let Some(front) = self.frontier(g) else {
            return LegalActions::none();
        };
        let closable = self.mode == Buffer::Empty
            && match front.cardinality {
                Cardinality::Single => false,
                Cardinality::Optional => front.emitted == 0,
                Cardinality::Multiple => true,
            };
        if g.is_primitive(&front.ty) {
            let rule = match self.mode {
                Buffer::Empty => TokenRule {
                    sos: accepts_strings(&front.ty),
                    eos: false,
                    eot: false,
                },
                Buffer::Name => TokenRule {
                    sos: false,
                    eos: false,
                    eot: true,
                },
                Buffer::Str => TokenRule {
                    sos: false,
                    eos: true,
                    eot: false,
                },
            };
            LegalActions {
                constructors: Vec::new(),
                reduce: closable,
                tokens: Some(rule),
            }
        } else {
            LegalActions {
                constructors: g
                    .ctor_ids_for_type(&front.ty)
                    .map(|ids| ids.to_vec())
                    .unwrap_or_default(),
                reduce: closable,
                tokens: None,
            }
        }
    }

    /// Applies `action`, rejecting it if it is not legal.
    pub fn apply(&mut self, action: &Action, g: &Grammar) -> Result<(), TransitError> {
        let illegal = |reason: &str| TransitError::IllegalAction {
            step: self.steps,
            action: action.display(g).to_string(),
            reason: reason.to_string(),
        };
        let Some(front) = self.frontier(g) else {
            return Err(illegal("derivation already complete"));
        };
        let legal = self.legal_actions(g);
        if !legal.permits(action) {
            return Err(illegal(&format!("not permitted at frontier {}", front.ty)));
        }
        let step = self.steps;
        self.steps += 1;
        match action {
            Action::ApplyConstr(c) => {
                let n = g.constructor(*c).fields.len();
                self.stack.push(Frame {
                    ctor: *c,
                    children: vec![Vec::new(); n],
                    field: 0,
                    label_base: self.next_label,
                    step,
                });
                self.next_label += n;
                self.settle(g);
            }
            Action::Reduce => {
                let frame = self.stack.last_mut().expect("reduce has a frame");
                frame.field += 1;
                self.settle(g);
            }
            Action::GenSubtoken(tok) => match (self.mode, tok.as_str()) {
                (Buffer::Empty, SOS) => self.mode = Buffer::Str,
                (Buffer::Name, EOT) => {
                    let name = join_subtokens(&self.buffer);
                    self.commit(Token::Name(name), g);
                }
                (Buffer::Str, EOS) => {
                    let text = self.buffer.concat();
                    self.commit(Token::Str(text), g);
                }
                (Buffer::Empty, _) => {
                    self.mode = Buffer::Name;
                    self.buffer.push(tok.clone());
                }
                (_, _) => self.buffer.push(tok.clone()),
            },
        }
        Ok(())
    }

    fn commit(&mut self, token: Token, g: &Grammar) {
        self.buffer.clear();
        self.mode = Buffer::Empty;
        self.place(Child::Token(token), g);
    }

    /// Puts a finished child into the frontier field.
    fn place(&mut self, child: Child, g: &Grammar) {
        match self.stack.last_mut() {
            None => match child {
                Child::Node(n) => self.done = Some(n),
                Child::Token(_) => unreachable!("root field is never primitive"),
            },
            Some(frame) => {
                frame.children[frame.field].push(child);
                let card = g.constructor(frame.ctor).fields[frame.field].cardinality;
                if card != Cardinality::Multiple {
                    frame.field += 1;
                }
                self.settle(g);
            }
        }
    }

    /// Pops every frame whose fields are all closed.
    fn settle(&mut self, g: &Grammar) {
        while let Some(frame) = self.stack.last() {
            if frame.field < g.constructor(frame.ctor).fields.len() {
                return;
            }
            let frame = self.stack.pop().expect("frame present");
            let node = AbstractNode {
                ctor: frame.ctor,
                fields: frame.children,
            };
            match self.stack.last_mut() {
                None => {
                    self.done = Some(node);
                    return;
                }
                Some(parent) => {
                    parent.children[parent.field].push(Child::Node(node));
                    let card = g.constructor(parent.ctor).fields[parent.field].cardinality;
                    if card != Cardinality::Multiple {
                        parent.field += 1;
                    }
                }
            }
        }
    }
}

fn accepts_strings(ty: &str) -> bool {
    ty == "literal"
}

/// Subtoken run for one leaf, terminator included.
fn leaf_run(
    token: &Token,
    field_ty: &str,
    subtokenize_on: bool,
) -> Result<Vec<String>, TransitError> {
    let mut run = Vec::new();
    match token {
        Token::Name(name) => {
            if name.is_empty() {
                return Err(TransitError::Unencodable(name.clone()));
            }
            if subtokenize_on && field_ty == "identifier" {
                run.extend(subtokenize(name));
            } else {
                run.push(name.clone());
            }
            run.push(EOT.to_string());
        }
        Token::Str(text) => {
            run.push(SOS.to_string());
            if subtokenize_on {
                run.extend(split_string(text));
            } else if !text.is_empty() {
                run.push(text.clone());
            }
            run.push(EOS.to_string());
        }
    }
    let content = match token {
        Token::Name(_) => &run[..run.len() - 1],
        Token::Str(_) => &run[1..run.len() - 1],
    };
    if content.iter().any(|p| is_sentinel(p)) {
        return Err(TransitError::Unencodable(token.text().to_string()));
    }
    Ok(run)
}

/// The action sequence deriving `node`.
pub fn oracle_actions(
    node: &AbstractNode,
    g: &Grammar,
    subtokenize_on: bool,
) -> Result<Vec<Action>, TransitError> {
    node.validate(g)
        .map_err(|e| TransitError::Grammar(e.to_string()))?;
    if g.constructor(node.ctor).result_type != g.root_type() {
        return Err(TransitError::Grammar(format!(
            "root constructor must produce {}",
            g.root_type()
        )));
    }
    let mut out = Vec::new();
    derive(node, g, subtokenize_on, &mut out)?;
    Ok(out)
}

fn derive(
    node: &AbstractNode,
    g: &Grammar,
    subtokenize_on: bool,
    out: &mut Vec<Action>,
) -> Result<(), TransitError> {
    out.push(Action::ApplyConstr(node.ctor));
    let ctor = g.constructor(node.ctor);
    for (field, children) in ctor.fields.iter().zip(&node.fields) {
        for child in children {
            match child {
                Child::Node(n) => derive(n, g, subtokenize_on, out)?,
                Child::Token(t) => out.extend(
                    leaf_run(t, &field.ty, subtokenize_on)?
                        .into_iter()
                        .map(Action::GenSubtoken),
                ),
            }
        }
        match field.cardinality {
            Cardinality::Optional if children.is_empty() => out.push(Action::Reduce),
            Cardinality::Multiple => out.push(Action::Reduce),
            _ => {}
        }
    }
    Ok(())
}

/// Rebuilds the tree an action sequence derives.
pub fn replay(actions: &[Action], g: &Grammar) -> Result<AbstractNode, TransitError> {
    let mut state = FrontierState::new();
    for action in actions {
        state.apply(action, g)?;
    }
    state
        .done
        .ok_or(TransitError::IncompleteDerivation(actions.len()))
}

/// One line per action: `t<idx>\t<frontier-field>\t<action>`. Identifier-like
/// subtoken runs share a time index (`t7,1`, `t7,2`, ...).
pub fn dump_actions(actions: &[Action], g: &Grammar) -> Result<String, TransitError> {
    let mut state = FrontierState::new();
    let mut out = String::new();
    let mut t = 0;
    let mut sub = 0;
    for action in actions {
        let front = state.frontier(g).ok_or(TransitError::IllegalAction {
            step: state.steps,
            action: action.display(g).to_string(),
            reason: "derivation already complete".into(),
        })?;
        let in_name_run = match action {
            Action::GenSubtoken(tok) => {
                state.mode == Buffer::Name || (state.mode == Buffer::Empty && tok != SOS)
            }
            _ => false,
        };
        let idx = if in_name_run {
            if sub == 0 {
                t += 1;
            }
            sub += 1;
            format!("{t},{sub}")
        } else {
            sub = 0;
            t += 1;
            t.to_string()
        };
        out.push_str(&format!(
            "t{idx}\t{}\t{}\n",
            front.label_text(),
            action.display(g)
        ));
        state.apply(action, g)?;
        if matches!(action, Action::GenSubtoken(tok) if tok == EOT) {
            sub = 0;
        }
    }
    Ok(out)
}
