//! JavaScript front end for the logic-expression subset: lexing, parsing,
//! canonical printing and conversion to and from grammar-typed trees.

mod convert;
mod lexer;
mod parser;
mod printer;

use std::fmt;

use thiserror::Error;

pub use convert::{to_abstract, to_concrete, AbstractNode, Child, ConvertError, Token};
pub use lexer::tokenize;
pub use parser::parse_js;
pub use printer::print_js;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsErrorKind {
    Lexical,
    Syntax,
    Unsupported,
    UnbalancedTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?} at {}..{}: {message}", span.start, span.end)]
pub struct JsError {
    pub kind: JsErrorKind,
    pub message: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    StrictEqual,
    NotStrictEqual,
    Equal,
    NotEqual,
    Less,
    LessEqual,
    Greater,
    GreaterEqual,
    Plus,
    Minus,
    Times,
    Divide,
    Modulo,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 13] = [
        BinaryOp::StrictEqual,
        BinaryOp::NotStrictEqual,
        BinaryOp::Equal,
        BinaryOp::NotEqual,
        BinaryOp::Less,
        BinaryOp::LessEqual,
        BinaryOp::Greater,
        BinaryOp::GreaterEqual,
        BinaryOp::Plus,
        BinaryOp::Minus,
        BinaryOp::Times,
        BinaryOp::Divide,
        BinaryOp::Modulo,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::StrictEqual => "===",
            BinaryOp::NotStrictEqual => "!==",
            BinaryOp::Equal => "==",
            BinaryOp::NotEqual => "!=",
            BinaryOp::Less => "<",
            BinaryOp::LessEqual => "<=",
            BinaryOp::Greater => ">",
            BinaryOp::GreaterEqual => ">=",
            BinaryOp::Plus => "+",
            BinaryOp::Minus => "-",
            BinaryOp::Times => "*",
            BinaryOp::Divide => "/",
            BinaryOp::Modulo => "%",
        }
    }

    /// Constructor name in the shipped grammar.
    pub fn ctor_name(self) -> &'static str {
        match self {
            BinaryOp::StrictEqual => "StrictEqual",
            BinaryOp::NotStrictEqual => "NotStrictEqual",
            BinaryOp::Equal => "Equal",
            BinaryOp::NotEqual => "NotEqual",
            BinaryOp::Less => "Less",
            BinaryOp::LessEqual => "LessEqual",
            BinaryOp::Greater => "Greater",
            BinaryOp::GreaterEqual => "GreaterEqual",
            BinaryOp::Plus => "Plus",
            BinaryOp::Minus => "Minus",
            BinaryOp::Times => "Times",
            BinaryOp::Divide => "Divide",
            BinaryOp::Modulo => "Modulo",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::StrictEqual
            | BinaryOp::NotStrictEqual
            | BinaryOp::Equal
            | BinaryOp::NotEqual => 5,
            BinaryOp::Less | BinaryOp::LessEqual | BinaryOp::Greater | BinaryOp::GreaterEqual => 6,
            BinaryOp::Plus | BinaryOp::Minus => 7,
            BinaryOp::Times | BinaryOp::Divide | BinaryOp::Modulo => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogicalOp {
    And,
    Or,
    NullishCoalescing,
}

impl LogicalOp {
    pub const ALL: [LogicalOp; 3] = [LogicalOp::And, LogicalOp::Or, LogicalOp::NullishCoalescing];

    pub fn symbol(self) -> &'static str {
        match self {
            LogicalOp::And => "&&",
            LogicalOp::Or => "||",
            LogicalOp::NullishCoalescing => "??",
        }
    }

    pub fn ctor_name(self) -> &'static str {
        match self {
            LogicalOp::And => "And",
            LogicalOp::Or => "Or",
            LogicalOp::NullishCoalescing => "NullishCoalescing",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            LogicalOp::NullishCoalescing => 2,
            LogicalOp::Or => 3,
            LogicalOp::And => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Negative,
    Positive,
    TypeOf,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 4] = [
        UnaryOp::Not,
        UnaryOp::Negative,
        UnaryOp::Positive,
        UnaryOp::TypeOf,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Not => "!",
            UnaryOp::Negative => "-",
            UnaryOp::Positive => "+",
            UnaryOp::TypeOf => "typeof",
        }
    }

    pub fn ctor_name(self) -> &'static str {
        match self {
            UnaryOp::Not => "Not",
            UnaryOp::Negative => "Negative",
            UnaryOp::Positive => "Positive",
            UnaryOp::TypeOf => "TypeOf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LiteralValue {
    String(String),
    /// Canonical numeric spelling.
    Number(String),
    Boolean(bool),
    Null,
}

/// Concrete syntax tree, shaped after the Mozilla Parser API node kinds the
/// grammar covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConcreteNode {
    BlockStatement {
        body: Vec<ConcreteNode>,
    },
    ExpressionStatement {
        expression: Box<ConcreteNode>,
    },
    BreakStatement {
        label: Option<Box<ConcreteNode>>,
    },
    Identifier {
        name: String,
    },
    Literal {
        value: LiteralValue,
    },
    /// `quasis.len() == expressions.len() + 1`.
    TemplateLiteral {
        quasis: Vec<String>,
        expressions: Vec<ConcreteNode>,
    },
    ConditionalExpression {
        test: Box<ConcreteNode>,
        consequent: Box<ConcreteNode>,
        alternate: Box<ConcreteNode>,
    },
    BinaryExpression {
        operator: BinaryOp,
        left: Box<ConcreteNode>,
        right: Box<ConcreteNode>,
    },
    LogicalExpression {
        operator: LogicalOp,
        left: Box<ConcreteNode>,
        right: Box<ConcreteNode>,
    },
    UnaryExpression {
        operator: UnaryOp,
        argument: Box<ConcreteNode>,
    },
    MemberExpression {
        object: Box<ConcreteNode>,
        property: Box<ConcreteNode>,
        computed: bool,
    },
    CallExpression {
        callee: Box<ConcreteNode>,
        arguments: Vec<ConcreteNode>,
    },
}

impl ConcreteNode {
    pub fn ident(name: impl Into<String>) -> ConcreteNode {
        ConcreteNode::Identifier { name: name.into() }
    }

    pub fn string(value: impl Into<String>) -> ConcreteNode {
        ConcreteNode::Literal {
            value: LiteralValue::String(value.into()),
        }
    }

    /// Wraps an expression as `{ expr; }`.
    pub fn block_of(expression: ConcreteNode) -> ConcreteNode {
        ConcreteNode::BlockStatement {
            body: vec![ConcreteNode::ExpressionStatement {
                expression: Box::new(expression),
            }],
        }
    }

    pub fn is_statement(&self) -> bool {
        matches!(
            self,
            ConcreteNode::BlockStatement { .. }
                | ConcreteNode::ExpressionStatement { .. }
                | ConcreteNode::BreakStatement { .. }
        )
    }

    /// Every identifier name in the tree in source order, member properties
    /// included.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let ConcreteNode::Identifier { name } = n {
                out.push(name.as_str());
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a ConcreteNode)) {
        f(self);
        match self {
            ConcreteNode::BlockStatement { body } => body.iter().for_each(|n| n.walk(f)),
            ConcreteNode::ExpressionStatement { expression } => expression.walk(f),
            ConcreteNode::BreakStatement { label } => {
                if let Some(l) = label {
                    l.walk(f)
                }
            }
            ConcreteNode::Identifier { .. } | ConcreteNode::Literal { .. } => {}
            ConcreteNode::TemplateLiteral { expressions, .. } => {
                expressions.iter().for_each(|n| n.walk(f))
            }
            ConcreteNode::ConditionalExpression {
                test,
                consequent,
                alternate,
            } => {
                test.walk(f);
                consequent.walk(f);
                alternate.walk(f);
            }
            ConcreteNode::BinaryExpression { left, right, .. }
            | ConcreteNode::LogicalExpression { left, right, .. } => {
                left.walk(f);
                right.walk(f);
            }
            ConcreteNode::UnaryExpression { argument, .. } => argument.walk(f),
            ConcreteNode::MemberExpression {
                object, property, ..
            } => {
                object.walk(f);
                property.walk(f);
            }
            ConcreteNode::CallExpression { callee, arguments } => {
                callee.walk(f);
                arguments.iter().for_each(|n| n.walk(f));
            }
        }
    }
}

impl fmt::Display for ConcreteNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_js(self))
    }
}

const RESERVED: &[&str] = &[
    "await",
    "break",
    "case",
    "catch",
    "class",
    "const",
    "continue",
    "debugger",
    "default",
    "delete",
    "do",
    "else",
    "enum",
    "export",
    "extends",
    "false",
    "finally",
    "for",
    "function",
    "if",
    "import",
    "in",
    "instanceof",
    "new",
    "null",
    "return",
    "super",
    "switch",
    "this",
    "throw",
    "true",
    "try",
    "typeof",
    "var",
    "void",
    "while",
    "with",
    "yield",
    "let",
    "static",
    "implements",
    "interface",
    "package",
    "private",
    "protected",
    "public",
];

pub fn is_reserved_word(s: &str) -> bool {
    RESERVED.contains(&s)
}

/// Syntactically an IdentifierName (reserved words allowed).
pub fn is_identifier_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if lexer::is_id_start(c) => chars.all(lexer::is_id_continue),
        _ => false,
    }
}

/// An IdentifierName usable as a variable reference.
pub fn is_identifier(s: &str) -> bool {
    is_identifier_name(s) && !is_reserved_word(s)
}

/// `print_js(parse_js(source))`.
pub fn canonicalize(source: &str) -> Result<String, JsError> {
    Ok(print_js(&parse_js(source)?))
}
