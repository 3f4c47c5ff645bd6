//! Random concrete trees for property tests.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use subtranx::jsfront::{BinaryOp, ConcreteNode, LiteralValue, LogicalOp, UnaryOp};

const WORDS: &[&str] = &[
    "user", "nick", "price", "live", "time", "desc", "url", "pic", "a", "x1", "data", "status",
];
const PIECES: &[&str] = &[
    "满",
    "元",
    "使用",
    "live",
    "已抵扣",
    " ",
    "a b",
    "it's",
    "\"q\"",
    "back\\slash",
    "$",
    "{",
    "",
    "x\ny",
];
const NUMBERS: &[&str] = &["0", "1", "2", "42", "3.5", "0.25", "100"];

pub fn ident(rng: &mut impl Rng) -> String {
    let parts = rng.gen_range(1..=3);
    let snake = rng.gen_bool(0.2);
    let mut out = String::new();
    for i in 0..parts {
        let w = WORDS.choose(rng).unwrap();
        if i == 0 {
            out.push_str(w);
        } else if snake {
            out.push('_');
            out.push_str(w);
        } else {
            let mut cs = w.chars();
            out.extend(cs.next().map(|c| c.to_ascii_uppercase()));
            out.push_str(cs.as_str());
        }
    }
    out
}

fn text(rng: &mut impl Rng) -> String {
    (0..rng.gen_range(0..3))
        .map(|_| *PIECES.choose(rng).unwrap())
        .collect()
}

fn leaf(rng: &mut impl Rng) -> ConcreteNode {
    let value = match rng.gen_range(0..7) {
        0..=2 => return ConcreteNode::ident(ident(rng)),
        3 | 4 => LiteralValue::String(text(rng)),
        5 => LiteralValue::Number(NUMBERS.choose(rng).unwrap().to_string()),
        _ => match rng.gen_range(0..3) {
            0 => LiteralValue::Null,
            k => LiteralValue::Boolean(k == 1),
        },
    };
    ConcreteNode::Literal { value }
}

pub fn expr(rng: &mut impl Rng, depth: usize) -> ConcreteNode {
    if depth == 0 || rng.gen_bool(0.25) {
        return leaf(rng);
    }
    let d = depth - 1;
    let b = |rng: &mut _| Box::new(expr(rng, d));
    match rng.gen_range(0..7) {
        0 => ConcreteNode::BinaryExpression {
            operator: *BinaryOp::ALL.choose(rng).unwrap(),
            left: b(rng),
            right: b(rng),
        },
        1 => ConcreteNode::LogicalExpression {
            operator: *LogicalOp::ALL.choose(rng).unwrap(),
            left: b(rng),
            right: b(rng),
        },
        2 => ConcreteNode::UnaryExpression {
            operator: *UnaryOp::ALL.choose(rng).unwrap(),
            argument: b(rng),
        },
        3 => ConcreteNode::ConditionalExpression {
            test: b(rng),
            consequent: b(rng),
            alternate: b(rng),
        },
        4 => {
            let computed = rng.gen_bool(0.4);
            let property = if computed {
                b(rng)
            } else {
                Box::new(ConcreteNode::ident(ident(rng)))
            };
            ConcreteNode::MemberExpression {
                object: b(rng),
                property,
                computed,
            }
        }
        5 => ConcreteNode::CallExpression {
            callee: b(rng),
            arguments: (0..rng.gen_range(0..3)).map(|_| expr(rng, d)).collect(),
        },
        _ => {
            let n = rng.gen_range(0..3);
            ConcreteNode::TemplateLiteral {
                quasis: (0..=n)
                    .map(|_| text(rng).replace(['`', '$', '\\'], ""))
                    .collect(),
                expressions: (0..n).map(|_| expr(rng, d)).collect(),
            }
        }
    }
}

/// A block of one or two statements, like the platform's `{ ... }` bindings.
pub fn program(rng: &mut impl Rng, depth: usize) -> ConcreteNode {
    let n = if rng.gen_bool(0.85) { 1 } else { 2 };
    let body = (0..n)
        .map(|_| {
            if rng.gen_bool(0.05) {
                ConcreteNode::BreakStatement { label: None }
            } else {
                ConcreteNode::ExpressionStatement {
                    expression: Box::new(expr(rng, depth)),
                }
            }
        })
        .collect();
    ConcreteNode::BlockStatement { body }
}
