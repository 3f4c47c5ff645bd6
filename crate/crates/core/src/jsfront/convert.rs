use thiserror::Error;

use super::{
    is_identifier, is_identifier_name, BinaryOp, ConcreteNode, LiteralValue, LogicalOp, UnaryOp,
};
use crate::grammar::{Cardinality, CtorId, Grammar};

/// A primitive leaf value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    /// Identifier names and unquoted literal spellings (`16`, `true`).
    Name(String),
    /// String contents.
    Str(String),
}

impl Token {
    pub fn text(&self) -> &str {
        match self {
            Token::Name(s) | Token::Str(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Child {
    Node(AbstractNode),
    Token(Token),
}

/// A grammar-typed tree: a constructor plus one child list per field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AbstractNode {
    pub ctor: CtorId,
    pub fields: Vec<Vec<Child>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConvertError {
    #[error("grammar has no constructor for `{0}`")]
    Unsupported(String),
    #[error("tree does not conform to the grammar: {0}")]
    Malformed(String),
    #[error("not a legal JavaScript tree: {0}")]
    IllegalJsAst(String),
}

impl AbstractNode {
    pub fn leaf(ctor: CtorId) -> AbstractNode {
        AbstractNode {
            ctor,
            fields: Vec::new(),
        }
    }

    /// Checks cardinalities and child types against `g`.
    pub fn validate(&self, g: &Grammar) -> Result<(), ConvertError> {
        let ctor = g
            .constructors()
            .get(self.ctor.0)
            .ok_or_else(|| ConvertError::Malformed(format!("constructor id {}", self.ctor.0)))?;
        if ctor.fields.len() != self.fields.len() {
            return Err(ConvertError::Malformed(format!(
                "{} expects {} fields, found {}",
                ctor.name,
                ctor.fields.len(),
                self.fields.len()
            )));
        }
        for (field, children) in ctor.fields.iter().zip(&self.fields) {
            let ok = match field.cardinality {
                Cardinality::Single => children.len() == 1,
                Cardinality::Optional => children.len() <= 1,
                Cardinality::Multiple => true,
            };
            if !ok {
                return Err(ConvertError::Malformed(format!(
                    "{}.{} holds {} children",
                    ctor.name,
                    field.name,
                    children.len()
                )));
            }
            let primitive = g.is_primitive(&field.ty);
            for child in children {
                match child {
                    Child::Token(_) if primitive => {}
                    Child::Node(n) if !primitive => {
                        let child_ctor = g.constructors().get(n.ctor.0).ok_or_else(|| {
                            ConvertError::Malformed(format!("constructor id {}", n.ctor.0))
                        })?;
                        if child_ctor.result_type != field.ty {
                            return Err(ConvertError::Malformed(format!(
                                "{}.{} expects {}, found {}",
                                ctor.name, field.name, field.ty, child_ctor.name
                            )));
                        }
                        n.validate(g)?;
                    }
                    _ => {
                        return Err(ConvertError::Malformed(format!(
                            "{}.{}: leaf/node mismatch",
                            ctor.name, field.name
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of constructor applications in the tree.
    pub fn size(&self) -> usize {
        1 + self
            .fields
            .iter()
            .flatten()
            .map(|c| match c {
                Child::Node(n) => n.size(),
                Child::Token(_) => 0,
            })
            .sum::<usize>()
    }
}

fn ctor(g: &Grammar, name: &str) -> Result<CtorId, ConvertError> {
    g.ctor_id(name)
        .ok_or_else(|| ConvertError::Unsupported(name.to_string()))
}

fn node(n: AbstractNode) -> Child {
    Child::Node(n)
}

/// Maps a concrete tree onto the grammar. Children fill fields in the order
/// the concrete node kind lists them (a conditional's branch taken on a true
/// test fills the second field).
pub fn to_abstract(n: &ConcreteNode, g: &Grammar) -> Result<AbstractNode, ConvertError> {
    let sub = |c: &ConcreteNode| to_abstract(c, g).map(node);
    let many = |cs: &[ConcreteNode]| cs.iter().map(sub).collect::<Result<Vec<_>, _>>();
    let out = match n {
        ConcreteNode::BlockStatement { body } => AbstractNode {
            ctor: ctor(g, "BlockStatement")?,
            fields: vec![many(body)?],
        },
        ConcreteNode::ExpressionStatement { expression } => AbstractNode {
            ctor: ctor(g, "ExpressionStatement")?,
            fields: vec![vec![sub(expression)?]],
        },
        ConcreteNode::BreakStatement { label } => AbstractNode {
            ctor: ctor(g, "BreakStatement")?,
            fields: vec![label.iter().map(|l| sub(l)).collect::<Result<_, _>>()?],
        },
        ConcreteNode::Identifier { name } => AbstractNode {
            ctor: ctor(g, "Identifier")?,
            fields: vec![vec![Child::Token(Token::Name(name.clone()))]],
        },
        ConcreteNode::Literal { value } => {
            let leaf = match value {
                LiteralValue::String(s) => vec![Child::Token(Token::Str(s.clone()))],
                LiteralValue::Number(t) => vec![Child::Token(Token::Name(t.clone()))],
                LiteralValue::Boolean(b) => vec![Child::Token(Token::Name(b.to_string()))],
                LiteralValue::Null => vec![],
            };
            AbstractNode {
                ctor: ctor(g, "Literal")?,
                fields: vec![leaf],
            }
        }
        ConcreteNode::TemplateLiteral {
            quasis,
            expressions,
        } => AbstractNode {
            ctor: ctor(g, "TemplateLiteral")?,
            fields: vec![
                quasis
                    .iter()
                    .map(|q| Child::Token(Token::Str(q.clone())))
                    .collect(),
                many(expressions)?,
            ],
        },
        ConcreteNode::ConditionalExpression {
            test,
            consequent,
            alternate,
        } => AbstractNode {
            ctor: ctor(g, "ConditionalExpression")?,
            fields: vec![
                vec![sub(test)?],
                vec![sub(consequent)?],
                vec![sub(alternate)?],
            ],
        },
        ConcreteNode::BinaryExpression {
            operator,
            left,
            right,
        } => AbstractNode {
            ctor: ctor(g, "BinaryExpression")?,
            fields: vec![
                vec![node(AbstractNode::leaf(ctor(g, operator.ctor_name())?))],
                vec![sub(left)?],
                vec![sub(right)?],
            ],
        },
        ConcreteNode::LogicalExpression {
            operator,
            left,
            right,
        } => AbstractNode {
            ctor: ctor(g, "LogicalExpression")?,
            fields: vec![
                vec![node(AbstractNode::leaf(ctor(g, operator.ctor_name())?))],
                vec![sub(left)?],
                vec![sub(right)?],
            ],
        },
        ConcreteNode::UnaryExpression { operator, argument } => AbstractNode {
            ctor: ctor(g, "UnaryExpression")?,
            fields: vec![
                vec![node(AbstractNode::leaf(ctor(g, operator.ctor_name())?))],
                vec![sub(argument)?],
            ],
        },
        ConcreteNode::MemberExpression {
            object,
            property,
            computed,
        } => AbstractNode {
            ctor: ctor(
                g,
                if *computed {
                    "ComputedMemberExpression"
                } else {
                    "StaticMemberExpression"
                },
            )?,
            fields: vec![vec![sub(object)?], vec![sub(property)?]],
        },
        ConcreteNode::CallExpression { callee, arguments } => AbstractNode {
            ctor: ctor(g, "CallExpression")?,
            fields: vec![vec![sub(callee)?], many(arguments)?],
        },
    };
    Ok(out)
}

struct Concretizer<'g> {
    g: &'g Grammar,
}

impl<'g> Concretizer<'g> {
    fn name(&self, n: &AbstractNode) -> &'g str {
        &self.g.constructor(n.ctor).name
    }

    fn fields<'n>(
        &self,
        n: &'n AbstractNode,
        count: usize,
    ) -> Result<&'n [Vec<Child>], ConvertError> {
        if n.fields.len() != count {
            return Err(ConvertError::Malformed(format!(
                "{} expects {count} fields, found {}",
                self.name(n),
                n.fields.len()
            )));
        }
        Ok(&n.fields)
    }

    fn one<'n>(&self, children: &'n [Child], what: &str) -> Result<&'n Child, ConvertError> {
        match children {
            [c] => Ok(c),
            _ => Err(ConvertError::Malformed(format!(
                "{what} holds {} children",
                children.len()
            ))),
        }
    }

    fn expr(&self, c: &Child) -> Result<ConcreteNode, ConvertError> {
        match c {
            Child::Node(n) => {
                let out = self.convert(n)?;
                if out.is_statement() {
                    return Err(ConvertError::IllegalJsAst(format!(
                        "statement {} in expression position",
                        self.name(n)
                    )));
                }
                Ok(out)
            }
            Child::Token(_) => Err(ConvertError::Malformed("token where a node belongs".into())),
        }
    }

    fn stmt(&self, c: &Child) -> Result<ConcreteNode, ConvertError> {
        match c {
            Child::Node(n) => {
                let out = self.convert(n)?;
                if !out.is_statement() {
                    return Err(ConvertError::IllegalJsAst(format!(
                        "expression {} in statement position",
                        self.name(n)
                    )));
                }
                Ok(out)
            }
            Child::Token(_) => Err(ConvertError::Malformed("token where a node belongs".into())),
        }
    }

    fn boxed(&self, children: &[Child], what: &str) -> Result<Box<ConcreteNode>, ConvertError> {
        Ok(Box::new(self.expr(self.one(children, what)?)?))
    }

    fn token<'n>(&self, c: &'n Child) -> Result<&'n Token, ConvertError> {
        match c {
            Child::Token(t) => Ok(t),
            Child::Node(_) => Err(ConvertError::Malformed("node where a token belongs".into())),
        }
    }

    fn operator<'n>(&self, children: &'n [Child]) -> Result<&'g str, ConvertError> {
        match self.one(children, "operator")? {
            Child::Node(n) if n.fields.is_empty() => Ok(&self.g.constructor(n.ctor).name),
            _ => Err(ConvertError::Malformed(
                "operator is not a nullary constructor".into(),
            )),
        }
    }

    fn convert(&self, n: &AbstractNode) -> Result<ConcreteNode, ConvertError> {
        let name = self.name(n);
        let out = match name {
            "BlockStatement" => {
                let f = self.fields(n, 1)?;
                ConcreteNode::BlockStatement {
                    body: f[0]
                        .iter()
                        .map(|c| self.stmt(c))
                        .collect::<Result<_, _>>()?,
                }
            }
            "ExpressionStatement" => {
                let f = self.fields(n, 1)?;
                ConcreteNode::ExpressionStatement {
                    expression: self.boxed(&f[0], "expression")?,
                }
            }
            "BreakStatement" => {
                let f = self.fields(n, 1)?;
                let label = match f[0].as_slice() {
                    [] => None,
                    [c] => {
                        let l = self.expr(c)?;
                        if !matches!(l, ConcreteNode::Identifier { .. }) {
                            return Err(ConvertError::IllegalJsAst(
                                "break label must be an identifier".into(),
                            ));
                        }
                        Some(Box::new(l))
                    }
                    _ => return Err(ConvertError::Malformed("break label".into())),
                };
                ConcreteNode::BreakStatement { label }
            }
            "Identifier" => {
                let f = self.fields(n, 1)?;
                let t = self.token(self.one(&f[0], "name")?)?;
                match t {
                    Token::Name(s) if is_identifier_name(s) => {
                        ConcreteNode::Identifier { name: s.clone() }
                    }
                    _ => {
                        return Err(ConvertError::IllegalJsAst(format!(
                            "`{}` is not an identifier name",
                            t.text()
                        )))
                    }
                }
            }
            "Literal" => {
                let f = self.fields(n, 1)?;
                let value = match f[0].as_slice() {
                    [] => LiteralValue::Null,
                    [c] => match self.token(c)? {
                        Token::Str(s) => LiteralValue::String(s.clone()),
                        Token::Name(s) if s == "true" => LiteralValue::Boolean(true),
                        Token::Name(s) if s == "false" => LiteralValue::Boolean(false),
                        Token::Name(s) => match super::lexer::canonical_number(s) {
                            Some(canon) if &canon == s => LiteralValue::Number(canon),
                            _ => {
                                return Err(ConvertError::IllegalJsAst(format!(
                                    "`{s}` is not a literal"
                                )))
                            }
                        },
                    },
                    _ => return Err(ConvertError::Malformed("literal value".into())),
                };
                ConcreteNode::Literal { value }
            }
            "TemplateLiteral" => {
                let f = self.fields(n, 2)?;
                let quasis = f[0]
                    .iter()
                    .map(|c| match self.token(c)? {
                        Token::Str(s) => Ok(s.clone()),
                        Token::Name(s) => Err(ConvertError::IllegalJsAst(format!(
                            "template segment `{s}` is not a string"
                        ))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let expressions = f[1]
                    .iter()
                    .map(|c| self.expr(c))
                    .collect::<Result<Vec<_>, _>>()?;
                if quasis.len() != expressions.len() + 1 {
                    return Err(ConvertError::IllegalJsAst(format!(
                        "template with {} segments and {} substitutions",
                        quasis.len(),
                        expressions.len()
                    )));
                }
                ConcreteNode::TemplateLiteral {
                    quasis,
                    expressions,
                }
            }
            "ConditionalExpression" => {
                let f = self.fields(n, 3)?;
                ConcreteNode::ConditionalExpression {
                    test: self.boxed(&f[0], "test")?,
                    consequent: self.boxed(&f[1], "consequent")?,
                    alternate: self.boxed(&f[2], "alternate")?,
                }
            }
            "BinaryExpression" => {
                let f = self.fields(n, 3)?;
                let op = self.operator(&f[0])?;
                let operator = BinaryOp::ALL
                    .into_iter()
                    .find(|o| o.ctor_name() == op)
                    .ok_or_else(|| ConvertError::Malformed(format!("binary operator {op}")))?;
                ConcreteNode::BinaryExpression {
                    operator,
                    left: self.boxed(&f[1], "left")?,
                    right: self.boxed(&f[2], "right")?,
                }
            }
            "LogicalExpression" => {
                let f = self.fields(n, 3)?;
                let op = self.operator(&f[0])?;
                let operator = LogicalOp::ALL
                    .into_iter()
                    .find(|o| o.ctor_name() == op)
                    .ok_or_else(|| ConvertError::Malformed(format!("logical operator {op}")))?;
                ConcreteNode::LogicalExpression {
                    operator,
                    left: self.boxed(&f[1], "left")?,
                    right: self.boxed(&f[2], "right")?,
                }
            }
            "UnaryExpression" => {
                let f = self.fields(n, 2)?;
                let op = self.operator(&f[0])?;
                let operator = UnaryOp::ALL
                    .into_iter()
                    .find(|o| o.ctor_name() == op)
                    .ok_or_else(|| ConvertError::Malformed(format!("unary operator {op}")))?;
                ConcreteNode::UnaryExpression {
                    operator,
                    argument: self.boxed(&f[1], "argument")?,
                }
            }
            "StaticMemberExpression" | "ComputedMemberExpression" => {
                let f = self.fields(n, 2)?;
                let computed = name == "ComputedMemberExpression";
                let property = self.boxed(&f[1], "property")?;
                if !computed && !matches!(*property, ConcreteNode::Identifier { .. }) {
                    return Err(ConvertError::IllegalJsAst(
                        "static member property must be an identifier".into(),
                    ));
                }
                ConcreteNode::MemberExpression {
                    object: self.boxed(&f[0], "object")?,
                    property,
                    computed,
                }
            }
            "CallExpression" => {
                let f = self.fields(n, 2)?;
                ConcreteNode::CallExpression {
                    callee: self.boxed(&f[0], "callee")?,
                    arguments: f[1]
                        .iter()
                        .map(|c| self.expr(c))
                        .collect::<Result<_, _>>()?,
                }
            }
            other => return Err(ConvertError::Unsupported(other.to_string())),
        };
        Ok(out)
    }
}

/// Converts a grammar-typed tree back to JavaScript. Trees the relaxed
/// grammar admits but JavaScript does not are rejected with
/// [`ConvertError::IllegalJsAst`].
pub fn to_concrete(n: &AbstractNode, g: &Grammar) -> Result<ConcreteNode, ConvertError> {
    let out = Concretizer { g }.convert(n)?;
    check_references(&out)?;
    Ok(out)
}

/// Reserved words are only legal as static member property names.
fn check_references(n: &ConcreteNode) -> Result<(), ConvertError> {
    let bad = |name: &str| {
        Err(ConvertError::IllegalJsAst(format!(
            "`{name}` cannot be used as a variable"
        )))
    };
    match n {
        ConcreteNode::Identifier { name } if !is_identifier(name) => bad(name),
        ConcreteNode::MemberExpression {
            object,
            property,
            computed: false,
        } => check_references(object).and_then(|_| match &**property {
            ConcreteNode::Identifier { .. } => Ok(()),
            other => check_references(other),
        }),
        ConcreteNode::BreakStatement { label: Some(l) } => check_references(l),
        _ => {
            let mut result = Ok(());
            visit_children(n, &mut |c| {
                if result.is_ok() {
                    result = check_references(c);
                }
            });
            result
        }
    }
}

fn visit_children(n: &ConcreteNode, f: &mut impl FnMut(&ConcreteNode)) {
    match n {
        ConcreteNode::BlockStatement { body } => body.iter().for_each(f),
        ConcreteNode::ExpressionStatement { expression } => f(expression),
        ConcreteNode::BreakStatement { label } => label.iter().for_each(|l| f(l)),
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

#[cfg(test)]
mod tests {
    use super::super::{parse_js, print_js};
    use super::*;

    fn id(g: &Grammar, name: &str) -> CtorId {
        g.ctor_id(name).unwrap()
    }

    fn ident(g: &Grammar, name: &str) -> AbstractNode {
        AbstractNode {
            ctor: id(g, "Identifier"),
            fields: vec![vec![Child::Token(Token::Name(name.into()))]],
        }
    }

    fn block(g: &Grammar, expr: AbstractNode) -> AbstractNode {
        AbstractNode {
            ctor: id(g, "BlockStatement"),
            fields: vec![vec![Child::Node(AbstractNode {
                ctor: id(g, "ExpressionStatement"),
                fields: vec![vec![Child::Node(expr)]],
            })]],
        }
    }

    #[test]
    fn identifier_statement() {
        let g = Grammar::javascript();
        let a = to_abstract(&parse_js("{picUrl;}").unwrap(), &g).unwrap();
        assert_eq!(a, block(&g, ident(&g, "picUrl")));
        a.validate(&g).unwrap();
    }

    #[test]
    fn empty_block() {
        let g = Grammar::javascript();
        let a = to_abstract(&parse_js("{}").unwrap(), &g).unwrap();
        assert_eq!(
            a,
            AbstractNode {
                ctor: id(&g, "BlockStatement"),
                fields: vec![vec![]]
            }
        );
    }

    #[test]
    fn conditional_layout() {
        let g = Grammar::javascript();
        let a = to_abstract(
            &parse_js("{contentType === 'live' ? liveTimeDesc : marketingTimeDesc}").unwrap(),
            &g,
        )
        .unwrap();
        let Child::Node(stmt) = &a.fields[0][0] else {
            panic!()
        };
        let Child::Node(cond) = &stmt.fields[0][0] else {
            panic!()
        };
        assert_eq!(g.constructor(cond.ctor).name, "ConditionalExpression");
        let Child::Node(test) = &cond.fields[0][0] else {
            panic!()
        };
        assert_eq!(g.constructor(test.ctor).name, "BinaryExpression");
        let Child::Node(op) = &test.fields[0][0] else {
            panic!()
        };
        assert_eq!(g.constructor(op.ctor).name, "StrictEqual");
        assert_eq!(cond.fields[1][0], Child::Node(ident(&g, "liveTimeDesc")));
        assert_eq!(
            cond.fields[2][0],
            Child::Node(ident(&g, "marketingTimeDesc"))
        );
    }

    #[test]
    fn round_trip_examples() {
        let g = Grammar::javascript();
        for src in [
            "{contentType === 'live' ? liveTimeDesc : marketingTimeDesc}",
            "{ user && user.nick || \" \" }",
            "{`优惠券已抵扣${discountPrice}元`}",
            "{`${data.coinShowPrice.split(\".\")[1]}`}",
            "{a; break; break b; null; true; -1.5; !x; typeof y}",
        ] {
            let c = parse_js(src).unwrap();
            let a = to_abstract(&c, &g).unwrap();
            a.validate(&g).unwrap();
            assert_eq!(to_concrete(&a, &g).unwrap(), c);
        }
    }

    #[test]
    fn break_with_literal_label_is_illegal() {
        let g = Grammar::javascript();
        let lit = AbstractNode {
            ctor: id(&g, "Literal"),
            fields: vec![vec![Child::Token(Token::Name("5".into()))]],
        };
        let brk = AbstractNode {
            ctor: id(&g, "BreakStatement"),
            fields: vec![vec![Child::Node(lit)]],
        };
        let root = AbstractNode {
            ctor: id(&g, "BlockStatement"),
            fields: vec![vec![Child::Node(brk)]],
        };
        root.validate(&g).unwrap();
        assert!(matches!(
            to_concrete(&root, &g),
            Err(ConvertError::IllegalJsAst(_))
        ));
    }

    #[test]
    fn hand_built_conditional() {
        let g = Grammar::javascript();
        let cond = AbstractNode {
            ctor: id(&g, "ConditionalExpression"),
            fields: vec![
                vec![Child::Node(ident(&g, "a"))],
                vec![Child::Node(ident(&g, "b"))],
                vec![Child::Node(ident(&g, "c"))],
            ],
        };
        let c = to_concrete(&block(&g, cond), &g).unwrap();
        assert_eq!(print_js(&c), "{a ? b : c;}");
    }

    #[test]
    fn relaxed_trees_rejected() {
        let g = Grammar::javascript();
        let member = AbstractNode {
            ctor: id(&g, "StaticMemberExpression"),
            fields: vec![
                vec![Child::Node(ident(&g, "a"))],
                vec![Child::Node(AbstractNode {
                    ctor: id(&g, "Literal"),
                    fields: vec![vec![Child::Token(Token::Str("x".into()))]],
                })],
            ],
        };
        assert!(matches!(
            to_concrete(&block(&g, member), &g),
            Err(ConvertError::IllegalJsAst(_))
        ));
        let template = AbstractNode {
            ctor: id(&g, "TemplateLiteral"),
            fields: vec![
                vec![Child::Token(Token::Str("x".into()))],
                vec![Child::Node(ident(&g, "a"))],
            ],
        };
        assert!(matches!(
            to_concrete(&block(&g, template), &g),
            Err(ConvertError::IllegalJsAst(_))
        ));
        assert!(matches!(
            to_concrete(&block(&g, ident(&g, "typeof")), &g),
            Err(ConvertError::IllegalJsAst(_))
        ));
        assert!(matches!(
            to_concrete(&block(&g, ident(&g, "<unk>")), &g),
            Err(ConvertError::IllegalJsAst(_))
        ));
        let lit = AbstractNode {
            ctor: id(&g, "Literal"),
            fields: vec![vec![Child::Token(Token::Name("abc".into()))]],
        };
        assert!(matches!(
            to_concrete(&block(&g, lit), &g),
            Err(ConvertError::IllegalJsAst(_))
        ));
    }

    #[test]
    fn reserved_property_names_allowed() {
        let g = Grammar::javascript();
        let c = parse_js("a.default").unwrap();
        let a = to_abstract(&c, &g).unwrap();
        assert_eq!(to_concrete(&a, &g).unwrap(), c);
    }
}
