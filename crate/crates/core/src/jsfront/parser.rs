use super::lexer::{lex, TemplatePart, Token, TokenKind};
use super::{
    is_identifier_name, is_reserved_word, BinaryOp, ConcreteNode, JsError, JsErrorKind,
    LiteralValue, LogicalOp, Span, UnaryOp,
};

/// Parses one expression, or a brace-wrapped list of expression statements,
/// into a `BlockStatement`.
pub fn parse_js(source: &str) -> Result<ConcreteNode, JsError> {
    let tokens = lex(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        len: source.len(),
    };
    let root = if p.is_punct("{") {
        p.block()?
    } else {
        let expr = p.expression()?;
        p.eat_punct(";");
        ConcreteNode::block_of(expr)
    };
    if let Some(t) = p.peek() {
        return Err(p.unexpected(t.clone()));
    }
    Ok(root)
}

fn binary_op(p: &str) -> Option<BinaryOp> {
    BinaryOp::ALL.into_iter().find(|op| op.symbol() == p)
}

fn logical_op(p: &str) -> Option<LogicalOp> {
    LogicalOp::ALL.into_iter().find(|op| op.symbol() == p)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

enum Infix {
    Binary(BinaryOp),
    Logical(LogicalOp),
}

impl Infix {
    fn precedence(&self) -> u8 {
        match self {
            Infix::Binary(op) => op.precedence(),
            Infix::Logical(op) => op.precedence(),
        }
    }
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Punct(q), .. }) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Token { kind: TokenKind::Ident(q), .. }) if q == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eof_span(&self) -> Span {
        Span {
            start: self.len,
            end: self.len,
        }
    }

    fn error(&self, kind: JsErrorKind, span: Span, message: impl Into<String>) -> JsError {
        JsError {
            kind,
            message: message.into(),
            span,
        }
    }

    fn unexpected(&self, tok: Token) -> JsError {
        match &tok.kind {
            TokenKind::Punct(p) => {
                let what = match *p {
                    "=>" => "arrow functions",
                    "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "&&=" | "||=" | "??=" | "**="
                    | "<<=" | ">>=" | ">>>=" | "&=" | "|=" | "^=" => "assignment",
                    "++" | "--" => "update expressions",
                    "?." => "optional chaining",
                    "..." => "spread",
                    "&" | "|" | "^" | "~" | "<<" | ">>" | ">>>" => "bitwise operators",
                    "**" => "exponentiation",
                    "@" | "#" => "decorators and private names",
                    "/" => "regular expressions",
                    "[" => "array literals",
                    "{" => "object literals",
                    _ => {
                        return self.error(
                            JsErrorKind::Syntax,
                            tok.span,
                            format!("unexpected `{p}`"),
                        )
                    }
                };
                self.error(
                    JsErrorKind::Unsupported,
                    tok.span,
                    format!("unsupported construct: {what}"),
                )
            }
            TokenKind::Ident(w) if is_reserved_word(w) => self.error(
                JsErrorKind::Unsupported,
                tok.span,
                format!("unsupported construct: `{w}`"),
            ),
            _ => self.error(JsErrorKind::Syntax, tok.span, "unexpected token"),
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), JsError> {
        if self.eat_punct(p) {
            return Ok(());
        }
        match self.peek().cloned() {
            Some(t) => {
                let mut err = self.unexpected(t);
                if err.kind == JsErrorKind::Syntax {
                    err.message = format!("expected `{p}`");
                }
                Err(err)
            }
            None => Err(self.error(
                JsErrorKind::Syntax,
                self.eof_span(),
                format!("expected `{p}` before end of input"),
            )),
        }
    }

    fn block(&mut self) -> Result<ConcreteNode, JsError> {
        self.expect_punct("{")?;
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if self.peek().is_none() {
                return Err(self.error(JsErrorKind::Syntax, self.eof_span(), "unclosed block"));
            }
            body.push(self.statement()?);
        }
        self.pos += 1;
        Ok(ConcreteNode::BlockStatement { body })
    }

    fn statement(&mut self) -> Result<ConcreteNode, JsError> {
        if self.is_punct("{") {
            return self.block();
        }
        if self.is_word("break") {
            self.pos += 1;
            let label = match self.peek() {
                Some(Token {
                    kind: TokenKind::Ident(w),
                    ..
                }) if !is_reserved_word(w) => {
                    let name = w.clone();
                    self.pos += 1;
                    Some(Box::new(ConcreteNode::Identifier { name }))
                }
                _ => None,
            };
            self.statement_end()?;
            return Ok(ConcreteNode::BreakStatement { label });
        }
        let expression = Box::new(self.expression()?);
        self.statement_end()?;
        Ok(ConcreteNode::ExpressionStatement { expression })
    }

    fn statement_end(&mut self) -> Result<(), JsError> {
        if self.eat_punct(";") || self.is_punct("}") {
            Ok(())
        } else {
            self.expect_punct(";")
        }
    }

    fn expression(&mut self) -> Result<ConcreteNode, JsError> {
        let expr = self.conditional()?;
        if self.is_punct(",") {
            let span = self.peek().expect("comma present").span;
            return Err(self.error(
                JsErrorKind::Unsupported,
                span,
                "unsupported construct: sequence expressions",
            ));
        }
        Ok(expr)
    }

    fn conditional(&mut self) -> Result<ConcreteNode, JsError> {
        let test = self.infix(0)?;
        if !self.eat_punct("?") {
            return Ok(test);
        }
        let consequent = self.conditional()?;
        self.expect_punct(":")?;
        let alternate = self.conditional()?;
        Ok(ConcreteNode::ConditionalExpression {
            test: Box::new(test),
            consequent: Box::new(consequent),
            alternate: Box::new(alternate),
        })
    }

    fn peek_infix(&self) -> Option<Infix> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Punct(p),
                ..
            }) => binary_op(p)
                .map(Infix::Binary)
                .or_else(|| logical_op(p).map(Infix::Logical)),
            _ => None,
        }
    }

    /// Precedence climbing over binary and logical operators, all
    /// left-associative.
    fn infix(&mut self, min_prec: u8) -> Result<ConcreteNode, JsError> {
        let mut left = self.unary()?;
        while let Some(op) = self.peek_infix() {
            let prec = op.precedence();
            if prec <= min_prec {
                break;
            }
            self.pos += 1;
            let right = self.infix(prec)?;
            left = match op {
                Infix::Binary(operator) => ConcreteNode::BinaryExpression {
                    operator,
                    left: Box::new(left),
                    right: Box::new(right),
                },
                Infix::Logical(operator) => ConcreteNode::LogicalExpression {
                    operator,
                    left: Box::new(left),
                    right: Box::new(right),
                },
            };
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<ConcreteNode, JsError> {
        let operator = match self.peek() {
            Some(Token {
                kind: TokenKind::Punct("!"),
                ..
            }) => Some(UnaryOp::Not),
            Some(Token {
                kind: TokenKind::Punct("-"),
                ..
            }) => Some(UnaryOp::Negative),
            Some(Token {
                kind: TokenKind::Punct("+"),
                ..
            }) => Some(UnaryOp::Positive),
            Some(Token {
                kind: TokenKind::Ident(w),
                ..
            }) if w == "typeof" => Some(UnaryOp::TypeOf),
            _ => None,
        };
        match operator {
            Some(operator) => {
                self.pos += 1;
                let argument = Box::new(self.unary()?);
                Ok(ConcreteNode::UnaryExpression { operator, argument })
            }
            None => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<ConcreteNode, JsError> {
        let mut expr = self.primary()?;
        loop {
            if self.eat_punct(".") {
                let name = match self.peek() {
                    Some(Token {
                        kind: TokenKind::Ident(w),
                        ..
                    }) if is_identifier_name(w) => w.clone(),
                    Some(t) => {
                        return Err(self.error(
                            JsErrorKind::Syntax,
                            t.span,
                            "expected property name",
                        ))
                    }
                    None => {
                        return Err(self.error(
                            JsErrorKind::Syntax,
                            self.eof_span(),
                            "expected property name",
                        ))
                    }
                };
                self.pos += 1;
                expr = ConcreteNode::MemberExpression {
                    object: Box::new(expr),
                    property: Box::new(ConcreteNode::Identifier { name }),
                    computed: false,
                };
            } else if self.eat_punct("[") {
                let property = self.expression()?;
                self.expect_punct("]")?;
                expr = ConcreteNode::MemberExpression {
                    object: Box::new(expr),
                    property: Box::new(property),
                    computed: true,
                };
            } else if self.eat_punct("(") {
                let mut arguments = Vec::new();
                if !self.eat_punct(")") {
                    loop {
                        arguments.push(self.conditional()?);
                        if self.eat_punct(")") {
                            break;
                        }
                        self.expect_punct(",")?;
                    }
                }
                expr = ConcreteNode::CallExpression {
                    callee: Box::new(expr),
                    arguments,
                };
            } else if let Some(Token {
                kind:
                    TokenKind::Template {
                        part: TemplatePart::Full | TemplatePart::Head,
                        ..
                    },
                span,
            }) = self.peek()
            {
                return Err(self.error(
                    JsErrorKind::Unsupported,
                    *span,
                    "unsupported construct: tagged templates",
                ));
            } else {
                return Ok(expr);
            }
        }
    }

    fn primary(&mut self) -> Result<ConcreteNode, JsError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error(
                JsErrorKind::Syntax,
                self.eof_span(),
                "unexpected end of input",
            ));
        };
        self.pos += 1;
        match tok.kind.clone() {
            TokenKind::Ident(w) => match w.as_str() {
                "true" => Ok(ConcreteNode::Literal {
                    value: LiteralValue::Boolean(true),
                }),
                "false" => Ok(ConcreteNode::Literal {
                    value: LiteralValue::Boolean(false),
                }),
                "null" => Ok(ConcreteNode::Literal {
                    value: LiteralValue::Null,
                }),
                _ if is_reserved_word(&w) => {
                    self.pos -= 1;
                    Err(self.unexpected(tok))
                }
                _ => Ok(ConcreteNode::Identifier { name: w }),
            },
            TokenKind::Num(n) => Ok(ConcreteNode::Literal {
                value: LiteralValue::Number(n),
            }),
            TokenKind::Str(s) => Ok(ConcreteNode::Literal {
                value: LiteralValue::String(s),
            }),
            TokenKind::Template { cooked, part } => match part {
                TemplatePart::Full => Ok(ConcreteNode::TemplateLiteral {
                    quasis: vec![cooked],
                    expressions: Vec::new(),
                }),
                TemplatePart::Head => self.template_rest(cooked, tok.span),
                _ => Err(self.error(
                    JsErrorKind::UnbalancedTemplate,
                    tok.span,
                    "template continuation without opening",
                )),
            },
            TokenKind::Punct("(") => {
                let inner = self.expression()?;
                self.expect_punct(")")?;
                Ok(inner)
            }
            TokenKind::Punct(_) => {
                self.pos -= 1;
                Err(self.unexpected(tok))
            }
        }
    }

    fn template_rest(&mut self, head: String, open: Span) -> Result<ConcreteNode, JsError> {
        let mut quasis = vec![head];
        let mut expressions = Vec::new();
        loop {
            expressions.push(self.expression()?);
            match self.peek().cloned() {
                Some(Token {
                    kind: TokenKind::Template { cooked, part },
                    ..
                }) if matches!(part, TemplatePart::Middle | TemplatePart::Tail) => {
                    self.pos += 1;
                    quasis.push(cooked);
                    if part == TemplatePart::Tail {
                        return Ok(ConcreteNode::TemplateLiteral {
                            quasis,
                            expressions,
                        });
                    }
                }
                Some(t) => {
                    return Err(self.error(
                        JsErrorKind::UnbalancedTemplate,
                        t.span,
                        "expected `}` closing a template substitution",
                    ))
                }
                None => {
                    return Err(self.error(
                        JsErrorKind::UnbalancedTemplate,
                        Span {
                            start: open.start,
                            end: self.len,
                        },
                        "unterminated template literal",
                    ))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin(op: BinaryOp, l: ConcreteNode, r: ConcreteNode) -> ConcreteNode {
        ConcreteNode::BinaryExpression {
            operator: op,
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    fn logical(op: LogicalOp, l: ConcreteNode, r: ConcreteNode) -> ConcreteNode {
        ConcreteNode::LogicalExpression {
            operator: op,
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    fn member(o: ConcreteNode, p: &str) -> ConcreteNode {
        ConcreteNode::MemberExpression {
            object: Box::new(o),
            property: Box::new(ConcreteNode::ident(p)),
            computed: false,
        }
    }

    #[test]
    fn conditional_with_strict_equal_test() {
        let n = parse_js("{contentType === 'live' ? liveTimeDesc : marketingTimeDesc}").unwrap();
        let expected = ConcreteNode::block_of(ConcreteNode::ConditionalExpression {
            test: Box::new(bin(
                BinaryOp::StrictEqual,
                ConcreteNode::ident("contentType"),
                ConcreteNode::string("live"),
            )),
            consequent: Box::new(ConcreteNode::ident("liveTimeDesc")),
            alternate: Box::new(ConcreteNode::ident("marketingTimeDesc")),
        });
        assert_eq!(n, expected);
    }

    #[test]
    fn or_of_and() {
        let n = parse_js("{ user && user.nick || \" \" }").unwrap();
        let expected = ConcreteNode::block_of(logical(
            LogicalOp::Or,
            logical(
                LogicalOp::And,
                ConcreteNode::ident("user"),
                member(ConcreteNode::ident("user"), "nick"),
            ),
            ConcreteNode::string(" "),
        ));
        assert_eq!(n, expected);
    }

    #[test]
    fn template_with_one_interpolation() {
        let n = parse_js("{`优惠券已抵扣${discountPrice}元`}").unwrap();
        let expected = ConcreteNode::block_of(ConcreteNode::TemplateLiteral {
            quasis: vec!["优惠券已抵扣".into(), "元".into()],
            expressions: vec![ConcreteNode::ident("discountPrice")],
        });
        assert_eq!(n, expected);
    }

    #[test]
    fn data_processing_chain() {
        let n = parse_js("{`${data.coinShowPrice.split(\".\")[1]}`}").unwrap();
        let split = ConcreteNode::CallExpression {
            callee: Box::new(member(
                member(ConcreteNode::ident("data"), "coinShowPrice"),
                "split",
            )),
            arguments: vec![ConcreteNode::string(".")],
        };
        let expected = ConcreteNode::block_of(ConcreteNode::TemplateLiteral {
            quasis: vec![String::new(), String::new()],
            expressions: vec![ConcreteNode::MemberExpression {
                object: Box::new(split),
                property: Box::new(ConcreteNode::Literal {
                    value: LiteralValue::Number("1".into()),
                }),
                computed: true,
            }],
        });
        assert_eq!(n, expected);
    }

    #[test]
    fn bare_expression_is_wrapped() {
        assert_eq!(
            parse_js("picUrl").unwrap(),
            ConcreteNode::block_of(ConcreteNode::ident("picUrl"))
        );
        assert_eq!(
            parse_js("{}").unwrap(),
            ConcreteNode::BlockStatement { body: vec![] }
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let n = parse_js("a - b - c * d").unwrap();
        let expected = ConcreteNode::block_of(bin(
            BinaryOp::Minus,
            bin(
                BinaryOp::Minus,
                ConcreteNode::ident("a"),
                ConcreteNode::ident("b"),
            ),
            bin(
                BinaryOp::Times,
                ConcreteNode::ident("c"),
                ConcreteNode::ident("d"),
            ),
        ));
        assert_eq!(n, expected);
        let n = parse_js("a ? b : c ? d : e").unwrap();
        match n {
            ConcreteNode::BlockStatement { body } => match &body[0] {
                ConcreteNode::ExpressionStatement { expression } => match &**expression {
                    ConcreteNode::ConditionalExpression { alternate, .. } => {
                        assert!(matches!(
                            **alternate,
                            ConcreteNode::ConditionalExpression { .. }
                        ))
                    }
                    other => panic!("{other:?}"),
                },
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsupported_constructs_are_named() {
        for src in [
            "x => x",
            "a = 1",
            "[1, 2]",
            "new Foo()",
            "a++",
            "a?.b",
            "function f() {}",
        ] {
            let err = parse_js(src).unwrap_err();
            assert_eq!(err.kind, JsErrorKind::Unsupported, "{src}: {err}");
        }
        let err = parse_js("{ a = 1 }").unwrap_err();
        assert_eq!(err.kind, JsErrorKind::Unsupported);
        assert_eq!(err.span, Span { start: 4, end: 5 });
    }

    #[test]
    fn unbalanced_template() {
        assert_eq!(
            parse_js("`a${b").unwrap_err().kind,
            JsErrorKind::UnbalancedTemplate
        );
        assert_eq!(
            parse_js("`a${b c}`").unwrap_err().kind,
            JsErrorKind::UnbalancedTemplate
        );
    }

    #[test]
    fn statements_and_breaks() {
        let n = parse_js("{a; break; break foo;}").unwrap();
        match n {
            ConcreteNode::BlockStatement { body } => {
                assert_eq!(body.len(), 3);
                assert_eq!(body[1], ConcreteNode::BreakStatement { label: None });
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_js("{a b}").is_err());
        assert!(parse_js("{a;").is_err());
    }
}
