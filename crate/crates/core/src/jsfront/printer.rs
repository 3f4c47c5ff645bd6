use super::{ConcreteNode, LiteralValue, LogicalOp, UnaryOp};

const PREC_CONDITIONAL: u8 = 1;
const PREC_UNARY: u8 = 9;
const PREC_POSTFIX: u8 = 10;
const PREC_PRIMARY: u8 = 11;

fn precedence(node: &ConcreteNode) -> u8 {
    match node {
        ConcreteNode::ConditionalExpression { .. } => PREC_CONDITIONAL,
        ConcreteNode::LogicalExpression { operator, .. } => operator.precedence(),
        ConcreteNode::BinaryExpression { operator, .. } => operator.precedence(),
        ConcreteNode::UnaryExpression { .. } => PREC_UNARY,
        ConcreteNode::MemberExpression { .. } | ConcreteNode::CallExpression { .. } => PREC_POSTFIX,
        _ => PREC_PRIMARY,
    }
}

/// Canonical text: single-quoted strings, single spaces around infix and
/// ternary operators, `;` closing every expression statement, and only the
/// parentheses precedence requires.
pub fn print_js(node: &ConcreteNode) -> String {
    let mut out = String::new();
    Printer { out: &mut out }.node(node);
    out
}

struct Printer<'a> {
    out: &'a mut String,
}

impl Printer<'_> {
    fn node(&mut self, node: &ConcreteNode) {
        match node {
            ConcreteNode::BlockStatement { body } => {
                self.out.push('{');
                for stmt in body {
                    self.node(stmt);
                }
                self.out.push('}');
            }
            ConcreteNode::ExpressionStatement { expression } => {
                self.expr(expression, 0);
                self.out.push(';');
            }
            ConcreteNode::BreakStatement { label } => {
                self.out.push_str("break");
                if let Some(label) = label {
                    self.out.push(' ');
                    self.expr(label, 0);
                }
                self.out.push(';');
            }
            expr => self.expr(expr, 0),
        }
    }

    /// Prints `node`, parenthesized when its precedence is below `min`.
    fn expr(&mut self, node: &ConcreteNode, min: u8) {
        if precedence(node) < min {
            self.out.push('(');
            self.expr(node, 0);
            self.out.push(')');
            return;
        }
        match node {
            ConcreteNode::Identifier { name } => self.out.push_str(name),
            ConcreteNode::Literal { value } => match value {
                LiteralValue::String(s) => quote_string(s, self.out),
                LiteralValue::Number(n) => self.out.push_str(n),
                LiteralValue::Boolean(b) => self.out.push_str(if *b { "true" } else { "false" }),
                LiteralValue::Null => self.out.push_str("null"),
            },
            ConcreteNode::TemplateLiteral {
                quasis,
                expressions,
            } => {
                self.out.push('`');
                for (i, quasi) in quasis.iter().enumerate() {
                    escape_template(quasi, self.out);
                    if let Some(e) = expressions.get(i) {
                        self.out.push_str("${");
                        self.expr(e, 0);
                        self.out.push('}');
                    }
                }
                self.out.push('`');
            }
            ConcreteNode::ConditionalExpression {
                test,
                consequent,
                alternate,
            } => {
                self.expr(test, PREC_CONDITIONAL + 1);
                self.out.push_str(" ? ");
                self.expr(consequent, PREC_CONDITIONAL);
                self.out.push_str(" : ");
                self.expr(alternate, PREC_CONDITIONAL);
            }
            ConcreteNode::BinaryExpression {
                operator,
                left,
                right,
            } => {
                let p = operator.precedence();
                self.expr(left, p);
                self.out.push(' ');
                self.out.push_str(operator.symbol());
                self.out.push(' ');
                self.expr(right, p + 1);
            }
            ConcreteNode::LogicalExpression {
                operator,
                left,
                right,
            } => {
                let p = operator.precedence();
                self.logical_operand(*operator, left, p);
                self.out.push(' ');
                self.out.push_str(operator.symbol());
                self.out.push(' ');
                self.logical_operand(*operator, right, p + 1);
            }
            ConcreteNode::UnaryExpression { operator, argument } => {
                self.out.push_str(operator.symbol());
                let clash = matches!(
                    (operator, &**argument),
                    (
                        UnaryOp::Negative,
                        ConcreteNode::UnaryExpression {
                            operator: UnaryOp::Negative,
                            ..
                        }
                    ) | (
                        UnaryOp::Positive,
                        ConcreteNode::UnaryExpression {
                            operator: UnaryOp::Positive,
                            ..
                        }
                    )
                );
                if *operator == UnaryOp::TypeOf {
                    self.out.push(' ');
                }
                if clash {
                    self.out.push('(');
                    self.expr(argument, 0);
                    self.out.push(')');
                } else {
                    self.expr(argument, PREC_UNARY);
                }
            }
            ConcreteNode::MemberExpression {
                object,
                property,
                computed,
            } => {
                self.callee_or_object(object);
                if *computed {
                    self.out.push('[');
                    self.expr(property, 0);
                    self.out.push(']');
                } else {
                    self.out.push('.');
                    self.expr(property, PREC_PRIMARY);
                }
            }
            ConcreteNode::CallExpression { callee, arguments } => {
                self.callee_or_object(callee);
                self.out.push('(');
                for (i, a) in arguments.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    self.expr(a, PREC_CONDITIONAL);
                }
                self.out.push(')');
            }
            stmt => {
                // Statements never appear in expression position of a
                // well-formed tree; print them verbatim rather than panic.
                self.node(stmt)
            }
        }
    }

    fn callee_or_object(&mut self, node: &ConcreteNode) {
        let numeric = matches!(
            node,
            ConcreteNode::Literal {
                value: LiteralValue::Number(_)
            }
        );
        if numeric {
            self.out.push('(');
            self.expr(node, 0);
            self.out.push(')');
        } else {
            self.expr(node, PREC_POSTFIX);
        }
    }

    /// `??` may not be mixed with `||`/`&&` without parentheses.
    fn logical_operand(&mut self, parent: LogicalOp, child: &ConcreteNode, min: u8) {
        if let ConcreteNode::LogicalExpression { operator, .. } = child {
            let mixed = (parent == LogicalOp::NullishCoalescing)
                != (*operator == LogicalOp::NullishCoalescing);
            if mixed {
                self.out.push('(');
                self.expr(child, 0);
                self.out.push(')');
                return;
            }
        }
        self.expr(child, min);
    }
}

fn push_control(c: char, out: &mut String) -> bool {
    match c {
        '\\' => out.push_str("\\\\"),
        '\n' => out.push_str("\\n"),
        '\r' => out.push_str("\\r"),
        '\t' => out.push_str("\\t"),
        '\u{8}' => out.push_str("\\b"),
        '\u{b}' => out.push_str("\\v"),
        '\u{c}' => out.push_str("\\f"),
        c if c.is_control() || c == '\u{2028}' || c == '\u{2029}' => {
            out.push_str(&format!("\\u{:04x}", c as u32))
        }
        _ => return false,
    }
    true
}

fn quote_string(s: &str, out: &mut String) {
    out.push('\'');
    for c in s.chars() {
        if c == '\'' {
            out.push_str("\\'");
        } else if !push_control(c, out) {
            out.push(c);
        }
    }
    out.push('\'');
}

fn escape_template(s: &str, out: &mut String) {
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '`' => out.push_str("\\`"),
            '$' if chars.peek() == Some(&'{') => out.push_str("\\$"),
            '\n' => out.push('\n'),
            _ if push_control(c, out) => {}
            _ => out.push(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_js;
    use super::*;

    fn canon(src: &str) -> String {
        print_js(&parse_js(src).unwrap())
    }

    #[test]
    fn quotes_and_spacing_normalized() {
        assert_eq!(
            canon("{isLucky?\"恭喜你押中啦\":\"很遗憾未押中\"}"),
            "{isLucky ? '恭喜你押中啦' : '很遗憾未押中';}"
        );
        assert_eq!(
            canon("{ user && user.nick || \" \" }"),
            "{user && user.nick || ' ';}"
        );
        assert_eq!(
            canon("{`优惠券已抵扣${discountPrice}元`}"),
            "{`优惠券已抵扣${discountPrice}元`;}"
        );
        assert_eq!(canon("picUrl"), "{picUrl;}");
    }

    #[test]
    fn minimal_parentheses() {
        assert_eq!(canon("(a ? b : c) ? d : e"), "{(a ? b : c) ? d : e;}");
        assert_eq!(canon("a ? b : (c ? d : e)"), "{a ? b : c ? d : e;}");
        assert_eq!(canon("(a - b) - c"), "{a - b - c;}");
        assert_eq!(canon("a - (b - c)"), "{a - (b - c);}");
        assert_eq!(canon("(a || b) && c"), "{(a || b) && c;}");
        assert_eq!(canon("(a + b).length"), "{(a + b).length;}");
        assert_eq!(canon("-(-a)"), "{-(-a);}");
        assert_eq!(canon("!(a && b)"), "{!(a && b);}");
        assert_eq!(canon("typeof a === 'string'"), "{typeof a === 'string';}");
        assert_eq!(canon("(1).toFixed(2)"), "{(1).toFixed(2);}");
        assert_eq!(canon("a ?? (b || c)"), "{a ?? (b || c);}");
    }

    #[test]
    fn escapes_round_trip() {
        assert_eq!(canon(r#""it's""#), r"{'it\'s';}");
        assert_eq!(canon(r#""a\\b""#), r"{'a\\b';}");
        assert_eq!(canon(r"`a\`b`"), r"{`a\`b`;}");
        assert_eq!(canon(r"`\${x}`"), r"{`\${x}`;}");
    }

    #[test]
    fn statements() {
        assert_eq!(canon("{a; break; break foo}"), "{a;break;break foo;}");
        assert_eq!(canon("{}"), "{}");
    }
}
