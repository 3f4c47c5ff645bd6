use super::{JsError, JsErrorKind, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplatePart {
    /// `` `...` `` with no substitutions.
    Full,
    /// `` `...${ ``
    Head,
    /// `` }...${ ``
    Middle,
    /// `` }...` ``
    Tail,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Num(String),
    Str(String),
    Template { cooked: String, part: TemplatePart },
    Punct(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

// Longest first.
const PUNCTUATORS: &[&str] = &[
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=", "??=", "=>", "==", "!=",
    "<=", ">=", "&&", "||", "??", "?.", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "**", "<<", ">>", "{", "}", "(", ")", "[", "]", ";", ",", "<", ">", "+", "-", "*", "/", "%",
    "&", "|", "^", "!", "~", "?", ":", "=", ".", "@", "#",
];

pub(crate) fn is_id_start(c: char) -> bool {
    c == '$' || c == '_' || c.is_alphabetic()
}

pub(crate) fn is_id_continue(c: char) -> bool {
    is_id_start(c) || c.is_alphanumeric() || c == '\u{200c}' || c == '\u{200d}'
}

enum Brace {
    Plain,
    Template,
}

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    braces: Vec<Brace>,
}

impl<'a> Lexer<'a> {
    fn offset(&self, i: usize) -> usize {
        self.chars.get(i).map(|(o, _)| *o).unwrap_or(self.src.len())
    }

    fn peek_at(&self, i: usize) -> Option<char> {
        self.chars.get(i).map(|(_, c)| *c)
    }

    fn err(&self, kind: JsErrorKind, start: usize, end: usize, msg: impl Into<String>) -> JsError {
        JsError {
            kind,
            message: msg.into(),
            span: Span {
                start: self.offset(start),
                end: self.offset(end),
            },
        }
    }

    fn run(mut self) -> Result<Vec<Token>, JsError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek_at(self.pos) {
            if c.is_whitespace() {
                self.pos += 1;
                continue;
            }
            if c == '/' && self.peek_at(self.pos + 1) == Some('/') {
                while matches!(self.peek_at(self.pos), Some(ch) if ch != '\n') {
                    self.pos += 1;
                }
                continue;
            }
            if c == '/' && self.peek_at(self.pos + 1) == Some('*') {
                let start = self.pos;
                self.pos += 2;
                loop {
                    match self.peek_at(self.pos) {
                        None => {
                            return Err(self.err(
                                JsErrorKind::Lexical,
                                start,
                                self.pos,
                                "unterminated comment",
                            ))
                        }
                        Some('*') if self.peek_at(self.pos + 1) == Some('/') => {
                            self.pos += 2;
                            break;
                        }
                        _ => self.pos += 1,
                    }
                }
                continue;
            }
            let start = self.pos;
            let kind = if is_id_start(c) {
                while matches!(self.peek_at(self.pos), Some(ch) if is_id_continue(ch)) {
                    self.pos += 1;
                }
                TokenKind::Ident(self.slice(start, self.pos).to_string())
            } else if c.is_ascii_digit()
                || (c == '.' && matches!(self.peek_at(self.pos + 1), Some(d) if d.is_ascii_digit()))
            {
                self.number()?
            } else if c == '\'' || c == '"' {
                self.string(c)?
            } else if c == '`' {
                self.pos += 1;
                self.template(start, true)?
            } else if c == '}' && matches!(self.braces.last(), Some(Brace::Template)) {
                self.braces.pop();
                self.pos += 1;
                self.template(start, false)?
            } else {
                let rest = &self.src[self.offset(self.pos)..];
                let Some(p) = PUNCTUATORS.iter().find(|p| rest.starts_with(**p)) else {
                    return Err(self.err(
                        JsErrorKind::Lexical,
                        start,
                        start + 1,
                        format!("unexpected character `{c}`"),
                    ));
                };
                self.pos += p.chars().count();
                match *p {
                    "{" => self.braces.push(Brace::Plain),
                    "}" => {
                        self.braces.pop();
                    }
                    _ => {}
                }
                TokenKind::Punct(p)
            };
            out.push(Token {
                kind,
                span: Span {
                    start: self.offset(start),
                    end: self.offset(self.pos),
                },
            });
        }
        Ok(out)
    }

    fn slice(&self, start: usize, end: usize) -> &'a str {
        &self.src[self.offset(start)..self.offset(end)]
    }

    fn number(&mut self) -> Result<TokenKind, JsError> {
        let start = self.pos;
        let digits = |lx: &mut Self, radix: u32| {
            while matches!(lx.peek_at(lx.pos), Some(ch) if ch.is_digit(radix) || ch == '_') {
                lx.pos += 1;
            }
        };
        if self.peek_at(self.pos) == Some('0')
            && matches!(
                self.peek_at(self.pos + 1),
                Some('x' | 'X' | 'o' | 'O' | 'b' | 'B')
            )
        {
            let radix = match self.peek_at(self.pos + 1) {
                Some('x' | 'X') => 16,
                Some('o' | 'O') => 8,
                _ => 2,
            };
            self.pos += 2;
            digits(self, radix);
        } else {
            digits(self, 10);
            if self.peek_at(self.pos) == Some('.') {
                self.pos += 1;
                digits(self, 10);
            }
            if matches!(self.peek_at(self.pos), Some('e' | 'E')) {
                let save = self.pos;
                self.pos += 1;
                if matches!(self.peek_at(self.pos), Some('+' | '-')) {
                    self.pos += 1;
                }
                if matches!(self.peek_at(self.pos), Some(d) if d.is_ascii_digit()) {
                    digits(self, 10);
                } else {
                    self.pos = save;
                }
            }
        }
        if matches!(self.peek_at(self.pos), Some(ch) if is_id_start(ch)) {
            return Err(self.err(
                JsErrorKind::Lexical,
                start,
                self.pos + 1,
                "identifier directly after number",
            ));
        }
        let raw = self.slice(start, self.pos);
        match canonical_number(raw) {
            Some(text) => Ok(TokenKind::Num(text)),
            None => Err(self.err(
                JsErrorKind::Lexical,
                start,
                self.pos,
                format!("malformed number `{raw}`"),
            )),
        }
    }

    fn escape(&mut self, start: usize, out: &mut String) -> Result<(), JsError> {
        // Positioned on the backslash.
        self.pos += 1;
        let Some(c) = self.peek_at(self.pos) else {
            return Err(self.err(JsErrorKind::Lexical, start, self.pos, "dangling escape"));
        };
        self.pos += 1;
        match c {
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            't' => out.push('\t'),
            'b' => out.push('\u{8}'),
            'f' => out.push('\u{c}'),
            'v' => out.push('\u{b}'),
            '0' if !matches!(self.peek_at(self.pos), Some(d) if d.is_ascii_digit()) => {
                out.push('\0')
            }
            '\n' => {}
            '\r' => {
                if self.peek_at(self.pos) == Some('\n') {
                    self.pos += 1;
                }
            }
            'x' => {
                let code = self.hex_digits(2, start)?;
                out.push(char::from_u32(code).expect("two hex digits form a char"));
            }
            'u' => {
                let code = if self.peek_at(self.pos) == Some('{') {
                    self.pos += 1;
                    let mut code: u32 = 0;
                    let mut n = 0;
                    while let Some(d) = self.peek_at(self.pos).and_then(|ch| ch.to_digit(16)) {
                        code = code.saturating_mul(16).saturating_add(d);
                        self.pos += 1;
                        n += 1;
                    }
                    if n == 0 || self.peek_at(self.pos) != Some('}') {
                        return Err(self.err(
                            JsErrorKind::Lexical,
                            start,
                            self.pos,
                            "malformed unicode escape",
                        ));
                    }
                    self.pos += 1;
                    code
                } else {
                    let hi = self.hex_digits(4, start)?;
                    if (0xd800..0xdc00).contains(&hi)
                        && self.peek_at(self.pos) == Some('\\')
                        && self.peek_at(self.pos + 1) == Some('u')
                    {
                        let save = self.pos;
                        self.pos += 2;
                        let lo = self.hex_digits(4, start)?;
                        if (0xdc00..0xe000).contains(&lo) {
                            0x10000 + ((hi - 0xd800) << 10) + (lo - 0xdc00)
                        } else {
                            self.pos = save;
                            hi
                        }
                    } else {
                        hi
                    }
                };
                match char::from_u32(code) {
                    Some(ch) => out.push(ch),
                    None => {
                        return Err(self.err(
                            JsErrorKind::Lexical,
                            start,
                            self.pos,
                            "escape is not a unicode scalar value",
                        ))
                    }
                }
            }
            other => out.push(other),
        }
        Ok(())
    }

    fn hex_digits(&mut self, n: usize, start: usize) -> Result<u32, JsError> {
        let mut code = 0;
        for _ in 0..n {
            match self.peek_at(self.pos).and_then(|ch| ch.to_digit(16)) {
                Some(d) => {
                    code = code * 16 + d;
                    self.pos += 1;
                }
                None => {
                    return Err(self.err(
                        JsErrorKind::Lexical,
                        start,
                        self.pos,
                        "malformed hex escape",
                    ))
                }
            }
        }
        Ok(code)
    }

    fn string(&mut self, quote: char) -> Result<TokenKind, JsError> {
        let start = self.pos;
        self.pos += 1;
        let mut value = String::new();
        loop {
            match self.peek_at(self.pos) {
                None | Some('\n') => {
                    return Err(self.err(
                        JsErrorKind::Lexical,
                        start,
                        self.pos,
                        "unterminated string literal",
                    ))
                }
                Some(c) if c == quote => {
                    self.pos += 1;
                    return Ok(TokenKind::Str(value));
                }
                Some('\\') => self.escape(start, &mut value)?,
                Some(c) => {
                    value.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    /// Scans template characters after a backtick or a closing `}`.
    fn template(&mut self, start: usize, opened: bool) -> Result<TokenKind, JsError> {
        let mut cooked = String::new();
        loop {
            match self.peek_at(self.pos) {
                None => {
                    return Err(self.err(
                        JsErrorKind::UnbalancedTemplate,
                        start,
                        self.pos,
                        "unterminated template literal",
                    ))
                }
                Some('`') => {
                    self.pos += 1;
                    let part = if opened {
                        TemplatePart::Full
                    } else {
                        TemplatePart::Tail
                    };
                    return Ok(TokenKind::Template { cooked, part });
                }
                Some('$') if self.peek_at(self.pos + 1) == Some('{') => {
                    self.pos += 2;
                    self.braces.push(Brace::Template);
                    let part = if opened {
                        TemplatePart::Head
                    } else {
                        TemplatePart::Middle
                    };
                    return Ok(TokenKind::Template { cooked, part });
                }
                Some('\\') => self.escape(start, &mut cooked)?,
                Some(c) => {
                    cooked.push(c);
                    self.pos += 1;
                }
            }
        }
    }
}

/// Keeps plain decimal spellings; anything else is rewritten in shortest
/// round-trip decimal form.
pub(crate) fn canonical_number(raw: &str) -> Option<String> {
    let plain = {
        let (int, frac) = match raw.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (raw, None),
        };
        let int_ok = int == "0"
            || (!int.is_empty()
                && !int.starts_with('0')
                && int.bytes().all(|b| b.is_ascii_digit()));
        let frac_ok = frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()));
        int_ok && frac_ok
    };
    if plain {
        return Some(raw.to_string());
    }
    let cleaned: String = raw.chars().filter(|c| *c != '_').collect();
    let value = if let Some(hex) = cleaned
        .strip_prefix("0x")
        .or_else(|| cleaned.strip_prefix("0X"))
    {
        u128::from_str_radix(hex, 16).ok()? as f64
    } else if let Some(oct) = cleaned
        .strip_prefix("0o")
        .or_else(|| cleaned.strip_prefix("0O"))
    {
        u128::from_str_radix(oct, 8).ok()? as f64
    } else if let Some(bin) = cleaned
        .strip_prefix("0b")
        .or_else(|| cleaned.strip_prefix("0B"))
    {
        u128::from_str_radix(bin, 2).ok()? as f64
    } else {
        let text = if cleaned.ends_with('.') {
            &cleaned[..cleaned.len() - 1]
        } else {
            &cleaned
        };
        text.parse::<f64>().ok()?
    };
    if !value.is_finite() {
        return None;
    }
    Some(format!("{value}"))
}

pub fn lex(src: &str) -> Result<Vec<Token>, JsError> {
    Lexer {
        src,
        chars: src.char_indices().collect(),
        pos: 0,
        braces: Vec::new(),
    }
    .run()
}

/// Surface tokens of `src`, as they are spelled in the source.
pub fn tokenize(src: &str) -> Result<Vec<String>, JsError> {
    Ok(lex(src)?
        .into_iter()
        .map(|t| src[t.span.start..t.span.end].to_string())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        lex(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn punctuators_longest_match() {
        assert_eq!(
            kinds("a===b!==c"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Punct("==="),
                TokenKind::Ident("b".into()),
                TokenKind::Punct("!=="),
                TokenKind::Ident("c".into()),
            ]
        );
    }

    #[test]
    fn strings_decode_escapes() {
        assert_eq!(
            kinds(r#"'it\'s' "a\nb" '中\x41'"#),
            vec![
                TokenKind::Str("it's".into()),
                TokenKind::Str("a\nb".into()),
                TokenKind::Str("中A".into()),
            ]
        );
    }

    #[test]
    fn template_parts() {
        let ks = kinds("`a${b}c${d}e`");
        assert_eq!(
            ks,
            vec![
                TokenKind::Template {
                    cooked: "a".into(),
                    part: TemplatePart::Head
                },
                TokenKind::Ident("b".into()),
                TokenKind::Template {
                    cooked: "c".into(),
                    part: TemplatePart::Middle
                },
                TokenKind::Ident("d".into()),
                TokenKind::Template {
                    cooked: "e".into(),
                    part: TemplatePart::Tail
                },
            ]
        );
    }

    #[test]
    fn unterminated_template_is_unbalanced() {
        let err = lex("`abc${x}").unwrap_err();
        assert_eq!(err.kind, JsErrorKind::UnbalancedTemplate);
    }

    #[test]
    fn numbers_canonicalized() {
        assert_eq!(canonical_number("16").as_deref(), Some("16"));
        assert_eq!(canonical_number("1.50").as_deref(), Some("1.50"));
        assert_eq!(canonical_number("0x10").as_deref(), Some("16"));
        assert_eq!(canonical_number("1e3").as_deref(), Some("1000"));
        assert_eq!(canonical_number(".5").as_deref(), Some("0.5"));
        assert_eq!(canonical_number("007").as_deref(), Some("7"));
    }

    #[test]
    fn bad_characters_are_lexical_errors() {
        let err = lex("a ∑ b").unwrap_err();
        assert_eq!(err.kind, JsErrorKind::Lexical);
        assert_eq!(err.span.start, 2);
        assert!(lex("'abc").is_err());
    }

    #[test]
    fn tokenize_returns_surface_text() {
        assert_eq!(
            tokenize("{a || 'b';}").unwrap(),
            vec!["{", "a", "||", "'b'", ";", "}"]
        );
    }
}
