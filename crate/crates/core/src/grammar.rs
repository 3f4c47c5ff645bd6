//! ASDL grammars: parsing, pretty-printing and the type/constructor tables
//! the transition system consults for legality.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// The grammar shipped for the JavaScript logic-expression subset.
pub const JAVASCRIPT_ASDL: &str = include_str!("../data/javascript.asdl");

/// Primitive types every grammar understands. Leaves under these hold tokens.
pub const PRIMITIVE_TYPES: [&str; 2] = ["identifier", "literal"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error("{line}:{col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("constructor `{ctor}` has field `{field}` of unknown type `{ty}`")]
    UnknownFieldType {
        ctor: String,
        field: String,
        ty: String,
    },
    #[error("duplicate constructor `{0}`")]
    DuplicateConstructor(String),
    #[error("constructor `{ctor}` declares field `{field}` twice")]
    DuplicateField { ctor: String, field: String },
    #[error("type `{0}` is declared twice")]
    DuplicateType(String),
    #[error("grammar has no productions")]
    NoProductions,
    #[error("unknown type `{0}`")]
    UnknownType(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cardinality {
    Single,
    Optional,
    Multiple,
}

impl Cardinality {
    fn suffix(self) -> &'static str {
        match self {
            Cardinality::Single => "",
            Cardinality::Optional => "?",
            Cardinality::Multiple => "*",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub ty: String,
    pub cardinality: Cardinality,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{} {}", self.ty, self.cardinality.suffix(), self.name)
    }
}

/// Index of a constructor in declaration order. Doubles as its action index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CtorId(pub usize);

/// Dense index over every (constructor, field) pair, plus one for the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constructor {
    pub name: String,
    pub result_type: String,
    pub fields: Vec<Field>,
}

impl fmt::Display for Constructor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, field) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{field}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone)]
pub struct Grammar {
    types: Vec<String>,
    constructors: Vec<Constructor>,
    primitive_types: BTreeSet<String>,
    root_type: String,
    by_name: HashMap<String, CtorId>,
    by_type: HashMap<String, Vec<CtorId>>,
    field_offsets: Vec<usize>,
    field_count: usize,
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        self.types == other.types
            && self.constructors == other.constructors
            && self.primitive_types == other.primitive_types
            && self.root_type == other.root_type
    }
}

impl Eq for Grammar {}

impl Grammar {
    /// The shipped JavaScript grammar.
    pub fn javascript() -> Grammar {
        parse_asdl(JAVASCRIPT_ASDL).expect("shipped grammar parses")
    }

    fn build(productions: Vec<(String, Vec<Constructor>)>) -> Result<Grammar, GrammarError> {
        if productions.is_empty() {
            return Err(GrammarError::NoProductions);
        }
        let primitive_types: BTreeSet<String> =
            PRIMITIVE_TYPES.iter().map(|s| s.to_string()).collect();
        let mut types = Vec::new();
        let mut constructors = Vec::new();
        for (ty, ctors) in productions {
            if types.contains(&ty) || primitive_types.contains(&ty) {
                return Err(GrammarError::DuplicateType(ty));
            }
            types.push(ty);
            constructors.extend(ctors);
        }
        let mut by_name = HashMap::new();
        let mut by_type: HashMap<String, Vec<CtorId>> =
            types.iter().map(|t| (t.clone(), Vec::new())).collect();
        let mut field_offsets = Vec::with_capacity(constructors.len());
        let mut field_count = 0;
        for (i, ctor) in constructors.iter().enumerate() {
            if by_name.insert(ctor.name.clone(), CtorId(i)).is_some() {
                return Err(GrammarError::DuplicateConstructor(ctor.name.clone()));
            }
            let mut seen = BTreeSet::new();
            for field in &ctor.fields {
                if !seen.insert(field.name.as_str()) {
                    return Err(GrammarError::DuplicateField {
                        ctor: ctor.name.clone(),
                        field: field.name.clone(),
                    });
                }
                if !types.contains(&field.ty) && !primitive_types.contains(&field.ty) {
                    return Err(GrammarError::UnknownFieldType {
                        ctor: ctor.name.clone(),
                        field: field.name.clone(),
                        ty: field.ty.clone(),
                    });
                }
            }
            by_type
                .get_mut(&ctor.result_type)
                .expect("result type declared")
                .push(CtorId(i));
            field_offsets.push(field_count);
            field_count += ctor.fields.len();
        }
        let root_type = types[0].clone();
        Ok(Grammar {
            types,
            constructors,
            primitive_types,
            root_type,
            by_name,
            by_type,
            field_offsets,
            field_count,
        })
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn constructors(&self) -> &[Constructor] {
        &self.constructors
    }

    pub fn primitive_types(&self) -> &BTreeSet<String> {
        &self.primitive_types
    }

    pub fn root_type(&self) -> &str {
        &self.root_type
    }

    pub fn constructor(&self, id: CtorId) -> &Constructor {
        &self.constructors[id.0]
    }

    pub fn ctor_id(&self, name: &str) -> Option<CtorId> {
        self.by_name.get(name).copied()
    }

    pub fn is_primitive(&self, ty: &str) -> bool {
        self.primitive_types.contains(ty)
    }

    pub fn is_declared(&self, ty: &str) -> bool {
        self.by_type.contains_key(ty)
    }

    /// Constructors producing `ty`, in declaration order. Primitive types have
    /// none.
    pub fn constructors_for_type(&self, ty: &str) -> Result<Vec<&Constructor>, GrammarError> {
        Ok(self
            .ctor_ids_for_type(ty)?
            .iter()
            .map(|id| self.constructor(*id))
            .collect())
    }

    pub fn ctor_ids_for_type(&self, ty: &str) -> Result<&[CtorId], GrammarError> {
        if let Some(ids) = self.by_type.get(ty) {
            Ok(ids)
        } else if self.is_primitive(ty) {
            Ok(&[])
        } else {
            Err(GrammarError::UnknownType(ty.to_string()))
        }
    }

    pub fn field_id(&self, ctor: CtorId, field_index: usize) -> FieldId {
        debug_assert!(field_index < self.constructors[ctor.0].fields.len());
        FieldId(self.field_offsets[ctor.0] + field_index)
    }

    /// The pseudo-field the root constructor is applied to.
    pub fn root_field(&self) -> FieldId {
        FieldId(self.field_count)
    }

    /// Number of distinct field ids, the root pseudo-field included.
    pub fn field_slots(&self) -> usize {
        self.field_count + 1
    }

    /// Renders the grammar as ASDL text that parses back to an equal grammar.
    pub fn to_asdl(&self) -> String {
        let mut out = String::new();
        for ty in &self.types {
            let ids = &self.by_type[ty];
            let pad = " ".repeat(ty.chars().count() + 1);
            for (i, id) in ids.iter().enumerate() {
                let ctor = self.constructor(*id);
                if i == 0 {
                    out.push_str(&format!("{ty} = "));
                } else {
                    out.push_str(&format!("{pad}| "));
                }
                if ctor.fields.is_empty() {
                    out.push_str(&ctor.name);
                } else {
                    out.push_str(&ctor.to_string());
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Eq,
    Bar,
    LParen,
    RParen,
    Comma,
    Question,
    Star,
}

struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Lexed>, GrammarError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let simple = match c {
                '=' => Some(Tok::Eq),
                '|' => Some(Tok::Bar),
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                ',' => Some(Tok::Comma),
                '?' => Some(Tok::Question),
                '*' => Some(Tok::Star),
                _ => None,
            };
            if let Some(tok) = simple {
                out.push(Lexed {
                    tok,
                    line: li + 1,
                    col,
                });
                i += 1;
            } else if c == '#' {
                break;
            } else if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Lexed {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line: li + 1,
                    col,
                });
            } else {
                return Err(GrammarError::Syntax {
                    line: li + 1,
                    col,
                    msg: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|l| &l.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|l| (l.line, l.col))
            .unwrap_or(self.end)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, GrammarError> {
        let (line, col) = self.here();
        Err(GrammarError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn ident(&mut self, what: &str) -> Result<String, GrammarError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error(format!("expected {what}")),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), GrammarError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn production(&mut self) -> Result<(String, Vec<Constructor>), GrammarError> {
        let ty = self.ident("type name")?;
        self.expect(Tok::Eq, "`=`")?;
        let mut ctors = vec![self.constructor(&ty)?];
        while self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            ctors.push(self.constructor(&ty)?);
        }
        match (self.peek(), self.peek2()) {
            (None, _) | (Some(Tok::Ident(_)), Some(Tok::Eq)) => Ok((ty, ctors)),
            _ => self.error("expected `|` or a new production"),
        }
    }

    fn constructor(&mut self, ty: &str) -> Result<Constructor, GrammarError> {
        let name = self.ident("constructor name")?;
        let mut fields = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            if self.peek() != Some(&Tok::RParen) {
                loop {
                    fields.push(self.field()?);
                    if self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        Ok(Constructor {
            name,
            result_type: ty.to_string(),
            fields,
        })
    }

    fn field(&mut self) -> Result<Field, GrammarError> {
        let ty = self.ident("field type")?;
        let cardinality = match self.peek() {
            Some(Tok::Question) => {
                self.pos += 1;
                Cardinality::Optional
            }
            Some(Tok::Star) => {
                self.pos += 1;
                Cardinality::Multiple
            }
            _ => Cardinality::Single,
        };
        let name = match self.peek() {
            Some(Tok::Ident(_)) => self.ident("field name")?,
            // Anonymous fields are named after their type.
            _ => ty.clone(),
        };
        Ok(Field {
            name,
            ty,
            cardinality,
        })
    }
}

/// Parses ASDL text. Constructor order is preserved; it defines action indices.
pub fn parse_asdl(text: &str) -> Result<Grammar, GrammarError> {
    let toks = lex(text)?;
    let end = (text.lines().count().max(1), 1);
    let mut parser = Parser { toks, pos: 0, end };
    let mut productions = Vec::new();
    while parser.peek().is_some() {
        productions.push(parser.production()?);
    }
    Grammar::build(productions)
}
