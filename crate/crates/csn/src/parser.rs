//! Concrete textual syntax (`.csn` files): lexer, parser, desugarer, and
//! pretty-printer.
//!
//! A source unit contains, in any order: one mandatory `interface { ... }`
//! block, an optional `world { ... }` block, named object templates
//! (`Name(params) = { ... }`), and sensor declarations
//! (`sensor NAME at (X, Y) radius R energy E object EXPR run P1, P2`).
//!
//! Three pieces of sugar are eliminated while parsing:
//! `P ; Q` becomes `let s = P in Q` with a fresh binder unused in `Q`;
//! one-operand `install E` becomes `install loc E`; and a bare call
//! `f(args)` becomes `loc.f(args)`. Template uses are expanded by
//! substituting their (closed) value arguments into the template body, so
//! the resulting unit contains only plain object literals.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::semantics::{Network, NetworkError, Sensor};
use crate::syntax::{
    substitute_value, value_free_vars, Label, Method, Object, Program, Value, Variable,
};
use crate::types::{Interface, MethodType, ObjKind, ObjType, Type, TypeError};
use crate::world::{FieldDecl, ResolveError, WorldDecl};

/// A parse or lexical error, with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(line: usize, col: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        col,
        message: message.into(),
    })
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Dot,
    Eq,
    Arrow,
    KwLet,
    KwIn,
    KwInstall,
    KwNet,
    KwLoc,
    KwOff,
    KwSensor,
    KwWorld,
    KwInterface,
    KwAt,
    KwRadius,
    KwEnergy,
    KwObject,
    KwRun,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::KwLet => "`let`".into(),
            Tok::KwIn => "`in`".into(),
            Tok::KwInstall => "`install`".into(),
            Tok::KwNet => "`net`".into(),
            Tok::KwLoc => "`loc`".into(),
            Tok::KwOff => "`off`".into(),
            Tok::KwSensor => "`sensor`".into(),
            Tok::KwWorld => "`world`".into(),
            Tok::KwInterface => "`interface`".into(),
            Tok::KwAt => "`at`".into(),
            Tok::KwRadius => "`radius`".into(),
            Tok::KwEnergy => "`energy`".into(),
            Tok::KwObject => "`object`".into(),
            Tok::KwRun => "`run`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "let" => Tok::KwLet,
        "in" => Tok::KwIn,
        "install" => Tok::KwInstall,
        "net" => Tok::KwNet,
        "loc" => Tok::KwLoc,
        "off" => Tok::KwOff,
        "sensor" => Tok::KwSensor,
        "world" => Tok::KwWorld,
        "interface" => Tok::KwInterface,
        "at" => Tok::KwAt,
        "radius" => Tok::KwRadius,
        "energy" => Tok::KwEnergy,
        "object" => Tok::KwObject,
        "run" => Tok::KwRun,
        _ => return None,
    })
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn lex(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        loop {
            // Skip whitespace and `//` comments.
            loop {
                match self.chars.peek() {
                    Some(c) if c.is_whitespace() => {
                        self.bump();
                    }
                    Some('/') => {
                        let mut ahead = self.chars.clone();
                        ahead.next();
                        if ahead.peek() == Some(&'/') {
                            while let Some(&c) = self.chars.peek() {
                                if c == '\n' {
                                    break;
                                }
                                self.bump();
                            }
                        } else {
                            break;
                        }
                    }
                    _ => break,
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(&c) = self.chars.peek() else {
                out.push(Token {
                    tok: Tok::Eof,
                    line,
                    col,
                });
                return Ok(out);
            };
            let tok = match c {
                '{' => {
                    self.bump();
                    Tok::LBrace
                }
                '}' => {
                    self.bump();
                    Tok::RBrace
                }
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                ';' => {
                    self.bump();
                    Tok::Semi
                }
                ':' => {
                    self.bump();
                    Tok::Colon
                }
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                '=' => {
                    self.bump();
                    Tok::Eq
                }
                '-' => {
                    self.bump();
                    match self.chars.peek() {
                        Some('>') => {
                            self.bump();
                            Tok::Arrow
                        }
                        Some(d) if d.is_ascii_digit() => self.number(line, col, true)?,
                        _ => return err(line, col, "stray `-` (expected `->` or a number)"),
                    }
                }
                '"' => self.string(line, col)?,
                '#' => {
                    return err(
                        line,
                        col,
                        "`#` is reserved for generated names and cannot appear in source",
                    )
                }
                d if d.is_ascii_digit() => self.number(line, col, false)?,
                a if a.is_alphabetic() || a == '_' => {
                    let mut word = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c.is_alphanumeric() || c == '_' {
                            word.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    keyword(&word).unwrap_or(Tok::Ident(word))
                }
                other => return err(line, col, format!("unexpected character `{other}`")),
            };
            out.push(Token { tok, line, col });
        }
    }

    fn number(&mut self, line: usize, col: usize, negative: bool) -> Result<Tok, ParseError> {
        let mut text = String::new();
        if negative {
            text.push('-');
        }
        let digits = |text: &mut String, this: &mut Self| {
            while let Some(&c) = this.chars.peek() {
                if c.is_ascii_digit() {
                    text.push(c);
                    this.bump();
                } else {
                    break;
                }
            }
        };
        digits(&mut text, self);
        if self.chars.peek() == Some(&'.') {
            // A dot only continues the number when a digit follows, so that
            // a method call on a number still lexes (`x.f()` never gets here
            // anyway; this guards forms like `1.max` in future surface).
            let mut ahead = self.chars.clone();
            ahead.next();
            if ahead.peek().is_some_and(|c| c.is_ascii_digit()) {
                text.push('.');
                self.bump();
                digits(&mut text, self);
            }
        }
        if matches!(self.chars.peek(), Some('e') | Some('E')) {
            text.push('e');
            self.bump();
            if matches!(self.chars.peek(), Some('+') | Some('-')) {
                text.push(self.bump().unwrap());
            }
            let before = text.len();
            digits(&mut text, self);
            if text.len() == before {
                return err(line, col, "exponent without digits");
            }
        }
        match text.parse::<f64>() {
            Ok(n) => Ok(Tok::Number(n)),
            Err(_) => err(line, col, format!("bad number literal `{text}`")),
        }
    }

    fn string(&mut self, line: usize, col: usize) -> Result<Tok, ParseError> {
        self.bump(); // opening quote
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return err(line, col, "unterminated string literal"),
                Some('"') => return Ok(Tok::Str(s)),
                Some('\n') => return err(line, col, "string literal spans a line break"),
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    other => {
                        return err(
                            line,
                            col,
                            format!(
                                "unknown escape `\\{}`",
                                other.map(String::from).unwrap_or_default()
                            ),
                        )
                    }
                },
                Some(c) => s.push(c),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// AST for whole files
// ---------------------------------------------------------------------------

/// A named object template; uses are expanded away during parsing.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub name: String,
    pub params: Vec<Variable>,
    pub body: Object,
}

/// One sensor declaration, with its template use (if any) already expanded.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDecl {
    pub name: String,
    pub position: (f64, f64),
    pub radius: f64,
    pub energy: f64,
    pub object: Object,
    pub queue: Vec<Program>,
}

/// A parsed `.csn` file.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceUnit {
    /// Interface entries in declaration order (builtins not yet merged).
    pub interface: Vec<(Label, MethodType)>,
    pub templates: Vec<Template>,
    pub nodes: Vec<NodeDecl>,
    pub world: WorldDecl,
}

/// Failure while turning a parsed unit into a runnable network.
#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl SourceUnit {
    /// The declared global interface merged with the builtin signatures.
    pub fn declared_interface(&self) -> Result<Interface, TypeError> {
        Interface::new(self.interface.iter().cloned().collect())
    }

    /// Builds the runnable network; `base` anchors relative grid CSV paths.
    pub fn build_network(&self, base: Option<&Path>) -> Result<Network, BuildError> {
        let world = crate::world::resolve_world(&self.world, base)?;
        let sensors = self
            .nodes
            .iter()
            .map(|n| {
                Sensor::new(
                    &n.name,
                    n.object.clone(),
                    n.queue.clone(),
                    n.position,
                    n.radius,
                    n.energy,
                )
            })
            .collect();
        Ok(Network::new(sensors, world)?)
    }

    /// Concrete syntax for the unit; parsing it back yields an equivalent
    /// unit (objects and queues up to alpha-conversion, templates already
    /// expanded).
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        out.push_str("interface {\n");
        for (label, sig) in &self.interface {
            out.push_str(&format!("  {}: {}\n", label, method_type_surface(sig)));
        }
        out.push_str("}\n\nworld {\n");
        out.push_str(&format!("  e_in = {}\n", self.world.e_in));
        out.push_str(&format!("  e_out = {}\n", self.world.e_out));
        out.push_str(&format!("  field = {}\n", field_surface(&self.world.field)));
        out.push_str("}\n\n");
        for n in &self.nodes {
            out.push_str(&format!(
                "sensor {} at ({}, {}) radius {} energy {} object {}",
                n.name, n.position.0, n.position.1, n.radius, n.energy, n.object
            ));
            if !n.queue.is_empty() {
                let programs: Vec<String> = n.queue.iter().map(|p| p.to_string()).collect();
                out.push_str(&format!(" run {}", programs.join(", ")));
            }
            out.push('\n');
        }
        out
    }
}

fn type_surface(t: &Type) -> String {
    match t {
        Type::Builtin => "B".into(),
        Type::Net => "Net".into(),
        Type::Obj(o) => {
            let entries: Vec<String> = o
                .methods
                .iter()
                .map(|(l, sig)| format!("{}: {}", l, method_type_surface(sig)))
                .collect();
            format!("{{{}}}", entries.join(", "))
        }
    }
}

fn method_type_surface(sig: &MethodType) -> String {
    let params: Vec<String> = sig.params.iter().map(type_surface).collect();
    format!("({}) -> {}", params.join(", "), type_surface(&sig.ret))
}

fn field_surface(f: &FieldDecl) -> String {
    match f {
        FieldDecl::Constant(v) => format!("const({v})"),
        FieldDecl::Gaussian {
            center,
            peak,
            sigma,
        } => format!("gaussian({}, {}, {}, {})", center.0, center.1, peak, sigma),
        FieldDecl::GridFile { path, origin, cell } => format!(
            "grid({:?}, {}, {}, {})",
            path, origin.0, origin.1, cell
        ),
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

/// Parses a standalone program (the whole input must be one program).
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let tokens = Lexer::new(text).lex()?;
    let mut p = Parser::new(tokens);
    let program = p.program()?;
    p.expect_eof()?;
    Ok(program)
}

/// Parses a whole `.csn` source unit.
pub fn parse_network(text: &str) -> Result<SourceUnit, ParseError> {
    let tokens = Lexer::new(text).lex()?;
    Parser::new(tokens).source_unit()
}

enum ObjExpr {
    Literal(Object),
    Inst {
        name: String,
        args: Vec<Value>,
        line: usize,
        col: usize,
    },
}

struct RawNode {
    name: String,
    name_pos: (usize, usize),
    position: (f64, f64),
    radius: f64,
    energy: f64,
    object: ObjExpr,
    queue: Vec<Program>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    seq_counter: usize,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        Parser {
            tokens,
            pos: 0,
            seq_counter: 0,
        }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek2(&self) -> &Tok {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn prev_line(&self) -> usize {
        self.tokens[self.pos.saturating_sub(1)].line
    }

    fn expect(&mut self, want: &Tok) -> Result<Token, ParseError> {
        let t = self.peek().clone();
        if &t.tok == want {
            Ok(self.bump())
        } else {
            err(
                t.line,
                t.col,
                format!("expected {}, found {}", want.describe(), t.tok.describe()),
            )
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        let t = self.peek();
        if t.tok == Tok::Eof {
            Ok(())
        } else {
            err(
                t.line,
                t.col,
                format!("expected end of input, found {}", t.tok.describe()),
            )
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize), ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Ident(name) => {
                self.bump();
                Ok((name, t.line, t.col))
            }
            _ => err(
                t.line,
                t.col,
                format!("expected {what}, found {}", t.tok.describe()),
            ),
        }
    }

    fn variable(&mut self, what: &str) -> Result<Variable, ParseError> {
        // Reserved words lex as keywords, so an identifier is always a
        // legal variable name.
        let (name, _, _) = self.ident(what)?;
        Ok(Variable::new(name))
    }

    fn label(&mut self) -> Result<(Label, usize, usize), ParseError> {
        let (name, line, col) = self.ident("a method label")?;
        Ok((Label::new(name), line, col))
    }

    fn number(&mut self, what: &str) -> Result<(f64, usize, usize), ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Number(n) => {
                self.bump();
                Ok((n, t.line, t.col))
            }
            _ => err(
                t.line,
                t.col,
                format!("expected {what}, found {}", t.tok.describe()),
            ),
        }
    }

    fn fresh_seq_binder(&mut self) -> Variable {
        let name = format!("seq#{}", self.seq_counter);
        self.seq_counter += 1;
        Variable::new(name)
    }

    // -- programs ----------------------------------------------------------

    fn program(&mut self) -> Result<Program, ParseError> {
        if self.peek().tok == Tok::KwLet {
            self.bump();
            let binder = self.variable("a binder name")?;
            self.expect(&Tok::Eq)?;
            let bound = self.program()?;
            self.expect(&Tok::KwIn)?;
            let body = self.program()?;
            return Ok(Program::Let {
                binder,
                bound: Box::new(bound),
                body: Box::new(body),
            });
        }
        let first = self.simple_program()?;
        if self.peek().tok == Tok::Semi {
            self.bump();
            let rest = self.program()?;
            let binder = self.fresh_seq_binder();
            return Ok(Program::Let {
                binder,
                bound: Box::new(first),
                body: Box::new(rest),
            });
        }
        Ok(first)
    }

    fn simple_program(&mut self) -> Result<Program, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::KwInstall => {
                self.bump();
                let target = self.value()?;
                // A second operand must start on the same line; otherwise the
                // next token belongs to the surrounding context (e.g. the
                // following method binding in an object literal).
                if self.starts_value() && self.peek().line == self.prev_line() {
                    let addition = self.value()?;
                    Ok(Program::Install { target, addition })
                } else {
                    Ok(Program::Install {
                        target: Value::Loc,
                        addition: target,
                    })
                }
            }
            Tok::LParen if *self.peek2() != Tok::RParen => {
                self.bump();
                let p = self.program()?;
                self.expect(&Tok::RParen)?;
                Ok(p)
            }
            Tok::Ident(name) if *self.peek2() == Tok::LParen => {
                // Bare call: `f(args)` is sugar for `loc.f(args)`.
                let name = name.clone();
                self.bump();
                let label = Label::new(name);
                let args = self.call_args()?;
                Ok(Program::Call {
                    target: Value::Loc,
                    method: label,
                    args,
                })
            }
            _ => {
                let v = self.value()?;
                if self.peek().tok == Tok::Dot {
                    self.bump();
                    let (label, _, _) = self.label()?;
                    let args = self.call_args()?;
                    Ok(Program::Call {
                        target: v,
                        method: label,
                        args,
                    })
                } else {
                    Ok(Program::Val(v))
                }
            }
        }
    }

    fn call_args(&mut self) -> Result<Vec<Value>, ParseError> {
        self.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                args.push(self.value()?);
                if self.peek().tok == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen)?;
        Ok(args)
    }

    fn starts_value(&self) -> bool {
        match &self.peek().tok {
            Tok::Number(_) | Tok::Str(_) | Tok::KwNet | Tok::KwLoc | Tok::Ident(_)
            | Tok::LBrace => true,
            Tok::LParen => *self.peek2() == Tok::RParen, // only the unit value
            _ => false,
        }
    }

    fn value(&mut self) -> Result<Value, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Number(n) => {
                self.bump();
                Ok(Value::number(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Value::symbol(&s))
            }
            Tok::KwNet => {
                self.bump();
                Ok(Value::Net)
            }
            Tok::KwLoc => {
                self.bump();
                Ok(Value::Loc)
            }
            Tok::LParen => {
                self.bump();
                self.expect(&Tok::RParen)?;
                Ok(Value::unit())
            }
            Tok::LBrace => Ok(Value::Obj(self.object_literal()?)),
            Tok::Ident(name) => {
                self.bump();
                Ok(Value::Var(Variable::new(name)))
            }
            other => err(
                t.line,
                t.col,
                format!("expected a value, found {}", other.describe()),
            ),
        }
    }

    fn object_literal(&mut self) -> Result<Object, ParseError> {
        self.expect(&Tok::LBrace)?;
        let mut object = Object::new();
        loop {
            while self.peek().tok == Tok::Comma {
                self.bump();
            }
            if self.peek().tok == Tok::RBrace {
                self.bump();
                return Ok(object);
            }
            let (label, line, col) = self.label()?;
            if object.contains(&label) {
                return err(line, col, format!("duplicate method label `{label}`"));
            }
            self.expect(&Tok::Eq)?;
            self.expect(&Tok::LParen)?;
            let mut params = Vec::new();
            if self.peek().tok != Tok::RParen {
                loop {
                    let param = self.variable("a parameter name")?;
                    if params.contains(&param) {
                        let t = self.tokens[self.pos - 1].clone();
                        return err(t.line, t.col, format!("duplicate parameter `{param}`"));
                    }
                    params.push(param);
                    if self.peek().tok == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(&Tok::RParen)?;
            let body = self.program()?;
            object.insert(label, Method { params, body });
        }
    }

    // -- interface and types -----------------------------------------------

    fn interface_block(&mut self) -> Result<Vec<(Label, MethodType)>, ParseError> {
        self.expect(&Tok::KwInterface)?;
        self.expect(&Tok::LBrace)?;
        let mut entries: Vec<(Label, MethodType)> = Vec::new();
        loop {
            while matches!(self.peek().tok, Tok::Comma | Tok::Semi) {
                self.bump();
            }
            if self.peek().tok == Tok::RBrace {
                self.bump();
                return Ok(entries);
            }
            let (label, line, col) = self.label()?;
            if entries.iter().any(|(l, _)| *l == label) {
                return err(line, col, format!("duplicate interface entry `{label}`"));
            }
            self.expect(&Tok::Colon)?;
            let sig = self.method_type()?;
            entries.push((label, sig));
        }
    }

    fn method_type(&mut self) -> Result<MethodType, ParseError> {
        self.expect(&Tok::LParen)?;
        let mut params = Vec::new();
        if self.peek().tok != Tok::RParen {
            loop {
                params.push(self.type_expr()?);
                if self.peek().tok == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen)?;
        self.expect(&Tok::Arrow)?;
        let ret = self.type_expr()?;
        Ok(MethodType::new(params, ret))
    }

    fn type_expr(&mut self) -> Result<Type, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Ident(name) if name == "B" => {
                self.bump();
                Ok(Type::Builtin)
            }
            Tok::Ident(name) if name == "Net" => {
                self.bump();
                Ok(Type::Net)
            }
            Tok::LBrace => {
                self.bump();
                let mut methods = std::collections::BTreeMap::new();
                loop {
                    while matches!(self.peek().tok, Tok::Comma | Tok::Semi) {
                        self.bump();
                    }
                    if self.peek().tok == Tok::RBrace {
                        self.bump();
                        return Ok(Type::Obj(ObjType {
                            kind: ObjKind::Plain,
                            methods,
                        }));
                    }
                    let (label, line, col) = self.label()?;
                    if methods.contains_key(&label) {
                        return err(line, col, format!("duplicate type entry `{label}`"));
                    }
                    self.expect(&Tok::Colon)?;
                    let sig = self.method_type()?;
                    methods.insert(label, sig);
                }
            }
            other => err(
                t.line,
                t.col,
                format!("expected a type (`B`, `Net`, or `{{...}}`), found {}", other.describe()),
            ),
        }
    }

    // -- world --------------------------------------------------------------

    fn world_block(&mut self) -> Result<WorldDecl, ParseError> {
        self.expect(&Tok::KwWorld)?;
        self.expect(&Tok::LBrace)?;
        let mut decl = WorldDecl::default();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        loop {
            while self.peek().tok == Tok::Semi {
                self.bump();
            }
            if self.peek().tok == Tok::RBrace {
                self.bump();
                return Ok(decl);
            }
            let (key, line, col) = self.ident("a world entry (`e_in`, `e_out`, `field`)")?;
            if !seen.insert(key.clone()) {
                return err(line, col, format!("duplicate world entry `{key}`"));
            }
            self.expect(&Tok::Eq)?;
            match key.as_str() {
                "e_in" => decl.e_in = self.number("a number")?.0,
                "e_out" => decl.e_out = self.number("a number")?.0,
                "field" => decl.field = self.field_expr()?,
                other => {
                    return err(
                        line,
                        col,
                        format!("unknown world entry `{other}` (expected `e_in`, `e_out`, `field`)"),
                    )
                }
            }
        }
    }

    fn field_expr(&mut self) -> Result<FieldDecl, ParseError> {
        let (kind, line, col) = self.ident("a field model (`const`, `gaussian`, `grid`)")?;
        self.expect(&Tok::LParen)?;
        let decl = match kind.as_str() {
            "const" => FieldDecl::Constant(self.number("a number")?.0),
            "gaussian" => {
                let cx = self.number("center x")?.0;
                self.expect(&Tok::Comma)?;
                let cy = self.number("center y")?.0;
                self.expect(&Tok::Comma)?;
                let peak = self.number("peak")?.0;
                self.expect(&Tok::Comma)?;
                let sigma = self.number("sigma")?.0;
                FieldDecl::Gaussian {
                    center: (cx, cy),
                    peak,
                    sigma,
                }
            }
            "grid" => {
                let t = self.peek().clone();
                let path = match t.tok {
                    Tok::Str(s) => {
                        self.bump();
                        s
                    }
                    other => {
                        return err(
                            t.line,
                            t.col,
                            format!("expected a CSV path string, found {}", other.describe()),
                        )
                    }
                };
                self.expect(&Tok::Comma)?;
                let x0 = self.number("origin x")?.0;
                self.expect(&Tok::Comma)?;
                let y0 = self.number("origin y")?.0;
                self.expect(&Tok::Comma)?;
                let cell = self.number("cell size")?.0;
                FieldDecl::GridFile {
                    path,
                    origin: (x0, y0),
                    cell,
                }
            }
            other => {
                return err(
                    line,
                    col,
                    format!("unknown field model `{other}` (expected `const`, `gaussian`, `grid`)"),
                )
            }
        };
        self.expect(&Tok::RParen)?;
        Ok(decl)
    }

    // -- file structure ------------------------------------------------------

    fn source_unit(&mut self) -> Result<SourceUnit, ParseError> {
        let mut interface: Option<Vec<(Label, MethodType)>> = None;
        let mut world: Option<WorldDecl> = None;
        let mut templates: Vec<Template> = Vec::new();
        let mut raw_nodes: Vec<RawNode> = Vec::new();
        loop {
            let t = self.peek().clone();
            match t.tok {
                Tok::Eof => break,
                Tok::KwInterface => {
                    if interface.is_some() {
                        return err(t.line, t.col, "duplicate interface block");
                    }
                    interface = Some(self.interface_block()?);
                }
                Tok::KwWorld => {
                    if world.is_some() {
                        return err(t.line, t.col, "duplicate world block");
                    }
                    world = Some(self.world_block()?);
                }
                Tok::KwSensor => raw_nodes.push(self.node_decl()?),
                Tok::Ident(_) => {
                    let template = self.template_def()?;
                    if templates.iter().any(|d| d.name == template.name) {
                        return err(
                            t.line,
                            t.col,
                            format!("duplicate template name `{}`", template.name),
                        );
                    }
                    templates.push(template);
                }
                other => {
                    return err(
                        t.line,
                        t.col,
                        format!(
                            "expected `interface`, `world`, `sensor`, or a template definition, found {}",
                            other.describe()
                        ),
                    )
                }
            }
        }
        let Some(interface) = interface else {
            let t = self.peek();
            return err(t.line, t.col, "missing mandatory `interface { ... }` block");
        };

        let mut nodes: Vec<NodeDecl> = Vec::new();
        for raw in raw_nodes {
            if nodes.iter().any(|n| n.name == raw.name) {
                return err(
                    raw.name_pos.0,
                    raw.name_pos.1,
                    format!("duplicate sensor name `{}`", raw.name),
                );
            }
            let object = expand_object(raw.object, &templates)?;
            nodes.push(NodeDecl {
                name: raw.name,
                position: raw.position,
                radius: raw.radius,
                energy: raw.energy,
                object,
                queue: raw.queue,
            });
        }
        Ok(SourceUnit {
            interface,
            templates,
            nodes,
            world: world.unwrap_or_default(),
        })
    }

    fn template_def(&mut self) -> Result<Template, ParseError> {
        let (name, _, _) = self.ident("a template name")?;
        let mut params = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.bump();
            if self.peek().tok != Tok::RParen {
                loop {
                    let p = self.variable("a template parameter")?;
                    if params.contains(&p) {
                        let t = self.tokens[self.pos - 1].clone();
                        return err(t.line, t.col, format!("duplicate parameter `{p}`"));
                    }
                    params.push(p);
                    if self.peek().tok == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.expect(&Tok::RParen)?;
        }
        self.expect(&Tok::Eq)?;
        let body = self.object_literal()?;
        Ok(Template { name, params, body })
    }

    fn node_decl(&mut self) -> Result<RawNode, ParseError> {
        self.expect(&Tok::KwSensor)?;
        let (name, line, col) = self.ident("a sensor name")?;
        self.expect(&Tok::KwAt)?;
        self.expect(&Tok::LParen)?;
        let x = self.number("x coordinate")?.0;
        self.expect(&Tok::Comma)?;
        let y = self.number("y coordinate")?.0;
        self.expect(&Tok::RParen)?;
        self.expect(&Tok::KwRadius)?;
        let (radius, rl, rc) = self.number("a radius")?;
        if radius < 0.0 || radius.is_nan() {
            return err(rl, rc, "radius must be nonnegative");
        }
        self.expect(&Tok::KwEnergy)?;
        let (energy, el, ec) = self.number("an energy level")?;
        if energy < 0.0 || energy.is_nan() {
            return err(el, ec, "energy must be nonnegative");
        }
        self.expect(&Tok::KwObject)?;
        let object = self.object_expr()?;
        let mut queue = Vec::new();
        if self.peek().tok == Tok::KwRun {
            self.bump();
            loop {
                queue.push(self.program()?);
                if self.peek().tok == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        Ok(RawNode {
            name,
            name_pos: (line, col),
            position: (x, y),
            radius,
            energy,
            object,
            queue,
        })
    }

    fn object_expr(&mut self) -> Result<ObjExpr, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::LBrace => Ok(ObjExpr::Literal(self.object_literal()?)),
            Tok::Ident(name) => {
                let name = name.clone();
                self.bump();
                let mut args = Vec::new();
                if self.peek().tok == Tok::LParen {
                    args = self.call_args()?;
                }
                for arg in &args {
                    if !value_free_vars(arg).is_empty() {
                        return err(
                            t.line,
                            t.col,
                            format!("template argument for `{name}` must be a closed value"),
                        );
                    }
                }
                Ok(ObjExpr::Inst {
                    name,
                    args,
                    line: t.line,
                    col: t.col,
                })
            }
            other => err(
                t.line,
                t.col,
                format!(
                    "expected an object literal or template use, found {}",
                    other.describe()
                ),
            ),
        }
    }
}

fn expand_object(expr: ObjExpr, templates: &[Template]) -> Result<Object, ParseError> {
    match expr {
        ObjExpr::Literal(o) => Ok(o),
        ObjExpr::Inst {
            name,
            args,
            line,
            col,
        } => {
            let Some(template) = templates.iter().find(|t| t.name == name) else {
                return err(line, col, format!("unknown template `{name}`"));
            };
            if template.params.len() != args.len() {
                return err(
                    line,
                    col,
                    format!(
                        "template `{name}` takes {} argument(s), {} given",
                        template.params.len(),
                        args.len()
                    ),
                );
            }
            let bindings = template
                .params
                .iter()
                .cloned()
                .zip(args)
                .collect();
            match substitute_value(&Value::Obj(template.body.clone()), &bindings) {
                Value::Obj(o) => Ok(o),
                _ => unreachable!("substituting into an object yields an object"),
            }
        }
    }
}
