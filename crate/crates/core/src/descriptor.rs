//! Wiring descriptors and the run driver.
//!
//! A descriptor is a short text file:
//!
//! ```text
//! # double pendulum hanging from the origin
//! system p = pendulum(m=1, l=1, g=9.81)
//! compose anchor(x=0, y=0) ; p ; p ; discard
//! simulate {
//!   method = rk4, dt = 0.001, steps = 1000
//!   initial = (3*pi/2 + 0.3, 0, 3*pi/2 - 0.2, 0)
//!   output = "double.csv"
//!   format = csv
//! }
//! ```
//!
//! `;` wires systems in sequence and binds looser than `|`, which places
//! them side by side. Bare names refer to `system` definitions first and
//! otherwise to library builders with default parameters. An optional
//! `close (a₁, …)` fixes the composite's parameters; without it the
//! composite must take none. The same descriptor can be written as JSON.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::batch;
use crate::error::{Error, Result};
use crate::openerg::{ClosedSystem, OpenSystem};
use crate::reaction::Flow;
use crate::simulate::{integrate, IntegratorConfig, Method, Trajectory};
use crate::space::{Point, Space};
use crate::stdlib;

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDef {
    pub name: String,
    pub builder: String,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// A defined name, or a builder call when `args` is present.
    Ref {
        name: String,
        args: Option<Params>,
    },
    Seq(Vec<Expr>),
    Par(Vec<Expr>),
}

impl Expr {
    pub fn name(name: &str) -> Self {
        Expr::Ref {
            name: name.into(),
            args: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!(
                "unknown format `{other}` (expected csv or json)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateBlock {
    #[serde(default = "default_method")]
    pub method: Method,
    pub dt: f64,
    pub steps: usize,
    pub initial: Vec<f64>,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub format: Format,
}

fn default_method() -> Method {
    Method::Rk4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    #[serde(default)]
    pub systems: Vec<SystemDef>,
    #[serde(with = "expr_text")]
    pub compose: Expr,
    #[serde(default)]
    pub close: Option<Vec<f64>>,
    #[serde(default)]
    pub simulate: Option<SimulateBlock>,
}

mod expr_text {
    use super::{parse_expr, Expr};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&e.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Expr, D::Error> {
        let text = String::deserialize(d)?;
        parse_expr(&text).map_err(D::Error::custom)
    }
}

// ---------------------------------------------------------------- errors

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}, column {column}: expected {}, found {found}", expected_list(.expected))]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

fn expected_list(items: &[String]) -> String {
    match items {
        [] => "nothing".into(),
        [one] => one.clone(),
        many => format!("one of {}", many.join(", ")),
    }
}

// ----------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(char),
    Newline,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    text: String,
    line: usize,
    col: usize,
}

impl Token {
    fn describe(&self) -> String {
        match &self.tok {
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
            Tok::Str(_) => self.text.clone(),
            _ => format!("`{}`", self.text),
        }
    }
}

const SYMBOLS: &str = "=(),;|{}*/+-";

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let start = (i, line, col);
        let push = |out: &mut Vec<Token>, tok: Tok, end: usize| {
            out.push(Token {
                tok,
                text: chars[start.0..end].iter().collect(),
                line: start.1,
                col: start.2,
            })
        };
        if c == '\n' {
            push(&mut out, Tok::Newline, i + 1);
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let mut j = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            push(&mut out, Tok::Ident(word), j);
        } else if c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    j = k;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
            }
            let text: String = chars[i..j].iter().collect();
            let value = text.parse::<f64>().map_err(|_| ParseError {
                line,
                column: col,
                expected: vec!["number".into()],
                found: format!("`{text}`"),
            })?;
            push(&mut out, Tok::Num(value), j);
        } else if c == '"' {
            let mut value = String::new();
            j += 1;
            loop {
                match chars.get(j) {
                    None | Some('\n') => {
                        return Err(ParseError {
                            line,
                            column: col,
                            expected: vec!["closing `\"`".into()],
                            found: "end of line".into(),
                        })
                    }
                    Some('"') => break,
                    Some('\\') if matches!(chars.get(j + 1), Some('"' | '\\')) => {
                        value.push(chars[j + 1]);
                        j += 2;
                    }
                    Some(&other) => {
                        value.push(other);
                        j += 1;
                    }
                }
            }
            j += 1;
            push(&mut out, Tok::Str(value), j);
        } else if SYMBOLS.contains(c) {
            j += 1;
            push(&mut out, Tok::Sym(c), j);
        } else {
            return Err(ParseError {
                line,
                column: col,
                expected: vec!["a name, number, string or punctuation".into()],
                found: format!("`{c}`"),
            });
        }
        col += j - i;
        i = j;
    }
    out.push(Token {
        tok: Tok::Eof,
        text: String::new(),
        line,
        col,
    });
    Ok(out)
}

// ---------------------------------------------------------------- parser

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

fn quoted(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| format!("`{s}`")).collect()
}

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0 }
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(t: &Token, expected: Vec<String>) -> ParseError {
        ParseError {
            line: t.line,
            column: t.col,
            expected,
            found: t.describe(),
        }
    }

    fn error(&self, expected: Vec<String>) -> ParseError {
        Self::error_at(self.peek(), expected)
    }

    fn skip_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.bump();
        }
    }

    fn at_sym(&self, c: char) -> bool {
        self.peek().tok == Tok::Sym(c)
    }

    fn eat_sym(&mut self, c: char) -> bool {
        let hit = self.at_sym(c);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_sym(&mut self, c: char) -> Result<Token, ParseError> {
        if self.at_sym(c) {
            Ok(self.bump())
        } else {
            Err(self.error(vec![format!("`{c}`")]))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(vec![what.into()])),
        }
    }

    fn end_statement(&mut self, also: &[&str]) -> Result<(), ParseError> {
        match self.peek().tok {
            Tok::Newline | Tok::Eof => Ok(()),
            _ => {
                let mut expected = quoted(also);
                expected.push("end of line".into());
                Err(self.error(expected))
            }
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let start = self.peek().clone();
        let mut v = self.signed_term()?;
        loop {
            if self.eat_sym('+') {
                v += self.term()?;
            } else if self.eat_sym('-') {
                v -= self.term()?;
            } else {
                break;
            }
        }
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Self::error_at(&start, vec!["a finite number".into()]))
        }
    }

    fn signed_term(&mut self) -> Result<f64, ParseError> {
        if self.eat_sym('-') {
            Ok(-self.term()?)
        } else {
            self.eat_sym('+');
            self.term()
        }
    }

    fn term(&mut self) -> Result<f64, ParseError> {
        let mut v = self.factor()?;
        loop {
            if self.eat_sym('*') {
                v *= self.factor()?;
            } else if self.eat_sym('/') {
                v /= self.factor()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn factor(&mut self) -> Result<f64, ParseError> {
        let v = match &self.peek().tok {
            Tok::Num(x) => *x,
            Tok::Ident(s) if s == "pi" => std::f64::consts::PI,
            Tok::Ident(s) if s == "tau" => std::f64::consts::TAU,
            _ => return Err(self.error(vec!["number".into(), "`pi`".into(), "`tau`".into()])),
        };
        self.bump();
        Ok(v)
    }

    fn count(&mut self) -> Result<usize, ParseError> {
        let start = self.peek().clone();
        let v = self.number()?;
        if v >= 1.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(Self::error_at(&start, vec!["a positive integer".into()]))
        }
    }

    fn number_list(&mut self) -> Result<Vec<f64>, ParseError> {
        self.expect_sym('(')?;
        let mut out = Vec::new();
        if self.eat_sym(')') {
            return Ok(out);
        }
        loop {
            out.push(self.number()?);
            if self.eat_sym(')') {
                return Ok(out);
            }
            if !self.eat_sym(',') {
                return Err(self.error(quoted(&[",", ")"])));
            }
        }
    }

    fn params(&mut self) -> Result<Params, ParseError> {
        self.expect_sym('(')?;
        let mut out = Params::new();
        if self.eat_sym(')') {
            return Ok(out);
        }
        loop {
            let at = self.peek().clone();
            let key = self.ident("parameter name")?;
            if out.contains_key(&key) {
                return Err(Self::error_at(
                    &at,
                    vec!["a parameter not already given".into()],
                ));
            }
            self.expect_sym('=')?;
            out.insert(key, self.number()?);
            if self.eat_sym(')') {
                return Ok(out);
            }
            if !self.eat_sym(',') {
                return Err(self.error(quoted(&[",", ")"])));
            }
        }
    }

    fn seq(&mut self) -> Result<Expr, ParseError> {
        let mut items = vec![self.par()?];
        while self.eat_sym(';') {
            items.push(self.par()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Expr::Seq(items)
        })
    }

    fn par(&mut self) -> Result<Expr, ParseError> {
        let mut items = vec![self.atom()?];
        while self.eat_sym('|') {
            items.push(self.atom()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Expr::Par(items)
        })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        if self.eat_sym('(') {
            let inner = self.seq()?;
            if !self.eat_sym(')') {
                return Err(self.error(quoted(&[";", "|", ")"])));
            }
            return Ok(inner);
        }
        let name = match &self.peek().tok {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.error(vec!["system name".into(), "`(`".into()])),
        };
        self.bump();
        let args = if self.at_sym('(') {
            Some(self.params()?)
        } else {
            None
        };
        Ok(Expr::Ref { name, args })
    }

    fn simulate_block(&mut self) -> Result<SimulateBlock, ParseError> {
        self.expect_sym('{')?;
        let mut method = None;
        let mut dt = None;
        let mut steps = None;
        let mut initial = None;
        let mut output = None;
        let mut format = None;
        const KEYS: [&str; 6] = ["method", "dt", "steps", "initial", "output", "format"];
        let close = loop {
            while self.peek().tok == Tok::Newline || self.at_sym(',') {
                self.bump();
            }
            if self.at_sym('}') {
                break self.bump();
            }
            let at = self.peek().clone();
            let mut expected = quoted(&KEYS);
            expected.push("`}`".into());
            let key = match &at.tok {
                Tok::Ident(k) if KEYS.contains(&k.as_str()) => k.clone(),
                _ => return Err(self.error(expected)),
            };
            self.bump();
            self.expect_sym('=')?;
            let dup = || Self::error_at(&at, vec!["a setting not already given".into()]);
            match key.as_str() {
                "method" => {
                    let t = self.peek().clone();
                    let word = self.ident("method name")?;
                    let m = word
                        .parse::<Method>()
                        .map_err(|_| Self::error_at(&t, quoted(&["euler", "rk4", "symplectic"])))?;
                    if method.replace(m).is_some() {
                        return Err(dup());
                    }
                }
                "format" => {
                    let t = self.peek().clone();
                    let word = self.ident("format name")?;
                    let f = word
                        .parse::<Format>()
                        .map_err(|_| Self::error_at(&t, quoted(&["csv", "json"])))?;
                    if format.replace(f).is_some() {
                        return Err(dup());
                    }
                }
                "dt" => {
                    let t = self.peek().clone();
                    let v = self.number()?;
                    if v <= 0.0 {
                        return Err(Self::error_at(&t, vec!["a positive step size".into()]));
                    }
                    if dt.replace(v).is_some() {
                        return Err(dup());
                    }
                }
                "steps" => {
                    let v = self.count()?;
                    if steps.replace(v).is_some() {
                        return Err(dup());
                    }
                }
                "initial" => {
                    let v = self.number_list()?;
                    if initial.replace(v).is_some() {
                        return Err(dup());
                    }
                }
                _ => {
                    let v = match &self.peek().tok {
                        Tok::Str(s) => s.clone(),
                        _ => return Err(self.error(vec!["quoted path".into()])),
                    };
                    self.bump();
                    if output.replace(v).is_some() {
                        return Err(dup());
                    }
                }
            }
            if !(self.at_sym('}') || self.at_sym(',') || self.peek().tok == Tok::Newline) {
                return Err(self.error(vec!["`,`".into(), "end of line".into(), "`}`".into()]));
            }
        };
        let missing = |key: &str| Self::error_at(&close, vec![format!("`{key}`")]);
        Ok(SimulateBlock {
            method: method.unwrap_or(Method::Rk4),
            dt: dt.ok_or_else(|| missing("dt"))?,
            steps: steps.ok_or_else(|| missing("steps"))?,
            initial: initial.ok_or_else(|| missing("initial"))?,
            output,
            format: format.unwrap_or_default(),
        })
    }
}

/// Parses the text form of a descriptor.
pub fn parse(src: &str) -> Result<Descriptor, ParseError> {
    let mut p = Parser::new(lex(src)?);
    let mut systems: Vec<SystemDef> = Vec::new();
    let mut compose = None;
    let mut close = None;
    let mut simulate = None;
    loop {
        p.skip_newlines();
        let t = p.peek().clone();
        let keyword = match &t.tok {
            Tok::Eof => break,
            Tok::Ident(k) => k.as_str(),
            _ => "",
        };
        match keyword {
            "system" => {
                p.bump();
                let at = p.peek().clone();
                let name = p.ident("system name")?;
                if systems.iter().any(|s| s.name == name) {
                    return Err(Parser::error_at(
                        &at,
                        vec!["a name not already defined".into()],
                    ));
                }
                p.expect_sym('=')?;
                let builder = p.ident("builder name")?;
                let params = if p.at_sym('(') {
                    p.params()?
                } else {
                    Params::new()
                };
                systems.push(SystemDef {
                    name,
                    builder,
                    params,
                });
                p.end_statement(&[])?;
            }
            "compose" if compose.is_none() => {
                p.bump();
                compose = Some(p.seq()?);
                p.end_statement(&[";", "|"])?;
            }
            "close" if close.is_none() => {
                p.bump();
                close = Some(p.number_list()?);
                p.end_statement(&[])?;
            }
            "simulate" if simulate.is_none() => {
                p.bump();
                simulate = Some(p.simulate_block()?);
                p.end_statement(&[])?;
            }
            _ => {
                let mut expected = vec!["`system`".to_string()];
                for (k, done) in [
                    ("compose", compose.is_some()),
                    ("close", close.is_some()),
                    ("simulate", simulate.is_some()),
                ] {
                    if !done {
                        expected.push(format!("`{k}`"));
                    }
                }
                expected.push("end of input".into());
                return Err(Parser::error_at(&t, expected));
            }
        }
    }
    let compose = compose.ok_or_else(|| p.error(vec!["`compose`".into()]))?;
    Ok(Descriptor {
        systems,
        compose,
        close,
        simulate,
    })
}

/// Parses a wiring expression such as `anchor ; (p | q) ; discard`.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(lex(src)?);
    p.skip_newlines();
    let e = p.seq()?;
    p.skip_newlines();
    if p.peek().tok != Tok::Eof {
        return Err(p.error(vec!["`;`".into(), "`|`".into(), "end of input".into()]));
    }
    Ok(e)
}

/// Parses sweep initial conditions: one state per line, coordinates
/// separated by commas; `#` starts a comment.
pub fn parse_initials(src: &str) -> Result<Vec<Vec<f64>>, ParseError> {
    let mut p = Parser::new(lex(src)?);
    let mut out = Vec::new();
    loop {
        p.skip_newlines();
        if p.peek().tok == Tok::Eof {
            return Ok(out);
        }
        let mut row = vec![p.number()?];
        while p.eat_sym(',') {
            row.push(p.number()?);
        }
        p.end_statement(&[","])?;
        out.push(row);
    }
}

// ------------------------------------------------------------- serializer

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn write_params(out: &mut String, params: &Params) {
    out.push('(');
    let items: Vec<String> = params
        .iter()
        .map(|(k, v)| format!("{k}={}", num(*v)))
        .collect();
    out.push_str(&items.join(", "));
    out.push(')');
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Top,
    Seq,
    Par,
}

fn write_expr(out: &mut String, e: &Expr, ctx: Ctx) {
    match e {
        Expr::Ref { name, args } => {
            out.push_str(name);
            if let Some(a) = args {
                write_params(out, a);
            }
        }
        Expr::Seq(items) | Expr::Par(items) => {
            let (sep, inner, parens) = match e {
                Expr::Seq(_) => (" ; ", Ctx::Seq, ctx != Ctx::Top),
                _ => (" | ", Ctx::Par, ctx == Ctx::Par),
            };
            if parens {
                out.push('(');
            }
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(sep);
                }
                write_expr(out, item, inner);
            }
            if parens {
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self, Ctx::Top);
        f.write_str(&s)
    }
}

fn list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| num(*v)).collect();
    format!("({})", items.join(", "))
}

impl Descriptor {
    /// Text form; [`parse`] inverts it exactly.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for s in &self.systems {
            let _ = write!(out, "system {} = {}", s.name, s.builder);
            write_params(&mut out, &s.params);
            out.push('\n');
        }
        let _ = writeln!(out, "compose {}", self.compose);
        if let Some(a) = &self.close {
            let _ = writeln!(out, "close {}", list(a));
        }
        if let Some(b) = &self.simulate {
            out.push_str("simulate {\n");
            let _ = writeln!(out, "  method = {}", b.method.name());
            let _ = writeln!(out, "  dt = {}", num(b.dt));
            let _ = writeln!(out, "  steps = {}", b.steps);
            let _ = writeln!(out, "  initial = {}", list(&b.initial));
            if let Some(path) = &b.output {
                let escaped = path.replace('\\', "\\\\").replace('"', "\\\"");
                let _ = writeln!(out, "  output = \"{escaped}\"");
            }
            let _ = writeln!(out, "  format = {}", b.format.name());
            out.push_str("}\n");
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("JSON descriptor: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor serializes")
    }
}

/// Reads a descriptor file; `.json` files use the JSON form.
pub fn load(path: &Path) -> Result<Descriptor> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        Descriptor::from_json(&text)
    } else {
        Ok(parse(&text)?)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

// --------------------------------------------------------------- assembly

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Pendulum,
    Oscillator,
    Gradient(usize),
    Inert,
}

#[derive(Clone)]
struct Stage {
    system: OpenSystem,
    kind: Kind,
}

struct Piece {
    system: OpenSystem,
    kinds: Vec<Kind>,
    /// Present when the piece is a plain sequence of stages.
    stages: Option<Vec<Stage>>,
}

struct BuilderSpec {
    id: &'static str,
    params: &'static [(&'static str, f64)],
}

const BUILDERS: &[BuilderSpec] = &[
    BuilderSpec {
        id: "pendulum",
        params: &[("m", 1.0), ("l", 1.0), ("g", 9.81)],
    },
    BuilderSpec {
        id: "chain",
        params: &[("n", 2.0), ("m", 1.0), ("l", 1.0), ("g", 9.81)],
    },
    BuilderSpec {
        id: "anchor",
        params: &[("x", 0.0), ("y", 0.0)],
    },
    BuilderSpec {
        id: "discard",
        params: &[],
    },
    BuilderSpec {
        id: "identity",
        params: &[("dim", 4.0)],
    },
    BuilderSpec {
        id: "oscillator",
        params: &[("m", 1.0), ("k", 1.0)],
    },
    BuilderSpec {
        id: "gradient_descent",
        params: &[("dim", 2.0), ("c", 1.0), ("k", 1.0)],
    },
    BuilderSpec {
        id: "gradient_ascent",
        params: &[("dim", 2.0), ("c", 1.0), ("k", 1.0)],
    },
];

/// Builder names understood in descriptors.
pub fn builder_names() -> Vec<&'static str> {
    BUILDERS.iter().map(|b| b.id).collect()
}

fn whole(name: &str, v: f64, min: usize) -> Result<usize> {
    if v.fract() == 0.0 && v >= min as f64 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::Parameter(format!(
            "{name} must be an integer ≥ {min}, got {v}"
        )))
    }
}

fn build(builder: &str, given: &Params) -> Result<Vec<Stage>> {
    let spec = BUILDERS.iter().find(|b| b.id == builder).ok_or_else(|| {
        Error::Config(format!(
            "unknown system or builder `{builder}` (builders: {})",
            builder_names().join(", ")
        ))
    })?;
    for key in given.keys() {
        if !spec.params.iter().any(|(k, _)| k == key) {
            let known: Vec<&str> = spec.params.iter().map(|(k, _)| *k).collect();
            return Err(Error::Parameter(format!(
                "`{builder}` has no parameter `{key}` (parameters: {})",
                if known.is_empty() {
                    "none".into()
                } else {
                    known.join(", ")
                }
            )));
        }
    }
    let get = |key: &str| -> f64 {
        given.get(key).copied().unwrap_or_else(|| {
            spec.params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .unwrap()
        })
    };
    let stage = |system, kind| Stage { system, kind };
    Ok(match builder {
        "pendulum" => vec![stage(
            stdlib::pendulum(get("m"), get("l"), get("g"))?,
            Kind::Pendulum,
        )],
        "chain" => {
            let n = whole("n", get("n"), 1)?;
            let p = stdlib::PendulumParams::new(get("m"), get("l"), get("g"))?;
            let one = stdlib::pendulum_with(p)?;
            vec![stage(one, Kind::Pendulum); n]
        }
        "anchor" => vec![stage(stdlib::anchor(get("x"), get("y")), Kind::Inert)],
        "discard" => vec![stage(stdlib::discard(), Kind::Inert)],
        "identity" => {
            let dim = whole("dim", get("dim"), 0)?;
            vec![stage(
                OpenSystem::identity(Space::euclidean(dim)),
                Kind::Inert,
            )]
        }
        "oscillator" => vec![stage(
            stdlib::harmonic_oscillator(get("m"), get("k"))?.into_open(),
            Kind::Oscillator,
        )],
        _ => {
            let dim = whole("dim", get("dim"), 1)?;
            let flow = if builder == "gradient_ascent" {
                Flow::Ascent
            } else {
                Flow::Descent
            };
            vec![stage(
                stdlib::quadratic_gradient(dim, get("c"), get("k"), flow)?.into_open(),
                Kind::Gradient(dim),
            )]
        }
    })
}

fn piece_of(stages: Vec<Stage>) -> Result<Piece> {
    let mut iter = stages.iter();
    let first = iter.next().expect("builders yield at least one stage");
    let system = iter.try_fold(first.system.clone(), |acc, s| acc.compose(&s.system))?;
    Ok(Piece {
        system,
        kinds: stages.iter().map(|s| s.kind).collect(),
        stages: Some(stages),
    })
}

fn assemble(e: &Expr, defs: &[SystemDef]) -> Result<Piece> {
    match e {
        Expr::Ref { name, args } => {
            let stages = match (args, defs.iter().find(|d| &d.name == name)) {
                (None, Some(def)) => build(&def.builder, &def.params),
                (args, _) => build(name, args.as_ref().unwrap_or(&Params::new())),
            }?;
            piece_of(stages)
        }
        Expr::Seq(items) => {
            let mut acc = assemble(&items[0], defs)?;
            for (i, item) in items.iter().enumerate().skip(1) {
                let next = assemble(item, defs)?;
                if acc.system.cod() != next.system.dom() {
                    let before = Expr::Seq(items[..i].to_vec());
                    let shown = if i == 1 {
                        items[0].to_string()
                    } else {
                        before.to_string()
                    };
                    return Err(Error::Type(format!(
                        "cannot wire `{shown}` (output {}) into `{item}` (input {})",
                        acc.system.cod(),
                        next.system.dom()
                    )));
                }
                acc = Piece {
                    system: acc.system.compose(&next.system)?,
                    kinds: [acc.kinds, next.kinds].concat(),
                    stages: match (acc.stages, next.stages) {
                        (Some(a), Some(b)) => Some([a, b].concat()),
                        _ => None,
                    },
                };
            }
            Ok(acc)
        }
        Expr::Par(items) => {
            let mut acc = assemble(&items[0], defs)?;
            for item in &items[1..] {
                let next = assemble(item, defs)?;
                acc = Piece {
                    system: acc.system.tensor(&next.system)?,
                    kinds: [acc.kinds, next.kinds].concat(),
                    stages: None,
                };
            }
            Ok(acc)
        }
    }
}

fn state_labels(kinds: &[Kind]) -> Vec<String> {
    let (mut pend, mut osc, mut grad) = (0, 0, 0);
    let mut out = Vec::new();
    for k in kinds {
        match k {
            Kind::Pendulum => {
                pend += 1;
                out.push(format!("theta{pend}"));
                out.push(format!("L{pend}"));
            }
            Kind::Oscillator => {
                osc += 1;
                out.push(format!("q{osc}"));
                out.push(format!("p{osc}"));
            }
            Kind::Gradient(dim) => {
                grad += 1;
                for i in 1..=*dim {
                    if grad == 1 {
                        out.push(format!("x{i}"));
                    } else {
                        out.push(format!("x{grad}_{i}"));
                    }
                }
            }
            Kind::Inert => {}
        }
    }
    out
}

// ------------------------------------------------------------------- runs

/// Command-line settings that take precedence over the descriptor.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub method: Option<Method>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub cartesian: bool,
}

/// A descriptor built, type-checked and closed, ready to simulate.
pub struct Prepared {
    descriptor: Descriptor,
    open: OpenSystem,
    system: ClosedSystem,
    closure: Point,
    stages: Option<Vec<Stage>>,
    labels: Vec<String>,
    cfg: IntegratorConfig,
    initial: Vec<f64>,
    output: Option<PathBuf>,
    format: Format,
    cartesian: bool,
}

/// Where a run's output went.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub path: Option<PathBuf>,
    pub contents: String,
}

/// Builds and closes the composite without simulating.
pub fn assemble_closed(d: &Descriptor) -> Result<(OpenSystem, ClosedSystem)> {
    let piece = assemble(&d.compose, &d.systems)?;
    let closure = closure_point(d, &piece.system)?;
    let closed = piece.system.close(&closure)?;
    Ok((piece.system, closed))
}

fn closure_point(d: &Descriptor, open: &OpenSystem) -> Result<Point> {
    match &d.close {
        Some(a) => {
            if a.len() != open.dom().dim() {
                return Err(Error::Type(format!(
                    "`close` gives {} values but the composite takes parameters in {}",
                    a.len(),
                    open.dom()
                )));
            }
            open.dom().normalize(a)
        }
        None if open.dom().is_unit() => Ok(Point::unit()),
        None => Err(Error::Type(format!(
            "the composite takes parameters in {}; fix them with `close (...)`",
            open.dom()
        ))),
    }
}

pub fn prepare(d: &Descriptor, o: &Overrides) -> Result<Prepared> {
    let block = d
        .simulate
        .as_ref()
        .ok_or_else(|| Error::Config("descriptor has no `simulate` block".into()))?;
    let piece = assemble(&d.compose, &d.systems)?;
    let closure = closure_point(d, &piece.system)?;
    let system = piece.system.close(&closure)?;
    let cfg = IntegratorConfig::new(
        o.method.unwrap_or(block.method),
        o.dt.unwrap_or(block.dt),
        o.steps.unwrap_or(block.steps),
    )?;
    if o.cartesian {
        let bobs = piece
            .stages
            .as_ref()
            .map(|s| s.iter().filter(|s| s.kind == Kind::Pendulum).count())
            .unwrap_or(0);
        if bobs == 0 {
            return Err(Error::Config(
                "cartesian output needs a sequential composition containing pendula".into(),
            ));
        }
    }
    let prepared = Prepared {
        descriptor: d.clone(),
        labels: state_labels(&piece.kinds),
        open: piece.system,
        system,
        closure,
        stages: piece.stages,
        cfg,
        initial: block.initial.clone(),
        output: o
            .output
            .clone()
            .or_else(|| block.output.as_ref().map(PathBuf::from)),
        format: o.format.unwrap_or(block.format),
        cartesian: o.cartesian,
    };
    prepared.check_initial(&prepared.initial)?;
    Ok(prepared)
}

impl Prepared {
    pub fn open_system(&self) -> &OpenSystem {
        &self.open
    }

    pub fn system(&self) -> &ClosedSystem {
        &self.system
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn output(&self) -> Option<&Path> {
        self.output.as_deref()
    }

    pub fn format(&self) -> Format {
        self.format
    }

    /// Column names of the rendered table.
    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        cols.extend(self.labels.iter().cloned());
        cols.push("E".into());
        cols.extend(self.cartesian_labels());
        cols
    }

    fn cartesian_labels(&self) -> Vec<String> {
        if !self.cartesian {
            return Vec::new();
        }
        let n = self
            .stages
            .as_ref()
            .map_or(0, |s| s.iter().filter(|s| s.kind == Kind::Pendulum).count());
        (1..=n)
            .flat_map(|k| [format!("x{k}"), format!("y{k}")])
            .collect()
    }

    fn check_initial(&self, x0: &[f64]) -> Result<()> {
        let state = self.system.state();
        if x0.len() != state.dim() {
            return Err(Error::Config(format!(
                "initial state has {} coordinates but the state space {} has {}",
                x0.len(),
                state,
                state.dim()
            )));
        }
        Ok(())
    }

    pub fn simulate(&self) -> Result<Trajectory> {
        self.simulate_from(&self.initial)
    }

    pub fn simulate_from(&self, x0: &[f64]) -> Result<Trajectory> {
        self.check_initial(x0)?;
        integrate(&self.system, &Point::from_raw(x0.to_vec()), &self.cfg)
    }

    /// Bob positions `(x₁, y₁, x₂, y₂, …)` for one state, read off the
    /// outputs of the successive stages.
    pub fn bob_positions(&self, x: &[f64]) -> Result<Vec<f64>> {
        let stages = self
            .stages
            .as_ref()
            .ok_or_else(|| Error::Config("no stage structure for cartesian output".into()))?;
        let mut b = self.closure.coords().to_vec();
        let mut offset = 0;
        let mut out = Vec::new();
        for s in stages {
            let dim = s.system.state().dim();
            let mut input = b;
            input.extend_from_slice(&x[offset..offset + dim]);
            b = s.system.output().eval_raw(&input)?;
            offset += dim;
            if s.kind == Kind::Pendulum {
                out.extend_from_slice(&b[..2]);
            }
        }
        Ok(out)
    }

    fn cartesian_rows(&self, tr: &Trajectory) -> Result<Vec<Vec<f64>>> {
        tr.states
            .iter()
            .map(|s| self.bob_positions(s.coords()))
            .collect()
    }

    pub fn render(&self, tr: &Trajectory) -> Result<String> {
        match self.format {
            Format::Csv => self.render_csv(tr),
            Format::Json => self.render_json(tr),
        }
    }

    fn render_csv(&self, tr: &Trajectory) -> Result<String> {
        let cart = if self.cartesian {
            Some(self.cartesian_rows(tr)?)
        } else {
            None
        };
        let mut out = self.columns().join(",");
        out.push('\n');
        for i in 0..tr.len() {
            let mut row = vec![tr.times[i]];
            row.extend_from_slice(tr.states[i].coords());
            row.push(tr.energies[i]);
            if let Some(c) = &cart {
                row.extend_from_slice(&c[i]);
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    fn render_json(&self, tr: &Trajectory) -> Result<String> {
        #[derive(Serialize)]
        struct Config {
            method: Method,
            dt: f64,
            steps: usize,
        }
        #[derive(Serialize)]
        struct Metadata<'a> {
            descriptor: &'a Descriptor,
            config: Config,
            columns: Vec<String>,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            times: &'a [f64],
            states: Vec<&'a [f64]>,
            energies: &'a [f64],
            #[serde(skip_serializing_if = "Option::is_none")]
            cartesian: Option<Vec<Vec<f64>>>,
            metadata: Metadata<'a>,
        }
        let doc = Doc {
            times: &tr.times,
            states: tr.states.iter().map(|s| s.coords()).collect(),
            energies: &tr.energies,
            cartesian: if self.cartesian {
                Some(self.cartesian_rows(tr)?)
            } else {
                None
            },
            metadata: Metadata {
                descriptor: &self.descriptor,
                config: Config {
                    method: self.cfg.method,
                    dt: self.cfg.dt,
                    steps: self.cfg.steps,
                },
                columns: self.columns(),
            },
        };
        let mut text = serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::Config(format!("JSON output: {e}")))?;
        text.push('\n');
        Ok(text)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

/// Simulates the descriptor and writes its output file, if it names one.
pub fn run(d: &Descriptor, o: &Overrides) -> Result<RunOutput> {
    let prepared = prepare(d, o)?;
    let tr = prepared.simulate()?;
    let contents = prepared.render(&tr)?;
    if let Some(path) = &prepared.output {
        write_file(path, &contents)?;
    }
    Ok(RunOutput {
        path: prepared.output.clone(),
        contents,
    })
}

/// `out.csv` → `out_0003.csv`.
pub fn indexed_path(base: &Path, index: usize) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}_{index:04}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{index:04}"),
    };
    base.with_file_name(name)
}

/// One run per initial state, in parallel, each to its own indexed file.
pub fn run_sweep(d: &Descriptor, o: &Overrides, initials: &[Vec<f64>]) -> Result<Vec<PathBuf>> {
    let prepared = prepare(d, o)?;
    let base = prepared
        .output
        .clone()
        .ok_or_else(|| Error::Config("a sweep needs an output path".into()))?;
    for (i, x0) in initials.iter().enumerate() {
        prepared
            .check_initial(x0)
            .map_err(|e| Error::Config(format!("sweep entry {i}: {e}")))?;
    }
    let indexed: Vec<(usize, &Vec<f64>)> = initials.iter().enumerate().collect();
    let results = batch::map(&indexed, |(i, x0)| -> Result<PathBuf> {
        let tr = prepared
            .simulate_from(x0)
            .map_err(|e| Error::Config(format!("sweep entry {i}: {e}")))?;
        let path = indexed_path(&base, *i);
        write_file(&path, &prepared.render(&tr)?)?;
        Ok(path)
    });
    results.into_iter().collect()
}
