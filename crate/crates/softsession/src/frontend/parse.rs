//! The `.sst` declaration language: lexer, parser, and printer.
//!
//! A source file is a sequence of declarations:
//!
//! ```text
//! type pay = 1 * 1                          -- a type alias
//! process relay gives x : 1 -o 1            -- a process with its signature
//!     uses y : 1 uses aux a : 1 uses mux m : 1
//!     = x(v). y<w>
//! derivation ax = (oneR x)                  -- a kernel tree literal
//! analyze relay                             -- an analysis directive
//! ```
//!
//! Signatures default to dsll; `in dill` before the `=` selects the
//! reference mode. Comments run from `--` to the end of the line. Names
//! must be defined before they are used; each definition gives exactly one
//! channel.
//!
//! Process and type syntax follow the calculus and type printers exactly,
//! so printing a file and parsing it back yields the same declarations.
//! Derivation literals are s-expressions headed by the rule name
//! (`oneL` … `cutSharp`); rules that declare zones take keyword groups, as
//! in `(oneR x (mux m:1))` and `(bangR x y (doors d) (mux m:1) sub)`.
//! `new`, `aux`, `mux`, and the rule heads are contextual keywords: a
//! channel may reuse them wherever the grammar leaves no ambiguity.

use std::collections::BTreeMap;
use std::fmt;

use crate::calculus::{Name, Process};
use crate::derivation::Derivation;
use crate::elaborator::{Mode, Signature};
use crate::types::{Type, Zone};

/// A syntax error with its location and what would have been accepted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub found: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: found {}, expected ", self.line, self.column, self.found)?;
        for (i, e) in self.expected.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// One parsed declaration, tagged with the line it starts on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Item {
    pub line: usize,
    pub kind: ItemKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ItemKind {
    TypeAlias { name: String, ty: Type },
    Definition(Box<Definition>),
    DerivationLiteral { name: String, derivation: Derivation },
    Analyze { target: String },
}

/// A named process together with the judgment it claims.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub name: String,
    pub signature: Signature,
    pub process: Process,
}

/// A parsed `.sst` file.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SourceFile {
    pub items: Vec<Item>,
}

/// What a name in a source file resolves to.
#[derive(Clone, Copy, Debug)]
pub enum Found<'a> {
    Definition(&'a Definition),
    Derivation(&'a str, &'a Derivation),
}

impl SourceFile {
    pub fn definitions(&self) -> impl Iterator<Item = &Definition> {
        self.items.iter().filter_map(|it| match &it.kind {
            ItemKind::Definition(d) => Some(d.as_ref()),
            _ => None,
        })
    }

    pub fn derivations(&self) -> impl Iterator<Item = (&str, &Derivation)> {
        self.items.iter().filter_map(|it| match &it.kind {
            ItemKind::DerivationLiteral { name, derivation } => Some((name.as_str(), derivation)),
            _ => None,
        })
    }

    pub fn directives(&self) -> impl Iterator<Item = &str> {
        self.items.iter().filter_map(|it| match &it.kind {
            ItemKind::Analyze { target } => Some(target.as_str()),
            _ => None,
        })
    }

    pub fn find(&self, name: &str) -> Option<Found<'_>> {
        self.items.iter().find_map(|it| match &it.kind {
            ItemKind::Definition(d) if d.name == name => Some(Found::Definition(d.as_ref())),
            ItemKind::DerivationLiteral { name: n, derivation } if n == name => {
                Some(Found::Derivation(n, derivation))
            }
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(u64),
    LParen,
    RParen,
    Eq,
    Colon,
    Dot,
    Semi,
    Comma,
    Pipe,
    Lt,
    Gt,
    Bang,
    Star,
    Plus,
    Amp,
    Lolli,
}

impl Tok {
    fn show(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Nat(n) => format!("'{n}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Eq => "'='".into(),
            Tok::Colon => "':'".into(),
            Tok::Dot => "'.'".into(),
            Tok::Semi => "';'".into(),
            Tok::Comma => "','".into(),
            Tok::Pipe => "'|'".into(),
            Tok::Lt => "'<'".into(),
            Tok::Gt => "'>'".into(),
            Tok::Bang => "'!'".into(),
            Tok::Star => "'*'".into(),
            Tok::Plus => "'+'".into(),
            Tok::Amp => "'&'".into(),
            Tok::Lolli => "'-o'".into(),
        }
    }
}

type Spanned = (Tok, (usize, usize));

fn lex(src: &str) -> Result<(Vec<Spanned>, (usize, usize)), ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    while let Some(&c) = chars.peek() {
        let at = (line, col);
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '-' => {
                bump!();
                match chars.peek() {
                    Some('-') => {
                        while let Some(&d) = chars.peek() {
                            if d == '\n' {
                                break;
                            }
                            bump!();
                        }
                    }
                    Some('o') => {
                        bump!();
                        out.push((Tok::Lolli, at));
                    }
                    _ => {
                        return Err(ParseError {
                            line: at.0,
                            column: at.1,
                            found: "'-'".into(),
                            expected: vec!["'-o'".into(), "a comment ('--')".into()],
                        })
                    }
                }
            }
            '(' | ')' | '=' | ':' | '.' | ';' | ',' | '|' | '<' | '>' | '!' | '*' | '+' | '&' => {
                bump!();
                let t = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '=' => Tok::Eq,
                    ':' => Tok::Colon,
                    '.' => Tok::Dot,
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    '|' => Tok::Pipe,
                    '<' => Tok::Lt,
                    '>' => Tok::Gt,
                    '!' => Tok::Bang,
                    '*' => Tok::Star,
                    '+' => Tok::Plus,
                    '&' => Tok::Amp,
                    _ => unreachable!(),
                };
                out.push((t, at));
            }
            '0'..='9' => {
                let mut n: u64 = 0;
                while let Some(&d) = chars.peek() {
                    let Some(v) = d.to_digit(10) else { break };
                    n = n.saturating_mul(10).saturating_add(u64::from(v));
                    bump!();
                }
                out.push((Tok::Nat(n), at));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' || d == '\'' {
                        s.push(d);
                        bump!();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(s), at));
            }
            other => {
                return Err(ParseError {
                    line: at.0,
                    column: at.1,
                    found: format!("'{other}'"),
                    expected: vec!["a declaration, name, or operator".into()],
                })
            }
        }
    }
    Ok((out, (line, col)))
}

struct Parser {
    toks: Vec<Spanned>,
    i: usize,
    eof: (usize, usize),
    aliases: BTreeMap<String, Type>,
    defined: BTreeMap<String, ()>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(t, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.i + 1).map(|(t, _)| t)
    }

    fn pos(&self) -> (usize, usize) {
        self.toks.get(self.i).map(|(_, p)| *p).unwrap_or(self.eof)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.i).map(|(t, _)| t.clone());
        if t.is_some() {
            self.i += 1;
        }
        t
    }

    fn err(&self, expected: &[&str]) -> ParseError {
        let (line, column) = self.pos();
        ParseError {
            line,
            column,
            found: self.peek().map(Tok::show).unwrap_or_else(|| "end of input".into()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, label: &str) -> Result<(), ParseError> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.err(&[label]))
        }
    }

    fn expect_ident(&mut self, label: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(_)) => {
                let Some(Tok::Ident(s)) = self.bump() else { unreachable!() };
                Ok(s)
            }
            _ => Err(self.err(&[label])),
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.i += 1;
                Ok(())
            }
            _ => Err(self.err(&[&format!("'{kw}'")])),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn fresh_name(&mut self, name: String) -> Result<String, ParseError> {
        if self.aliases.contains_key(&name) || self.defined.contains_key(&name) {
            let (line, column) = self.toks.get(self.i - 1).map(|(_, p)| *p).unwrap_or(self.eof);
            return Err(ParseError {
                line,
                column,
                found: format!("'{name}'"),
                expected: vec!["an undefined name".into()],
            });
        }
        Ok(name)
    }

    // Types. `!` binds tightest; `*`, `+`, `&` chain left at one precedence
    // level and may not mix without parentheses; `-o` is loosest and
    // associates right.
    fn parse_type(&mut self) -> Result<Type, ParseError> {
        let lhs = self.parse_type_chain()?;
        if self.eat(&Tok::Lolli) {
            let rhs = self.parse_type()?;
            Ok(Type::lolli(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn parse_type_chain(&mut self) -> Result<Type, ParseError> {
        let first = self.parse_type_atom()?;
        let op = match self.peek() {
            Some(t @ (Tok::Star | Tok::Plus | Tok::Amp)) => t.clone(),
            _ => return Ok(first),
        };
        let mut acc = first;
        while self.peek() == Some(&op) {
            self.i += 1;
            let rhs = self.parse_type_atom()?;
            acc = match op {
                Tok::Star => Type::tensor(acc, rhs),
                Tok::Plus => Type::plus(acc, rhs),
                Tok::Amp => Type::with(acc, rhs),
                _ => unreachable!(),
            };
        }
        if matches!(self.peek(), Some(Tok::Star | Tok::Plus | Tok::Amp)) {
            // mixing connectives at one level needs parentheses
            return Err(self.err(&[&op.show(), "'-o'", "a closing delimiter"]));
        }
        Ok(acc)
    }

    fn parse_type_atom(&mut self) -> Result<Type, ParseError> {
        match self.peek() {
            Some(Tok::Nat(1)) => {
                self.i += 1;
                Ok(Type::One)
            }
            Some(Tok::Bang) => {
                self.i += 1;
                Ok(Type::bang(self.parse_type_atom()?))
            }
            Some(Tok::LParen) => {
                self.i += 1;
                let t = self.parse_type()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(t)
            }
            Some(Tok::Ident(s)) => match self.aliases.get(s).cloned() {
                Some(t) => {
                    self.i += 1;
                    Ok(t)
                }
                None => Err(self.err(&["a defined type name"])),
            },
            _ => Err(self.err(&["'1'", "'!'", "'('", "a defined type name"])),
        }
    }

    // Processes. `|` is loosest; restriction and prefix continuations take
    // one atom, so a parallel body needs parentheses.
    fn parse_process(&mut self) -> Result<Process, ParseError> {
        let mut p = self.parse_process_atom()?;
        while self.eat(&Tok::Pipe) {
            let r = self.parse_process_atom()?;
            p = Process::par(p, r);
        }
        Ok(p)
    }

    fn parse_process_atom(&mut self) -> Result<Process, ParseError> {
        match self.peek() {
            Some(Tok::Nat(0)) => {
                self.i += 1;
                Ok(Process::Nil)
            }
            Some(Tok::LParen) => {
                self.i += 1;
                let p = self.parse_process()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(p)
            }
            Some(Tok::Bang) => {
                self.i += 1;
                let c = self.expect_ident("a channel name")?;
                self.expect(Tok::LParen, "'('")?;
                let b = self.expect_ident("a bound name")?;
                self.expect(Tok::RParen, "')'")?;
                let body = self.parse_continuation()?;
                Ok(Process::repl(c.as_str(), b.as_str(), body))
            }
            Some(Tok::Ident(s)) if s == "new" && matches!(self.peek2(), Some(Tok::Ident(_))) => {
                self.i += 1;
                let x = self.expect_ident("a channel name")?;
                self.expect(Tok::Dot, "'.'")?;
                let body = self.parse_process_atom()?;
                Ok(Process::restrict(x.as_str(), body))
            }
            Some(Tok::Ident(_)) => {
                let c = self.expect_ident("a channel name")?;
                match self.peek() {
                    Some(Tok::LParen) => {
                        self.i += 1;
                        let b = self.expect_ident("a bound name")?;
                        self.expect(Tok::RParen, "')'")?;
                        let body = self.parse_continuation()?;
                        Ok(Process::input(c.as_str(), b.as_str(), body))
                    }
                    Some(Tok::Lt) => {
                        self.i += 1;
                        let b = self.expect_ident("a bound name")?;
                        self.expect(Tok::Gt, "'>'")?;
                        let body = self.parse_continuation()?;
                        Ok(Process::output(c.as_str(), b.as_str(), body))
                    }
                    Some(Tok::Dot) => {
                        self.i += 1;
                        let sel = self.expect_ident("'inl', 'inr', or 'case'")?;
                        match sel.as_str() {
                            "inl" | "inr" => {
                                let body = if self.eat(&Tok::Semi) {
                                    self.parse_process_atom()?
                                } else {
                                    Process::Nil
                                };
                                if sel == "inl" {
                                    Ok(Process::inl(c.as_str(), body))
                                } else {
                                    Ok(Process::inr(c.as_str(), body))
                                }
                            }
                            "case" => {
                                self.expect(Tok::LParen, "'('")?;
                                let l = self.parse_process()?;
                                self.expect(Tok::Comma, "','")?;
                                let r = self.parse_process()?;
                                self.expect(Tok::RParen, "')'")?;
                                Ok(Process::case(c.as_str(), l, r))
                            }
                            _ => {
                                self.i -= 1;
                                Err(self.err(&["'inl'", "'inr'", "'case'"]))
                            }
                        }
                    }
                    _ => Err(self.err(&["'('", "'<'", "'.'"])),
                }
            }
            _ => Err(self.err(&["'0'", "'('", "'!'", "'new'", "a channel name"])),
        }
    }

    fn parse_continuation(&mut self) -> Result<Process, ParseError> {
        if self.eat(&Tok::Dot) {
            self.parse_process_atom()
        } else {
            Ok(Process::Nil)
        }
    }

    // Derivation literals: s-expressions headed by the rule name.
    fn parse_derivation(&mut self) -> Result<Derivation, ParseError> {
        self.expect(Tok::LParen, "'('")?;
        let head = self.expect_ident("a derivation rule head")?;
        let d = match head.as_str() {
            "oneL" => {
                let chan = self.expect_ident("a channel name")?;
                let sub = self.parse_derivation()?;
                Derivation::one_l(chan.as_str(), sub)
            }
            "oneR" => {
                let subject = self.expect_ident("a channel name")?;
                let aux = self.parse_zone_group("aux")?.unwrap_or_else(Zone::new);
                let mux = self.parse_zone_group("mux")?.unwrap_or_else(Zone::new);
                Derivation::one_r_in(subject.as_str(), aux, mux)
            }
            "tensorL" => {
                let chan = self.expect_ident("a channel name")?;
                let bound = self.expect_ident("a bound name")?;
                let sub = self.parse_derivation()?;
                Derivation::tensor_l(chan.as_str(), bound.as_str(), sub)
            }
            "tensorR" => {
                let subject = self.expect_ident("a channel name")?;
                let bound = self.expect_ident("a bound name")?;
                let left = self.parse_derivation()?;
                let right = self.parse_derivation()?;
                Derivation::tensor_r(subject.as_str(), bound.as_str(), left, right)
            }
            "lolliL" => {
                let chan = self.expect_ident("a channel name")?;
                let bound = self.expect_ident("a bound name")?;
                let left = self.parse_derivation()?;
                let right = self.parse_derivation()?;
                Derivation::lolli_l(chan.as_str(), bound.as_str(), left, right)
            }
            "lolliR" => {
                let subject = self.expect_ident("a channel name")?;
                let bound = self.expect_ident("a bound name")?;
                let sub = self.parse_derivation()?;
                Derivation::lolli_r(subject.as_str(), bound.as_str(), sub)
            }
            "plusL" => {
                let chan = self.expect_ident("a channel name")?;
                let left = self.parse_derivation()?;
                let right = self.parse_derivation()?;
                Derivation::plus_l(chan.as_str(), left, right)
            }
            "plusR1" => {
                let subject = self.expect_ident("a channel name")?;
                let right_type = self.parse_type()?;
                let sub = self.parse_derivation()?;
                Derivation::plus_r1(subject.as_str(), right_type, sub)
            }
            "plusR2" => {
                let subject = self.expect_ident("a channel name")?;
                let left_type = self.parse_type()?;
                let sub = self.parse_derivation()?;
                Derivation::plus_r2(subject.as_str(), left_type, sub)
            }
            "withL1" => {
                let chan = self.expect_ident("a channel name")?;
                let right_type = self.parse_type()?;
                let sub = self.parse_derivation()?;
                Derivation::with_l1(chan.as_str(), right_type, sub)
            }
            "withL2" => {
                let chan = self.expect_ident("a channel name")?;
                let left_type = self.parse_type()?;
                let sub = self.parse_derivation()?;
                Derivation::with_l2(chan.as_str(), left_type, sub)
            }
            "withR" => {
                let subject = self.expect_ident("a channel name")?;
                let left = self.parse_derivation()?;
                let right = self.parse_derivation()?;
                Derivation::with_r(subject.as_str(), left, right)
            }
            "bSharp" => {
                let chan = self.expect_ident("a channel name")?;
                let bound = self.expect_ident("a bound name")?;
                let sub = self.parse_derivation()?;
                Derivation::b_sharp(chan.as_str(), bound.as_str(), sub)
            }
            "bBang" => {
                let chan = self.expect_ident("a channel name")?;
                let bound = self.expect_ident("a bound name")?;
                let ty = self.parse_type()?;
                let sub = self.parse_derivation()?;
                Derivation::b_bang(chan.as_str(), bound.as_str(), ty, sub)
            }
            "bangLSharp" => {
                let chan = self.expect_ident("a channel name")?;
                let sub = self.parse_derivation()?;
                Derivation::bang_l_sharp(chan.as_str(), sub)
            }
            "bangLBang" => {
                let chan = self.expect_ident("a channel name")?;
                let sub = self.parse_derivation()?;
                Derivation::bang_l_bang(chan.as_str(), sub)
            }
            "bangR" => {
                let subject = self.expect_ident("a channel name")?;
                let bound = self.expect_ident("a bound name")?;
                self.expect(Tok::LParen, "'('")?;
                self.expect_keyword("doors")?;
                let mut doors: Vec<Name> = Vec::new();
                while let Some(Tok::Ident(_)) = self.peek() {
                    let d = self.expect_ident("a door name")?;
                    doors.push(Name::from(d.as_str()));
                }
                self.expect(Tok::RParen, "')'")?;
                let mux = self.parse_zone_group("mux")?.unwrap_or_else(Zone::new);
                let sub = self.parse_derivation()?;
                Derivation::bang_r_in(subject.as_str(), bound.as_str(), doors, mux, sub)
            }
            "cut" | "cutBang" | "cutSharp" => {
                let chan = self.expect_ident("a channel name")?;
                let ty = self.parse_type()?;
                let left = self.parse_derivation()?;
                let right = self.parse_derivation()?;
                match head.as_str() {
                    "cut" => Derivation::cut(chan.as_str(), ty, left, right),
                    "cutBang" => Derivation::cut_bang(chan.as_str(), ty, left, right),
                    _ => Derivation::cut_sharp(chan.as_str(), ty, left, right),
                }
            }
            _ => {
                self.i -= 1;
                return Err(self.err(&["a derivation rule head"]));
            }
        };
        self.expect(Tok::RParen, "')'")?;
        Ok(d)
    }

    fn parse_zone_group(&mut self, kw: &str) -> Result<Option<Zone>, ParseError> {
        let starts = self.peek() == Some(&Tok::LParen)
            && matches!(self.peek2(), Some(Tok::Ident(s)) if s == kw);
        if !starts {
            return Ok(None);
        }
        self.i += 2;
        let mut zone = Zone::new();
        while let Some(Tok::Ident(_)) = self.peek() {
            let ch = self.expect_ident("a channel name")?;
            let at = self.pos();
            self.expect(Tok::Colon, "':'")?;
            let ty = self.parse_type()?;
            zone.insert(Name::from(ch.as_str()), ty).map_err(|_| ParseError {
                line: at.0,
                column: at.1,
                found: format!("'{ch}'"),
                expected: vec!["a fresh channel name".into()],
            })?;
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(Some(zone))
    }

    fn parse_signature(&mut self, name: &str) -> Result<Signature, ParseError> {
        self.expect_keyword("gives")?;
        let chan = self.expect_ident("a channel name")?;
        self.expect(Tok::Colon, "':'")?;
        let ty = self.parse_type()?;
        let mut linear = Zone::new();
        let mut aux = Zone::new();
        let mut mux = Zone::new();
        while self.at_keyword("uses") {
            self.i += 1;
            let zone = if self.at_keyword("aux") && matches!(self.peek2(), Some(Tok::Ident(_))) {
                self.i += 1;
                &mut aux
            } else if self.at_keyword("mux") && matches!(self.peek2(), Some(Tok::Ident(_))) {
                self.i += 1;
                &mut mux
            } else {
                &mut linear
            };
            let ch = self.expect_ident("a channel name")?;
            let at = self.pos();
            self.expect(Tok::Colon, "':'")?;
            let t = self.parse_type()?;
            zone.insert(Name::from(ch.as_str()), t).map_err(|_| ParseError {
                line: at.0,
                column: at.1,
                found: format!("'{ch}'"),
                expected: vec!["a fresh channel name".into()],
            })?;
        }
        let mode = if self.at_keyword("in") {
            self.i += 1;
            let m = self.expect_ident("'dsll' or 'dill'")?;
            match m.as_str() {
                "dsll" => Mode::Dsll,
                "dill" => Mode::Dill,
                _ => {
                    self.i -= 1;
                    return Err(self.err(&["'dsll'", "'dill'"]));
                }
            }
        } else {
            Mode::Dsll
        };
        Ok(Signature::new(name, chan.as_str(), ty, mode)
            .with_linear(linear)
            .with_aux(aux)
            .with_mux(mux))
    }

    fn parse_item(&mut self) -> Result<Item, ParseError> {
        let (line, _) = self.pos();
        let kind = match self.peek() {
            Some(Tok::Ident(s)) if s == "type" => {
                self.i += 1;
                let name = self.expect_ident("a type name")?;
                let name = self.fresh_name(name)?;
                self.expect(Tok::Eq, "'='")?;
                let ty = self.parse_type()?;
                self.aliases.insert(name.clone(), ty.clone());
                ItemKind::TypeAlias { name, ty }
            }
            Some(Tok::Ident(s)) if s == "process" => {
                self.i += 1;
                let name = self.expect_ident("a definition name")?;
                let name = self.fresh_name(name)?;
                let signature = self.parse_signature(&name)?;
                self.expect(Tok::Eq, "'='")?;
                let process = self.parse_process()?;
                self.defined.insert(name.clone(), ());
                ItemKind::Definition(Box::new(Definition { name, signature, process }))
            }
            Some(Tok::Ident(s)) if s == "derivation" => {
                self.i += 1;
                let name = self.expect_ident("a derivation name")?;
                let name = self.fresh_name(name)?;
                self.expect(Tok::Eq, "'='")?;
                let derivation = self.parse_derivation()?;
                self.defined.insert(name.clone(), ());
                ItemKind::DerivationLiteral { name, derivation }
            }
            Some(Tok::Ident(s)) if s == "analyze" => {
                self.i += 1;
                let target = self.expect_ident("a defined name")?;
                if !self.defined.contains_key(&target) {
                    self.i -= 1;
                    return Err(self.err(&["a defined process or derivation name"]));
                }
                ItemKind::Analyze { target }
            }
            _ => return Err(self.err(&["'type'", "'process'", "'derivation'", "'analyze'"])),
        };
        Ok(Item { line, kind })
    }
}

/// Parses a `.sst` source text.
pub fn parse(source: &str) -> Result<SourceFile, ParseError> {
    let (toks, eof) = lex(source)?;
    let mut p = Parser { toks, i: 0, eof, aliases: BTreeMap::new(), defined: BTreeMap::new() };
    let mut items = Vec::new();
    while p.peek().is_some() {
        items.push(p.parse_item()?);
    }
    Ok(SourceFile { items })
}

/// Prints a file so that parsing it back yields the same declarations
/// (type aliases are expanded where they were used).
pub fn print_source(sf: &SourceFile) -> String {
    let mut out = String::new();
    for item in &sf.items {
        match &item.kind {
            ItemKind::TypeAlias { name, ty } => {
                out.push_str(&format!("type {name} = {ty}\n"));
            }
            ItemKind::Definition(def) => {
                out.push_str(&print_definition(def));
                out.push('\n');
            }
            ItemKind::DerivationLiteral { name, derivation } => {
                out.push_str(&format!("derivation {name} = {}\n", print_derivation(derivation)));
            }
            ItemKind::Analyze { target } => {
                out.push_str(&format!("analyze {target}\n"));
            }
        }
    }
    out
}

fn print_definition(def: &Definition) -> String {
    let sig = &def.signature;
    let mut out = format!("process {} gives {} : {}", def.name, sig.gives.0, sig.gives.1);
    for (n, t) in sig.uses_linear.iter() {
        out.push_str(&format!(" uses {n} : {t}"));
    }
    for (n, t) in sig.uses_aux.iter() {
        out.push_str(&format!(" uses aux {n} : {t}"));
    }
    for (n, t) in sig.uses_mux.iter() {
        out.push_str(&format!(" uses mux {n} : {t}"));
    }
    if sig.mode == Mode::Dill {
        out.push_str(" in dill");
    }
    out.push_str(&format!(" = {}", def.process));
    out
}

/// The s-expression form of a derivation, parseable by [`parse`].
pub fn print_derivation(d: &Derivation) -> String {
    fn zone_group(kw: &str, z: &Zone) -> String {
        if z.is_empty() {
            return String::new();
        }
        let body: Vec<String> = z.iter().map(|(n, t)| format!("{n}:{}", atom_type(t))).collect();
        format!(" ({kw} {})", body.join(" "))
    }
    // types with spaces stay unambiguous, but parenthesizing compound ones
    // keeps literals readable
    fn atom_type(t: &Type) -> String {
        match t {
            Type::One | Type::Bang(_) => t.to_string(),
            _ => format!("({t})"),
        }
    }
    match d {
        Derivation::OneL { chan, sub } => format!("(oneL {chan} {})", print_derivation(sub)),
        Derivation::OneR { subject, aux, mux } => {
            format!("(oneR {subject}{}{})", zone_group("aux", aux), zone_group("mux", mux))
        }
        Derivation::TensorL { chan, bound, sub } => {
            format!("(tensorL {chan} {bound} {})", print_derivation(sub))
        }
        Derivation::TensorR { subject, bound, left, right } => format!(
            "(tensorR {subject} {bound} {} {})",
            print_derivation(left),
            print_derivation(right)
        ),
        Derivation::LolliL { chan, bound, left, right } => format!(
            "(lolliL {chan} {bound} {} {})",
            print_derivation(left),
            print_derivation(right)
        ),
        Derivation::LolliR { subject, bound, sub } => {
            format!("(lolliR {subject} {bound} {})", print_derivation(sub))
        }
        Derivation::PlusL { chan, left, right } => {
            format!("(plusL {chan} {} {})", print_derivation(left), print_derivation(right))
        }
        Derivation::PlusR1 { subject, right_type, sub } => {
            format!("(plusR1 {subject} {} {})", atom_type(right_type), print_derivation(sub))
        }
        Derivation::PlusR2 { subject, left_type, sub } => {
            format!("(plusR2 {subject} {} {})", atom_type(left_type), print_derivation(sub))
        }
        Derivation::WithL1 { chan, right_type, sub } => {
            format!("(withL1 {chan} {} {})", atom_type(right_type), print_derivation(sub))
        }
        Derivation::WithL2 { chan, left_type, sub } => {
            format!("(withL2 {chan} {} {})", atom_type(left_type), print_derivation(sub))
        }
        Derivation::WithR { subject, left, right } => {
            format!("(withR {subject} {} {})", print_derivation(left), print_derivation(right))
        }
        Derivation::BSharp { chan, bound, sub } => {
            format!("(bSharp {chan} {bound} {})", print_derivation(sub))
        }
        Derivation::BBang { chan, bound, type_a, sub } => format!(
            "(bBang {chan} {bound} {} {})",
            atom_type(type_a),
            print_derivation(sub)
        ),
        Derivation::BangLSharp { chan, sub } => {
            format!("(bangLSharp {chan} {})", print_derivation(sub))
        }
        Derivation::BangLBang { chan, sub } => {
            format!("(bangLBang {chan} {})", print_derivation(sub))
        }
        Derivation::BangR { subject, bound, aux_chans, mux, sub } => {
            let doors: Vec<String> = aux_chans.iter().map(|n| n.to_string()).collect();
            format!(
                "(bangR {subject} {bound} (doors {}){} {})",
                doors.join(" "),
                zone_group("mux", mux),
                print_derivation(sub)
            )
        }
        Derivation::Cut { chan, type_a, left, right } => format!(
            "(cut {chan} {} {} {})",
            atom_type(type_a),
            print_derivation(left),
            print_derivation(right)
        ),
        Derivation::CutBang { chan, type_a, left, right } => format!(
            "(cutBang {chan} {} {} {})",
            atom_type(type_a),
            print_derivation(left),
            print_derivation(right)
        ),
        Derivation::CutSharp { chan, type_a, left, right } => format!(
            "(cutSharp {chan} {} {} {})",
            atom_type(type_a),
            print_derivation(left),
            print_derivation(right)
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::alpha_eq;
    use crate::derivation::testkit::samples;

    #[test]
    fn a_minimal_definition_parses() {
        let sf = parse("process d gives x:1 = 0").expect("parses");
        assert_eq!(sf.items.len(), 1);
        let def = sf.definitions().next().expect("one definition");
        assert_eq!(def.name, "d");
        assert_eq!(def.signature.gives, (Name::from("x"), Type::One));
        assert_eq!(def.process, Process::Nil);
        assert_eq!(def.signature.mode, Mode::Dsll);
    }

    #[test]
    fn full_signatures_round_trip() {
        let src = "type pay = 1 * 1\n\
                   process relay gives x : pay -o 1 uses y : 1 uses aux a : 1 uses mux m : 1 in dill = x(v). y<w>\n\
                   analyze relay\n";
        let sf = parse(src).expect("parses");
        let def = sf.definitions().next().unwrap();
        assert_eq!(def.signature.gives.1, Type::lolli(Type::tensor(Type::One, Type::One), Type::One));
        assert_eq!(def.signature.mode, Mode::Dill);
        assert_eq!(sf.directives().collect::<Vec<_>>(), vec!["relay"]);
        let again = parse(&print_source(&sf)).expect("printed output parses");
        assert_eq!(again.definitions().next().unwrap().signature, def.signature);
        assert!(alpha_eq(&again.definitions().next().unwrap().process, &def.process));
    }

    #[test]
    fn processes_round_trip_through_the_printer() {
        let cases = [
            "0",
            "new x. (x<y> | x(z). z.inl)",
            "!s(y). y.case(a<v>, b<w>. 0)",
            "x.inr; new q. q<r>. (0 | r(t))",
            "new x. new y. (x<a>. y<b> | x(c) | y(d))",
        ];
        for src in cases {
            let wrapped = format!("process t gives z:1 = {src}");
            let sf = parse(&wrapped).expect("parses");
            let p = &sf.definitions().next().unwrap().process;
            let printed = format!("process t gives z:1 = {p}");
            let sf2 = parse(&printed).expect("printed output parses");
            assert!(
                alpha_eq(&sf2.definitions().next().unwrap().process, p),
                "round trip changed {src}"
            );
        }
    }

    #[test]
    fn types_need_parentheses_between_connectives() {
        assert!(parse("process t gives z : 1 * 1 + 1 = 0").is_err());
        let ok = parse("process t gives z : (1 * 1) + 1 = 0").expect("parenthesized form parses");
        assert_eq!(
            ok.definitions().next().unwrap().signature.gives.1,
            Type::plus(Type::tensor(Type::One, Type::One), Type::One)
        );
        let chain = parse("process t gives z : 1 & !1 & 1 -o 1 = 0").expect("chains parse");
        assert_eq!(
            chain.definitions().next().unwrap().signature.gives.1,
            Type::lolli(Type::with(Type::with(Type::One, Type::bang(Type::One)), Type::One), Type::One)
        );
    }

    #[test]
    fn unbalanced_parenthesis_reports_its_location() {
        let err = parse("process t gives z:1 = (a<b> | 0").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.column > 20);
        assert!(err.expected.iter().any(|e| e.contains(")")));
    }

    #[test]
    fn parse_errors_list_the_expected_tokens() {
        let err = parse("process t gives z:1 = x,").unwrap_err();
        assert_eq!((err.line, err.column), (1, 24));
        assert_eq!(err.found, "','");
        assert!(err.expected.len() >= 3);
        let err = parse("broken").unwrap_err();
        assert!(err.expected.iter().any(|e| e.contains("process")));
    }

    #[test]
    fn derivation_literals_round_trip_over_the_sample_corpus() {
        for d in samples() {
            let src = format!("derivation t = {}", print_derivation(&d));
            let sf = parse(&src).unwrap_or_else(|e| panic!("{src} failed: {e}"));
            let (_, parsed) = sf.derivations().next().expect("one literal");
            assert_eq!(parsed, &d, "round trip changed {src}");
        }
    }

    #[test]
    fn derivation_literals_accept_zone_groups() {
        let src = "derivation t = (cut x (1 -o 1) \
                   (lolliR x y (oneL y (oneR x (mux m:1)))) \
                   (lolliL x w (oneR w (mux m:1)) (oneL x (oneR z (mux m:1)))))";
        let sf = parse(src).expect("parses");
        let (_, d) = sf.derivations().next().unwrap();
        assert!(crate::derivation::check_derivation(d).is_ok());
    }

    #[test]
    fn names_must_be_defined_before_use() {
        assert!(parse("analyze ghost").is_err());
        assert!(parse("process a gives x:1 = 0 process a gives y:1 = 0").is_err());
        assert!(parse("process t gives x : missing = 0").is_err());
        let ok = parse("process a gives x:1 = 0 analyze a").expect("in-order reference parses");
        assert_eq!(ok.directives().count(), 1);
    }

    #[test]
    fn keywords_stay_usable_as_channel_names() {
        let sf = parse("process t gives z:1 = new(y). aux<w>").expect("contextual keywords");
        let p = &sf.definitions().next().unwrap().process;
        assert_eq!(
            p,
            &Process::input("new", "y", Process::output("aux", "w", Process::Nil))
        );
    }
}
