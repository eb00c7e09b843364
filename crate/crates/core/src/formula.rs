//! Syntax of SL(*, -*): the formula tree, a text grammar, a printer and the
//! shortcut expansion into the primitive connectives.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A program variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(String);

impl Var {
    /// Builds a variable, checking the identifier syntax.
    pub fn new(name: &str) -> Result<Var, ParseError> {
        let mut chars = name.chars();
        let ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
            && chars.all(is_ident_char)
            && !is_keyword(name);
        if ok {
            Ok(Var(name.to_string()))
        } else {
            Err(ParseError {
                pos: 0,
                msg: format!("invalid variable name `{name}`"),
            })
        }
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shorthand used throughout the tests and fixtures. Panics on a bad name.
pub fn v(name: &str) -> Var {
    Var::new(name).expect("valid variable name")
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Emp,
    True,
    False,
    Eq(Var, Var),
    PointsTo(Var, Var),
    Alloc(Var),
    SizeGeq(u32),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Star(Box<Formula>, Box<Formula>),
    Wand(Box<Formula>, Box<Formula>),
    Septraction(Box<Formula>, Box<Formula>),
}

// Constructors. They keep call sites readable in fixtures and tests.
impl Formula {
    pub fn eq(x: &Var, y: &Var) -> Formula {
        Formula::Eq(x.clone(), y.clone())
    }
    pub fn neq(x: &Var, y: &Var) -> Formula {
        Formula::eq(x, y).not()
    }
    pub fn pto(x: &Var, y: &Var) -> Formula {
        Formula::PointsTo(x.clone(), y.clone())
    }
    pub fn alloc(x: &Var) -> Formula {
        Formula::Alloc(x.clone())
    }
    pub fn size(k: u32) -> Formula {
        Formula::SizeGeq(k)
    }
    /// `size = k`, i.e. `size >= k /\ not size >= k+1`.
    pub fn size_eq(k: u32) -> Formula {
        Formula::SizeGeq(k).and(Formula::SizeGeq(k + 1).not())
    }
    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Formula {
        Formula::Not(Box::new(self))
    }
    pub fn and(self, rhs: Formula) -> Formula {
        Formula::And(Box::new(self), Box::new(rhs))
    }
    pub fn or(self, rhs: Formula) -> Formula {
        Formula::Or(Box::new(self), Box::new(rhs))
    }
    pub fn implies(self, rhs: Formula) -> Formula {
        Formula::Implies(Box::new(self), Box::new(rhs))
    }
    pub fn iff(self, rhs: Formula) -> Formula {
        Formula::Iff(Box::new(self), Box::new(rhs))
    }
    pub fn star(self, rhs: Formula) -> Formula {
        Formula::Star(Box::new(self), Box::new(rhs))
    }
    pub fn wand(self, rhs: Formula) -> Formula {
        Formula::Wand(Box::new(self), Box::new(rhs))
    }
    pub fn septraction(self, rhs: Formula) -> Formula {
        Formula::Septraction(Box::new(self), Box::new(rhs))
    }

    /// Left-nested conjunction; `true` when empty.
    pub fn conj(parts: impl IntoIterator<Item = Formula>) -> Formula {
        parts
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    /// Left-nested disjunction; `false` when empty.
    pub fn disj(parts: impl IntoIterator<Item = Formula>) -> Formula {
        parts
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or(Formula::False)
    }

    /// Number of connectives (every non-atomic node counts once).
    pub fn connectives(&self) -> usize {
        match self.children() {
            (None, None) => 0,
            (Some(a), None) => 1 + a.connectives(),
            (Some(a), Some(b)) => 1 + a.connectives() + b.connectives(),
            (None, Some(_)) => unreachable!(),
        }
    }

    /// Immediate subformulas.
    pub fn children(&self) -> (Option<&Formula>, Option<&Formula>) {
        use Formula::*;
        match self {
            Emp | True | False | Eq(..) | PointsTo(..) | Alloc(_) | SizeGeq(_) => (None, None),
            Not(a) => (Some(a), None),
            And(a, b) | Or(a, b) | Implies(a, b) | Iff(a, b) | Star(a, b) | Wand(a, b)
            | Septraction(a, b) => (Some(a), Some(b)),
        }
    }

    pub fn is_atom(&self) -> bool {
        self.children().0.is_none()
    }
}

/// Every variable occurring in `f`, sorted.
pub fn free_vars(f: &Formula) -> BTreeSet<Var> {
    let mut out = BTreeSet::new();
    collect_vars(f, &mut out);
    out
}

fn collect_vars(f: &Formula, out: &mut BTreeSet<Var>) {
    match f {
        Formula::Eq(x, y) | Formula::PointsTo(x, y) => {
            out.insert(x.clone());
            out.insert(y.clone());
        }
        Formula::Alloc(x) => {
            out.insert(x.clone());
        }
        _ => {
            if let (Some(a), b) = f.children() {
                collect_vars(a, out);
                if let Some(b) = b {
                    collect_vars(b, out);
                }
            }
        }
    }
}

/// Rewrites every derived connective into `emp`, `=`, `|->`, `not`, `/\`, `*`
/// and `-*`. `true` and `false` stay as they are.
pub fn expand_shortcuts(f: &Formula) -> Formula {
    use Formula::*;
    match f {
        Emp | True | False | Eq(..) | PointsTo(..) => f.clone(),
        Alloc(x) => Formula::pto(x, x).wand(False),
        SizeGeq(k) => expand_size(*k),
        Not(a) => expand_shortcuts(a).not(),
        And(a, b) => expand_shortcuts(a).and(expand_shortcuts(b)),
        Or(a, b) => expand_shortcuts(a)
            .not()
            .and(expand_shortcuts(b).not())
            .not(),
        Implies(a, b) => expand_implies(expand_shortcuts(a), expand_shortcuts(b)),
        Iff(a, b) => {
            let (a, b) = (expand_shortcuts(a), expand_shortcuts(b));
            expand_implies(a.clone(), b.clone()).and(expand_implies(b, a))
        }
        Star(a, b) => expand_shortcuts(a).star(expand_shortcuts(b)),
        Wand(a, b) => expand_shortcuts(a).wand(expand_shortcuts(b)),
        Septraction(a, b) => expand_shortcuts(a)
            .wand(expand_shortcuts(b).not())
            .not(),
    }
}

fn expand_implies(a: Formula, b: Formula) -> Formula {
    a.and(b.not()).not()
}

fn expand_size(k: u32) -> Formula {
    match k {
        0 => Formula::True,
        1 => Formula::Emp.not(),
        _ => Formula::Emp.not().star(expand_size(k - 1)),
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(u64),
    LParen,
    RParen,
    Eq,
    Neq,
    PointsTo,
    Geq,
    And,
    Or,
    Star,
    Implies,
    Wand,
    Sept,
    Iff,
    Minus,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Nat(n) => return write!(f, "`{n}`"),
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Eq => "=",
            Tok::Neq => "!=",
            Tok::PointsTo => "|->",
            Tok::Geq => ">=",
            Tok::And => "/\\",
            Tok::Or => "\\/",
            Tok::Star => "*",
            Tok::Implies => "->",
            Tok::Wand => "-*",
            Tok::Sept => "-o",
            Tok::Iff => "<->",
            Tok::Minus => "-",
        };
        write!(f, "`{s}`")
    }
}

const KEYWORDS: [&str; 6] = ["emp", "true", "false", "alloc", "size", "not"];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, msg: String| ParseError { pos, msg };
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let rest = &src[i..];
        let (tok, len) = if c.is_ascii_alphabetic() {
            let len = rest
                .char_indices()
                .find(|&(_, ch)| !is_ident_char(ch))
                .map_or(rest.len(), |(j, _)| j);
            (Tok::Ident(rest[..len].to_string()), len)
        } else if c.is_ascii_digit() {
            let len = rest
                .find(|ch: char| !ch.is_ascii_digit())
                .unwrap_or(rest.len());
            let n = rest[..len]
                .parse::<u64>()
                .map_err(|_| err(start, "number too large".into()))?;
            (Tok::Nat(n), len)
        } else if rest.starts_with("|->") {
            (Tok::PointsTo, 3)
        } else if rest.starts_with("<->") {
            (Tok::Iff, 3)
        } else if rest.starts_with("/\\") {
            (Tok::And, 2)
        } else if rest.starts_with("\\/") {
            (Tok::Or, 2)
        } else if rest.starts_with("->") {
            (Tok::Implies, 2)
        } else if rest.starts_with("-*") {
            (Tok::Wand, 2)
        } else if rest.starts_with("-o") && !rest[2..].starts_with(is_ident_char) {
            (Tok::Sept, 2)
        } else if rest.starts_with("!=") {
            (Tok::Neq, 2)
        } else if rest.starts_with(">=") {
            (Tok::Geq, 2)
        } else {
            match c {
                b'(' => (Tok::LParen, 1),
                b')' => (Tok::RParen, 1),
                b'=' => (Tok::Eq, 1),
                b'*' => (Tok::Star, 1),
                b'-' => (Tok::Minus, 1),
                _ => {
                    let ch = rest.chars().next().unwrap_or('?');
                    return Err(err(start, format!("unexpected character `{ch}`")));
                }
            }
        };
        out.push((start, tok));
        i += len;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        match self.peek() {
            Some(t) => self.error(format!("expected {wanted}, found {t}")),
            None => self.error(format!("expected {wanted}, found end of input")),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.at += 1;
            Ok(())
        } else {
            self.unexpected(&tok.to_string())
        }
    }

    fn iff(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.imp()?;
        if self.peek() == Some(&Tok::Iff) {
            self.at += 1;
            let rhs = self.imp()?;
            if self.peek() == Some(&Tok::Iff) {
                return self.error("`<->` is not associative; add parentheses");
            }
            return Ok(lhs.iff(rhs));
        }
        Ok(lhs)
    }

    fn imp(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.orx()?;
        let op = match self.peek() {
            Some(Tok::Implies) => Formula::implies,
            Some(Tok::Wand) => Formula::wand,
            Some(Tok::Sept) => Formula::septraction,
            _ => return Ok(lhs),
        };
        self.at += 1;
        let rhs = self.imp()?;
        Ok(op(lhs, rhs))
    }

    fn orx(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.andx()?;
        while self.peek() == Some(&Tok::Or) {
            self.at += 1;
            lhs = lhs.or(self.andx()?);
        }
        Ok(lhs)
    }

    fn andx(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::And) => Formula::and,
                Some(Tok::Star) => Formula::star,
                _ => return Ok(lhs),
            };
            self.at += 1;
            lhs = op(lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == "not") {
            self.at += 1;
            return Ok(self.unary()?.not());
        }
        self.atom()
    }

    fn nat(&mut self) -> Result<u32, ParseError> {
        match self.peek() {
            Some(Tok::Nat(n)) => {
                let n = *n;
                if n >= u64::from(u32::MAX) {
                    return self.error("size index too large");
                }
                self.at += 1;
                Ok(n as u32)
            }
            Some(Tok::Minus) => self.error("size index must be a natural number"),
            _ => self.unexpected("a natural number"),
        }
    }

    fn var(&mut self) -> Result<Var, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !is_keyword(s) => {
                let v = Var(s.clone());
                self.at += 1;
                Ok(v)
            }
            _ => self.unexpected("a variable"),
        }
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.unexpected("a formula");
        };
        match tok {
            Tok::LParen => {
                self.at += 1;
                let f = self.iff()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(s) => match s.as_str() {
                "emp" => {
                    self.at += 1;
                    Ok(Formula::Emp)
                }
                "true" => {
                    self.at += 1;
                    Ok(Formula::True)
                }
                "false" => {
                    self.at += 1;
                    Ok(Formula::False)
                }
                "alloc" => {
                    self.at += 1;
                    self.expect(Tok::LParen)?;
                    let x = self.var()?;
                    self.expect(Tok::RParen)?;
                    Ok(Formula::Alloc(x))
                }
                "size" => {
                    self.at += 1;
                    match self.bump() {
                        Some(Tok::Geq) => Ok(Formula::SizeGeq(self.nat()?)),
                        Some(Tok::Eq) => Ok(Formula::size_eq(self.nat()?)),
                        _ => {
                            self.at -= 1;
                            self.unexpected("`>=` or `=` after `size`")
                        }
                    }
                }
                "not" => self.unexpected("an atom"),
                _ => {
                    let x = self.var()?;
                    let op = self.bump();
                    match op {
                        Some(Tok::Eq) => Ok(Formula::Eq(x, self.var()?)),
                        Some(Tok::Neq) => Ok(Formula::Eq(x, self.var()?).not()),
                        Some(Tok::PointsTo) => Ok(Formula::PointsTo(x, self.var()?)),
                        _ => {
                            self.at -= 1;
                            self.unexpected("`=`, `!=` or `|->` after a variable")
                        }
                    }
                }
            },
            _ => self.unexpected("a formula"),
        }
    }
}

/// Parses a formula. `size = k` and `x != y` are expanded on the fly.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
    };
    let f = p.iff()?;
    if p.at < p.toks.len() {
        return p.unexpected("end of input");
    }
    Ok(f)
}

impl std::str::FromStr for Formula {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

// ---------------------------------------------------------------------------
// Printing

// Binding strength, loosest first.
const L_IFF: u8 = 0;
const L_IMP: u8 = 1;
const L_OR: u8 = 2;
const L_AND: u8 = 3;
const L_UNARY: u8 = 4;
const L_ATOM: u8 = 5;

fn size_eq_sugar(f: &Formula) -> Option<u32> {
    if let Formula::And(a, b) = f {
        if let (Formula::SizeGeq(k), Formula::Not(n)) = (&**a, &**b) {
            if k.checked_add(1).map(Formula::SizeGeq).as_ref() == Some(&**n) {
                return Some(*k);
            }
        }
    }
    None
}

fn level(f: &Formula) -> u8 {
    use Formula::*;
    if size_eq_sugar(f).is_some() {
        return L_ATOM;
    }
    match f {
        Not(a) if matches!(**a, Eq(..)) => L_ATOM,
        Not(_) => L_UNARY,
        And(..) | Star(..) => L_AND,
        Or(..) => L_OR,
        Implies(..) | Wand(..) | Septraction(..) => L_IMP,
        Iff(..) => L_IFF,
        _ => L_ATOM,
    }
}

fn write_at(out: &mut String, f: &Formula, min: u8) {
    if level(f) < min {
        out.push('(');
        write_formula(out, f);
        out.push(')');
    } else {
        write_formula(out, f);
    }
}

fn write_formula(out: &mut String, f: &Formula) {
    use Formula::*;
    if let Some(k) = size_eq_sugar(f) {
        out.push_str(&format!("size = {k}"));
        return;
    }
    let bin = |out: &mut String, a: &Formula, op: &str, b: &Formula, la: u8, lb: u8| {
        write_at(out, a, la);
        out.push(' ');
        out.push_str(op);
        out.push(' ');
        write_at(out, b, lb);
    };
    match f {
        Emp => out.push_str("emp"),
        True => out.push_str("true"),
        False => out.push_str("false"),
        Eq(x, y) => out.push_str(&format!("{x} = {y}")),
        PointsTo(x, y) => out.push_str(&format!("{x} |-> {y}")),
        Alloc(x) => out.push_str(&format!("alloc({x})")),
        SizeGeq(k) => out.push_str(&format!("size >= {k}")),
        Not(a) => match &**a {
            Eq(x, y) => out.push_str(&format!("{x} != {y}")),
            _ => {
                out.push_str("not ");
                write_at(out, a, L_UNARY);
            }
        },
        And(a, b) => bin(out, a, "/\\", b, L_AND, L_UNARY),
        Star(a, b) => bin(out, a, "*", b, L_AND, L_UNARY),
        Or(a, b) => bin(out, a, "\\/", b, L_OR, L_AND),
        Implies(a, b) => bin(out, a, "->", b, L_OR, L_IMP),
        Wand(a, b) => bin(out, a, "-*", b, L_OR, L_IMP),
        Septraction(a, b) => bin(out, a, "-o", b, L_OR, L_IMP),
        Iff(a, b) => bin(out, a, "<->", b, L_IMP, L_IMP),
    }
}

/// Renders `f` with as few parentheses as the grammar allows.
pub fn print(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(&mut out, f);
    out
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

/// The variable set and size bound of a core basis `Core(X, alpha)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoreBasis {
    pub vars: Vec<Var>,
    pub alpha: u32,
}

impl CoreBasis {
    /// Sorts and deduplicates `vars`.
    pub fn new(vars: impl IntoIterator<Item = Var>, alpha: u32) -> CoreBasis {
        let set: BTreeSet<Var> = vars.into_iter().collect();
        CoreBasis {
            vars: set.into_iter().collect(),
            alpha,
        }
    }

    /// Lifts alpha to at least `max(1, |X|)`.
    pub fn padded(mut self) -> CoreBasis {
        self.alpha = self.alpha.max(self.vars.len() as u32).max(1);
        self
    }

    /// Union of variables, max of bounds, padded.
    pub fn join(&self, other: &CoreBasis) -> CoreBasis {
        CoreBasis::new(
            self.vars.iter().chain(&other.vars).cloned(),
            self.alpha.max(other.alpha),
        )
        .padded()
    }
}

impl fmt::Display for CoreBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vars: Vec<&str> = self.vars.iter().map(Var::name).collect();
        write!(f, "X = {{{}}}, alpha = {}", vars.join(", "), self.alpha)
    }
}
