//! Text syntax for terms, patterns, rules and event lists.
//!
//! ```text
//! term    := item ("|" item)* | "0"
//! item    := atom ("^" exp)? | "$" IDENT
//! atom    := "{" term "}" "<" info ">" "[" term "]" | seq
//! seq     := "eps" | IDENT ("." IDENT)*
//! info    := (binding (";" binding)*)? | "@" IDENT | binding (";" binding)* ";" "@" IDENT
//! binding := IDENT ":" (NUMBER | IDENT | "true" | "false")
//! exp     := NAT | "#" IDENT | "(" "#" IDENT "+" NAT ")" | IDENT "(" NAT ")"
//! rule    := "rule" IDENT ("[" "#" IDENT ">" (NAT | IDENT) "]")? term "=>" term
//!            "@" rate ("select" ("min" | "max") "(" "#" IDENT ")")?
//!            ("target" "(" "@" IDENT ")")? ";"
//! rate    := NUMBER | IDENT "(" NUMBER ("," NUMBER)* ")"
//! event   := "(" IDENT "," VALUE "," NUMBER ")"
//! ```
//!
//! Comments run from `--` to the end of the line. Ground terms reject
//! variables. The `Display` impls in this module produce the canonical text
//! that the parsers read back.

use std::fmt;

use thiserror::Error;

use crate::pattern::{Exponent, ExponentFn, InfoPattern, LoopPattern, Pattern, PatternAtom, PatternItem};
use crate::rules::{Bound, Guard, RateFn, RewriteRule, RuleError, Selection};
use crate::ssa::{EventList, ExternalEvent};
use crate::term::{canonicalize, EnvInfo, Loop, NonParallel, Sequence, Symbol, Term, Value};

const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error(transparent)]
    Syntax(#[from] ParseError),
    #[error("{span}: unknown rate function {name:?}")]
    UnknownRate { name: String, span: SourceSpan },
    #[error("{span}: right-hand side uses {var}, which the left-hand side does not bind")]
    UnboundRhsVariable { var: String, span: SourceSpan },
    #[error("{span}: {message}")]
    Invalid { message: String, span: SourceSpan },
}

impl DslError {
    pub fn span(&self) -> SourceSpan {
        match self {
            DslError::Syntax(e) => e.span,
            DslError::UnknownRate { span, .. }
            | DslError::UnboundRhsVariable { span, .. }
            | DslError::Invalid { span, .. } => *span,
        }
    }
}

type PResult<T> = Result<T, DslError>;

struct Parser<'s> {
    src: &'s str,
    pos: usize,
    depth: usize,
    /// Span of the first variable seen, for rejecting variables in ground terms.
    first_var: Option<SourceSpan>,
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn is_value_byte(b: u8) -> bool {
    is_word_byte(b) || b == b'.' || b == b'-' || b == b'+'
}

impl<'s> Parser<'s> {
    fn new(src: &'s str) -> Self {
        Parser {
            src,
            pos: 0,
            depth: 0,
            first_var: None,
        }
    }

    fn bytes(&self) -> &[u8] {
        self.src.as_bytes()
    }

    fn span(&self, start: usize, end: usize) -> SourceSpan {
        let before = &self.src.as_bytes()[..start];
        let line = before.iter().filter(|b| **b == b'\n').count() + 1;
        let line_start = before.iter().rposition(|b| *b == b'\n').map(|i| i + 1).unwrap_or(0);
        let column = self.src[line_start..start].chars().count() + 1;
        SourceSpan {
            start,
            end,
            line,
            column,
        }
    }

    fn skip_ws(&mut self) {
        let src = self.src;
        let b = src.as_bytes();
        loop {
            while self.pos < b.len() && b[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if b[self.pos..].starts_with(b"--") {
                while self.pos < b.len() && b[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn found(&self) -> (String, usize) {
        let rest = &self.src[self.pos..];
        match rest.chars().next() {
            None => ("end of input".to_string(), self.pos),
            Some(c) => {
                let w: usize = rest.bytes().take_while(|b| is_word_byte(*b)).count();
                if w > 0 {
                    (format!("{:?}", &rest[..w]), self.pos + w)
                } else {
                    (format!("{c:?}"), self.pos + c.len_utf8())
                }
            }
        }
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let (found, end) = self.found();
        Err(DslError::Syntax(ParseError {
            span: self.span(self.pos, end),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }))
    }

    fn invalid<T>(&self, message: impl Into<String>, start: usize, end: usize) -> PResult<T> {
        Err(DslError::Invalid {
            message: message.into(),
            span: self.span(start, end),
        })
    }

    fn peek_is(&mut self, s: &str) -> bool {
        self.skip_ws();
        self.src[self.pos..].starts_with(s)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.peek_is(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            self.error(&[&format!("{s:?}")])
        }
    }

    fn peek_word(&mut self) -> Option<&'s str> {
        self.skip_ws();
        let n = self.bytes()[self.pos..].iter().take_while(|b| is_word_byte(**b)).count();
        if n == 0 {
            None
        } else {
            Some(&self.src[self.pos..self.pos + n])
        }
    }

    fn word(&mut self, what: &str) -> PResult<(&'s str, usize)> {
        match self.peek_word() {
            Some(w) => {
                let start = self.pos;
                self.pos += w.len();
                Ok((w, start))
            }
            None => self.error(&[what]),
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_word() == Some(kw) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    fn expect_end(&mut self) -> PResult<()> {
        if self.at_end() {
            Ok(())
        } else {
            self.error(&["end of input"])
        }
    }

    fn nat(&mut self) -> PResult<u64> {
        let (w, start) = self.word("natural number")?;
        match w.parse::<u64>() {
            Ok(n) if w.bytes().all(|b| b.is_ascii_digit()) => Ok(n),
            _ => self.invalid(format!("{w:?} is not a natural number"), start, start + w.len()),
        }
    }

    fn var_name(&mut self, sigil: &str) -> PResult<String> {
        let start = self.pos;
        self.expect(sigil)?;
        if self.src[self.pos..].starts_with(|c: char| c.is_whitespace()) {
            return self.error(&["variable name"]);
        }
        let (w, _) = self.word("variable name")?;
        if self.first_var.is_none() {
            self.first_var = Some(self.span(start, self.pos));
        }
        Ok(w.to_string())
    }

    fn value_word(&mut self) -> PResult<(&'s str, usize)> {
        self.skip_ws();
        let b = self.bytes();
        let start = self.pos;
        let mut end = start;
        while end < b.len() && is_value_byte(b[end]) && !b[end..].starts_with(b"--") {
            end += 1;
        }
        if end == start {
            return self.error(&["value"]);
        }
        self.pos = end;
        Ok((&self.src[start..end], start))
    }

    fn value(&mut self) -> PResult<Value> {
        let (w, start) = self.value_word()?;
        let end = start + w.len();
        match classify_value(w) {
            Some(v) => Ok(v),
            None => self.invalid(format!("{w:?} is not a valid value"), start, end),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        let (w, start) = self.value_word()?;
        match classify_value(w).and_then(|v| v.as_f64()) {
            Some(x) => Ok(x),
            None => self.invalid(format!("{w:?} is not a number"), start, start + w.len()),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let p = self.pos;
            return self.invalid("nesting too deep", p, p);
        }
        Ok(())
    }

    fn level(&mut self) -> PResult<Pattern> {
        self.enter()?;
        let mut pat = Pattern::default();
        if self.peek_word() == Some("0") {
            self.pos += 1;
            self.depth -= 1;
            return Ok(pat);
        }
        loop {
            if self.peek_is("$") {
                let start = self.pos;
                let v = self.var_name("$")?;
                if pat.rest.is_some() {
                    return self.invalid("at most one term variable per level", start, self.pos);
                }
                pat.rest = Some(v);
            } else {
                let atom = self.atom()?;
                let exp = if self.eat("^") { self.exponent()? } else { Exponent::Lit(1) };
                if !matches!(&atom, PatternAtom::Seq(s) if s.is_epsilon()) {
                    pat.items.push(PatternItem { atom, exp });
                }
            }
            if !self.eat("|") {
                break;
            }
        }
        self.depth -= 1;
        Ok(pat)
    }

    fn exponent(&mut self) -> PResult<Exponent> {
        if self.peek_is("#") {
            return Ok(Exponent::Var(self.var_name("#")?));
        }
        if self.eat("(") {
            let q = self.var_name("#")?;
            self.expect("+")?;
            let k = self.nat()?;
            self.expect(")")?;
            return Ok(Exponent::VarPlus(q, k));
        }
        match self.peek_word() {
            Some(w) if w.bytes().all(|b| b.is_ascii_digit()) => Ok(Exponent::Lit(self.nat()?)),
            Some(w) => {
                let start = self.pos;
                self.pos += w.len();
                let f = match ExponentFn::from_name(w) {
                    Some(f) => f,
                    None => return self.invalid(format!("unknown exponent function {w:?}"), start, self.pos),
                };
                self.expect("(")?;
                let arg = self.nat()?;
                self.expect(")")?;
                if self.first_var.is_none() {
                    self.first_var = Some(self.span(start, self.pos));
                }
                Ok(Exponent::Call(f, arg))
            }
            None => self.error(&["natural number", "\"#\"", "\"(\"", "exponent function"]),
        }
    }

    fn atom(&mut self) -> PResult<PatternAtom> {
        if self.eat("{") {
            let wall_start = self.pos;
            let wall = self.level()?;
            let wall_end = self.pos;
            self.expect("}")?;
            let wall = match pattern_to_ground(&wall) {
                Some(t) => t,
                None => return self.invalid("loop parts must be ground", wall_start, wall_end),
            };
            self.expect("<")?;
            let info = self.info()?;
            self.expect(">")?;
            self.expect("[")?;
            let content = self.level()?;
            self.expect("]")?;
            return Ok(PatternAtom::Loop(Box::new(LoopPattern { wall, info, content })));
        }
        let (w, start) = self.word("symbol, \"{\" or \"$\"")?;
        if w == "eps" {
            return Ok(PatternAtom::Seq(Sequence::epsilon()));
        }
        let mut syms = vec![self.symbol(w, start)?];
        while self.src[self.pos..].starts_with('.') {
            self.pos += 1;
            if self.src[self.pos..].starts_with(|c: char| c.is_whitespace()) {
                return self.error(&["symbol"]);
            }
            let (w, start) = self.word("symbol")?;
            syms.push(self.symbol(w, start)?);
        }
        Ok(PatternAtom::Seq(Sequence(syms)))
    }

    fn symbol(&self, w: &str, start: usize) -> PResult<Symbol> {
        Symbol::new(w).or_else(|_| self.invalid(format!("{w:?} is not a symbol"), start, start + w.len()))
    }

    fn info(&mut self) -> PResult<InfoPattern> {
        let mut ip = InfoPattern {
            literal: EnvInfo::new(),
            rest: None,
        };
        if self.peek_is(">") {
            return Ok(ip);
        }
        loop {
            if self.peek_is("@") {
                ip.rest = Some(self.var_name("@")?);
                break;
            }
            let (name, start) = self.word("information name")?;
            let sym = self.symbol(name, start)?;
            self.expect(":")?;
            let v = self.value()?;
            if ip.literal.0.insert(sym, v).is_some() {
                return self.invalid(format!("duplicate information name {name:?}"), start, start + name.len());
            }
            if !self.eat(";") {
                break;
            }
        }
        Ok(ip)
    }

    fn ground_term(&mut self) -> PResult<Term> {
        self.first_var = None;
        let p = self.level()?;
        if let Some(span) = self.first_var {
            return Err(DslError::Invalid {
                message: "ground terms cannot contain variables".into(),
                span,
            });
        }
        Ok(pattern_to_ground(&p).expect("variable-free pattern"))
    }

    fn rule(&mut self) -> PResult<RewriteRule> {
        if !self.eat_keyword("rule") {
            return self.error(&["\"rule\""]);
        }
        let (id, _) = self.word("rule name")?;
        let id = id.to_string();
        let mut guard = Guard::Always;
        if self.eat("[") {
            let var = self.var_name("#")?;
            self.expect(">")?;
            let bound = match self.peek_word() {
                Some(w) if w.bytes().all(|b| b.is_ascii_digit()) => Bound::Lit(self.nat()?),
                Some(w) => {
                    self.pos += w.len();
                    Bound::Param(w.to_string())
                }
                None => return self.error(&["natural number", "parameter name"]),
            };
            self.expect("]")?;
            guard = Guard::Greater { var, bound };
        }
        let lhs_start = self.skip_then_pos();
        let left = self.level()?;
        let lhs_end = self.pos;
        self.expect("=>")?;
        let rhs_start = self.skip_then_pos();
        let right = self.level()?;
        let rhs_end = self.pos;
        self.expect("@")?;
        let rate = self.rate()?;
        let mut selection = Selection::Weighted;
        if self.eat_keyword("select") {
            let start = self.pos;
            let (kind, _) = self.word("\"min\" or \"max\"")?;
            self.expect("(")?;
            let q = self.var_name("#")?;
            self.expect(")")?;
            selection = match kind {
                "min" => Selection::MinNat(q),
                "max" => Selection::MaxNat(q),
                _ => return self.invalid(format!("unknown selection {kind:?}"), start, self.pos),
            };
        }
        let mut target = None;
        if self.eat_keyword("target") {
            self.expect("(")?;
            target = Some(self.var_name("@")?);
            self.expect(")")?;
        }
        self.expect(";")?;
        RewriteRule::new(id, guard, left, right, rate, selection, target).map_err(|e| match e {
            RuleError::UnboundRhsVariable(var) => DslError::UnboundRhsVariable {
                var,
                span: self.span(rhs_start, rhs_end),
            },
            other => DslError::Invalid {
                message: other.to_string(),
                span: self.span(lhs_start, lhs_end),
            },
        })
    }

    fn skip_then_pos(&mut self) -> usize {
        self.skip_ws();
        self.pos
    }

    fn rate(&mut self) -> PResult<RateFn> {
        self.skip_ws();
        let starts_numeric = self.src[self.pos..].starts_with(|c: char| c.is_ascii_digit() || c == '.' || c == '-' || c == '+');
        if starts_numeric {
            let start = self.pos;
            let x = self.number()?;
            if !(x >= 0.0 && x.is_finite()) {
                return self.invalid("rates must be finite and nonnegative", start, self.pos);
            }
            return Ok(RateFn::Const(x));
        }
        let (name, start) = self.word("rate")?;
        let name_end = start + name.len();
        self.expect("(")?;
        let mut args = vec![self.number()?];
        while self.eat(",") {
            args.push(self.number()?);
        }
        self.expect(")")?;
        let idx = |a: &[f64]| -> Option<u8> {
            match a {
                [x] if x.fract() == 0.0 && *x >= 0.0 && *x <= 255.0 => Some(*x as u8),
                _ => None,
            }
        };
        let r = match name {
            "const" => match args.as_slice() {
                [x] if *x >= 0.0 && x.is_finite() => Some(RateFn::Const(*x)),
                _ => None,
            },
            "immature" => idx(&args).map(RateFn::Immature),
            "adult" => idx(&args).map(RateFn::Adult),
            _ => {
                return Err(DslError::UnknownRate {
                    name: name.to_string(),
                    span: self.span(start, name_end),
                })
            }
        };
        match r {
            Some(r) => Ok(r),
            None => self.invalid(format!("bad arguments for {name}"), start, self.pos),
        }
    }

    fn event(&mut self) -> PResult<ExternalEvent> {
        self.expect("(")?;
        let (name, _) = self.word("event name")?;
        self.expect(",")?;
        let value = self.value()?;
        self.expect(",")?;
        let start = self.skip_then_pos();
        let time = self.number()?;
        if !(time >= 0.0 && time.is_finite()) {
            return self.invalid("event times must be finite and nonnegative", start, self.pos);
        }
        self.expect(")")?;
        Ok(ExternalEvent {
            name: name.to_string(),
            value,
            time,
        })
    }
}

fn classify_value(w: &str) -> Option<Value> {
    match w {
        "true" => return Some(Value::Bool(true)),
        "false" => return Some(Value::Bool(false)),
        _ => {}
    }
    let b = w.as_bytes();
    let numeric = b[0].is_ascii_digit()
        || ((b[0] == b'-' || b[0] == b'+' || b[0] == b'.') && b.len() > 1 && (b[1].is_ascii_digit() || b[1] == b'.'));
    if numeric {
        if w.contains(['.', 'e', 'E']) {
            w.parse::<f64>().ok().filter(|x| x.is_finite()).map(Value::Real)
        } else {
            w.parse::<i64>().ok().map(Value::Int)
        }
    } else {
        Value::token(w).ok()
    }
}

fn pattern_to_ground(p: &Pattern) -> Option<Term> {
    if p.rest.is_some() {
        return None;
    }
    let mut items = Vec::with_capacity(p.items.len());
    for it in &p.items {
        let Exponent::Lit(m) = it.exp else { return None };
        let np = match &it.atom {
            PatternAtom::Seq(s) => NonParallel::Seq(s.clone()),
            PatternAtom::Loop(lp) => {
                if lp.info.rest.is_some() {
                    return None;
                }
                NonParallel::looping(lp.wall.clone(), lp.info.literal.clone(), pattern_to_ground(&lp.content)?)
            }
        };
        items.push((np, m));
    }
    Some(canonicalize(items))
}

pub fn parse_term(text: &str) -> Result<Term, DslError> {
    let mut p = Parser::new(text);
    let t = p.ground_term()?;
    p.expect_end()?;
    Ok(t)
}

pub fn parse_pattern(text: &str) -> Result<Pattern, DslError> {
    let mut p = Parser::new(text);
    let pat = p.level()?;
    p.expect_end()?;
    Ok(pat)
}

pub fn parse_rule(text: &str) -> Result<RewriteRule, DslError> {
    let mut p = Parser::new(text);
    let r = p.rule()?;
    p.expect_end()?;
    Ok(r)
}

/// Parses a model file: a sequence of rules. Rule names must be unique.
pub fn parse_model(text: &str) -> Result<Vec<RewriteRule>, DslError> {
    let mut p = Parser::new(text);
    let mut rules: Vec<RewriteRule> = Vec::new();
    while !p.at_end() {
        let start = p.pos;
        let r = p.rule()?;
        if rules.iter().any(|x| x.id == r.id) {
            return p.invalid(format!("duplicate rule {:?}", r.id), start, p.pos);
        }
        rules.push(r);
    }
    Ok(rules)
}

/// Parses `(NAME, VALUE, TIME)` triples. Unsorted input is accepted and
/// sorted by time, keeping input order among equal times.
pub fn parse_events(text: &str) -> Result<EventList, DslError> {
    let mut p = Parser::new(text);
    let mut events = Vec::new();
    while !p.at_end() {
        events.push(p.event()?);
    }
    Ok(EventList::from_events(events))
}

// ---------------------------------------------------------------------------
// Serialization

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Token(t) => f.write_str(t),
        }
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("eps");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            f.write_str(s.as_str())?;
        }
        Ok(())
    }
}

fn write_info(f: &mut fmt::Formatter<'_>, info: &EnvInfo, rest: Option<&str>) -> fmt::Result {
    let mut first = true;
    for (k, v) in &info.0 {
        if !first {
            f.write_str("; ")?;
        }
        first = false;
        write!(f, "{k}:{v}")?;
    }
    if let Some(x) = rest {
        if !first {
            f.write_str("; ")?;
        }
        write!(f, "@{x}")?;
    }
    Ok(())
}

impl fmt::Display for EnvInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_info(f, self, None)
    }
}

impl fmt::Display for Loop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}<{}>[{}]", self.wall, self.info, self.content)
    }
}

impl fmt::Display for NonParallel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonParallel::Seq(s) => write!(f, "{s}"),
            NonParallel::Loop(l) => write!(f, "{l}"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("0");
        }
        for (i, (np, m)) in self.items().iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{np}")?;
            if *m != 1 {
                write!(f, "^{m}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Lit(1) => Ok(()),
            Exponent::Lit(n) => write!(f, "^{n}"),
            Exponent::Var(q) => write!(f, "^#{q}"),
            Exponent::VarPlus(q, k) => write!(f, "^(#{q}+{k})"),
            Exponent::Call(func, arg) => write!(f, "^{}({arg})", func.name()),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.items.is_empty() && self.rest.is_none() {
            return f.write_str("0");
        }
        let mut first = true;
        for it in &self.items {
            if !first {
                f.write_str(" | ")?;
            }
            first = false;
            match &it.atom {
                PatternAtom::Seq(s) => write!(f, "{s}")?,
                PatternAtom::Loop(lp) => {
                    write!(f, "{{{}}}<", lp.wall)?;
                    write_info(f, &lp.info.literal, lp.info.rest.as_deref())?;
                    write!(f, ">[{}]", lp.content)?;
                }
            }
            write!(f, "{}", it.exp)?;
        }
        if let Some(x) = &self.rest {
            if !first {
                f.write_str(" | ")?;
            }
            write!(f, "${x}")?;
        }
        Ok(())
    }
}

impl fmt::Display for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::Const(k) => write!(f, "{k:?}"),
            RateFn::Immature(i) => write!(f, "immature({i})"),
            RateFn::Adult(i) => write!(f, "adult({i})"),
        }
    }
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {} ", self.id)?;
        if let Guard::Greater { var, bound } = &self.guard {
            match bound {
                Bound::Lit(n) => write!(f, "[#{var} > {n}] ")?,
                Bound::Param(p) => write!(f, "[#{var} > {p}] ")?,
            }
        }
        write!(f, "{} => {} @ {}", self.left, self.right, self.rate)?;
        match &self.selection {
            Selection::Weighted => {}
            Selection::MinNat(q) => write!(f, " select min(#{q})")?,
            Selection::MaxNat(q) => write!(f, " select max(#{q})")?,
        }
        if let Some(y) = &self.target {
            write!(f, " target(@{y})")?;
        }
        f.write_str(";")
    }
}

impl fmt::Display for ExternalEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {:?})", self.name, self.value, self.time)
    }
}

impl fmt::Display for EventList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in self.iter() {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}
