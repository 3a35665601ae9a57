//! Terms of the looping-sequence calculus.
//!
//! A [`Term`] is a multiset of non-parallel components, each either a
//! [`Sequence`] of symbols or a looping-containment [`Loop`] carrying
//! environmental information. Terms are always held in canonical form:
//! identical siblings are merged into one entry with a multiplicity, entries
//! are sorted by the derived structural order (sequences before loops) and
//! empty sequences are dropped. Two terms are congruent iff they are equal.

use std::collections::BTreeMap;
use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("invalid symbol {0:?}")]
    InvalidSymbol(String),
    #[error("invalid token value {0:?}")]
    InvalidToken(String),
    #[error("address {0} does not resolve to a compartment")]
    InvalidAddress(CompartmentAddress),
    #[error("unknown environmental information name {0:?}")]
    UnknownInfoName(String),
}

fn is_word(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// An element name. Nonempty, drawn from `[A-Za-z0-9_]`. The words `0` and
/// `eps` are reserved by the text syntax for the empty term and the empty
/// sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(String);

impl Symbol {
    pub fn new(name: impl Into<String>) -> Result<Self, TermError> {
        let name = name.into();
        if !is_word(&name) || name == "0" || name == "eps" {
            return Err(TermError::InvalidSymbol(name));
        }
        Ok(Symbol(name))
    }

    /// Constructor for names known to be valid at compile time.
    pub(crate) fn lit(name: &str) -> Self {
        Symbol::new(name).expect("literal symbol")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered list of symbols; the empty list is ε.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sequence(pub Vec<Symbol>);

impl Sequence {
    pub fn epsilon() -> Self {
        Sequence(Vec::new())
    }

    pub fn is_epsilon(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Sequence) -> Sequence {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Sequence(v)
    }
}

/// Value of one environmental information binding.
///
/// Reals are compared by their exact bit pattern (no tolerance).
#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
    Token(String),
}

impl Value {
    pub fn token(s: impl Into<String>) -> Result<Value, TermError> {
        let s = s.into();
        let mut chars = s.chars();
        let ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
            && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            && !s.contains("--")
            && !s.ends_with('-')
            && s != "true"
            && s != "false"
            && s != "eps";
        if ok {
            Ok(Value::Token(s))
        } else {
            Err(TermError::InvalidToken(s))
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Real(r) if r.fract() == 0.0 && r.is_finite() => Some(*r as i64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_token(&self) -> Option<&str> {
        match self {
            Value::Token(t) => Some(t),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Int(_) => 0,
            Value::Real(_) => 1,
            Value::Bool(_) => 2,
            Value::Token(_) => 3,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Int(i) => i.hash(state),
            Value::Real(r) => r.to_bits().hash(state),
            Value::Bool(b) => b.hash(state),
            Value::Token(t) => t.hash(state),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Token(a), Value::Token(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

/// Environmental information attached to a loop: a map from names to values.
/// The empty map is λ.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EnvInfo(pub BTreeMap<Symbol, Value>);

static LAMBDA: EnvInfo = EnvInfo(BTreeMap::new());

impl EnvInfo {
    pub fn new() -> Self {
        EnvInfo(BTreeMap::new())
    }

    pub fn lambda() -> &'static EnvInfo {
        &LAMBDA
    }

    pub fn with(mut self, name: &str, v: Value) -> Result<Self, TermError> {
        self.0.insert(Symbol::new(name)?, v);
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.iter().find(|(k, _)| k.as_str() == name).map(|(_, v)| v)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Union of two informations with disjoint names; `None` on a clash.
    pub fn concat(&self, other: &EnvInfo) -> Option<EnvInfo> {
        let mut out = self.0.clone();
        for (k, v) in &other.0 {
            if out.insert(k.clone(), v.clone()).is_some() {
                return None;
            }
        }
        Some(EnvInfo(out))
    }
}

/// A looping-containment `(wall)_info ⌋ content`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Loop {
    pub wall: Term,
    pub info: EnvInfo,
    pub content: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NonParallel {
    Seq(Sequence),
    Loop(Box<Loop>),
}

impl NonParallel {
    pub fn looping(wall: Term, info: EnvInfo, content: Term) -> Self {
        NonParallel::Loop(Box::new(Loop {
            wall,
            info,
            content,
        }))
    }

    pub fn symbol(s: &Symbol) -> Self {
        NonParallel::Seq(Sequence(vec![s.clone()]))
    }

    pub fn as_loop(&self) -> Option<&Loop> {
        match self {
            NonParallel::Loop(l) => Some(l),
            NonParallel::Seq(_) => None,
        }
    }
}

/// A canonical multiset of non-parallel components with multiplicities.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    items: Arc<Vec<(NonParallel, u64)>>,
}

/// Builds the canonical form of a parallel composition.
pub fn canonicalize<I>(items: I) -> Term
where
    I: IntoIterator<Item = (NonParallel, u64)>,
{
    let mut v: Vec<(NonParallel, u64)> = items
        .into_iter()
        .filter(|(np, m)| *m > 0 && !matches!(np, NonParallel::Seq(s) if s.is_epsilon()))
        .collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(NonParallel, u64)> = Vec::with_capacity(v.len());
    for (np, m) in v {
        match out.last_mut() {
            Some((last, lm)) if *last == np => {
                *lm = lm.checked_add(m).expect("multiplicity overflow");
            }
            _ => out.push((np, m)),
        }
    }
    Term { items: Arc::new(out) }
}

/// True iff both terms have the same canonical form.
pub fn congruent(a: &Term, b: &Term) -> bool {
    a == b
}

impl Term {
    pub fn empty() -> Self {
        Term { items: Arc::new(Vec::new()) }
    }

    pub fn single(np: NonParallel, mult: u64) -> Self {
        canonicalize([(np, mult)])
    }

    pub fn symbol(s: &Symbol) -> Self {
        Term::single(NonParallel::symbol(s), 1)
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[(NonParallel, u64)] {
        &self.items
    }

    pub fn into_items(self) -> Vec<(NonParallel, u64)> {
        Arc::unwrap_or_clone(self.items)
    }

    /// Canonical form; terms are kept canonical, so this is a clone.
    pub fn canonicalize(&self) -> Term {
        self.clone()
    }

    pub fn parallel(&self, other: &Term) -> Term {
        canonicalize(self.items.iter().chain(other.items.iter()).cloned())
    }

    /// Multiplicity of a component at this level (0 when absent).
    pub fn multiplicity(&self, np: &NonParallel) -> u64 {
        self.items
            .binary_search_by(|(x, _)| x.cmp(np))
            .map(|i| self.items[i].1)
            .unwrap_or(0)
    }

    /// Multiset difference; `None` when `other` is not contained in `self`.
    pub fn subtract(&self, other: &Term) -> Option<Term> {
        let mut items = self.items.to_vec();
        for (np, m) in other.items.iter() {
            let i = items.binary_search_by(|(x, _)| x.cmp(np)).ok()?;
            if items[i].1 < *m {
                return None;
            }
            items[i].1 -= m;
        }
        items.retain(|(_, m)| *m > 0);
        Some(Term { items: Arc::new(items) })
    }

    /// Sum of multiplicities over all nested loops, counted once per copy.
    pub fn total_loops(&self) -> u64 {
        self.items
            .iter()
            .map(|(np, m)| match np {
                NonParallel::Loop(l) => m * (1 + l.content.total_loops()),
                NonParallel::Seq(_) => 0,
            })
            .sum()
    }

    /// The component group at `addr` together with its multiplicity.
    pub fn group_at(&self, addr: &[u32]) -> Option<(&NonParallel, u64)> {
        let (first, rest) = addr.split_first()?;
        let (np, m) = self.items.get(*first as usize)?;
        if rest.is_empty() {
            return Some((np, *m));
        }
        np.as_loop()?.content.group_at(rest)
    }

    /// Product of multiplicities along `addr`: how many concrete copies of
    /// the addressed compartment exist.
    pub fn copies(&self, addr: &[u32]) -> Option<u64> {
        let mut t = self;
        let mut copies = 1u64;
        for (depth, i) in addr.iter().enumerate() {
            let (np, m) = t.items.get(*i as usize)?;
            copies = copies.saturating_mul(*m);
            if depth + 1 < addr.len() {
                t = &np.as_loop()?.content;
            } else {
                np.as_loop()?;
            }
        }
        Some(copies)
    }

    /// Every compartment address in pre-order, starting with the root.
    pub fn sites(&self) -> Vec<CompartmentAddress> {
        let mut out = vec![CompartmentAddress::root()];
        self.collect_sites(&mut Vec::new(), &mut out);
        out
    }

    pub(crate) fn collect_sites(&self, prefix: &mut Vec<u32>, out: &mut Vec<CompartmentAddress>) {
        for (i, (np, _)) in self.items.iter().enumerate() {
            if let NonParallel::Loop(l) = np {
                prefix.push(i as u32);
                out.push(CompartmentAddress(prefix.clone()));
                l.content.collect_sites(prefix, out);
                prefix.pop();
            }
        }
    }

    /// Applies `f` to the addressed compartment (its info, when it is a loop,
    /// and its content) and returns the rebuilt canonical term.
    ///
    /// With `one_copy`, only one concrete copy is changed: every group on the
    /// path with multiplicity above one is split.
    pub fn map_at<F>(&self, addr: &[u32], one_copy: bool, f: F) -> Result<Term, TermError>
    where
        F: FnOnce(Option<&mut EnvInfo>, &mut Term) -> Result<(), TermError>,
    {
        self.map_at_inner(addr, one_copy, f)
            .ok_or_else(|| TermError::InvalidAddress(CompartmentAddress(addr.to_vec())))?
    }

    fn map_at_inner<F>(&self, addr: &[u32], one_copy: bool, f: F) -> Option<Result<Term, TermError>>
    where
        F: FnOnce(Option<&mut EnvInfo>, &mut Term) -> Result<(), TermError>,
    {
        let Some((first, rest)) = addr.split_first() else {
            let mut t = self.clone();
            return Some(f(None, &mut t).map(|_| t));
        };
        let idx = *first as usize;
        let (np, m) = self.items.get(idx)?;
        let l = np.as_loop()?;
        let new_loop = if rest.is_empty() {
            let mut info = l.info.clone();
            let mut content = l.content.clone();
            if let Err(e) = f(Some(&mut info), &mut content) {
                return Some(Err(e));
            }
            Loop {
                wall: l.wall.clone(),
                info,
                content,
            }
        } else {
            let content = match l.content.map_at_inner(rest, one_copy, f)? {
                Ok(c) => c,
                Err(e) => return Some(Err(e)),
            };
            Loop {
                wall: l.wall.clone(),
                info: l.info.clone(),
                content,
            }
        };
        let new_np = NonParallel::Loop(Box::new(new_loop));
        let mut items = self.items.to_vec();
        if one_copy && *m > 1 {
            items[idx].1 -= 1;
            items.push((new_np, 1));
        } else {
            items[idx].0 = new_np;
        }
        Some(Ok(canonicalize(items)))
    }
}

/// Selects individuals (loops) by the symbols of their content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseFilter {
    pub symbols: Vec<Symbol>,
}

impl PhaseFilter {
    pub fn any_of(names: &[&str]) -> Result<Self, TermError> {
        Ok(PhaseFilter {
            symbols: names.iter().map(|n| Symbol::new(*n)).collect::<Result<_, _>>()?,
        })
    }

    pub fn immature() -> Self {
        PhaseFilter {
            symbols: ["Egg", "Larva", "Pupa"].iter().map(|s| Symbol::lit(s)).collect(),
        }
    }

    pub fn adult() -> Self {
        PhaseFilter {
            symbols: vec![Symbol::lit("Adult")],
        }
    }

    fn accepts(&self, l: &Loop) -> bool {
        l.content.items.iter().any(|(np, _)| match np {
            NonParallel::Seq(s) => s.0.len() == 1 && self.symbols.contains(&s.0[0]),
            NonParallel::Loop(_) => false,
        })
    }
}

/// Total multiplicity of the top-level loops of `t` whose content carries a
/// symbol selected by `filter`.
pub fn count_individuals(t: &Term, filter: &PhaseFilter) -> u64 {
    t.items
        .iter()
        .filter_map(|(np, m)| np.as_loop().filter(|l| filter.accepts(l)).map(|_| *m))
        .sum()
}

/// Path of item indices from the root term to a loop. The empty path is the
/// root mixture itself, which carries no information (λ).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompartmentAddress(pub Vec<u32>);

impl CompartmentAddress {
    pub fn root() -> Self {
        CompartmentAddress(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: u32) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        CompartmentAddress(v)
    }

    pub fn starts_with(&self, prefix: &CompartmentAddress) -> bool {
        self.0.starts_with(&prefix.0)
    }
}

impl fmt::Display for CompartmentAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("/")?;
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join("/"))
    }
}

/// Information and content of the addressed compartment.
pub fn resolve<'a>(t: &'a Term, addr: &CompartmentAddress) -> Result<(&'a EnvInfo, &'a Term), TermError> {
    if addr.is_root() {
        return Ok((EnvInfo::lambda(), t));
    }
    match t.group_at(&addr.0) {
        Some((NonParallel::Loop(l), _)) => Ok((&l.info, &l.content)),
        _ => Err(TermError::InvalidAddress(addr.clone())),
    }
}

/// Sets an existing information binding of the addressed loop (all copies of
/// its group).
pub fn update_info(t: &Term, addr: &CompartmentAddress, name: &str, v: Value) -> Result<Term, TermError> {
    if addr.is_root() {
        return Err(TermError::UnknownInfoName(name.to_string()));
    }
    t.map_at(&addr.0, false, |info, _| {
        let info = info.expect("loop address");
        match info.0.iter_mut().find(|(k, _)| k.as_str() == name) {
            Some((_, slot)) => {
                *slot = v;
                Ok(())
            }
            None => Err(TermError::UnknownInfoName(name.to_string())),
        }
    })
}
