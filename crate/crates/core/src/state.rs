//! Canonical elements of (super)vertex algebras: finite combinations of
//! right-nested normally ordered monomials applied to the vacuum.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Rat, Scalar};

pub type GenId = u16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn is_odd(self) -> bool {
        self == Parity::Odd
    }

    pub fn add(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Sign `(-1)^{|a||b|}` as +1 or -1.
pub fn koszul(a: Parity, b: Parity) -> i64 {
    if a.is_odd() && b.is_odd() {
        -1
    } else {
        1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub name: String,
    pub parity: Parity,
    pub conformal_weight: Rat,
    pub kazhdan_weight: Rat,
    pub ghost_number: i32,
    pub ad_h_weight: Option<Rat>,
}

impl Generator {
    pub fn even(name: &str) -> Self {
        Generator {
            name: name.to_string(),
            parity: Parity::Even,
            conformal_weight: Rat::zero(),
            kazhdan_weight: Rat::zero(),
            ghost_number: 0,
            ad_h_weight: None,
        }
    }

    pub fn odd(name: &str) -> Self {
        Generator { parity: Parity::Odd, ..Generator::even(name) }
    }

    pub fn with_conformal(mut self, w: Rat) -> Self {
        self.conformal_weight = w;
        self
    }

    pub fn with_kazhdan(mut self, w: Rat) -> Self {
        self.kazhdan_weight = w;
        self
    }

    pub fn with_ghost(mut self, g: i32) -> Self {
        self.ghost_number = g;
        self
    }

    pub fn with_ad_h(mut self, w: Rat) -> Self {
        self.ad_h_weight = Some(w);
        self
    }
}

/// One normally ordered factor: a derivative of a generator, or the inverse
/// of an invertible generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    Gen { id: GenId, deriv: u16 },
    Inv { id: GenId },
}

impl Factor {
    pub fn gen(id: GenId, deriv: u16) -> Self {
        Factor::Gen { id, deriv }
    }

    pub fn id(self) -> GenId {
        match self {
            Factor::Gen { id, .. } | Factor::Inv { id } => id,
        }
    }

    pub fn deriv(self) -> u16 {
        match self {
            Factor::Gen { deriv, .. } => deriv,
            Factor::Inv { .. } => 0,
        }
    }

    pub fn is_inverse(self) -> bool {
        matches!(self, Factor::Inv { .. })
    }

    /// True for a generator factor of order 0 next to its own inverse.
    pub fn is_partner_of(self, other: Factor) -> bool {
        match (self, other) {
            (Factor::Gen { id: a, deriv: 0 }, Factor::Inv { id: b })
            | (Factor::Inv { id: a }, Factor::Gen { id: b, deriv: 0 }) => a == b,
            _ => false,
        }
    }

    fn sort_key(self) -> (GenId, u8, std::cmp::Reverse<u16>) {
        match self {
            Factor::Gen { id, deriv } => (id, 0, std::cmp::Reverse(deriv)),
            Factor::Inv { id } => (id, 1, std::cmp::Reverse(0)),
        }
    }
}

impl Ord for Factor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for Factor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Right-nested word `f1_(-1)(f2_(-1)(... 1))`; the empty word is the vacuum.
/// Canonical words are sorted, never hold a generator of order 0 together
/// with its inverse, and never repeat an odd factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial(Vec<Factor>);

impl Monomial {
    pub fn vacuum() -> Self {
        Monomial(Vec::new())
    }

    pub fn single(f: Factor) -> Self {
        Monomial(vec![f])
    }

    /// Wraps factors that are already in canonical order.
    pub fn from_sorted(factors: Vec<Factor>) -> Self {
        debug_assert!(factors.windows(2).all(|w| w[0] <= w[1]));
        Monomial(factors)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.0
    }

    pub fn is_vacuum(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn head(&self) -> Option<Factor> {
        self.0.first().copied()
    }

    /// The word without its first factor.
    pub fn tail(&self) -> Monomial {
        Monomial(self.0[1..].to_vec())
    }

    /// Prepends a factor known to precede every factor of `self`.
    pub fn prepend(&self, f: Factor) -> Monomial {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(f);
        v.extend_from_slice(&self.0);
        Monomial(v)
    }

    /// Total number of derivatives applied.
    pub fn depth(&self) -> u32 {
        self.0.iter().map(|f| f.deriv() as u32).sum()
    }

    pub fn has_inverse(&self) -> bool {
        self.0.iter().any(|f| f.is_inverse())
    }
}

/// A finite linear combination of canonical monomials.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct State {
    terms: BTreeMap<Monomial, Scalar>,
    tag: u64,
}

/// Tag carried by states built from two different algebras.
pub const MIXED_TAG: u64 = u64::MAX;

fn merge_tags(a: u64, b: u64) -> u64 {
    match (a, b) {
        (0, t) | (t, 0) => t,
        (s, t) if s == t => s,
        _ => MIXED_TAG,
    }
}

impl State {
    pub fn zero() -> Self {
        State::default()
    }

    pub fn vacuum() -> Self {
        State::scalar(Scalar::one())
    }

    pub fn scalar(c: Scalar) -> Self {
        State::term(Monomial::vacuum(), c)
    }

    pub fn term(m: Monomial, c: Scalar) -> Self {
        let mut s = State::zero();
        s.add_term(m, c);
        s
    }

    pub fn monomial(m: Monomial) -> Self {
        State::term(m, Scalar::one())
    }

    /// Identifies the algebra a state belongs to; 0 means algebra-neutral.
    pub fn tag(&self) -> u64 {
        self.tag
    }

    pub fn with_tag(mut self, tag: u64) -> Self {
        if !self.terms.keys().all(|m| m.is_vacuum()) {
            self.tag = tag;
        }
        self
    }

    pub(crate) fn set_tag(&mut self, tag: u64) {
        self.tag = tag;
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Scalar)> {
        self.terms.iter()
    }

    pub fn monomials(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.keys()
    }

    pub fn coeff(&self, m: &Monomial) -> Scalar {
        self.terms.get(m).cloned().unwrap_or_else(Scalar::zero)
    }

    /// Scalar value if the state is a multiple of the vacuum.
    pub fn as_scalar(&self) -> Option<Scalar> {
        match self.terms.len() {
            0 => Some(Scalar::zero()),
            1 => self.terms.get(&Monomial::vacuum()).cloned(),
            _ => None,
        }
    }

    pub fn add_term(&mut self, m: Monomial, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                let sum = existing.add(&c);
                if sum.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &State, c: &Scalar) {
        if c.is_zero() || other.is_zero() {
            return;
        }
        self.tag = merge_tags(self.tag, other.tag);
        let unit = c.is_one();
        for (m, v) in &other.terms {
            self.add_term(m.clone(), if unit { v.clone() } else { v.mul(c) });
        }
    }

    pub fn add_assign(&mut self, other: &State) {
        self.add_scaled(other, &Scalar::one());
    }

    pub fn add(&self, other: &State) -> State {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn sub(&self, other: &State) -> State {
        let mut out = self.clone();
        out.add_scaled(other, &Scalar::from_int(-1));
        out
    }

    pub fn neg(&self) -> State {
        self.scale(&Scalar::from_int(-1))
    }

    pub fn scale(&self, c: &Scalar) -> State {
        let mut out = State { terms: BTreeMap::new(), tag: self.tag };
        out.add_scaled(self, c);
        out.tag = self.tag;
        out
    }

    pub fn scale_int(&self, n: i64) -> State {
        self.scale(&Scalar::from_int(n))
    }

    /// Applies a coefficient-wise map, dropping zero results.
    pub fn map_coeffs<E>(&self, mut f: impl FnMut(&Scalar) -> Result<Scalar, E>) -> Result<State, E> {
        let mut out = State { terms: BTreeMap::new(), tag: self.tag };
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f(c)?);
        }
        Ok(out)
    }

    /// Lowest `q`-exponent over all coefficients.
    pub fn min_q(&self) -> Option<i32> {
        self.terms.values().filter_map(|c| c.min_q()).min()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradingKind {
    Parity,
    Conformal,
    Kazhdan,
    Ghost,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum GradeValue {
    Parity(Parity),
    Weight(Rat),
    Ghost(i32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("state is inhomogeneous for the {0:?} grading")]
pub struct Inhomogeneous(pub GradingKind);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("duplicate generator name `{0}`")]
    DuplicateGenerator(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
}

/// Generator list with name lookup and grading data.
#[derive(Clone, Debug, Default)]
pub struct GeneratorTable {
    gens: Vec<Generator>,
    index: HashMap<String, GenId>,
}

impl GeneratorTable {
    pub fn new(gens: Vec<Generator>) -> Result<Self, TableError> {
        let mut index = HashMap::new();
        for (i, g) in gens.iter().enumerate() {
            if index.insert(g.name.clone(), i as GenId).is_some() {
                return Err(TableError::DuplicateGenerator(g.name.clone()));
            }
        }
        Ok(GeneratorTable { gens, index })
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.gens
    }

    pub fn get(&self, id: GenId) -> &Generator {
        &self.gens[id as usize]
    }

    pub fn id(&self, name: &str) -> Result<GenId, TableError> {
        self.index.get(name).copied().ok_or_else(|| TableError::UnknownGenerator(name.to_string()))
    }

    pub fn parity_of_factor(&self, f: Factor) -> Parity {
        self.get(f.id()).parity
    }

    pub fn parity_of_monomial(&self, m: &Monomial) -> Parity {
        m.factors().iter().fold(Parity::Even, |p, f| p.add(self.parity_of_factor(*f)))
    }

    fn factor_weight(&self, f: Factor, kind: GradingKind) -> Rat {
        let g = self.get(f.id());
        let base = match kind {
            GradingKind::Conformal => g.conformal_weight.clone(),
            GradingKind::Kazhdan => g.kazhdan_weight.clone(),
            GradingKind::Ghost => Rat::from_integer(g.ghost_number.into()),
            GradingKind::Parity => Rat::zero(),
        };
        match f {
            Factor::Gen { deriv, .. } if kind == GradingKind::Conformal => base + Rat::from_integer(deriv.into()),
            Factor::Gen { .. } => base,
            Factor::Inv { .. } => -base,
        }
    }

    /// Sum of per-factor weights of a monomial (no scalar contribution).
    pub fn monomial_weight(&self, m: &Monomial, kind: GradingKind) -> Rat {
        m.factors().iter().map(|f| self.factor_weight(*f, kind)).fold(Rat::zero(), |a, b| a + b)
    }

    pub fn monomial_ghost(&self, m: &Monomial) -> i32 {
        m.factors().iter().map(|f| {
            let g = self.get(f.id()).ghost_number;
            if f.is_inverse() { -g } else { g }
        }).sum()
    }

    /// Grading of a state; `q` carries Kazhdan weight 1 and no other weight.
    pub fn grading(&self, s: &State, kind: GradingKind) -> Result<Option<GradeValue>, Inhomogeneous> {
        let mut value: Option<GradeValue> = None;
        for (m, c) in s.terms() {
            let vals: Vec<GradeValue> = match kind {
                GradingKind::Parity => vec![GradeValue::Parity(self.parity_of_monomial(m))],
                GradingKind::Ghost => vec![GradeValue::Ghost(self.monomial_ghost(m))],
                GradingKind::Conformal => vec![GradeValue::Weight(self.monomial_weight(m, kind))],
                GradingKind::Kazhdan => {
                    let base = self.monomial_weight(m, kind);
                    c.terms().iter().map(|(e, _)| GradeValue::Weight(base.clone() + Rat::from_integer((*e).into()))).collect()
                }
            };
            for v in vals {
                match &value {
                    None => value = Some(v),
                    Some(existing) if *existing == v => {}
                    Some(_) => return Err(Inhomogeneous(kind)),
                }
            }
        }
        Ok(value)
    }

    pub fn render_factor(&self, f: Factor) -> String {
        let name = &self.get(f.id()).name;
        match f {
            Factor::Gen { deriv: 0, .. } => name.clone(),
            Factor::Gen { deriv: 1, .. } => format!("D({})", name),
            Factor::Gen { deriv, .. } => format!("D^{}({})", deriv, name),
            Factor::Inv { .. } => format!("{}^-1", name),
        }
    }

    /// `1`, `x`, or `:D^2(x) d:` text for a monomial.
    pub fn render_monomial(&self, m: &Monomial) -> String {
        match m.len() {
            0 => "1".to_string(),
            1 => self.render_factor(m.factors()[0]),
            _ => {
                let parts: Vec<String> = m.factors().iter().map(|f| self.render_factor(*f)).collect();
                format!(":{}:", parts.join(" "))
            }
        }
    }

    pub fn render_state(&self, s: &State) -> String {
        render_with(s, |m| self.render_monomial(m))
    }

    pub fn display<'a>(&'a self, s: &'a State) -> StateDisplay<'a> {
        StateDisplay { table: self, state: s }
    }
}

/// Renders `c1*m1 + c2*m2` with the given monomial printer.
pub fn render_with(s: &State, mono: impl Fn(&Monomial) -> String) -> String {
    if s.is_zero() {
        return "0".to_string();
    }
    if let [(m, c)] = s.terms().collect::<Vec<_>>().as_slice() {
        if m.is_vacuum() {
            return c.to_string();
        }
    }
    let mut out = String::new();
    for (i, (m, c)) in s.terms().enumerate() {
        let (neg, mag) = c.render_factor();
        let body = if m.is_vacuum() {
            mag
        } else if mag == "1" {
            mono(m)
        } else {
            format!("{}*{}", mag, mono(m))
        };
        match (i, neg) {
            (0, true) => out.push_str(&format!("-{}", body)),
            (0, false) => out.push_str(&body),
            (_, true) => out.push_str(&format!(" - {}", body)),
            (_, false) => out.push_str(&format!(" + {}", body)),
        }
    }
    out
}

pub struct StateDisplay<'a> {
    table: &'a GeneratorTable,
    state: &'a State,
}

impl fmt::Display for StateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table.render_state(self.state))
    }
}

/// Raw expression tree accepted by normal ordering.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Vacuum,
    Scalar(Scalar),
    Gen(String),
    /// `g^-n`: a negative power of an invertible generator.
    InvPower(String, u32),
    Derivative(Box<Expr>, u32),
    /// Right-nested `(-1)` products of the listed items.
    NormalOrder(Vec<Expr>),
    /// Right-nested power `a_(-1)(a_(-1)(... a))`.
    Power(Box<Expr>, u32),
    Product(Box<Expr>, i64, Box<Expr>),
    Sum(Vec<Expr>),
    Neg(Box<Expr>),
    Scaled(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn gen(name: &str) -> Expr {
        Expr::Gen(name.to_string())
    }

    pub fn scalar(c: Scalar) -> Expr {
        Expr::Scalar(c)
    }

    pub fn d(self, p: u32) -> Expr {
        Expr::Derivative(Box::new(self), p)
    }

    pub fn pow(self, n: u32) -> Expr {
        Expr::Power(Box::new(self), n)
    }

    pub fn times(c: Scalar, e: Expr) -> Expr {
        Expr::Scaled(Box::new(Expr::Scalar(c)), Box::new(e))
    }

    pub fn nprod(a: Expr, n: i64, b: Expr) -> Expr {
        Expr::Product(Box::new(a), n, Box::new(b))
    }

    pub fn no(items: Vec<Expr>) -> Expr {
        Expr::NormalOrder(items)
    }
}
