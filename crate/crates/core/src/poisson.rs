//! Classical layer: Kostant-Kirillov Poisson algebras, jet Poisson vertex
//! algebras with their n-brackets, localization, and the twisted bracket
//! identity for 2-forms on a chart.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::{Rat, Scalar};
use crate::state::{Factor, GenId, Generator, GeneratorTable, Monomial, Parity, TableError};
use crate::vertex::{binomial, factorial, falling};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoissonError {
    #[error("cannot localize at `{0}`: it is zero or a zero divisor")]
    ZeroDivisorLocalization(String),
    #[error("localization is supported at monomials in even coordinates, got `{0}`")]
    UnsupportedLocalization(String),
    #[error("bracket table violates {0}")]
    BracketAxiom(String),
    #[error("negative power of `{0}`, which is not inverted")]
    NotInverted(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// Jet coordinate `∂^deriv g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct JetVar {
    pub id: GenId,
    pub deriv: u16,
    pub odd: bool,
}

impl JetVar {
    fn key(&self) -> (GenId, std::cmp::Reverse<u16>) {
        (self.id, std::cmp::Reverse(self.deriv))
    }
}

impl Ord for JetVar {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for JetVar {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Sorted product of jet coordinates with nonzero exponents.
/// Invariant: odd coordinates have exponent 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct JetMono(Vec<(JetVar, i32)>);

impl JetMono {
    pub fn one() -> Self {
        JetMono(Vec::new())
    }

    pub fn var(v: JetVar) -> Self {
        JetMono(vec![(v, 1)])
    }

    pub fn factors(&self) -> &[(JetVar, i32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    fn odd_count(&self) -> usize {
        self.0.iter().filter(|(v, _)| v.odd).count()
    }

    pub fn is_odd(&self) -> bool {
        self.odd_count() % 2 == 1
    }

    /// Product with sign from reordering odd coordinates; `None` if zero.
    fn mul(&self, other: &JetMono) -> Option<(JetMono, i64)> {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        let mut sign = 1i64;
        let mut odd_left_remaining = self.odd_count();
        while i < self.0.len() || j < other.0.len() {
            let take_left = j >= other.0.len() || (i < self.0.len() && self.0[i].0 < other.0[j].0);
            let equal = i < self.0.len() && j < other.0.len() && self.0[i].0 == other.0[j].0;
            if equal {
                let (v, e1) = self.0[i];
                let e2 = other.0[j].1;
                if v.odd {
                    return None;
                }
                let e = e1 + e2;
                if e != 0 {
                    out.push((v, e));
                }
                i += 1;
                j += 1;
            } else if take_left {
                if self.0[i].0.odd {
                    odd_left_remaining -= 1;
                }
                out.push(self.0[i]);
                i += 1;
            } else {
                let (v, e) = other.0[j];
                if v.odd && odd_left_remaining % 2 == 1 {
                    sign = -sign;
                }
                out.push((v, e));
                j += 1;
            }
        }
        Some((JetMono(out), sign))
    }
}

/// Finite combination of jet monomials.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct JetPoly {
    terms: BTreeMap<JetMono, Scalar>,
}

impl JetPoly {
    pub fn zero() -> Self {
        JetPoly::default()
    }

    pub fn one() -> Self {
        JetPoly::constant(Scalar::one())
    }

    pub fn constant(c: Scalar) -> Self {
        JetPoly::term(JetMono::one(), c)
    }

    pub fn term(m: JetMono, c: Scalar) -> Self {
        let mut p = JetPoly::zero();
        p.add_term(m, c);
        p
    }

    pub fn var(v: JetVar) -> Self {
        JetPoly::term(JetMono::var(v), Scalar::one())
    }

    /// Commutative image of a canonical vertex monomial.
    pub fn from_monomial(table: &GeneratorTable, m: &Monomial) -> Self {
        let mut acc = JetPoly::one();
        for f in m.factors() {
            let odd = table.get(f.id()).parity.is_odd();
            let p = match *f {
                Factor::Gen { id, deriv } => JetPoly::var(JetVar { id, deriv, odd }),
                Factor::Inv { id } => JetPoly::term(JetMono(vec![(JetVar { id, deriv: 0, odd }, -1)]), Scalar::one()),
            };
            acc = acc.mul(&p);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&JetMono, &Scalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &JetMono) -> Scalar {
        self.terms.get(m).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn as_scalar(&self) -> Option<Scalar> {
        match self.terms.len() {
            0 => Some(Scalar::zero()),
            1 => self.terms.get(&JetMono::one()).cloned(),
            _ => None,
        }
    }

    pub fn add_term(&mut self, m: JetMono, c: Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(x) => {
                let s = x.add(&c);
                if s.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *x = s;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add_scaled(&mut self, other: &JetPoly, c: &Scalar) {
        for (m, v) in &other.terms {
            self.add_term(m.clone(), v.mul(c));
        }
    }

    pub fn add(&self, other: &JetPoly) -> JetPoly {
        let mut out = self.clone();
        out.add_scaled(other, &Scalar::one());
        out
    }

    pub fn sub(&self, other: &JetPoly) -> JetPoly {
        let mut out = self.clone();
        out.add_scaled(other, &Scalar::from_int(-1));
        out
    }

    pub fn neg(&self) -> JetPoly {
        self.scale(&Scalar::from_int(-1))
    }

    pub fn scale(&self, c: &Scalar) -> JetPoly {
        let mut out = JetPoly::zero();
        out.add_scaled(self, c);
        out
    }

    pub fn mul(&self, other: &JetPoly) -> JetPoly {
        let mut out = JetPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if let Some((m, s)) = ma.mul(mb) {
                    out.add_term(m, ca.mul(cb).scale_int(s));
                }
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> JetPoly {
        (0..e).fold(JetPoly::one(), |acc, _| acc.mul(self))
    }

    /// Parity if homogeneous.
    pub fn parity(&self) -> Option<Parity> {
        let mut p = None;
        for m in self.terms.keys() {
            let q = if m.is_odd() { Parity::Odd } else { Parity::Even };
            match p {
                None => p = Some(q),
                Some(x) if x != q => return None,
                _ => {}
            }
        }
        p
    }

    /// Total derivative.
    pub fn derivative(&self) -> JetPoly {
        let mut out = JetPoly::zero();
        for (m, c) in &self.terms {
            for (i, (v, e)) in m.0.iter().enumerate() {
                let before = JetPoly::term(JetMono(m.0[..i].to_vec()), Scalar::one());
                let after = JetPoly::term(JetMono(m.0[i + 1..].to_vec()), Scalar::one());
                let dv = JetPoly::var(JetVar { deriv: v.deriv + 1, ..*v });
                let rest = if *e == 1 { JetMono::one() } else { JetMono(vec![(*v, e - 1)]) };
                let mid = dv.mul(&JetPoly::term(rest, Scalar::from_int(*e as i64)));
                out.add_scaled(&before.mul(&mid).mul(&after), c);
            }
        }
        out
    }

    pub fn derivative_n(&self, p: u32) -> JetPoly {
        (0..p).fold(self.clone(), |acc, _| acc.derivative())
    }

    /// Partial derivative in an even coordinate.
    pub fn partial(&self, v: JetVar) -> JetPoly {
        let mut out = JetPoly::zero();
        for (m, c) in &self.terms {
            if let Some(i) = m.0.iter().position(|(w, _)| *w == v) {
                let e = m.0[i].1;
                let mut rest = m.0.clone();
                if e == 1 {
                    rest.remove(i);
                } else {
                    rest[i].1 -= 1;
                }
                out.add_term(JetMono(rest), c.scale_int(e as i64));
            }
        }
        out
    }

    /// Ring substitution of every jet coordinate; `None` if a coordinate
    /// occurs with a negative exponent.
    pub fn substitute(&self, image: &dyn Fn(JetVar) -> JetPoly) -> Option<JetPoly> {
        let mut out = JetPoly::zero();
        for (m, c) in self.terms() {
            let mut t = JetPoly::constant(c.clone());
            for (v, e) in m.factors() {
                t = t.mul(&image(*v).pow(u32::try_from(*e).ok()?));
            }
            out = out.add(&t);
        }
        Some(out)
    }

    pub fn render(&self, table: &GeneratorTable) -> String {
        let mono = |m: &JetMono| -> String {
            let parts: Vec<String> = m
                .0
                .iter()
                .map(|(v, e)| {
                    let f = table.render_factor(Factor::gen(v.id, v.deriv));
                    if *e == 1 {
                        f
                    } else {
                        format!("{}^{}", f, e)
                    }
                })
                .collect();
            parts.join(" ")
        };
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let (neg, mag) = c.render_factor();
            let body = if m.is_one() {
                mag
            } else if mag == "1" {
                mono(m)
            } else {
                format!("{}*{}", mag, mono(m))
            };
            out.push_str(match (i, neg) {
                (0, true) => "-",
                (0, false) => "",
                (_, true) => " - ",
                (_, false) => " + ",
            });
            out.push_str(&body);
        }
        out
    }
}

/// Polynomial Poisson algebra on named even coordinates.
#[derive(Clone, Debug)]
pub struct PoissonAlgebra {
    table: GeneratorTable,
    brackets: Vec<Vec<JetPoly>>,
}

impl PoissonAlgebra {
    /// Validates antisymmetry and Jacobi on coordinate triples.
    pub fn new(names: &[&str], brackets: Vec<Vec<JetPoly>>) -> Result<Self, PoissonError> {
        let table = GeneratorTable::new(names.iter().map(|n| Generator::even(n)).collect())?;
        let p = PoissonAlgebra { table, brackets };
        let n = names.len();
        for i in 0..n {
            for j in 0..n {
                if p.brackets[i][j] != p.brackets[j][i].neg() {
                    return Err(PoissonError::BracketAxiom(format!("antisymmetry at ({}, {})", names[i], names[j])));
                }
                for k in 0..n {
                    let (xi, xj, xk) = (p.coord(i), p.coord(j), p.coord(k));
                    let a = p.bracket(&xi, &p.bracket(&xj, &xk));
                    let b = p.bracket(&xj, &p.bracket(&xk, &xi));
                    let c = p.bracket(&xk, &p.bracket(&xi, &xj));
                    if !a.add(&b).add(&c).is_zero() {
                        return Err(PoissonError::BracketAxiom(format!("Jacobi at ({}, {}, {})", names[i], names[j], names[k])));
                    }
                }
            }
        }
        Ok(p)
    }

    /// Kostant-Kirillov bracket from structure constants `[x_i, x_j] = sum c_ij^k x_k`.
    pub fn kostant_kirillov(names: &[&str], structure: &[(usize, usize, usize, Rat)]) -> Result<Self, PoissonError> {
        let n = names.len();
        let mut brackets = vec![vec![JetPoly::zero(); n]; n];
        for (i, j, k, c) in structure {
            let v = JetPoly::var(JetVar { id: *k as GenId, deriv: 0, odd: false });
            brackets[*i][*j].add_scaled(&v, &Scalar::from_rat(c.clone()));
        }
        PoissonAlgebra::new(names, brackets)
    }

    pub fn table(&self) -> &GeneratorTable {
        &self.table
    }

    pub fn coord(&self, i: usize) -> JetPoly {
        JetPoly::var(JetVar { id: i as GenId, deriv: 0, odd: false })
    }

    pub fn coord_named(&self, name: &str) -> Result<JetPoly, PoissonError> {
        Ok(self.coord(self.table.id(name)? as usize))
    }

    pub fn bracket_table(&self) -> &[Vec<JetPoly>] {
        &self.brackets
    }

    /// Leibniz extension `{p, q} = sum dp/dx_i dq/dx_j {x_i, x_j}`.
    pub fn bracket(&self, p: &JetPoly, q: &JetPoly) -> JetPoly {
        let n = self.table.len();
        let mut out = JetPoly::zero();
        for i in 0..n {
            let vi = JetVar { id: i as GenId, deriv: 0, odd: false };
            let dp = p.partial(vi);
            if dp.is_zero() {
                continue;
            }
            for j in 0..n {
                if self.brackets[i][j].is_zero() {
                    continue;
                }
                let vj = JetVar { id: j as GenId, deriv: 0, odd: false };
                let dq = q.partial(vj);
                if dq.is_zero() {
                    continue;
                }
                out = out.add(&dp.mul(&dq).mul(&self.brackets[i][j]));
            }
        }
        out
    }
}

/// `kk_bracket` over structure constants.
pub fn kk_bracket(names: &[&str], structure: &[(usize, usize, usize, Rat)], p: &JetPoly, q: &JetPoly) -> Result<JetPoly, PoissonError> {
    Ok(PoissonAlgebra::kostant_kirillov(names, structure)?.bracket(p, q))
}

type BracketTable = Vec<Vec<Vec<JetPoly>>>;

/// Poisson vertex algebra on jets of a generator table.
#[derive(Debug)]
pub struct PoissonVertexAlgebra {
    name: String,
    table: GeneratorTable,
    brackets: BracketTable,
    localized: Vec<bool>,
    cache: RefCell<HashMap<(JetVar, JetVar), Rc<Vec<JetPoly>>>>,
}

impl Clone for PoissonVertexAlgebra {
    fn clone(&self) -> Self {
        PoissonVertexAlgebra {
            name: self.name.clone(),
            table: self.table.clone(),
            brackets: self.brackets.clone(),
            localized: self.localized.clone(),
            cache: RefCell::new(HashMap::new()),
        }
    }
}

fn trim(mut v: Vec<JetPoly>) -> Vec<JetPoly> {
    while v.last().is_some_and(|p| p.is_zero()) {
        v.pop();
    }
    v
}

fn koszul_i(a: bool, b: bool) -> i64 {
    if a && b {
        -1
    } else {
        1
    }
}

impl PoissonVertexAlgebra {
    /// Table `brackets[a][b][n] = a_(n) b` on generators.
    pub fn from_brackets(name: &str, table: GeneratorTable, brackets: BracketTable, localized: &[GenId]) -> Result<Self, PoissonError> {
        let n = table.len();
        let mut flags = vec![false; n];
        for id in localized {
            flags[*id as usize] = true;
        }
        let brackets = brackets.into_iter().map(|row| row.into_iter().map(trim).collect()).collect();
        Ok(PoissonVertexAlgebra { name: name.to_string(), table, brackets, localized: flags, cache: RefCell::new(HashMap::new()) })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn table(&self) -> &GeneratorTable {
        &self.table
    }

    pub fn bracket_table(&self) -> &BracketTable {
        &self.brackets
    }

    pub fn is_localized(&self, id: GenId) -> bool {
        self.localized[id as usize]
    }

    pub fn var(&self, id: GenId, deriv: u16) -> JetVar {
        JetVar { id, deriv, odd: self.table.get(id).parity.is_odd() }
    }

    pub fn gen(&self, name: &str) -> Result<JetPoly, PoissonError> {
        Ok(JetPoly::var(self.var(self.table.id(name)?, 0)))
    }

    /// `s^-1` for a localized coordinate.
    pub fn inverse(&self, name: &str) -> Result<JetPoly, PoissonError> {
        let id = self.table.id(name)?;
        if !self.localized[id as usize] {
            return Err(PoissonError::NotInverted(name.to_string()));
        }
        Ok(JetPoly::term(JetMono(vec![(self.var(id, 0), -1)]), Scalar::one()))
    }

    pub fn render(&self, p: &JetPoly) -> String {
        p.render(&self.table)
    }

    fn var_bracket(&self, v: JetVar, w: JetVar) -> Rc<Vec<JetPoly>> {
        if let Some(hit) = self.cache.borrow().get(&(v, w)) {
            return hit.clone();
        }
        // (∂^d g)_(j) ∂^{d2} g2 = (-1)^d (j)_d sum_i C(d2,i) (m)_i ∂^{d2-i}(g_(m-i) g2), m = j-d
        let t = &self.brackets[v.id as usize][w.id as usize];
        let (d, d2) = (v.deriv as i64, w.deriv as i64);
        let len = t.len() as i64 + d + d2;
        let mut out = Vec::new();
        for j in 0..len {
            let m = j - d;
            let mut acc = JetPoly::zero();
            if m >= 0 {
                for i in 0..=d2.min(m) {
                    if let Some(tm) = t.get((m - i) as usize) {
                        let c = binomial(d2, i as u32) * falling(m, i as u32);
                        acc.add_scaled(&tm.derivative_n((d2 - i) as u32), &Scalar::from_rat(c));
                    }
                }
                let mut pref = falling(j, d as u32);
                if d % 2 == 1 {
                    pref = -pref;
                }
                acc = acc.scale(&Scalar::from_rat(pref));
            }
            out.push(acc);
        }
        let out = Rc::new(trim(out));
        self.cache.borrow_mut().insert((v, w), out.clone());
        out
    }

    /// All `x_(n) v^e` for a single coordinate power.
    fn bracket_into_power(&self, x: &JetPoly, v: JetVar, e: i32) -> Vec<JetPoly> {
        let base = self.bracket_into_var(x, v);
        if e == 1 {
            return base;
        }
        let factor = JetPoly::term(JetMono(if e - 1 == 0 { vec![] } else { vec![(v, e - 1)] }), Scalar::from_int(e as i64));
        base.iter().map(|p| factor.mul(p)).collect()
    }

    /// All `x_(n) v` for a single coordinate `v`.
    fn bracket_into_var(&self, x: &JetPoly, v: JetVar) -> Vec<JetPoly> {
        let mut out: Vec<JetPoly> = Vec::new();
        for (m, c) in x.terms() {
            let part = if m.0.len() == 1 && m.0[0].1 == 1 {
                (*self.var_bracket(m.0[0].0, v)).clone()
            } else if m.is_one() {
                Vec::new()
            } else {
                // skew-symmetry from v_(k) m
                let xm = JetPoly::term(m.clone(), Scalar::one());
                let vm = self.ope(&JetPoly::var(v), &xm);
                self.skew_from(&vm, m.is_odd(), v.odd)
            };
            accumulate(&mut out, &part, c);
        }
        trim(out)
    }

    /// Given the list `b_(k) a`, returns the list `a_(n) b` by skew-symmetry.
    fn skew_from(&self, ba: &[JetPoly], a_odd: bool, b_odd: bool) -> Vec<JetPoly> {
        let mut out = Vec::with_capacity(ba.len());
        for n in 0..ba.len() {
            let mut acc = JetPoly::zero();
            for (l, x) in ba.iter().enumerate().skip(n) {
                let j = (l - n) as u32;
                let mut c = factorial(j).recip();
                if (n as u32 + j + 1) % 2 == 1 {
                    c = -c;
                }
                acc.add_scaled(&x.derivative_n(j), &Scalar::from_rat(c).scale_int(koszul_i(a_odd, b_odd)));
            }
            out.push(acc);
        }
        trim(out)
    }

    /// All `a_(n) b`, `n >= 0`.
    pub fn ope(&self, a: &JetPoly, b: &JetPoly) -> Vec<JetPoly> {
        let mut out: Vec<JetPoly> = Vec::new();
        for (am, ac) in a.terms() {
            let single = JetPoly::term(am.clone(), Scalar::one());
            for (mb, cb) in b.terms() {
                // a_(n) is a derivation of parity |a|
                for (idx, (v, e)) in mb.0.iter().enumerate() {
                    let prefix = JetMono(mb.0[..idx].to_vec());
                    let suffix = JetMono(mb.0[idx + 1..].to_vec());
                    let sgn = koszul_i(am.is_odd(), prefix.is_odd());
                    let pre = JetPoly::term(prefix, Scalar::one());
                    let suf = JetPoly::term(suffix, Scalar::one());
                    let part: Vec<JetPoly> = self.bracket_into_power(&single, *v, *e).iter().map(|p| pre.mul(p).mul(&suf)).collect();
                    accumulate(&mut out, &part, &ac.mul(cb).scale_int(sgn));
                }
            }
        }
        trim(out)
    }

    /// `a_(n) b` for any integer `n`; `n < 0` is `(∂^{-n-1} a/(-n-1)!) b`.
    pub fn nprod(&self, a: &JetPoly, n: i64, b: &JetPoly) -> JetPoly {
        if n >= 0 {
            self.ope(a, b).get(n as usize).cloned().unwrap_or_default()
        } else {
            let j = (-n - 1) as u32;
            a.derivative_n(j).mul(b).scale(&Scalar::from_rat(factorial(j).recip()))
        }
    }

    /// Same structure with the coordinates of `s` inverted.
    pub fn localize(&self, s: &JetPoly) -> Result<PoissonVertexAlgebra, PoissonError> {
        let text = self.render(s);
        if s.is_zero() {
            return Err(PoissonError::ZeroDivisorLocalization(text));
        }
        let mut out = self.clone();
        if s.terms.len() != 1 {
            return Err(PoissonError::UnsupportedLocalization(text));
        }
        let (m, _) = s.terms().next().unwrap();
        for (v, e) in m.factors() {
            if v.odd {
                return Err(PoissonError::ZeroDivisorLocalization(text));
            }
            if v.deriv != 0 || *e < 0 {
                return Err(PoissonError::UnsupportedLocalization(text));
            }
            out.localized[v.id as usize] = true;
        }
        Ok(out)
    }

    /// Multiplies by `s^-1` for a localized monomial `s`.
    pub fn divide(&self, a: &JetPoly, s: &JetPoly) -> Result<JetPoly, PoissonError> {
        let text = self.render(s);
        if s.terms.len() != 1 {
            return Err(PoissonError::UnsupportedLocalization(text));
        }
        let (m, c) = s.terms().next().unwrap();
        let mut inv = Vec::new();
        for (v, e) in m.factors() {
            if !self.localized[v.id as usize] || v.deriv != 0 {
                return Err(PoissonError::NotInverted(text));
            }
            inv.push((*v, -e));
        }
        let cinv = Scalar::one().div(c).map_err(|_| PoissonError::ZeroDivisorLocalization(text))?;
        Ok(a.mul(&JetPoly::term(JetMono(inv), cinv)))
    }

    /// Random jet polynomial with at most `terms` monomials.
    pub fn sample<R: Rng>(&self, rng: &mut R, terms: usize, max_deg: usize, max_deriv: u16) -> JetPoly {
        let mut out = JetPoly::zero();
        for _ in 0..terms.max(1) {
            let mut p = JetPoly::constant(Scalar::from_int(rng.gen_range(1..=3)));
            for _ in 0..rng.gen_range(1..=max_deg.max(1)) {
                let id = rng.gen_range(0..self.table.len()) as GenId;
                let v = self.var(id, rng.gen_range(0..=max_deriv));
                let e = if v.deriv == 0 && self.localized[id as usize] && rng.gen_bool(0.5) { -1 } else { 1 };
                p = p.mul(&JetPoly::term(JetMono(vec![(v, e)]), Scalar::one()));
            }
            out = out.add(&p);
        }
        out
    }

    /// Random single monomial (parity-homogeneous).
    pub fn sample_monomial<R: Rng>(&self, rng: &mut R, max_deg: usize, max_deriv: u16) -> JetPoly {
        loop {
            let p = self.sample(rng, 1, max_deg, max_deriv);
            if !p.is_zero() {
                return p;
            }
        }
    }
}

fn accumulate(out: &mut Vec<JetPoly>, part: &[JetPoly], c: &Scalar) {
    if out.len() < part.len() {
        out.resize(part.len(), JetPoly::zero());
    }
    for (i, p) in part.iter().enumerate() {
        out[i].add_scaled(p, c);
    }
}

/// Jet Poisson vertex algebra of a Poisson algebra: `f_(0) g = {f, g}` on coordinates.
pub fn jet_pva(p: &PoissonAlgebra) -> PoissonVertexAlgebra {
    let n = p.table.len();
    let brackets = (0..n).map(|i| (0..n).map(|j| vec![p.brackets[i][j].clone()]).collect()).collect();
    PoissonVertexAlgebra::from_brackets("jet", p.table.clone(), brackets, &[]).expect("jet table is well formed")
}

/// Localization of a Poisson vertex algebra at an even monomial.
pub fn localize_pva(v: &PoissonVertexAlgebra, s: &JetPoly) -> Result<PoissonVertexAlgebra, PoissonError> {
    v.localize(s)
}

/// Pass/fail per axiom on sampled triples.
#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct AxiomReport {
    pub samples: usize,
    pub skew_symmetry: bool,
    pub jacobi: bool,
    pub derivation: bool,
    pub partial_derivation: bool,
    pub failures: Vec<String>,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.skew_symmetry && self.jacobi && self.derivation && self.partial_derivation
    }
}

/// Checks skew-symmetry, the Jacobi-type identity, the derivation property
/// of every `a_(n)` and the ∂-rules on random monomial triples.
pub fn pva_axiom_suite<R: Rng>(v: &PoissonVertexAlgebra, rng: &mut R, samples: usize) -> AxiomReport {
    let mut rep = AxiomReport { samples, skew_symmetry: true, jacobi: true, derivation: true, partial_derivation: true, failures: vec![] };
    for _ in 0..samples {
        let a = v.sample_monomial(rng, 2, 1);
        let b = v.sample_monomial(rng, 2, 1);
        let c = v.sample_monomial(rng, 2, 1);
        let (pa, pb) = (a.parity() == Some(Parity::Odd), b.parity() == Some(Parity::Odd));
        let ab = v.ope(&a, &b);
        let ba = v.ope(&b, &a);
        if ab != v.skew_from(&ba, pa, pb) {
            rep.skew_symmetry = false;
            rep.failures.push(format!("skew: {} , {}", v.render(&a), v.render(&b)));
        }
        for m in 0..3i64 {
            for k in 0..3i64 {
                let lhs = v.nprod(&a, m, &v.nprod(&b, k, &c)).sub(&v.nprod(&b, k, &v.nprod(&a, m, &c)).scale_int_poly(koszul_i(pa, pb)));
                let mut rhs = JetPoly::zero();
                for j in 0..=m {
                    let x = v.nprod(&a, j, &b);
                    rhs.add_scaled(&v.nprod(&x, m + k - j, &c), &Scalar::from_rat(binomial(m, j as u32)));
                }
                if lhs != rhs {
                    rep.jacobi = false;
                    rep.failures.push(format!("jacobi m={} k={}: {} , {} , {}", m, k, v.render(&a), v.render(&b), v.render(&c)));
                }
            }
            let lhs = v.nprod(&a, m, &b.mul(&c));
            let rhs = v.nprod(&a, m, &b).mul(&c).add(&b.mul(&v.nprod(&a, m, &c)).scale_int_poly(koszul_i(pa, pb)));
            if lhs != rhs {
                rep.derivation = false;
                rep.failures.push(format!("derivation n={}", m));
            }
            let da = v.nprod(&a.derivative(), m, &b);
            let expect = if m == 0 { JetPoly::zero() } else { v.nprod(&a, m - 1, &b).scale_int_poly(-m) };
            let d_of = v.nprod(&a, m, &b).derivative();
            let split = v.nprod(&a.derivative(), m, &b).add(&v.nprod(&a, m, &b.derivative()));
            if da != expect || d_of != split {
                rep.partial_derivation = false;
                rep.failures.push(format!("partial n={}", m));
            }
        }
    }
    rep
}

/// Exterior `k`-form on a coordinate chart: sorted index tuples to polynomials.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Form {
    pub degree: usize,
    pub coeffs: BTreeMap<Vec<usize>, JetPoly>,
}

impl Form {
    pub fn zero(degree: usize) -> Self {
        Form { degree, coeffs: BTreeMap::new() }
    }

    /// Adds `c dx_{i1} ∧ ... ∧ dx_{ik}` for arbitrary index order.
    pub fn add_component(&mut self, idx: &[usize], c: &JetPoly) {
        let mut v = idx.to_vec();
        let mut sign = 1i64;
        for i in 0..v.len() {
            for j in 0..v.len() - 1 - i {
                if v[j] > v[j + 1] {
                    v.swap(j, j + 1);
                    sign = -sign;
                }
            }
        }
        if v.windows(2).any(|w| w[0] == w[1]) {
            return;
        }
        let entry = self.coeffs.entry(v.clone()).or_default();
        *entry = entry.add(&c.scale_int_poly(sign));
        if entry.is_zero() {
            self.coeffs.remove(&v);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
}

impl JetPoly {
    fn scale_int_poly(&self, s: i64) -> JetPoly {
        self.scale(&Scalar::from_int(s))
    }
}

/// Coordinate chart `x_1..x_n` with vector fields `∂_1..∂_n` inside a jet
/// Poisson vertex algebra; 1-forms embed as `f dg ↦ f ∂g`.
#[derive(Clone, Debug)]
pub struct CotangentChart {
    pub pva: PoissonVertexAlgebra,
    pub dim: usize,
}

impl CotangentChart {
    /// Generators `x1..xn` then `d1..dn`, with `d_i(0) x_j = δ_ij` and
    /// `d_i(0) d_j = ι_{∂_j} ι_{∂_i} α`.
    pub fn new(dim: usize, alpha: Option<&Form>) -> Result<Self, PoissonError> {
        let mut gens = Vec::new();
        for i in 1..=dim {
            gens.push(Generator::even(&format!("x{}", i)));
        }
        for i in 1..=dim {
            gens.push(Generator::even(&format!("d{}", i)));
        }
        let table = GeneratorTable::new(gens)?;
        let n = 2 * dim;
        let mut brackets = vec![vec![Vec::new(); n]; n];
        for i in 0..dim {
            brackets[dim + i][i] = vec![JetPoly::one()];
            brackets[i][dim + i] = vec![JetPoly::one().neg()];
        }
        let proto = PoissonVertexAlgebra::from_brackets("chart", table.clone(), brackets.clone(), &[])?;
        let chart = CotangentChart { pva: proto, dim };
        if let Some(alpha) = alpha {
            for i in 0..dim {
                for j in 0..dim {
                    let one_form = alpha.contract(i).contract(j);
                    let emb = chart.embed_one_form(&one_form);
                    brackets[dim + i][dim + j] = vec![emb];
                }
            }
        }
        let pva = PoissonVertexAlgebra::from_brackets("chart", table, brackets, &[])?;
        Ok(CotangentChart { pva, dim })
    }

    pub fn x(&self, i: usize) -> JetPoly {
        JetPoly::var(self.pva.var(i as GenId, 0))
    }

    pub fn dx(&self, i: usize) -> JetPoly {
        JetPoly::var(self.pva.var(i as GenId, 1))
    }

    pub fn vector(&self, i: usize) -> JetPoly {
        JetPoly::var(self.pva.var((self.dim + i) as GenId, 0))
    }

    /// `sum_i c_i ∂_i` as a state.
    pub fn vector_field(&self, comps: &[JetPoly]) -> JetPoly {
        comps.iter().enumerate().fold(JetPoly::zero(), |acc, (i, c)| acc.add(&c.mul(&self.vector(i))))
    }

    pub fn embed_one_form(&self, w: &Form) -> JetPoly {
        let mut out = JetPoly::zero();
        for (idx, c) in &w.coeffs {
            out = out.add(&c.mul(&self.dx(idx[0])));
        }
        out
    }

    pub fn partial_x(&self, p: &JetPoly, i: usize) -> JetPoly {
        p.partial(self.pva.var(i as GenId, 0))
    }

    pub fn exterior_d(&self, w: &Form) -> Form {
        let mut out = Form::zero(w.degree + 1);
        for (idx, c) in &w.coeffs {
            for i in 0..self.dim {
                let dc = self.partial_x(c, i);
                if dc.is_zero() {
                    continue;
                }
                let mut full = vec![i];
                full.extend_from_slice(idx);
                out.add_component(&full, &dc);
            }
        }
        out
    }

    pub fn contract_field(&self, xi: &[JetPoly], w: &Form) -> Form {
        let mut out = Form::zero(w.degree.saturating_sub(1));
        for (i, c) in xi.iter().enumerate() {
            let part = w.contract(i);
            for (idx, v) in part.coeffs {
                out.add_component(&idx, &v.mul(c));
            }
        }
        out
    }

    pub fn lie_bracket(&self, xi: &[JetPoly], eta: &[JetPoly]) -> Vec<JetPoly> {
        (0..self.dim)
            .map(|j| {
                let mut acc = JetPoly::zero();
                for i in 0..self.dim {
                    acc = acc.add(&xi[i].mul(&self.partial_x(&eta[j], i)));
                    acc = acc.sub(&eta[i].mul(&self.partial_x(&xi[j], i)));
                }
                acc
            })
            .collect()
    }
}

impl Form {
    /// Contraction with the coordinate field `∂_i`.
    pub fn contract(&self, i: usize) -> Form {
        let mut out = Form::zero(self.degree.saturating_sub(1));
        for (idx, c) in &self.coeffs {
            if let Some(pos) = idx.iter().position(|&j| j == i) {
                let mut rest = idx.clone();
                rest.remove(pos);
                let sign = if pos % 2 == 0 { 1 } else { -1 };
                out.add_component(&rest, &c.scale_int_poly(sign));
            }
        }
        out
    }
}

/// Outcome of the twisted bracket identity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwistedCheck {
    pub pass: bool,
    pub lhs: JetPoly,
    pub rhs: JetPoly,
}

/// Verifies `(ξ+ι_ξβ)_(0)(η+ι_ηβ) = ξ_(0)η + ι_{[ξ,η]}β + ι_η ι_ξ dβ`.
pub fn twisted_bracket_check(chart: &CotangentChart, xi: &[JetPoly], eta: &[JetPoly], beta: &Form) -> TwistedCheck {
    let v = &chart.pva;
    let xs = chart.vector_field(xi);
    let es = chart.vector_field(eta);
    let ixb = chart.embed_one_form(&chart.contract_field(xi, beta));
    let ieb = chart.embed_one_form(&chart.contract_field(eta, beta));
    let lhs = v.nprod(&xs.add(&ixb), 0, &es.add(&ieb));
    let br = chart.lie_bracket(xi, eta);
    let dbeta = chart.exterior_d(beta);
    let rhs = v
        .nprod(&xs, 0, &es)
        .add(&chart.embed_one_form(&chart.contract_field(&br, beta)))
        .add(&chart.embed_one_form(&chart.contract_field(eta, &chart.contract_field(xi, &dbeta))));
    TwistedCheck { pass: lhs == rhs, lhs, rhs }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat_int;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sl2_kk() -> PoissonAlgebra {
        let one = rat_int(1);
        let two = rat_int(2);
        PoissonAlgebra::kostant_kirillov(
            &["e", "h", "f"],
            &[
                (0, 2, 1, one.clone()),
                (2, 0, 1, -one.clone()),
                (1, 0, 0, two.clone()),
                (0, 1, 0, -two.clone()),
                (1, 2, 2, -two.clone()),
                (2, 1, 2, two),
            ],
        )
        .unwrap()
    }

    #[test]
    fn kostant_kirillov_bracket() {
        let p = sl2_kk();
        let (e, h, f) = (p.coord(0), p.coord(1), p.coord(2));
        assert_eq!(p.bracket(&e, &f), h);
        // {e, f h} = h h + f (-2 e)
        assert_eq!(p.bracket(&e, &f.mul(&h)), h.mul(&h).sub(&e.mul(&f).scale_int_poly(2)));
    }

    #[test]
    fn jacobi_failure_is_reported() {
        let one = rat_int(1);
        let bad = PoissonAlgebra::kostant_kirillov(&["a", "b", "c"], &[(0, 1, 2, one.clone()), (1, 0, 2, -one.clone()), (2, 0, 0, one.clone()), (0, 2, 0, -one)]);
        assert!(matches!(bad, Err(PoissonError::BracketAxiom(_))));
    }

    #[test]
    fn jet_brackets_follow_partial_derivation() {
        let v = jet_pva(&sl2_kk());
        let (e, h, f) = (v.gen("e").unwrap(), v.gen("h").unwrap(), v.gen("f").unwrap());
        assert_eq!(v.nprod(&e, 0, &f), h);
        assert!(v.nprod(&e, 1, &f).is_zero());
        assert_eq!(v.nprod(&e.derivative(), 1, &f), h.neg());
    }

    #[test]
    fn localization_quotient_rules() {
        let chart = CotangentChart::new(1, None).unwrap();
        let x = chart.x(0);
        let v = chart.pva.localize(&x).unwrap();
        let xi = v.inverse("x1").unwrap();
        assert_eq!(xi.derivative(), chart.dx(0).mul(&xi.pow(2)).neg());
        assert!(v.nprod(&x, 0, &xi).is_zero());
        let d = chart.vector(0);
        assert_eq!(v.nprod(&d, 0, &xi), xi.pow(2).neg());
        assert_eq!(v.divide(&x, &x).unwrap(), JetPoly::one());
        assert!(matches!(v.localize(&JetPoly::zero()), Err(PoissonError::ZeroDivisorLocalization(_))));
    }

    #[test]
    fn axiom_suites_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rep = pva_axiom_suite(&jet_pva(&sl2_kk()), &mut rng, 40);
        assert!(rep.all_pass(), "{:?}", rep.failures);
        let chart = CotangentChart::new(2, None).unwrap();
        let loc = chart.pva.localize(&chart.x(0)).unwrap();
        let rep = pva_axiom_suite(&loc, &mut rng, 40);
        assert!(rep.all_pass(), "{:?}", rep.failures);
    }

    #[test]
    fn odd_jet_algebra_axioms() {
        let gens = vec![Generator::odd("p1"), Generator::odd("p2"), Generator::odd("s1"), Generator::odd("s2")];
        let table = GeneratorTable::new(gens).unwrap();
        let mut br = vec![vec![Vec::new(); 4]; 4];
        for i in 0..2 {
            br[i][i + 2] = vec![JetPoly::one()];
            br[i + 2][i] = vec![JetPoly::one()];
        }
        let v = PoissonVertexAlgebra::from_brackets("ext", table, br, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rep = pva_axiom_suite(&v, &mut rng, 60);
        assert!(rep.all_pass(), "{:?}", rep.failures);
    }

    #[test]
    fn twisted_bracket_identity() {
        let chart = CotangentChart::new(3, None).unwrap();
        let unit = |i: usize| -> Vec<JetPoly> { (0..3).map(|j| if i == j { JetPoly::one() } else { JetPoly::zero() }).collect() };
        let mut beta = Form::zero(2);
        beta.add_component(&[0, 1], &chart.x(2));
        let r = twisted_bracket_check(&chart, &unit(0), &unit(1), &beta);
        assert!(r.pass);
        assert_eq!(r.lhs, chart.dx(2));
        let mut beta2 = Form::zero(2);
        beta2.add_component(&[0, 1], &chart.x(0));
        assert!(twisted_bracket_check(&chart, &unit(0), &unit(1), &beta2).pass);
        let xi: Vec<JetPoly> = vec![chart.x(1), chart.x(0).mul(&chart.x(2)), JetPoly::zero()];
        let eta: Vec<JetPoly> = vec![JetPoly::zero(), chart.x(2), chart.x(0).pow(2)];
        let mut beta3 = Form::zero(2);
        beta3.add_component(&[1, 2], &chart.x(0).mul(&chart.x(1)));
        beta3.add_component(&[0, 2], &chart.x(2).pow(2));
        assert!(twisted_bracket_check(&chart, &xi, &eta, &beta3).pass);
        assert!(twisted_bracket_check(&chart, &xi, &eta, &Form::zero(2)).pass);
    }
}
