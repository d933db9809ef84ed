//! n-products of vertex algebras presented by generators and singular
//! products, together with OPE presentation, axiom checks, the ħ-adic
//! filtration and the quasiclassical limit.

mod axioms;
mod engine;
mod morphism;

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use num_traits::Zero;
use rand::Rng;
use thiserror::Error;

use crate::scalar::{Scalar, ScalarError};
use crate::state::{koszul, Expr, Factor, GenId, Generator, GeneratorTable, Monomial, Parity, State, TableError, MIXED_TAG};

pub(crate) use engine::{binomial, factorial, falling};
pub use axioms::{axiom_suite, VertexAxiomReport};
pub use morphism::{MorphismResidual, Substitution};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VertexError {
    #[error("states belong to different algebras")]
    IncompatibleAlgebras,
    #[error("inverse of `{0}` is required but it is not flagged invertible")]
    NonTerminatingLocalization(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("negative power of non-invertible generator `{0}`")]
    NegativePowerOfNonInvertible(String),
    #[error("duplicate generator `{0}`")]
    DuplicateGenerator(String),
    #[error("the zero state has no symbol")]
    ZeroState,
    #[error("lattice is not commutative modulo hbar: {0}")]
    NotCommutativeModHbar(String),
    #[error("generator `{0}` lies outside the hbar-adic lattice")]
    OutsideLattice(String),
    #[error("generator table is inconsistent: {0}")]
    TableInconsistent(String),
    #[error("coefficient `{0}` is not a scalar multiple of the vacuum")]
    NonScalarCoefficient(String),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

impl From<TableError> for VertexError {
    fn from(e: TableError) -> Self {
        match e {
            TableError::DuplicateGenerator(n) => VertexError::DuplicateGenerator(n),
            TableError::UnknownGenerator(n) => VertexError::UnknownGenerator(n),
        }
    }
}

type Products = Vec<Vec<Rc<Vec<State>>>>;

#[derive(Default)]
pub(crate) struct Caches {
    pub(crate) ope: HashMap<(Monomial, Monomial), Rc<Vec<State>>>,
    pub(crate) neg: HashMap<(Monomial, i64, Monomial), Rc<State>>,
    pub(crate) left_mul: HashMap<(Factor, Monomial), Rc<State>>,
    pub(crate) fac: HashMap<(Factor, Factor), Rc<Vec<State>>>,
    pub(crate) deriv: HashMap<Monomial, Rc<State>>,
    pub(crate) inv_deriv: HashMap<(GenId, u32), Rc<State>>,
}

impl Caches {
    fn entries(&self) -> usize {
        self.ope.len() + self.neg.len() + self.left_mul.len() + self.fac.len() + self.deriv.len() + self.inv_deriv.len()
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Environment variable bounding the memo cache, in entries per algebra.
pub const CACHE_ENV: &str = "CHIRAL_CACHE_ENTRIES";

fn cache_limit() -> Option<usize> {
    static LIMIT: std::sync::OnceLock<Option<usize>> = std::sync::OnceLock::new();
    *LIMIT.get_or_init(|| std::env::var(CACHE_ENV).ok().and_then(|v| v.trim().parse().ok()))
}

/// A vertex algebra strongly generated by a finite table. The memo cache is
/// confined to the owning thread; clones start with an empty cache.
pub struct VertexAlgebra {
    name: String,
    id: u64,
    pub(crate) table: GeneratorTable,
    pub(crate) products: Products,
    invertible: Vec<bool>,
    lattice: Option<Vec<bool>>,
    pub(crate) cache: RefCell<Caches>,
}

impl Clone for VertexAlgebra {
    fn clone(&self) -> Self {
        VertexAlgebra {
            name: self.name.clone(),
            id: self.id,
            table: self.table.clone(),
            products: self.products.clone(),
            invertible: self.invertible.clone(),
            lattice: self.lattice.clone(),
            cache: RefCell::new(Caches::default()),
        }
    }
}

impl std::fmt::Debug for VertexAlgebra {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VertexAlgebra").field("name", &self.name).field("generators", &self.table.len()).finish()
    }
}

/// Collects generators and singular products. Products left unspecified
/// for a pair whose reverse is given are completed by skew-symmetry.
#[derive(Clone, Debug, Default)]
pub struct AlgebraBuilder {
    name: String,
    gens: Vec<Generator>,
    entries: Vec<(String, String, Vec<State>)>,
    invertible: Vec<String>,
    lattice: Option<Vec<String>>,
}

impl AlgebraBuilder {
    pub fn new(name: &str) -> Self {
        AlgebraBuilder { name: name.to_string(), ..Default::default() }
    }

    pub fn generator(mut self, g: Generator) -> Self {
        self.gens.push(g);
        self
    }

    pub fn generators(&self) -> &[Generator] {
        &self.gens
    }

    /// Table used to spell product entries; valid once all generators are in.
    pub fn table(&self) -> Result<GeneratorTable, VertexError> {
        Ok(GeneratorTable::new(self.gens.clone())?)
    }

    /// Declares `a_(n) b` for all `n >= 0` (index = n).
    pub fn products(mut self, a: &str, b: &str, values: Vec<State>) -> Self {
        self.entries.push((a.to_string(), b.to_string(), values));
        self
    }

    pub fn invertible(mut self, name: &str) -> Self {
        self.invertible.push(name.to_string());
        self
    }

    pub fn lattice(mut self, names: &[&str]) -> Self {
        self.lattice = Some(names.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn build(self) -> Result<VertexAlgebra, VertexError> {
        let table = GeneratorTable::new(self.gens)?;
        let n = table.len();
        let mut products: Products = vec![vec![Rc::new(Vec::new()); n]; n];
        let mut declared = vec![vec![false; n]; n];
        for (a, b, vals) in &self.entries {
            let (ia, ib) = (table.id(a)? as usize, table.id(b)? as usize);
            let mut vals = vals.clone();
            while vals.last().is_some_and(|s| s.is_zero()) {
                vals.pop();
            }
            for v in vals.iter_mut() {
                v.set_tag(0);
            }
            products[ia][ib] = Rc::new(vals);
            declared[ia][ib] = true;
        }
        let mut invertible = vec![false; n];
        for name in &self.invertible {
            let id = table.id(name)? as usize;
            if table.get(id as GenId).parity.is_odd() {
                return Err(VertexError::TableInconsistent(format!("invertible generator `{}` is odd", name)));
            }
            invertible[id] = true;
        }
        let lattice = match self.lattice {
            None => None,
            Some(names) => {
                let mut flags = vec![false; n];
                for name in names {
                    flags[table.id(&name)? as usize] = true;
                }
                Some(flags)
            }
        };
        let mut va = VertexAlgebra {
            name: self.name,
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            table,
            products,
            invertible,
            lattice,
            cache: RefCell::new(Caches::default()),
        };
        va.validate_localization()?;
        // complete reversed pairs by skew-symmetry
        let mut completions = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if !declared[a][b] && declared[b][a] {
                    let sa = va.generator_state(a as GenId);
                    let sb = va.generator_state(b as GenId);
                    let ba = va.products[b][a].len() as i64;
                    let (pa, pb) = (va.table.get(a as GenId).parity, va.table.get(b as GenId).parity);
                    let vals: Vec<State> = (0..ba).map(|k| va.skew_expansion(&sa, &sb, k, pa, pb)).collect();
                    completions.push((a, b, vals));
                }
            }
        }
        for (a, b, mut vals) in completions {
            while vals.last().is_some_and(|s| s.is_zero()) {
                vals.pop();
            }
            va.products[a][b] = Rc::new(vals);
        }
        va.clear_cache();
        va.validate_localization()?;
        va.validate_skew()?;
        Ok(va)
    }
}

impl VertexAlgebra {
    pub fn builder(name: &str) -> AlgebraBuilder {
        AlgebraBuilder::new(name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn table(&self) -> &GeneratorTable {
        &self.table
    }

    pub fn is_invertible(&self, id: GenId) -> bool {
        self.invertible[id as usize]
    }

    pub fn lattice_flags(&self) -> Option<&[bool]> {
        self.lattice.as_deref()
    }

    pub fn clear_cache(&self) {
        *self.cache.borrow_mut() = Caches::default();
    }

    /// Clears the cache once it outgrows the `CHIRAL_CACHE_ENTRIES` bound.
    fn trim_cache(&self) {
        if let Some(limit) = cache_limit() {
            if self.cache.borrow().entries() > limit {
                self.clear_cache();
            }
        }
    }

    /// Declared singular products `g_(n) h`, `n >= 0`.
    pub fn table_products(&self, g: GenId, h: GenId) -> &[State] {
        &self.products[g as usize][h as usize]
    }

    fn validate_localization(&self) -> Result<(), VertexError> {
        let n = self.table.len();
        for s in 0..n {
            if !self.invertible[s] {
                continue;
            }
            for g in 0..n {
                for v in self.products[g][s].iter() {
                    if v.as_scalar().is_none() {
                        return Err(VertexError::NonTerminatingLocalization(self.table.get(s as GenId).name.clone()));
                    }
                }
                if self.invertible[g] && !self.products[g][s].is_empty() {
                    return Err(VertexError::NonTerminatingLocalization(self.table.get(s as GenId).name.clone()));
                }
            }
        }
        Ok(())
    }

    fn validate_skew(&self) -> Result<(), VertexError> {
        let n = self.table.len();
        for a in 0..n {
            for b in 0..n {
                let bound = self.products[a][b].len().max(self.products[b][a].len()) as i64;
                let sa = self.generator_state(a as GenId);
                let sb = self.generator_state(b as GenId);
                for k in 0..bound {
                    if !self.check_skew(&sa, &sb, k)?.0 {
                        return Err(VertexError::TableInconsistent(format!(
                            "skew-symmetry fails for {}_({}){}",
                            self.table.get(a as GenId).name,
                            k,
                            self.table.get(b as GenId).name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn generator_state(&self, id: GenId) -> State {
        State::monomial(Monomial::single(Factor::gen(id, 0))).with_tag(self.id)
    }

    /// State of the named generator.
    pub fn gen(&self, name: &str) -> Result<State, VertexError> {
        Ok(self.generator_state(self.table.id(name)?))
    }

    pub fn vacuum(&self) -> State {
        State::vacuum()
    }

    /// Checks that a state may be fed to this algebra.
    pub fn admit(&self, s: &State) -> Result<(), VertexError> {
        if s.tag() != 0 && s.tag() != self.id || s.tag() == MIXED_TAG {
            return Err(VertexError::IncompatibleAlgebras);
        }
        for m in s.monomials() {
            for f in m.factors() {
                if f.id() as usize >= self.table.len() {
                    return Err(VertexError::IncompatibleAlgebras);
                }
                if f.is_inverse() && !self.invertible[f.id() as usize] {
                    return Err(VertexError::NonTerminatingLocalization(self.table.get(f.id()).name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Re-tags a state of an algebra with the same generator names (for
    /// example a differently localized copy) as a state of this one.
    pub fn import(&self, s: &State, from: &VertexAlgebra) -> Result<State, VertexError> {
        from.admit(s)?;
        let same = from.table.len() == self.table.len()
            && from.table.generators().iter().zip(self.table.generators()).all(|(a, b)| a.name == b.name);
        if !same {
            return Err(VertexError::IncompatibleAlgebras);
        }
        let mut t = s.clone();
        t.set_tag(0);
        self.admit(&t)?;
        Ok(self.tagged(t))
    }

    fn tagged(&self, s: State) -> State {
        s.with_tag(self.id)
    }

    /// `a_(n) b` for any integer `n`.
    pub fn nprod(&self, a: &State, n: i64, b: &State) -> Result<State, VertexError> {
        self.admit(a)?;
        self.admit(b)?;
        self.trim_cache();
        Ok(self.tagged(self.nprod_ss_internal(a, n, b)))
    }

    /// Singular part: nonzero `a_(n) b` with `n >= 0`.
    pub fn ope(&self, a: &State, b: &State) -> Result<Vec<(u32, State)>, VertexError> {
        self.admit(a)?;
        self.admit(b)?;
        self.trim_cache();
        let v = self.ope_sm(a, b);
        Ok(v.into_iter().enumerate().filter(|(_, s)| !s.is_zero()).map(|(n, s)| (n as u32, self.tagged(s))).collect())
    }

    /// Full list `a_(n) b`, `n = 0..`, trailing zeros trimmed.
    pub fn ope_list(&self, a: &State, b: &State) -> Result<Vec<State>, VertexError> {
        self.admit(a)?;
        self.admit(b)?;
        Ok(self.ope_sm(a, b).into_iter().map(|s| self.tagged(s)).collect())
    }

    pub fn derivative(&self, a: &State) -> Result<State, VertexError> {
        self.admit(a)?;
        Ok(self.tagged(self.derivative_state(a)))
    }

    pub fn derivative_n(&self, a: &State, p: u32) -> Result<State, VertexError> {
        self.admit(a)?;
        Ok(self.tagged(self.derivative_state_n(a, p)))
    }

    /// Right-nested normal ordering `:a1 a2 ... ak:`.
    pub fn normal_order(&self, items: &[State]) -> Result<State, VertexError> {
        let mut it = items.iter().rev();
        let mut acc = match it.next() {
            None => return Ok(State::vacuum()),
            Some(s) => s.clone(),
        };
        for s in it {
            acc = self.nprod(s, -1, &acc)?;
        }
        Ok(acc)
    }

    pub fn parity(&self, s: &State) -> Option<Parity> {
        let mut p = None;
        for m in s.monomials() {
            let q = self.table.parity_of_monomial(m);
            match p {
                None => p = Some(q),
                Some(x) if x != q => return None,
                _ => {}
            }
        }
        p
    }

    /// Canonical state of a raw expression.
    pub fn normal_form(&self, e: &Expr) -> Result<State, VertexError> {
        Ok(match e {
            Expr::Vacuum => State::vacuum(),
            Expr::Scalar(c) => State::scalar(c.clone()),
            Expr::Gen(name) => self.gen(name)?,
            Expr::InvPower(name, k) => {
                let id = self.table.id(name)?;
                if !self.invertible[id as usize] {
                    return Err(VertexError::NegativePowerOfNonInvertible(name.clone()));
                }
                let m = Monomial::from_sorted(vec![Factor::Inv { id }; *k as usize]);
                self.tagged(State::monomial(m))
            }
            Expr::Derivative(a, p) => {
                let s = self.normal_form(a)?;
                self.derivative_n(&s, *p)?
            }
            Expr::NormalOrder(items) => {
                let states = items.iter().map(|i| self.normal_form(i)).collect::<Result<Vec<_>, _>>()?;
                self.normal_order(&states)?
            }
            Expr::Power(a, k) => {
                let s = self.normal_form(a)?;
                let mut acc = State::vacuum();
                for i in 0..*k {
                    acc = if i == 0 { s.clone() } else { self.nprod(&s, -1, &acc)? };
                }
                acc
            }
            Expr::Product(a, n, b) => {
                let sa = self.normal_form(a)?;
                let sb = self.normal_form(b)?;
                self.nprod(&sa, *n, &sb)?
            }
            Expr::Sum(items) => {
                let mut acc = State::zero();
                for i in items {
                    acc.add_assign(&self.normal_form(i)?);
                }
                acc
            }
            Expr::Neg(a) => self.normal_form(a)?.neg(),
            Expr::Scaled(c, a) => {
                let sc = self.normal_form(c)?;
                let sa = self.normal_form(a)?;
                match (sc.as_scalar(), sa.as_scalar()) {
                    (Some(x), _) => sa.scale(&x),
                    (None, Some(y)) => sc.scale(&y),
                    (None, None) => return Err(VertexError::NonScalarCoefficient(self.render(&sc))),
                }
            }
        })
    }

    pub fn render(&self, s: &State) -> String {
        self.table.render_state(s)
    }

    /// Singular part as `c_N /(z-w)^(N+1) + ... + c_0 /(z-w)`, highest pole first.
    pub fn render_ope(&self, ope: &[(u32, State)]) -> String {
        if ope.is_empty() {
            return "0".to_string();
        }
        let mut parts: Vec<String> = Vec::new();
        for (n, s) in ope.iter().rev() {
            let body = self.render(s);
            let body = if s.len() > 1 && s.as_scalar().is_none() { format!("({})", body) } else { body };
            let pole = if *n == 0 { "/(z-w)".to_string() } else { format!("/(z-w)^{}", n + 1) };
            parts.push(format!("{} {}", body, pole));
        }
        parts.join(" + ")
    }

    /// Residual of the Borcherds identity on `(a, b, c)` at `(m, n, k)`.
    pub fn check_borcherds(&self, a: &State, b: &State, c: &State, m: i64, n: i64, k: i64) -> Result<(bool, State), VertexError> {
        self.admit(a)?;
        self.admit(b)?;
        self.admit(c)?;
        let pa = self.parity(a).unwrap_or(Parity::Even);
        let pb = self.parity(b).unwrap_or(Parity::Even);
        let ab = self.ope_sm(a, b);
        // LHS: sum_j C(m,j) (a_(n+j) b)_(m+k-j) c
        let mut lhs = State::zero();
        let mut j: i64 = 0;
        loop {
            let idx = n + j;
            let prod = if idx >= 0 {
                match ab.get(idx as usize) {
                    Some(x) => x.clone(),
                    None => break,
                }
            } else {
                self.nprod_ss_internal(a, idx, b)
            };
            let cm = binomial(m, j as u32);
            if !cm.is_zero() {
                lhs.add_scaled(&self.nprod_ss_internal(&prod, m + k - j, c), &Scalar::from_rat(cm));
            } else if m >= 0 {
                break;
            }
            j += 1;
        }
        // RHS: sum_j (-1)^j C(n,j) [a_(m+n-j)(b_(k+j) c) - (-1)^{n+|a||b|} b_(n+k-j)(a_(m+j) c)]
        let bc = self.ope_sm(b, c);
        let ac = self.ope_sm(a, c);
        let mut rhs = State::zero();
        let sgn2 = -koszul(pa, pb) * if n.rem_euclid(2) == 1 { -1 } else { 1 };
        let mut j: i64 = 0;
        loop {
            let cn = binomial(n, j as u32);
            let mut done = true;
            let mut term = State::zero();
            let kj = k + j;
            let bcj = if kj >= 0 { bc.get(kj as usize).cloned() } else { Some(self.nprod_ss_internal(b, kj, c)) };
            if let Some(x) = bcj {
                done = false;
                term.add_assign(&self.nprod_ss_internal(a, m + n - j, &x));
            }
            let mj = m + j;
            let acj = if mj >= 0 { ac.get(mj as usize).cloned() } else { Some(self.nprod_ss_internal(a, mj, c)) };
            if let Some(x) = acj {
                done = false;
                term.add_scaled(&self.nprod_ss_internal(b, n + k - j, &x), &Scalar::from_int(sgn2));
            }
            if done || (n >= 0 && j > n) {
                break;
            }
            let mut c = cn;
            if j % 2 == 1 {
                c = -c;
            }
            rhs.add_scaled(&term, &Scalar::from_rat(c));
            j += 1;
        }
        let residual = lhs.sub(&rhs);
        Ok((residual.is_zero(), self.tagged(residual)))
    }

    /// Compares `a_(n) b` with the skew-symmetry expansion of `b_(n+l) a`.
    pub fn check_skew(&self, a: &State, b: &State, n: i64) -> Result<(bool, State), VertexError> {
        self.admit(a)?;
        self.admit(b)?;
        let pa = self.parity(a).unwrap_or(Parity::Even);
        let pb = self.parity(b).unwrap_or(Parity::Even);
        let lhs = self.nprod_ss_internal(a, n, b);
        let rhs = self.skew_expansion(a, b, n, pa, pb);
        let residual = lhs.sub(&rhs);
        Ok((residual.is_zero(), self.tagged(residual)))
    }

    fn lattice_contains(&self, s: &State) -> Result<(), VertexError> {
        if let Some(flags) = &self.lattice {
            for m in s.monomials() {
                for f in m.factors() {
                    if !flags[f.id() as usize] {
                        return Err(VertexError::OutsideLattice(self.table.get(f.id()).name.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Filtration level and leading part of a nonzero state.
    pub fn symbol(&self, a: &State) -> Result<Symbol, VertexError> {
        self.admit(a)?;
        if a.is_zero() {
            return Err(VertexError::ZeroState);
        }
        self.lattice_contains(a)?;
        let min_q = a.min_q().unwrap();
        let level = min_q.div_euclid(2);
        let leading = a.map_coeffs::<VertexError>(|c| Ok(c.project_range(2 * level, 2 * level + 1)))?;
        Ok(Symbol { level, leading: self.tagged(leading) })
    }

    /// Poisson vertex algebra on the same generators with brackets
    /// `(hbar^-1 * product) mod hbar`.
    pub fn quasiclassical_limit(&self) -> Result<crate::poisson::PoissonVertexAlgebra, VertexError> {
        let n = self.table.len();
        let mut brackets = vec![vec![Vec::new(); n]; n];
        for a in 0..n {
            for b in 0..n {
                for (k, v) in self.products[a][b].iter().enumerate() {
                    self.lattice_contains(v)?;
                    if v.min_q().is_some_and(|q| q < 2) {
                        return Err(VertexError::NotCommutativeModHbar(format!(
                            "{}_({}){} = {}",
                            self.table.get(a as GenId).name,
                            k,
                            self.table.get(b as GenId).name,
                            self.render(v)
                        )));
                    }
                    brackets[a][b].push(self.classical_image(&v.map_coeffs::<VertexError>(|c| Ok(c.shift(-2)))?)?);
                }
            }
        }
        let localized: Vec<GenId> = (0..n).filter(|&i| self.invertible[i]).map(|i| i as GenId).collect();
        crate::poisson::PoissonVertexAlgebra::from_brackets(&format!("{}/hbar", self.name), self.table.clone(), brackets, &localized)
            .map_err(|e| VertexError::TableInconsistent(e.to_string()))
    }

    /// Image of a lattice state in the classical jet algebra (coefficients mod hbar).
    pub fn classical_image(&self, a: &State) -> Result<crate::poisson::JetPoly, VertexError> {
        self.lattice_contains(a)?;
        if a.min_q().is_some_and(|q| q < 0) {
            return Err(VertexError::OutsideLattice(self.render(a)));
        }
        let mut out = crate::poisson::JetPoly::zero();
        for (m, c) in a.terms() {
            let c0 = c.project_range(0, 1);
            if c0.is_zero() {
                continue;
            }
            out = out.add(&crate::poisson::JetPoly::from_monomial(&self.table, m).scale(&c0));
        }
        Ok(out)
    }

    /// Hatted copy: each listed generator is rescaled by `hbar^e` (`e` in
    /// `q`-units), unlisted ones are kept; products are conjugated.
    pub fn rescale_hbar(&self, name: &str, scales: &[(&str, i32)]) -> Result<VertexAlgebra, VertexError> {
        let n = self.table.len();
        let mut e = vec![0i32; n];
        for (g, s) in scales {
            e[self.table.id(g)? as usize] = *s;
        }
        let conj = |st: &State, shift: i32| -> State {
            let mut out = State::zero();
            for (m, c) in st.terms() {
                let w: i32 = m.factors().iter().map(|f| if f.is_inverse() { -e[f.id() as usize] } else { e[f.id() as usize] }).sum();
                out.add_term(m.clone(), c.shift(shift - w));
            }
            out
        };
        let mut b = AlgebraBuilder::new(name);
        for g in self.table.generators() {
            b = b.generator(g.clone());
        }
        for a in 0..n {
            for c in 0..n {
                let vals = &self.products[a][c];
                if vals.is_empty() {
                    continue;
                }
                let v: Vec<State> = vals.iter().map(|s| conj(s, e[a] + e[c])).collect();
                b = b.products(&self.table.get(a as GenId).name, &self.table.get(c as GenId).name, v);
            }
        }
        for (i, inv) in self.invertible.iter().enumerate() {
            if *inv {
                b = b.invertible(&self.table.get(i as GenId).name);
            }
        }
        let names: Vec<&str> = self.table.generators().iter().map(|g| g.name.as_str()).collect();
        b.lattice(&names).build()
    }

    /// Tensor product; generator names must be disjoint.
    pub fn tensor(name: &str, parts: &[&VertexAlgebra]) -> Result<VertexAlgebra, VertexError> {
        let mut b = AlgebraBuilder::new(name);
        let mut lattice: Vec<String> = Vec::new();
        let mut any_lattice = false;
        for p in parts {
            for g in p.table.generators() {
                b = b.generator(g.clone());
            }
        }
        let mut offset: GenId = 0;
        for p in parts {
            let n = p.table.len();
            let remap = |s: &State| -> State {
                let mut out = State::zero();
                for (m, c) in s.terms() {
                    let fs: Vec<Factor> = m
                        .factors()
                        .iter()
                        .map(|f| match *f {
                            Factor::Gen { id, deriv } => Factor::Gen { id: id + offset, deriv },
                            Factor::Inv { id } => Factor::Inv { id: id + offset },
                        })
                        .collect();
                    out.add_term(Monomial::from_sorted(fs), c.clone());
                }
                out
            };
            for a in 0..n {
                for c in 0..n {
                    let vals = &p.products[a][c];
                    if vals.is_empty() {
                        continue;
                    }
                    b = b.products(&p.table.get(a as GenId).name, &p.table.get(c as GenId).name, vals.iter().map(remap).collect());
                }
                if p.invertible[a] {
                    b = b.invertible(&p.table.get(a as GenId).name);
                }
                match &p.lattice {
                    Some(flags) => {
                        any_lattice = true;
                        if flags[a] {
                            lattice.push(p.table.get(a as GenId).name.clone());
                        }
                    }
                    None => lattice.push(p.table.get(a as GenId).name.clone()),
                }
            }
            offset += n as GenId;
        }
        if any_lattice {
            let refs: Vec<&str> = lattice.iter().map(|s| s.as_str()).collect();
            b = b.lattice(&refs);
        }
        b.build()
    }

    /// Uniformly sampled canonical monomial with at most `max_len` factors
    /// and derivative orders at most `max_deriv`.
    pub fn sample_monomial<R: Rng>(&self, rng: &mut R, max_len: usize, max_deriv: u16) -> State {
        let len = rng.gen_range(1..=max_len.max(1));
        let mut acc = State::vacuum();
        for _ in 0..len {
            let id = rng.gen_range(0..self.table.len()) as GenId;
            let f = Factor::gen(id, rng.gen_range(0..=max_deriv));
            acc = self.left_mul_state(f, &acc);
        }
        // keep one monomial so the sample stays homogeneous
        let pick = acc.terms().max_by_key(|(m, _)| m.len()).map(|(m, _)| m.clone());
        match pick {
            Some(m) => self.tagged(State::monomial(m)),
            None => State::vacuum(),
        }
    }
}

/// Filtration level `n` and the part of a state in `F_n / F_{n+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Symbol {
    pub level: i32,
    pub leading: State,
}

#[cfg(test)]
mod tests;
