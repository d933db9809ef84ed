//! Named algebras: sl_n Lie data, affine vertex algebras and their ħ-adic
//! versions, Clifford and skewed Clifford ghosts, and βγ chart CDOs.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poisson::{CotangentChart, Form, JetPoly, PoissonAlgebra, PoissonError};
use crate::scalar::{rat_int, Rat, Scalar};
use crate::state::{Factor, GenId, Generator, Monomial, State};
use crate::vertex::{AlgebraBuilder, MorphismResidual, Substitution, VertexAlgebra, VertexError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("Lie data is invalid: {0}")]
    InvalidLieData(String),
    #[error("unsupported rank sl_{0}")]
    UnsupportedRank(usize),
    #[error("unknown basis element `{0}`")]
    UnknownBasis(String),
    #[error("subspace is not closed under the bracket: {0}")]
    NotSubalgebra(String),
    #[error("three-form is not closed: d(alpha) = {0}")]
    NotClosedThreeForm(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Vertex(#[from] VertexError),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
}

/// Basis-coordinate vector.
pub type Coords = Vec<Rat>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Sl2Triple {
    pub e: usize,
    pub h: usize,
    pub f: usize,
}

/// Finite-dimensional Lie algebra with invariant form and optional
/// sl2-triple; the basis is an ad_h eigenbasis when the triple is present.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LieData {
    name: String,
    names: Vec<String>,
    brackets: Vec<Vec<Coords>>,
    form: Vec<Vec<Rat>>,
    dual_coxeter: i64,
    triple: Option<Sl2Triple>,
    ad_h: Option<Vec<Rat>>,
}

type Matrix = Vec<Vec<Rat>>;

fn mat_zero(n: usize) -> Matrix {
    vec![vec![Rat::zero(); n]; n]
}

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = mat_zero(n);
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                out[i][j] += &a[i][k] * &b[k][j];
            }
        }
    }
    out
}

fn commutator(a: &Matrix, b: &Matrix) -> Matrix {
    let ab = mat_mul(a, b);
    let ba = mat_mul(b, a);
    ab.iter().zip(&ba).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect()).collect()
}

fn trace_of_product(a: &Matrix, b: &Matrix) -> Rat {
    let p = mat_mul(a, b);
    (0..p.len()).fold(Rat::zero(), |acc, i| acc + &p[i][i])
}

impl LieData {
    /// Validates and assembles Lie data from explicit structure constants.
    pub fn new(
        name: &str,
        names: Vec<String>,
        brackets: Vec<Vec<Coords>>,
        form: Vec<Vec<Rat>>,
        dual_coxeter: i64,
        triple: Option<Sl2Triple>,
    ) -> Result<Self, AlgebraError> {
        let mut l = LieData { name: name.to_string(), names, brackets, form, dual_coxeter, triple, ad_h: None };
        l.validate()?;
        if let Some(t) = triple {
            l.ad_h = Some(l.ad_eigenvalues(t.h)?);
        }
        Ok(l)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index(&self, name: &str) -> Result<usize, AlgebraError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| AlgebraError::UnknownBasis(name.to_string()))
    }

    /// Coordinates of `[x_i, x_j]`.
    pub fn bracket(&self, i: usize, j: usize) -> &Coords {
        &self.brackets[i][j]
    }

    pub fn bracket_coords(&self, x: &[Rat], y: &[Rat]) -> Coords {
        let mut out = vec![Rat::zero(); self.dim()];
        for (i, a) in x.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in y.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let c = a * b;
                for (k, v) in self.brackets[i][j].iter().enumerate() {
                    out[k] += &c * v;
                }
            }
        }
        out
    }

    pub fn form(&self, i: usize, j: usize) -> &Rat {
        &self.form[i][j]
    }

    pub fn form_coords(&self, x: &[Rat], y: &[Rat]) -> Rat {
        let mut out = Rat::zero();
        for (i, a) in x.iter().enumerate() {
            for (j, b) in y.iter().enumerate() {
                out += a * b * &self.form[i][j];
            }
        }
        out
    }

    pub fn dual_coxeter(&self) -> i64 {
        self.dual_coxeter
    }

    pub fn triple(&self) -> Option<Sl2Triple> {
        self.triple
    }

    /// ad_h eigenvalue of a basis element.
    pub fn ad_h_weight(&self, i: usize) -> Option<&Rat> {
        self.ad_h.as_ref().map(|w| &w[i])
    }

    /// Basis indices with ad_h eigenvalue at least `j`.
    pub fn graded_at_least(&self, j: i64) -> Vec<usize> {
        let bound = rat_int(j);
        match &self.ad_h {
            None => Vec::new(),
            Some(w) => (0..self.dim()).filter(|&i| w[i] >= bound).collect(),
        }
    }

    pub fn graded_exactly(&self, j: i64) -> Vec<usize> {
        let v = rat_int(j);
        match &self.ad_h {
            None => Vec::new(),
            Some(w) => (0..self.dim()).filter(|&i| w[i] == v).collect(),
        }
    }

    pub fn unit(&self, i: usize) -> Coords {
        let mut v = vec![Rat::zero(); self.dim()];
        v[i] = Rat::one();
        v
    }

    /// Structure constants as `(i, j, k, c)` with `[x_i, x_j] = Σ c x_k`.
    pub fn structure_list(&self) -> Vec<(usize, usize, usize, Rat)> {
        let mut out = Vec::new();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                for (k, c) in self.brackets[i][j].iter().enumerate() {
                    if !c.is_zero() {
                        out.push((i, j, k, c.clone()));
                    }
                }
            }
        }
        out
    }

    /// Kostant-Kirillov Poisson structure on the dual, in basis coordinates.
    pub fn kostant_kirillov(&self) -> Result<PoissonAlgebra, AlgebraError> {
        let names: Vec<&str> = self.names.iter().map(|s| s.as_str()).collect();
        Ok(PoissonAlgebra::kostant_kirillov(&names, &self.structure_list())?)
    }

    fn ad_eigenvalues(&self, h: usize) -> Result<Vec<Rat>, AlgebraError> {
        (0..self.dim())
            .map(|i| {
                let v = &self.brackets[h][i];
                let lambda = v[i].clone();
                if v.iter().enumerate().any(|(k, c)| k != i && !c.is_zero()) {
                    return Err(AlgebraError::InvalidLieData(format!("`{}` is not an ad_h eigenvector", self.names[i])));
                }
                Ok(lambda)
            })
            .collect()
    }

    fn validate(&self) -> Result<(), AlgebraError> {
        let n = self.dim();
        let bad = |m: String| Err(AlgebraError::InvalidLieData(m));
        if self.brackets.len() != n || self.brackets.iter().any(|r| r.len() != n || r.iter().any(|c| c.len() != n)) {
            return bad("bracket table has the wrong shape".into());
        }
        if self.form.len() != n || self.form.iter().any(|r| r.len() != n) {
            return bad("form has the wrong shape".into());
        }
        for i in 0..n {
            for j in 0..n {
                let sum: Vec<Rat> = self.brackets[i][j].iter().zip(&self.brackets[j][i]).map(|(a, b)| a + b).collect();
                if sum.iter().any(|c| !c.is_zero()) {
                    return bad(format!("bracket of `{}` and `{}` is not antisymmetric", self.names[i], self.names[j]));
                }
                if self.form[i][j] != self.form[j][i] {
                    return bad("form is not symmetric".into());
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (x, y, z) = (self.unit(i), self.unit(j), self.unit(k));
                    let a = self.bracket_coords(&x, &self.bracket_coords(&y, &z));
                    let b = self.bracket_coords(&y, &self.bracket_coords(&z, &x));
                    let c = self.bracket_coords(&z, &self.bracket_coords(&x, &y));
                    if a.iter().zip(&b).zip(&c).any(|((p, q), r)| !(p + q + r).is_zero()) {
                        return bad(format!("Jacobi fails on ({}, {}, {})", self.names[i], self.names[j], self.names[k]));
                    }
                    if self.form_coords(&self.bracket_coords(&x, &y), &z) != self.form_coords(&x, &self.bracket_coords(&y, &z)) {
                        return bad(format!("form is not invariant on ({}, {}, {})", self.names[i], self.names[j], self.names[k]));
                    }
                }
            }
        }
        if let Some(t) = self.triple {
            let (e, h, f) = (self.unit(t.e), self.unit(t.h), self.unit(t.f));
            let two = rat_int(2);
            let scaled = |v: &Coords, c: &Rat| -> Coords { v.iter().map(|x| x * c).collect() };
            if self.bracket_coords(&e, &f) != h
                || self.bracket_coords(&h, &e) != scaled(&e, &two)
                || self.bracket_coords(&h, &f) != scaled(&f, &-two)
            {
                return bad("sl2-triple relations fail".into());
            }
        }
        Ok(())
    }

    /// Parses a TOML Lie-data description.
    pub fn from_toml(text: &str) -> Result<Self, AlgebraError> {
        let cfg: LieConfig = toml::from_str(text).map_err(|e| AlgebraError::Config(e.to_string()))?;
        cfg.build()
    }

    /// Renders the data back into the TOML schema.
    pub fn to_config(&self) -> LieConfig {
        let mut bracket = Vec::new();
        for i in 0..self.dim() {
            for j in (i + 1)..self.dim() {
                let value: BTreeMap<String, String> = self.brackets[i][j]
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_zero())
                    .map(|(k, c)| (self.names[k].clone(), c.to_string()))
                    .collect();
                if !value.is_empty() {
                    bracket.push(BracketEntry { a: self.names[i].clone(), b: self.names[j].clone(), value });
                }
            }
        }
        let mut form = Vec::new();
        for i in 0..self.dim() {
            for j in i..self.dim() {
                if !self.form[i][j].is_zero() {
                    form.push(FormEntry { a: self.names[i].clone(), b: self.names[j].clone(), value: self.form[i][j].to_string() });
                }
            }
        }
        LieConfig {
            name: self.name.clone(),
            basis: self.names.clone(),
            dual_coxeter: self.dual_coxeter,
            bracket,
            form,
            triple: self.triple.map(|t| TripleEntry { e: self.names[t.e].clone(), h: self.names[t.h].clone(), f: self.names[t.f].clone() }),
        }
    }
}

/// TOML schema for user-supplied Lie data. Brackets and form entries list
/// one orientation; the rest follows by (anti)symmetry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LieConfig {
    pub name: String,
    pub basis: Vec<String>,
    pub dual_coxeter: i64,
    #[serde(default)]
    pub bracket: Vec<BracketEntry>,
    #[serde(default)]
    pub form: Vec<FormEntry>,
    #[serde(default)]
    pub triple: Option<TripleEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BracketEntry {
    pub a: String,
    pub b: String,
    pub value: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormEntry {
    pub a: String,
    pub b: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleEntry {
    pub e: String,
    pub h: String,
    pub f: String,
}

fn parse_rat(s: &str) -> Result<Rat, AlgebraError> {
    Rat::from_str(s.trim()).map_err(|_| AlgebraError::Config(format!("`{}` is not a rational number", s)))
}

impl LieConfig {
    pub fn build(&self) -> Result<LieData, AlgebraError> {
        let n = self.basis.len();
        let idx = |s: &str| self.basis.iter().position(|b| b == s).ok_or_else(|| AlgebraError::UnknownBasis(s.to_string()));
        let mut brackets = vec![vec![vec![Rat::zero(); n]; n]; n];
        for e in &self.bracket {
            let (i, j) = (idx(&e.a)?, idx(&e.b)?);
            for (name, v) in &e.value {
                let c = parse_rat(v)?;
                let k = idx(name)?;
                brackets[i][j][k] += &c;
                brackets[j][i][k] -= &c;
            }
        }
        let mut form = mat_zero(n);
        for e in &self.form {
            let (i, j) = (idx(&e.a)?, idx(&e.b)?);
            let c = parse_rat(&e.value)?;
            form[i][j] = c.clone();
            form[j][i] = c;
        }
        let triple = match &self.triple {
            None => None,
            Some(t) => Some(Sl2Triple { e: idx(&t.e)?, h: idx(&t.h)?, f: idx(&t.f)? }),
        };
        LieData::new(&self.name, self.basis.clone(), brackets, form, self.dual_coxeter, triple)
    }
}

/// sl_n in the matrix-unit basis with the trace form and the triple
/// `e = E12`, `h = E11 - E22`, `f = E21`. For `n = 2` the basis is named
/// `e, h, f`.
pub fn lie_sl(n: usize) -> Result<LieData, AlgebraError> {
    if !(2..=3).contains(&n) {
        return Err(AlgebraError::UnsupportedRank(n));
    }
    let unit = |i: usize, j: usize| -> Matrix {
        let mut m = mat_zero(n);
        m[i][j] = Rat::one();
        m
    };
    let mut names = Vec::new();
    let mut mats = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            names.push(format!("E{}{}", i + 1, j + 1));
            mats.push(unit(i, j));
        }
    }
    for i in 0..n - 1 {
        names.push(format!("H{}", i + 1));
        let mut m = unit(i, i);
        m[i + 1][i + 1] = -Rat::one();
        mats.push(m);
    }
    for i in 0..n {
        for j in 0..i {
            names.push(format!("E{}{}", i + 1, j + 1));
            mats.push(unit(i, j));
        }
    }
    let dim = mats.len();
    // coordinates of a traceless matrix in this basis
    let coords = |m: &Matrix| -> Coords {
        let mut v = vec![Rat::zero(); dim];
        let mut pos = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                v[pos] = m[i][j].clone();
                pos += 1;
            }
        }
        let mut partial = Rat::zero();
        for i in 0..n - 1 {
            partial += &m[i][i];
            v[pos] = partial.clone();
            pos += 1;
        }
        for i in 0..n {
            for j in 0..i {
                v[pos] = m[i][j].clone();
                pos += 1;
            }
        }
        v
    };
    let brackets: Vec<Vec<Coords>> = (0..dim).map(|a| (0..dim).map(|b| coords(&commutator(&mats[a], &mats[b]))).collect()).collect();
    let form: Matrix = (0..dim).map(|a| (0..dim).map(|b| trace_of_product(&mats[a], &mats[b])).collect()).collect();
    if n == 2 {
        names = vec!["e".into(), "h".into(), "f".into()];
    }
    let pos = |s: &str| names.iter().position(|x| x == s).unwrap();
    let triple = if n == 2 {
        Sl2Triple { e: pos("e"), h: pos("h"), f: pos("f") }
    } else {
        Sl2Triple { e: pos("E12"), h: pos("H1"), f: pos("E21") }
    };
    LieData::new(&format!("sl{}", n), names, brackets, form, n as i64, Some(triple))
}

/// Subalgebra `m` of the positive part with the character `χ = (f, ·)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubalgebraData {
    pub basis: Vec<usize>,
    pub chi: Vec<Rat>,
}

impl SubalgebraData {
    /// Span of the listed basis elements; must be closed under the bracket.
    pub fn new(lie: &LieData, basis: Vec<usize>) -> Result<Self, AlgebraError> {
        for &a in &basis {
            for &b in &basis {
                let br = lie.bracket(a, b);
                if br.iter().enumerate().any(|(k, c)| !c.is_zero() && !basis.contains(&k)) {
                    return Err(AlgebraError::NotSubalgebra(format!("[{}, {}]", lie.names()[a], lie.names()[b])));
                }
            }
        }
        let chi = match lie.triple() {
            Some(t) => basis.iter().map(|&i| lie.form(t.f, i).clone()).collect(),
            None => vec![Rat::zero(); basis.len()],
        };
        Ok(SubalgebraData { basis, chi })
    }

    /// `m = l ⊕ g_{≥2}` for a Lagrangian `l ⊂ g_1`.
    pub fn lagrangian(lie: &LieData, l: &[&str]) -> Result<Self, AlgebraError> {
        let mut basis = Vec::new();
        for name in l {
            let i = lie.index(name)?;
            if lie.ad_h_weight(i) != Some(&Rat::one()) {
                return Err(AlgebraError::NotSubalgebra(format!("`{}` is not in g_1", name)));
            }
            basis.push(i);
        }
        basis.extend(lie.graded_at_least(2));
        basis.sort();
        Self::new(lie, basis)
    }

    /// `g_{≥j}`.
    pub fn graded(lie: &LieData, j: i64) -> Result<Self, AlgebraError> {
        Self::new(lie, lie.graded_at_least(j))
    }

    pub fn with_zero_character(mut self) -> Self {
        self.chi = vec![Rat::zero(); self.basis.len()];
        self
    }

    /// Whether `χ` vanishes on `[m, m]`.
    pub fn is_character(&self, lie: &LieData) -> bool {
        for &a in &self.basis {
            for &b in &self.basis {
                let br = lie.bracket(a, b);
                let v: Rat = self.basis.iter().zip(&self.chi).fold(Rat::zero(), |acc, (&i, c)| acc + &br[i] * c);
                if !v.is_zero() {
                    return false;
                }
            }
        }
        true
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}

/// Weights of a current: conformal 1, Kazhdan `2 - j` (the weight of its
/// ħ-rescaled copy), ad_h `j`.
fn current_generator(lie: &LieData, i: usize) -> Generator {
    let j = lie.ad_h_weight(i).cloned().unwrap_or_else(Rat::zero);
    Generator::even(&lie.names()[i]).with_conformal(Rat::one()).with_kazhdan(rat_int(2) - &j).with_ad_h(j)
}

fn coords_state(gens: &[GenId], v: &[Rat]) -> State {
    let mut out = State::zero();
    for (k, c) in v.iter().enumerate() {
        if !c.is_zero() {
            out.add_term(Monomial::single(Factor::gen(gens[k], 0)), Scalar::from_rat(c.clone()));
        }
    }
    out
}

/// `V^k(g)`: `x_(0) y = [x, y]`, `x_(1) y = level (x, y)`.
pub fn affine_vk(lie: &LieData, level: &Scalar) -> Result<VertexAlgebra, AlgebraError> {
    let mut b = VertexAlgebra::builder(&format!("V({})", lie.name()));
    for i in 0..lie.dim() {
        b = b.generator(current_generator(lie, i));
    }
    let ids: Vec<GenId> = (0..lie.dim() as GenId).collect();
    for i in 0..lie.dim() {
        for j in 0..lie.dim() {
            let p0 = coords_state(&ids, lie.bracket(i, j));
            let p1 = State::scalar(level.scale(lie.form(i, j)));
            if p0.is_zero() && p1.is_zero() {
                continue;
            }
            b = b.products(&lie.names()[i], &lie.names()[j], vec![p0, p1]);
        }
    }
    Ok(b.build()?)
}

/// `V^k(g)_ħ`: every current rescaled by `ħ`.
pub fn affine_vk_hbar(lie: &LieData, level: &Scalar) -> Result<VertexAlgebra, AlgebraError> {
    let v = affine_vk(lie, level)?;
    let scales: Vec<(&str, i32)> = lie.names().iter().map(|n| (n.as_str(), 2)).collect();
    Ok(v.rescale_hbar(&format!("V({})_hb", lie.name()), &scales)?)
}

pub fn ghost_name(label: &str) -> String {
    format!("phi_{}", label)
}

pub fn dual_ghost_name(label: &str) -> String {
    format!("phis_{}", label)
}

/// Clifford algebra on `m ⊕ m*`: odd `phi_i` (ghost -1) and `phis_i`
/// (ghost +1) with `phi_i(0) phis_j = pairing[i][j]`. The ad_h weights
/// `j_i` fix the remaining gradings: `phi_i` has conformal weight 1 and
/// Kazhdan weight `2 - j_i`, `phis_i` has 0 and `j_i`.
pub fn clifford(labels: &[&str], ad_h: &[Rat], pairing: &[Vec<Rat>]) -> Result<VertexAlgebra, AlgebraError> {
    let mut b = VertexAlgebra::builder("Cl");
    for (i, l) in labels.iter().enumerate() {
        let j = ad_h.get(i).cloned().unwrap_or_else(Rat::zero);
        b = b.generator(
            Generator::odd(&ghost_name(l)).with_conformal(Rat::one()).with_kazhdan(rat_int(2) - &j).with_ghost(-1).with_ad_h(j.clone()),
        );
    }
    for (i, l) in labels.iter().enumerate() {
        let j = ad_h.get(i).cloned().unwrap_or_else(Rat::zero);
        b = b.generator(Generator::odd(&dual_ghost_name(l)).with_conformal(Rat::zero()).with_kazhdan(j.clone()).with_ghost(1).with_ad_h(-j));
    }
    for (i, li) in labels.iter().enumerate() {
        for (j, lj) in labels.iter().enumerate() {
            let c = &pairing[i][j];
            if !c.is_zero() {
                b = b.products(&ghost_name(li), &dual_ghost_name(lj), vec![State::scalar(Scalar::from_rat(c.clone()))]);
            }
        }
    }
    Ok(b.build()?)
}

/// ħ-adic Clifford algebra: `phi` rescaled by `ħ`, so `phi(0) phis = ħ`.
pub fn clifford_hbar(labels: &[&str], ad_h: &[Rat], pairing: &[Vec<Rat>]) -> Result<VertexAlgebra, AlgebraError> {
    let cl = clifford(labels, ad_h, pairing)?;
    let names: Vec<String> = labels.iter().map(|l| ghost_name(l)).collect();
    let scales: Vec<(&str, i32)> = names.iter().map(|n| (n.as_str(), 2)).collect();
    Ok(cl.rescale_hbar("Cl_hb", &scales)?)
}

pub fn identity_pairing(n: usize) -> Vec<Vec<Rat>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { Rat::one() } else { Rat::zero() }).collect()).collect()
}

/// Odd generators `v_i`, `w_j` whose only products are
/// `v_i(0) w_j = pairing[i][j]` (and the skew partners).
pub fn skewed_clifford_with(v: Vec<Generator>, w: Vec<Generator>, pairing: &[Vec<Rat>]) -> Result<VertexAlgebra, AlgebraError> {
    let mut b = VertexAlgebra::builder("SCl");
    for g in v.iter().chain(w.iter()) {
        b = b.generator(g.clone());
    }
    for (i, gv) in v.iter().enumerate() {
        for (j, gw) in w.iter().enumerate() {
            let c = &pairing[i][j];
            if !c.is_zero() {
                b = b.products(&gv.name, &gw.name, vec![State::scalar(Scalar::from_rat(c.clone()))]);
            }
        }
    }
    Ok(b.build()?)
}

/// Skewed Clifford algebra with `V` in ghost number +1 and `W` in -1.
pub fn skewed_clifford(v_names: &[&str], w_names: &[&str], pairing: &[Vec<Rat>]) -> Result<VertexAlgebra, AlgebraError> {
    let v = v_names.iter().map(|n| Generator::odd(n).with_ghost(1)).collect();
    let w = w_names.iter().map(|n| Generator::odd(n).with_conformal(Rat::one()).with_ghost(-1)).collect();
    skewed_clifford_with(v, w, pairing)
}

/// Converts a polynomial in the commuting chart coordinates (and their
/// derivatives) into a state; generator ids are shared with the chart.
pub fn coordinate_state(p: &JetPoly) -> State {
    let mut out = State::zero();
    for (m, c) in p.terms() {
        let mut fs = Vec::new();
        for (v, e) in m.factors() {
            for _ in 0..*e {
                fs.push(Factor::gen(v.id, v.deriv));
            }
        }
        fs.sort();
        out.add_term(Monomial::from_sorted(fs), c.clone());
    }
    out
}

fn check_closed(chart: &CotangentChart, alpha: &Form) -> Result<(), AlgebraError> {
    if alpha.degree != 3 {
        return Err(AlgebraError::NotClosedThreeForm(format!("degree {} form", alpha.degree)));
    }
    let d = chart.exterior_d(alpha);
    if !d.is_zero() {
        let parts: Vec<String> = d.coeffs.iter().map(|(idx, c)| format!("{:?}: {}", idx, chart.pva.render(c))).collect();
        return Err(AlgebraError::NotClosedThreeForm(parts.join(", ")));
    }
    Ok(())
}

/// Generator data for one chart; `x` names, `d` names and their weights.
#[derive(Clone, Debug)]
pub struct ChartGenerators {
    pub xs: Vec<Generator>,
    pub ds: Vec<Generator>,
}

impl ChartGenerators {
    /// `x1..xn` (weight 0) and `d1..dn` (conformal weight 1, Kazhdan 2).
    pub fn standard(dim: usize) -> Self {
        ChartGenerators {
            xs: (1..=dim).map(|i| Generator::even(&format!("x{}", i))).collect(),
            ds: (1..=dim).map(|i| Generator::even(&format!("d{}", i)).with_conformal(Rat::one()).with_kazhdan(rat_int(2))).collect(),
        }
    }
}

/// βγ chart CDO: `d_j(0) x_i = δ_ij` and `d_j(0) d_k = ι_{∂_k} ι_{∂_j} α`
/// (1-forms embedded as `f dg ↦ :f ∂g:`). In the ħ-adic version these
/// become `ħ δ_ij` and `ħ^2 ι ι α`.
pub fn betagamma_chart_with(gens: &ChartGenerators, alpha: Option<&Form>, hbar: bool, invertible: &[&str]) -> Result<VertexAlgebra, AlgebraError> {
    let dim = gens.xs.len();
    let shadow = CotangentChart::new(dim, None)?;
    if let Some(a) = alpha {
        check_closed(&shadow, a)?;
    }
    let unit = if hbar { Scalar::hbar_pow(1) } else { Scalar::one() };
    let mut b = AlgebraBuilder::new(if hbar { "bg_hb" } else { "bg" });
    for g in gens.xs.iter().chain(gens.ds.iter()) {
        b = b.generator(g.clone());
    }
    for i in 0..dim {
        b = b.products(&gens.ds[i].name, &gens.xs[i].name, vec![State::scalar(unit.clone())]);
    }
    if let Some(a) = alpha {
        for j in 0..dim {
            for k in 0..dim {
                let one_form = a.contract(j).contract(k);
                if one_form.is_zero() {
                    continue;
                }
                let s = coordinate_state(&shadow.embed_one_form(&one_form)).scale(&unit.mul(&unit));
                b = b.products(&gens.ds[j].name, &gens.ds[k].name, vec![s]);
            }
        }
    }
    for name in invertible {
        b = b.invertible(name);
    }
    Ok(b.build()?)
}

pub fn betagamma_chart(dim: usize, alpha: Option<&Form>, hbar: bool) -> Result<VertexAlgebra, AlgebraError> {
    betagamma_chart_with(&ChartGenerators::standard(dim), alpha, hbar, &[])
}

/// Images `x_i ↦ x_i`, `d_i ↦ d_i + φ_i` of a gluing shift by 1-forms.
pub fn shift_images(chart: &VertexAlgebra, dim: usize, one_forms: &[Form], hbar: bool) -> Result<Vec<(String, State)>, AlgebraError> {
    let shadow = CotangentChart::new(dim, None)?;
    let unit = if hbar { Scalar::hbar_pow(1) } else { Scalar::one() };
    let mut out = Vec::new();
    for i in 0..dim {
        let name = chart.table().get(i as GenId).name.clone();
        out.push((name.clone(), chart.gen(&name)?));
    }
    for i in 0..dim {
        let name = chart.table().get((dim + i) as GenId).name.clone();
        let mut img = chart.gen(&name)?;
        if let Some(w) = one_forms.get(i) {
            img = img.add(&coordinate_state(&shadow.embed_one_form(w)).scale(&unit).with_tag(chart.id()));
        }
        out.push((name, img));
    }
    Ok(out)
}

/// Change of splitting: the substitution `d_i ↦ d_i + ι_{∂_i} β` from the
/// chart twisted by `α + dβ` into the chart twisted by `α`. Returns the
/// morphism residuals (empty on success).
pub fn splitting_change_residuals(dim: usize, alpha: Option<&Form>, beta: &Form, hbar: bool) -> Result<Vec<MorphismResidual>, AlgebraError> {
    let shadow = CotangentChart::new(dim, None)?;
    let dbeta = shadow.exterior_d(beta);
    let mut twisted = alpha.cloned().unwrap_or_else(|| Form::zero(3));
    for (idx, c) in &dbeta.coeffs {
        twisted.add_component(idx, c);
    }
    let target = betagamma_chart(dim, alpha, hbar)?;
    let source = betagamma_chart(dim, Some(&twisted), hbar)?;
    let one_forms: Vec<Form> = (0..dim).map(|i| beta.contract(i)).collect();
    let images = shift_images(&target, dim, &one_forms, hbar)?;
    let refs: Vec<(&str, State)> = images.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
    let sub = Substitution::new(&source, &target, &refs, &[])?;
    Ok(sub.residuals()?)
}
