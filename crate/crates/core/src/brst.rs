//! Hamiltonian-reduction complexes. The classical differential `d_chi`
//! lives on jets of `g^* x (m + m^*)`; the chiral one on
//! `V^k(g)_hb ⊗ Cl_hb`. Also the Kac-Roan-Wakimoto complex, the skewed
//! Clifford intermediate complex, truncated cohomology and chain maps.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::algebras::{
    affine_vk_hbar, betagamma_chart_with, clifford_hbar, dual_ghost_name, ghost_name, identity_pairing, skewed_clifford_with, AlgebraError,
    ChartGenerators, LieData, SubalgebraData,
};
use crate::linalg::{Echelon, SparseVec};
use crate::poisson::{JetMono, JetPoly, JetVar, PoissonError, PoissonVertexAlgebra};
use crate::scalar::{rat, Rat, RatFn, Scalar, ScalarError};
use crate::state::{Factor, GenId, GeneratorTable, GradeValue, GradingKind, Generator, Monomial, Parity, State};
use crate::vertex::{Substitution, VertexAlgebra, VertexError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BrstError {
    #[error("chi does not vanish on [m, m]")]
    ChiNotCharacter,
    #[error("moment of `{generator}` has symbol {found}, expected {expected}")]
    MomentSymbolMismatch { generator: String, found: String, expected: String },
    #[error("{expected} moments needed, {found} given")]
    MomentArity { expected: usize, found: usize },
    #[error("differential is not nilpotent: d_(0) d = {0}")]
    DifferentialNotNilpotent(String),
    #[error("not homogeneous: {0}")]
    NotHomogeneous(String),
    #[error("state outside the window: {0}")]
    OutOfWindow(String),
    #[error("window not closed: {0}")]
    WindowNotClosed(String),
    #[error("g_1 has odd dimension {0}; no Lagrangian splitting")]
    OddDimG1(usize),
    #[error("`{0}` carries no sl2-triple")]
    NoGrading(String),
    #[error("not a morphism: {0}")]
    NotAMorphism(String),
    #[error("slice data: {0}")]
    Slice(String),
    #[error(transparent)]
    Vertex(#[from] VertexError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

/// `c_ab^c` for `a, b` in `rows` and `c` in `cols`, as positions.
fn structure_on(lie: &LieData, rows: &[usize], cols: &[usize]) -> Vec<(usize, usize, usize, Rat)> {
    let mut out = Vec::new();
    for (a, &ia) in rows.iter().enumerate() {
        for (b, &ib) in rows.iter().enumerate() {
            let br = lie.bracket(ia, ib);
            for (c, &ic) in cols.iter().enumerate() {
                if !br[ic].is_zero() {
                    out.push((a, b, c, br[ic].clone()));
                }
            }
        }
    }
    out
}

fn weight_int(w: &Rat) -> Option<i32> {
    if w.is_integer() {
        i32::try_from(w.to_integer()).ok()
    } else {
        None
    }
}

/// Classical complex on jets: `g` coordinates, odd `phi_i` (ghost -1) and
/// `phis_i` (ghost +1) with `phi_i (0) phis_j = delta_ij`.
#[derive(Clone, Debug)]
pub struct ClassicalComplex {
    pva: PoissonVertexAlgebra,
    d: JetPoly,
}

impl ClassicalComplex {
    pub fn pva(&self) -> &PoissonVertexAlgebra {
        &self.pva
    }

    pub fn d(&self) -> &JetPoly {
        &self.d
    }

    /// `(d_chi)_(0) a`.
    pub fn apply_d(&self, a: &JetPoly) -> JetPoly {
        self.pva.nprod(&self.d, 0, a)
    }

    pub fn render(&self, p: &JetPoly) -> String {
        self.pva.render(p)
    }
}

/// `d_chi = sum_i (m_i - chi_i) phis_i - 1/2 sum c_ij^k phi_k phis_i phis_j`
/// on the jet algebra of the Kostant-Kirillov bracket.
pub fn build_dchi_classical(lie: &LieData, sub: &SubalgebraData) -> Result<ClassicalComplex, BrstError> {
    if !sub.is_character(lie) {
        return Err(BrstError::ChiNotCharacter);
    }
    let n = lie.dim();
    let r = sub.len();
    let labels: Vec<&str> = sub.basis.iter().map(|&i| lie.names()[i].as_str()).collect();
    let mut gens: Vec<Generator> = lie.names().iter().map(|s| Generator::even(s)).collect();
    gens.extend(labels.iter().map(|l| Generator::odd(&ghost_name(l)).with_ghost(-1)));
    gens.extend(labels.iter().map(|l| Generator::odd(&dual_ghost_name(l)).with_ghost(1)));
    let table = GeneratorTable::new(gens).map_err(VertexError::from)?;
    let total = n + 2 * r;
    let var = |id: usize| JetPoly::var(JetVar { id: id as GenId, deriv: 0, odd: id >= n });
    let mut brackets = vec![vec![Vec::new(); total]; total];
    for (a, row) in brackets.iter_mut().enumerate().take(n) {
        for (b, entry) in row.iter_mut().enumerate().take(n) {
            let br = lie.bracket(a, b);
            let p = (0..n).filter(|&c| !br[c].is_zero()).fold(JetPoly::zero(), |acc, c| acc.add(&var(c).scale(&Scalar::from_rat(br[c].clone()))));
            *entry = vec![p];
        }
    }
    for i in 0..r {
        brackets[n + i][n + r + i] = vec![JetPoly::one()];
        brackets[n + r + i][n + i] = vec![JetPoly::one()];
    }
    let pva = PoissonVertexAlgebra::from_brackets("classical-brst", table, brackets, &[])?;
    let mut d = JetPoly::zero();
    for (i, &m) in sub.basis.iter().enumerate() {
        let shifted = var(m).sub(&JetPoly::constant(Scalar::from_rat(sub.chi[i].clone())));
        d = d.add(&shifted.mul(&var(n + r + i)));
    }
    for (i, j, k, c) in structure_on(lie, &sub.basis, &sub.basis) {
        let t = var(n + k).mul(&var(n + r + i)).mul(&var(n + r + j));
        d = d.sub(&t.scale(&Scalar::from_rat(c / rat(2, 1))));
    }
    Ok(ClassicalComplex { pva, d })
}

/// Quantum moment `mu_ch(m_i)` with the classical moment its symbol must match.
#[derive(Clone, Debug)]
pub struct Moment {
    pub quantum: State,
    pub classical: JetPoly,
}

/// Window of a graded complex: cells of weight `w = K/2 + (∂-depth)` up to
/// `max_kazhdan`, truncated at standard conformal weight `max_conformal`,
/// ghost numbers in `ghost_min..=ghost_max`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TruncationWindow {
    pub max_kazhdan: Rat,
    pub max_conformal: Rat,
    pub ghost_min: i32,
    pub ghost_max: i32,
}

impl TruncationWindow {
    pub fn new(max_kazhdan: i64, max_conformal: i64, ghost_min: i32, ghost_max: i32) -> Self {
        TruncationWindow {
            max_kazhdan: Rat::from_integer(max_kazhdan.into()),
            max_conformal: Rat::from_integer(max_conformal.into()),
            ghost_min,
            ghost_max,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.max_kazhdan.is_negative() || self.ghost_min > self.ghost_max
    }
}

/// A graded basis monomial with its weights.
#[derive(Clone, Debug)]
struct CellMonomial {
    mono: Monomial,
    w: Rat,
    conformal: Rat,
    ghost: i32,
}

/// Chiral complex: an algebra containing the ghosts and an odd element `d`
/// of ghost number 1 and Kazhdan weight 0 with `(d_(0))^2 = 0`.
#[derive(Clone, Debug)]
pub struct BrstComplex {
    name: String,
    algebra: VertexAlgebra,
    d: State,
}

/// Per-element record of the `d^2` scan.
#[derive(Clone, Debug, Default, Serialize)]
pub struct NilpotenceReport {
    pub checked: usize,
    /// `d_(0) d = 0` as a state.
    pub square_vanishes: bool,
    /// `(d_(0) d)_(0)` kills every generator.
    pub square_acts_trivially: bool,
    pub failures: Vec<String>,
    pub inhomogeneous: Vec<String>,
}

impl NilpotenceReport {
    pub fn pass(&self) -> bool {
        self.square_acts_trivially && self.failures.is_empty() && self.inhomogeneous.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CohomologyCell {
    pub kazhdan: Rat,
    pub ghost: i32,
    pub dim: usize,
    pub representatives: Vec<String>,
    #[serde(skip)]
    pub states: Vec<State>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CohomologyReport {
    pub window: TruncationWindow,
    pub cells: Vec<CohomologyCell>,
}

impl CohomologyReport {
    pub fn dim(&self, kazhdan: i64, ghost: i32) -> Option<usize> {
        let w = Rat::from_integer(kazhdan.into());
        self.cells.iter().find(|c| c.kazhdan == w && c.ghost == ghost).map(|c| c.dim)
    }
}

impl BrstComplex {
    /// Wraps a differential after checking ghost number 1, Kazhdan weight 0
    /// and `(d_(0))^2 = 0`.
    pub fn new(name: &str, algebra: VertexAlgebra, d: State) -> Result<Self, BrstError> {
        algebra.admit(&d)?;
        let t = algebra.table();
        match t.grading(&d, GradingKind::Ghost) {
            Ok(Some(GradeValue::Ghost(1))) => {}
            other => return Err(BrstError::NotHomogeneous(format!("ghost number of d: {:?}", other))),
        }
        match t.grading(&d, GradingKind::Kazhdan) {
            Ok(Some(GradeValue::Weight(w))) if w.is_zero() => {}
            other => return Err(BrstError::NotHomogeneous(format!("Kazhdan weight of d: {:?}", other))),
        }
        let c = BrstComplex { name: name.to_string(), algebra, d };
        if !c.square_acts_trivially()? {
            let dd = c.algebra.nprod(&c.d, 0, &c.d)?;
            return Err(BrstError::DifferentialNotNilpotent(c.algebra.render(&dd)));
        }
        Ok(c)
    }

    /// `(d_(0))^2 = 1/2 (d_(0) d)_(0)` is a derivation, so it vanishes iff it
    /// kills every generator; `d_(0) d` itself may be nonzero.
    pub fn square_acts_trivially(&self) -> Result<bool, BrstError> {
        let dd = self.algebra.nprod(&self.d, 0, &self.d)?;
        if dd.is_zero() {
            return Ok(true);
        }
        for id in 0..self.algebra.table().len() as GenId {
            if !self.algebra.nprod(&dd, 0, &self.algebra.generator_state(id))?.is_zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn algebra(&self) -> &VertexAlgebra {
        &self.algebra
    }

    pub fn d(&self) -> &State {
        &self.d
    }

    pub fn render(&self, s: &State) -> String {
        self.algebra.render(s)
    }

    /// `d_(0) a`.
    pub fn apply_d(&self, a: &State) -> Result<State, BrstError> {
        Ok(self.algebra.nprod(&self.d, 0, a)?)
    }

    /// `d_(0) a` for `a` inside the window.
    pub fn apply_d_in(&self, a: &State, window: &TruncationWindow) -> Result<State, BrstError> {
        let t = self.algebra.table();
        for (m, _) in a.terms() {
            let cm = self.weigh(m)?;
            let ghost_ok = window.ghost_min <= cm.ghost && cm.ghost <= window.ghost_max;
            if cm.w > window.max_kazhdan || cm.conformal > window.max_conformal || !ghost_ok {
                return Err(BrstError::OutOfWindow(t.render_monomial(m)));
            }
        }
        self.apply_d(a)
    }

    fn factor_weights(&self, f: Factor) -> Result<(Rat, Rat), BrstError> {
        let g = self.algebra.table().get(f.id());
        if f.is_inverse() {
            return Err(BrstError::WindowNotClosed(format!("inverse of `{}` has no window grading", g.name)));
        }
        let p = Rat::from_integer(f.deriv().into());
        Ok((&g.kazhdan_weight / rat(2, 1) + &p, &g.conformal_weight + &p))
    }

    fn weigh(&self, m: &Monomial) -> Result<CellMonomial, BrstError> {
        let (mut w, mut c) = (Rat::zero(), Rat::zero());
        for f in m.factors() {
            let (a, b) = self.factor_weights(*f)?;
            w += a;
            c += b;
        }
        Ok(CellMonomial { mono: m.clone(), w, conformal: c, ghost: self.algebra.table().monomial_ghost(m) })
    }

    fn kazhdan_int(&self, m: &Monomial) -> Result<i32, BrstError> {
        let k = self.algebra.table().monomial_weight(m, GradingKind::Kazhdan);
        weight_int(&k).ok_or_else(|| BrstError::NotHomogeneous(format!("non-integral Kazhdan weight {}", k)))
    }

    /// The Kazhdan-invariant basis element `q^-K(m) m`.
    pub fn basis_state(&self, m: &Monomial) -> Result<State, BrstError> {
        let k = self.kazhdan_int(m)?;
        Ok(State::term(m.clone(), Scalar::q_pow(-k)).with_tag(self.algebra.id()))
    }

    /// Canonical monomials with `w <= max_w` and conformal weight
    /// `<= max_conformal`; every factor must have a positive weight.
    fn enumerate(&self, max_w: &Rat, max_conformal: &Rat) -> Result<Vec<CellMonomial>, BrstError> {
        let t = self.algebra.table();
        let mut cands: Vec<(Factor, Rat, Rat, bool)> = Vec::new();
        for id in 0..t.len() as GenId {
            let g = t.get(id);
            let mut p = 0u16;
            loop {
                let f = Factor::gen(id, p);
                let (w, c) = self.factor_weights(f)?;
                if w.is_negative() || c.is_negative() || (w.is_zero() && c.is_zero()) {
                    return Err(BrstError::WindowNotClosed(format!("`{}` has weights ({}, {}); cells are infinite", g.name, w, c)));
                }
                if &w > max_w || &c > max_conformal {
                    break;
                }
                cands.push((f, w, c, g.parity == Parity::Odd));
                p += 1;
            }
        }
        cands.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = Vec::new();
        let mut stack = Vec::new();
        fn rec(
            i: usize,
            cands: &[(Factor, Rat, Rat, bool)],
            w: Rat,
            c: Rat,
            max_w: &Rat,
            max_c: &Rat,
            stack: &mut Vec<Factor>,
            out: &mut Vec<(Vec<Factor>, Rat, Rat)>,
        ) {
            if i == cands.len() {
                out.push((stack.clone(), w, c));
                return;
            }
            rec(i + 1, cands, w.clone(), c.clone(), max_w, max_c, stack, out);
            let (f, fw, fc, odd) = &cands[i];
            let (mut w2, mut c2) = (w, c);
            let mut pushed = 0;
            loop {
                w2 += fw;
                c2 += fc;
                if &w2 > max_w || &c2 > max_c {
                    break;
                }
                stack.push(*f);
                pushed += 1;
                rec(i + 1, cands, w2.clone(), c2.clone(), max_w, max_c, stack, out);
                if *odd {
                    break;
                }
            }
            for _ in 0..pushed {
                stack.pop();
            }
        }
        let mut raw = Vec::new();
        rec(0, &cands, Rat::zero(), Rat::zero(), max_w, max_conformal, &mut stack, &mut raw);
        for (fs, w, c) in raw {
            let mono = Monomial::from_sorted(fs);
            let ghost = t.monomial_ghost(&mono);
            out.push(CellMonomial { mono, w, conformal: c, ghost });
        }
        Ok(out)
    }

    /// Coordinates of `d(q^-K(m) m)` in the invariant basis of the cell of weight `w`.
    fn image_vector(
        &self,
        m: &Monomial,
        w: &Rat,
        index: &mut HashMap<Monomial, usize>,
        order: &mut Vec<Monomial>,
    ) -> Result<SparseVec<RatFn>, BrstError> {
        let img = self.apply_d(&self.basis_state(m)?)?;
        let mut entries = Vec::new();
        for (m2, c) in img.terms() {
            let cm = self.weigh(m2)?;
            let k2 = self.kazhdan_int(m2)?;
            let bad = || BrstError::NotHomogeneous(format!("d({}) has term {}", self.algebra.table().render_monomial(m), self.algebra.table().render_monomial(m2)));
            if &cm.w != w {
                return Err(bad());
            }
            let (e, r) = c.as_monomial().ok_or_else(bad)?;
            if e != -k2 {
                return Err(bad());
            }
            let next = order.len();
            let idx = *index.entry(m2.clone()).or_insert_with(|| {
                order.push(m2.clone());
                next
            });
            entries.push((idx, r.clone()));
        }
        Ok(SparseVec::from_entries(entries))
    }

    /// Checks `d(d(b)) = 0` and homogeneity of `d(b)` on every basis
    /// element `b` of the window, plus `(d_(0))^2 = 0` as an operator.
    pub fn check_d_squared(&self, window: &TruncationWindow) -> Result<NilpotenceReport, BrstError> {
        let mut rep = NilpotenceReport {
            square_vanishes: self.algebra.nprod(&self.d, 0, &self.d)?.is_zero(),
            square_acts_trivially: self.square_acts_trivially()?,
            ..Default::default()
        };
        if window.is_empty() {
            return Ok(rep);
        }
        let t = self.algebra.table();
        for cm in self.enumerate(&window.max_kazhdan, &window.max_conformal)? {
            if cm.ghost < window.ghost_min || cm.ghost > window.ghost_max {
                continue;
            }
            let b = self.basis_state(&cm.mono)?;
            let db = self.apply_d(&b)?;
            let kz = t.grading(&db, GradingKind::Kazhdan);
            let gh = t.grading(&db, GradingKind::Ghost);
            let homogeneous = match (kz, gh) {
                (Ok(None), _) => true,
                (Ok(Some(GradeValue::Weight(k))), Ok(Some(GradeValue::Ghost(g)))) => k.is_zero() && g == cm.ghost + 1,
                _ => false,
            };
            if !homogeneous {
                rep.inhomogeneous.push(t.render_monomial(&cm.mono));
            }
            let ddb = self.apply_d(&db)?;
            if !ddb.is_zero() {
                rep.failures.push(format!("{}: {}", t.render_monomial(&cm.mono), self.render(&ddb)));
            }
            rep.checked += 1;
        }
        Ok(rep)
    }

    /// Dimensions and representatives of the images of `Z` (truncated at
    /// `n`) modulo `B` (truncated at `n_prime`) in each window cell.
    fn cohomology_at(&self, window: &TruncationWindow, n: &Rat, n_prime: &Rat) -> Result<Vec<CohomologyCell>, BrstError> {
        let all = self.enumerate(&window.max_kazhdan, n_prime)?;
        let mut cells: BTreeMap<(Rat, i32), Vec<CellMonomial>> = BTreeMap::new();
        for cm in all {
            cells.entry((cm.w.clone(), cm.ghost)).or_default().push(cm);
        }
        let mut weights: Vec<Rat> = cells.keys().map(|(w, _)| w.clone()).collect();
        weights.dedup();
        let mut out = Vec::new();
        for w in weights {
            for g in window.ghost_min..=window.ghost_max {
                let here: Vec<&CellMonomial> = cells.get(&(w.clone(), g)).map(|v| v.iter().collect()).unwrap_or_default();
                // Z: kernel of d on the truncated cell
                let src: Vec<&CellMonomial> = here.iter().copied().filter(|c| &c.conformal <= n).collect();
                let (mut up_index, mut up_order) = (HashMap::new(), Vec::new());
                let mut ker = Echelon::<RatFn>::new();
                let mut cycles = Vec::new();
                for cm in &src {
                    let v = self.image_vector(&cm.mono, &w, &mut up_index, &mut up_order)?;
                    if let Some(rel) = ker.insert(&v) {
                        cycles.push(rel);
                    }
                }
                // coordinates in this cell: source monomials first
                let mut index: HashMap<Monomial, usize> = HashMap::new();
                let mut order: Vec<Monomial> = Vec::new();
                for cm in &src {
                    index.insert(cm.mono.clone(), order.len());
                    order.push(cm.mono.clone());
                }
                let mut span = Echelon::<RatFn>::new();
                if let Some(below) = cells.get(&(w.clone(), g - 1)) {
                    for cm in below {
                        let v = self.image_vector(&cm.mono, &w, &mut index, &mut order)?;
                        span.insert(&v);
                    }
                }
                let mut reps = Vec::new();
                for z in cycles {
                    if span.insert(&z).is_none() {
                        let mut s = State::zero();
                        for (i, c) in z.entries() {
                            s.add_scaled(&self.basis_state(&order[*i])?, &Scalar::from_ratfn(c.clone()));
                        }
                        reps.push(s.with_tag(self.algebra.id()));
                    }
                }
                out.push(CohomologyCell {
                    kazhdan: w.clone(),
                    ghost: g,
                    dim: reps.len(),
                    representatives: reps.iter().map(|s| self.render(s)).collect(),
                    states: reps,
                });
            }
        }
        Ok(out)
    }

    /// Truncated cohomology per (Kazhdan weight, ghost number). Cycles are
    /// taken up to conformal weight `N = max_conformal`, boundaries up to
    /// `N + 2`; the result must agree with the `(N + 1, N + 3)` run.
    pub fn cohomology(&self, window: &TruncationWindow) -> Result<CohomologyReport, BrstError> {
        if window.is_empty() {
            return Ok(CohomologyReport { window: window.clone(), cells: Vec::new() });
        }
        let n = window.max_conformal.clone();
        let two = Rat::from_integer(2.into());
        let first = self.cohomology_at(window, &n, &(&n + &two))?;
        let n1 = &n + Rat::one();
        let second = self.cohomology_at(window, &n1, &(&n1 + &two))?;
        for a in &first {
            let b = second.iter().find(|b| b.kazhdan == a.kazhdan && b.ghost == a.ghost).map_or(0, |b| b.dim);
            if a.dim != b {
                return Err(BrstError::WindowNotClosed(format!(
                    "cell (w = {}, ghost = {}) has dimension {} at conformal bound {} and {} at {}",
                    a.kazhdan, a.ghost, a.dim, n, b, n1
                )));
            }
        }
        Ok(CohomologyReport { window: window.clone(), cells: first })
    }

    /// Matrix of `d` from the cell `(w, ghost)` truncated at `src_conformal`,
    /// in the invariant bases: columns are source monomials, rows are indexed
    /// by the returned target monomials.
    #[allow(clippy::type_complexity)]
    pub fn cell_matrix(&self, w: &Rat, ghost: i32, src_conformal: &Rat) -> Result<(Vec<Monomial>, Vec<Monomial>, Vec<SparseVec<RatFn>>), BrstError> {
        let src: Vec<Monomial> = self
            .enumerate(w, src_conformal)?
            .into_iter()
            .filter(|c| &c.w == w && c.ghost == ghost)
            .map(|c| c.mono)
            .collect();
        let (mut index, mut order) = (HashMap::new(), Vec::new());
        let cols = src.iter().map(|m| self.image_vector(m, w, &mut index, &mut order)).collect::<Result<Vec<_>, _>>()?;
        Ok((src, order, cols))
    }

    /// Standard conformal weight of a monomial.
    pub fn conformal_weight(&self, m: &Monomial) -> Result<Rat, BrstError> {
        Ok(self.weigh(m)?.conformal)
    }
}

/// Moves a state of the first tensor factor into the tensor product.
fn lift(s: &State, from: &VertexAlgebra, into: &VertexAlgebra) -> Result<State, BrstError> {
    from.admit(s)?;
    let mut t = s.clone();
    t.set_tag(0);
    into.admit(&t)?;
    Ok(t.with_tag(into.id()))
}

fn hbar_inv() -> Scalar {
    Scalar::hbar_pow(-1)
}

/// `sum_i (mu_i - hb^-1 chi_i) phis_i - 1/2 hb^-1 sum c_ij^k phi_k phis_i phis_j`
/// in `algebra`, with ghosts named after `labels`.
fn chiral_differential(
    algebra: &VertexAlgebra,
    lie: &LieData,
    linear: &[(String, State, Rat)],
    cubic_rows: &[usize],
    cubic_cols: &[usize],
) -> Result<State, BrstError> {
    let mut d = State::zero();
    for (label, mu, chi) in linear {
        let shifted = mu.sub(&State::scalar(hbar_inv().scale(chi)));
        d.add_assign(&algebra.normal_order(&[shifted, algebra.gen(&dual_ghost_name(label))?])?);
    }
    let name = |i: usize| lie.names()[i].clone();
    for (i, j, k, c) in structure_on(lie, cubic_rows, cubic_cols) {
        let t = algebra.normal_order(&[
            algebra.gen(&ghost_name(&name(cubic_cols[k])))?,
            algebra.gen(&dual_ghost_name(&name(cubic_rows[i])))?,
            algebra.gen(&dual_ghost_name(&name(cubic_rows[j])))?,
        ])?;
        d.add_scaled(&t, &hbar_inv().scale(&(-c / rat(2, 1))));
    }
    Ok(d.with_tag(algebra.id()))
}

/// Chiral differential on `matter ⊗ Cl_hb(m)`. Each moment's symbol,
/// `classical_image(hb * mu)`, must equal its classical moment.
pub fn build_dchi_chiral(matter: &VertexAlgebra, lie: &LieData, sub: &SubalgebraData, moments: &[Moment]) -> Result<BrstComplex, BrstError> {
    if !sub.is_character(lie) {
        return Err(BrstError::ChiNotCharacter);
    }
    if moments.len() != sub.len() {
        return Err(BrstError::MomentArity { expected: sub.len(), found: moments.len() });
    }
    let ql = matter.quasiclassical_limit()?;
    for (k, mo) in moments.iter().enumerate() {
        let sym = matter.classical_image(&mo.quantum.scale(&Scalar::hbar_pow(1)))?;
        if sym != mo.classical {
            return Err(BrstError::MomentSymbolMismatch {
                generator: lie.names()[sub.basis[k]].clone(),
                found: ql.render(&sym),
                expected: ql.render(&mo.classical),
            });
        }
    }
    let labels: Vec<&str> = sub.basis.iter().map(|&i| lie.names()[i].as_str()).collect();
    let ad_h: Vec<Rat> = sub.basis.iter().map(|&i| lie.ad_h_weight(i).cloned().unwrap_or_else(Rat::zero)).collect();
    let ghosts = clifford_hbar(&labels, &ad_h, &identity_pairing(labels.len()))?;
    let algebra = VertexAlgebra::tensor(&format!("{}⊗Cl_hb", matter.name()), &[matter, &ghosts])?;
    let linear = labels
        .iter()
        .zip(moments)
        .zip(&sub.chi)
        .map(|((l, mo), chi)| Ok((l.to_string(), lift(&mo.quantum, matter, &algebra)?, chi.clone())))
        .collect::<Result<Vec<_>, BrstError>>()?;
    let d = chiral_differential(&algebra, lie, &linear, &sub.basis, &sub.basis)?;
    BrstComplex::new(&format!("m-complex({})", lie.name()), algebra, d)
}

/// Moments `hb^-1 m_i` of `V^k(g)_hb` with classical moments the coordinates `m_i`.
pub fn affine_moments(matter: &VertexAlgebra, lie: &LieData, sub: &SubalgebraData) -> Result<Vec<Moment>, BrstError> {
    sub.basis
        .iter()
        .map(|&i| {
            let name = &lie.names()[i];
            let id = matter.table().id(name).map_err(VertexError::from)?;
            Ok(Moment {
                quantum: matter.gen(name)?.scale(&hbar_inv()),
                classical: JetPoly::var(JetVar { id, deriv: 0, odd: false }),
            })
        })
        .collect()
}

/// The m-complex `V^k(g)_hb ⊗ Cl_hb(m)` with its affine moment.
pub fn m_complex(lie: &LieData, sub: &SubalgebraData, level: &Scalar) -> Result<BrstComplex, BrstError> {
    let matter = affine_vk_hbar(lie, level)?;
    let moments = affine_moments(&matter, lie, sub)?;
    build_dchi_chiral(&matter, lie, sub, &moments)
}

/// Principal sl_2 complex at the given level: `m = C e`, `chi(e) = 1`.
pub fn sl2_principal(level: &Scalar) -> Result<BrstComplex, BrstError> {
    let lie = crate::algebras::lie_sl(2)?;
    let sub = SubalgebraData::graded(&lie, 1)?;
    m_complex(&lie, &sub, level)
}

/// Compares the chiral differential with the classical one: the symbol of
/// `hb d` and the symbols of `d_(0) a` on generators. Generator tables must
/// list the same names in the same order. Returns the mismatches.
pub fn quasiclassical_mismatches(chiral: &BrstComplex, classical: &ClassicalComplex) -> Result<Vec<String>, BrstError> {
    let va = chiral.algebra();
    let same = va.table().len() == classical.pva().table().len()
        && va.table().generators().iter().zip(classical.pva().table().generators()).all(|(a, b)| a.name == b.name);
    if !same {
        return Err(BrstError::Vertex(VertexError::IncompatibleAlgebras));
    }
    let mut out = Vec::new();
    let lim = va.classical_image(&chiral.d().scale(&Scalar::hbar_pow(1)))?;
    if &lim != classical.d() {
        out.push(format!("d: {} vs {}", classical.render(&lim), classical.render(classical.d())));
    }
    for id in 0..va.table().len() as GenId {
        let a = va.generator_state(id);
        let chiral_img = va.classical_image(&chiral.apply_d(&a)?)?;
        let odd = va.table().get(id).parity.is_odd();
        let cl = classical.apply_d(&JetPoly::var(JetVar { id, deriv: 0, odd }));
        if chiral_img != cl {
            out.push(format!("d({}): {} vs {}", va.table().get(id).name, classical.render(&chiral_img), classical.render(&cl)));
        }
    }
    Ok(out)
}

/// Kazhdan-weight-0 part of each state (`q` has weight 1); zero parts are dropped.
pub fn kazhdan_invariants(algebra: &VertexAlgebra, states: &[State]) -> Vec<State> {
    let t = algebra.table();
    states
        .iter()
        .filter_map(|s| {
            let mut out = State::zero();
            for (m, c) in s.terms() {
                if let Some(k) = weight_int(&t.monomial_weight(m, GradingKind::Kazhdan)) {
                    let part = c.project(-k);
                    if !part.is_zero() {
                        out.add_term(m.clone(), part);
                    }
                }
            }
            (!out.is_zero()).then(|| out.with_tag(s.tag()))
        })
        .collect()
}

/// Darboux basis `(l_a, l'_a)` of `g_1` for `omega(u, v) = (f | [u, v])`,
/// as coordinate vectors with `omega(l_a, l'_b) = delta_ab`.
fn darboux(lie: &LieData) -> Result<(Vec<Vec<Rat>>, Vec<Vec<Rat>>), BrstError> {
    let t = lie.triple().ok_or_else(|| BrstError::NoGrading(lie.name().to_string()))?;
    let g1 = lie.graded_exactly(1);
    if g1.len() % 2 == 1 {
        return Err(BrstError::OddDimG1(g1.len()));
    }
    let f = lie.unit(t.f);
    let omega = |x: &[Rat], y: &[Rat]| lie.form_coords(&f, &lie.bracket_coords(x, y));
    let axpy = |x: &[Rat], c: &Rat, y: &[Rat]| -> Vec<Rat> { x.iter().zip(y).map(|(a, b)| a + c * b).collect() };
    let mut rest: Vec<Vec<Rat>> = g1.iter().map(|&i| lie.unit(i)).collect();
    let (mut ls, mut lps) = (Vec::new(), Vec::new());
    while let Some(u) = rest.first().cloned() {
        let pos = (1..rest.len())
            .find(|&p| !omega(&u, &rest[p]).is_zero())
            .ok_or_else(|| AlgebraError::InvalidLieData("degenerate form on g_1".to_string()))?;
        let scale = omega(&u, &rest[pos]).recip();
        let v: Vec<Rat> = rest[pos].iter().map(|a| a * &scale).collect();
        let others: Vec<Vec<Rat>> = rest
            .iter()
            .enumerate()
            .filter(|(p, _)| *p != 0 && *p != pos)
            .map(|(_, x)| {
                let x1 = axpy(x, &-omega(x, &v), &u);
                axpy(&x1, &omega(x, &u), &v)
            })
            .collect();
        ls.push(u);
        lps.push(v);
        rest = others;
    }
    Ok((ls, lps))
}

/// Number of βγ pairs, `dim g_1 / 2`.
pub fn krw_rank(lie: &LieData) -> Result<usize, BrstError> {
    Ok(darboux(lie)?.0.len())
}

/// Positions of a grading piece, with names and ad_h weights.
fn graded_labels(lie: &LieData, idx: &[usize]) -> (Vec<String>, Vec<Rat>) {
    (
        idx.iter().map(|&i| lie.names()[i].clone()).collect(),
        idx.iter().map(|&i| lie.ad_h_weight(i).cloned().unwrap_or_else(Rat::zero)).collect(),
    )
}

/// Kac-Roan-Wakimoto complex `V^k(g)_hb ⊗ D_hb(C^r) ⊗ Cl_hb(g_{>=1})` with
/// `Q = sum_{g>=1} hb^-1 (u_i - Phi_i) phis_i - 1/2 hb^-1 sum c phi phis phis`.
/// `Phi` is `x_a` on `l_a`, `d_a` on `l'_a` and `(f|u)` on `g_{>=2}`.
pub fn krw_complex(lie: &LieData, level: &Scalar) -> Result<BrstComplex, BrstError> {
    krw_complex_signed(lie, level, 1)
}

/// KRW complex with `Phi(l'_a) = sign * d_a`; only `sign = 1` is nilpotent.
pub fn krw_complex_signed(lie: &LieData, level: &Scalar, sign: i64) -> Result<BrstComplex, BrstError> {
    let (ls, lps) = darboux(lie)?;
    let r = ls.len();
    let t = lie.triple().ok_or_else(|| BrstError::NoGrading(lie.name().to_string()))?;
    let half = rat(1, 2);
    let gens = ChartGenerators {
        xs: (1..=r).map(|a| Generator::even(&format!("x{}", a)).with_conformal(half.clone()).with_kazhdan(Rat::one())).collect(),
        ds: (1..=r).map(|a| Generator::even(&format!("d{}", a)).with_conformal(half.clone()).with_kazhdan(Rat::one())).collect(),
    };
    let bg = betagamma_chart_with(&gens, None, true, &[])?;
    let affine = affine_vk_hbar(lie, level)?;
    let pos = lie.graded_at_least(1);
    let (labels, ad_h) = graded_labels(lie, &pos);
    let label_refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    let ghosts = clifford_hbar(&label_refs, &ad_h, &identity_pairing(labels.len()))?;
    let algebra = VertexAlgebra::tensor(&format!("KRW({})", lie.name()), &[&affine, &bg, &ghosts])?;
    let f = lie.unit(t.f);
    let omega = |x: &[Rat], y: &[Rat]| lie.form_coords(&f, &lie.bracket_coords(x, y));
    let mut linear = Vec::new();
    for (label, &i) in labels.iter().zip(&pos) {
        let u = lie.unit(i);
        let current = lift(&affine.gen(label)?, &affine, &algebra)?.scale(&hbar_inv());
        let phi = if lie.ad_h_weight(i) == Some(&Rat::one()) {
            let mut s = State::zero();
            for a in 0..r {
                s.add_scaled(&algebra.gen(&format!("x{}", a + 1))?, &Scalar::from_rat(omega(&u, &lps[a])));
                s.add_scaled(&algebra.gen(&format!("d{}", a + 1))?, &Scalar::from_rat(-omega(&u, &ls[a]) * Rat::from_integer(sign.into())));
            }
            s.scale(&hbar_inv())
        } else {
            State::zero()
        };
        // the g_{>=2} part of Phi is the constant chi, subtracted below
        linear.push((label.clone(), current.sub(&phi).with_tag(algebra.id()), lie.form(t.f, i).clone()));
    }
    let d = chiral_differential(&algebra, lie, &linear, &pos, &pos)?;
    BrstComplex::new(&format!("KRW({})", lie.name()), algebra, d)
}

/// Intermediate complex `V^k(g)_hb ⊗ Cl(g*_{>=1}, g_{>=2})`: dual ghosts
/// for `g_{>=1}`, ghosts for `g_{>=2}`, `phis_i (0) phi_j = hb delta_ij`.
pub fn intermediate_complex(lie: &LieData, level: &Scalar) -> Result<BrstComplex, BrstError> {
    let t = lie.triple().ok_or_else(|| BrstError::NoGrading(lie.name().to_string()))?;
    let v_idx = lie.graded_at_least(1);
    let w_idx = lie.graded_at_least(2);
    let (v_labels, v_ad) = graded_labels(lie, &v_idx);
    let (w_labels, w_ad) = graded_labels(lie, &w_idx);
    let two = Rat::from_integer(2.into());
    let v: Vec<Generator> = v_labels
        .iter()
        .zip(&v_ad)
        .map(|(l, j)| Generator::odd(&dual_ghost_name(l)).with_ghost(1).with_kazhdan(j.clone()).with_ad_h(-j))
        .collect();
    let w: Vec<Generator> = w_labels
        .iter()
        .zip(&w_ad)
        .map(|(l, j)| Generator::odd(&ghost_name(l)).with_ghost(-1).with_conformal(Rat::one()).with_kazhdan(&two - j).with_ad_h(j.clone()))
        .collect();
    let pairing: Vec<Vec<Rat>> = v_idx.iter().map(|a| w_idx.iter().map(|b| if a == b { Rat::one() } else { Rat::zero() }).collect()).collect();
    let scl = skewed_clifford_with(v, w, &pairing)?;
    let w_names: Vec<String> = w_labels.iter().map(|l| ghost_name(l)).collect();
    let scales: Vec<(&str, i32)> = w_names.iter().map(|n| (n.as_str(), 2)).collect();
    let scl = scl.rescale_hbar("SCl_hb", &scales)?;
    let affine = affine_vk_hbar(lie, level)?;
    let algebra = VertexAlgebra::tensor(&format!("V({})_hb⊗SCl_hb", lie.name()), &[&affine, &scl])?;
    let linear = v_labels
        .iter()
        .zip(&v_idx)
        .map(|(l, &i)| Ok((l.clone(), lift(&affine.gen(l)?, &affine, &algebra)?.scale(&hbar_inv()), lie.form(t.f, i).clone())))
        .collect::<Result<Vec<_>, BrstError>>()?;
    let d = chiral_differential(&algebra, lie, &linear, &v_idx, &w_idx)?;
    BrstComplex::new(&format!("intermediate({})", lie.name()), algebra, d)
}

/// Outcome of `phi ∘ d_source = d_target ∘ phi` on generators and on all
/// normally ordered products of two generators.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ChainMapReport {
    pub name: String,
    pub checked: usize,
    pub failures: Vec<String>,
}

impl ChainMapReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks a substitution `source.algebra -> target.algebra` given on
/// generators for the morphism property and the chain-map identity.
pub fn chain_map_check(name: &str, source: &BrstComplex, target: &BrstComplex, images: &[(String, State)]) -> Result<ChainMapReport, BrstError> {
    let refs: Vec<(&str, State)> = images.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
    let phi = Substitution::new(source.algebra(), target.algebra(), &refs, &[])?;
    let res = phi.residuals()?;
    if let Some(r) = res.first() {
        return Err(BrstError::NotAMorphism(format!("{}_({}){}: {}", r.a, r.n, r.b, target.render(&r.residual))));
    }
    let sa = source.algebra();
    let gens: Vec<State> = (0..sa.table().len() as GenId).map(|i| sa.generator_state(i)).collect();
    let mut samples: Vec<State> = gens.clone();
    for a in &gens {
        for b in &gens {
            let s = sa.normal_order(&[a.clone(), b.clone()])?;
            if !s.is_zero() {
                samples.push(s);
            }
        }
    }
    let mut rep = ChainMapReport { name: name.to_string(), ..Default::default() };
    for s in &samples {
        let lhs = phi.apply(&source.apply_d(s)?)?;
        let rhs = target.apply_d(&phi.apply(s)?)?;
        let r = lhs.sub(&rhs);
        if !r.is_zero() {
            rep.failures.push(format!("{}: {}", source.render(s), target.render(&r)));
        }
        rep.checked += 1;
    }
    Ok(rep)
}

/// Generator images of the intermediate complex: currents and `phi` to
/// themselves, `phis_X` to `phis_X` when `X` is a target generator, else 0.
fn intermediate_images(source: &BrstComplex, target: &BrstComplex) -> Result<Vec<(String, State)>, BrstError> {
    let ta = target.algebra();
    source
        .algebra()
        .table()
        .generators()
        .iter()
        .map(|g| {
            let img = match ta.table().id(&g.name) {
                Ok(id) => ta.generator_state(id),
                Err(_) if g.name.starts_with("phis_") => State::zero(),
                Err(e) => return Err(BrstError::NotAMorphism(e.to_string())),
            };
            Ok((g.name.clone(), img))
        })
        .collect()
}

/// Intermediate complex into the m-complex of `m = l ⊕ g_{>=2}`.
pub fn chain_map_to_m_complex(lie: &LieData, lagrangian: &[&str], level: &Scalar) -> Result<ChainMapReport, BrstError> {
    let source = intermediate_complex(lie, level)?;
    let sub = SubalgebraData::lagrangian(lie, lagrangian)?;
    let target = m_complex(lie, &sub, level)?;
    let images = intermediate_images(&source, &target)?;
    chain_map_check("intermediate -> m-complex", &source, &target, &images)
}

/// Intermediate complex into the KRW complex.
pub fn chain_map_to_krw(lie: &LieData, level: &Scalar) -> Result<ChainMapReport, BrstError> {
    let source = intermediate_complex(lie, level)?;
    let target = krw_complex(lie, level)?;
    let images = intermediate_images(&source, &target)?;
    chain_map_check("intermediate -> KRW", &source, &target, &images)
}

/// `{m_i - chi_i, inv}` in the ideal generated by the `m_j - chi_j`.
#[derive(Clone, Debug, Serialize)]
pub struct CocycleCheck {
    pub invariant: String,
    pub generator: String,
    pub bracket: String,
    pub cofactors: Vec<String>,
    pub routes_agree: bool,
    pub pass: bool,
}

/// Cofactors `a_j` of degree `<= max_degree - deg g_j` with
/// `p = sum_j a_j g_j`, in the even non-derivative coordinates `0..nvars`.
pub fn ideal_membership(p: &JetPoly, gens: &[JetPoly], nvars: usize, max_degree: u32) -> Option<Vec<JetPoly>> {
    fn monomials(nvars: usize, max_degree: u32) -> Vec<JetPoly> {
        let mut out = vec![JetPoly::one()];
        let mut layer = vec![(JetPoly::one(), 0usize)];
        for _ in 0..max_degree {
            let mut next = Vec::new();
            for (m, start) in &layer {
                for v in *start..nvars {
                    let x = m.mul(&JetPoly::var(JetVar { id: v as GenId, deriv: 0, odd: false }));
                    out.push(x.clone());
                    next.push((x, v));
                }
            }
            layer = next;
        }
        out
    }
    let degree = |q: &JetPoly| q.terms().map(|(m, _)| m.factors().iter().map(|(_, e)| *e).sum::<i32>()).max().unwrap_or(0);
    let mut index: HashMap<JetMono, usize> = HashMap::new();
    let mut to_vec = |q: &JetPoly| -> Option<SparseVec<Rat>> {
        let mut entries = Vec::new();
        for (m, c) in q.terms() {
            let n = index.len();
            let i = *index.entry(m.clone()).or_insert(n);
            entries.push((i, c.as_rat()?));
        }
        Some(SparseVec::from_entries(entries))
    };
    let mut cols = Vec::new();
    let mut labels = Vec::new();
    for (j, g) in gens.iter().enumerate() {
        let dg = degree(g);
        if dg as u32 > max_degree {
            continue;
        }
        for m in monomials(nvars, max_degree - dg as u32) {
            cols.push(to_vec(&m.mul(g))?);
            labels.push((j, m));
        }
    }
    let target = to_vec(p)?;
    let sol = crate::linalg::solve(&cols, &target)?;
    let mut cof = vec![JetPoly::zero(); gens.len()];
    for (k, c) in sol.entries() {
        let (j, m) = &labels[*k];
        cof[*j] = cof[*j].add(&m.scale(&Scalar::from_rat(c.clone())));
    }
    Some(cof)
}

/// Cocycle checks for `delta`, `gamma`, `beta_inv` on sl_3 with
/// `m = <E12, E13>`, `chi = (1, 0)`. The bracket is computed twice: by the
/// Kostant-Kirillov bracket and as the `phis_i` coefficient of
/// `(d_chi)_(0) inv` in the classical complex.
pub fn slice_cocycle_checks(max_degree: u32) -> Result<Vec<CocycleCheck>, BrstError> {
    let slice = crate::w23::SliceData::new().map_err(|e| BrstError::Slice(e.to_string()))?;
    let lie = slice.lie().clone();
    let kk = lie.kostant_kirillov()?;
    let sub = SubalgebraData::lagrangian(&lie, &["E13"])?;
    let complex = build_dchi_classical(&lie, &sub)?;
    let n = lie.dim();
    let coord = |i: usize| JetPoly::var(JetVar { id: i as GenId, deriv: 0, odd: false });
    let gens: Vec<JetPoly> = sub.basis.iter().zip(&sub.chi).map(|(&i, c)| coord(i).sub(&JetPoly::constant(Scalar::from_rat(c.clone())))).collect();
    let invariants = [
        ("delta", slice.delta().map_err(|e| BrstError::Slice(e.to_string()))?),
        ("gamma", slice.gamma().map_err(|e| BrstError::Slice(e.to_string()))?),
        ("beta_inv", slice.beta_inv().map_err(|e| BrstError::Slice(e.to_string()))?),
    ];
    let r = sub.len();
    let mut out = Vec::new();
    for (name, inv) in &invariants {
        let dinv = complex.apply_d(inv);
        for (k, g) in gens.iter().enumerate() {
            let bracket = kk.bracket(g, inv);
            let target = n + r + k;
            let coeff = dinv
                .substitute(&|v: JetVar| {
                    if v.odd {
                        if v.id as usize == target && v.deriv == 0 {
                            JetPoly::one()
                        } else {
                            JetPoly::zero()
                        }
                    } else {
                        JetPoly::var(v)
                    }
                })
                .unwrap_or_else(JetPoly::zero);
            let routes_agree = coeff == bracket;
            let member = ideal_membership(&bracket, &gens, n, max_degree);
            out.push(CocycleCheck {
                invariant: name.to_string(),
                generator: lie.names()[sub.basis[k]].clone(),
                bracket: bracket.render(kk.table()),
                cofactors: member.as_ref().map(|c| c.iter().map(|p| p.render(kk.table())).collect()).unwrap_or_default(),
                routes_agree,
                pass: routes_agree && member.is_some(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
