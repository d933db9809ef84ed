//! The Bershadsky-Polyakov algebra: its presentation at general level, the
//! critical-level βγ realization on the resolved slice, the quantized
//! singularity relation, classical limits and the sl_3 slice computations.

use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::algebras::{lie_sl, AlgebraError, LieData};
use crate::charts::{build_slodowy_atlas, ChartAtlas, ChartError, Localization};
use crate::poisson::{JetPoly, JetVar, PoissonError};
use crate::scalar::{rat, rat_int, Rat, Scalar, ScalarError};
use crate::state::{Expr, Factor, GenId, GeneratorTable, Generator, GradeValue, GradingKind, Monomial, State};
use crate::vertex::{Substitution, VertexAlgebra, VertexError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum W23Error {
    #[error(transparent)]
    Vertex(#[from] VertexError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("poisson: {0}")]
    Poisson(String),
    #[error("slice computation: {0}")]
    Slice(String),
}

impl From<PoissonError> for W23Error {
    fn from(e: PoissonError) -> Self {
        W23Error::Poisson(e.to_string())
    }
}

pub const GENERATORS: [&str; 4] = ["J", "G+", "G-", "S"];

/// `a*k + b`.
fn lin(a: i64, b: i64) -> Scalar {
    Scalar::k().scale_int(a).add(&Scalar::from_int(b))
}

/// The presented algebra on `J, G+, G-, S` (all even; conformal weights
/// 1, 3/2, 3/2, 2) at symbolic `k` or at a rational specialization.
pub struct W23Presentation {
    algebra: VertexAlgebra,
    level: Option<Rat>,
}

impl W23Presentation {
    pub fn algebra(&self) -> &VertexAlgebra {
        &self.algebra
    }

    pub fn level(&self) -> Option<&Rat> {
        self.level.as_ref()
    }

    pub fn field(&self, name: &str) -> Result<State, W23Error> {
        Ok(self.algebra.gen(name)?)
    }

    /// Generator triples whose Borcherds identity fails for some
    /// `(m, n, k)` in `range^3`.
    pub fn borcherds_failures(&self, range: std::ops::RangeInclusive<i64>) -> Result<Vec<String>, W23Error> {
        let va = &self.algebra;
        let gens: Vec<State> = GENERATORS.iter().map(|g| va.gen(g)).collect::<Result<_, _>>()?;
        let mut out = Vec::new();
        for (ia, a) in gens.iter().enumerate() {
            for (ib, b) in gens.iter().enumerate() {
                for (ic, c) in gens.iter().enumerate() {
                    for m in range.clone() {
                        for n in range.clone() {
                            for k in range.clone() {
                                let (ok, r) = va.check_borcherds(a, b, c, m, n, k)?;
                                if !ok {
                                    out.push(format!(
                                        "({}, {}, {}) at (m, n, k) = ({}, {}, {}): {}",
                                        GENERATORS[ia],
                                        GENERATORS[ib],
                                        GENERATORS[ic],
                                        m,
                                        n,
                                        k,
                                        va.render(&r)
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Builds the presentation; `level = None` keeps `k` symbolic.
pub fn w23_presentation(level: Option<&Rat>) -> Result<W23Presentation, W23Error> {
    let gens = [
        Generator::even("J").with_conformal(rat_int(1)),
        Generator::even("G+").with_conformal(rat(3, 2)),
        Generator::even("G-").with_conformal(rat(3, 2)),
        Generator::even("S").with_conformal(rat_int(2)),
    ];
    let table = GeneratorTable::new(gens.to_vec()).map_err(VertexError::from)?;
    let g = |name: &str| -> Result<State, W23Error> {
        Ok(State::monomial(Monomial::single(Factor::gen(table.id(name).map_err(VertexError::from)?, 0))))
    };
    let dg = |name: &str| -> Result<State, W23Error> {
        Ok(State::monomial(Monomial::single(Factor::gen(table.id(name).map_err(VertexError::from)?, 1))))
    };
    let one = State::vacuum();
    let kp3 = lin(1, 3);
    let kp1 = lin(1, 1);
    let tkp3 = lin(2, 3);
    let jj = {
        let j = table.id("J").map_err(VertexError::from)?;
        State::monomial(Monomial::from_sorted(vec![Factor::gen(j, 0), Factor::gen(j, 0)]))
    };
    let s_central = kp3.mul(&tkp3).mul(&lin(3, 1)).scale(&rat(-1, 2));
    let gpgm0 = jj.scale_int(3).add(&dg("J")?.scale(&kp1.scale(&rat(3, 2)))).sub(&g("S")?);
    let entries: Vec<(&str, &str, Vec<State>)> = vec![
        ("J", "J", vec![State::zero(), one.scale(&tkp3.scale(&rat(1, 3)))]),
        ("G+", "G+", vec![]),
        ("G-", "G-", vec![]),
        ("J", "G+", vec![g("G+")?]),
        ("J", "G-", vec![g("G-")?.neg()]),
        ("S", "S", vec![dg("S")?.scale(&kp3), g("S")?.scale(&kp3.scale_int(2)), State::zero(), one.scale(&s_central)]),
        ("S", "G+", vec![dg("G+")?.scale(&kp3), g("G+")?.scale(&kp3.scale(&rat(3, 2)))]),
        ("S", "G-", vec![dg("G-")?.scale(&kp3), g("G-")?.scale(&kp3.scale(&rat(3, 2)))]),
        ("S", "J", vec![dg("J")?.scale(&kp3), g("J")?.scale(&kp3)]),
        ("G+", "G-", vec![gpgm0, g("J")?.scale(&kp1.scale_int(3)), one.scale(&kp1.mul(&tkp3))]),
    ];
    let mut b = VertexAlgebra::builder("W3(2)");
    for gen in gens {
        b = b.generator(gen);
    }
    for (x, y, vals) in entries {
        let vals = match level {
            None => vals,
            Some(k0) => vals.iter().map(|s| s.map_coeffs(|c| c.specialize_k(k0))).collect::<Result<Vec<_>, _>>()?,
        };
        b = b.products(x, y, vals);
    }
    Ok(W23Presentation { algebra: b.build()?, level: level.cloned() })
}

/// `J, G+, G-` as states of the plain chart `U_2`, with the atlas.
pub struct W23Realization {
    atlas: ChartAtlas,
    j: State,
    g_plus: State,
    g_minus: State,
}

/// Builds `J = -hb^-1 :x2 d2:`, `G+ = -hb^-2 (:x2 d2 d2: - 2hb D(d2))`,
/// `G- = -hb^-1 (:x2 x2 d2: + 2hb D(x2))`.
pub fn w23_realization() -> Result<W23Realization, W23Error> {
    let atlas = build_slodowy_atlas()?;
    let u2 = atlas.chart(2)?.algebra(Localization::None);
    let hb = Scalar::hbar_pow(1);
    let (x, d) = (Expr::gen("x2"), Expr::gen("d2"));
    let j = u2.normal_form(&Expr::times(Scalar::hbar_pow(-1).neg(), Expr::no(vec![x.clone(), d.clone()])))?;
    let g_plus = u2.normal_form(&Expr::times(
        Scalar::hbar_pow(-2).neg(),
        Expr::Sum(vec![Expr::no(vec![x.clone(), d.clone(), d.clone()]), Expr::times(hb.scale_int(-2), d.clone().d(1))]),
    ))?;
    let g_minus = u2.normal_form(&Expr::times(
        Scalar::hbar_pow(-1).neg(),
        Expr::Sum(vec![Expr::no(vec![x.clone(), x.clone(), d]), Expr::times(hb.scale_int(2), x.d(1))]),
    ))?;
    Ok(W23Realization { atlas, j, g_plus, g_minus })
}

/// One compared product `a_(n) b`.
#[derive(Clone, Debug, Serialize)]
pub struct ProductCheck {
    pub a: String,
    pub b: String,
    pub n: u32,
    pub expected: String,
    pub computed: String,
    pub pass: bool,
}

/// A field carried through one transition.
#[derive(Clone, Debug, Serialize)]
pub struct TransportCheck {
    pub field: String,
    pub transition: String,
    pub image: String,
    pub expected: Option<String>,
    pub regular: bool,
    pub pass: bool,
}

impl W23Realization {
    pub fn atlas(&self) -> &ChartAtlas {
        &self.atlas
    }

    /// The plain chart `U_2` holding the fields.
    pub fn algebra(&self) -> &VertexAlgebra {
        self.atlas.chart(2).expect("atlas has U2").algebra(Localization::None)
    }

    pub fn j(&self) -> &State {
        &self.j
    }

    pub fn g_plus(&self) -> &State {
        &self.g_plus
    }

    pub fn g_minus(&self) -> &State {
        &self.g_minus
    }

    pub fn fields(&self) -> [(&'static str, &State); 3] {
        [("J", &self.j), ("G+", &self.g_plus), ("G-", &self.g_minus)]
    }

    fn field(&self, name: &str) -> &State {
        match name {
            "J" => &self.j,
            "G+" => &self.g_plus,
            _ => &self.g_minus,
        }
    }

    /// The critical table in terms of the realized fields, pole by pole.
    fn critical_table(&self) -> Result<Vec<(&'static str, &'static str, Vec<State>)>, W23Error> {
        let va = self.algebra();
        let j = &self.j;
        let jj = va.nprod(j, -1, j)?;
        let dj = va.derivative(j)?;
        Ok(vec![
            ("J", "J", vec![State::zero(), State::scalar(Scalar::from_int(-1))]),
            ("J", "G+", vec![self.g_plus.clone()]),
            ("J", "G-", vec![self.g_minus.neg()]),
            ("G+", "G+", vec![]),
            ("G-", "G-", vec![]),
            ("G+", "G-", vec![jj.scale_int(3).sub(&dj.scale_int(3)), j.scale_int(-6), State::scalar(Scalar::from_int(6))]),
        ])
    }

    /// The realized OPEs against the critical table.
    pub fn ope_checks(&self) -> Result<Vec<ProductCheck>, W23Error> {
        let va = self.algebra();
        let mut out = Vec::new();
        for (a, b, expected) in self.critical_table()? {
            let computed = va.ope_list(self.field(a), self.field(b))?;
            for n in 0..expected.len().max(computed.len()) {
                let e = expected.get(n).cloned().unwrap_or_else(State::zero);
                let c = computed.get(n).cloned().unwrap_or_else(State::zero);
                out.push(ProductCheck {
                    a: a.to_string(),
                    b: b.to_string(),
                    n: n as u32,
                    expected: va.render(&e),
                    computed: va.render(&c),
                    pass: c.sub(&e).is_zero(),
                });
            }
        }
        Ok(out)
    }

    /// Kazhdan weight of each field.
    pub fn kazhdan_weights(&self) -> Vec<(String, Option<Rat>)> {
        let t = self.algebra().table();
        self.fields()
            .iter()
            .map(|(n, s)| {
                let w = match t.grading(s, GradingKind::Kazhdan) {
                    Ok(Some(GradeValue::Weight(w))) => Some(w),
                    _ => None,
                };
                (n.to_string(), w)
            })
            .collect()
    }

    /// Transports every field to `U_1` and `U_3`; images must be free of
    /// inverted coordinates, and `G+`, `G-` must become `-hb^-2 d1`,
    /// `-hb^-1 x3`.
    pub fn transport_checks(&self) -> Result<Vec<TransportCheck>, W23Error> {
        let u2 = self.algebra();
        let mut out = Vec::new();
        for (tname, target_chart) in [("U2->U1", 1usize), ("U2->U3", 3usize)] {
            let t = self.atlas.transition(tname)?;
            let tgt = self.atlas.target_algebra(t);
            for (fname, s) in self.fields() {
                let image = self.atlas.transport(tname, s, u2)?;
                let regular = image.monomials().all(|m| !m.has_inverse());
                let expected = match (fname, target_chart) {
                    ("G+", 1) => Some(tgt.gen("d1")?.scale(&Scalar::hbar_pow(-2).neg())),
                    ("G-", 3) => Some(tgt.gen("x3")?.scale(&Scalar::hbar_pow(-1).neg())),
                    _ => None,
                };
                let pass = regular && expected.as_ref().is_none_or(|e| image.sub(e).is_zero());
                out.push(TransportCheck {
                    field: fname.to_string(),
                    transition: tname.to_string(),
                    image: tgt.render(&image),
                    expected: expected.map(|e| tgt.render(&e)),
                    regular,
                    pass,
                });
            }
        }
        Ok(out)
    }
}

/// Comparison of the realization with the presentation at `k = -3`, `S = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct CriticalMatchReport {
    pub checks: Vec<ProductCheck>,
}

impl CriticalMatchReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn mismatches(&self) -> Vec<&ProductCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Maps `J, G+, G-, S` to the realized fields and `0` and compares every
/// singular product of the critical presentation with that of the images.
pub fn verify_critical_match(r: &W23Realization) -> Result<CriticalMatchReport, W23Error> {
    let p = w23_presentation(Some(&rat_int(-3)))?;
    let src = p.algebra();
    let tgt = r.algebra();
    let images = [("J", r.j.clone()), ("G+", r.g_plus.clone()), ("G-", r.g_minus.clone()), ("S", State::zero())];
    let sub = Substitution::new(src, tgt, &images, &[])?;
    let mut checks = Vec::new();
    for a in GENERATORS {
        for b in GENERATORS {
            let (ia, ib) = (src.table().id(a).map_err(VertexError::from)?, src.table().id(b).map_err(VertexError::from)?);
            let presented = src.table_products(ia, ib);
            let computed = tgt.ope_list(sub.image_of(a)?, sub.image_of(b)?)?;
            for n in 0..presented.len().max(computed.len()) {
                let e = match presented.get(n) {
                    Some(s) => sub.apply(&s.clone().with_tag(src.id()))?,
                    None => State::zero(),
                };
                let c = computed.get(n).cloned().unwrap_or_else(State::zero);
                checks.push(ProductCheck {
                    a: a.to_string(),
                    b: b.to_string(),
                    n: n as u32,
                    expected: presented.get(n).map(|s| src.render(s)).unwrap_or_else(|| "0".to_string()),
                    computed: tgt.render(&c),
                    pass: c.sub(&e).is_zero(),
                });
            }
        }
    }
    Ok(CriticalMatchReport { checks })
}

/// `:Ĵ^3: + :Ĝ+ Ĝ-: - 3/2 hb D(:Ĵ^2:) + hb^2 DĴ` in `U_2` and its symbols,
/// plus the conformally homogeneous variant with `hb^2 D^2 Ĵ`.
#[derive(Clone, Debug, Serialize)]
pub struct RelationReport {
    pub residual: String,
    pub residual_zero: bool,
    pub second_derivative_residual: String,
    pub second_derivative_holds: bool,
    /// hb^0 part of `:Ĵ^3: + :Ĝ+ Ĝ-:` equals `h^3 - ab` at `h = Ĵ, a = Ĝ+, b = -Ĝ-`.
    pub symbol_matches: bool,
    /// `h^3 - ab` vanishes on the classical images (the slice relation).
    pub classical_relation_holds: bool,
    /// The correction terms have zero hb^0 part.
    pub corrections_vanish_classically: bool,
}

impl RelationReport {
    pub fn pass(&self) -> bool {
        self.residual_zero && self.symbol_matches && self.classical_relation_holds && self.corrections_vanish_classically
    }
}

/// The rescaled fields `Ĵ = hb J`, `Ĝ+ = hb^2 G+`, `Ĝ- = hb G-`.
pub fn hatted_fields(r: &W23Realization) -> (State, State, State) {
    (r.j.scale(&Scalar::hbar_pow(1)), r.g_plus.scale(&Scalar::hbar_pow(2)), r.g_minus.scale(&Scalar::hbar_pow(1)))
}

pub fn verify_singularity_relation(r: &W23Realization) -> Result<RelationReport, W23Error> {
    let va = r.algebra();
    let (j, gp, gm) = hatted_fields(r);
    let j2 = va.nprod(&j, -1, &j)?;
    let j3 = va.nprod(&j, -1, &j2)?;
    let gpgm = va.nprod(&gp, -1, &gm)?;
    let main = j3.add(&gpgm);
    let dj2 = va.derivative(&j2)?.scale(&Scalar::from_frac(-3, 2).mul(&Scalar::hbar_pow(1)));
    let corrections = dj2.add(&va.derivative(&j)?.scale(&Scalar::hbar_pow(2)));
    let residual = main.add(&corrections);
    let variant = main.add(&dj2).add(&va.derivative_n(&j, 2)?.scale(&Scalar::hbar_pow(2)));
    let (h, a, b) = (va.classical_image(&j)?, va.classical_image(&gp)?, va.classical_image(&gm)?.neg());
    let classical = h.pow(3).sub(&a.mul(&b));
    Ok(RelationReport {
        residual: va.render(&residual),
        residual_zero: residual.is_zero(),
        second_derivative_residual: va.render(&variant),
        second_derivative_holds: variant.is_zero(),
        symbol_matches: va.classical_image(&main)? == classical,
        classical_relation_holds: classical.is_zero(),
        corrections_vanish_classically: va.classical_image(&corrections)?.is_zero(),
    })
}

/// One bracket `x_(n) y` of the limit, computed on both routes.
#[derive(Clone, Debug, Serialize)]
pub struct BracketCheck {
    pub a: String,
    pub b: String,
    pub n: u32,
    pub expected: String,
    pub from_quantum: String,
    pub from_classical: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalLimitReport {
    pub checks: Vec<BracketCheck>,
}

impl ClassicalLimitReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Brackets of `h = Ĵ, a = Ĝ+, b = -Ĝ-` as `(hb^-1 x_(n) y) mod hb` and as
/// products of the classical images in the limit of `U_2`, against
/// `h(0)a = a, h(0)b = -b, a(0)b = -3h^2` and vanishing higher brackets.
pub fn verify_classical_limit(r: &W23Realization) -> Result<ClassicalLimitReport, W23Error> {
    let va = r.algebra();
    let lim = va.quasiclassical_limit()?;
    let (j, gp, gm) = hatted_fields(r);
    let quantum = [("h", j), ("a", gp), ("b", gm.neg())];
    let cl: Vec<JetPoly> = quantum.iter().map(|(_, s)| va.classical_image(s)).collect::<Result<_, _>>()?;
    let (h, a, b) = (&cl[0], &cl[1], &cl[2]);
    let h2 = h.pow(2).scale(&Scalar::from_int(3));
    let expected_zero = |x: usize, y: usize| -> JetPoly {
        match (x, y) {
            (0, 1) => a.clone(),
            (1, 0) => a.neg(),
            (0, 2) => b.neg(),
            (2, 0) => b.clone(),
            (1, 2) => h2.neg(),
            (2, 1) => h2.clone(),
            _ => JetPoly::zero(),
        }
    };
    let mut checks = Vec::new();
    for x in 0..3 {
        for y in 0..3 {
            let qs: Vec<State> = va.ope_list(&quantum[x].1, &quantum[y].1)?;
            let cs = lim.ope(&cl[x], &cl[y]);
            let len = qs.len().max(cs.len()).max(1);
            for n in 0..len {
                let q = match qs.get(n) {
                    Some(s) => va.classical_image(&s.scale(&Scalar::hbar_pow(-1)))?,
                    None => JetPoly::zero(),
                };
                let c = cs.get(n).cloned().unwrap_or_else(JetPoly::zero);
                let e = if n == 0 { expected_zero(x, y) } else { JetPoly::zero() };
                checks.push(BracketCheck {
                    a: quantum[x].0.to_string(),
                    b: quantum[y].0.to_string(),
                    n: n as u32,
                    expected: lim.render(&e),
                    from_quantum: lim.render(&q),
                    from_classical: lim.render(&c),
                    pass: q == e && c == e,
                });
            }
        }
    }
    Ok(ClassicalLimitReport { checks })
}

/// Slice coordinates in the order `alpha, beta, gamma, delta`.
pub const SLICE_COORDS: [&str; 4] = ["alpha", "beta", "gamma", "delta"];

/// The slice `f + g^e` for `f = E21`, `e = E12` in sl_3 and the invariant
/// polynomials `delta, gamma, beta_inv` on the dual via the trace pairing.
pub struct SliceData {
    lie: LieData,
    table: GeneratorTable,
    matrix: [[JetPoly; 3]; 3],
}

impl SliceData {
    pub fn new() -> Result<Self, W23Error> {
        let lie = lie_sl(3)?;
        let table = GeneratorTable::new(SLICE_COORDS.iter().map(|n| Generator::even(n)).collect()).map_err(VertexError::from)?;
        let v = |i: usize| JetPoly::var(JetVar { id: i as GenId, deriv: 0, odd: false });
        let (al, be, ga, de) = (v(0), v(1), v(2), v(3));
        let one = JetPoly::one();
        let zero = JetPoly::zero();
        let matrix = [
            [de.clone(), al, be],
            [one, de.clone(), zero.clone()],
            [zero, ga, de.scale(&Scalar::from_int(-2))],
        ];
        Ok(SliceData { lie, table, matrix })
    }

    pub fn lie(&self) -> &LieData {
        &self.lie
    }

    pub fn table(&self) -> &GeneratorTable {
        &self.table
    }

    pub fn matrix(&self) -> &[[JetPoly; 3]; 3] {
        &self.matrix
    }

    pub fn coord(&self, name: &str) -> Result<JetPoly, W23Error> {
        let id = self.table.id(name).map_err(VertexError::from)?;
        Ok(JetPoly::var(JetVar { id, deriv: 0, odd: false }))
    }

    /// Linear function of a basis element on the slice: `E_ij -> X_ji`,
    /// `H_i -> X_ii - X_(i+1)(i+1)`.
    pub fn basis_on_slice(&self, name: &str) -> Result<JetPoly, W23Error> {
        let digits: Vec<usize> = name[1..].chars().filter_map(|c| c.to_digit(10)).map(|d| d as usize - 1).collect();
        let x = &self.matrix;
        match (name.chars().next(), digits.as_slice()) {
            (Some('E'), [i, j]) if i < &3 && j < &3 => Ok(x[*j][*i].clone()),
            (Some('H'), [i]) if *i < 2 => Ok(x[*i][*i].sub(&x[*i + 1][*i + 1])),
            _ => Err(W23Error::Slice(format!("basis element `{}` has no slice image", name))),
        }
    }

    fn basis(&self, name: &str) -> Result<JetPoly, W23Error> {
        let i = self.lie.index(name)?;
        Ok(JetPoly::var(JetVar { id: i as GenId, deriv: 0, odd: false }))
    }

    /// `delta = (H1 + 2 H2)/6 = (E11 + E22 - 2 E33)/6`.
    pub fn delta(&self) -> Result<JetPoly, W23Error> {
        Ok(self.basis("H1")?.add(&self.basis("H2")?.scale(&Scalar::from_int(2))).scale(&Scalar::from_frac(1, 6)))
    }

    /// `gamma = E23`, the linear function reading the `(3,2)` slice entry.
    pub fn gamma(&self) -> Result<JetPoly, W23Error> {
        self.basis("E23")
    }

    /// `beta_inv = E31 - (E11 - E33) E32`.
    pub fn beta_inv(&self) -> Result<JetPoly, W23Error> {
        let e11_e33 = self.basis("H1")?.add(&self.basis("H2")?);
        Ok(self.basis("E31")?.sub(&e11_e33.mul(&self.basis("E32")?)))
    }

    /// Restriction of a polynomial on sl_3^* to the slice.
    pub fn restrict(&self, p: &JetPoly) -> Result<JetPoly, W23Error> {
        let images: Vec<JetPoly> = self.lie.names().iter().map(|n| self.basis_on_slice(n)).collect::<Result<_, _>>()?;
        p.substitute(&|v: JetVar| images[v.id as usize].clone())
            .ok_or_else(|| W23Error::Slice("negative exponent in restriction".to_string()))
    }

    /// `alpha` solved from `Tr X^2 = 0`, which is linear in `alpha`.
    pub fn alpha_on_nilpotent_part(&self) -> Result<JetPoly, W23Error> {
        let t2 = trace(&mat_mul(&self.matrix, &self.matrix));
        let alpha = JetVar { id: 0, deriv: 0, odd: false };
        let c = t2.partial(alpha);
        let c0 = c.as_scalar().filter(|s| !s.is_zero()).ok_or_else(|| W23Error::Slice("Tr X^2 is not linear in alpha".to_string()))?;
        let rest = t2.substitute(&|v: JetVar| if v.id == 0 { JetPoly::zero() } else { JetPoly::var(v) }).expect("polynomial");
        Ok(rest.neg().scale(&Scalar::one().div(&c0)?))
    }

    /// Substitutes `alpha` by its value on the nilpotent part.
    pub fn on_nilpotent_part(&self, p: &JetPoly) -> Result<JetPoly, W23Error> {
        let a = self.alpha_on_nilpotent_part()?;
        Ok(p.substitute(&|v: JetVar| if v.id == 0 { a.clone() } else { JetPoly::var(v) }).expect("polynomial"))
    }
}

fn mat_mul(a: &[[JetPoly; 3]; 3], b: &[[JetPoly; 3]; 3]) -> [[JetPoly; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).fold(JetPoly::zero(), |acc, l| acc.add(&a[i][l].mul(&b[l][j])))))
}

fn trace(a: &[[JetPoly; 3]; 3]) -> JetPoly {
    a[0][0].add(&a[1][1]).add(&a[2][2])
}

#[derive(Clone, Debug, Serialize)]
pub struct SliceBracketCheck {
    pub pair: String,
    pub restricted: String,
    pub expected: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SliceReport {
    pub brackets: Vec<SliceBracketCheck>,
    pub invariants_on_slice: Vec<(String, String)>,
    pub elimination: String,
    pub elimination_multiple: Option<String>,
    pub cocycles: Vec<crate::brst::CocycleCheck>,
}

impl SliceReport {
    pub fn pass(&self) -> bool {
        self.brackets.iter().all(|c| c.pass) && self.elimination_multiple.is_some() && self.cocycles.iter().all(|c| c.pass)
    }
}

/// Kostant-Kirillov brackets of the invariants restricted to the nilpotent
/// part of the slice, the invariants' slice values, the elimination of
/// `alpha` from `Tr X^2 = Tr X^3 = 0`, and the cocycle checks.
pub fn slice_suite() -> Result<SliceReport, W23Error> {
    let sd = SliceData::new()?;
    let kk = sd.lie().kostant_kirillov()?;
    let inv = [("h", sd.delta()?.scale(&Scalar::from_int(2))), ("a", sd.gamma()?), ("b", sd.beta_inv()?)];
    let on_s: Vec<JetPoly> = inv.iter().map(|(_, p)| sd.restrict(p).and_then(|r| sd.on_nilpotent_part(&r))).collect::<Result<_, _>>()?;
    let (h, a, b) = (&on_s[0], &on_s[1], &on_s[2]);
    let three_h2 = h.pow(2).scale(&Scalar::from_int(3));
    let expected = [(0, 1, a.clone()), (0, 2, b.neg()), (1, 2, three_h2.neg()), (0, 0, JetPoly::zero()), (1, 1, JetPoly::zero()), (2, 2, JetPoly::zero())];
    let mut brackets = Vec::new();
    for (x, y, e) in expected {
        let br = sd.on_nilpotent_part(&sd.restrict(&kk.bracket(&inv[x].1, &inv[y].1))?)?;
        brackets.push(SliceBracketCheck {
            pair: format!("{{{}, {}}}", inv[x].0, inv[y].0),
            restricted: br.render(sd.table()),
            expected: e.render(sd.table()),
            pass: br == e,
        });
    }
    let names = [("delta", sd.delta()?), ("gamma", sd.gamma()?), ("beta_inv", sd.beta_inv()?)];
    let invariants_on_slice = names
        .iter()
        .map(|(n, p)| Ok((n.to_string(), sd.restrict(p)?.render(sd.table()))))
        .collect::<Result<Vec<_>, W23Error>>()?;
    let x = sd.matrix();
    let t3 = sd.on_nilpotent_part(&trace(&mat_mul(x, &mat_mul(x, x))))?;
    let rel = sd.coord("delta")?.pow(3).scale(&Scalar::from_int(8)).sub(&sd.coord("beta")?.mul(&sd.coord("gamma")?));
    let elimination_multiple = proportionality(&t3, &rel).map(|c| c.to_string());
    let cocycles = crate::brst::slice_cocycle_checks(4).map_err(|e| W23Error::Slice(e.to_string()))?;
    Ok(SliceReport {
        brackets,
        invariants_on_slice,
        elimination: t3.render(sd.table()),
        elimination_multiple,
        cocycles,
    })
}

/// `c` with `p = c * q` for a nonzero constant `c`.
fn proportionality(p: &JetPoly, q: &JetPoly) -> Option<Scalar> {
    let (m, qc) = q.terms().next()?;
    let c = p.coeff(m).div(qc).ok()?;
    (!c.is_zero() && p.sub(&q.scale(&c)).is_zero()).then_some(c)
}

/// `S_(n) X` and `S3_(n) X` residuals at `k = -3`.
#[derive(Clone, Debug, Serialize)]
pub struct CenterReport {
    pub window: u32,
    pub tested_states: usize,
    pub residuals: Vec<String>,
}

impl CenterReport {
    pub fn pass(&self) -> bool {
        self.residuals.is_empty()
    }
}

/// `S3 = -:G- G+: + :S J: - :J^3: - 3 :J DJ: - D^2 J`, central at `k = -3`.
pub fn s3_field(va: &VertexAlgebra) -> Result<State, W23Error> {
    let g = |n: &str| Expr::gen(n);
    let e = Expr::Sum(vec![
        Expr::Neg(Box::new(Expr::no(vec![g("G-"), g("G+")]))),
        Expr::no(vec![g("S"), g("J")]),
        Expr::Neg(Box::new(Expr::no(vec![g("J"), g("J"), g("J")]))),
        Expr::times(Scalar::from_int(-3), Expr::no(vec![g("J"), g("J").d(1)])),
        Expr::Neg(Box::new(g("J").d(2))),
    ]);
    Ok(va.normal_form(&e)?)
}

/// Singular products of `S` and `S3` with every normally ordered monomial
/// of conformal weight at most `window` (generators always included).
pub fn centrality_check(window: u32) -> Result<CenterReport, W23Error> {
    let p = w23_presentation(Some(&rat_int(-3)))?;
    let va = p.algebra();
    let centre = [("S", va.gen("S")?), ("S3", s3_field(va)?)];
    let mut tests = test_monomials(va, &rat_int(window.max(2) as i64))?;
    tests.retain(|(_, s)| !s.is_zero());
    let mut residuals = Vec::new();
    for (cn, c) in &centre {
        for (tn, t) in &tests {
            for (n, r) in va.ope(c, t)? {
                residuals.push(format!("{}_({}) {} = {}", cn, n, tn, va.render(&r)));
            }
        }
    }
    Ok(CenterReport { window, tested_states: tests.len(), residuals })
}

/// Right-nested normally ordered products of `D^p g` in canonical factor
/// order, of total conformal weight at most `max_weight`.
fn test_monomials(va: &VertexAlgebra, max_weight: &Rat) -> Result<Vec<(String, State)>, W23Error> {
    let t = va.table();
    let mut factors: Vec<(Factor, Rat)> = Vec::new();
    for id in 0..t.len() as GenId {
        let w0 = t.get(id).conformal_weight.clone();
        let mut p = 0u16;
        while &(w0.clone() + rat_int(p as i64)) <= max_weight {
            factors.push((Factor::gen(id, p), w0.clone() + rat_int(p as i64)));
            p += 1;
        }
    }
    factors.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = Vec::new();
    let mut stack: Vec<(usize, Vec<Factor>, Rat)> = vec![(0, Vec::new(), Rat::zero())];
    while let Some((start, fs, w)) = stack.pop() {
        if !fs.is_empty() {
            let items: Vec<State> = fs
                .iter()
                .map(|f| va.derivative_n(&va.generator_state(f.id()), f.deriv() as u32))
                .collect::<Result<_, _>>()?;
            let s = va.normal_order(&items)?;
            out.push((t.render_monomial(&Monomial::from_sorted(fs.clone())), s));
        }
        for (i, (f, fw)) in factors.iter().enumerate().skip(start) {
            let nw = w.clone() + fw.clone();
            if &nw <= max_weight {
                let mut nf = fs.clone();
                nf.push(*f);
                stack.push((i, nf, nw));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests;

