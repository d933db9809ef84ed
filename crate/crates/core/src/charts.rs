//! The three βγ charts of the resolved slice `x_i, d_i` (i = 1, 2, 3), their
//! quantized transition maps, the quiver-variety coordinates, and gluing
//! checks on model charts.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::algebras::{betagamma_chart, betagamma_chart_with, shift_images, splitting_change_residuals, AlgebraError, ChartGenerators};
use crate::poisson::{twisted_bracket_check, CotangentChart, Form, JetPoly, PoissonVertexAlgebra};
use crate::scalar::{rat_int, Rat, Scalar};
use crate::state::{Expr, Generator, State};
use crate::vertex::{MorphismResidual, Substitution, VertexAlgebra, VertexError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChartError {
    #[error("unknown chart or transition `{0}`")]
    Unknown(String),
    #[error("transition `{0}` is not a vertex morphism: {1}")]
    MorphismResidual(String, String),
    #[error("gluing data violates the cocycle condition: {0}")]
    CocycleViolation(String),
    #[error(transparent)]
    Vertex(#[from] VertexError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Which coordinate of a chart is inverted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Localization {
    None,
    X,
    D,
}

/// Chart `U_i`: the ħ-adic βγ system on `x_i, d_i` (`d_i(0) x_i = ħ`) in
/// three localizations. Kazhdan weights follow the W-side convention
/// `K(x_2) = 0`, `K(d_2) = 2`, propagated through the transitions.
pub struct Chart {
    pub index: usize,
    plain: VertexAlgebra,
    loc_x: VertexAlgebra,
    loc_d: VertexAlgebra,
}

impl Chart {
    fn new(index: usize) -> Result<Self, ChartError> {
        let (kx, kd) = match index {
            1 => (-2, 4),
            2 => (0, 2),
            _ => (2, 0),
        };
        let gens = ChartGenerators {
            xs: vec![Generator::even(&format!("x{}", index)).with_kazhdan(rat_int(kx))],
            ds: vec![Generator::even(&format!("d{}", index)).with_conformal(Rat::one()).with_kazhdan(rat_int(kd))],
        };
        let x = format!("x{}", index);
        let d = format!("d{}", index);
        Ok(Chart {
            index,
            plain: betagamma_chart_with(&gens, None, true, &[])?,
            loc_x: betagamma_chart_with(&gens, None, true, &[&x])?,
            loc_d: betagamma_chart_with(&gens, None, true, &[&d])?,
        })
    }

    pub fn name(&self) -> String {
        format!("U{}", self.index)
    }

    pub fn x_name(&self) -> String {
        format!("x{}", self.index)
    }

    pub fn d_name(&self) -> String {
        format!("d{}", self.index)
    }

    pub fn algebra(&self, loc: Localization) -> &VertexAlgebra {
        match loc {
            Localization::None => &self.plain,
            Localization::X => &self.loc_x,
            Localization::D => &self.loc_d,
        }
    }
}

/// Generator images of a transition, in the target chart's localization,
/// together with the classical images read off the coordinate relations.
pub struct TransitionMap {
    pub name: String,
    pub source: (usize, Localization),
    pub target: (usize, Localization),
    images: Vec<(String, State)>,
    inverse_images: Vec<(String, State)>,
    classical: Vec<(String, JetPoly)>,
}

impl TransitionMap {
    pub fn images(&self) -> &[(String, State)] {
        &self.images
    }

    pub fn inverse_images(&self) -> &[(String, State)] {
        &self.inverse_images
    }

    pub fn classical_images(&self) -> &[(String, JetPoly)] {
        &self.classical
    }
}

pub struct ChartAtlas {
    pub charts: Vec<Chart>,
    pub transitions: Vec<TransitionMap>,
}

fn nf(a: &VertexAlgebra, e: &Expr) -> Result<State, ChartError> {
    Ok(a.normal_form(e)?)
}

fn hb(n: i64) -> Scalar {
    Scalar::hbar_pow(1).scale_int(n)
}

/// `:u u w: + c ħ ∂u`.
fn square_times(a: &VertexAlgebra, u: &str, w: &str, c: i64) -> Result<State, ChartError> {
    let quad = Expr::no(vec![Expr::gen(u), Expr::gen(u), Expr::gen(w)]);
    let corr = Expr::times(hb(c), Expr::gen(u).d(1));
    nf(a, &Expr::Sum(vec![quad, corr]))
}

fn inverse(a: &VertexAlgebra, g: &str) -> Result<State, ChartError> {
    nf(a, &Expr::InvPower(g.to_string(), 1))
}

/// The atlas `U_1, U_2, U_3` with transitions in both directions across
/// `U_1 ∩ U_2` and `U_2 ∩ U_3`.
pub fn build_slodowy_atlas() -> Result<ChartAtlas, ChartError> {
    let charts = vec![Chart::new(1)?, Chart::new(2)?, Chart::new(3)?];
    let mut transitions = Vec::new();
    for i in 1..=2usize {
        let lo = &charts[i - 1];
        let hi = &charts[i];
        let (xi, di, xj, dj) = (lo.x_name(), lo.d_name(), hi.x_name(), hi.d_name());
        // U_{i+1} -> U_i: x_{i+1} = :x_i^2 d_i: + 2ħ∂x_i, d_{i+1} = x_i^{-1}
        {
            let t = lo.algebra(Localization::X);
            let lim = t.quasiclassical_limit()?;
            let (cx, cd) = (lim.gen(&xi).map_err(pe)?, lim.gen(&di).map_err(pe)?);
            transitions.push(TransitionMap {
                name: format!("{}->{}", hi.name(), lo.name()),
                source: (i + 1, Localization::D),
                target: (i, Localization::X),
                images: vec![(xj.clone(), square_times(t, &xi, &di, 2)?), (dj.clone(), inverse(t, &xi)?)],
                inverse_images: vec![(dj.clone(), t.gen(&xi)?)],
                classical: vec![(xj.clone(), cx.pow(2).mul(&cd)), (dj.clone(), lim.inverse(&xi).map_err(pe)?)],
            });
        }
        // U_i -> U_{i+1}: x_i = d_{i+1}^{-1}, d_i = :d_{i+1}^2 x_{i+1}: - 2ħ∂d_{i+1}
        {
            let t = hi.algebra(Localization::D);
            let lim = t.quasiclassical_limit()?;
            let (cx, cd) = (lim.gen(&xj).map_err(pe)?, lim.gen(&dj).map_err(pe)?);
            transitions.push(TransitionMap {
                name: format!("{}->{}", lo.name(), hi.name()),
                source: (i, Localization::X),
                target: (i + 1, Localization::D),
                images: vec![(xi.clone(), inverse(t, &dj)?), (di.clone(), square_times(t, &dj, &xj, -2)?)],
                inverse_images: vec![(xi.clone(), t.gen(&dj)?)],
                classical: vec![(xi.clone(), lim.inverse(&dj).map_err(pe)?), (di.clone(), cd.pow(2).mul(&cx))],
            });
        }
    }
    Ok(ChartAtlas { charts, transitions })
}

fn pe(e: crate::poisson::PoissonError) -> ChartError {
    ChartError::Vertex(VertexError::TableInconsistent(e.to_string()))
}

/// Morphism check of one transition: quantum residuals, classical bracket
/// residuals of the symbols, and agreement of the symbols with the
/// classical coordinate relations.
#[derive(Clone, Debug, Serialize)]
pub struct TransitionReport {
    pub name: String,
    pub residuals: Vec<String>,
    pub classical_residuals: Vec<String>,
    pub symbol_mismatches: Vec<String>,
}

impl TransitionReport {
    pub fn pass(&self) -> bool {
        self.residuals.is_empty() && self.classical_residuals.is_empty() && self.symbol_mismatches.is_empty()
    }
}

fn render_residual(alg: &VertexAlgebra, r: &MorphismResidual) -> String {
    format!("{}_({}){}: {}", r.a, r.n, r.b, alg.render(&r.residual))
}

/// Substitution of Poisson-jet generators by classical images.
fn classical_apply(p: &JetPoly, images: &[JetPoly], inverses: &[Option<JetPoly>]) -> Option<JetPoly> {
    let mut out = JetPoly::zero();
    for (m, c) in p.terms() {
        let mut acc = JetPoly::one();
        for (v, e) in m.factors() {
            let base = if *e < 0 {
                if v.deriv != 0 {
                    return None;
                }
                inverses[v.id as usize].clone()?
            } else {
                images[v.id as usize].derivative_n(v.deriv as u32)
            };
            acc = acc.mul(&base.pow(e.unsigned_abs()));
        }
        out = out.add(&acc.scale(c));
    }
    Some(out)
}

impl ChartAtlas {
    pub fn chart(&self, i: usize) -> Result<&Chart, ChartError> {
        self.charts.get(i.wrapping_sub(1)).ok_or_else(|| ChartError::Unknown(format!("U{}", i)))
    }

    pub fn transition(&self, name: &str) -> Result<&TransitionMap, ChartError> {
        self.transitions.iter().find(|t| t.name == name).ok_or_else(|| ChartError::Unknown(name.to_string()))
    }

    pub fn source_algebra(&self, t: &TransitionMap) -> &VertexAlgebra {
        self.charts[t.source.0 - 1].algebra(t.source.1)
    }

    pub fn target_algebra(&self, t: &TransitionMap) -> &VertexAlgebra {
        self.charts[t.target.0 - 1].algebra(t.target.1)
    }

    pub fn substitution<'a>(&'a self, t: &'a TransitionMap) -> Result<Substitution<'a>, ChartError> {
        let imgs: Vec<(&str, State)> = t.images.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
        let invs: Vec<(&str, State)> = t.inverse_images.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
        Ok(Substitution::new(self.source_algebra(t), self.target_algebra(t), &imgs, &invs)?)
    }

    /// Image of a source-chart state (of any localization of that chart)
    /// in the target chart.
    pub fn transport(&self, name: &str, a: &State, from: &VertexAlgebra) -> Result<State, ChartError> {
        let t = self.transition(name)?;
        let src = self.source_algebra(t);
        let s = src.import(a, from)?;
        Ok(self.substitution(t)?.apply(&s)?)
    }

    pub fn check_transition_morphism(&self, name: &str) -> Result<TransitionReport, ChartError> {
        let t = self.transition(name)?;
        let sub = self.substitution(t)?;
        let target = self.target_algebra(t);
        let source = self.source_algebra(t);
        let residuals = sub.residuals()?.iter().map(|r| render_residual(target, r)).collect();

        let lim_s = source.quasiclassical_limit()?;
        let lim_t = target.quasiclassical_limit()?;
        let n = source.table().len();
        let mut images = vec![JetPoly::zero(); n];
        let mut inverses = vec![None; n];
        for (g, s) in &t.images {
            images[source.table().id(g).map_err(VertexError::from)? as usize] = target.classical_image(s)?;
        }
        for (g, s) in &t.inverse_images {
            inverses[source.table().id(g).map_err(VertexError::from)? as usize] = Some(target.classical_image(s)?);
        }
        let mut classical_residuals = Vec::new();
        for a in source.table().generators() {
            for b in source.table().generators() {
                let (ia, ib) = (source.table().id(&a.name).unwrap() as usize, source.table().id(&b.name).unwrap() as usize);
                for k in 0..3 {
                    let expected = classical_apply(&lim_s.nprod(&lim_s.gen(&a.name).map_err(pe)?, k, &lim_s.gen(&b.name).map_err(pe)?), &images, &inverses);
                    let computed = lim_t.nprod(&images[ia], k, &images[ib]);
                    if expected.as_ref() != Some(&computed) {
                        classical_residuals.push(format!("{{{}_({}){}}}: {}", a.name, k, b.name, lim_t.render(&computed)));
                    }
                }
            }
        }
        let mut symbol_mismatches = Vec::new();
        for (g, rel) in &t.classical {
            let id = source.table().id(g).map_err(VertexError::from)? as usize;
            if &images[id] != rel {
                symbol_mismatches.push(format!("{}: symbol {} vs relation {}", g, lim_t.render(&images[id]), lim_t.render(rel)));
            }
        }
        Ok(TransitionReport { name: t.name.clone(), residuals, classical_residuals, symbol_mismatches })
    }

    /// `second ∘ first` on every source generator (and inverse) of `first`;
    /// returns the generators where the composite is not the identity.
    pub fn round_trip_failures(&self, first: &str, second: &str) -> Result<Vec<String>, ChartError> {
        let t1 = self.transition(first)?;
        let t2 = self.transition(second)?;
        let src = self.source_algebra(t1);
        let mid = self.target_algebra(t1);
        let s1 = self.substitution(t1)?;
        let s2 = self.substitution(t2)?;
        let mut out = Vec::new();
        let mut probes: Vec<(String, State)> = Vec::new();
        for (g, _) in &t1.images {
            probes.push((g.clone(), src.gen(g)?));
        }
        for (g, _) in &t1.inverse_images {
            probes.push((format!("{}^-1", g), src.normal_form(&Expr::InvPower(g.clone(), 1))?));
        }
        for (label, s) in probes {
            let m = s1.apply(&s)?;
            let back = s2.apply(&self.source_algebra(t2).import(&m, mid)?)?;
            let back = src.import(&back, self.target_algebra(t2))?;
            if back != s {
                out.push(format!("{} -> {}", label, src.render(&back)));
            }
        }
        Ok(out)
    }

    /// Quantum morphism reports for every transition.
    pub fn verify_transitions(&self) -> Result<Vec<TransitionReport>, ChartError> {
        self.transitions.iter().map(|t| self.check_transition_morphism(&t.name)).collect()
    }
}

/// `C[u1,u2,u3,v1,v2,v3]` modulo `u1v1 = u2v2 = u3v3`, normal forms by the
/// rewriting `u2v2 -> u1v1`, `u3v3 -> u1v1` (coprime leading terms, so the
/// rules form a Gröbner basis).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QuiverPoly(BTreeMap<[u32; 6], Rat>);

pub const U1: usize = 0;
pub const U2: usize = 1;
pub const U3: usize = 2;
pub const V1: usize = 3;
pub const V2: usize = 4;
pub const V3: usize = 5;

impl QuiverPoly {
    pub fn monomial(exps: [u32; 6]) -> Self {
        let mut m = BTreeMap::new();
        m.insert(exps, Rat::one());
        QuiverPoly(m).normalized()
    }

    pub fn var(i: usize) -> Self {
        let mut e = [0; 6];
        e[i] = 1;
        Self::monomial(e)
    }

    pub fn prod(vars: &[usize]) -> Self {
        let mut e = [0; 6];
        for &v in vars {
            e[v] += 1;
        }
        Self::monomial(e)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn normalized(self) -> Self {
        let mut out: BTreeMap<[u32; 6], Rat> = BTreeMap::new();
        for (mut e, c) in self.0 {
            for (u, v) in [(U2, V2), (U3, V3)] {
                let t = e[u].min(e[v]);
                e[u] -= t;
                e[v] -= t;
                e[U1] += t;
                e[V1] += t;
            }
            let entry = out.entry(e).or_insert_with(Rat::zero);
            *entry += c;
        }
        out.retain(|_, c| !c.is_zero());
        QuiverPoly(out)
    }

    pub fn mul(&self, other: &QuiverPoly) -> QuiverPoly {
        let mut out = BTreeMap::new();
        for (a, c) in &self.0 {
            for (b, d) in &other.0 {
                let mut e = [0; 6];
                for i in 0..6 {
                    e[i] = a[i] + b[i];
                }
                let entry = out.entry(e).or_insert_with(Rat::zero);
                *entry += c * d;
            }
        }
        QuiverPoly(out).normalized()
    }

    pub fn sub(&self, other: &QuiverPoly) -> QuiverPoly {
        let mut out = self.0.clone();
        for (e, c) in &other.0 {
            let entry = out.entry(*e).or_insert_with(Rat::zero);
            *entry -= c;
        }
        QuiverPoly(out).normalized()
    }

    pub fn pow(&self, n: u32) -> QuiverPoly {
        (0..n).fold(QuiverPoly::monomial([0; 6]), |acc, _| acc.mul(self))
    }

    /// T-weight in the basis `ε_0, ε_1, ε_2`; `None` if not homogeneous.
    pub fn torus_weight(&self) -> Option<[i64; 3]> {
        let mut w: Option<[i64; 3]> = None;
        for e in self.0.keys() {
            let mut t = [0i64; 3];
            // u_{a+1} has weight ε_a - ε_{a+1}, v_{a+1} the opposite
            for a in 0..3 {
                let net = e[a] as i64 - e[3 + a] as i64;
                t[a] += net;
                t[(a + 1) % 3] -= net;
            }
            match w {
                None => w = Some(t),
                Some(x) if x != t => return None,
                _ => {}
            }
        }
        w
    }
}

/// Fraction of quiver polynomials.
#[derive(Clone, Debug)]
pub struct QuiverFrac {
    pub num: QuiverPoly,
    pub den: QuiverPoly,
}

impl QuiverFrac {
    pub fn new(num: QuiverPoly, den: QuiverPoly) -> Self {
        QuiverFrac { num, den }
    }

    pub fn poly(p: QuiverPoly) -> Self {
        QuiverFrac { num: p, den: QuiverPoly::monomial([0; 6]) }
    }

    pub fn mul(&self, o: &QuiverFrac) -> QuiverFrac {
        QuiverFrac { num: self.num.mul(&o.num), den: self.den.mul(&o.den) }
    }

    pub fn recip(&self) -> QuiverFrac {
        QuiverFrac { num: self.den.clone(), den: self.num.clone() }
    }

    pub fn pow(&self, n: u32) -> QuiverFrac {
        QuiverFrac { num: self.num.pow(n), den: self.den.pow(n) }
    }

    /// Equality in the localized quotient ring (the ring is a domain).
    pub fn equals(&self, o: &QuiverFrac) -> bool {
        self.num.mul(&o.den).sub(&o.num.mul(&self.den)).is_zero()
    }

    pub fn torus_weight(&self) -> Option<[i64; 3]> {
        let (a, b) = (self.num.torus_weight()?, self.den.torus_weight()?);
        Some([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuiverReport {
    pub checks: Vec<(String, bool)>,
}

impl QuiverReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

/// Chart coordinates `(x_i, d_i)` as fractions in the quiver ring.
pub fn quiver_coordinates() -> Vec<(QuiverFrac, QuiverFrac)> {
    let p = QuiverPoly::prod;
    vec![
        (QuiverFrac::new(p(&[U1, V3]), p(&[V2, V3, V3])), QuiverFrac::poly(p(&[V1, V2, V3]))),
        (QuiverFrac::new(p(&[U1, U1, U2]), p(&[U1, V3])), QuiverFrac::new(p(&[V2, V3, V3]), p(&[U1, V3]))),
        (QuiverFrac::poly(p(&[U1, U2, U3])), QuiverFrac::new(p(&[U1, V3]), p(&[U1, U1, U2]))),
    ]
}

/// Verifies the classical coordinate relations and the torus weights in the
/// quiver realization.
pub fn quiver_verify() -> QuiverReport {
    let p = QuiverPoly::prod;
    let coords = quiver_coordinates();
    let mut checks = Vec::new();
    for i in 0..2 {
        let (xi, di) = &coords[i];
        let (xj, dj) = &coords[i + 1];
        let (a, b) = (i + 1, i + 2);
        checks.push((format!("x{} = d{}^-1", a, b), xi.equals(&dj.recip())));
        checks.push((format!("x{} = x{}^2 d{}", b, a, a), xj.equals(&xi.pow(2).mul(di))));
        checks.push((format!("d{} = d{}^2 x{}", a, b, b), di.equals(&dj.pow(2).mul(xj))));
    }
    let h = QuiverFrac::poly(p(&[U1, V1]));
    let a = QuiverFrac::poly(p(&[U1, U2, U3]));
    let b = QuiverFrac::poly(p(&[V1, V2, V3]));
    checks.push(("x2 d2 = h".into(), coords[1].0.mul(&coords[1].1).equals(&h)));
    checks.push(("x3 = a".into(), coords[2].0.equals(&a)));
    checks.push(("d1 = b".into(), coords[0].1.equals(&b)));
    checks.push(("h^3 = a b".into(), h.pow(3).equals(&a.mul(&b))));
    let theta = [2, -1, -1];
    for (label, s) in [("u1 v3", p(&[U1, V3])), ("v2 v3^2", p(&[V2, V3, V3])), ("u1^2 u2", p(&[U1, U1, U2]))] {
        checks.push((format!("weight({}) = theta", label), s.torus_weight() == Some(theta)));
    }
    for (i, (x, d)) in coords.iter().enumerate() {
        checks.push((format!("weight(x{}) = 0", i + 1), x.torus_weight() == Some([0, 0, 0])));
        checks.push((format!("weight(d{}) = 0", i + 1), d.torus_weight() == Some([0, 0, 0])));
    }
    checks.push(("weight(u1) = e0 - e1".into(), QuiverPoly::var(U1).torus_weight() == Some([1, -1, 0])));
    QuiverReport { checks }
}

#[derive(Clone, Debug, Serialize)]
pub struct GlueReport {
    pub shift_residuals: Vec<String>,
    pub splitting_residuals: Vec<String>,
    pub twisted_failures: Vec<String>,
}

/// On a model chart of dimension `dim`: the shift `d_j ↦ d_j + φ_j` must
/// be an automorphism; for a 2-form `β` the change of splitting must carry
/// the `dβ`-twisted chart into the untwisted one, and the classical twisted
/// bracket must shift by `ι ι dβ` on every pair of coordinate fields.
pub fn generic_glue_check(dim: usize, phi_forms: &[Form], beta: Option<&Form>) -> Result<GlueReport, ChartError> {
    let chart = betagamma_chart(dim, None, false)?;
    let images = shift_images(&chart, dim, phi_forms, false)?;
    let refs: Vec<(&str, State)> = images.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
    let sub = Substitution::new(&chart, &chart, &refs, &[])?;
    let shift_residuals: Vec<String> = sub.residuals()?.iter().map(|r| render_residual(&chart, r)).collect();
    let mut report = GlueReport { shift_residuals, splitting_residuals: Vec::new(), twisted_failures: Vec::new() };
    if let Some(beta) = beta {
        let twisted = betagamma_chart(dim, None, false)?;
        report.splitting_residuals = splitting_change_residuals(dim, None, beta, false)?.iter().map(|r| render_residual(&twisted, r)).collect();
        let shadow = CotangentChart::new(dim, None).map_err(pe)?;
        let unit = |i: usize| -> Vec<JetPoly> { (0..dim).map(|j| if i == j { JetPoly::one() } else { JetPoly::zero() }).collect() };
        for i in 0..dim {
            for j in 0..dim {
                let c = twisted_bracket_check(&shadow, &unit(i), &unit(j), beta);
                if !c.pass {
                    report.twisted_failures.push(format!("(d{}, d{})", i + 1, j + 1));
                }
            }
        }
    }
    if !report.shift_residuals.is_empty() {
        return Err(ChartError::CocycleViolation(report.shift_residuals.join("; ")));
    }
    Ok(report)
}

/// The jet Poisson shadow of a chart (limit of its ħ-adic algebra).
pub fn classical_shadow(chart: &Chart, loc: Localization) -> Result<PoissonVertexAlgebra, ChartError> {
    Ok(chart.algebra(loc).quasiclassical_limit()?)
}

#[cfg(test)]
mod tests;
