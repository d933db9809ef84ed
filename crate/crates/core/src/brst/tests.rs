use proptest::prelude::*;

use super::*;
use crate::algebras::lie_sl;

fn k() -> Scalar {
    Scalar::k()
}

fn sl2() -> BrstComplex {
    sl2_principal(&k()).unwrap()
}

fn sl3() -> LieData {
    lie_sl(3).unwrap()
}

/// Partitions of `n` into parts `>= 2`.
fn partitions_min2(n: usize) -> usize {
    let mut p = vec![0usize; n + 1];
    p[0] = 1;
    for part in 2..=n {
        for m in part..=n {
            p[m] += p[m - part];
        }
    }
    p[n]
}

#[test]
fn classical_sl2_differential_has_no_cubic_term() {
    let lie = lie_sl(2).unwrap();
    let sub = SubalgebraData::graded(&lie, 1).unwrap();
    let c = build_dchi_classical(&lie, &sub).unwrap();
    assert_eq!(c.render(c.d()), "e phis_e - phis_e");
    // {d_chi phi_e} = (e - 1){phis_e phi_e} = e - 1
    let phi = JetPoly::var(JetVar { id: lie.dim() as GenId, deriv: 0, odd: true });
    let e = JetPoly::var(JetVar { id: 0, deriv: 0, odd: false });
    assert_eq!(c.apply_d(&phi), e.sub(&JetPoly::one()));
}

#[test]
fn classical_sl3_lagrangian_differential_has_no_cubic_term() {
    let lie = sl3();
    let sub = SubalgebraData::lagrangian(&lie, &["E13"]).unwrap();
    let c = build_dchi_classical(&lie, &sub).unwrap();
    assert!(c.d().terms().all(|(m, _)| m.factors().iter().map(|(_, e)| *e).sum::<i32>() <= 2));
}

#[test]
fn character_condition_is_enforced() {
    let lie = sl3();
    let sub = SubalgebraData::graded(&lie, 1).unwrap();
    assert!(!sub.is_character(&lie));
    assert!(matches!(build_dchi_classical(&lie, &sub), Err(BrstError::ChiNotCharacter)));
    assert!(matches!(m_complex(&lie, &sub, &k()), Err(BrstError::ChiNotCharacter)));
}

#[test]
fn sl2_chiral_differential() {
    let c = sl2();
    assert_eq!(c.render(c.d()), "hb^-1*:e phis_e: - hb^-1*phis_e");
    assert!(c.apply_d(&State::vacuum().with_tag(c.algebra().id())).unwrap().is_zero());
}

#[test]
fn sl2_d_squared_vanishes_in_window() {
    let c = sl2();
    let rep = c.check_d_squared(&TruncationWindow::new(4, 6, -3, 3)).unwrap();
    assert!(rep.pass(), "{:?}", rep);
    assert!(rep.square_vanishes);
    assert!(rep.checked > 100);
}

#[test]
fn zero_character_complex_is_nilpotent() {
    let lie = lie_sl(2).unwrap();
    let sub = SubalgebraData::graded(&lie, 1).unwrap().with_zero_character();
    let c = m_complex(&lie, &sub, &k()).unwrap();
    assert_eq!(c.render(c.d()), "hb^-1*:e phis_e:");
    assert!(c.check_d_squared(&TruncationWindow::new(3, 4, -2, 2)).unwrap().pass());
}

#[test]
fn sl2_cohomology_matches_virasoro_counts() {
    let c = sl2();
    let rep = c.cohomology(&TruncationWindow::new(3, 4, -1, 1)).unwrap();
    for w in 0..=3i64 {
        assert_eq!(rep.dim(w, 0), Some(partitions_min2(w as usize)), "w = {}", w);
        assert_eq!(rep.dim(w, 1), Some(0));
        assert_eq!(rep.dim(w, -1), Some(0));
    }
    for cell in &rep.cells {
        for s in &cell.states {
            assert!(c.apply_d(s).unwrap().is_zero());
        }
    }
}

#[test]
fn empty_window_gives_empty_report() {
    let c = sl2();
    let w = TruncationWindow::new(-1, 4, 0, 0);
    assert!(w.is_empty());
    assert!(c.cohomology(&w).unwrap().cells.is_empty());
    assert_eq!(c.check_d_squared(&w).unwrap().checked, 0);
}

#[test]
fn apply_d_rejects_states_outside_window() {
    let c = sl2();
    let va = c.algebra();
    let h = va.gen("h").unwrap();
    let hh = va.normal_order(&[h.clone(), h.clone(), h]).unwrap();
    let w = TruncationWindow::new(1, 1, -1, 1);
    assert!(matches!(c.apply_d_in(&hh, &w), Err(BrstError::OutOfWindow(_))));
    assert!(c.apply_d_in(&va.gen("phis_e").unwrap(), &TruncationWindow::new(1, 1, -1, 1)).is_ok());
}

#[test]
fn kazhdan_invariant_parts() {
    let c = sl2();
    let va = c.algebra();
    let h = va.gen("h").unwrap();
    let e = va.gen("e").unwrap();
    let one = State::vacuum().with_tag(va.id());
    let hbh = h.scale(&Scalar::hbar_pow(-1));
    // K(h) = 2, K(e) = 2 - ad_h(e) = 0
    let qe = e.scale(&Scalar::q_pow(-1));
    let kept = kazhdan_invariants(va, &[hbh.clone(), h, one.clone(), e.clone(), qe]);
    assert_eq!(kept, vec![hbh, one, e]);
}

#[test]
fn betagamma_matter_with_custom_weights() {
    let lie = lie_sl(2).unwrap();
    let sub = SubalgebraData::graded(&lie, 1).unwrap();
    let gens = ChartGenerators {
        xs: vec![Generator::even("x").with_conformal(Rat::one()).with_kazhdan(Rat::zero())],
        ds: vec![Generator::even("d").with_conformal(Rat::zero()).with_kazhdan(Rat::from_integer(2.into()))],
    };
    let matter = betagamma_chart_with(&gens, None, true, &[]).unwrap();
    let xid = matter.table().id("x").unwrap();
    let did = matter.table().id("d").unwrap();
    let mu = matter.gen("x").unwrap().scale(&Scalar::hbar_pow(-1));
    let good = Moment { quantum: mu.clone(), classical: JetPoly::var(JetVar { id: xid, deriv: 0, odd: false }) };
    let c = build_dchi_chiral(&matter, &lie, &sub, &[good]).unwrap();
    assert_eq!(c.render(c.d()), "hb^-1*:x phis_e: - hb^-1*phis_e");
    let bad = Moment { quantum: mu, classical: JetPoly::var(JetVar { id: did, deriv: 0, odd: false }) };
    assert!(matches!(build_dchi_chiral(&matter, &lie, &sub, &[bad]), Err(BrstError::MomentSymbolMismatch { .. })));
    assert!(matches!(build_dchi_chiral(&matter, &lie, &sub, &[]), Err(BrstError::MomentArity { expected: 1, found: 0 })));
}

#[test]
fn quasiclassical_limits_agree() {
    let l2 = lie_sl(2).unwrap();
    let s2 = SubalgebraData::graded(&l2, 1).unwrap();
    let cl = build_dchi_classical(&l2, &s2).unwrap();
    assert!(quasiclassical_mismatches(&sl2(), &cl).unwrap().is_empty());
    let l3 = sl3();
    let s3 = SubalgebraData::lagrangian(&l3, &["E13"]).unwrap();
    let cl3 = build_dchi_classical(&l3, &s3).unwrap();
    let ch3 = m_complex(&l3, &s3, &k()).unwrap();
    assert!(quasiclassical_mismatches(&ch3, &cl3).unwrap().is_empty());
}

#[test]
fn krw_complex_for_sl3() {
    let lie = sl3();
    assert_eq!(krw_rank(&lie).unwrap(), 1);
    let c = krw_complex(&lie, &k()).unwrap();
    assert_eq!(
        c.render(c.d()),
        "hb^-1*:E12 phis_E12: + hb^-1*:E13 phis_E13: + hb^-1*:E32 phis_E32: - hb^-1*:x1 phis_E13: - hb^-1*:d1 phis_E32: - hb^-1*:phi_E12 phis_E13 phis_E32: - hb^-1*phis_E12"
    );
    assert!(c.check_d_squared(&TruncationWindow::new(2, 3, -1, 1)).unwrap().pass());
}

#[test]
fn krw_with_opposite_sign_is_not_nilpotent() {
    let lie = sl3();
    assert!(matches!(krw_complex_signed(&lie, &k(), -1), Err(BrstError::DifferentialNotNilpotent(_))));
}

#[test]
fn intermediate_square_is_nonzero_but_acts_trivially() {
    let c = intermediate_complex(&sl3(), &k()).unwrap();
    let rep = c.check_d_squared(&TruncationWindow::new(1, 2, -1, 1)).unwrap();
    assert!(!rep.square_vanishes);
    assert!(rep.square_acts_trivially && rep.pass());
}

#[test]
fn chain_maps_from_intermediate_complex() {
    let lie = sl3();
    let m = chain_map_to_m_complex(&lie, &["E13"], &k()).unwrap();
    assert!(m.pass(), "{:?}", m.failures);
    let krw = chain_map_to_krw(&lie, &k()).unwrap();
    assert!(krw.pass(), "{:?}", krw.failures);
    assert!(m.checked > 100 && krw.checked > 100);
}

#[test]
fn identity_is_a_chain_map() {
    let c = sl2();
    let images: Vec<(String, State)> = c.algebra().table().generators().iter().map(|g| (g.name.clone(), c.algebra().gen(&g.name).unwrap())).collect();
    let rep = chain_map_check("id", &c, &c, &images).unwrap();
    assert!(rep.pass());
}

#[test]
fn dropping_a_ghost_breaks_the_chain_map() {
    let c = sl2();
    let images: Vec<(String, State)> = c
        .algebra()
        .table()
        .generators()
        .iter()
        .map(|g| {
            let img = if g.name == "phis_e" { State::zero() } else { c.algebra().gen(&g.name).unwrap() };
            (g.name.clone(), img)
        })
        .collect();
    match chain_map_check("drop", &c, &c, &images) {
        Ok(rep) => assert!(!rep.pass()),
        Err(e) => assert!(matches!(e, BrstError::NotAMorphism(_))),
    }
}

#[test]
fn slice_invariants_are_cocycles() {
    let checks = slice_cocycle_checks(4).unwrap();
    assert_eq!(checks.len(), 6);
    for c in &checks {
        assert!(c.pass, "{:?}", c);
    }
    let delta = checks.iter().find(|c| c.invariant == "delta" && c.generator == "E13").unwrap();
    assert_eq!(delta.bracket, "-1/2*E13");
}

#[test]
fn e32_is_not_a_cocycle() {
    // {E13, E32} = E12 is not in the ideal <E12 - 1, E13>
    let lie = sl3();
    let kk = lie.kostant_kirillov().unwrap();
    let id = |n: &str| lie.names().iter().position(|x| x == n).unwrap() as GenId;
    let v = |n: &str| JetPoly::var(JetVar { id: id(n), deriv: 0, odd: false });
    let gens = [v("E12").sub(&JetPoly::one()), v("E13")];
    let br = kk.bracket(&v("E13"), &v("E32"));
    assert_eq!(br, v("E12"));
    assert!(ideal_membership(&br, &gens, lie.dim(), 4).is_none());
    assert!(ideal_membership(&v("E13").mul(&v("E32")), &gens, lie.dim(), 4).is_some());
}

fn random_monomial(c: &BrstComplex, picks: &[(usize, u16)]) -> State {
    let va = c.algebra();
    let n = va.table().len();
    let mut parts = Vec::new();
    for &(g, p) in picks {
        let mut s = va.generator_state((g % n) as GenId);
        for _ in 0..p {
            s = va.derivative(&s).unwrap();
        }
        parts.push(s);
    }
    let s = if parts.is_empty() { State::vacuum().with_tag(va.id()) } else { va.normal_order(&parts).unwrap() };
    match va.table().grading(&s, GradingKind::Kazhdan) {
        Ok(Some(GradeValue::Weight(w))) => s.scale(&Scalar::q_pow(-weight_int(&w).unwrap())),
        _ => s,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn d_raises_ghost_and_preserves_invariance(picks in prop::collection::vec((0usize..6, 0u16..2), 0..4)) {
        let c = sl2();
        let b = random_monomial(&c, &picks);
        let db = c.apply_d(&b).unwrap();
        let t = c.algebra().table();
        if !db.is_zero() {
            let ghost_b = match t.grading(&b, GradingKind::Ghost) { Ok(Some(GradeValue::Ghost(g))) => g, _ => 0 };
            prop_assert_eq!(t.grading(&db, GradingKind::Ghost), Ok(Some(GradeValue::Ghost(ghost_b + 1))));
            prop_assert_eq!(t.grading(&db, GradingKind::Kazhdan), Ok(Some(GradeValue::Weight(Rat::zero()))));
        }
        prop_assert!(c.apply_d(&db).unwrap().is_zero());
    }
}
