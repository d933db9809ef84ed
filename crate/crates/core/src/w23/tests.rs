use super::*;

fn pres() -> W23Presentation {
    w23_presentation(None).unwrap()
}

fn ope_of(p: &W23Presentation, a: &str, b: &str) -> Vec<State> {
    let va = p.algebra();
    va.ope_list(&va.gen(a).unwrap(), &va.gen(b).unwrap()).unwrap()
}

fn st(va: &VertexAlgebra, e: Expr) -> State {
    va.normal_form(&e).unwrap()
}

#[test]
fn jj_renders_with_level_coefficient() {
    let p = pres();
    let va = p.algebra();
    let ope = va.ope(&va.gen("J").unwrap(), &va.gen("J").unwrap()).unwrap();
    assert_eq!(va.render_ope(&ope), "(2k+3)/3 /(z-w)^2");
}

#[test]
fn presented_products_match_hand_values() {
    let p = pres();
    let va = p.algebra();
    let g = Expr::gen;
    let c = |s: Scalar| State::scalar(s);
    let kp1 = Scalar::k().add(&Scalar::one());
    let kp3 = Scalar::k().add(&Scalar::from_int(3));
    let tkp3 = Scalar::k().scale_int(2).add(&Scalar::from_int(3));
    assert_eq!(ope_of(&p, "J", "G+"), vec![va.gen("G+").unwrap()]);
    assert_eq!(ope_of(&p, "J", "G-"), vec![va.gen("G-").unwrap().neg()]);
    assert!(ope_of(&p, "G+", "G+").is_empty());
    assert!(ope_of(&p, "G-", "G-").is_empty());
    let gpgm = ope_of(&p, "G+", "G-");
    assert_eq!(gpgm[2], c(kp1.mul(&tkp3)));
    assert_eq!(gpgm[1], va.gen("J").unwrap().scale(&kp1.scale_int(3)));
    let expected0 = st(
        va,
        Expr::Sum(vec![
            Expr::times(Scalar::from_int(3), Expr::no(vec![g("J"), g("J")])),
            Expr::times(kp1.scale(&rat(3, 2)), g("J").d(1)),
            Expr::Neg(Box::new(g("S"))),
        ]),
    );
    assert_eq!(gpgm[0], expected0);
    let ss = ope_of(&p, "S", "S");
    let central = kp3.mul(&tkp3).mul(&Scalar::k().scale_int(3).add(&Scalar::one())).scale(&rat(-1, 2));
    assert_eq!(ss[3], c(central));
    assert!(ss[2].is_zero());
    assert_eq!(ss[1], va.gen("S").unwrap().scale(&kp3.scale_int(2)));
    assert_eq!(ope_of(&p, "S", "G+")[1], va.gen("G+").unwrap().scale(&kp3.scale(&rat(3, 2))));
    assert_eq!(ope_of(&p, "S", "J")[1], va.gen("J").unwrap().scale(&kp3));
}

#[test]
fn skew_partner_of_g_plus_g_minus() {
    // b_(n) a = sum_j (-1)^(n+j+1) D^(j)/j! (a_(n+j) b) for even a, b
    let p = pres();
    let va = p.algebra();
    let kp1 = Scalar::k().add(&Scalar::one());
    let tkp3 = Scalar::k().scale_int(2).add(&Scalar::from_int(3));
    let gmgp = ope_of(&p, "G-", "G+");
    assert_eq!(gmgp[2], State::scalar(kp1.mul(&tkp3).neg()));
    assert_eq!(gmgp[1], va.gen("J").unwrap().scale(&kp1.scale_int(3)));
}

#[test]
fn borcherds_on_generator_triples() {
    assert!(pres().borcherds_failures(-1..=1).unwrap().is_empty());
}

#[test]
fn specialization_at_critical_level() {
    let p = w23_presentation(Some(&rat_int(-3))).unwrap();
    assert_eq!(p.level(), Some(&rat_int(-3)));
    let ss = ope_of(&p, "S", "S");
    assert!(ss.iter().all(|s| s.is_zero()));
}

#[test]
fn realization_reproduces_critical_table() {
    let r = w23_realization().unwrap();
    for c in r.ope_checks().unwrap() {
        assert!(c.pass, "{:?}", c);
    }
    let m = verify_critical_match(&r).unwrap();
    assert!(m.pass(), "{:?}", m.mismatches());
    assert_eq!(r.algebra().render(r.j()), "-hb^-1*:x2 d2:");
}

#[test]
fn realized_fields_are_kazhdan_invariant() {
    let r = w23_realization().unwrap();
    for (name, w) in r.kazhdan_weights() {
        assert_eq!(w, Some(rat_int(0)), "{}", name);
    }
}

#[test]
fn transports_are_regular() {
    let r = w23_realization().unwrap();
    for c in r.transport_checks().unwrap() {
        assert!(c.pass, "{:?}", c);
    }
}

#[test]
fn displayed_relation_leaves_first_derivative_residual() {
    let r = w23_realization().unwrap();
    let rep = verify_singularity_relation(&r).unwrap();
    assert!(!rep.residual_zero);
    assert!(rep.second_derivative_holds);
    assert!(rep.symbol_matches && rep.classical_relation_holds && rep.corrections_vanish_classically);
    // residual = hb^2 (DĴ - D^2 Ĵ)
    let va = r.algebra();
    let (j, _, _) = hatted_fields(&r);
    let expected = va.derivative(&j).unwrap().sub(&va.derivative_n(&j, 2).unwrap()).scale(&Scalar::hbar_pow(2));
    assert_eq!(rep.residual, va.render(&expected));
}

#[test]
fn classical_limit_of_realization() {
    let r = w23_realization().unwrap();
    let rep = verify_classical_limit(&r).unwrap();
    assert!(rep.pass(), "{:?}", rep.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
    assert!(rep.checks.len() >= 9);
}

#[test]
fn nilpotent_part_of_slice() {
    let sd = SliceData::new().unwrap();
    let d = sd.coord("delta").unwrap();
    assert_eq!(sd.alpha_on_nilpotent_part().unwrap(), d.pow(2).scale(&Scalar::from_int(-3)));
    // gamma reads the (3,2) entry, the displayed E32 reads the vanishing (2,3) entry
    assert_eq!(sd.restrict(&sd.gamma().unwrap()).unwrap(), sd.coord("gamma").unwrap());
    assert!(sd.basis_on_slice("E32").unwrap().is_zero());
}

#[test]
fn slice_suite_passes() {
    let rep = slice_suite().unwrap();
    assert!(rep.pass(), "{:?}", rep);
    assert_eq!(rep.cocycles.len(), 6);
    // Tr X^3 = 3 det X on the nilpotent part; det = -2d^3 + 2 alpha d + beta gamma
    let sd = SliceData::new().unwrap();
    let (b, g, d) = (sd.coord("beta").unwrap(), sd.coord("gamma").unwrap(), sd.coord("delta").unwrap());
    let alpha = d.pow(2).scale(&Scalar::from_int(-3));
    let det = d.pow(3).scale(&Scalar::from_int(-2)).add(&alpha.mul(&d).scale(&Scalar::from_int(2))).add(&b.mul(&g));
    assert_eq!(rep.elimination, det.scale(&Scalar::from_int(3)).render(sd.table()));
    assert_eq!(rep.elimination_multiple.as_deref(), Some("-3"));
}

#[test]
fn corrected_s3_is_central() {
    let rep = centrality_check(3).unwrap();
    assert!(rep.pass(), "{:?}", rep.residuals);
    assert!(rep.tested_states > 4);
}

#[test]
fn displayed_s3_is_not_central() {
    let p = w23_presentation(Some(&rat_int(-3))).unwrap();
    let va = p.algebra();
    let g = Expr::gen;
    let displayed = st(
        va,
        Expr::Sum(vec![
            Expr::no(vec![g("G-"), g("G+")]),
            Expr::no(vec![g("S"), g("J")]),
            Expr::Neg(Box::new(Expr::no(vec![g("J"), g("J"), g("J")]))),
            Expr::times(Scalar::from_int(-3), Expr::no(vec![g("J"), g("J").d(1)])),
            Expr::Neg(Box::new(g("J").d(2))),
        ]),
    );
    let r = va.nprod(&displayed, 3, &va.gen("J").unwrap()).unwrap();
    assert_eq!(r, State::scalar(Scalar::from_int(12)));
}

/// Central weight-3 fields at k = -3 by a nullspace computation over the
/// span of all weight-3 normally ordered products.
#[test]
fn weight_three_centre_is_spanned_by_s3_and_ds() {
    let p = w23_presentation(Some(&rat_int(-3))).unwrap();
    let va = p.algebra();
    let g = Expr::gen;
    let basis = [
        Expr::no(vec![g("G-"), g("G+")]),
        Expr::no(vec![g("S"), g("J")]),
        Expr::no(vec![g("J"), g("J"), g("J")]),
        Expr::no(vec![g("J"), g("J").d(1)]),
        g("J").d(2),
        g("S").d(1),
    ];
    let states: Vec<State> = basis.iter().map(|e| st(va, e.clone())).collect();
    let mut rows: std::collections::BTreeMap<String, Vec<Rat>> = std::collections::BTreeMap::new();
    for (ci, s) in states.iter().enumerate() {
        for x in GENERATORS {
            for (n, r) in va.ope(s, &va.gen(x).unwrap()).unwrap() {
                for (m, c) in r.terms() {
                    let e = rows.entry(format!("{} {} {:?}", x, n, m)).or_insert_with(|| vec![rat_int(0); basis.len()]);
                    e[ci] = c.as_rat().unwrap();
                }
            }
        }
    }
    let cols: Vec<crate::linalg::SparseVec<Rat>> = (0..basis.len())
        .map(|c| crate::linalg::SparseVec::from_entries(rows.values().enumerate().map(|(r, v)| (r, v[c].clone())).collect()))
        .collect();
    let ker = crate::linalg::kernel(&cols);
    assert_eq!(ker.len(), 2);
    let combo = |v: &crate::linalg::SparseVec<Rat>| {
        states.iter().enumerate().fold(State::zero(), |acc, (i, s)| acc.add(&s.scale(&Scalar::from_rat(v.get(i)))))
    };
    let s3 = s3_field(va).unwrap();
    let ds = va.derivative(&va.gen("S").unwrap()).unwrap();
    // kernel combinations, S3 and DS together still span only two dimensions
    let mut index: std::collections::BTreeMap<String, usize> = std::collections::BTreeMap::new();
    let mut vecs = Vec::new();
    for st in ker.iter().map(combo).chain([s3, ds]) {
        assert!(!st.is_zero());
        let entries = st
            .terms()
            .map(|(m, c)| {
                let n = index.len();
                (*index.entry(format!("{:?}", m)).or_insert(n), c.as_rat().unwrap())
            })
            .collect();
        vecs.push(crate::linalg::SparseVec::from_entries(entries));
    }
    assert_eq!(crate::linalg::rank(&vecs), 2);
}
