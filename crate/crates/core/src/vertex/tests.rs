use super::*;
use crate::scalar::rat_int;
use crate::state::Expr;

fn hb() -> Scalar {
    Scalar::hbar_pow(1)
}

/// ħ-adic βγ chart in one variable; `x` optionally invertible.
fn betagamma(invertible: bool) -> VertexAlgebra {
    let mut b = VertexAlgebra::builder("bg")
        .generator(Generator::even("x"))
        .generator(Generator::even("d").with_conformal(rat_int(1)))
        .products("d", "x", vec![State::scalar(hb())]);
    if invertible {
        b = b.invertible("x");
    }
    b.build().unwrap()
}

fn sl2(level: Scalar) -> VertexAlgebra {
    let b = VertexAlgebra::builder("sl2")
        .generator(Generator::even("e"))
        .generator(Generator::even("h"))
        .generator(Generator::even("f"));
    let t = b.table().unwrap();
    let g = |n: &str| State::monomial(Monomial::single(Factor::gen(t.id(n).unwrap(), 0)));
    b.products("e", "f", vec![g("h"), State::scalar(level.clone())])
        .products("h", "e", vec![g("e").scale_int(2)])
        .products("h", "f", vec![g("f").scale_int(-2)])
        .products("h", "h", vec![State::zero(), State::scalar(level.scale_int(2))])
        .build()
        .unwrap()
}

#[test]
fn vacuum_axioms() {
    let a = betagamma(false);
    let x = a.gen("x").unwrap();
    assert_eq!(a.nprod(&x, -1, &State::vacuum()).unwrap(), x);
    assert!(a.nprod(&x, 0, &State::vacuum()).unwrap().is_zero());
    assert!(a.derivative(&State::vacuum()).unwrap().is_zero());
}

#[test]
fn skew_completion_gives_reverse_product() {
    let a = betagamma(false);
    let x = a.gen("x").unwrap();
    let d = a.gen("d").unwrap();
    assert_eq!(a.nprod(&x, 0, &d).unwrap(), State::scalar(hb().neg()));
    assert!(a.check_skew(&x, &d, 0).unwrap().0);
}

#[test]
fn contraction_into_square() {
    let a = betagamma(false);
    let x = a.gen("x").unwrap();
    let d = a.gen("d").unwrap();
    let xx = a.nprod(&x, -1, &x).unwrap();
    assert_eq!(a.nprod(&d, 0, &xx).unwrap(), x.scale(&hb().scale_int(2)));
}

#[test]
fn reordering_produces_quasi_associativity_correction() {
    let a = betagamma(false);
    let x = a.gen("x").unwrap();
    let d = a.gen("d").unwrap();
    // :x :x d:: is canonical; (xx)_(-1) d differs by 2ħ ∂x
    let xx = a.nprod(&x, -1, &x).unwrap();
    let lhs = a.nprod(&xx, -1, &d).unwrap();
    let nested = a.nprod(&x, -1, &a.nprod(&x, -1, &d).unwrap()).unwrap();
    let dx = a.derivative(&x).unwrap();
    assert_eq!(lhs, nested.sub(&dx.scale(&hb().scale_int(2))));
}

#[test]
fn affine_products() {
    let k = Scalar::k();
    let a = sl2(k.clone());
    let (e, h, f) = (a.gen("e").unwrap(), a.gen("h").unwrap(), a.gen("f").unwrap());
    assert_eq!(a.nprod(&e, 0, &f).unwrap(), h);
    assert_eq!(a.nprod(&h, 1, &h).unwrap(), State::scalar(k.scale_int(2)));
    assert!(a.nprod(&e, 2, &f).unwrap().is_zero());
    assert_eq!(a.nprod(&f, 0, &e).unwrap(), h.neg());
}

#[test]
fn borcherds_on_affine_composites() {
    let a = sl2(Scalar::k());
    let (e, h, f) = (a.gen("e").unwrap(), a.gen("h").unwrap(), a.gen("f").unwrap());
    let ef = a.nprod(&e, -1, &f).unwrap();
    let dh = a.derivative(&h).unwrap();
    for m in -2..=2 {
        for n in -2..=2 {
            for k in -2..=2 {
                let (ok, res) = a.check_borcherds(&ef, &dh, &e, m, n, k).unwrap();
                assert!(ok, "({},{},{}) residual {}", m, n, k, a.render(&res));
                let (ok, res) = a.check_borcherds(&f, &ef, &h, m, n, k).unwrap();
                assert!(ok, "({},{},{}) residual {}", m, n, k, a.render(&res));
            }
        }
    }
}

#[test]
fn derivative_is_translation() {
    let a = sl2(Scalar::k());
    let (e, f) = (a.gen("e").unwrap(), a.gen("f").unwrap());
    let s = a.nprod(&f, -1, &a.nprod(&e, -1, &e).unwrap()).unwrap();
    assert_eq!(a.derivative(&s).unwrap(), a.nprod(&s, -2, &State::vacuum()).unwrap());
}

#[test]
fn inverse_rules() {
    let a = betagamma(true);
    let x = a.gen("x").unwrap();
    let d = a.gen("d").unwrap();
    let xi = a.normal_form(&Expr::InvPower("x".into(), 1)).unwrap();
    assert_eq!(a.nprod(&x, -1, &xi).unwrap(), State::vacuum());
    assert_eq!(a.nprod(&xi, -1, &x).unwrap(), State::vacuum());
    let xi2 = a.normal_form(&Expr::InvPower("x".into(), 2)).unwrap();
    assert_eq!(a.nprod(&d, 0, &xi).unwrap(), xi2.scale(&hb().neg()));
    // ∂(x^-1) = -∂x x^-2
    let dxi = a.derivative(&xi).unwrap();
    let expect = a.nprod(&a.derivative(&x).unwrap(), -1, &xi2).unwrap().neg();
    assert_eq!(dxi, expect);
    for m in -2..=2 {
        for n in -1..=1 {
            for k in -2..=1 {
                let (ok, res) = a.check_borcherds(&d, &xi, &d, m, n, k).unwrap();
                assert!(ok, "({},{},{}) residual {}", m, n, k, a.render(&res));
            }
        }
    }
}

#[test]
fn negative_power_requires_flag() {
    let a = betagamma(false);
    assert_eq!(
        a.normal_form(&Expr::InvPower("x".into(), 1)),
        Err(VertexError::NegativePowerOfNonInvertible("x".into()))
    );
}

#[test]
fn states_of_other_algebras_are_rejected() {
    let a = betagamma(false);
    let b = betagamma(false);
    let x = a.gen("x").unwrap();
    assert_eq!(b.nprod(&x, 0, &x), Err(VertexError::IncompatibleAlgebras));
}

#[test]
fn symbol_levels() {
    let a = betagamma(false).rescale_hbar("bg", &[]).unwrap();
    let x = a.gen("x").unwrap();
    let s = a.symbol(&x.scale(&hb())).unwrap();
    assert_eq!(s.level, 1);
    let s = a.symbol(&a.gen("d").unwrap().scale(&Scalar::hbar_pow(-1))).unwrap();
    assert_eq!(s.level, -1);
    assert_eq!(a.symbol(&State::zero()), Err(VertexError::ZeroState));
}

#[test]
fn odd_generators_square_to_zero() {
    let a = VertexAlgebra::builder("cl")
        .generator(Generator::odd("p"))
        .generator(Generator::odd("ps"))
        .products("p", "ps", vec![State::vacuum()])
        .build()
        .unwrap();
    let p = a.gen("p").unwrap();
    let ps = a.gen("ps").unwrap();
    assert!(a.nprod(&p, -1, &p).unwrap().is_zero());
    assert_eq!(a.nprod(&ps, 0, &p).unwrap(), State::vacuum());
    assert!(a.check_skew(&p, &ps, 0).unwrap().0);
    let pps = a.nprod(&p, -1, &ps).unwrap();
    let psp = a.nprod(&ps, -1, &p).unwrap();
    assert_eq!(pps, psp.neg());
}
