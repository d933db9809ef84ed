use std::process::{Command, Output};

use chiral_core::cli::{builtin_algebra, parse_expression, render_expr, Level};
use chiral_core::scalar::{rat, Scalar};
use chiral_core::state::{Expr, State};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chiral(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chiral")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn ope_renders_level_coefficient() {
    let o = chiral(&["ope", "--algebra", "w23", "--a", "J", "--b", "J"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("PASS  ope: (2k+3)/3 /(z-w)^2"), "{}", stdout(&o));
}

#[test]
fn level_specialization_and_truncation() {
    let o = chiral(&["--k", "2/3", "ope", "--algebra", "w23", "--a", "J", "--b", "J"]);
    assert!(stdout(&o).contains("ope: 13/9 /(z-w)^2"));
    let full = stdout(&chiral(&["nprod", "--algebra", "betagamma-hb", "--a", "d1", "--b", "x1", "--n", "0"]));
    assert!(full.contains("nprod: hb"), "{}", full);
    let cut = stdout(&chiral(&["--truncate-hbar", "0", "nprod", "--algebra", "betagamma-hb", "--a", "d1", "--b", "x1", "--n", "0"]));
    assert!(cut.contains("nprod: 0"), "{}", cut);
}

#[test]
fn empty_check_list_is_an_empty_passing_report() {
    let o = chiral(&["--format", "machine", "w23-verify", "--check"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["checks"].as_array().unwrap().len(), 0);
}

#[test]
fn relation_check_reports_both_forms() {
    let o = chiral(&["--format", "machine", "w23-verify", "--check", "relation"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let status = |id: &str| v["checks"].as_array().unwrap().iter().find(|c| c["id"] == id).unwrap()["status"].clone();
    assert_eq!(status("relation/as-displayed"), "fail");
    assert_eq!(status("relation/with-D2J"), "pass");
    assert_eq!(status("relation/symbol"), "pass");
}

#[test]
fn machine_reports_are_deterministic() {
    let strip = |o: Output| stdout(&o).lines().filter(|l| !l.contains("elapsed_ms")).collect::<Vec<_>>().join("\n");
    let args = ["--format", "machine", "check-borcherds", "--algebra", "clifford", "--range", "1"];
    assert_eq!(strip(chiral(&args)), strip(chiral(&args)));
}

#[test]
fn computation_errors_stay_per_check() {
    let o = chiral(&["nprod", "--algebra", "w23", "--a", "J", "--b", "Q", "--n", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("ERROR nprod"));
    let o = chiral(&["ope", "--algebra", "nope", "--a", "J", "--b", "J"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_algebras_extend_the_builtins() {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR"));
    let good = dir.join("bg.toml");
    std::fs::write(
        &good,
        "[[algebra]]\nname = \"bg\"\n[[algebra.generator]]\nname = \"x\"\nconformal = \"0\"\n[[algebra.generator]]\nname = \"d\"\nconformal = \"1\"\n[[algebra.product]]\na = \"d\"\nb = \"x\"\nvalues = [\"hb\"]\n",
    )
    .unwrap();
    let o = chiral(&["--config", good.to_str().unwrap(), "ope", "--algebra", "bg", "--a", "x", "--b", "d"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ope: -hb /(z-w)"), "{}", stdout(&o));
    let o = chiral(&["--config", good.to_str().unwrap(), "ope", "--algebra", "w23", "--a", "J", "--b", "J"]);
    assert_eq!(o.status.code(), Some(0));

    let clash = dir.join("clash.toml");
    std::fs::write(&clash, "[[algebra]]\nname = \"w23\"\n").unwrap();
    let o = chiral(&["--config", clash.to_str().unwrap(), "ope", "--algebra", "w23", "--a", "J", "--b", "J"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("w23"));
}

#[test]
fn spelled_fields_normalize() {
    let va = builtin_algebra("betagamma-hb", &Level::Symbolic).unwrap();
    let j = va.normal_form(&parse_expression("-(1/hb)*:x1 d1:").unwrap()).unwrap();
    let expected = va.normal_form(&Expr::times(Scalar::hbar_pow(-1).neg(), Expr::no(vec![Expr::gen("x1"), Expr::gen("d1")]))).unwrap();
    assert_eq!(j, expected);
}

fn expr_tree() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["J", "G+", "G-", "S", "x1", "d2"]).prop_map(Expr::gen),
        (-4i64..5, 1i64..4, -2i32..3).prop_map(|(p, q, h)| Expr::Scalar(Scalar::from_rat(rat(p, q)).mul(&Scalar::q_pow(h)))),
        (prop::sample::select(vec!["x1", "x2"]), 1u32..3).prop_map(|(g, n)| Expr::InvPower(g.into(), n)),
        Just(Expr::Scalar(Scalar::k().add(&Scalar::from_int(3)))),
    ];
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), 1u32..3).prop_map(|(a, p)| a.d(p)),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::NormalOrder),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::Sum),
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), 1u32..3).prop_map(|(a, n)| a.pow(n)),
            (inner.clone(), -2i64..3, inner.clone()).prop_map(|(a, n, b)| Expr::Product(Box::new(a), n, Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Scaled(Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rendered_trees_reparse_equal(e in expr_tree()) {
        let t = parse_expression(&render_expr(&e)).unwrap();
        prop_assert_eq!(parse_expression(&render_expr(&t)).unwrap(), t);
    }

    #[test]
    fn rendered_states_parse_back(seed in any::<u64>(), algebra in prop::sample::select(vec!["w23", "betagamma-hb", "affine-sl2-hb", "clifford"])) {
        let va = builtin_algebra(algebra, &Level::Symbolic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = State::zero();
        for i in 0..3 {
            let c = Scalar::from_rat(rat(i as i64 - 1, 2 + i as i64)).add(&Scalar::k()).mul(&Scalar::q_pow(i - 1));
            s = s.add(&va.sample_monomial(&mut rng, 3, 2).scale(&c));
        }
        let back = va.normal_form(&parse_expression(&va.render(&s)).unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }
}
