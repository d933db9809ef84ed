//! Independent check of the n-product engine on free fields: states are
//! realized as polynomials in creation modes, and every n-product is
//! evaluated with explicit mode operators and normal-ordering sums truncated
//! by conformal weight.

use std::collections::BTreeMap;

use chiral_core::scalar::{rat_int, Scalar};
use chiral_core::state::{Expr, Factor, Generator, State};
use chiral_core::vertex::VertexAlgebra;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Creation mode `g_(-1-k)` is stored as `(g, k)`.
type Mode = (usize, u32);
type Fock = BTreeMap<Vec<Mode>, Scalar>;

struct FreeFields {
    names: Vec<&'static str>,
    odd: Vec<bool>,
    weight: Vec<i64>,
    /// `pairing[g][h]` is the scalar `g_(0) h`.
    pairing: Vec<Vec<Scalar>>,
}

#[derive(Clone, Debug)]
enum Tree {
    Gen(usize),
    D(Box<Tree>),
    No(Box<Tree>, Box<Tree>),
}

fn add_into(acc: &mut Fock, v: &Fock, c: &Scalar) {
    for (m, x) in v {
        let e = acc.entry(m.clone()).or_insert_with(Scalar::zero);
        *e = e.add(&x.mul(c));
        if e.is_zero() {
            acc.remove(m);
        }
    }
}

impl FreeFields {
    fn tree_weight(&self, t: &Tree) -> i64 {
        match t {
            Tree::Gen(g) => self.weight[*g],
            Tree::D(a) => self.tree_weight(a) + 1,
            Tree::No(a, b) => self.tree_weight(a) + self.tree_weight(b),
        }
    }

    fn tree_odd(&self, t: &Tree) -> bool {
        match t {
            Tree::Gen(g) => self.odd[*g],
            Tree::D(a) => self.tree_odd(a),
            Tree::No(a, b) => self.tree_odd(a) ^ self.tree_odd(b),
        }
    }

    fn vec_weight(&self, v: &Fock) -> i64 {
        v.keys().map(|m| m.iter().map(|(g, k)| self.weight[*g] + *k as i64).sum()).max().unwrap_or(0)
    }

    fn create(&self, g: usize, k: u32, v: &Fock) -> Fock {
        let mut out = Fock::new();
        for (m, c) in v {
            if self.odd[g] && m.contains(&(g, k)) {
                continue;
            }
            let pos = m.iter().position(|e| *e > (g, k)).unwrap_or(m.len());
            let odd_before = m[..pos].iter().filter(|(h, _)| self.odd[*h]).count();
            let sign = if self.odd[g] && odd_before % 2 == 1 { -1 } else { 1 };
            let mut nm = m.clone();
            nm.insert(pos, (g, k));
            add_into(&mut out, &Fock::from([(nm, c.clone())]), &Scalar::from_int(sign));
        }
        out
    }

    fn annihilate(&self, g: usize, n: u32, v: &Fock) -> Fock {
        let mut out = Fock::new();
        for (m, c) in v {
            let mut odd_before = 0;
            for (i, (h, k)) in m.iter().enumerate() {
                if *k == n && !self.pairing[g][*h].is_zero() {
                    let sign = if self.odd[g] && odd_before % 2 == 1 { -1 } else { 1 };
                    let mut nm = m.clone();
                    nm.remove(i);
                    add_into(&mut out, &Fock::from([(nm, c.mul(&self.pairing[g][*h]))]), &Scalar::from_int(sign));
                }
                if self.odd[*h] {
                    odd_before += 1;
                }
            }
        }
        out
    }

    /// `t_(n) v` via mode expansions.
    fn apply(&self, t: &Tree, n: i64, v: &Fock) -> Fock {
        if v.is_empty() {
            return Fock::new();
        }
        match t {
            Tree::Gen(g) => {
                if n < 0 {
                    self.create(*g, (-1 - n) as u32, v)
                } else {
                    self.annihilate(*g, n as u32, v)
                }
            }
            Tree::D(a) => {
                if n == 0 {
                    return Fock::new();
                }
                let mut out = Fock::new();
                add_into(&mut out, &self.apply(a, n - 1, v), &Scalar::from_int(-n));
                out
            }
            Tree::No(a, b) => {
                // (a_(-1) b)_(n) = sum_j a_(-1-j) b_(n+j) ± sum_j b_(n-1-j) a_(j)
                let wv = self.vec_weight(v);
                let mut out = Fock::new();
                let top = (wv + self.tree_weight(b) - 1 - n).max(-n - 1);
                for j in 0..=top.max(-1) {
                    let inner = self.apply(b, n + j, v);
                    add_into(&mut out, &self.apply(a, -1 - j, &inner), &Scalar::one());
                }
                let sign = if self.tree_odd(a) && self.tree_odd(b) { -1 } else { 1 };
                for j in 0..(wv + self.tree_weight(a)).max(0) {
                    let inner = self.apply(a, j, v);
                    add_into(&mut out, &self.apply(b, n - 1 - j, &inner), &Scalar::from_int(sign));
                }
                out
            }
        }
    }

    fn vacuum(&self) -> Fock {
        Fock::from([(Vec::new(), Scalar::one())])
    }

    fn of_state(&self, s: &State) -> Fock {
        let mut out = Fock::new();
        for (m, c) in s.terms() {
            let mut v = self.vacuum();
            let mut scale = Scalar::one();
            for f in m.factors().iter().rev() {
                match *f {
                    Factor::Gen { id, deriv } => {
                        v = self.create(id as usize, deriv as u32, &v);
                        for i in 1..=deriv as i64 {
                            scale = scale.scale_int(i);
                        }
                    }
                    Factor::Inv { .. } => panic!("no Fock image for inverses"),
                }
            }
            add_into(&mut out, &v, &c.mul(&scale));
        }
        out
    }

    fn expr(&self, t: &Tree) -> Expr {
        match t {
            Tree::Gen(g) => Expr::gen(self.names[*g]),
            Tree::D(a) => self.expr(a).d(1),
            Tree::No(a, b) => Expr::nprod(self.expr(a), -1, self.expr(b)),
        }
    }
}

/// βγ pair `x, d` with `d_(0) x = ħ` and a bc pair `p, ps` with `p_(0) ps = 1`.
fn setup() -> (FreeFields, VertexAlgebra) {
    let hb = Scalar::hbar_pow(1);
    let z = Scalar::zero();
    let one = Scalar::one();
    let ff = FreeFields {
        names: vec!["x", "d", "p", "ps"],
        odd: vec![false, false, true, true],
        weight: vec![0, 1, 1, 0],
        pairing: vec![
            vec![z.clone(), hb.neg(), z.clone(), z.clone()],
            vec![hb.clone(), z.clone(), z.clone(), z.clone()],
            vec![z.clone(), z.clone(), z.clone(), one.clone()],
            vec![z.clone(), z.clone(), one.clone(), z.clone()],
        ],
    };
    let va = VertexAlgebra::builder("free")
        .generator(Generator::even("x"))
        .generator(Generator::even("d").with_conformal(rat_int(1)))
        .generator(Generator::odd("p").with_conformal(rat_int(1)))
        .generator(Generator::odd("ps"))
        .products("d", "x", vec![State::scalar(hb)])
        .products("p", "ps", vec![State::vacuum()])
        .build()
        .unwrap();
    (ff, va)
}

fn random_tree<R: Rng>(rng: &mut R, depth: u32) -> Tree {
    let leaf = depth == 0 || rng.gen_bool(0.35);
    if leaf {
        let g = Tree::Gen(rng.gen_range(0..4));
        if rng.gen_bool(0.3) {
            Tree::D(Box::new(g))
        } else {
            g
        }
    } else {
        Tree::No(Box::new(random_tree(rng, depth - 1)), Box::new(random_tree(rng, depth - 1)))
    }
}

#[test]
fn reordered_square_times_momentum_matches_modes() {
    let (ff, va) = setup();
    let t = Tree::No(Box::new(Tree::No(Box::new(Tree::Gen(0)), Box::new(Tree::Gen(0)))), Box::new(Tree::Gen(1)));
    let s = va.normal_form(&ff.expr(&t)).unwrap();
    assert_eq!(ff.of_state(&s), ff.apply(&t, -1, &ff.vacuum()));
}

#[test]
fn momentum_zero_mode_on_square() {
    let (ff, va) = setup();
    let xx = Tree::No(Box::new(Tree::Gen(0)), Box::new(Tree::Gen(0)));
    let s = va.normal_form(&ff.expr(&xx)).unwrap();
    let d = va.gen("d").unwrap();
    let got = va.nprod(&d, 0, &s).unwrap();
    assert_eq!(ff.of_state(&got), ff.apply(&Tree::Gen(1), 0, &ff.of_state(&s)));
    assert_eq!(got, va.gen("x").unwrap().scale(&Scalar::hbar_pow(1).scale_int(2)));
}

#[test]
fn normal_forms_match_modes() {
    let (ff, va) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let t = random_tree(&mut rng, 3);
        let s = va.normal_form(&ff.expr(&t)).unwrap();
        assert_eq!(ff.of_state(&s), ff.apply(&t, -1, &ff.vacuum()), "tree {:?}", t);
    }
}

#[test]
fn nproducts_match_modes() {
    let (ff, va) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut nonzero = 0;
    for _ in 0..60 {
        let ta = random_tree(&mut rng, 2);
        let tb = random_tree(&mut rng, 2);
        let n = rng.gen_range(-2..=2);
        let a = va.normal_form(&ff.expr(&ta)).unwrap();
        let b = va.normal_form(&ff.expr(&tb)).unwrap();
        let got = va.nprod(&a, n, &b).unwrap();
        let want = ff.apply(&ta, n, &ff.of_state(&b));
        assert_eq!(ff.of_state(&got), want, "{:?}_({}) {:?}", ta, n, tb);
        if !got.is_zero() && got.len() > 1 {
            nonzero += 1;
        }
    }
    assert!(nonzero >= 15, "only {} nontrivial samples", nonzero);
}
