//! Brute-force truncated BRST cohomology: independent enumeration of
//! PBW products, `d` evaluated by the engine, dense ranks over `Q` at a
//! specialized level.

use std::collections::BTreeMap;

use chiral_core::brst::BrstComplex;
use chiral_core::scalar::{Rat, Scalar};
use chiral_core::state::{GenId, Monomial, Parity, State};
use num_traits::{One, ToPrimitive, Zero};

/// Generator with derivative order and its weights; `w2` is twice the cell weight.
#[derive(Clone, Debug)]
struct Slot {
    id: GenId,
    deriv: u16,
    w2: i64,
    conformal: Rat,
    ghost: i32,
    odd: bool,
}

fn slots(c: &BrstComplex, max_w2: i64, max_conformal: &Rat) -> Vec<Slot> {
    let t = c.algebra().table();
    let mut out = Vec::new();
    for id in 0..t.len() as GenId {
        let g = t.get(id);
        assert!(g.kazhdan_weight.is_integer(), "oracle needs integral Kazhdan weights");
        let k = g.kazhdan_weight.to_integer().to_i64().unwrap();
        for p in 0u16.. {
            let w2 = k + 2 * i64::from(p);
            let conformal = &g.conformal_weight + Rat::from_integer(p.into());
            assert!(w2 > 0 || conformal > Rat::zero(), "weightless slot");
            if w2 > max_w2 || &conformal > max_conformal {
                break;
            }
            out.push(Slot { id, deriv: p, w2, conformal, ghost: g.ghost_number, odd: g.parity == Parity::Odd });
        }
    }
    out
}

/// Multisets of slots with total `w2` exactly `target`, ghost `ghost` and
/// conformal weight `<= max_conformal`; odd slots appear at most once.
fn multisets(slots: &[Slot], target: i64, ghost: i32, max_conformal: &Rat) -> Vec<Vec<Slot>> {
    fn go(i: usize, slots: &[Slot], left: i64, ghost: i32, conf: Rat, max: &Rat, cur: &mut Vec<Slot>, out: &mut Vec<Vec<Slot>>) {
        if i == slots.len() {
            if left == 0 && ghost == 0 {
                out.push(cur.clone());
            }
            return;
        }
        go(i + 1, slots, left, ghost, conf.clone(), max, cur, out);
        let s = &slots[i];
        let (mut l, mut g, mut c, mut n) = (left, ghost, conf, 0);
        loop {
            l -= s.w2;
            g -= s.ghost;
            c += &s.conformal;
            if l < 0 || &c > max {
                break;
            }
            cur.push(s.clone());
            n += 1;
            go(i + 1, slots, l, g, c.clone(), max, cur, out);
            if s.odd {
                break;
            }
        }
        cur.truncate(cur.len() - n);
    }
    let mut out = Vec::new();
    go(0, slots, target, ghost, Rat::zero(), max_conformal, &mut Vec::new(), &mut out);
    out
}

fn state_of(c: &BrstComplex, ms: &[Slot]) -> State {
    let va = c.algebra();
    let parts: Vec<State> = ms
        .iter()
        .map(|s| (0..s.deriv).fold(va.generator_state(s.id), |acc, _| va.derivative(&acc).unwrap()))
        .collect();
    let s = if parts.is_empty() { State::vacuum().with_tag(va.id()) } else { va.normal_order(&parts).unwrap() };
    let k: i64 = ms.iter().map(|s| s.w2 - 2 * i64::from(s.deriv)).sum();
    s.scale(&Scalar::q_pow(-i32::try_from(k).unwrap()))
}

fn conformal_of(c: &BrstComplex, m: &Monomial) -> Rat {
    let t = c.algebra().table();
    m.factors().iter().map(|f| &t.get(f.id()).conformal_weight + Rat::from_integer(f.deriv().into())).sum()
}

/// `d` of each source as a column indexed by target monomials, at `k = k0`.
fn columns(c: &BrstComplex, sources: &[Vec<Slot>], k0: &Rat, index: &mut BTreeMap<Monomial, usize>) -> Vec<BTreeMap<usize, Rat>> {
    let t = c.algebra().table();
    sources
        .iter()
        .map(|ms| {
            let img = c.apply_d(&state_of(c, ms)).unwrap();
            let mut col = BTreeMap::new();
            for (m, coeff) in img.terms() {
                let km = t.monomial_weight(m, chiral_core::state::GradingKind::Kazhdan).to_integer().to_i64().unwrap();
                let (e, r) = coeff.as_monomial().expect("single q power");
                assert_eq!(i64::from(e), -km, "non-invariant coefficient");
                let n = index.len();
                let i = *index.entry(m.clone()).or_insert(n);
                col.insert(i, r.eval(k0).expect("regular at k0"));
            }
            col
        })
        .collect()
}

/// Rank by dense Gaussian elimination.
pub fn dense_rank(cols: &[BTreeMap<usize, Rat>], nrows: usize) -> usize {
    let mut m: Vec<Vec<Rat>> = cols.iter().map(|c| (0..nrows).map(|r| c.get(&r).cloned().unwrap_or_else(Rat::zero)).collect()).collect();
    let mut rank = 0;
    for r in 0..nrows {
        let Some(p) = (rank..m.len()).find(|&i| !m[i][r].is_zero()) else { continue };
        m.swap(rank, p);
        let inv = Rat::one() / &m[rank][r];
        for i in 0..m.len() {
            if i != rank && !m[i][r].is_zero() {
                let f = &m[i][r] * &inv;
                for j in r..nrows {
                    let x = &m[rank][j] * &f;
                    m[i][j] -= x;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// `dim (Z_N + B_{N+2}) / B_{N+2}` in the cell `(w, ghost)`:
/// `|F_N| - rank d|F_N - rank B + rank pi_{>N} B`.
pub fn cohomology_dim(c: &BrstComplex, w: i64, ghost: i32, n: i64, k0: &Rat) -> usize {
    let big = Rat::from_integer((n + 2).into());
    let small = Rat::from_integer(n.into());
    let sl = slots(c, 2 * w, &big);
    let here: Vec<Vec<Slot>> = multisets(&sl, 2 * w, ghost, &small);
    let below: Vec<Vec<Slot>> = multisets(&sl, 2 * w, ghost - 1, &big);
    let mut index = BTreeMap::new();
    let d_here = columns(c, &here, k0, &mut index);
    let b = columns(c, &below, k0, &mut index);
    let nrows = index.len();
    let high: Vec<usize> = index.iter().filter(|(m, _)| conformal_of(c, m) > small).map(|(_, i)| *i).collect();
    let proj: Vec<BTreeMap<usize, Rat>> = b.iter().map(|col| col.iter().filter(|(i, _)| high.contains(i)).map(|(i, x)| (*i, x.clone())).collect()).collect();
    let dim = here.len() as i64 - dense_rank(&d_here, nrows) as i64 - dense_rank(&b, nrows) as i64 + dense_rank(&proj, nrows) as i64;
    usize::try_from(dim).expect("boundaries inside F_N exceed the cycles")
}
