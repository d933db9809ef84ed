//! Exact sparse linear algebra over `Q` and `Q(k)`: incremental echelon
//! bases that track the combination producing each reduced vector.

use num_traits::{One, Zero};

use crate::scalar::{Rat, RatFn};

/// Exact field used by the echelon routines.
pub trait Field: Clone + PartialEq + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Inverse of a nonzero element.
    fn inv(&self) -> Self;

    fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }
}

impl Field for Rat {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Self {
        self.recip()
    }
}

impl Field for RatFn {
    fn zero() -> Self {
        RatFn::zero()
    }
    fn one() -> Self {
        RatFn::one()
    }
    fn is_zero(&self) -> bool {
        RatFn::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        RatFn::add(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        RatFn::mul(self, other)
    }
    fn neg(&self) -> Self {
        RatFn::neg(self)
    }
    fn inv(&self) -> Self {
        self.recip().expect("inverse of a nonzero rational function")
    }
}

/// Sparse vector: sorted `(index, nonzero value)` pairs.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseVec<F> {
    entries: Vec<(usize, F)>,
}

impl<F: Field> SparseVec<F> {
    pub fn new() -> Self {
        SparseVec { entries: Vec::new() }
    }

    pub fn from_entries(mut entries: Vec<(usize, F)>) -> Self {
        entries.sort_by_key(|(i, _)| *i);
        let mut out: Vec<(usize, F)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match out.last_mut() {
                Some((j, w)) if *j == i => *w = w.add(&v),
                _ => out.push((i, v)),
            }
        }
        out.retain(|(_, v)| !v.is_zero());
        SparseVec { entries: out }
    }

    pub fn unit(i: usize) -> Self {
        SparseVec { entries: vec![(i, F::one())] }
    }

    pub fn entries(&self) -> &[(usize, F)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn leading(&self) -> Option<&(usize, F)> {
        self.entries.first()
    }

    pub fn get(&self, i: usize) -> F {
        match self.entries.binary_search_by_key(&i, |(j, _)| *j) {
            Ok(p) => self.entries[p].1.clone(),
            Err(_) => F::zero(),
        }
    }

    pub fn scale(&self, c: &F) -> Self {
        if c.is_zero() {
            return SparseVec::new();
        }
        SparseVec { entries: self.entries.iter().map(|(i, v)| (*i, v.mul(c))).collect() }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: &F, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some((i, x)), Some((j, y))) => {
                    if i < j {
                        out.push((*i, x.clone()));
                        a.next();
                    } else if j < i {
                        out.push((*j, y.mul(c)));
                        b.next();
                    } else {
                        let s = x.add(&y.mul(c));
                        if !s.is_zero() {
                            out.push((*i, s));
                        }
                        a.next();
                        b.next();
                    }
                }
                (Some((i, x)), None) => {
                    out.push((*i, x.clone()));
                    a.next();
                }
                (None, Some((j, y))) => {
                    out.push((*j, y.mul(c)));
                    b.next();
                }
                (None, None) => break,
            }
        }
        SparseVec { entries: out }
    }
}

/// Echelon basis of a growing span. Each stored row has leading entry 1 at
/// a distinct pivot and remembers the combination of inserted vectors it
/// equals.
#[derive(Clone, Debug, Default)]
pub struct Echelon<F> {
    rows: Vec<(SparseVec<F>, SparseVec<F>)>,
    pivots: std::collections::HashMap<usize, usize>,
    inserted: usize,
}

impl<F: Field> Echelon<F> {
    pub fn new() -> Self {
        Echelon { rows: Vec::new(), pivots: std::collections::HashMap::new(), inserted: 0 }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the basis; returns the remainder and the
    /// combination of inserted vectors subtracted from it.
    pub fn reduce(&self, v: &SparseVec<F>) -> (SparseVec<F>, SparseVec<F>) {
        let mut rem = v.clone();
        let mut used = SparseVec::new();
        let mut pos = 0;
        while pos < rem.entries.len() {
            let (col, c) = rem.entries[pos].clone();
            match self.pivots.get(&col) {
                Some(&r) => {
                    let (row, hist) = &self.rows[r];
                    let minus = c.neg();
                    rem = rem.axpy(&minus, row);
                    used = used.axpy(&minus, hist);
                }
                None => pos += 1,
            }
        }
        (rem, used)
    }

    pub fn contains(&self, v: &SparseVec<F>) -> bool {
        self.reduce(v).0.is_zero()
    }

    /// Inserts `v` as the next input vector. Returns `None` when it enlarges
    /// the span, or `Some(c)` with `sum_j c_j v_j = 0` (a kernel relation,
    /// `c` indexed by insertion order) when it does not.
    pub fn insert(&mut self, v: &SparseVec<F>) -> Option<SparseVec<F>> {
        let idx = self.inserted;
        self.inserted += 1;
        let (rem, used) = self.reduce(v);
        let hist = used.axpy(&F::one(), &SparseVec::unit(idx));
        match rem.leading().cloned() {
            None => Some(hist),
            Some((col, c)) => {
                let inv = c.inv();
                self.pivots.insert(col, self.rows.len());
                self.rows.push((rem.scale(&inv), hist.scale(&inv)));
                None
            }
        }
    }
}

/// Rank of a list of vectors.
pub fn rank<F: Field>(vectors: &[SparseVec<F>]) -> usize {
    let mut e = Echelon::new();
    for v in vectors {
        e.insert(v);
    }
    e.rank()
}

/// Basis of `{c : sum_j c_j v_j = 0}`.
pub fn kernel<F: Field>(vectors: &[SparseVec<F>]) -> Vec<SparseVec<F>> {
    let mut e = Echelon::new();
    vectors.iter().filter_map(|v| e.insert(v)).collect()
}

/// Some `c` with `sum_j c_j v_j = target`, if one exists.
pub fn solve<F: Field>(vectors: &[SparseVec<F>], target: &SparseVec<F>) -> Option<SparseVec<F>> {
    let mut e = Echelon::new();
    for v in vectors {
        e.insert(v);
    }
    let (rem, used) = e.reduce(target);
    if rem.is_zero() {
        Some(used.scale(&F::one().neg()))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat_int, Poly};

    fn v(e: &[(usize, i64)]) -> SparseVec<Rat> {
        SparseVec::from_entries(e.iter().map(|(i, x)| (*i, rat_int(*x))).collect())
    }

    #[test]
    fn kernel_of_dependent_columns() {
        let vs = [v(&[(0, 1), (1, 2)]), v(&[(1, 1)]), v(&[(0, 2), (1, 7)])];
        assert_eq!(rank(&vs), 2);
        let ker = kernel(&vs);
        assert_eq!(ker.len(), 1);
        // 2 v0 + 3 v1 - v2 = 0
        let c = &ker[0];
        let combo = vs.iter().enumerate().fold(SparseVec::new(), |acc, (j, x)| acc.axpy(&c.get(j), x));
        assert!(combo.is_zero());
        assert_eq!(c.get(0) * rat_int(3), c.get(1) * rat_int(2));
    }

    #[test]
    fn solve_reports_inconsistency() {
        let vs = [v(&[(0, 1)]), v(&[(0, 1), (1, 1)])];
        let c = solve(&vs, &v(&[(1, 3)])).unwrap();
        assert_eq!((c.get(0), c.get(1)), (rat_int(-3), rat_int(3)));
        assert!(solve(&vs[..1], &v(&[(1, 1)])).is_none());
    }

    #[test]
    fn rank_over_rational_functions_drops_nowhere_generically() {
        let k = RatFn::var();
        let kp1 = RatFn::from_poly(Poly::from_coeffs(vec![rat_int(1), rat_int(1)]));
        let a = SparseVec::from_entries(vec![(0, k.clone()), (1, RatFn::one())]);
        let b = SparseVec::from_entries(vec![(0, kp1), (1, RatFn::one())]);
        assert_eq!(rank(&[a, b]), 2);
    }
}
