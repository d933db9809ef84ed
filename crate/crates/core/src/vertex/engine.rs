//! Recursive evaluation of n-products on canonical monomials.
//!
//! Every rule below is a specialization of the Borcherds identity:
//! quasi-associativity splits a multi-factor left argument, the commutator
//! formula moves a single factor through the right argument, and the
//! inverse of an invertible generator is handled by the formal quotient rule.

use std::rc::Rc;

use num_traits::One;

use super::VertexAlgebra;
use crate::scalar::{Rat, Scalar};
use crate::state::{koszul, Factor, Monomial, Parity, State};

pub(crate) fn binomial(n: i64, j: u32) -> Rat {
    let mut acc = Rat::one();
    for i in 0..j as i64 {
        acc *= Rat::from_integer((n - i).into());
        acc /= Rat::from_integer((i + 1).into());
    }
    acc
}

/// `n (n-1) ... (n-d+1)`.
pub(crate) fn falling(n: i64, d: u32) -> Rat {
    let mut acc = Rat::one();
    for i in 0..d as i64 {
        acc *= Rat::from_integer((n - i).into());
    }
    acc
}

pub(crate) fn factorial(n: u32) -> Rat {
    falling(n as i64, n)
}

fn sign_scalar(s: i64) -> Scalar {
    Scalar::from_int(s)
}

fn at(v: &[State], i: i64) -> Option<&State> {
    if i < 0 {
        None
    } else {
        v.get(i as usize)
    }
}

fn trim(mut v: Vec<State>) -> Vec<State> {
    while v.last().is_some_and(|s| s.is_zero()) {
        v.pop();
    }
    v
}

impl VertexAlgebra {
    pub(crate) fn factor_parity(&self, f: Factor) -> Parity {
        self.table.parity_of_factor(f)
    }

    pub(crate) fn mono_parity(&self, m: &Monomial) -> Parity {
        self.table.parity_of_monomial(m)
    }

    /// `∂^j f` as a state.
    pub(crate) fn factor_deriv(&self, f: Factor, j: u32) -> Rc<State> {
        match f {
            Factor::Gen { id, deriv } => Rc::new(State::monomial(Monomial::single(Factor::gen(id, deriv + j as u16)))),
            Factor::Inv { id } => {
                if j == 0 {
                    return Rc::new(State::monomial(Monomial::single(f)));
                }
                if let Some(hit) = self.cache.borrow().inv_deriv.get(&(id, j)) {
                    return hit.clone();
                }
                let out = if j == 1 {
                    let m = Monomial::from_sorted(vec![Factor::gen(id, 1), f, f]);
                    State::term(m, Scalar::from_int(-1))
                } else {
                    let prev = self.factor_deriv(f, j - 1);
                    self.derivative_state(&prev)
                };
                let out = Rc::new(out);
                self.cache.borrow_mut().inv_deriv.insert((id, j), out.clone());
                out
            }
        }
    }

    pub(crate) fn derivative_state(&self, s: &State) -> State {
        let mut out = State::zero();
        for (m, c) in s.terms() {
            out.add_scaled(&self.derivative_mono(m), c);
        }
        out
    }

    pub(crate) fn derivative_state_n(&self, s: &State, p: u32) -> State {
        let mut cur = s.clone();
        for _ in 0..p {
            cur = self.derivative_state(&cur);
        }
        cur
    }

    fn derivative_mono(&self, m: &Monomial) -> Rc<State> {
        if m.is_vacuum() {
            return Rc::new(State::zero());
        }
        if let Some(hit) = self.cache.borrow().deriv.get(m) {
            return hit.clone();
        }
        let f = m.head().unwrap();
        let rest = m.tail();
        let df = self.factor_deriv(f, 1);
        let mut out = self.nprod_sm(&df, -1, &rest);
        let dr = self.derivative_mono(&rest);
        out.add_assign(&self.left_mul_state(f, &dr));
        let out = Rc::new(out);
        self.cache.borrow_mut().deriv.insert(m.clone(), out.clone());
        out
    }

    /// `f_(-1) s`.
    pub(crate) fn left_mul_state(&self, f: Factor, s: &State) -> State {
        let mut out = State::zero();
        for (m, c) in s.terms() {
            out.add_scaled(&self.left_mul(f, m), c);
        }
        out
    }

    /// `f_(n) s` for `n < 0`, as `(1/j!) (∂^j f)_(-1) s` with `j = -n-1`.
    fn factor_neg(&self, f: Factor, n: i64, s: &State) -> State {
        debug_assert!(n < 0);
        if n == -1 {
            return self.left_mul_state(f, s);
        }
        let j = (-n - 1) as u32;
        let df = self.factor_deriv(f, j);
        let mut out = State::zero();
        for (dm, dc) in df.terms() {
            if dm.len() == 1 {
                out.add_scaled(&self.left_mul_state(dm.head().unwrap(), s), dc);
            } else {
                for (m, c) in s.terms() {
                    out.add_scaled(&self.neg_mm(dm, -1, m), &dc.mul(c));
                }
            }
        }
        out.scale(&Scalar::from_rat(factorial(j).recip()))
    }

    /// `f_(-1) m` for a canonical monomial `m`.
    pub(crate) fn left_mul(&self, f: Factor, m: &Monomial) -> Rc<State> {
        let h = match m.head() {
            None => return Rc::new(State::monomial(Monomial::single(f))),
            Some(h) => h,
        };
        if f < h && !f.is_partner_of(h) {
            return Rc::new(State::monomial(m.prepend(f)));
        }
        let f_odd = self.factor_parity(f).is_odd();
        if f == h && !f_odd {
            return Rc::new(State::monomial(m.prepend(f)));
        }
        let key = (f, m.clone());
        if let Some(hit) = self.cache.borrow().left_mul.get(&key) {
            return hit.clone();
        }
        let r = m.tail();
        let out = if f.is_partner_of(h) {
            // f_(-1)(h_(-1) r) = r - sum_j [f_(-2-j)(h_(j) r) + h_(-2-j)(f_(j) r)]
            let mut out = State::monomial(r.clone());
            let hr = self.ope_mm(&Monomial::single(h), &r);
            for (j, s) in hr.iter().enumerate() {
                out.add_scaled(&self.factor_neg(f, -2 - j as i64, s), &sign_scalar(-1));
            }
            let fr = self.ope_mm(&Monomial::single(f), &r);
            for (j, s) in fr.iter().enumerate() {
                out.add_scaled(&self.factor_neg(h, -2 - j as i64, s), &sign_scalar(-1));
            }
            out
        } else if f == h {
            // odd square: f_(-1) f_(-1) = (1/2) [f_(-1), f_(-1)]
            let p = self.fac_prod(f, f);
            let mut out = State::zero();
            for (j, pj) in p.iter().enumerate() {
                let sgn = if j % 2 == 0 { 1 } else { -1 };
                out.add_scaled(&self.nprod_ss_internal(pj, -2 - j as i64, &State::monomial(r.clone())), &sign_scalar(sgn));
            }
            out.scale(&Scalar::from_frac(1, 2))
        } else {
            let sgn = koszul(self.factor_parity(f), self.factor_parity(h));
            let inner = self.left_mul(f, &r);
            let mut out = self.left_mul_state(h, &inner).scale_int(sgn);
            let p = self.fac_prod(f, h);
            for (j, pj) in p.iter().enumerate() {
                let s = if j % 2 == 0 { 1 } else { -1 };
                out.add_scaled(&self.nprod_sm(pj, -2 - j as i64, &r), &sign_scalar(s));
            }
            out
        };
        let out = Rc::new(out);
        self.cache.borrow_mut().left_mul.insert(key, out.clone());
        out
    }

    /// All `f_(j) h` for two single factors.
    pub(crate) fn fac_prod(&self, f: Factor, h: Factor) -> Rc<Vec<State>> {
        if let Some(hit) = self.cache.borrow().fac.get(&(f, h)) {
            return hit.clone();
        }
        let out = match (f, h) {
            (Factor::Inv { .. }, Factor::Inv { .. }) => Vec::new(),
            (Factor::Gen { id: g, deriv: d }, Factor::Gen { id: g2, deriv: d2 }) => {
                let t = self.products[g as usize][g2 as usize].clone();
                let len = t.len() + d as usize + d2 as usize;
                let mut out = Vec::with_capacity(len);
                for j in 0..len as i64 {
                    let mut acc = State::zero();
                    let m = j - d as i64;
                    if m >= 0 {
                        // g_(m) ∂^{d2} g2 = sum_i C(d2,i) (m)_i ∂^{d2-i}(g_(m-i) g2)
                        for i in 0..=(d2 as i64).min(m) {
                            if let Some(tm) = at(&t, m - i) {
                                if tm.is_zero() {
                                    continue;
                                }
                                let c = binomial(d2 as i64, i as u32) * falling(m, i as u32);
                                let ds = self.derivative_state_n(tm, d2 as u32 - i as u32);
                                acc.add_scaled(&ds, &Scalar::from_rat(c));
                            }
                        }
                        let pref = falling(j, d as u32) * if d % 2 == 0 { Rat::one() } else { -Rat::one() };
                        acc = acc.scale(&Scalar::from_rat(pref));
                    }
                    out.push(acc);
                }
                out
            }
            (Factor::Gen { id: g, deriv: d }, Factor::Inv { id: s }) => {
                let t = self.products[g as usize][s as usize].clone();
                let sq = Monomial::from_sorted(vec![h, h]);
                let len = t.len() + d as usize;
                let mut out = Vec::with_capacity(len);
                for j in 0..len as i64 {
                    let m = j - d as i64;
                    let mut acc = State::zero();
                    if let Some(tm) = at(&t, m) {
                        let c = tm.as_scalar().expect("validated: products into an invertible generator are scalar");
                        let pref = falling(j, d as u32) * if d % 2 == 0 { Rat::one() } else { -Rat::one() };
                        acc = State::term(sq.clone(), c.neg().mul(&Scalar::from_rat(pref)));
                    }
                    out.push(acc);
                }
                out
            }
            (Factor::Inv { .. }, Factor::Gen { .. }) => {
                // skew-symmetry with an even left argument
                let y = self.fac_prod(h, f);
                let mut out = Vec::with_capacity(y.len());
                for n in 0..y.len() {
                    let mut acc = State::zero();
                    for l in 0..(y.len() - n) {
                        let term = self.derivative_state_n(&y[n + l], l as u32);
                        let mut c = factorial(l as u32).recip();
                        if (n + 1 + l) % 2 == 1 {
                            c = -c;
                        }
                        acc.add_scaled(&term, &Scalar::from_rat(c));
                    }
                    out.push(acc);
                }
                out
            }
        };
        let out = Rc::new(trim(out));
        self.cache.borrow_mut().fac.insert((f, h), out.clone());
        out
    }

    /// All `a_(n) b`, `n >= 0`, trailing zeros trimmed.
    pub(crate) fn ope_mm(&self, a: &Monomial, b: &Monomial) -> Rc<Vec<State>> {
        if a.is_vacuum() || b.is_vacuum() {
            return Rc::new(Vec::new());
        }
        let key = (a.clone(), b.clone());
        if let Some(hit) = self.cache.borrow().ope.get(&key) {
            return hit.clone();
        }
        let out = if a.len() == 1 {
            self.ope_factor(a.head().unwrap(), b)
        } else {
            self.ope_split(a, b)
        };
        let out = Rc::new(trim(out));
        self.cache.borrow_mut().ope.insert(key, out.clone());
        out
    }

    fn ope_factor(&self, f: Factor, b: &Monomial) -> Vec<State> {
        if b.is_vacuum() {
            return Vec::new();
        }
        if let Factor::Gen { id, deriv } = f {
            if deriv > 0 {
                // (∂^d g)_(n) = (-1)^d (n)_d g_(n-d)
                let base = self.ope_mm(&Monomial::single(Factor::gen(id, 0)), b);
                let d = deriv as usize;
                let mut out = vec![State::zero(); base.len() + d];
                for (i, s) in base.iter().enumerate() {
                    let n = i + d;
                    let mut c = falling(n as i64, d as u32);
                    if d % 2 == 1 {
                        c = -c;
                    }
                    out[n] = s.scale(&Scalar::from_rat(c));
                }
                return out;
            }
        }
        // f_(n)(h_(-1) r) = ± h_(-1)(f_(n) r) + sum_{j<=n} C(n,j) (f_(j)h)_(n-1-j) r
        let h = b.head().unwrap();
        let r = b.tail();
        let a_r = self.ope_mm(&Monomial::single(f), &r);
        let p = self.fac_prod(f, h);
        let rs = State::monomial(r.clone());
        let q: Vec<Vec<State>> = p.iter().map(|pj| self.ope_sm(pj, &rs)).collect();
        let mut n_max = a_r.len().max(p.len());
        for (j, qj) in q.iter().enumerate() {
            n_max = n_max.max(j + 1 + qj.len());
        }
        let sgn = koszul(self.factor_parity(f), self.factor_parity(h));
        let mut out = Vec::with_capacity(n_max);
        for n in 0..n_max {
            let mut acc = match a_r.get(n) {
                Some(s) => self.left_mul_state(h, s).scale_int(sgn),
                None => State::zero(),
            };
            for (j, pj) in p.iter().enumerate().take(n + 1) {
                let c = Scalar::from_rat(binomial(n as i64, j as u32));
                if j == n {
                    acc.add_scaled(&self.nprod_sm(pj, -1, &r), &c);
                } else if let Some(s) = q[j].get(n - 1 - j) {
                    acc.add_scaled(s, &c);
                }
            }
            out.push(acc);
        }
        out
    }

    fn ope_split(&self, a: &Monomial, c: &Monomial) -> Vec<State> {
        // (f_(-1)R)_(n) c = sum_j f_(-1-j)(R_(n+j) c) + σ sum_j R_(n-1-j)(f_(j) c)
        let f = a.head().unwrap();
        let r = a.tail();
        let b = self.ope_mm(&r, c);
        let fc = self.ope_mm(&Monomial::single(f), c);
        let g: Vec<Vec<State>> = fc.iter().map(|s| self.ope_ms(&r, s)).collect();
        let mut n_max = b.len().max(fc.len());
        for (j, gj) in g.iter().enumerate() {
            n_max = n_max.max(j + 1 + gj.len());
        }
        let sigma = koszul(self.factor_parity(f), self.mono_parity(&r));
        let mut out = Vec::with_capacity(n_max);
        for n in 0..n_max {
            let mut acc = State::zero();
            for (j, s) in b.iter().enumerate().skip(n) {
                acc.add_assign(&self.factor_neg(f, -1 - (j - n) as i64, s));
            }
            let mut second = State::zero();
            for (j, s) in fc.iter().enumerate() {
                let m = n as i64 - 1 - j as i64;
                if m >= 0 {
                    if let Some(x) = g[j].get(m as usize) {
                        second.add_assign(x);
                    }
                } else {
                    second.add_assign(&self.nprod_ms(&r, m, s));
                }
            }
            acc.add_scaled(&second, &sign_scalar(sigma));
            out.push(acc);
        }
        out
    }

    /// `a_(n) c` for `n < 0`.
    pub(crate) fn neg_mm(&self, a: &Monomial, n: i64, c: &Monomial) -> Rc<State> {
        debug_assert!(n < 0);
        if a.is_vacuum() {
            return Rc::new(if n == -1 { State::monomial(c.clone()) } else { State::zero() });
        }
        if a.len() == 1 {
            let f = a.head().unwrap();
            if n == -1 {
                return self.left_mul(f, c);
            }
            return Rc::new(self.factor_neg(f, n, &State::monomial(c.clone())));
        }
        let key = (a.clone(), n, c.clone());
        if let Some(hit) = self.cache.borrow().neg.get(&key) {
            return hit.clone();
        }
        let f = a.head().unwrap();
        let r = a.tail();
        let mut out = State::zero();
        for j in 0..(-n) {
            let inner = self.neg_mm(&r, n + j, c);
            out.add_assign(&self.factor_neg(f, -1 - j, &inner));
        }
        let b = self.ope_mm(&r, c);
        for (i, s) in b.iter().enumerate() {
            let j = i as i64 - n;
            out.add_assign(&self.factor_neg(f, -1 - j, s));
        }
        let fc = self.ope_mm(&Monomial::single(f), c);
        let sigma = koszul(self.factor_parity(f), self.mono_parity(&r));
        for (j, s) in fc.iter().enumerate() {
            out.add_scaled(&self.nprod_ms(&r, n - 1 - j as i64, s), &sign_scalar(sigma));
        }
        let out = Rc::new(out);
        self.cache.borrow_mut().neg.insert(key, out.clone());
        out
    }

    pub(crate) fn nprod_ms(&self, a: &Monomial, n: i64, s: &State) -> State {
        let mut out = State::zero();
        for (m, c) in s.terms() {
            if n >= 0 {
                if let Some(x) = self.ope_mm(a, m).get(n as usize) {
                    out.add_scaled(x, c);
                }
            } else {
                out.add_scaled(&self.neg_mm(a, n, m), c);
            }
        }
        out
    }

    pub(crate) fn nprod_sm(&self, s: &State, n: i64, b: &Monomial) -> State {
        let mut out = State::zero();
        for (m, c) in s.terms() {
            if n >= 0 {
                if let Some(x) = self.ope_mm(m, b).get(n as usize) {
                    out.add_scaled(x, c);
                }
            } else {
                out.add_scaled(&self.neg_mm(m, n, b), c);
            }
        }
        out
    }

    pub(crate) fn nprod_ss_internal(&self, a: &State, n: i64, b: &State) -> State {
        let mut out = State::zero();
        for (mb, cb) in b.terms() {
            let x = self.nprod_sm(a, n, mb);
            out.add_scaled(&x, cb);
        }
        out
    }

    pub(crate) fn ope_ms(&self, a: &Monomial, s: &State) -> Vec<State> {
        let mut out: Vec<State> = Vec::new();
        for (m, c) in s.terms() {
            let v = self.ope_mm(a, m);
            if out.len() < v.len() {
                out.resize(v.len(), State::zero());
            }
            for (i, x) in v.iter().enumerate() {
                out[i].add_scaled(x, c);
            }
        }
        trim(out)
    }

    pub(crate) fn ope_sm(&self, s: &State, b: &State) -> Vec<State> {
        let mut out: Vec<State> = Vec::new();
        for (ma, ca) in s.terms() {
            let v = self.ope_ms(ma, b);
            if out.len() < v.len() {
                out.resize(v.len(), State::zero());
            }
            for (i, x) in v.iter().enumerate() {
                out[i].add_scaled(x, ca);
            }
        }
        trim(out)
    }

    /// Skew-symmetry expansion `(-1)^{n+1+|a||b|} sum_l (-1)^l/l! ∂^l (b_(n+l) a)`.
    pub(crate) fn skew_expansion(&self, a: &State, b: &State, n: i64, pa: Parity, pb: Parity) -> State {
        let ba = self.ope_sm(b, a);
        let mut out = State::zero();
        let mut l: i64 = 0;
        loop {
            let idx = n + l;
            let term = if idx >= 0 {
                match ba.get(idx as usize) {
                    Some(x) => x.clone(),
                    None => break,
                }
            } else {
                self.nprod_ss_internal(b, idx, a)
            };
            let mut c = factorial(l as u32).recip();
            if l % 2 == 1 {
                c = -c;
            }
            out.add_scaled(&self.derivative_state_n(&term, l as u32), &Scalar::from_rat(c));
            l += 1;
        }
        let mut sgn = if (n + 1).rem_euclid(2) == 1 { -1 } else { 1 };
        sgn *= koszul(pa, pb);
        out.scale_int(sgn)
    }
}
