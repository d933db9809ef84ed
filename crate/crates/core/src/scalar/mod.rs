//! Exact coefficients: Laurent polynomials in `q` (with `q^2 = hb`) whose
//! coefficients are rational functions of the level `k` over the rationals.

mod poly;
mod ratfn;

use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub use poly::{rat, rat_int, Poly, Rat};
pub use ratfn::RatFn;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("divisor is not a unit: its lowest coefficient vanishes")]
    NonUnitDivisor,
    #[error("quotient is not a finite Laurent polynomial; set a truncation order")]
    InexactDivision,
    #[error("denominator vanishes at k = {0}")]
    PoleAtSpecialization(String),
}

/// Finite Laurent polynomial in `q`. Invariant: terms sorted by exponent,
/// no zero coefficient stored.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Scalar {
    terms: Vec<(i32, RatFn)>,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Scalar::from_ratfn(RatFn::one())
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::from_rat(rat_int(n))
    }

    pub fn from_frac(n: i64, d: i64) -> Self {
        Scalar::from_rat(rat(n, d))
    }

    pub fn from_rat(c: Rat) -> Self {
        Scalar::from_ratfn(RatFn::from_rat(c))
    }

    pub fn from_ratfn(c: RatFn) -> Self {
        Scalar::monomial(c, 0)
    }

    /// `c * q^e`.
    pub fn monomial(c: RatFn, e: i32) -> Self {
        if c.is_zero() {
            Scalar::zero()
        } else {
            Scalar { terms: vec![(e, c)] }
        }
    }

    /// The level parameter `k`.
    pub fn k() -> Self {
        Scalar::from_ratfn(RatFn::var())
    }

    /// `q^e`, i.e. `hb^(e/2)`.
    pub fn q_pow(e: i32) -> Self {
        Scalar::monomial(RatFn::one(), e)
    }

    /// `hb^n`.
    pub fn hbar_pow(n: i32) -> Self {
        Scalar::q_pow(2 * n)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0 == 0 && self.terms[0].1.is_one()
    }

    pub fn terms(&self) -> &[(i32, RatFn)] {
        &self.terms
    }

    /// Lowest `q`-exponent present.
    pub fn min_q(&self) -> Option<i32> {
        self.terms.first().map(|t| t.0)
    }

    pub fn max_q(&self) -> Option<i32> {
        self.terms.last().map(|t| t.0)
    }

    /// Coefficient of `q^e`.
    pub fn coeff(&self, e: i32) -> RatFn {
        match self.terms.binary_search_by_key(&e, |t| t.0) {
            Ok(i) => self.terms[i].1.clone(),
            Err(_) => RatFn::zero(),
        }
    }

    /// Constant rational value if this scalar is a plain rational number.
    pub fn as_rat(&self) -> Option<Rat> {
        match self.terms.as_slice() {
            [] => Some(Rat::zero()),
            [(0, c)] => c.as_rat(),
            _ => None,
        }
    }

    /// Single `q`-power term `(e, c)` if the scalar has exactly one.
    pub fn as_monomial(&self) -> Option<(i32, &RatFn)> {
        match self.terms.as_slice() {
            [(e, c)] => Some((*e, c)),
            _ => None,
        }
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < other.terms.len() {
            let take_left = match (self.terms.get(i), other.terms.get(j)) {
                (Some(a), Some(b)) if a.0 == b.0 => {
                    let c = a.1.add(&b.1);
                    if !c.is_zero() {
                        out.push((a.0, c));
                    }
                    i += 1;
                    j += 1;
                    continue;
                }
                (Some(a), Some(b)) => a.0 < b.0,
                (Some(_), None) => true,
                _ => false,
            };
            if take_left {
                out.push(self.terms[i].clone());
                i += 1;
            } else {
                out.push(other.terms[j].clone());
                j += 1;
            }
        }
        Scalar { terms: out }
    }

    pub fn neg(&self) -> Scalar {
        Scalar { terms: self.terms.iter().map(|(e, c)| (*e, c.neg())).collect() }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        if self.is_zero() || other.is_zero() {
            return Scalar::zero();
        }
        if other.terms.len() == 1 {
            let (e, c) = &other.terms[0];
            if c.is_one() {
                return self.shift(*e);
            }
        }
        if self.terms.len() == 1 && self.terms[0].1.is_one() {
            return other.shift(self.terms[0].0);
        }
        let mut acc = Scalar::zero();
        for (e1, c1) in &self.terms {
            let part = Scalar {
                terms: other.terms.iter().map(|(e2, c2)| (e1 + e2, c1.mul(c2))).collect(),
            };
            acc = acc.add(&part);
        }
        acc
    }

    pub fn scale(&self, c: &Rat) -> Scalar {
        if c.is_zero() {
            return Scalar::zero();
        }
        if c.is_one() {
            return self.clone();
        }
        Scalar { terms: self.terms.iter().map(|(e, r)| (*e, r.scale(c))).collect() }
    }

    pub fn scale_int(&self, n: i64) -> Scalar {
        self.scale(&rat_int(n))
    }

    /// Multiplies by `q^e`.
    pub fn shift(&self, e: i32) -> Scalar {
        if e == 0 {
            return self.clone();
        }
        Scalar { terms: self.terms.iter().map(|(x, c)| (x + e, c.clone())).collect() }
    }

    /// Drops all terms with `q`-exponent above `max_q`.
    pub fn truncate(&self, max_q: i32) -> Scalar {
        Scalar { terms: self.terms.iter().filter(|t| t.0 <= max_q).cloned().collect() }
    }

    /// Keeps only the `q^e` term.
    pub fn project(&self, e: i32) -> Scalar {
        Scalar::monomial(self.coeff(e), e)
    }

    /// Terms with `lo <= exponent <= hi`.
    pub fn project_range(&self, lo: i32, hi: i32) -> Scalar {
        Scalar { terms: self.terms.iter().filter(|t| lo <= t.0 && t.0 <= hi).cloned().collect() }
    }

    /// Evaluates every coefficient at `k = k0`.
    pub fn specialize_k(&self, k0: &Rat) -> Result<Scalar, ScalarError> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (e, c) in &self.terms {
            let v = c.eval(k0).ok_or_else(|| ScalarError::PoleAtSpecialization(k0.to_string()))?;
            if !v.is_zero() {
                terms.push((*e, RatFn::from_rat(v)));
            }
        }
        Ok(Scalar { terms })
    }

    /// Exact quotient in the Laurent ring, failing if it is not finite.
    pub fn div(&self, other: &Scalar) -> Result<Scalar, ScalarError> {
        self.div_in(other, &ScalarContext::exact())
    }

    /// Quotient under a context: exact unless a truncation order is set, in
    /// which case the Laurent-series quotient is cut at that order.
    pub fn div_in(&self, other: &Scalar, ctx: &ScalarContext) -> Result<Scalar, ScalarError> {
        if other.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        // The unspecialized leading coefficient must survive specialization.
        if let Some(k0) = &ctx.k_specialization {
            if other.terms[0].1.eval(k0).map_or(true, |v| v.is_zero()) {
                return Err(ScalarError::NonUnitDivisor);
            }
        }
        let divisor = ctx.apply(other)?;
        let dividend = ctx.apply(self)?;
        if divisor.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        let (e0, lead) = divisor.terms[0].clone();
        let lead_inv = lead.recip().ok_or(ScalarError::NonUnitDivisor)?;
        if divisor.terms.len() == 1 {
            let inv = Scalar::monomial(lead_inv, -e0);
            return ctx.apply(&dividend.mul(&inv));
        }
        // Long division from the lowest order upward.
        let mut rem = dividend;
        let mut quot = Scalar::zero();
        let limit = match ctx.truncation_order {
            Some(t) => t,
            None => rem.max_q().unwrap_or(0) - e0,
        };
        while let Some(low) = rem.min_q() {
            let qe = low - e0;
            if qe > limit {
                if ctx.truncation_order.is_some() {
                    break;
                }
                return Err(ScalarError::InexactDivision);
            }
            let c = rem.terms[0].1.mul(&lead_inv);
            let step = Scalar::monomial(c, qe);
            quot = quot.add(&step);
            rem = rem.sub(&step.mul(&divisor));
            if let Some(k0) = &ctx.k_specialization {
                rem = rem.specialize_k(k0)?;
            }
        }
        ctx.apply(&quot)
    }

    /// Renders `1/2*hb^(1/2) + (2k+3)/3`-style text (ascending `q`-powers).
    pub fn render(&self) -> String {
        self.to_string()
    }

    /// Sign-aware rendering used when the scalar multiplies something else:
    /// returns (is_negative, magnitude text) for single-term scalars.
    pub(crate) fn render_factor(&self) -> (bool, String) {
        if let [(e, c)] = self.terms.as_slice() {
            if c.is_single_term() {
                let neg = c.numer().leading().is_some_and(|l| l.is_negative());
                let mag = if neg { c.neg() } else { c.clone() };
                return (neg, render_term(*e, &mag));
            }
        }
        (false, format!("({})", self))
    }
}

fn render_hbar(e: i32) -> String {
    match e {
        2 => "hb".to_string(),
        _ if e % 2 == 0 && e > 0 => format!("hb^{}", e / 2),
        _ if e % 2 == 0 => format!("hb^{}", e / 2),
        _ => format!("hb^({}/2)", e),
    }
}

fn render_term(e: i32, c: &RatFn) -> String {
    if e == 0 {
        return c.to_string();
    }
    if c.is_one() {
        return render_hbar(e);
    }
    let cs = c.to_string();
    let needs_paren = !c.is_single_term() || cs.contains('/');
    if needs_paren {
        format!("({})*{}", cs, render_hbar(e))
    } else {
        format!("{}*{}", cs, render_hbar(e))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            let neg = c.is_single_term() && c.numer().leading().is_some_and(|l| l.is_negative());
            let body = if neg { render_term(*e, &c.neg()) } else { render_term(*e, c) };
            match (i, neg) {
                (0, true) => write!(f, "-{}", body)?,
                (0, false) => f.write_str(&body)?,
                (_, true) => write!(f, " - {}", body)?,
                (_, false) => write!(f, " + {}", body)?,
            }
        }
        Ok(())
    }
}

/// Evaluation options for scalar arithmetic.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScalarContext {
    /// Highest retained `q`-exponent; `None` means exact.
    pub truncation_order: Option<i32>,
    /// Numerical value substituted for `k`; `None` keeps `k` symbolic.
    pub k_specialization: Option<Rat>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ScalarContext {
    pub fn exact() -> Self {
        ScalarContext::default()
    }

    /// Applies specialization and truncation to a value.
    pub fn apply(&self, a: &Scalar) -> Result<Scalar, ScalarError> {
        let mut out = match &self.k_specialization {
            Some(k0) => a.specialize_k(k0)?,
            None => a.clone(),
        };
        if let Some(t) = self.truncation_order {
            out = out.truncate(t);
        }
        Ok(out)
    }

    pub fn arith(&self, a: &Scalar, b: &Scalar, op: ArithOp) -> Result<Scalar, ScalarError> {
        let a = self.apply(a)?;
        let b = self.apply(b)?;
        match op {
            ArithOp::Add => self.apply(&a.add(&b)),
            ArithOp::Sub => self.apply(&a.sub(&b)),
            ArithOp::Mul => self.apply(&a.mul(&b)),
            ArithOp::Div => a.div_in(&b, self),
        }
    }
}

impl One for Scalar {
    fn one() -> Self {
        Scalar::one()
    }
}

impl std::ops::Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar::mul(&self, &rhs)
    }
}

impl std::ops::Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        Scalar::add(&self, &rhs)
    }
}

impl Zero for Scalar {
    fn zero() -> Self {
        Scalar::zero()
    }
    fn is_zero(&self) -> bool {
        Scalar::is_zero(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(a: i64, b: i64) -> Scalar {
        Scalar::k().scale_int(a).add(&Scalar::from_int(b))
    }

    #[test]
    fn q_exponents_cancel() {
        assert!(Scalar::q_pow(2).mul(&Scalar::q_pow(-2)).is_one());
    }

    #[test]
    fn central_coefficient_times_three() {
        let jj = lin(2, 3).scale(&rat(1, 3));
        assert_eq!(jj.mul(&Scalar::from_int(3)), lin(2, 3));
    }

    #[test]
    fn cubic_pole_at_critical_level() {
        let c = lin(1, 1).mul(&lin(2, 3));
        assert_eq!(c.specialize_k(&rat_int(-3)).unwrap(), Scalar::from_int(6));
    }

    #[test]
    fn specialization_examples() {
        let k0 = rat_int(-3);
        assert_eq!(lin(3, 3).specialize_k(&k0).unwrap(), Scalar::from_int(-6));
        assert_eq!(lin(2, 3).scale(&rat(1, 3)).specialize_k(&k0).unwrap(), Scalar::from_int(-1));
        assert!(Scalar::zero().specialize_k(&k0).unwrap().is_zero());
    }

    #[test]
    fn division_errors() {
        assert_eq!(Scalar::one().div(&Scalar::zero()), Err(ScalarError::DivisionByZero));
        let ctx = ScalarContext { truncation_order: None, k_specialization: Some(rat_int(-3)) };
        let d = lin(1, 3).add(&Scalar::q_pow(1));
        assert_eq!(Scalar::one().div_in(&d, &ctx), Err(ScalarError::NonUnitDivisor));
    }

    #[test]
    fn exact_division_of_laurent_multiple() {
        let d = Scalar::one().add(&Scalar::q_pow(2));
        let a = Scalar::q_pow(2).mul(&d);
        assert_eq!(a.div(&d).unwrap(), Scalar::q_pow(2));
        assert_eq!(Scalar::one().div(&d), Err(ScalarError::InexactDivision));
    }

    #[test]
    fn truncated_series_division() {
        let ctx = ScalarContext { truncation_order: Some(4), k_specialization: None };
        let d = Scalar::one().sub(&Scalar::q_pow(2));
        let inv = Scalar::one().div_in(&d, &ctx).unwrap();
        let expect = Scalar::one().add(&Scalar::q_pow(2)).add(&Scalar::q_pow(4));
        assert_eq!(inv, expect);
    }

    #[test]
    fn renders_hbar_powers() {
        assert_eq!(Scalar::hbar_pow(1).to_string(), "hb");
        assert_eq!(Scalar::hbar_pow(-2).to_string(), "hb^-2");
        assert_eq!(Scalar::q_pow(1).to_string(), "hb^(1/2)");
        assert_eq!(Scalar::q_pow(-3).scale_int(-2).to_string(), "-2*hb^(-3/2)");
        assert_eq!(lin(2, 3).scale(&rat(1, 3)).to_string(), "(2k+3)/3");
    }
}
