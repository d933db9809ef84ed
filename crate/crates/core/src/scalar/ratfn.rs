use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::poly::{Poly, Rat};

/// Reduced quotient of polynomials in `k`.
/// Invariant: denominator monic, `gcd(num, den) = 1`, zero is `0/1`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct RatFn {
    num: Poly,
    den: Poly,
}

impl RatFn {
    pub fn zero() -> Self {
        RatFn { num: Poly::zero(), den: Poly::one() }
    }

    pub fn one() -> Self {
        RatFn::from_rat(Rat::one())
    }

    pub fn from_rat(c: Rat) -> Self {
        RatFn { num: Poly::constant(c), den: Poly::one() }
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFn { num: p, den: Poly::one() }
    }

    /// The level `k` itself.
    pub fn var() -> Self {
        RatFn::from_poly(Poly::var())
    }

    /// Builds `num/den` in canonical form. Panics if `den` is zero.
    pub fn new(num: Poly, den: Poly) -> Self {
        assert!(!den.is_zero(), "rational function with zero denominator");
        if num.is_zero() {
            return RatFn::zero();
        }
        if den.is_constant() {
            let c = den.constant_value().unwrap().recip();
            return RatFn { num: num.scale(&c), den: Poly::one() };
        }
        let g = num.gcd(&den);
        let (mut num, mut den) = if g.is_one() {
            (num, den)
        } else {
            (num.div_rem(&g).0, den.div_rem(&g).0)
        };
        let lead = den.leading().unwrap().clone();
        if !lead.is_one() {
            let inv = lead.recip();
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        RatFn { num, den }
    }

    pub fn numer(&self) -> &Poly {
        &self.num
    }

    pub fn denom(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    pub fn as_rat(&self) -> Option<Rat> {
        if self.den.is_one() {
            self.num.constant_value()
        } else {
            None
        }
    }

    pub fn add(&self, other: &RatFn) -> RatFn {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.den == other.den {
            let num = self.num.add(&other.num);
            if self.den.is_one() {
                return RatFn { num, den: Poly::one() };
            }
            return RatFn::new(num, self.den.clone());
        }
        RatFn::new(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn neg(&self) -> RatFn {
        RatFn { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn sub(&self, other: &RatFn) -> RatFn {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &RatFn) -> RatFn {
        if self.is_zero() || other.is_zero() {
            return RatFn::zero();
        }
        if self.den.is_one() && other.den.is_one() {
            return RatFn { num: self.num.mul(&other.num), den: Poly::one() };
        }
        RatFn::new(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn scale(&self, c: &Rat) -> RatFn {
        if c.is_zero() {
            return RatFn::zero();
        }
        RatFn { num: self.num.scale(c), den: self.den.clone() }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn recip(&self) -> Option<RatFn> {
        if self.is_zero() {
            None
        } else {
            Some(RatFn::new(self.den.clone(), self.num.clone()))
        }
    }

    pub fn div(&self, other: &RatFn) -> Option<RatFn> {
        other.recip().map(|r| self.mul(&r))
    }

    /// Value at `k = k0`; `None` when the denominator vanishes there.
    pub fn eval(&self, k0: &Rat) -> Option<Rat> {
        let d = self.den.eval(k0);
        if d.is_zero() {
            None
        } else {
            Some(self.num.eval(k0) / d)
        }
    }

    pub(crate) fn is_single_term(&self) -> bool {
        self.den.is_one() && self.num.term_count() <= 1
    }
}

impl fmt::Display for RatFn {
    /// Integer-normalized form: `(2k+3)/3`, `-3/2`, `(k+1)/(k^2+3)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = self.num.denominator_lcm();
        let ld = self.den.denominator_lcm();
        let scale_num = Rat::from_integer(l.clone() * ld.clone());
        let num = self.num.scale(&scale_num);
        let den = self.den.scale(&scale_num);
        let mut ns = String::new();
        num.write_integral(&mut ns)?;
        if den.is_constant() {
            let d = den.constant_value().unwrap();
            if d.is_one() {
                return f.write_str(&ns);
            }
            let d: BigInt = d.to_integer();
            if num.term_count() > 1 {
                write!(f, "({})/{}", ns, d)
            } else {
                write!(f, "{}/{}", ns, d)
            }
        } else {
            let mut ds = String::new();
            den.write_integral(&mut ds)?;
            if num.term_count() > 1 {
                write!(f, "({})/({})", ns, ds)
            } else {
                write!(f, "{}/({})", ns, ds)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::poly::{rat, rat_int};
    use super::*;

    fn lin(a: i64, b: i64) -> RatFn {
        RatFn::from_poly(Poly::from_coeffs(vec![rat_int(b), rat_int(a)]))
    }

    #[test]
    fn reduces_common_factor() {
        let r = RatFn::new(lin(2, 3).mul(&lin(1, 1)).numer().clone(), lin(1, 1).numer().clone());
        assert_eq!(r, lin(2, 3));
    }

    #[test]
    fn renders_level_coefficients() {
        assert_eq!(lin(2, 3).scale(&rat(1, 3)).to_string(), "(2k+3)/3");
        assert_eq!(RatFn::from_rat(rat(-3, 2)).to_string(), "-3/2");
        assert_eq!(RatFn::new(Poly::one(), lin(1, 3).numer().clone()).to_string(), "1/(k+3)");
    }

    #[test]
    fn evaluation_detects_pole() {
        let r = RatFn::new(Poly::one(), lin(1, 3).numer().clone());
        assert!(r.eval(&rat_int(-3)).is_none());
        assert_eq!(r.eval(&rat_int(-2)), Some(rat_int(1)));
    }
}
