use rand::Rng;
use serde::Serialize;

use super::{VertexAlgebra, VertexError};
use crate::scalar::Scalar;
use crate::state::State;

/// Counts of sampled axiom checks and the failures found.
#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct VertexAxiomReport {
    pub algebra: String,
    pub borcherds: usize,
    pub skew: usize,
    pub derivation: usize,
    pub vacuum: usize,
    pub failures: Vec<String>,
}

impl VertexAxiomReport {
    pub fn checks(&self) -> usize {
        self.borcherds + self.skew + self.derivation + self.vacuum
    }

    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Samples `samples` monomial triples and checks on each: one Borcherds
/// identity at random `(m, n, k)`, skew-symmetry, the ∂-rules
/// `(∂a)_(n) b = -n a_(n-1) b`, `∂(a_(n) b) = (∂a)_(n) b + a_(n) ∂b`, and
/// the vacuum axioms `1_(n) a = δ_{n,-1} a`, `a_(-1) 1 = a`, `a_(n) 1 = 0`.
pub fn axiom_suite<R: Rng>(va: &VertexAlgebra, rng: &mut R, samples: usize) -> Result<VertexAxiomReport, VertexError> {
    let mut rep = VertexAxiomReport { algebra: va.name().to_string(), ..Default::default() };
    let one = va.vacuum();
    for _ in 0..samples {
        let a = va.sample_monomial(rng, 2, 1);
        let b = va.sample_monomial(rng, 2, 1);
        let c = va.sample_monomial(rng, 1, 1);
        let (m, n, k) = (rng.gen_range(0..=2), rng.gen_range(-1..=2), rng.gen_range(-1..=1));
        let (ok, r) = va.check_borcherds(&a, &b, &c, m, n, k)?;
        rep.borcherds += 1;
        if !ok {
            rep.failures.push(format!("borcherds ({},{},{}) on {}, {}, {}: {}", m, n, k, va.render(&a), va.render(&b), va.render(&c), va.render(&r)));
        }
        let s = rng.gen_range(-1..=2);
        let (ok, r) = va.check_skew(&a, &b, s)?;
        rep.skew += 1;
        if !ok {
            rep.failures.push(format!("skew n={} on {}, {}: {}", s, va.render(&a), va.render(&b), va.render(&r)));
        }
        let da = va.derivative(&a)?;
        let lhs = va.nprod(&da, n, &b)?;
        let rhs = if n == 0 { State::zero() } else { va.nprod(&a, n - 1, &b)?.scale(&Scalar::from_int(-n)) };
        let split = lhs.add(&va.nprod(&a, n, &va.derivative(&b)?)?);
        let whole = va.derivative(&va.nprod(&a, n, &b)?)?;
        rep.derivation += 1;
        if !lhs.sub(&rhs).is_zero() || !whole.sub(&split).is_zero() {
            rep.failures.push(format!("derivation n={} on {}, {}", n, va.render(&a), va.render(&b)));
        }
        let vac_ok = va.nprod(&one, -1, &a)? == a
            && va.nprod(&one, n.max(0), &a)?.is_zero()
            && va.nprod(&a, -1, &one)? == a
            && va.nprod(&a, n.max(0), &one)?.is_zero();
        rep.vacuum += 1;
        if !vac_ok {
            rep.failures.push(format!("vacuum on {}", va.render(&a)));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebras::{affine_vk_hbar, betagamma_chart, lie_sl};
    use crate::state::Generator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn free_fields_and_currents_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for va in [betagamma_chart(1, None, true).unwrap(), affine_vk_hbar(&lie_sl(2).unwrap(), &Scalar::k()).unwrap()] {
            let rep = axiom_suite(&va, &mut rng, 20).unwrap();
            assert!(rep.pass(), "{:?}", rep.failures);
            assert_eq!(rep.checks(), 80);
        }
    }

    #[test]
    fn non_jacobi_table_is_caught() {
        // h acts on e but not on f, so Jacobi fails on (h, e, f)
        let gens = || ["e", "f", "h"].into_iter().fold(VertexAlgebra::builder("broken"), |b, g| b.generator(Generator::even(g)));
        let free = gens().build().unwrap();
        let (e, h) = (free.gen("e").unwrap(), free.gen("h").unwrap());
        let va = gens().products("e", "f", vec![h]).products("h", "e", vec![e]).build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rep = axiom_suite(&va, &mut rng, 200).unwrap();
        assert!(!rep.pass());
        assert!(rep.failures.iter().any(|f| f.starts_with("borcherds")));
    }
}
