//! Substitution homomorphisms between presented vertex algebras.

use std::cell::RefCell;
use std::collections::HashMap;

use super::{VertexAlgebra, VertexError};
use crate::state::{Factor, GenId, State};

/// Generator images of a candidate morphism `source -> target`. Invertible
/// source generators need an explicit image of their inverse.
pub struct Substitution<'a> {
    source: &'a VertexAlgebra,
    target: &'a VertexAlgebra,
    images: Vec<State>,
    inverse_images: Vec<Option<State>>,
    factor_cache: RefCell<HashMap<Factor, State>>,
}

/// A singular product not preserved by a substitution; `n = -1` records a
/// failed inverse `s_(-1) s^-1 = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MorphismResidual {
    pub a: String,
    pub b: String,
    pub n: i64,
    pub residual: State,
}

impl<'a> Substitution<'a> {
    pub fn new(
        source: &'a VertexAlgebra,
        target: &'a VertexAlgebra,
        images: &[(&str, State)],
        inverse_images: &[(&str, State)],
    ) -> Result<Self, VertexError> {
        let n = source.table().len();
        let mut img: Vec<Option<State>> = vec![None; n];
        for (name, s) in images {
            target.admit(s)?;
            img[source.table().id(name)? as usize] = Some(s.clone());
        }
        let mut inv = vec![None; n];
        for (name, s) in inverse_images {
            target.admit(s)?;
            let id = source.table().id(name)?;
            if !source.is_invertible(id) {
                return Err(VertexError::NegativePowerOfNonInvertible(name.to_string()));
            }
            inv[id as usize] = Some(s.clone());
        }
        let images = img
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| VertexError::UnknownGenerator(source.table().get(i as GenId).name.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Substitution { source, target, images, inverse_images: inv, factor_cache: RefCell::new(HashMap::new()) })
    }

    pub fn source(&self) -> &VertexAlgebra {
        self.source
    }

    pub fn target(&self) -> &VertexAlgebra {
        self.target
    }

    pub fn image_of(&self, name: &str) -> Result<&State, VertexError> {
        Ok(&self.images[self.source.table().id(name)? as usize])
    }

    fn factor_image(&self, f: Factor) -> Result<State, VertexError> {
        if let Some(s) = self.factor_cache.borrow().get(&f) {
            return Ok(s.clone());
        }
        let s = match f {
            Factor::Gen { id, deriv } => self.target.derivative_n(&self.images[id as usize], deriv as u32)?,
            Factor::Inv { id } => self.inverse_images[id as usize]
                .clone()
                .ok_or_else(|| VertexError::NegativePowerOfNonInvertible(self.source.table().get(id).name.clone()))?,
        };
        self.factor_cache.borrow_mut().insert(f, s.clone());
        Ok(s)
    }

    /// Image of a source state, normalized in the target.
    pub fn apply(&self, s: &State) -> Result<State, VertexError> {
        self.source.admit(s)?;
        let mut out = State::zero();
        for (m, c) in s.terms() {
            let items = m.factors().iter().map(|&f| self.factor_image(f)).collect::<Result<Vec<_>, _>>()?;
            let v = self.target.normal_order(&items)?;
            out.add_scaled(&v, c);
        }
        Ok(out.with_tag(self.target.id()))
    }

    /// Compares every singular product of source generators with the
    /// product of their images; empty iff the substitution is a morphism.
    pub fn residuals(&self) -> Result<Vec<MorphismResidual>, VertexError> {
        let n = self.source.table().len();
        let mut out = Vec::new();
        let name = |i: usize| self.source.table().get(i as GenId).name.clone();
        for a in 0..n {
            for b in 0..n {
                let expected = self.source.table_products(a as GenId, b as GenId);
                let computed = self.target.ope_list(&self.images[a], &self.images[b])?;
                for k in 0..expected.len().max(computed.len()) {
                    let e = match expected.get(k) {
                        Some(s) => self.apply(&s.clone().with_tag(self.source.id()))?,
                        None => State::zero(),
                    };
                    let c = computed.get(k).cloned().unwrap_or_else(State::zero);
                    let r = c.sub(&e);
                    if !r.is_zero() {
                        out.push(MorphismResidual { a: name(a), b: name(b), n: k as i64, residual: r });
                    }
                }
            }
            if let Some(inv) = &self.inverse_images[a] {
                let r = self.target.nprod(&self.images[a], -1, inv)?.sub(&State::vacuum());
                if !r.is_zero() {
                    out.push(MorphismResidual { a: name(a), b: format!("{}^-1", name(a)), n: -1, residual: r });
                }
            }
        }
        Ok(out)
    }
}
