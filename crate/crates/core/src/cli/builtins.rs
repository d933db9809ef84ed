use crate::algebras::{affine_vk, affine_vk_hbar, betagamma_chart, clifford, identity_pairing, lie_sl, skewed_clifford};
use crate::brst::{intermediate_complex, krw_complex, m_complex, sl2_principal, BrstComplex};
use crate::scalar::{Rat, Scalar};
use crate::vertex::VertexAlgebra;
use crate::w23::{w23_presentation, w23_realization};

use super::CliError;

/// Level: symbolic `k` or a rational value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Level {
    Symbolic,
    Value(Rat),
}

impl Level {
    pub fn scalar(&self) -> Scalar {
        match self {
            Level::Symbolic => Scalar::k(),
            Level::Value(r) => Scalar::from_rat(r.clone()),
        }
    }

    pub fn value(&self) -> Option<&Rat> {
        match self {
            Level::Symbolic => None,
            Level::Value(r) => Some(r),
        }
    }
}

/// Names accepted by `--algebra` without a config.
pub const BUILTIN_ALGEBRAS: &[&str] = &[
    "w23",
    "w23-critical",
    "affine-sl2",
    "affine-sl3",
    "affine-sl2-hb",
    "affine-sl3-hb",
    "betagamma",
    "betagamma-hb",
    "clifford",
    "skewed-clifford",
    "brst-sl2",
    "krw-sl3",
    "intermediate-sl3",
];

/// Names accepted by `--complex`.
pub const BUILTIN_COMPLEXES: &[&str] = &["sl2", "m-sl3", "krw-sl3", "intermediate-sl3"];

pub fn builtin_algebra(name: &str, level: &Level) -> Result<VertexAlgebra, CliError> {
    let k = level.scalar();
    Ok(match name {
        "w23" => w23_presentation(level.value())?.algebra().clone(),
        "w23-critical" => w23_realization()?.algebra().clone(),
        "affine-sl2" => affine_vk(&lie_sl(2)?, &k)?,
        "affine-sl3" => affine_vk(&lie_sl(3)?, &k)?,
        "affine-sl2-hb" => affine_vk_hbar(&lie_sl(2)?, &k)?,
        "affine-sl3-hb" => affine_vk_hbar(&lie_sl(3)?, &k)?,
        "betagamma" => betagamma_chart(1, None, false)?,
        "betagamma-hb" => betagamma_chart(1, None, true)?,
        "clifford" => clifford(&["1", "2"], &[], &identity_pairing(2))?,
        "skewed-clifford" => skewed_clifford(&["a"], &["b"], &identity_pairing(1))?,
        "brst-sl2" | "krw-sl3" | "intermediate-sl3" => builtin_complex(name.trim_start_matches("brst-"), level)?.algebra().clone(),
        _ => return Err(CliError::UnknownAlgebra(name.to_string())),
    })
}

pub fn builtin_complex(name: &str, level: &Level) -> Result<BrstComplex, CliError> {
    let k = level.scalar();
    Ok(match name {
        "sl2" => sl2_principal(&k)?,
        "m-sl3" => {
            let lie = lie_sl(3)?;
            let sub = crate::algebras::SubalgebraData::lagrangian(&lie, &["E13"])?;
            m_complex(&lie, &sub, &k)?
        }
        "krw-sl3" => krw_complex(&lie_sl(3)?, &k)?,
        "intermediate-sl3" => intermediate_complex(&lie_sl(3)?, &k)?,
        _ => return Err(CliError::UnknownAlgebra(name.to_string())),
    })
}
