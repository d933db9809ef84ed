use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parse::{parse_expression, parse_rat};
use crate::scalar::Rat;
use crate::state::{Generator, State};
use crate::vertex::VertexAlgebra;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Toml(String),
    #[error("config {location}: {message}")]
    Invalid { location: String, message: String },
}

fn invalid(location: String, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid { location, message: message.to_string() }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Human,
    Machine,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub max_kazhdan: Option<i64>,
    pub max_depth: Option<i64>,
    pub ghost_min: Option<i32>,
    pub ghost_max: Option<i32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Option<Format>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub name: String,
    #[serde(default)]
    pub odd: bool,
    /// Rational, e.g. `"3/2"`.
    pub conformal: Option<String>,
    pub kazhdan: Option<String>,
    pub ghost: Option<i32>,
}

/// `a_(n) b` for `n = 0, 1, ...` as expressions in the generators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductConfig {
    pub a: String,
    pub b: String,
    pub values: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraConfig {
    pub name: String,
    #[serde(default, rename = "generator")]
    pub generators: Vec<GeneratorConfig>,
    #[serde(default, rename = "product")]
    pub products: Vec<ProductConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub invertible: Vec<String>,
}

/// Plain-text configuration: extra algebras, window and output defaults.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub window: Option<WindowConfig>,
    pub output: Option<OutputConfig>,
    #[serde(default, rename = "algebra", skip_serializing_if = "Vec::is_empty")]
    pub algebras: Vec<AlgebraConfig>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Toml(e.to_string()))
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn algebra(&self, name: &str) -> Option<&AlgebraConfig> {
        self.algebras.iter().find(|a| a.name == name)
    }
}

fn rat_field(loc: &str, v: &Option<String>) -> Result<Option<Rat>, ConfigError> {
    v.as_ref().map(|s| parse_rat(s).map_err(|e| invalid(loc.to_string(), e))).transpose()
}

impl AlgebraConfig {
    /// Builds the algebra; product values are spelled in the free algebra
    /// on the same generators.
    pub fn build(&self, index: usize) -> Result<VertexAlgebra, ConfigError> {
        let here = format!("algebra[{}] `{}`", index, self.name);
        let mut b = VertexAlgebra::builder(&self.name);
        for (j, g) in self.generators.iter().enumerate() {
            let loc = format!("{}.generator[{}]", here, j);
            let mut gen = if g.odd { Generator::odd(&g.name) } else { Generator::even(&g.name) };
            if let Some(c) = rat_field(&format!("{}.conformal", loc), &g.conformal)? {
                gen = gen.with_conformal(c);
            }
            if let Some(k) = rat_field(&format!("{}.kazhdan", loc), &g.kazhdan)? {
                gen = gen.with_kazhdan(k);
            }
            if let Some(h) = g.ghost {
                gen = gen.with_ghost(h);
            }
            b = b.generator(gen);
        }
        for name in &self.invertible {
            b = b.invertible(name);
        }
        let mut free = VertexAlgebra::builder(&format!("{}-free", self.name));
        for g in b.generators() {
            free = free.generator(g.clone());
        }
        let free = free.build().map_err(|e| invalid(here.clone(), e))?;
        for (j, p) in self.products.iter().enumerate() {
            let mut vals: Vec<State> = Vec::new();
            for (n, v) in p.values.iter().enumerate() {
                let loc = format!("{}.product[{}].values[{}]", here, j, n);
                let e = parse_expression(v).map_err(|e| invalid(loc.clone(), e))?;
                vals.push(free.normal_form(&e).map_err(|e| invalid(loc, e))?);
            }
            b = b.products(&p.a, &p.b, vals);
        }
        b.build().map_err(|e| invalid(here, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BETAGAMMA: &str = r#"
[window]
max_kazhdan = 2
max_depth = 3

[output]
format = "machine"

[[algebra]]
name = "bg"

[[algebra.generator]]
name = "x"
conformal = "0"

[[algebra.generator]]
name = "d"
conformal = "1"

[[algebra.product]]
a = "d"
b = "x"
values = ["hb"]
"#;

    #[test]
    fn parse_render_round_trip() {
        let c = Config::parse(BETAGAMMA).unwrap();
        assert_eq!(c.output.as_ref().unwrap().format, Some(Format::Machine));
        assert_eq!(Config::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn builds_algebra_with_skew_completion() {
        let c = Config::parse(BETAGAMMA).unwrap();
        let va = c.algebras[0].build(0).unwrap();
        let (x, d) = (va.gen("x").unwrap(), va.gen("d").unwrap());
        assert_eq!(va.render(&va.nprod(&x, 0, &d).unwrap()), "-hb");
    }

    #[test]
    fn errors_name_their_location() {
        let bad = BETAGAMMA.replace("values = [\"hb\"]", "values = [\":x\"]");
        let e = Config::parse(&bad).unwrap().algebras[0].build(0).unwrap_err();
        assert!(e.to_string().contains("algebra[0] `bg`.product[0].values[0]"), "{}", e);
        assert!(matches!(Config::parse("[window]\nmax_kazhdan = \"x\""), Err(ConfigError::Toml(_))));
    }
}
