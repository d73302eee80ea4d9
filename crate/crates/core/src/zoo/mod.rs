//! Constructors for the standard example models and their factor maps.

pub mod cayley;
pub mod perm;
pub mod product;
pub mod slice;
pub mod symmetric;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::FiniteMarkovModel;
use crate::quotient::FactorMap;
use crate::rational::Rational;

pub use cayley::{cayley_model, homomorphism_map, GroupTable, Homomorphism};
pub use product::product_model;
pub use slice::{projection_map, slice_model};
pub use symmetric::{
    color_count_maps, hypergeometric_map, hypergeometric_pmf, image_map, restriction_map, slice_indicator_map,
    symmetric_group_model,
};

/// A model with its default family of factor maps.
#[derive(Clone, Debug)]
pub struct ZooModel {
    pub model: FiniteMarkovModel,
    pub maps: Vec<FactorMap>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductComponent {
    pub size: usize,
    /// Defaults to uniform.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_rational_vec")]
    pub measure: Option<Vec<Rational>>,
}

mod opt_rational_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::rational::{JsonRational, Rational};

    pub fn serialize<S: Serializer>(v: &Option<Vec<Rational>>, s: S) -> std::result::Result<S::Ok, S::Error> {
        v.as_ref().map(|v| v.iter().cloned().map(JsonRational).collect::<Vec<_>>()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<Rational>>, D::Error> {
        let v: Option<Vec<JsonRational>> = Option::deserialize(d)?;
        Ok(v.map(|v| v.into_iter().map(|r| r.0).collect()))
    }
}

/// Parameters of a zoo model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZooSpec {
    SymmetricGroup { n: usize },
    Slice { n: usize, k: usize },
    Product { components: Vec<ProductComponent> },
    Cayley { table: GroupTable, generators: Vec<usize>, homomorphisms: Vec<Homomorphism> },
}

impl ZooSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ZooSpec::SymmetricGroup { n } if !(2..=symmetric::MAX_SYMMETRIC_N).contains(n) => {
                Err(Error::InvalidParameter(format!("n = {n} out of range")))
            }
            ZooSpec::Slice { n, k } if *k > *n => Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}"))),
            ZooSpec::Product { components } => {
                for c in components {
                    if c.size == 0 || c.measure.as_ref().is_some_and(|m| m.len() != c.size) {
                        return Err(Error::InvalidParameter("component size does not match its measure".into()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Builds the model with its coordinate maps (or the given homomorphisms
    /// for Cayley models).
    pub fn build(&self) -> Result<ZooModel> {
        self.validate()?;
        match self {
            ZooSpec::SymmetricGroup { n } => {
                let model = symmetric_group_model(*n)?;
                let maps = symmetric::coordinate_maps(&model)?;
                Ok(ZooModel { model, maps })
            }
            ZooSpec::Slice { n, k } => {
                let model = slice_model(*n, *k)?;
                let maps = slice::coordinate_maps(&model)?;
                Ok(ZooModel { model, maps })
            }
            ZooSpec::Product { components } => {
                let measures: Vec<Vec<Rational>> = components
                    .iter()
                    .map(|c| c.measure.clone().unwrap_or_else(|| product::uniform(c.size)))
                    .collect();
                let model = product_model(&measures)?;
                let maps =
                    (1..=components.len()).map(|j| projection_map(&model, &[j], "proj")).collect::<Result<_>>()?;
                Ok(ZooModel { model, maps })
            }
            ZooSpec::Cayley { table, generators, homomorphisms } => {
                let model = cayley_model(table, generators)?;
                let maps = homomorphisms.iter().map(|h| homomorphism_map(&model, table, h)).collect::<Result<_>>()?;
                Ok(ZooModel { model, maps })
            }
        }
    }

    /// Parses short forms `symmetric-group:N`, `slice:N:K`, `product:2x3`
    /// (uniform components) and `cyclic:N:GENS` (e.g. `cyclic:6:1,5`, with the
    /// reductions modulo every proper divisor greater than one as maps).
    pub fn parse_short(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad integer '{t}' in '{s}'")));
        match parts.as_slice() {
            ["symmetric-group" | "symmetric_group" | "sym", n] => Ok(ZooSpec::SymmetricGroup { n: num(n)? }),
            ["slice", n, k] => Ok(ZooSpec::Slice { n: num(n)?, k: num(k)? }),
            ["product", dims] => Ok(ZooSpec::Product {
                components: dims
                    .split('x')
                    .map(|d| Ok(ProductComponent { size: num(d)?, measure: None }))
                    .collect::<Result<_>>()?,
            }),
            ["cyclic", n, gens] => {
                let n = num(n)?;
                let generators = gens.split(',').map(num).collect::<Result<Vec<_>>>()?;
                let homomorphisms =
                    (2..n).filter(|d| n % d == 0).map(|d| Homomorphism::reduction_mod(n, d)).collect::<Result<_>>()?;
                Ok(ZooSpec::Cayley { table: GroupTable::cyclic(n)?, generators, homomorphisms })
            }
            _ => Err(Error::Parse(format!("unknown zoo model '{s}'"))),
        }
    }
}

