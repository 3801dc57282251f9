//! JSON documents read by the command-line tool.
//!
//! A family document carries a discrete law and named functions on its
//! support (member order is preserved):
//!
//! ```text
//! {"support": [[-1], [1]], "probabilities": [0.5, 0.5],
//!  "functions": {"f": [-1, 1]}, "norm": "cgf"}
//! ```

use std::path::Path;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cgf::{DiscreteDistribution, TabulatedFunction};
use crate::chaining::{FunctionFamily, NormContext};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDocument {
    pub support: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    pub functions: IndexMap<String, Vec<f64>>,
    #[serde(default)]
    pub norm: NormContext,
}

impl FamilyDocument {
    pub fn distribution(&self) -> Result<DiscreteDistribution> {
        DiscreteDistribution::new(self.support.clone(), self.probabilities.clone())
    }

    /// The named function, checked against the support.
    pub fn function(&self, name: &str) -> Result<TabulatedFunction> {
        let values = self.functions.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.functions.keys().map(String::as_str).collect();
            Error::input(format!("no function named `{name}` (available: {})", known.join(", ")))
        })?;
        let f = TabulatedFunction::new(values.clone())?;
        f.check_support(&self.distribution()?)?;
        Ok(f)
    }

    /// The family of all listed functions; at least one must be given.
    pub fn family(&self) -> Result<FunctionFamily> {
        if self.functions.is_empty() {
            return Err(Error::input("function family is empty"));
        }
        let members = self
            .functions
            .iter()
            .map(|(name, values)| Ok((name.clone(), TabulatedFunction::new(values.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        FunctionFamily::new(self.distribution()?, members, self.norm.clone())
    }
}

/// Parse JSON text into `T`, reporting schema violations as input errors.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::input(format!("malformed JSON: {e}")))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text).map_err(|e| match e {
        Error::InvalidInput(m) => Error::input(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Inline JSON when the argument starts with `{` or `[`, otherwise a path.
pub fn json_or_path<T: DeserializeOwned>(arg: &str) -> Result<T> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        parse_json(trimmed)
    } else {
        read_json(arg)
    }
}
