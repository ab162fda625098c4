use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::problems::{example_31, make_least_squares, make_logistic, make_mlp, Problem};

/// The problem families the drivers and the CLI can build by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    LeastSquares,
    Logistic,
    Mlp,
    Example31,
}

impl FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "least-squares" => Ok(Self::LeastSquares),
            "logistic" => Ok(Self::Logistic),
            "mlp" => Ok(Self::Mlp),
            "example31" => Ok(Self::Example31),
            other => Err(Error::contract(format!("unknown problem '{other}'"))),
        }
    }
}

impl ProblemKind {
    /// `d` is the feature dimension; the MLP uses it as input width with one hidden layer of `hidden` units.
    pub fn build(
        self,
        n: usize,
        d: usize,
        hidden: usize,
        seed: u64,
    ) -> Result<Box<dyn Problem<f64>>> {
        Ok(match self {
            Self::LeastSquares => Box::new(make_least_squares::<f64>(n, d, seed)?),
            Self::Logistic => Box::new(make_logistic::<f64>(n, d, seed)?),
            Self::Mlp => Box::new(make_mlp::<f64>(&[d, hidden, 1], n, seed)?),
            Self::Example31 => Box::new(example_31::<f64>()),
        })
    }
}
