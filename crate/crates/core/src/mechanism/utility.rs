use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Universe;

/// A utility `u: D^n x D^n -> R` for the discrete exponential mechanism.
#[derive(Clone, Debug, PartialEq)]
pub enum UtilityFunction {
    /// `u(d, d') = -k h(d, d')`, `k >= 0`.
    HammingScaled { k: f64 },
    /// `u(d, d') = -scale * sum_i |d_i - d'_i|` on category indices.
    NegativeL1 { scale: f64 },
    /// Explicit values in canonical order.
    Table(UtilityTable),
}

impl UtilityFunction {
    pub fn hamming(k: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::ParameterRange(format!(
                "hamming utility needs finite k >= 0, got {k}"
            )));
        }
        Ok(UtilityFunction::HammingScaled { k })
    }

    pub fn kind(&self) -> UtilityKind {
        match self {
            UtilityFunction::HammingScaled { .. } => UtilityKind::Hamming,
            UtilityFunction::NegativeL1 { .. } => UtilityKind::L1,
            UtilityFunction::Table(_) => UtilityKind::Table,
        }
    }

    /// `u(d, d')` for canonical indices.
    pub fn eval(&self, universe: Universe, d: usize, d_prime: usize) -> f64 {
        match self {
            UtilityFunction::HammingScaled { k } => {
                let h = universe.hamming(d, d_prime);
                if h == 0 {
                    0.0
                } else {
                    -k * h as f64
                }
            }
            UtilityFunction::NegativeL1 { scale } => {
                let (mut a, mut b) = (d, d_prime);
                let c = universe.categories();
                let mut dist = 0usize;
                for _ in 0..universe.rows() {
                    dist += (a % c).abs_diff(b % c);
                    a /= c;
                    b /= c;
                }
                if dist == 0 {
                    0.0
                } else {
                    -scale * dist as f64
                }
            }
            UtilityFunction::Table(t) => t.get(d, d_prime),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    Hamming,
    L1,
    Table,
}

/// A total utility table over `D^n x D^n`, row = input database, column =
/// output database, both in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityTable {
    size: usize,
    values: Vec<f64>,
}

impl UtilityTable {
    pub fn new(universe: Universe, rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = universe.size().ok_or_else(|| Error::EnumerationTooLarge {
            what: "utility table",
            size: universe.size_big().to_string(),
            budget: usize::MAX as u64,
        })?;
        let found: usize = rows.iter().map(Vec::len).sum();
        if rows.len() != size || rows.iter().any(|r| r.len() != size) {
            return Err(Error::IncompleteUtility {
                expected: size * size,
                found,
            });
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::ParameterRange(format!(
                "utility values must be finite, got {bad}"
            )));
        }
        Ok(UtilityTable { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, d: usize, d_prime: usize) -> f64 {
        self.values[d * self.size + d_prime]
    }

    pub fn row(&self, d: usize) -> &[f64] {
        &self.values[d * self.size..(d + 1) * self.size]
    }
}
