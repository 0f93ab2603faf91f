use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{draw_index, Mechanism, Normalization};
use crate::error::{Error, Result};
use crate::logspace::ln_prob;
use crate::space::{CategorySpace, Database};

/// Per-row tolerance when checking that a matrix row sums to one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Tolerance for recognising the symmetric one-parameter family.
const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Row-stochastic `(m+1) x (m+1)` matrix; entry `(i, j)` is the probability
/// that the parent mechanism maps category `i` to category `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRows", into = "MatrixRows")]
pub struct SolutionMatrix {
    size: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRows {
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRows> for SolutionMatrix {
    type Error = Error;
    fn try_from(m: MatrixRows) -> Result<Self> {
        SolutionMatrix::new(m.rows)
    }
}

impl From<SolutionMatrix> for MatrixRows {
    fn from(m: SolutionMatrix) -> Self {
        MatrixRows { rows: m.rows() }
    }
}

impl SolutionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size < 2 {
            return Err(Error::TooFewCategories(size));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::NotStochastic(format!(
                    "row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|&&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::NotStochastic(format!(
                    "row {i} has entry {bad} outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::NotStochastic(format!("row {i} sums to {sum}")));
            }
        }
        Ok(SolutionMatrix {
            size,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    /// Diagonal `1 - m p`, off-diagonal `p`, with `0 <= p <= 1/(m+1)`.
    pub fn symmetric(categories: usize, p: f64) -> Result<Self> {
        if categories < 2 {
            return Err(Error::TooFewCategories(categories));
        }
        let m = (categories - 1) as f64;
        let bound = 1.0 / categories as f64;
        if !(p.is_finite() && p >= 0.0 && p <= bound * (1.0 + 1e-12)) {
            return Err(Error::ParameterRange(format!(
                "p = {p} must lie in [0, 1/(m+1)] = [0, {bound}]"
            )));
        }
        let p = p.min(bound);
        let diag = 1.0 - m * p;
        let entries = (0..categories * categories)
            .map(|k| if k / categories == k % categories { diag } else { p })
            .collect();
        Ok(SolutionMatrix {
            size: categories,
            entries,
        })
    }

    pub fn identity(categories: usize) -> Result<Self> {
        SolutionMatrix::symmetric(categories, 0.0)
    }

    /// Number of categories, `m + 1`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }

    /// `Some(p)` when every diagonal entry equals `1 - m p`, every
    /// off-diagonal entry equals `p` and `p <= 1/(m+1)`.
    pub fn symmetric_parameter(&self) -> Option<f64> {
        let p = self.get(0, 1);
        let diag = self.get(0, 0);
        let close = |a: f64, b: f64| (a - b).abs() <= SYMMETRY_TOLERANCE;
        for i in 0..self.size {
            for j in 0..self.size {
                let want = if i == j { diag } else { p };
                if !close(self.get(i, j), want) {
                    return None;
                }
            }
        }
        // Off-diagonal mass above 1/(m+1) is outside the family.
        (p <= (1.0 + 1e-12) / self.size as f64).then_some(p)
    }

    /// `(m+1)` lines of `(m+1)` comma-separated decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.size {
            let line: Vec<String> = self.row(i).iter().map(|p| format!("{p}")).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let row = record
                .iter()
                .map(|cell| {
                    cell.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("matrix row {i}: {cell:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        SolutionMatrix::new(rows)
    }
}

/// Product sanitisation: every row is passed independently through the
/// parent mechanism given by `matrix`.
#[derive(Clone, Debug)]
pub struct ProductSpec {
    space: CategorySpace,
    n: usize,
    matrix: SolutionMatrix,
    log_entries: Vec<f64>,
}

impl ProductSpec {
    pub fn new(space: CategorySpace, n: usize, matrix: SolutionMatrix) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDatabase);
        }
        if matrix.size() != space.size() {
            return Err(Error::NotStochastic(format!(
                "matrix is {0}x{0} but the category space has {1} categories",
                matrix.size(),
                space.size()
            )));
        }
        let log_entries = matrix.entries.iter().map(|&p| ln_prob(p)).collect();
        Ok(ProductSpec {
            space,
            n,
            matrix,
            log_entries,
        })
    }

    /// The symmetric family with diagonal `1 - m p` and off-diagonal `p`.
    pub fn symmetric(space: CategorySpace, n: usize, p: f64) -> Result<Self> {
        let matrix = SolutionMatrix::symmetric(space.size(), p)?;
        ProductSpec::new(space, n, matrix)
    }

    pub fn matrix(&self) -> &SolutionMatrix {
        &self.matrix
    }

    pub fn symmetric_parameter(&self) -> Option<f64> {
        self.matrix.symmetric_parameter()
    }

    fn check(&self, d: &Database) -> Result<()> {
        if d.n() != self.n {
            return Err(Error::LengthMismatch {
                left: d.n(),
                right: self.n,
            });
        }
        if let Some(&bad) = d.rows().iter().find(|&&r| r >= self.space.size()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                categories: self.space.size(),
            });
        }
        Ok(())
    }

    /// `P(X_d = d') = prod_i P[d_i][d'_i]`.
    pub fn product_pmf(&self, d: &Database, d_prime: &Database) -> Result<f64> {
        self.check(d)?;
        self.check(d_prime)?;
        Ok(d.rows()
            .iter()
            .zip(d_prime.rows())
            .map(|(&a, &b)| self.matrix.get(a, b))
            .product())
    }

    /// Sanitise `d` one row at a time, one uniform draw per row in row order.
    pub fn sample<R: Rng + ?Sized>(&self, d: &Database, rng: &mut R) -> Result<Database> {
        self.check(d)?;
        Ok(Database::from_rows_unchecked(
            self.sample_rows(d.rows(), rng),
        ))
    }

    pub(crate) fn sample_rows<R: Rng + ?Sized>(&self, rows: &[usize], rng: &mut R) -> Vec<usize> {
        rows.iter()
            .map(|&r| draw_index(self.matrix.row(r), rng.random::<f64>()))
            .collect()
    }
}

/// Symmetric product mechanism over `space` with `n` rows and parameter `p`.
pub fn make_symmetric_product(space: CategorySpace, n: usize, p: f64) -> Result<ProductSpec> {
    ProductSpec::symmetric(space, n, p)
}

impl Mechanism for ProductSpec {
    fn space(&self) -> &CategorySpace {
        &self.space
    }

    fn n(&self) -> usize {
        self.n
    }

    fn log_pmf_row(&self, d: usize) -> Vec<f64> {
        let universe = self.universe();
        let c = self.space.size();
        let input = universe.decode(d);
        // Build the row by extending prefixes one database row at a time;
        // canonical order makes the last row the fastest-moving digit.
        let mut acc = vec![0.0f64];
        for &r in &input {
            let logs = &self.log_entries[r * c..(r + 1) * c];
            let mut next = Vec::with_capacity(acc.len() * c);
            for &prefix in &acc {
                next.extend(logs.iter().map(|&l| prefix + l));
            }
            acc = next;
        }
        acc
    }

    fn normalization(&self) -> Normalization {
        if self.symmetric_parameter().is_some() {
            Normalization::FixedSymmetric
        } else {
            Normalization::Varying
        }
    }

    fn utility_gap(&self, d: usize, d_prime: usize, out: usize) -> Option<f64> {
        let p = self.symmetric_parameter()?;
        let m = self.space.m() as f64;
        let universe = self.universe();
        let steps = universe.hamming(d_prime, out) as f64 - universe.hamming(d, out) as f64;
        if steps == 0.0 {
            return Some(0.0);
        }
        // Equivalent hamming utility with e^k = (1 - m p) / p.
        let k = if p == 0.0 {
            f64::INFINITY
        } else {
            ((1.0 - m * p) / p).ln()
        };
        Some(k * steps)
    }
}
