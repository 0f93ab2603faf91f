//! Finite database spaces `D^n`, hamming geometry and canonical enumeration.
//!
//! Databases are enumerated in base-`(m+1)` lexicographic order with row 0 as
//! the most significant digit. Every index-based structure in the crate
//! (database sets, utility tables, pmf rows) uses this order.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Enumeration limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Maximum `(m+1)^n` for anything that walks all databases.
    pub databases: u64,
    /// Maximum size of a ground set whose subsets are enumerated exhaustively.
    pub subset_elements: u32,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            databases: 1 << 20,
            subset_elements: 24,
        }
    }
}

impl Budget {
    pub fn check_databases(&self, universe: Universe) -> Result<usize> {
        match universe.size() {
            Some(size) if size as u64 <= self.databases => Ok(size),
            other => Err(Error::EnumerationTooLarge {
                what: "D^n",
                size: other
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| universe.size_string()),
                budget: self.databases,
            }),
        }
    }

    pub fn check_subsets(&self, what: &'static str, elements: usize) -> Result<()> {
        if elements as u64 > self.subset_elements as u64 {
            return Err(Error::EnumerationTooLarge {
                what,
                size: elements.to_string(),
                budget: self.subset_elements as u64,
            });
        }
        Ok(())
    }
}

/// The finite data set `D` of `m+1` labelled categories.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategorySpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl CategorySpace {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::TooFewCategories(labels.len()));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(CategorySpace { labels, index })
    }

    /// Categories labelled `"0"`, `"1"`, ..., `"m"`.
    pub fn indexed(m: usize) -> Result<Self> {
        CategorySpace::new((0..=m).map(|i| i.to_string()))
    }

    /// Number of categories minus one.
    pub fn m(&self) -> usize {
        self.labels.len() - 1
    }

    /// Number of categories, `m + 1`.
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn universe(&self, n: usize) -> Universe {
        Universe::new(self.size(), n)
    }
}

/// Shape of `D^n`: number of categories and rows. Owns the index arithmetic
/// of the canonical enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Universe {
    categories: usize,
    rows: usize,
}

impl Universe {
    pub fn new(categories: usize, rows: usize) -> Self {
        Universe { categories, rows }
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn m(&self) -> usize {
        self.categories - 1
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// `(m+1)^n`, or `None` when it does not fit in `usize`.
    pub fn size(&self) -> Option<usize> {
        let mut acc: usize = 1;
        for _ in 0..self.rows {
            acc = acc.checked_mul(self.categories)?;
        }
        Some(acc)
    }

    pub fn size_big(&self) -> BigUint {
        BigUint::from(self.categories).pow(self.rows as u32)
    }

    fn size_string(&self) -> String {
        self.size_big().to_string()
    }

    /// Canonical index of a row vector (row 0 most significant).
    pub fn index_of(&self, rows: &[usize]) -> usize {
        rows.iter().fold(0, |acc, &r| acc * self.categories + r)
    }

    /// Inverse of [`Universe::index_of`].
    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut rows = vec![0; self.rows];
        for slot in rows.iter_mut().rev() {
            *slot = index % self.categories;
            index /= self.categories;
        }
        rows
    }

    /// Place value of `row` in the canonical index.
    pub fn stride(&self, row: usize) -> usize {
        self.categories.pow((self.rows - 1 - row) as u32)
    }

    /// Hamming distance between two canonical indices.
    pub fn hamming(&self, mut a: usize, mut b: usize) -> usize {
        let mut h = 0;
        for _ in 0..self.rows {
            if a % self.categories != b % self.categories {
                h += 1;
            }
            a /= self.categories;
            b /= self.categories;
        }
        h
    }

    /// Ordered neighbour pairs as canonical indices, in canonical order: for
    /// each `d`, for each row, for each replacement value.
    pub fn neighbour_indices(&self) -> impl Iterator<Item = IndexPair> + '_ {
        let size = self.size().unwrap_or(0);
        (0..size).flat_map(move |d| {
            (0..self.rows).flat_map(move |row| {
                let stride = self.stride(row);
                let current = (d / stride) % self.categories;
                (0..self.categories)
                    .filter(move |&v| v != current)
                    .map(move |v| IndexPair {
                        d,
                        d_prime: d - current * stride + v * stride,
                        row,
                    })
            })
        })
    }

    /// Number of ordered neighbour pairs, `n m (m+1)^n`.
    pub fn neighbour_count(&self) -> BigUint {
        BigUint::from(self.rows) * BigUint::from(self.m()) * self.size_big()
    }
}

/// A neighbour pair in index form; the internal currency of the verifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IndexPair {
    pub d: usize,
    pub d_prime: usize,
    pub row: usize,
}

/// A point of `D^n`: one category index per row.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Database {
    rows: Vec<usize>,
}

impl Database {
    pub fn new(space: &CategorySpace, rows: Vec<usize>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= space.size()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                categories: space.size(),
            });
        }
        Ok(Database { rows })
    }

    pub fn from_labels<S: AsRef<str>>(space: &CategorySpace, labels: &[S]) -> Result<Self> {
        let rows = labels
            .iter()
            .enumerate()
            .map(|(row, l)| {
                space.index_of(l.as_ref()).ok_or_else(|| Error::UnknownLabel {
                    label: l.as_ref().to_string(),
                    row,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Database::new(space, rows)
    }

    pub(crate) fn from_rows_unchecked(rows: Vec<usize>) -> Self {
        Database { rows }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn labels<'a>(&self, space: &'a CategorySpace) -> Vec<&'a str> {
        self.rows
            .iter()
            .map(|&r| space.label(r).unwrap_or("?"))
            .collect()
    }

    pub fn index_in(&self, universe: Universe) -> usize {
        universe.index_of(&self.rows)
    }
}

impl fmt::Display for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

/// Two databases differing on exactly one row.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NeighborPair {
    pub d: Database,
    pub d_prime: Database,
    pub differing_row: usize,
}

impl NeighborPair {
    pub fn new(d: Database, d_prime: Database) -> Result<Self> {
        if hamming_distance(&d, &d_prime)? != 1 {
            return Err(Error::NotNeighbours(d.rows.clone(), d_prime.rows.clone()));
        }
        let differing_row = d
            .rows
            .iter()
            .zip(&d_prime.rows)
            .position(|(a, b)| a != b)
            .expect("distance one implies a differing row");
        Ok(NeighborPair {
            d,
            d_prime,
            differing_row,
        })
    }

    pub(crate) fn from_indices(universe: Universe, pair: IndexPair) -> Self {
        NeighborPair {
            d: Database::from_rows_unchecked(universe.decode(pair.d)),
            d_prime: Database::from_rows_unchecked(universe.decode(pair.d_prime)),
            differing_row: pair.row,
        }
    }

    pub fn indices(&self, universe: Universe) -> IndexPair {
        IndexPair {
            d: universe.index_of(&self.d.rows),
            d_prime: universe.index_of(&self.d_prime.rows),
            row: self.differing_row,
        }
    }

    pub fn swapped(&self) -> Self {
        NeighborPair {
            d: self.d_prime.clone(),
            d_prime: self.d.clone(),
            differing_row: self.differing_row,
        }
    }
}

/// A subset of `D^n`, stored as sorted canonical indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DatabaseSet {
    universe: Universe,
    members: Vec<usize>,
}

impl DatabaseSet {
    pub fn from_indices(universe: Universe, mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if let (Some(&last), Some(size)) = (members.last(), universe.size()) {
            if last >= size {
                return Err(Error::IndexOutOfRange {
                    index: last,
                    categories: size,
                });
            }
        }
        Ok(DatabaseSet { universe, members })
    }

    pub fn from_databases<'a, I>(universe: Universe, dbs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Database>,
    {
        let mut members = Vec::new();
        for db in dbs {
            if db.n() != universe.rows() {
                return Err(Error::LengthMismatch {
                    left: db.n(),
                    right: universe.rows(),
                });
            }
            if let Some(&bad) = db.rows.iter().find(|&&r| r >= universe.categories()) {
                return Err(Error::IndexOutOfRange {
                    index: bad,
                    categories: universe.categories(),
                });
            }
            members.push(universe.index_of(&db.rows));
        }
        DatabaseSet::from_indices(universe, members)
    }

    pub(crate) fn from_sorted(universe: Universe, members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        DatabaseSet { universe, members }
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn indices(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, db: &Database) -> bool {
        self.members
            .binary_search(&self.universe.index_of(db.rows()))
            .is_ok()
    }

    pub fn databases(&self) -> impl Iterator<Item = Database> + '_ {
        self.members
            .iter()
            .map(|&i| Database::from_rows_unchecked(self.universe.decode(i)))
    }
}

/// Number of rows on which two databases differ.
pub fn hamming_distance(d: &Database, d_prime: &Database) -> Result<usize> {
    if d.n() != d_prime.n() {
        return Err(Error::LengthMismatch {
            left: d.n(),
            right: d_prime.n(),
        });
    }
    Ok(d.rows
        .iter()
        .zip(&d_prime.rows)
        .filter(|(a, b)| a != b)
        .count())
}

/// All `(m+1)^n` databases in canonical order.
pub fn enumerate_databases(
    space: &CategorySpace,
    n: usize,
    budget: &Budget,
) -> Result<impl Iterator<Item = Database>> {
    let universe = space.universe(n);
    let size = budget.check_databases(universe)?;
    Ok((0..size).map(move |i| Database::from_rows_unchecked(universe.decode(i))))
}

/// All `n m (m+1)^n` ordered neighbour pairs in canonical order.
pub fn enumerate_neighbor_pairs(
    space: &CategorySpace,
    n: usize,
    budget: &Budget,
) -> Result<impl Iterator<Item = NeighborPair>> {
    let universe = space.universe(n);
    budget.check_databases(universe)?;
    let pairs: Vec<IndexPair> = universe.neighbour_indices().collect();
    Ok(pairs
        .into_iter()
        .map(move |p| NeighborPair::from_indices(universe, p)))
}

/// Number of inequality checks needed without any reduction:
/// `n m (m+1)^n (2^{(m+1)^n} - 2)`.
pub fn naive_check_count(space: &CategorySpace, n: usize) -> Result<BigUint> {
    naive_check_count_for(space.universe(n))
}

pub(crate) fn naive_check_count_for(universe: Universe) -> Result<BigUint> {
    let size = universe
        .size()
        .filter(|&s| s <= u32::MAX as usize)
        .ok_or_else(|| Error::EnumerationTooLarge {
            what: "2^{(m+1)^n}",
            size: universe.size_string(),
            budget: u32::MAX as u64,
        })?;
    let subsets = (BigUint::one() << size) - BigUint::from(2u32);
    Ok(universe.neighbour_count() * subsets)
}
