//! Sufficient sets `S_{d,d'}` and their α-level partition.

use crate::error::{Error, Result};
use crate::mechanism::Mechanism;
use crate::space::{Budget, Database, DatabaseSet, NeighborPair, Universe};

use super::TIE_BAND;

/// Relative tolerance used to group utility gaps into α-levels.
const LEVEL_TOLERANCE: f64 = 1e-9;

/// `S_{d,d'} = {x : P(X_d = x) > P(X_{d'} = x)}` with its α-level structure.
#[derive(Clone, Debug, PartialEq)]
pub struct SufficientSet {
    pub pair: NeighborPair,
    pub members: DatabaseSet,
    /// Distinct values of `u(d,x) - u(d',x)` over the members, ascending.
    /// Empty unless the normalisation is fixed.
    pub alpha_levels: Vec<f64>,
    /// One cell per α-level, in the same order. Present only when the
    /// normalisation is fixed.
    pub partition: Option<Vec<DatabaseSet>>,
}

/// Indices `x` with `ln P(X_d = x) > ln P(X_{d'} = x)` beyond the tie band.
pub(crate) fn members(lp: &[f64], lq: &[f64]) -> Vec<usize> {
    lp.iter()
        .zip(lq)
        .enumerate()
        .filter(|(_, (&a, &b))| a > b + TIE_BAND)
        .map(|(x, _)| x)
        .collect()
}

/// Group the members by utility gap. Returns `(levels, cells)` with cells
/// holding ascending indices.
pub(crate) fn alpha_cells<M: Mechanism + ?Sized>(
    spec: &M,
    d: usize,
    d_prime: usize,
    members: &[usize],
    lp: &[f64],
    lq: &[f64],
) -> (Vec<f64>, Vec<Vec<usize>>) {
    let mut gapped: Vec<(f64, usize)> = members
        .iter()
        .map(|&x| {
            let gap = spec
                .utility_gap(d, d_prime, x)
                .unwrap_or(lp[x] - lq[x]);
            (gap, x)
        })
        .collect();
    gapped.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut levels: Vec<f64> = Vec::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for (gap, x) in gapped {
        match levels.last() {
            Some(&level) if gap - level <= LEVEL_TOLERANCE * gap.abs().max(1.0) => {
                cells.last_mut().expect("level has a cell").push(x);
            }
            _ => {
                levels.push(gap);
                cells.push(vec![x]);
            }
        }
    }
    for cell in &mut cells {
        cell.sort_unstable();
    }
    (levels, cells)
}

pub(crate) fn check_database(universe: Universe, db: &Database) -> Result<()> {
    if db.n() != universe.rows() {
        return Err(Error::LengthMismatch {
            left: db.n(),
            right: universe.rows(),
        });
    }
    if let Some(&bad) = db.rows().iter().find(|&&r| r >= universe.categories()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            categories: universe.categories(),
        });
    }
    Ok(())
}

/// Compute `S_{d,d'}` for one ordered neighbour pair.
pub fn sufficient_set<M: Mechanism + ?Sized>(
    spec: &M,
    pair: &NeighborPair,
    budget: &Budget,
) -> Result<SufficientSet> {
    let universe = spec.universe();
    check_database(universe, &pair.d)?;
    check_database(universe, &pair.d_prime)?;
    budget.check_databases(universe)?;
    let norm = spec.normalization();
    if norm.is_fixed() {
        spec.validate_normalization()?;
    }

    let ix = pair.indices(universe);
    let lp = spec.log_pmf_row(ix.d);
    let lq = spec.log_pmf_row(ix.d_prime);
    let s = members(&lp, &lq);
    let (alpha_levels, partition) = if norm.is_fixed() {
        let (levels, cells) = alpha_cells(spec, ix.d, ix.d_prime, &s, &lp, &lq);
        let cells = cells
            .into_iter()
            .map(|c| DatabaseSet::from_sorted(universe, c))
            .collect();
        (levels, Some(cells))
    } else {
        (Vec::new(), None)
    };
    Ok(SufficientSet {
        pair: pair.clone(),
        members: DatabaseSet::from_sorted(universe, s),
        alpha_levels,
        partition,
    })
}
