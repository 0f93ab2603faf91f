use num_bigint::BigUint;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mechanism::Mechanism;
use crate::space::{naive_check_count_for, Budget, DatabaseSet, IndexPair, NeighborPair, Universe};

use super::report::{Verdict, VerificationMethod, VerificationReport};
use super::sets::{alpha_cells, check_database, members};
use super::subsets::{scan_count, scan_subsets};
use super::{PrivacyParams, MARGIN_TOLERANCE};

/// Outcome of checking one set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SetCheck {
    pub holds: bool,
    /// `e^ε P(X_{d'} ∈ A) + δ - P(X_d ∈ A)`.
    pub margin: f64,
}

/// Check the DP inequality for one pair and one nonempty set `A`.
pub fn dp_holds_on_set<M: Mechanism + ?Sized>(
    spec: &M,
    pair: &NeighborPair,
    set: &DatabaseSet,
    params: PrivacyParams,
    budget: &Budget,
) -> Result<SetCheck> {
    let universe = spec.universe();
    check_database(universe, &pair.d)?;
    check_database(universe, &pair.d_prime)?;
    budget.check_databases(universe)?;
    if set.is_empty() {
        return Err(Error::ParameterRange("the checked set must be nonempty".into()));
    }
    if set.universe() != universe {
        return Err(Error::ParameterRange(
            "the checked set belongs to a different database space".into(),
        ));
    }
    let ix = pair.indices(universe);
    let lp = spec.log_pmf_row(ix.d);
    let lq = spec.log_pmf_row(ix.d_prime);
    let pa: f64 = set.indices().iter().map(|&x| lp[x].exp()).sum();
    let qa: f64 = set.indices().iter().map(|&x| lq[x].exp()).sum();
    let margin = params.exp_epsilon() * qa + params.delta - pa;
    Ok(SetCheck {
        holds: margin >= -MARGIN_TOLERANCE,
        margin,
    })
}

#[derive(Clone, Debug)]
struct PairOutcome {
    /// Smallest slack among the sets checked for this pair.
    slack: f64,
    set: Option<Vec<usize>>,
    checks: u128,
}

impl PairOutcome {
    fn none() -> Self {
        PairOutcome {
            slack: f64::INFINITY,
            set: None,
            checks: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Route {
    /// One α-level per pair: `S` itself is the only cell.
    SingleCell,
    /// Fixed normalisation, `δ = 0`: check each α-level cell.
    Cells,
    /// Every nonempty subset of `S`.
    AllSubsets,
}

fn probs(log_row: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&x| log_row[x].exp()).collect()
}

fn mask_members(ground: &[usize], mask: u64) -> Vec<usize> {
    ground
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &x)| x)
        .collect()
}

fn reduced_pair<M: Mechanism + ?Sized>(
    spec: &M,
    pair: IndexPair,
    route: Route,
    params: PrivacyParams,
    budget: &Budget,
) -> Result<PairOutcome> {
    let lp = spec.log_pmf_row(pair.d);
    let lq = spec.log_pmf_row(pair.d_prime);
    let s = members(&lp, &lq);
    if s.is_empty() {
        return Ok(PairOutcome::none());
    }
    let e = params.exp_epsilon();
    let delta = params.delta;
    let cell_slack = |cell: &[usize]| {
        let pa: f64 = probs(&lp, cell).iter().sum();
        let qa: f64 = probs(&lq, cell).iter().sum();
        e * qa + delta - pa
    };

    match route {
        Route::SingleCell => Ok(PairOutcome {
            slack: cell_slack(&s),
            set: Some(s),
            checks: 1,
        }),
        Route::Cells => {
            let (_, cells) = alpha_cells(spec, pair.d, pair.d_prime, &s, &lp, &lq);
            let slacks: Vec<f64> = cells.iter().map(|c| cell_slack(c)).collect();
            let checks = cells.len() as u128;
            // With δ = 0 the slacks of disjoint cells add, so the worst set
            // is the union of the violating cells.
            let violating: Vec<usize> = (0..cells.len()).filter(|&i| slacks[i] < 0.0).collect();
            if violating.len() > 1 {
                let mut union: Vec<usize> =
                    violating.iter().flat_map(|&i| cells[i].iter().copied()).collect();
                union.sort_unstable();
                let slack = cell_slack(&union);
                return Ok(PairOutcome {
                    slack,
                    set: Some(union),
                    checks,
                });
            }
            let best = (0..cells.len())
                .min_by(|&a, &b| slacks[a].total_cmp(&slacks[b]))
                .expect("nonempty S has a cell");
            Ok(PairOutcome {
                slack: slacks[best],
                set: Some(cells[best].clone()),
                checks,
            })
        }
        Route::AllSubsets => {
            budget.check_subsets("S_{d,d'}", s.len())?;
            let found = scan_subsets(&probs(&lp, &s), &probs(&lq, &s), e, delta, false)
                .expect("nonempty S has a nonempty subset");
            Ok(PairOutcome {
                slack: found.slack,
                set: Some(mask_members(&s, found.mask)),
                checks: scan_count(s.len(), false),
            })
        }
    }
}

fn assemble(
    universe: Universe,
    pairs: &[IndexPair],
    outcomes: Vec<Result<PairOutcome>>,
    params: PrivacyParams,
    method: VerificationMethod,
) -> Result<VerificationReport> {
    let mut best: Option<(usize, PairOutcome)> = None;
    let mut checks: u128 = 0;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        checks += outcome.checks;
        if outcome.set.is_some() && best.as_ref().map_or(true, |(_, b)| outcome.slack < b.slack) {
            best = Some((i, outcome));
        }
    }
    let min_slack = best.as_ref().map_or(f64::INFINITY, |(_, b)| b.slack);
    let margin = params.delta.min(min_slack);
    let (binding_pair, binding_set) = match best {
        Some((i, b)) => (
            Some(NeighborPair::from_indices(universe, pairs[i])),
            b.set.map(|s| DatabaseSet::from_sorted(universe, s)),
        ),
        None => (None, None),
    };
    Ok(VerificationReport {
        verdict: if margin >= -MARGIN_TOLERANCE {
            Verdict::Private
        } else {
            Verdict::NotPrivate
        },
        method,
        params,
        binding_pair,
        binding_set,
        margin,
        checks_performed: BigUint::from(checks),
        checks_naive: Some(naive_check_count_for(universe)?),
    })
}

/// Verify with the sufficient-set reduction.
///
/// Routing: `δ = 1` is decided without enumeration. Hamming and symmetric
/// product mechanisms check `S_{d,d'}` once per pair. Other mechanisms with a
/// fixed normalisation check one cell per α-level when `δ = 0`. Everything
/// else enumerates the nonempty subsets of each `S_{d,d'}`.
pub fn verify_reduced<M: Mechanism + ?Sized>(
    spec: &M,
    params: PrivacyParams,
    budget: &Budget,
) -> Result<VerificationReport> {
    let universe = spec.universe();
    if params.is_trivial() {
        return Ok(VerificationReport {
            verdict: Verdict::Private,
            method: VerificationMethod::ClosedForm,
            params,
            binding_pair: None,
            binding_set: None,
            margin: 0.0,
            checks_performed: BigUint::default(),
            checks_naive: budget
                .check_databases(universe)
                .ok()
                .and_then(|_| naive_check_count_for(universe).ok()),
        });
    }
    budget.check_databases(universe)?;
    let norm = spec.normalization();
    if norm.is_fixed() {
        spec.validate_normalization()?;
    }
    let (route, method) = if norm.is_single_level() {
        (Route::SingleCell, VerificationMethod::Partition)
    } else if norm.is_fixed() && params.delta == 0.0 {
        (Route::Cells, VerificationMethod::Partition)
    } else {
        (Route::AllSubsets, VerificationMethod::SufficientSet)
    };
    let pairs: Vec<IndexPair> = universe.neighbour_indices().collect();
    let outcomes: Vec<Result<PairOutcome>> = pairs
        .par_iter()
        .map(|&p| reduced_pair(spec, p, route, params, budget))
        .collect();
    assemble(universe, &pairs, outcomes, params, method)
}

/// Verify by checking every nonempty proper subset of `D^n` for every
/// ordered neighbour pair. No shortcut is taken, not even for `δ = 1`.
pub fn verify_bruteforce<M: Mechanism + ?Sized>(
    spec: &M,
    params: PrivacyParams,
    budget: &Budget,
) -> Result<VerificationReport> {
    let universe = spec.universe();
    let size = budget.check_databases(universe)?;
    budget.check_subsets("D^n", size)?;
    let all: Vec<usize> = (0..size).collect();
    let e = params.exp_epsilon();
    let pairs: Vec<IndexPair> = universe.neighbour_indices().collect();
    let outcomes: Vec<Result<PairOutcome>> = pairs
        .par_iter()
        .map(|&pair| {
            let p: Vec<f64> = spec.log_pmf_row(pair.d).into_iter().map(f64::exp).collect();
            let q: Vec<f64> = spec.log_pmf_row(pair.d_prime).into_iter().map(f64::exp).collect();
            let found = scan_subsets(&p, &q, e, params.delta, true);
            Ok(PairOutcome {
                slack: found.map_or(f64::INFINITY, |f| f.slack),
                set: found.map(|f| mask_members(&all, f.mask)),
                checks: scan_count(size, true),
            })
        })
        .collect();
    assemble(universe, &pairs, outcomes, params, VerificationMethod::BruteForce)
}
