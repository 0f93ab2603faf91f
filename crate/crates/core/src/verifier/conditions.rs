//! Closed-form privacy conditions for the hamming exponential mechanism and
//! symmetric product mechanisms.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{ProductSpec, SolutionMatrix};
use crate::space::{naive_check_count_for, Budget, CategorySpace, DatabaseSet, NeighborPair};

use super::report::{Verdict, VerificationMethod, VerificationReport};
use super::run::verify_bruteforce;
use super::subsets::scan_subsets;
use super::PrivacyParams;

/// Relative tolerance applied to the closed-form thresholds.
const CONDITION_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub satisfied: bool,
    /// Distance to the threshold, positive when satisfied. For
    /// [`exp_dp_condition`] this is `ln((e^ε + mδ)/(1-δ)) - k`; for
    /// [`product_dp_condition`] it is `p - (1-δ)/(e^ε + m)`.
    pub slack: f64,
    /// `δ = 1`: satisfied for every mechanism.
    pub trivial: bool,
}

impl ConditionCheck {
    fn trivial() -> Self {
        ConditionCheck {
            satisfied: true,
            slack: f64::INFINITY,
            trivial: true,
        }
    }
}

/// The hamming exponential mechanism with steepness `k` is `(ε, δ)`-private
/// iff `e^k ≤ (e^ε + mδ)/(1-δ)`.
pub fn exp_dp_condition(k: f64, params: PrivacyParams, m: usize) -> Result<ConditionCheck> {
    if k.is_nan() || k < 0.0 {
        return Err(Error::ParameterRange(format!("k must be >= 0, got {k}")));
    }
    if m == 0 {
        return Err(Error::TooFewCategories(1));
    }
    if params.is_trivial() {
        return Ok(ConditionCheck::trivial());
    }
    let (e, d, m) = (params.exp_epsilon(), params.delta, m as f64);
    let slack = ((e + m * d) / (1.0 - d)).ln() - k;
    Ok(ConditionCheck {
        satisfied: slack >= -CONDITION_TOLERANCE,
        slack,
        trivial: false,
    })
}

/// The symmetric product mechanism with off-diagonal `p` is
/// `(ε, δ)`-private iff `p ≥ (1-δ)/(e^ε + m)`.
pub fn product_dp_condition(p: f64, params: PrivacyParams, m: usize) -> Result<ConditionCheck> {
    if m == 0 {
        return Err(Error::TooFewCategories(1));
    }
    let cap = 1.0 / (m as f64 + 1.0);
    if !(p >= 0.0 && p <= cap * (1.0 + CONDITION_TOLERANCE)) {
        return Err(Error::ParameterRange(format!(
            "p must lie in [0, 1/(m+1)] = [0, {cap}], got {p}"
        )));
    }
    if params.is_trivial() {
        return Ok(ConditionCheck::trivial());
    }
    let threshold = (1.0 - params.delta) / (params.exp_epsilon() + m as f64);
    let slack = p - threshold;
    Ok(ConditionCheck {
        satisfied: slack >= -CONDITION_TOLERANCE * threshold,
        slack,
        trivial: false,
    })
}

/// `min(δ, min slack)` of a one-row product mechanism over all ordered
/// pairs of categories and all nonempty proper subsets of `D`.
pub(crate) fn matrix_margin(matrix: &SolutionMatrix, params: PrivacyParams) -> f64 {
    let e = params.exp_epsilon();
    let size = matrix.size();
    let mut best = params.delta;
    for d in 0..size {
        for d_prime in 0..size {
            if d == d_prime {
                continue;
            }
            if let Some(found) =
                scan_subsets(matrix.row(d), matrix.row(d_prime), e, params.delta, true)
            {
                best = best.min(found.slack);
            }
        }
    }
    best
}

/// Decide `(ε, δ)`-privacy of a solution matrix. Neighbours differ in one
/// row, so this is also the verdict for the product mechanism on any `n`.
/// Symmetric matrices use [`product_dp_condition`]; other matrices are
/// brute-forced over `D`.
pub fn verify_matrix(
    matrix: &SolutionMatrix,
    params: PrivacyParams,
    budget: &Budget,
) -> Result<VerificationReport> {
    let space = CategorySpace::indexed(matrix.size() - 1)?;
    let m = space.m();
    let Some(p) = matrix.symmetric_parameter() else {
        let spec = ProductSpec::new(space, 1, matrix.clone())?;
        return verify_bruteforce(&spec, params, budget);
    };
    let universe = space.universe(1);
    let cond = product_dp_condition(p, params, m)?;
    let margin = params.delta + (params.exp_epsilon() * p - (1.0 - m as f64 * p)).min(0.0);
    let (binding_pair, binding_set) = if cond.trivial || p >= 1.0 / (m as f64 + 1.0) {
        (None, None)
    } else {
        let pair = NeighborPair::from_indices(
            universe,
            crate::space::IndexPair {
                d: 0,
                d_prime: 1,
                row: 0,
            },
        );
        (Some(pair), Some(DatabaseSet::from_sorted(universe, vec![0])))
    };
    Ok(VerificationReport {
        verdict: if cond.satisfied {
            Verdict::Private
        } else {
            Verdict::NotPrivate
        },
        method: VerificationMethod::ClosedForm,
        params,
        binding_pair,
        binding_set,
        margin: margin.min(params.delta),
        checks_performed: BigUint::from(u32::from(!cond.trivial)),
        checks_naive: Some(naive_check_count_for(universe)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{ExponentialSpec, Mechanism};
    use crate::verifier::verify_reduced;

    fn params(e: f64, d: f64) -> PrivacyParams {
        PrivacyParams::new(e, d).unwrap()
    }

    #[test]
    fn exp_condition_threshold() {
        let p = params(1.0, 0.0);
        assert!(exp_dp_condition(1.0, p, 2).unwrap().satisfied);
        assert!(!exp_dp_condition(1.0 + 1e-6, p, 2).unwrap().satisfied);
        // δ > 0 raises the admissible steepness.
        let p = params(1.0, 0.1);
        let k_max = ((1f64.exp() + 0.2) / 0.9).ln();
        assert!(exp_dp_condition(k_max, p, 2).unwrap().satisfied);
        assert!(!exp_dp_condition(k_max + 1e-9, p, 2).unwrap().satisfied);
        let t = exp_dp_condition(50.0, params(0.1, 1.0), 3).unwrap();
        assert!(t.satisfied && t.trivial);
        assert!(exp_dp_condition(-1.0, p, 2).is_err());
    }

    #[test]
    fn product_condition_threshold() {
        let (e, d, m) = (0.5f64, 0.05, 3usize);
        let thr = (1.0 - d) / (e.exp() + m as f64);
        let check = product_dp_condition(thr, params(e, d), m).unwrap();
        assert!(check.satisfied && check.slack.abs() < 1e-15);
        assert!(!product_dp_condition(thr * (1.0 - 1e-9), params(e, d), m).unwrap().satisfied);
        assert!(product_dp_condition(0.3, params(e, d), m).is_err());
    }

    #[test]
    fn conditions_agree_through_equivalence() {
        // p = 1/(e^k + m) meets the product condition iff k meets the
        // exponential one.
        for &k in &[0.0, 0.3, 1.0, 2.5] {
            for &(e, d) in &[(0.5, 0.0), (1.0, 0.1), (2.0, 0.3)] {
                let m = 2;
                let p = 1.0 / (f64::exp(k) + m as f64);
                let a = exp_dp_condition(k, params(e, d), m).unwrap().satisfied;
                let b = product_dp_condition(p, params(e, d), m).unwrap().satisfied;
                assert_eq!(a, b, "k={k} eps={e} delta={d}");
            }
        }
    }

    #[test]
    fn matrix_closed_form_matches_bruteforce() {
        let b = Budget::default();
        for &p in &[0.0, 0.05, 0.1, 0.2, 0.25] {
            let mat = SolutionMatrix::symmetric(4, p).unwrap();
            for &(e, d) in &[(0.5, 0.0), (1.0, 0.2), (3.0, 0.05)] {
                let pr = params(e, d);
                let closed = verify_matrix(&mat, pr, &b).unwrap();
                let spec = ProductSpec::new(CategorySpace::indexed(3).unwrap(), 1, mat.clone()).unwrap();
                let brute = verify_bruteforce(&spec, pr, &b).unwrap();
                assert_eq!(closed.verdict, brute.verdict, "p={p} eps={e} delta={d}");
                assert!((closed.margin - brute.margin).abs() < 1e-12);
                assert!((matrix_margin(&mat, pr) - brute.margin).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn asymmetric_matrix_goes_to_bruteforce() {
        let mat = SolutionMatrix::new(vec![
            vec![0.7, 0.2, 0.1],
            vec![0.2, 0.6, 0.2],
            vec![0.1, 0.3, 0.6],
        ])
        .unwrap();
        let r = verify_matrix(&mat, params(1.0, 0.0), &Budget::default()).unwrap();
        assert_eq!(r.method, VerificationMethod::BruteForce);
        // Worst singleton: 0.7 vs 0.1 needs e^ε ≥ 7.
        assert!(!r.is_private());
        let r = verify_matrix(&mat, params(2.0, 0.0), &Budget::default()).unwrap();
        assert!(r.is_private());
    }

    #[test]
    fn hamming_reduced_matches_condition() {
        let s = CategorySpace::indexed(2).unwrap();
        for &k in &[0.2, 0.9, 1.6] {
            let spec = ExponentialSpec::hamming(s.clone(), 2, k).unwrap();
            for &(e, d) in &[(0.5, 0.0), (1.0, 0.1), (0.2, 0.4)] {
                let r = verify_reduced(&spec, params(e, d), &Budget::default()).unwrap();
                let c = exp_dp_condition(k, params(e, d), spec.space().m()).unwrap();
                assert_eq!(r.is_private(), c.satisfied, "k={k} eps={e} delta={d}");
            }
        }
    }
}
