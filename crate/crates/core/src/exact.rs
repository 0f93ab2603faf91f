//! Exact rational verification.
//!
//! Mechanisms whose probabilities are rational (hamming utilities with a
//! rational `e^{-k}`, product mechanisms with rational matrices) can be
//! verified with no rounding at all when `e^ε` and `δ` are rational too.
//! This settles boundary cases such as `e^k = (e^ε + mδ)/(1-δ)` exactly,
//! where floating point can only answer up to a tolerance.

use std::ops::{AddAssign, SubAssign};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::space::{
    naive_check_count_for, Budget, CategorySpace, DatabaseSet, IndexPair, NeighborPair, Universe,
};
use crate::verifier::VerificationMethod;

/// Parse `"3"`, `"-1.25"`, `"2.5e-3"` or `"7/20"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || Error::Parse(format!("not a rational number: {text:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(num, den));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty()
        || !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(all_digits.parse::<BigInt>().map_err(|_| bad())?);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, (-scale) as usize);
    }
    Ok(if negative { -value } else { value })
}

/// Exact `(e^ε, δ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactParams {
    pub exp_epsilon: BigRational,
    pub delta: BigRational,
}

impl ExactParams {
    pub fn new(exp_epsilon: BigRational, delta: BigRational) -> Result<Self> {
        if exp_epsilon < BigRational::one() {
            return Err(Error::ParameterRange(format!(
                "e^epsilon must be >= 1, got {exp_epsilon}"
            )));
        }
        if delta.is_negative() || delta > BigRational::one() {
            return Err(Error::ParameterRange(format!(
                "delta must lie in [0, 1], got {delta}"
            )));
        }
        Ok(ExactParams { exp_epsilon, delta })
    }

    pub fn is_trivial(&self) -> bool {
        self.delta.is_one()
    }
}

#[derive(Clone, Debug)]
enum Family {
    /// Pmf `r^h / (1 + m r)^n` with `r = e^{-k}`.
    Hamming { r: BigRational },
    Product { matrix: Vec<Vec<BigRational>> },
}

/// A mechanism with exactly rational probabilities.
#[derive(Clone, Debug)]
pub struct ExactMechanism {
    space: CategorySpace,
    n: usize,
    family: Family,
}

fn frac_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl ExactMechanism {
    /// Hamming exponential mechanism given `e^k` exactly (`e^k ≥ 1`).
    pub fn hamming(space: CategorySpace, n: usize, exp_k: BigRational) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDatabase);
        }
        if exp_k < BigRational::one() {
            return Err(Error::ParameterRange(format!("e^k must be >= 1, got {exp_k}")));
        }
        Ok(ExactMechanism {
            space,
            n,
            family: Family::Hamming { r: exp_k.recip() },
        })
    }

    /// Product mechanism with an exactly row-stochastic matrix.
    pub fn product(space: CategorySpace, n: usize, matrix: Vec<Vec<BigRational>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDatabase);
        }
        let size = space.size();
        if matrix.len() != size {
            return Err(Error::NotStochastic(format!(
                "{} rows for {size} categories",
                matrix.len()
            )));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != size {
                return Err(Error::NotStochastic(format!(
                    "row {i} has {} entries, expected {size}",
                    row.len()
                )));
            }
            if row.iter().any(|p| p.is_negative() || *p > BigRational::one()) {
                return Err(Error::NotStochastic(format!("row {i} has an entry outside [0, 1]")));
            }
            let sum: BigRational = row.iter().sum();
            if !sum.is_one() {
                return Err(Error::NotStochastic(format!("row {i} sums to {sum}, not exactly 1")));
            }
        }
        Ok(ExactMechanism {
            space,
            n,
            family: Family::Product { matrix },
        })
    }

    /// Symmetric product mechanism with off-diagonal `p ∈ [0, 1/(m+1)]`.
    pub fn symmetric_product(space: CategorySpace, n: usize, p: BigRational) -> Result<Self> {
        let size = space.size();
        let cap = BigRational::new(BigInt::one(), BigInt::from(size));
        if p.is_negative() || p > cap {
            return Err(Error::ParameterRange(format!("p = {p} must lie in [0, 1/(m+1)]")));
        }
        let diag = BigRational::one() - &p * BigInt::from(size - 1);
        let matrix = (0..size)
            .map(|i| (0..size).map(|j| if i == j { diag.clone() } else { p.clone() }).collect())
            .collect();
        ExactMechanism::product(space, n, matrix)
    }

    pub fn space(&self) -> &CategorySpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn universe(&self) -> Universe {
        self.space.universe(self.n)
    }

    /// True when every neighbour pair has a single utility-gap level, so that
    /// `S_{d,d'}` alone decides the pair.
    pub fn is_single_level(&self) -> bool {
        match &self.family {
            Family::Hamming { .. } => true,
            Family::Product { matrix } => {
                let p = &matrix[0][1];
                let diag = &matrix[0][0];
                let size = matrix.len();
                p <= diag
                    && (0..size).all(|i| {
                        (0..size).all(|j| &matrix[i][j] == if i == j { diag } else { p })
                    })
            }
        }
    }

    /// `P(X_d = x)` for every `x` in canonical order.
    pub fn pmf_row(&self, d: usize) -> Vec<BigRational> {
        let universe = self.universe();
        let size = universe.size().expect("callers check the budget");
        match &self.family {
            Family::Hamming { r } => {
                let m = BigRational::from_integer(BigInt::from(self.space.m()));
                let z = num_traits::pow(BigRational::one() + &m * r, self.n);
                let mut powers = vec![z.recip()];
                for h in 1..=self.n {
                    let next = &powers[h - 1] * r;
                    powers.push(next);
                }
                (0..size).map(|x| powers[universe.hamming(d, x)].clone()).collect()
            }
            Family::Product { matrix } => {
                let rows = universe.decode(d);
                (0..size)
                    .map(|x| {
                        let out = universe.decode(x);
                        rows.iter()
                            .zip(&out)
                            .map(|(&a, &b)| &matrix[a][b])
                            .fold(BigRational::one(), |acc, p| acc * p)
                    })
                    .collect()
            }
        }
    }

    /// Float pmf row, for cross-checking against the float verifier.
    pub fn pmf_row_f64(&self, d: usize) -> Vec<f64> {
        self.pmf_row(d).iter().map(frac_to_f64).collect()
    }
}

/// Result of an exact verification.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactReport {
    pub private: bool,
    pub method: VerificationMethod,
    /// `min(δ, smallest slack)`, exactly.
    pub margin: BigRational,
    pub binding_pair: Option<NeighborPair>,
    pub binding_set: Option<DatabaseSet>,
    pub checks_performed: BigUint,
    pub checks_naive: Option<BigUint>,
}

impl ExactReport {
    pub fn to_json(&self, space: &CategorySpace) -> Value {
        let labels = |db: &crate::space::Database| -> Vec<String> {
            db.labels(space).into_iter().map(str::to_owned).collect()
        };
        json!({
            "verdict": if self.private { "private" } else { "not-private" },
            "private": self.private,
            "method": self.method,
            "exact": true,
            "margin": self.margin.to_string(),
            "margin_approx": frac_to_f64(&self.margin),
            "checks_performed": self.checks_performed.to_string(),
            "checks_naive": self.checks_naive.as_ref().map(|c| c.to_string()),
            "binding_pair": self.binding_pair.as_ref().map(|p| json!({
                "d": labels(&p.d),
                "d_prime": labels(&p.d_prime),
                "differing_row": p.differing_row,
            })),
            "binding_set": self.binding_set.as_ref().map(|s| {
                s.databases().map(|db| labels(&db)).collect::<Vec<_>>()
            }),
        })
    }
}

/// Minimum over nonempty subsets of `base + Σ_A w`, visiting subsets in
/// Gray-code order so each step adds or removes one element.
fn gray_min<T>(w: &[T], base: &T, exclude_full: bool) -> Option<(T, u64)>
where
    T: Clone + Ord + for<'a> AddAssign<&'a T> + for<'a> SubAssign<&'a T>,
{
    let len = w.len();
    let full = (1u64 << len) - 1;
    let mut sum = base.clone();
    let mut mask = 0u64;
    let mut best: Option<(T, u64)> = None;
    for i in 1..=full {
        let bit = i.trailing_zeros() as usize;
        mask ^= 1 << bit;
        if mask >> bit & 1 == 1 {
            sum += &w[bit];
        } else {
            sum -= &w[bit];
        }
        if exclude_full && mask == full {
            continue;
        }
        if best.as_ref().map_or(true, |(b, _)| sum < *b) {
            best = Some((sum.clone(), mask));
        }
    }
    best
}

/// Exact minimum slack `δ + Σ_A (e^ε Q(x) - P(x))` over nonempty subsets of
/// the ground set, with the minimising subset as a mask.
fn exact_scan(
    p: &[BigRational],
    q: &[BigRational],
    params: &ExactParams,
    exclude_full: bool,
) -> Option<(BigRational, u64)> {
    let weights: Vec<BigRational> = p
        .iter()
        .zip(q)
        .map(|(p, q)| &params.exp_epsilon * q - p)
        .collect();
    // Common denominator turns every subset sum into integer arithmetic.
    let lcm = weights
        .iter()
        .map(|w| w.denom().clone())
        .chain(std::iter::once(params.delta.denom().clone()))
        .fold(BigInt::one(), |acc, d| num_integer::Integer::lcm(&acc, &d));
    let scale = |r: &BigRational| -> BigInt { r.numer() * (&lcm / r.denom()) };
    let ints: Vec<BigInt> = weights.iter().map(scale).collect();
    let base = scale(&params.delta);

    let bound: BigInt = ints.iter().map(|x| x.abs()).sum::<BigInt>() + base.abs();
    let (min, mask) = if bound < (BigInt::one() << 120) {
        let small: Vec<i128> = ints.iter().map(|x| x.to_i128().expect("bounded")).collect();
        let (v, mask) = gray_min(&small, &base.to_i128().expect("bounded"), exclude_full)?;
        (BigInt::from(v), mask)
    } else {
        gray_min(&ints, &base, exclude_full)?
    };
    Some((BigRational::new(min, lcm), mask))
}

struct PairOutcome {
    slack: Option<BigRational>,
    set: Vec<usize>,
    checks: u128,
}

fn mask_members(ground: &[usize], mask: u64) -> Vec<usize> {
    ground
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &x)| x)
        .collect()
}

fn assemble(
    mech: &ExactMechanism,
    params: &ExactParams,
    pairs: &[IndexPair],
    outcomes: Vec<Result<PairOutcome>>,
    method: VerificationMethod,
) -> Result<ExactReport> {
    let universe = mech.universe();
    let mut checks: u128 = 0;
    let mut best: Option<(usize, BigRational, Vec<usize>)> = None;
    for (i, o) in outcomes.into_iter().enumerate() {
        let o = o?;
        checks += o.checks;
        if let Some(slack) = o.slack {
            if best.as_ref().map_or(true, |(_, b, _)| slack < *b) {
                best = Some((i, slack, o.set));
            }
        }
    }
    let mut margin = params.delta.clone();
    let (mut binding_pair, mut binding_set) = (None, None);
    if let Some((i, slack, set)) = best {
        if slack < margin {
            margin = slack;
        }
        binding_pair = Some(NeighborPair::from_indices(universe, pairs[i]));
        binding_set = Some(DatabaseSet::from_sorted(universe, set));
    }
    Ok(ExactReport {
        private: !margin.is_negative(),
        method,
        margin,
        binding_pair,
        binding_set,
        checks_performed: BigUint::from(checks),
        checks_naive: Some(naive_check_count_for(universe)?),
    })
}

/// Exact brute force over every nonempty proper subset of `D^n`.
pub fn verify_bruteforce_exact(
    mech: &ExactMechanism,
    params: &ExactParams,
    budget: &Budget,
) -> Result<ExactReport> {
    let universe = mech.universe();
    let size = budget.check_databases(universe)?;
    budget.check_subsets("D^n", size)?;
    let all: Vec<usize> = (0..size).collect();
    let pairs: Vec<IndexPair> = universe.neighbour_indices().collect();
    let outcomes = pairs
        .par_iter()
        .map(|pair| {
            let p = mech.pmf_row(pair.d);
            let q = mech.pmf_row(pair.d_prime);
            let found = exact_scan(&p, &q, params, true);
            Ok(PairOutcome {
                set: found.as_ref().map(|(_, m)| mask_members(&all, *m)).unwrap_or_default(),
                slack: found.map(|(s, _)| s),
                checks: (1u128 << size) - 2,
            })
        })
        .collect();
    assemble(mech, params, &pairs, outcomes, VerificationMethod::BruteForce)
}

/// Exact sufficient-set verification. Single-level mechanisms check
/// `S_{d,d'}` once per pair; others check every nonempty subset of it.
pub fn verify_reduced_exact(
    mech: &ExactMechanism,
    params: &ExactParams,
    budget: &Budget,
) -> Result<ExactReport> {
    let universe = mech.universe();
    if params.is_trivial() {
        return Ok(ExactReport {
            private: true,
            method: VerificationMethod::ClosedForm,
            margin: BigRational::zero(),
            binding_pair: None,
            binding_set: None,
            checks_performed: BigUint::zero(),
            checks_naive: budget
                .check_databases(universe)
                .ok()
                .and_then(|_| naive_check_count_for(universe).ok()),
        });
    }
    budget.check_databases(universe)?;
    let single = mech.is_single_level();
    let pairs: Vec<IndexPair> = universe.neighbour_indices().collect();
    let outcomes = pairs
        .par_iter()
        .map(|pair| {
            let p = mech.pmf_row(pair.d);
            let q = mech.pmf_row(pair.d_prime);
            let s: Vec<usize> = (0..p.len()).filter(|&x| p[x] > q[x]).collect();
            if s.is_empty() {
                return Ok(PairOutcome {
                    slack: None,
                    set: Vec::new(),
                    checks: 0,
                });
            }
            if single {
                let pa: BigRational = s.iter().map(|&x| &p[x]).sum();
                let qa: BigRational = s.iter().map(|&x| &q[x]).sum();
                let slack = &params.exp_epsilon * qa + &params.delta - pa;
                return Ok(PairOutcome {
                    slack: Some(slack),
                    set: s,
                    checks: 1,
                });
            }
            budget.check_subsets("S_{d,d'}", s.len())?;
            let ps: Vec<BigRational> = s.iter().map(|&x| p[x].clone()).collect();
            let qs: Vec<BigRational> = s.iter().map(|&x| q[x].clone()).collect();
            let (slack, mask) = exact_scan(&ps, &qs, params, false).expect("nonempty S");
            Ok(PairOutcome {
                slack: Some(slack),
                set: mask_members(&s, mask),
                checks: (1u128 << s.len()) - 1,
            })
        })
        .collect();
    let method = if single {
        VerificationMethod::Partition
    } else {
        VerificationMethod::SufficientSet
    };
    assemble(mech, params, &pairs, outcomes, method)
}
