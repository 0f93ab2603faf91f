//! Closed-form utility analysis: the exponential/product equivalence, the
//! expected hamming error of a mechanism, error bounds under `(ε, δ)`, and
//! the optimal symmetric mechanism.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mechanism::{Mechanism, MechanismSpec, SolutionMatrix, UtilityFunction};
use crate::space::{Budget, Universe};
use crate::verifier::{matrix_margin, PrivacyParams, MARGIN_TOLERANCE};

/// Steepness `k` of a hamming utility. `p = 0` (the identity matrix) has no
/// finite counterpart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Steepness {
    Finite(f64),
    NoNoise,
}

impl Steepness {
    pub fn finite(self) -> Option<f64> {
        match self {
            Steepness::Finite(k) => Some(k),
            Steepness::NoNoise => None,
        }
    }
}

impl fmt::Display for Steepness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Steepness::Finite(k) => write!(f, "{k}"),
            Steepness::NoNoise => f.write_str("no-noise"),
        }
    }
}

impl FromStr for Steepness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("no-noise") || s.eq_ignore_ascii_case("inf") {
            return Ok(Steepness::NoNoise);
        }
        let k: f64 = s
            .parse()
            .map_err(|e| Error::Parse(format!("steepness {s:?}: {e}")))?;
        if k.is_infinite() && k > 0.0 {
            Ok(Steepness::NoNoise)
        } else {
            Ok(Steepness::Finite(k))
        }
    }
}

impl Serialize for Steepness {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Steepness::Finite(k) => s.serialize_f64(*k),
            Steepness::NoNoise => s.serialize_str("no-noise"),
        }
    }
}

impl<'de> Deserialize<'de> for Steepness {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(k) => Ok(Steepness::Finite(k)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `p = 1/(e^k + m)`. `k = +∞` maps to `p = 0`.
pub fn p_from_k(k: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::TooFewCategories(1));
    }
    if k.is_nan() || k < 0.0 {
        return Err(Error::ParameterRange(format!("k must be >= 0, got {k}")));
    }
    // For large k, e^{-k}/(1 + m e^{-k}) avoids overflow.
    let t = (-k).exp();
    Ok(t / (1.0 + m as f64 * t))
}

/// `k = ln(1/p - m)`, the inverse of [`p_from_k`].
pub fn k_from_p(p: f64, m: usize) -> Result<Steepness> {
    if m == 0 {
        return Err(Error::TooFewCategories(1));
    }
    let cap = 1.0 / (m as f64 + 1.0);
    if !(p >= 0.0 && p <= cap * (1.0 + 1e-12)) {
        return Err(Error::ParameterRange(format!(
            "p must lie in [0, 1/(m+1)] = [0, {cap}], got {p}"
        )));
    }
    if p == 0.0 {
        return Ok(Steepness::NoNoise);
    }
    Ok(Steepness::Finite((1.0 / p - m as f64).ln().max(0.0)))
}

/// Expected hamming error `max_d E[h(d, X_d)]`. Hamming and symmetric
/// mechanisms have the same error for every input, so the maximum is only
/// taken for the others.
pub fn expected_error(spec: &MechanismSpec, budget: &Budget) -> Result<f64> {
    let n = spec.n() as f64;
    let m = spec.space().m() as f64;
    match spec {
        MechanismSpec::Exponential(e) => match e.utility() {
            UtilityFunction::HammingScaled { k } => {
                // n / (1 + e^k / m), written to survive large k.
                let t = (-k).exp();
                Ok(n * m * t / (1.0 + m * t))
            }
            _ => exhaustive_error(spec, budget),
        },
        MechanismSpec::Product(p) => match p.symmetric_parameter() {
            Some(q) => Ok(n * q * m),
            None => {
                let mat = p.matrix();
                let worst = (0..mat.size())
                    .map(|i| 1.0 - mat.get(i, i))
                    .fold(0.0, f64::max);
                Ok(n * worst)
            }
        },
    }
}

fn exhaustive_error(spec: &MechanismSpec, budget: &Budget) -> Result<f64> {
    let universe: Universe = spec.universe();
    let size = budget.check_databases(universe)?;
    let worst = (0..size)
        .into_par_iter()
        .map(|d| {
            spec.log_pmf_row(d)
                .iter()
                .enumerate()
                .map(|(x, &lp)| lp.exp() * universe.hamming(d, x) as f64)
                .sum::<f64>()
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Range of expected hamming error for `(ε, δ)`-private sanitisation of
/// `n`-row databases over `m+1` categories.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds {
    /// `n (1-δ) / (1 + e^ε / m)`, attained by [`optimal_mechanism`].
    pub lower: f64,
    /// `n m / (m+1)`, the error of the uniform mechanism.
    pub upper: f64,
}

pub fn error_bounds(params: PrivacyParams, m: usize, n: usize) -> Result<ErrorBounds> {
    if m == 0 {
        return Err(Error::TooFewCategories(1));
    }
    let (m, n) = (m as f64, n as f64);
    Ok(ErrorBounds {
        lower: n * (1.0 - params.delta) / (1.0 + params.exp_epsilon() / m),
        upper: n * m / (m + 1.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub expected_error: f64,
    pub per_row_error: f64,
    pub bounds: ErrorBounds,
}

pub fn error_profile(
    spec: &MechanismSpec,
    params: PrivacyParams,
    budget: &Budget,
) -> Result<ErrorProfile> {
    let expected_error = expected_error(spec, budget)?;
    Ok(ErrorProfile {
        expected_error,
        per_row_error: expected_error / spec.n() as f64,
        bounds: error_bounds(params, spec.space().m(), spec.n())?,
    })
}

/// The least-error symmetric mechanism meeting `(ε, δ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalMechanism {
    pub matrix: SolutionMatrix,
    /// `(1-δ)/(e^ε + m)`.
    pub p: f64,
    /// `δ = 1`: the identity matrix, no noise at all.
    pub degenerate: bool,
}

pub fn optimal_mechanism(params: PrivacyParams, m: usize) -> Result<OptimalMechanism> {
    if m == 0 {
        return Err(Error::TooFewCategories(1));
    }
    let p = (1.0 - params.delta) / (params.exp_epsilon() + m as f64);
    Ok(OptimalMechanism {
        matrix: SolutionMatrix::symmetric(m + 1, p)?,
        p,
        degenerate: params.is_trivial(),
    })
}

/// Per-row worst-case error `max_d (1 - P[d][d])` of a matrix.
pub fn matrix_error(matrix: &SolutionMatrix) -> f64 {
    (0..matrix.size())
        .map(|i| 1.0 - matrix.get(i, i))
        .fold(0.0, f64::max)
}

/// Row-stochastic matrix with each row drawn from the flat Dirichlet
/// distribution (normalised standard exponentials).
pub fn random_stochastic_matrix<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Result<SolutionMatrix> {
    let rows = (0..size)
        .map(|_| {
            let draws: Vec<f64> = (0..size).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = draws.iter().sum();
            draws.into_iter().map(|x| x / total).collect()
        })
        .collect();
    SolutionMatrix::new(rows)
}

/// Random search for a private matrix with less error than the optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    /// Stop once this many private matrices have been found.
    pub target_accepted: usize,
    /// Hard cap on the number of matrices drawn.
    pub max_candidates: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub candidates: usize,
    pub accepted: usize,
    /// Smallest per-row error among accepted matrices.
    pub best_error: f64,
    /// Per-row error of [`optimal_mechanism`].
    pub optimal_error: f64,
    /// An accepted matrix beating the optimum by more than `1e-12`.
    pub counterexample: Option<SolutionMatrix>,
}

/// `(draws, accepted, best error, counterexample)` for one chunk.
type ChunkResult = (usize, usize, f64, Option<SolutionMatrix>);

const SEARCH_CHUNK: usize = 4096;
const CHUNKS_PER_ROUND: usize = 32;

/// Draw random stochastic matrices, keep the `(ε, δ)`-private ones and
/// compare their error with the optimal symmetric mechanism. Chunk `c` uses
/// ChaCha20 stream `c` under `seed`, so results do not depend on the thread
/// count.
pub fn search_feasible_matrices(
    params: PrivacyParams,
    m: usize,
    config: SearchConfig,
) -> Result<SearchOutcome> {
    let optimal = optimal_mechanism(params, m)?;
    let optimal_error = matrix_error(&optimal.matrix);
    let size = m + 1;
    let mut out = SearchOutcome {
        candidates: 0,
        accepted: 0,
        best_error: f64::INFINITY,
        optimal_error,
        counterexample: None,
    };
    let mut next_chunk: u64 = 0;
    while out.accepted < config.target_accepted && out.candidates < config.max_candidates {
        let remaining = config.max_candidates - out.candidates;
        let chunks = remaining.div_ceil(SEARCH_CHUNK).min(CHUNKS_PER_ROUND) as u64;
        let results: Vec<Result<ChunkResult>> = (next_chunk
            ..next_chunk + chunks)
            .into_par_iter()
            .map(|c| {
                let draws = SEARCH_CHUNK.min(remaining - (c - next_chunk) as usize * SEARCH_CHUNK);
                let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
                rng.set_stream(c);
                let (mut accepted, mut best, mut witness) = (0usize, f64::INFINITY, None);
                for _ in 0..draws {
                    let mat = random_stochastic_matrix(size, &mut rng)?;
                    if matrix_margin(&mat, params) < -MARGIN_TOLERANCE {
                        continue;
                    }
                    accepted += 1;
                    let err = matrix_error(&mat);
                    best = best.min(err);
                    if witness.is_none() && err < optimal_error - 1e-12 {
                        witness = Some(mat);
                    }
                }
                Ok((draws, accepted, best, witness))
            })
            .collect();
        for r in results {
            let (draws, accepted, best, witness) = r?;
            out.candidates += draws;
            out.accepted += accepted;
            out.best_error = out.best_error.min(best);
            if out.counterexample.is_none() {
                out.counterexample = witness;
            }
        }
        next_chunk += chunks;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{ExponentialSpec, ProductSpec};
    use crate::space::CategorySpace;
    use crate::verifier::verify_matrix;

    fn params(e: f64, d: f64) -> PrivacyParams {
        PrivacyParams::new(e, d).unwrap()
    }

    #[test]
    fn k_p_round_trip() {
        for m in 1..6 {
            for &k in &[0.0, 0.1, 1.0, 3.0, 20.0] {
                let p = p_from_k(k, m).unwrap();
                let back = k_from_p(p, m).unwrap().finite().unwrap();
                assert!((back - k).abs() < 1e-9 * k.max(1.0), "m={m} k={k} back={back}");
            }
        }
        assert_eq!(p_from_k(0.0, 2).unwrap(), 1.0 / 3.0);
        assert_eq!(p_from_k(f64::INFINITY, 2).unwrap(), 0.0);
        assert_eq!(k_from_p(0.0, 3).unwrap(), Steepness::NoNoise);
        assert!(k_from_p(0.6, 1).is_err());
        assert!(p_from_k(-1.0, 1).is_err());
    }

    #[test]
    fn steepness_serialisation() {
        assert_eq!(serde_json::to_string(&Steepness::NoNoise).unwrap(), "\"no-noise\"");
        assert_eq!(serde_json::to_string(&Steepness::Finite(1.5)).unwrap(), "1.5");
        let s: Steepness = serde_json::from_str("\"no-noise\"").unwrap();
        assert_eq!(s, Steepness::NoNoise);
        assert_eq!("2.5".parse::<Steepness>().unwrap(), Steepness::Finite(2.5));
        assert_eq!(Steepness::NoNoise.to_string(), "no-noise");
    }

    #[test]
    fn hamming_error_matches_exhaustive_sum() {
        let s = CategorySpace::indexed(2).unwrap();
        let spec = MechanismSpec::from(ExponentialSpec::hamming(s, 3, 0.9).unwrap());
        let closed = expected_error(&spec, &Budget::default()).unwrap();
        let brute = exhaustive_error(&spec, &Budget::default()).unwrap();
        assert!((closed - brute).abs() < 1e-12);
        assert!((closed - 3.0 / (1.0 + 0.9f64.exp() / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn product_error_forms() {
        let s = CategorySpace::indexed(3).unwrap();
        let sym = MechanismSpec::from(ProductSpec::symmetric(s.clone(), 4, 0.1).unwrap());
        assert!((expected_error(&sym, &Budget::default()).unwrap() - 4.0 * 0.1 * 3.0).abs() < 1e-12);
        let general = SolutionMatrix::new(vec![
            vec![0.9, 0.1, 0.0, 0.0],
            vec![0.0, 0.8, 0.2, 0.0],
            vec![0.0, 0.0, 0.7, 0.3],
            vec![0.05, 0.05, 0.0, 0.9],
        ])
        .unwrap();
        let spec = MechanismSpec::from(ProductSpec::new(s, 2, general).unwrap());
        let closed = expected_error(&spec, &Budget::default()).unwrap();
        assert!((closed - 0.6).abs() < 1e-12);
        let brute = exhaustive_error(&spec, &Budget::default()).unwrap();
        assert!((closed - brute).abs() < 1e-12);
    }

    #[test]
    fn optimal_mechanism_is_private_and_tight() {
        for &(e, d) in &[(0.5, 0.0), (1.0, 0.1), (2.0, 0.5)] {
            for m in 1..5 {
                let opt = optimal_mechanism(params(e, d), m).unwrap();
                let r = verify_matrix(&opt.matrix, params(e, d), &Budget::default()).unwrap();
                assert!(r.is_private());
                assert!(r.margin.abs() < 1e-12);
                let bounds = error_bounds(params(e, d), m, 1).unwrap();
                assert!((matrix_error(&opt.matrix) - bounds.lower).abs() < 1e-12);
            }
        }
        let opt = optimal_mechanism(params(1.0, 1.0), 2).unwrap();
        assert!(opt.degenerate);
        assert_eq!(opt.p, 0.0);
    }

    #[test]
    fn error_bounds_interval() {
        let b = error_bounds(params(1.0, 0.0), 2, 10).unwrap();
        assert!((b.upper - 20.0 / 3.0).abs() < 1e-12);
        assert!((b.lower - 10.0 / (1.0 + 1f64.exp() / 2.0)).abs() < 1e-12);
        assert!(b.lower <= b.upper);
        let b = error_bounds(params(0.0, 0.0), 3, 1).unwrap();
        assert!((b.lower - b.upper).abs() < 1e-12);
    }

    #[test]
    fn random_matrices_are_stochastic() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for size in 2..6 {
            let m = random_stochastic_matrix(size, &mut rng).unwrap();
            for i in 0..size {
                assert!((m.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn search_is_deterministic_and_finds_no_counterexample() {
        let cfg = SearchConfig {
            target_accepted: 500,
            max_candidates: 200_000,
            seed: 9,
        };
        let a = search_feasible_matrices(params(1.5, 0.1), 1, cfg).unwrap();
        let b = search_feasible_matrices(params(1.5, 0.1), 1, cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.accepted >= 500);
        assert!(a.counterexample.is_none());
        assert!(a.best_error >= a.optimal_error - 1e-12);
    }
}
