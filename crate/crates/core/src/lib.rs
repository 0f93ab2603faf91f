//! Differentially private sanitisation of categorical databases.
//!
//! A database is a vector of `n` rows over a finite category set `D` of
//! `m+1` labels. Sanitisers map a database to a random database in `D^n`:
//!
//! * the discrete exponential mechanism with a utility `u(d, d')`, and
//! * product sanitisation, which passes each row independently through a
//!   row-stochastic solution matrix.
//!
//! The [`verifier`] decides `(ε, δ)`-differential privacy of a mechanism by
//! checking only the sufficient sets `S_{d,d'}` of each ordered neighbour
//! pair, and ships a brute-force oracle over all subsets of `D^n` to test it
//! against. [`exact`] repeats both in rational arithmetic. [`analysis`]
//! covers the closed forms: the exponential/product equivalence, expected
//! hamming error and the optimal symmetric mechanism.

pub mod analysis;
pub mod error;
pub mod exact;
pub mod formats;
pub mod logspace;
pub mod mechanism;
pub mod space;
pub mod verifier;

pub use analysis::{
    error_bounds, error_profile, expected_error, k_from_p, optimal_mechanism, p_from_k,
    ErrorBounds, ErrorProfile, OptimalMechanism, Steepness,
};
pub use error::{Error, Result};
pub use exact::{verify_bruteforce_exact, verify_reduced_exact, ExactMechanism, ExactParams, ExactReport};
pub use mechanism::{
    make_symmetric_product, ExponentialSpec, Mechanism, MechanismSpec, Normalization, ProductSpec,
    SolutionMatrix, UtilityFunction, UtilityKind, UtilityTable,
};
pub use space::{
    enumerate_databases, enumerate_neighbor_pairs, hamming_distance, naive_check_count, Budget,
    CategorySpace, Database, DatabaseSet, NeighborPair, Universe,
};
pub use verifier::{
    dp_holds_on_set, exp_dp_condition, product_dp_condition, sufficient_set, verify_bruteforce,
    verify_matrix, verify_reduced, ConditionCheck, PrivacyParams, SufficientSet, Verdict,
    VerificationMethod, VerificationReport,
};
