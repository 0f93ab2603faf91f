//! Deciding `(ε, δ)`-differential privacy of an explicit mechanism.
//!
//! The reduced route only inspects the sufficient set `S_{d,d'}` of each
//! neighbour pair (all its subsets in general, its α-level cells when the
//! normalisation is fixed). The brute-force route checks every nonempty
//! proper subset of `D^n` and is the ground truth the reduced route is
//! tested against.
//!
//! Margins: each checked set `A` has slack `e^ε P(X_{d'} ∈ A) + δ - P(X_d ∈ A)`.
//! A report's `margin` is `min(δ, min slack)`, i.e. the empty set counts as a
//! baseline with slack `δ`. On every route this equals
//! `δ - Σ_x (P(X_d = x) - e^ε P(X_{d'} = x))⁺` minimised over pairs, so the
//! routes report the same number.

mod conditions;
mod report;
mod run;
mod sets;
mod subsets;

use serde::{Deserialize, Serialize};

pub(crate) use conditions::matrix_margin;
pub use conditions::{exp_dp_condition, product_dp_condition, verify_matrix, ConditionCheck};
pub use report::{Verdict, VerificationMethod, VerificationReport};
pub use run::{dp_holds_on_set, verify_bruteforce, verify_reduced, SetCheck};
pub use sets::{sufficient_set, SufficientSet};

use crate::error::{Error, Result};

/// Slack below `-MARGIN_TOLERANCE` counts as a violation.
pub const MARGIN_TOLERANCE: f64 = 1e-12;

/// Log-probability differences within this band are ties and stay out of
/// `S_{d,d'}`.
pub const TIE_BAND: f64 = 1e-12;

/// The `(ε, δ)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::ParameterRange(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::ParameterRange(format!(
                "delta must lie in [0, 1], got {delta}"
            )));
        }
        Ok(PrivacyParams { epsilon, delta })
    }

    /// Every mechanism is `(ε, 1)`-private.
    pub fn is_trivial(&self) -> bool {
        self.delta >= 1.0
    }

    pub fn exp_epsilon(&self) -> f64 {
        self.epsilon.exp()
    }
}
