use std::fmt::Write as _;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::space::{CategorySpace, Database, DatabaseSet, NeighborPair};

use super::PrivacyParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Private,
    NotPrivate,
}

/// Which route produced a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerificationMethod {
    /// Decided without enumerating sets (`δ = 1`, closed-form conditions).
    ClosedForm,
    /// Every nonempty subset of each `S_{d,d'}`.
    SufficientSet,
    /// Only the α-level cells of each `S_{d,d'}` (fixed normalisation).
    Partition,
    /// Every nonempty proper subset of `D^n`.
    BruteForce,
}

impl VerificationMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            VerificationMethod::ClosedForm => "closed-form",
            VerificationMethod::SufficientSet => "sufficient-set",
            VerificationMethod::Partition => "partition",
            VerificationMethod::BruteForce => "brute-force",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub verdict: Verdict,
    pub method: VerificationMethod,
    pub params: PrivacyParams,
    /// Pair and set attaining the smallest slack among the checked sets.
    pub binding_pair: Option<NeighborPair>,
    pub binding_set: Option<DatabaseSet>,
    /// `min(δ, smallest slack)`; negative iff the mechanism is not private
    /// (up to the margin tolerance).
    pub margin: f64,
    pub checks_performed: BigUint,
    /// `n m (m+1)^n (2^{(m+1)^n} - 2)`; `None` when `D^n` exceeds the
    /// enumeration budget.
    pub checks_naive: Option<BigUint>,
}

fn labels(space: &CategorySpace, db: &Database) -> Vec<String> {
    db.labels(space).into_iter().map(str::to_owned).collect()
}

impl VerificationReport {
    pub fn is_private(&self) -> bool {
        self.verdict == Verdict::Private
    }

    /// JSON form with databases rendered as label lists and counts as
    /// decimal strings.
    pub fn to_json(&self, space: &CategorySpace) -> Value {
        let pair = self.binding_pair.as_ref().map(|p| {
            json!({
                "d": labels(space, &p.d),
                "d_prime": labels(space, &p.d_prime),
                "differing_row": p.differing_row,
            })
        });
        let set = self.binding_set.as_ref().map(|s| {
            s.databases()
                .map(|db| labels(space, &db))
                .collect::<Vec<_>>()
        });
        json!({
            "verdict": self.verdict,
            "private": self.is_private(),
            "method": self.method,
            "epsilon": self.params.epsilon,
            "delta": self.params.delta,
            "margin": self.margin,
            "checks_performed": self.checks_performed.to_string(),
            "checks_naive": self.checks_naive.as_ref().map(|c| c.to_string()),
            "binding_pair": pair,
            "binding_set": set,
        })
    }

    pub fn to_table(&self, space: &CategorySpace) -> String {
        let mut out = String::new();
        let verdict = if self.is_private() { "private" } else { "not private" };
        let _ = writeln!(out, "verdict           {verdict}");
        let _ = writeln!(out, "method            {}", self.method.as_str());
        let _ = writeln!(out, "epsilon           {}", self.params.epsilon);
        let _ = writeln!(out, "delta             {}", self.params.delta);
        let _ = writeln!(out, "margin            {:e}", self.margin);
        let _ = writeln!(out, "checks performed  {}", self.checks_performed);
        if let Some(naive) = &self.checks_naive {
            let _ = writeln!(out, "checks naive      {naive}");
        }
        if let Some(p) = &self.binding_pair {
            let _ = writeln!(
                out,
                "binding pair      ({}) vs ({})",
                labels(space, &p.d).join(","),
                labels(space, &p.d_prime).join(",")
            );
        }
        if let Some(s) = &self.binding_set {
            let members: Vec<String> = s
                .databases()
                .map(|db| format!("({})", labels(space, &db).join(",")))
                .collect();
            let _ = writeln!(out, "binding set       {{{}}}", members.join(" "));
        }
        out
    }
}
