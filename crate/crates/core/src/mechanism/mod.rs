//! Sanitisation mechanisms over `D^n`: the discrete exponential mechanism
//! and product sanitisation.

mod exponential;
mod product;
mod utility;

use rand::Rng;

pub use exponential::ExponentialSpec;
pub use product::{make_symmetric_product, ProductSpec, SolutionMatrix, ROW_SUM_TOLERANCE};
pub use utility::{UtilityFunction, UtilityKind, UtilityTable};

use crate::error::Result;
use crate::space::{CategorySpace, Database, Universe};

/// How the per-input normalisation behaves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Hamming-scaled exponential mechanism: `C_d = C` for every `d`.
    FixedHamming,
    /// Symmetric product mechanism: fixed by row-permutation symmetry.
    FixedSymmetric,
    /// Caller asserted `C_d = C`; must be validated before use.
    FixedAsserted,
    Varying,
}

impl Normalization {
    pub fn is_fixed(self) -> bool {
        !matches!(self, Normalization::Varying)
    }

    /// Fixed normalisation where every neighbour pair has a single
    /// utility-gap level.
    pub fn is_single_level(self) -> bool {
        matches!(
            self,
            Normalization::FixedHamming | Normalization::FixedSymmetric
        )
    }
}

/// A mechanism with an explicit pmf over `D^n`.
pub trait Mechanism: Send + Sync {
    fn space(&self) -> &CategorySpace;

    /// Number of database rows.
    fn n(&self) -> usize;

    fn universe(&self) -> Universe {
        self.space().universe(self.n())
    }

    /// `ln P(X_d = x)` for every `x`, in canonical order. `d` is a canonical
    /// index; callers enforce the enumeration budget.
    fn log_pmf_row(&self, d: usize) -> Vec<f64>;

    fn normalization(&self) -> Normalization;

    /// `u(d, x) - u(d', x)` when the mechanism has a utility form.
    fn utility_gap(&self, d: usize, d_prime: usize, out: usize) -> Option<f64>;

    /// Confirm an asserted fixed normalisation actually holds.
    fn validate_normalization(&self) -> Result<()> {
        Ok(())
    }
}

/// Either mechanism family.
#[derive(Clone, Debug)]
pub enum MechanismSpec {
    Exponential(ExponentialSpec),
    Product(ProductSpec),
}

impl MechanismSpec {
    pub fn sample<R: Rng + ?Sized>(&self, d: &Database, rng: &mut R) -> Result<Database> {
        match self {
            MechanismSpec::Exponential(e) => e.sample(d, rng),
            MechanismSpec::Product(p) => p.sample(d, rng),
        }
    }

    /// `P(X_d = d')`.
    pub fn pmf(&self, d: &Database, d_prime: &Database) -> Result<f64> {
        match self {
            MechanismSpec::Exponential(e) => e.exp_pmf(d, d_prime),
            MechanismSpec::Product(p) => p.product_pmf(d, d_prime),
        }
    }

    fn inner(&self) -> &dyn Mechanism {
        match self {
            MechanismSpec::Exponential(e) => e,
            MechanismSpec::Product(p) => p,
        }
    }
}

impl From<ExponentialSpec> for MechanismSpec {
    fn from(e: ExponentialSpec) -> Self {
        MechanismSpec::Exponential(e)
    }
}

impl From<ProductSpec> for MechanismSpec {
    fn from(p: ProductSpec) -> Self {
        MechanismSpec::Product(p)
    }
}

impl Mechanism for MechanismSpec {
    fn space(&self) -> &CategorySpace {
        self.inner().space()
    }

    fn n(&self) -> usize {
        self.inner().n()
    }

    fn log_pmf_row(&self, d: usize) -> Vec<f64> {
        self.inner().log_pmf_row(d)
    }

    fn normalization(&self) -> Normalization {
        self.inner().normalization()
    }

    fn utility_gap(&self, d: usize, d_prime: usize, out: usize) -> Option<f64> {
        self.inner().utility_gap(d, d_prime, out)
    }

    fn validate_normalization(&self) -> Result<()> {
        self.inner().validate_normalization()
    }
}

/// Inverse-CDF lookup of a uniform draw `u` in `[0, 1)`.
pub(crate) fn draw_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left the cumulative sum short of u: take the last
    // outcome with positive mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{enumerate_databases, Budget};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn draw_index_boundaries() {
        let probs = [0.25, 0.0, 0.75];
        assert_eq!(draw_index(&probs, 0.0), 0);
        assert_eq!(draw_index(&probs, 0.2499), 0);
        assert_eq!(draw_index(&probs, 0.25), 2);
        assert_eq!(draw_index(&probs, 0.9999999), 2);
        assert_eq!(draw_index(&[0.5, 0.5 - 1e-12, 0.0], 0.99999999999999), 1);
    }

    fn mean_hamming_error(spec: &MechanismSpec, d: &Database, draws: usize, seed: u64) -> f64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..draws)
            .map(|_| {
                let out = spec.sample(d, &mut rng).unwrap();
                crate::space::hamming_distance(d, &out).unwrap() as f64
            })
            .sum::<f64>()
            / draws as f64
    }

    #[test]
    fn hamming_sampler_mean_error() {
        // E[h] = n / (1 + e^k / m); per-draw variance of h is n q (1 - q)
        // with q = m / (e^k + m) since rows flip independently.
        let (m, n, k) = (3usize, 8usize, 1.2f64);
        let s = CategorySpace::indexed(m).unwrap();
        let spec = MechanismSpec::from(ExponentialSpec::hamming(s.clone(), n, k).unwrap());
        let d = Database::new(&s, vec![1; n]).unwrap();
        let draws = 20_000;
        let mean = mean_hamming_error(&spec, &d, draws, 11);
        let q = m as f64 / (k.exp() + m as f64);
        let expected = n as f64 / (1.0 + k.exp() / m as f64);
        let sigma = (n as f64 * q * (1.0 - q) / draws as f64).sqrt();
        assert!((mean - expected).abs() <= 3.0 * sigma, "mean {mean} vs {expected}");
    }

    #[test]
    fn general_sampler_matches_pmf() {
        // Inverse-CDF path: empirical frequencies against the exact pmf.
        let s = CategorySpace::indexed(2).unwrap();
        let spec = MechanismSpec::from(
            ExponentialSpec::new(s.clone(), 2, UtilityFunction::NegativeL1 { scale: 1.0 }).unwrap(),
        );
        let d = Database::new(&s, vec![0, 1]).unwrap();
        let draws = 40_000usize;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let u = spec.universe();
        let mut counts = [0usize; 9];
        for _ in 0..draws {
            counts[spec.sample(&d, &mut rng).unwrap().index_in(u)] += 1;
        }
        for x in enumerate_databases(&s, 2, &Budget::default()).unwrap() {
            let p = spec.pmf(&d, &x).unwrap();
            let f = counts[x.index_in(u)] as f64 / draws as f64;
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((f - p).abs() <= 4.0 * sigma, "{x}: {f} vs {p}");
        }
    }
}
