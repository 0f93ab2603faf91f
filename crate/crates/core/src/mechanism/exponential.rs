use rand::Rng;

use super::product::ProductSpec;
use super::utility::UtilityFunction;
use super::{draw_index, Mechanism, Normalization};
use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;
use crate::space::{Budget, CategorySpace, Database, Universe};

/// The discrete exponential mechanism `P(X_d = d') = C_d^{-1} e^{u(d, d')}`
/// with `C_d = sum_{d'} e^{u(d, d')}`.
///
/// Normalisation is kept in log space. [`ExponentialSpec::log_partition`]
/// returns `ln C_d` (the sum); [`ExponentialSpec::exp_norm_constant`] returns
/// the prefactor `1 / C_d`, which for hamming utilities is the closed form
/// `(1 + m/e^k)^{-n}`.
#[derive(Clone, Debug)]
pub struct ExponentialSpec {
    space: CategorySpace,
    n: usize,
    utility: UtilityFunction,
    fixed_asserted: bool,
    budget: Budget,
}

impl ExponentialSpec {
    pub fn new(space: CategorySpace, n: usize, utility: UtilityFunction) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDatabase);
        }
        let universe = space.universe(n);
        match &utility {
            UtilityFunction::HammingScaled { k } => {
                UtilityFunction::hamming(*k)?;
            }
            UtilityFunction::NegativeL1 { scale } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(Error::ParameterRange(format!(
                        "l1 utility needs finite scale >= 0, got {scale}"
                    )));
                }
            }
            UtilityFunction::Table(t) => {
                if Some(t.size()) != universe.size() {
                    let size = universe.size().unwrap_or(usize::MAX);
                    return Err(Error::IncompleteUtility {
                        expected: size.saturating_mul(size),
                        found: t.size() * t.size(),
                    });
                }
            }
        }
        Ok(ExponentialSpec {
            space,
            n,
            utility,
            fixed_asserted: false,
            budget: Budget::default(),
        })
    }

    /// Hamming-scaled utility `u = -k h`.
    pub fn hamming(space: CategorySpace, n: usize, k: f64) -> Result<Self> {
        ExponentialSpec::new(space, n, UtilityFunction::hamming(k)?)
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    /// Declare that `C_d` is the same for every `d`. The verifier re-checks
    /// the claim before relying on it.
    pub fn assert_fixed_normalization(mut self) -> Self {
        self.fixed_asserted = true;
        self
    }

    pub fn utility(&self) -> &UtilityFunction {
        &self.utility
    }

    pub fn budget(&self) -> &Budget {
        &self.budget
    }

    pub fn fixed_normalization_asserted(&self) -> bool {
        self.fixed_asserted
    }

    /// `k` when the utility is hamming-scaled.
    pub fn hamming_k(&self) -> Option<f64> {
        match self.utility {
            UtilityFunction::HammingScaled { k } => Some(k),
            _ => None,
        }
    }

    fn check(&self, d: &Database) -> Result<()> {
        if d.n() != self.n {
            return Err(Error::LengthMismatch {
                left: d.n(),
                right: self.n,
            });
        }
        if let Some(&bad) = d.rows().iter().find(|&&r| r >= self.space.size()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                categories: self.space.size(),
            });
        }
        Ok(())
    }

    fn general_guard(&self) -> Result<()> {
        if self.hamming_k().is_none() {
            self.budget.check_databases(self.universe())?;
        }
        Ok(())
    }

    fn hamming_log_partition(&self, k: f64) -> f64 {
        // ln (1 + m e^{-k})^n
        self.n as f64 * (self.space.m() as f64 * (-k).exp()).ln_1p()
    }

    fn log_partition_index(&self, d: usize) -> f64 {
        match self.utility {
            UtilityFunction::HammingScaled { k } => self.hamming_log_partition(k),
            _ => log_sum_exp(&self.utility_row(d)),
        }
    }

    fn utility_row(&self, d: usize) -> Vec<f64> {
        let universe = self.universe();
        match &self.utility {
            UtilityFunction::Table(t) => t.row(d).to_vec(),
            u => (0..universe.size().unwrap_or(0))
                .map(|x| u.eval(universe, d, x))
                .collect(),
        }
    }

    /// `ln C_d` where `C_d = sum_{d'} e^{u(d, d')}`.
    pub fn log_partition(&self, d: &Database) -> Result<f64> {
        self.check(d)?;
        if let Some(k) = self.hamming_k() {
            return Ok(self.hamming_log_partition(k));
        }
        self.general_guard()?;
        Ok(self.log_partition_index(d.index_in(self.universe())))
    }

    /// The pmf prefactor `1 / C_d`.
    pub fn exp_norm_constant(&self, d: &Database) -> Result<f64> {
        Ok((-self.log_partition(d)?).exp())
    }

    /// `P(X_d = d')`.
    pub fn exp_pmf(&self, d: &Database, d_prime: &Database) -> Result<f64> {
        self.check(d)?;
        self.check(d_prime)?;
        if let Some(k) = self.hamming_k() {
            let h = crate::space::hamming_distance(d, d_prime)?;
            let u = if h == 0 { 0.0 } else { -k * h as f64 };
            return Ok((u - self.hamming_log_partition(k)).exp());
        }
        self.general_guard()?;
        let universe = self.universe();
        let (i, j) = (d.index_in(universe), d_prime.index_in(universe));
        let u = self.utility.eval(universe, i, j);
        Ok((u - self.log_partition_index(i)).exp())
    }

    /// Every `ln C_d`, in canonical order of `d`.
    pub fn log_partitions(&self) -> Result<Vec<f64>> {
        let size = self.budget.check_databases(self.universe())?;
        Ok((0..size).map(|d| self.log_partition_index(d)).collect())
    }

    /// Re-derive the fixed-normalisation claim: all `ln C_d` within `1e-9`.
    pub fn validate_fixed_normalization(&self) -> Result<()> {
        if self.hamming_k().is_some() {
            return Ok(());
        }
        let logs = self.log_partitions()?;
        let min = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max - min > 1e-9 * max.abs().max(1.0) {
            return Err(Error::NormalizationNotFixed { min, max });
        }
        Ok(())
    }

    /// The symmetric product mechanism with `p = 1/(e^k + m)` that has the
    /// same pmf, for hamming utilities.
    pub fn equivalent_product(&self) -> Option<ProductSpec> {
        let k = self.hamming_k()?;
        let p = crate::analysis::p_from_k(k, self.space.m()).ok()?;
        ProductSpec::symmetric(self.space.clone(), self.n, p).ok()
    }

    /// Draw `X_d`. Hamming utilities sample row-wise through the equivalent
    /// product mechanism; other utilities draw once from the enumerated pmf.
    pub fn sample<R: Rng + ?Sized>(&self, d: &Database, rng: &mut R) -> Result<Database> {
        self.check(d)?;
        if let Some(product) = self.equivalent_product() {
            return product.sample(d, rng);
        }
        self.budget
            .check_databases(self.universe())
            .map_err(|e| Error::UnsupportedAtScale(format!("general-utility sampling: {e}")))?;
        let i = d.index_in(self.universe());
        let probs: Vec<f64> = self.log_pmf_row(i).into_iter().map(f64::exp).collect();
        let out = draw_index(&probs, rng.random::<f64>());
        Ok(Database::from_rows_unchecked(self.universe().decode(out)))
    }
}

impl Mechanism for ExponentialSpec {
    fn space(&self) -> &CategorySpace {
        &self.space
    }

    fn n(&self) -> usize {
        self.n
    }

    fn log_pmf_row(&self, d: usize) -> Vec<f64> {
        let universe: Universe = self.universe();
        match self.utility {
            UtilityFunction::HammingScaled { k } => {
                let log_z = self.hamming_log_partition(k);
                (0..universe.size().unwrap_or(0))
                    .map(|x| {
                        let h = universe.hamming(d, x);
                        if h == 0 {
                            -log_z
                        } else {
                            -k * h as f64 - log_z
                        }
                    })
                    .collect()
            }
            _ => {
                let row = self.utility_row(d);
                let log_z = log_sum_exp(&row);
                row.into_iter().map(|u| u - log_z).collect()
            }
        }
    }

    fn normalization(&self) -> Normalization {
        match (&self.utility, self.fixed_asserted) {
            (UtilityFunction::HammingScaled { .. }, _) => Normalization::FixedHamming,
            (_, true) => Normalization::FixedAsserted,
            _ => Normalization::Varying,
        }
    }

    fn utility_gap(&self, d: usize, d_prime: usize, out: usize) -> Option<f64> {
        let universe = self.universe();
        Some(self.utility.eval(universe, d, out) - self.utility.eval(universe, d_prime, out))
    }

    fn validate_normalization(&self) -> Result<()> {
        if self.fixed_asserted {
            self.validate_fixed_normalization()
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{enumerate_databases, Budget};
    use rand::SeedableRng;

    fn space(m: usize) -> CategorySpace {
        CategorySpace::indexed(m).unwrap()
    }

    fn db(s: &CategorySpace, rows: &[usize]) -> Database {
        Database::new(s, rows.to_vec()).unwrap()
    }

    #[test]
    fn uniform_when_k_is_zero() {
        let spec = ExponentialSpec::hamming(space(2), 2, 0.0).unwrap();
        let d = db(spec.space(), &[0, 1]);
        for out in enumerate_databases(spec.space(), 2, &Budget::default()).unwrap() {
            assert!((spec.exp_pmf(&d, &out).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        }
        assert!((spec.exp_norm_constant(&d).unwrap() - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_prefactor_k_ln2() {
        let spec = ExponentialSpec::hamming(space(2), 2, 2f64.ln()).unwrap();
        let d = db(spec.space(), &[1, 1]);
        assert!((spec.exp_norm_constant(&d).unwrap() - 0.25).abs() < 1e-15);
        // Oracle: sum all nine terms e^{-k h} directly.
        let direct: f64 = enumerate_databases(spec.space(), 2, &Budget::default())
            .unwrap()
            .map(|x| {
                let h = crate::space::hamming_distance(&d, &x).unwrap() as f64;
                (-(2f64.ln()) * h).exp()
            })
            .sum();
        assert!((1.0 / direct - 0.25).abs() < 1e-15);
    }

    #[test]
    fn diagonal_mass_matches_closed_form() {
        for (m, n, k) in [(1, 1, 0.3), (2, 2, 1.0), (3, 2, 2.5), (4, 3, 0.7)] {
            let spec = ExponentialSpec::hamming(space(m), n, k).unwrap();
            let d = Database::new(spec.space(), vec![0; n]).unwrap();
            let expected = (1.0 + m as f64 * (-k).exp()).powi(-(n as i32));
            assert!((spec.exp_pmf(&d, &d).unwrap() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn l1_pmf_matches_brute_force_normalisation() {
        let spec = ExponentialSpec::new(space(2), 2, UtilityFunction::NegativeL1 { scale: 1.0 })
            .unwrap();
        let all: Vec<_> = enumerate_databases(spec.space(), 2, &Budget::default())
            .unwrap()
            .collect();
        let l1 = |a: &Database, b: &Database| -> f64 {
            a.rows()
                .iter()
                .zip(b.rows())
                .map(|(x, y)| (*x as f64 - *y as f64).abs())
                .sum()
        };
        for d in &all {
            let z: f64 = all.iter().map(|x| (-l1(d, x)).exp()).sum();
            for x in &all {
                let want = (-l1(d, x)).exp() / z;
                assert!((spec.exp_pmf(d, x).unwrap() - want).abs() < 1e-15);
            }
            assert!((spec.exp_norm_constant(d).unwrap() - 1.0 / z).abs() < 1e-15);
        }
        // C_(0,1) = (1 + e^-1 + e^-2)(1 + 2 e^-1)
        let d01 = db(spec.space(), &[0, 1]);
        let e1 = (-1f64).exp();
        let c = (1.0 + e1 + e1 * e1) * (1.0 + 2.0 * e1);
        assert!((spec.log_partition(&d01).unwrap() - c.ln()).abs() < 1e-14);
    }

    #[test]
    fn pmf_rows_normalise() {
        let cases = [
            ExponentialSpec::hamming(space(3), 2, 0.9).unwrap(),
            ExponentialSpec::new(space(2), 3, UtilityFunction::NegativeL1 { scale: 0.4 }).unwrap(),
        ];
        for spec in &cases {
            for d in 0..spec.universe().size().unwrap() {
                let s: f64 = spec.log_pmf_row(d).iter().map(|l| l.exp()).sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn large_k_does_not_underflow_in_log_space() {
        let spec = ExponentialSpec::hamming(space(4), 40, 50.0).unwrap();
        let d = Database::new(spec.space(), vec![0; 40]).unwrap();
        let mut far = vec![1; 40];
        far[0] = 0;
        let far = Database::new(spec.space(), far).unwrap();
        let lp = spec.log_partition(&d).unwrap();
        assert!(lp.is_finite() && lp > 0.0);
        assert!(spec.exp_pmf(&d, &far).unwrap() == 0.0);
        assert!((spec.exp_pmf(&d, &d).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn general_utilities_respect_budget() {
        let spec = ExponentialSpec::new(space(1), 12, UtilityFunction::NegativeL1 { scale: 1.0 })
            .unwrap()
            .with_budget(Budget {
                databases: 1024,
                subset_elements: 10,
            });
        let d = Database::new(spec.space(), vec![0; 12]).unwrap();
        assert!(matches!(
            spec.exp_pmf(&d, &d),
            Err(Error::EnumerationTooLarge { .. })
        ));
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        assert!(matches!(
            spec.sample(&d, &mut rng),
            Err(Error::UnsupportedAtScale(_))
        ));
    }

    #[test]
    fn fixed_normalisation_validation() {
        let l1 = ExponentialSpec::new(space(2), 2, UtilityFunction::NegativeL1 { scale: 1.0 })
            .unwrap()
            .assert_fixed_normalization();
        assert!(matches!(
            l1.validate_fixed_normalization(),
            Err(Error::NormalizationNotFixed { .. })
        ));
        let ham = ExponentialSpec::hamming(space(2), 2, 1.0).unwrap();
        assert!(ham.validate_fixed_normalization().is_ok());
    }

}
