//! Fixtures shared by the criterion benches.

use catdp::{CategorySpace, ExponentialSpec, ProductSpec, UtilityFunction};

/// Negative-L1 exponential mechanism over labels `0..=m`.
pub fn l1_spec(m: usize, n: usize) -> ExponentialSpec {
    let space = CategorySpace::indexed(m).expect("m >= 1");
    ExponentialSpec::new(space, n, UtilityFunction::NegativeL1 { scale: 1.0 }).expect("valid spec")
}

pub fn hamming_spec(m: usize, n: usize, k: f64) -> ExponentialSpec {
    ExponentialSpec::hamming(CategorySpace::indexed(m).expect("m >= 1"), n, k).expect("valid spec")
}

pub fn symmetric_spec(m: usize, n: usize, p: f64) -> ProductSpec {
    ProductSpec::symmetric(CategorySpace::indexed(m).expect("m >= 1"), n, p).expect("valid spec")
}
