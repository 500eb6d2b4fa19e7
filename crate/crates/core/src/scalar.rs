//! Scalar types used for densities and thresholds.
//!
//! Densities are always ratios of exact counts, so every routine that
//! compares a density against a threshold is generic over [`Scalar`]. Use
//! `f64` for speed or [`Rational`](crate::Rational) when the comparison has to
//! be exact (e.g. `eps = 1/10` without binary rounding).

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::Num;

pub trait Scalar: Num + PartialOrd + Copy + Debug {
    /// Builds `num / den`. `den` must be nonzero.
    fn from_ratio(num: u128, den: u128) -> Self;

    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl Scalar for f32 {
    fn from_ratio(num: u128, den: u128) -> Self {
        (num as f64 / den as f64) as f32
    }
}

impl Scalar for f64 {
    fn from_ratio(num: u128, den: u128) -> Self {
        num as f64 / den as f64
    }
}

impl Scalar for Ratio<i128> {
    fn from_ratio(num: u128, den: u128) -> Self {
        let num = i128::try_from(num).expect("numerator exceeds i128");
        let den = i128::try_from(den).expect("denominator exceeds i128");
        Ratio::new(num, den)
    }
}
