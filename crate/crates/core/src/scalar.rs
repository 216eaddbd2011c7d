//! Scalar types for the ratio-valued outputs (utilization, speedups, EDAP proxy).
//!
//! Cycle and window counts are integers everywhere. Only ratios go through [`Scalar`],
//! so a report can be produced in `f32`, `f64`, or exactly as a reduced fraction.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

pub trait Scalar: Num + Copy + PartialOrd + Debug {
    fn from_ratio(num: u128, den: u128) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_ratio(num: u128, den: u128) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_ratio(num: u128, den: u128) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for Ratio<u128> {
    fn from_ratio(num: u128, den: u128) -> Self {
        Ratio::new(num, den)
    }

    fn to_f64(self) -> f64 {
        self.numer().to_f64().unwrap_or(f64::NAN) / self.denom().to_f64().unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_ratio_reduces() {
        let r = <Ratio<u128> as Scalar>::from_ratio(128, 116);
        assert_eq!(*r.numer(), 32);
        assert_eq!(*r.denom(), 29);
        assert!((r.to_f64() - 128.0 / 116.0).abs() < 1e-12);
    }

    #[test]
    fn float_impls_agree() {
        let a = <f64 as Scalar>::from_ratio(3, 4);
        let b = <f32 as Scalar>::from_ratio(3, 4);
        assert_eq!(a, 0.75);
        assert_eq!(b, 0.75);
    }
}
