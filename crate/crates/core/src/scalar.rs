use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar accepted by the numeric routines: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` constants.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant representable")
    }

    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("count representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Natural log of the sum of exponentials, stable against overflow and
/// underflow. Returns `-inf` for an empty slice or all `-inf` terms.
pub fn log_sum_exp<T: Scalar>(terms: &[T]) -> T {
    let max = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    let sum: T = terms.iter().map(|&t| (t - max).exp()).sum();
    max + sum.ln()
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub struct LogSumAcc<T> {
    max: T,
    scaled: T,
}

impl<T: Scalar> Default for LogSumAcc<T> {
    fn default() -> Self {
        Self {
            max: T::neg_infinity(),
            scaled: T::zero(),
        }
    }
}

impl<T: Scalar> LogSumAcc<T> {
    pub fn push(&mut self, term: T) {
        if term == T::neg_infinity() {
            return;
        }
        if term <= self.max {
            self.scaled = self.scaled + (term - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - term).exp() + T::one();
            self.max = term;
        }
    }

    pub fn value(&self) -> T {
        if self.max == T::neg_infinity() {
            T::neg_infinity()
        } else {
            self.max + self.scaled.ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let terms = [-1.0f64, 0.5, 2.0, -30.0];
        let direct: f64 = terms.iter().map(|t| t.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&terms) - direct).abs() < 1e-14);
        let mut acc = LogSumAcc::default();
        terms.iter().for_each(|&t| acc.push(t));
        assert!((acc.value() - direct).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_survives_underflow() {
        let terms = [-2000.0f64, -2001.0];
        let expected = -2000.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((log_sum_exp(&terms) - expected).abs() < 1e-12);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
    }
}
