//! Scalar abstraction for the exact parts of the crate.
//!
//! Exit sums, the κ family of exponents and the divergence operator only need
//! ring operations and an order, so they run unchanged on `f64` and on exact
//! rationals. Sampling and simulation stay on `f64`.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A totally-ordered-enough number with ring operations.
pub trait Scalar: Clone + Debug + PartialOrd + Num + ToPrimitive + FromPrimitive + Send + Sync + 'static {
    fn count(v: u64) -> Self {
        Self::from_u64(v).expect("small integers are representable")
    }

    fn is_positive(&self) -> bool {
        *self > Self::zero()
    }
}

impl<T> Scalar for T where T: Clone + Debug + PartialOrd + Num + ToPrimitive + FromPrimitive + Send + Sync + 'static {}

pub(crate) fn sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

pub(crate) fn to_f64<T: Scalar>(v: &T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn count_matches_native() {
        assert_eq!(<f64 as Scalar>::count(7), 7.0);
        assert_eq!(<Rational64 as Scalar>::count(3), Rational64::from_integer(3));
        assert_eq!(sum(vec![Rational64::new(1, 3); 3]), Rational64::from_integer(1));
    }
}
