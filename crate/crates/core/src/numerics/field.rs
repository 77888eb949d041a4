use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::QSqrt2;

/// Arbitrary-precision rational number; the scalar behind every exact probability.
pub type Rational = BigRational;

/// An exactly ordered field. Implemented for [`Rational`] and [`QSqrt2`].
///
/// Every box, polytope and certificate in this crate is generic over it, so
/// the same code path runs on plain rationals and on values involving the
/// quantum CHSH value `(2+√2)/4`.
pub trait Field:
    Clone
    + Debug
    + Display
    + Eq
    + Hash
    + Ord
    + Send
    + Sync
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
    + From<Rational>
    + 'static
{
    fn as_f64(&self) -> f64;

    fn to_qsqrt2(&self) -> QSqrt2;

    /// `Some` when the value has no irrational part.
    fn as_rational(&self) -> Option<Rational>;

    /// `Some` when `q` lies in this field.
    fn from_qsqrt2(q: &QSqrt2) -> Option<Self>;

    fn from_int(i: i64) -> Self {
        Self::from(Rational::from_integer(BigInt::from(i)))
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from(rat(num, den))
    }

    fn from_bigint(i: BigInt) -> Self {
        Self::from(Rational::from_integer(i))
    }

    fn is_neg(&self) -> bool {
        *self < Self::zero()
    }

    fn is_pos(&self) -> bool {
        *self > Self::zero()
    }

    fn magnitude(&self) -> Self {
        if self.is_neg() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn powi(&self, mut exp: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= &base;
            }
            exp >>= 1;
            if exp > 0 {
                base = base.clone() * &base;
            }
        }
        acc
    }

    fn recip(&self) -> Self {
        Self::one() / self
    }
}

impl Field for Rational {
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn to_qsqrt2(&self) -> QSqrt2 {
        QSqrt2::from(self.clone())
    }

    fn as_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }

    fn from_qsqrt2(q: &QSqrt2) -> Option<Self> {
        q.as_rational()
    }

    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }

    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }

    fn magnitude(&self) -> Self {
        Signed::abs(self)
    }
}

/// `num/den` as a reduced rational. Panics on a zero denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(i: i64) -> Rational {
    Rational::from_integer(BigInt::from(i))
}

/// Renders a rational as `num/den`, always with an explicit denominator.
pub fn fraction_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `num/den` or a bare integer.
pub fn parse_fraction(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rational::new(n, d))
        }
        None => s.parse::<BigInt>().ok().map(Rational::from_integer),
    }
}

/// Closest rational with denominator `den` to a float; used to build seeded corpora.
pub fn rational_grid_point(x: f64, den: i64) -> Rational {
    rat((x * den as f64).round() as i64, den)
}

pub fn sum<F: Field>(values: impl IntoIterator<Item = F>) -> F {
    values.into_iter().fold(F::zero(), |acc, v| acc + &v)
}

pub fn sum_ref<'a, F: Field>(values: impl IntoIterator<Item = &'a F>) -> F {
    values.into_iter().fold(F::zero(), |acc, v| acc + v)
}

/// Exact maximum; `None` on an empty iterator.
pub fn max_of<F: Field>(values: impl IntoIterator<Item = F>) -> Option<F> {
    values.into_iter().max()
}
