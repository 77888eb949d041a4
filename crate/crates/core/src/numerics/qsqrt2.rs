//! Exact arithmetic in the quadratic field ℚ(√2).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::field::{fraction_string, rat, Field, Rational};

/// `a + b·√2` with rational `a`, `b`.
///
/// The representation is unique (√2 is irrational), so structural equality is
/// numeric equality. Ordering is exact: the sign of `a + b√2` is decided from
/// the signs of `a`, `b` and, when they disagree, by comparing `a²` with `2b²`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct QSqrt2 {
    a: Rational,
    b: Rational,
}

impl QSqrt2 {
    pub fn new(a: Rational, b: Rational) -> Self {
        Self { a, b }
    }

    /// The rational part `a`.
    pub fn rational_part(&self) -> &Rational {
        &self.a
    }

    /// The coefficient `b` of √2.
    pub fn sqrt2_part(&self) -> &Rational {
        &self.b
    }

    pub fn sqrt2() -> Self {
        Self::new(Rational::zero(), Rational::one())
    }

    /// Quantum value of the CHSH game, `w = (2+√2)/4`.
    pub fn chsh_value() -> Self {
        Self::new(rat(1, 2), rat(1, 4))
    }

    /// `1 - w = (2-√2)/4`.
    pub fn chsh_value_complement() -> Self {
        Self::new(rat(1, 2), rat(-1, 4))
    }

    /// Galois conjugate `a - b√2`.
    pub fn conjugate(&self) -> Self {
        Self::new(self.a.clone(), -self.b.clone())
    }

    /// Field norm `a² - 2b²`.
    pub fn norm(&self) -> Rational {
        &self.a * &self.a - int2() * &self.b * &self.b
    }

    pub fn signum(&self) -> Ordering {
        let sa = self.a.cmp(&Rational::zero());
        let sb = self.b.cmp(&Rational::zero());
        match (sa, sb) {
            (s, Ordering::Equal) => s,
            (Ordering::Equal, s) => s,
            (x, y) if x == y => x,
            (sa, sb) => {
                let a2 = &self.a * &self.a;
                let b2 = int2() * &self.b * &self.b;
                if a2 > b2 {
                    sa
                } else {
                    sb
                }
            }
        }
    }

    /// Renders `a` or `a+b*sqrt2` with fraction strings.
    pub fn to_exact_string(&self) -> String {
        if self.b.is_zero() {
            fraction_string(&self.a)
        } else if self.b.is_negative() {
            format!(
                "{}-{}*sqrt2",
                fraction_string(&self.a),
                fraction_string(&-self.b.clone())
            )
        } else {
            format!(
                "{}+{}*sqrt2",
                fraction_string(&self.a),
                fraction_string(&self.b)
            )
        }
    }

    fn mul_ref(&self, rhs: &Self) -> Self {
        if self.b.is_zero() && rhs.b.is_zero() {
            return Self::new(&self.a * &rhs.a, Rational::zero());
        }
        if rhs.b.is_zero() {
            return Self::new(&self.a * &rhs.a, &self.b * &rhs.a);
        }
        if self.b.is_zero() {
            return Self::new(&self.a * &rhs.a, &self.a * &rhs.b);
        }
        Self::new(
            &self.a * &rhs.a + int2() * &self.b * &rhs.b,
            &self.a * &rhs.b + &self.b * &rhs.a,
        )
    }

    fn div_ref(&self, rhs: &Self) -> Self {
        assert!(!rhs.is_zero(), "division by zero in Q(sqrt2)");
        if rhs.b.is_zero() {
            return Self::new(&self.a / &rhs.a, &self.b / &rhs.a);
        }
        let n = rhs.norm();
        let num = self.mul_ref(&rhs.conjugate());
        Self::new(num.a / &n, num.b / &n)
    }
}

fn int2() -> Rational {
    Rational::from_integer(BigInt::from(2))
}

/// √2 to 192 fractional bits, used only for float conversion.
fn sqrt2_approx() -> &'static Rational {
    static APPROX: OnceLock<Rational> = OnceLock::new();
    APPROX.get_or_init(|| {
        let scale = BigInt::one() << 192usize;
        let root = (BigInt::from(2) * &scale * &scale).sqrt();
        Rational::new(root, scale)
    })
}

impl From<Rational> for QSqrt2 {
    fn from(a: Rational) -> Self {
        Self::new(a, Rational::zero())
    }
}

impl PartialOrd for QSqrt2 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QSqrt2 {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.b == other.b {
            return self.a.cmp(&other.a);
        }
        (self.clone() - other).signum()
    }
}

impl Zero for QSqrt2 {
    fn zero() -> Self {
        Self::new(Rational::zero(), Rational::zero())
    }

    fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
}

impl One for QSqrt2 {
    fn one() -> Self {
        Self::new(Rational::one(), Rational::zero())
    }
}

impl Neg for QSqrt2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.a, -self.b)
    }
}

impl<'a> Add<&'a QSqrt2> for QSqrt2 {
    type Output = Self;
    fn add(mut self, rhs: &'a QSqrt2) -> Self {
        self += rhs;
        self
    }
}

impl<'a> Sub<&'a QSqrt2> for QSqrt2 {
    type Output = Self;
    fn sub(mut self, rhs: &'a QSqrt2) -> Self {
        self -= rhs;
        self
    }
}

impl<'a> Mul<&'a QSqrt2> for QSqrt2 {
    type Output = Self;
    fn mul(self, rhs: &'a QSqrt2) -> Self {
        self.mul_ref(rhs)
    }
}

impl<'a> Div<&'a QSqrt2> for QSqrt2 {
    type Output = Self;
    fn div(self, rhs: &'a QSqrt2) -> Self {
        self.div_ref(rhs)
    }
}

impl Add for QSqrt2 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self + &rhs
    }
}

impl Sub for QSqrt2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self - &rhs
    }
}

impl Mul for QSqrt2 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.mul_ref(&rhs)
    }
}

impl Div for QSqrt2 {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        self.div_ref(&rhs)
    }
}

impl<'a> AddAssign<&'a QSqrt2> for QSqrt2 {
    fn add_assign(&mut self, rhs: &'a QSqrt2) {
        self.a += &rhs.a;
        if !rhs.b.is_zero() {
            self.b += &rhs.b;
        }
    }
}

impl<'a> SubAssign<&'a QSqrt2> for QSqrt2 {
    fn sub_assign(&mut self, rhs: &'a QSqrt2) {
        self.a -= &rhs.a;
        if !rhs.b.is_zero() {
            self.b -= &rhs.b;
        }
    }
}

impl<'a> MulAssign<&'a QSqrt2> for QSqrt2 {
    fn mul_assign(&mut self, rhs: &'a QSqrt2) {
        *self = self.mul_ref(rhs);
    }
}

impl fmt::Display for QSqrt2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_exact_string())
    }
}

impl fmt::Debug for QSqrt2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QSqrt2({})", self.to_exact_string())
    }
}

impl Field for QSqrt2 {
    fn as_f64(&self) -> f64 {
        if self.b.is_zero() {
            return self.a.to_f64().unwrap_or(f64::NAN);
        }
        let approx = &self.a + &self.b * sqrt2_approx();
        approx.to_f64().unwrap_or(f64::NAN)
    }

    fn to_qsqrt2(&self) -> QSqrt2 {
        self.clone()
    }

    fn as_rational(&self) -> Option<Rational> {
        self.b.is_zero().then(|| self.a.clone())
    }

    fn from_qsqrt2(q: &QSqrt2) -> Option<Self> {
        Some(q.clone())
    }

    fn is_neg(&self) -> bool {
        self.signum() == Ordering::Less
    }

    fn is_pos(&self) -> bool {
        self.signum() == Ordering::Greater
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: (i64, i64), b: (i64, i64)) -> QSqrt2 {
        QSqrt2::new(rat(a.0, a.1), rat(b.0, b.1))
    }

    #[test]
    fn chsh_value_squared() {
        let w = QSqrt2::chsh_value();
        // w^2 = (6 + 4√2)/16
        assert_eq!(w.clone() * &w, q((3, 8), (1, 4)));
        assert_eq!(w.clone() + &QSqrt2::chsh_value_complement(), QSqrt2::one());
        assert!((w.as_f64() - 0.853_553_390_593_273_7).abs() < 1e-15);
    }

    #[test]
    fn division_inverts_multiplication() {
        let x = q((3, 7), (-2, 5));
        let y = q((-1, 3), (4, 9));
        assert_eq!((x.clone() * &y) / &y, x);
        assert_eq!(y.clone() / &y, QSqrt2::one());
    }

    #[test]
    fn sign_cases() {
        assert!(q((1, 1), (0, 1)).is_pos());
        assert!(q((-3, 2), (1, 1)).is_neg()); // -1.5 + 1.414
        assert!(q((3, 2), (-1, 1)).is_pos()); // 1.5 - 1.414
        assert!(q((-1, 1), (1, 1)).is_pos());
        assert!(q((0, 1), (-1, 3)).is_neg());
        assert_eq!(QSqrt2::zero().signum(), Ordering::Equal);
        assert!(QSqrt2::chsh_value() > QSqrt2::from(rat(853, 1000)));
        assert!(QSqrt2::chsh_value() < QSqrt2::from(rat(854, 1000)));
    }

    #[test]
    fn exact_string() {
        assert_eq!(q((1, 2), (1, 4)).to_exact_string(), "1/2+1/4*sqrt2");
        assert_eq!(q((1, 2), (-1, 4)).to_exact_string(), "1/2-1/4*sqrt2");
        assert_eq!(q((1, 2), (0, 1)).to_exact_string(), "1/2");
    }
}
