//! Scalar abstraction over probability values.
//!
//! All numeric machinery (tables, q parameters, the Möbius transforms, the
//! oracle) is generic over [`Scalar`] so the same code runs in `f64` (the
//! default), `f32`, or exact rational arithmetic. The exact mode exists to
//! separate algorithmic error from floating-point error when a tolerance
//! check fails.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, Zero};
use rand::Rng;
use std::fmt::{Debug, Display};
use std::ops::Neg;

pub trait Scalar:
    Num + Neg<Output = Self> + Clone + PartialOrd + Debug + Display + Send + Sync + 'static
{
    /// Exact value `num / den`.
    fn from_ratio(num: i64, den: i64) -> Self;

    fn to_f64(&self) -> f64;

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Magnitudes at or below this are treated as arithmetic noise
    /// (zero for exact types).
    fn noise_floor() -> Self;

    /// True for arithmetic with no rounding error.
    fn is_exact() -> bool {
        false
    }

    /// Uniform draw in `[lo/100, hi/100]`. Exact types draw thousandths so
    /// the results stay small ratios.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R, lo: u32, hi: u32) -> Self;

    /// Parses a value from parameter files; accepts plain decimals, and
    /// exact types additionally accept `a/b`.
    fn parse_value(s: &str) -> Option<Self>;
}

/// Exact decimal like `0.1875` as (numerator, denominator).
fn decimal_to_ratio(s: &str) -> Option<(i64, i64)> {
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1, s),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: i64 = digits.parse().ok()?;
    let den = 10i64.checked_pow(frac_part.len() as u32)?;
    Some((sign * num, den))
}

impl Scalar for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn noise_floor() -> Self {
        1e-12
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R, lo: u32, hi: u32) -> Self {
        rng.gen_range(lo as f64 / 100.0..=hi as f64 / 100.0)
    }

    fn parse_value(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Scalar for f32 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f32 / den as f32
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }

    fn noise_floor() -> Self {
        1e-5
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R, lo: u32, hi: u32) -> Self {
        rng.gen_range(lo as f32 / 100.0..=hi as f32 / 100.0)
    }

    fn parse_value(s: &str) -> Option<Self> {
        s.parse().ok()
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        // Good enough for diagnostics; exact comparisons never go through here.
        let num = self.numer();
        let den = self.denom();
        match (num.to_string().parse::<f64>(), den.to_string().parse::<f64>()) {
            (Ok(n), Ok(d)) if d != 0.0 => n / d,
            _ => f64::NAN,
        }
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn noise_floor() -> Self {
        BigRational::zero()
    }

    fn is_exact() -> bool {
        true
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R, lo: u32, hi: u32) -> Self {
        let k = rng.gen_range(lo * 10..=hi * 10);
        BigRational::new(BigInt::from(k), BigInt::from(1000))
    }

    fn parse_value(s: &str) -> Option<Self> {
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d == BigInt::from(0) {
                return None;
            }
            return Some(BigRational::new(n, d));
        }
        let (n, d) = decimal_to_ratio(s.trim())?;
        Some(BigRational::from_ratio(n, d))
    }
}

/// `|a - b| <= tol` with the scalar's own arithmetic.
pub fn close<T: Scalar>(a: &T, b: &T, tol: &T) -> bool {
    (a.clone() - b.clone()).abs() <= *tol
}

/// Sum of a slice (no `Sum` bound on the trait).
pub fn total<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, x| acc + x.clone())
}

/// Checks `x` sums to one within `n * noise_floor` (exact equality for
/// exact scalars).
pub fn is_normalized<T: Scalar>(xs: &[T]) -> bool {
    let tol = T::noise_floor() * T::from_ratio(xs.len().max(4) as i64, 1);
    close(&total(xs), &T::one(), &tol)
}
