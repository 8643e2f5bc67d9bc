//! Scalar abstraction for progress values and metrics.
//!
//! Everything that stores or combines progress is generic over [`Scalar`], so
//! the same engine runs on `f32`, `f64`, or exact [`Rational64`] arithmetic.
//! Exact scalars are what the deterministic oracle tests use: with
//! `Rational64` a `+0.01` per tick action reaches exactly `1` after 100 ticks.

use std::fmt::Debug;

use num_rational::Rational64;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Numeric type usable as a progress value.
pub trait Scalar:
    Num + Signed + PartialOrd + Copy + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Parses a plain decimal literal (`-?digits(.digits)?`).
    fn parse_decimal(text: &str) -> Option<Self>;

    /// Formats the value as a decimal literal accepted by [`Scalar::parse_decimal`].
    ///
    /// Exact for binary floats and for rationals whose denominator only has
    /// the prime factors 2 and 5; other rationals are rounded through `f64`.
    fn to_decimal(&self) -> String;

    fn from_f64_lossy(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(|| panic!("{value} is not representable"))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(value: usize) -> Self {
        Self::from_usize(value).unwrap_or_else(|| panic!("{value} is not representable"))
    }

    /// Clamps into the unit interval `[0, 1]`.
    fn clamp_unit(self) -> Self {
        if self < Self::zero() {
            Self::zero()
        } else if self > Self::one() {
            Self::one()
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

fn is_decimal_literal(text: &str) -> bool {
    let digits = text.strip_prefix('-').unwrap_or(text);
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

impl Scalar for f64 {
    fn parse_decimal(text: &str) -> Option<Self> {
        is_decimal_literal(text).then(|| text.parse().ok()).flatten()
    }

    fn to_decimal(&self) -> String {
        // Display for f64 is the shortest round-tripping form and never uses
        // exponent notation.
        let s = format!("{self}");
        if s.contains('.') {
            s
        } else {
            format!("{s}.0")
        }
    }
}

impl Scalar for f32 {
    fn parse_decimal(text: &str) -> Option<Self> {
        is_decimal_literal(text).then(|| text.parse().ok()).flatten()
    }

    fn to_decimal(&self) -> String {
        let s = format!("{self}");
        if s.contains('.') {
            s
        } else {
            format!("{s}.0")
        }
    }
}

impl Scalar for Rational64 {
    fn parse_decimal(text: &str) -> Option<Self> {
        if !is_decimal_literal(text) {
            return None;
        }
        let (negative, digits) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
        let scale = 10i64.checked_pow(u32::try_from(frac.len()).ok()?)?;
        let mantissa: i64 = format!("{int}{frac}").parse().ok()?;
        let value = Rational64::new(mantissa, scale);
        Some(if negative { -value } else { value })
    }

    fn to_decimal(&self) -> String {
        let mut denom = *self.denom();
        let mut twos = 0u32;
        let mut fives = 0u32;
        while denom % 2 == 0 {
            denom /= 2;
            twos += 1;
        }
        while denom % 5 == 0 {
            denom /= 5;
            fives += 1;
        }
        if denom != 1 {
            return self.to_f64_lossy().to_decimal();
        }
        let places = twos.max(fives);
        let Some(scaled) = 10i64
            .checked_pow(places)
            .and_then(|p| self.numer().checked_mul(p / self.denom()))
        else {
            return self.to_f64_lossy().to_decimal();
        };
        let sign = if scaled < 0 { "-" } else { "" };
        let magnitude = scaled.unsigned_abs();
        if places == 0 {
            return format!("{sign}{magnitude}.0");
        }
        let pow = 10u64.pow(places);
        format!(
            "{sign}{}.{:0width$}",
            magnitude / pow,
            magnitude % pow,
            width = places as usize
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals() {
        assert!(is_decimal_literal("0.5"));
        assert!(is_decimal_literal("-12"));
        assert!(!is_decimal_literal("1."));
        assert!(!is_decimal_literal(".5"));
        assert!(!is_decimal_literal("1e3"));
        assert!(!is_decimal_literal(""));
    }

    #[test]
    fn rational_decimal_is_exact() {
        let v = Rational64::parse_decimal("0.01").unwrap();
        assert_eq!(v, Rational64::new(1, 100));
        assert_eq!(v.to_decimal(), "0.01");
        assert_eq!(Rational64::new(-3, 8).to_decimal(), "-0.375");
        assert_eq!(Rational64::new(2, 1).to_decimal(), "2.0");
        assert_eq!(Rational64::parse_decimal("-1.25").unwrap(), Rational64::new(-5, 4));
    }

    #[test]
    fn float_decimal_round_trips() {
        for v in [0.0, 0.1, 1.0, 0.333_333_333_333_333_3, 1e-7, 12.5] {
            assert_eq!(f64::parse_decimal(&v.to_decimal()), Some(v));
        }
        assert_eq!(0.25f32.to_decimal(), "0.25");
    }

    #[test]
    fn clamp_unit_bounds() {
        assert_eq!((-0.2f64).clamp_unit(), 0.0);
        assert_eq!(1.7f64.clamp_unit(), 1.0);
        assert_eq!(Rational64::new(1, 3).clamp_unit(), Rational64::new(1, 3));
    }
}
