//! Numeric abstractions shared by the numeric modules.
//!
//! Feature vectors, distances and the classifiers are generic over
//! [`Scalar`], which `f32` and `f64` both satisfy. Quantities that are
//! compared against decision thresholds (agreement scores, currency) use the
//! exact [`Fraction`] type so that boundary cases such as `3/5 - 1/2 >= 1/10`
//! hold exactly.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Floating point type usable as a feature value.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 converts to every float scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float scalar converts to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}

/// Exact rational number.
pub type Fraction = Ratio<i64>;

/// Parses a plain decimal literal (`"0.1"`, `"6"`, `"-2.50"`) into an exact fraction.
pub fn parse_decimal(text: &str) -> Result<Fraction> {
    let bad = || Error::InvalidArgument(format!("not a decimal number: {text:?}"));
    let text = text.trim();
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if frac_part.len() > 15 {
        return Err(bad());
    }
    let scale = 10i64.pow(frac_part.len() as u32);
    let whole: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
    let frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
    let numer = whole
        .checked_mul(scale)
        .and_then(|w| w.checked_add(frac))
        .ok_or_else(bad)?;
    Ok(Fraction::new(if negative { -numer } else { numer }, scale))
}

/// Converts a float that was written as a short decimal (e.g. a TOML value)
/// into the fraction it denotes, using the shortest round-trip representation.
pub fn fraction_from_f64(value: f64) -> Result<Fraction> {
    if !value.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite value {value}")));
    }
    parse_decimal(&format!("{value}"))
}

pub fn fraction_to_f64(value: Fraction) -> f64 {
    *value.numer() as f64 / *value.denom() as f64
}

/// Serde adapter storing a [`Fraction`] as a decimal float in documents.
pub mod fraction_as_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{fraction_from_f64, fraction_to_f64, Fraction};

    pub fn serialize<S: Serializer>(value: &Fraction, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(fraction_to_f64(*value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Fraction, D::Error> {
        let raw = f64::deserialize(deserializer)?;
        fraction_from_f64(raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_parse_exactly() {
        assert_eq!(parse_decimal("0.1").unwrap(), Fraction::new(1, 10));
        assert_eq!(parse_decimal("0.02").unwrap(), Fraction::new(1, 50));
        assert_eq!(parse_decimal("6").unwrap(), Fraction::from_integer(6));
        assert_eq!(parse_decimal("-2.50").unwrap(), Fraction::new(-5, 2));
        assert_eq!(parse_decimal(".5").unwrap(), Fraction::new(1, 2));
        assert!(parse_decimal("").is_err());
        assert!(parse_decimal("1e3").is_err());
        assert!(parse_decimal("0.1.2").is_err());
    }

    #[test]
    fn float_round_trip_uses_shortest_decimal() {
        assert_eq!(fraction_from_f64(0.3).unwrap(), Fraction::new(3, 10));
        assert_eq!(fraction_from_f64(0.01).unwrap(), Fraction::new(1, 100));
        assert!(fraction_from_f64(f64::NAN).is_err());
    }

    #[test]
    fn scalar_conversions() {
        assert_eq!(<f32 as Scalar>::of(0.5), 0.5f32);
        assert_eq!(Scalar::as_f64(0.25f32), 0.25);
    }
}
