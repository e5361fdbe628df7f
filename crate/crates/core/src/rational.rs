//! Exact arithmetic helpers on top of `BigRational`.
//!
//! Every quantity in the analysis (bits, bits/second, seconds) is carried as an
//! arbitrary-precision rational so that reported bounds are exact.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

pub use num_rational::BigRational as Rational;

/// Picoseconds per second.
pub const PS_PER_SECOND: i64 = 1_000_000_000_000;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Seconds from an integer number of picoseconds.
pub fn from_ps(ps: i64) -> Rational {
    ratio(ps, PS_PER_SECOND)
}

pub fn from_us(us: i64) -> Rational {
    ratio(us, 1_000_000)
}

/// Converts seconds to picoseconds, failing if the value is not integral.
pub fn to_ps_exact(seconds: &Rational) -> Option<i64> {
    let ps = seconds * int(PS_PER_SECOND);
    if ps.is_integer() {
        ps.to_integer().to_i64()
    } else {
        None
    }
}

pub fn max(a: Rational, b: Rational) -> Rational {
    if a >= b {
        a
    } else {
        b
    }
}

pub fn min(a: Rational, b: Rational) -> Rational {
    if a <= b {
        a
    } else {
        b
    }
}

/// Positive part `[x]^+`.
pub fn pos(x: Rational) -> Rational {
    if x.is_negative() {
        Rational::zero()
    } else {
        x
    }
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Decimal rendering with up to `digits` fractional digits; exact values print
/// without trailing zeros, inexact ones end in `...`.
pub fn to_decimal(x: &Rational, digits: usize) -> String {
    let neg = x.is_negative();
    let a = x.abs();
    let (whole, frac) = a.numer().div_rem(a.denom());
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&whole.to_string());
    if frac.is_zero() {
        return out;
    }
    out.push('.');
    let ten = BigInt::from(10);
    let mut rem = frac;
    let mut written = 0;
    while !rem.is_zero() && written < digits {
        rem *= &ten;
        let (d, r) = rem.div_rem(a.denom());
        out.push_str(&d.to_string());
        rem = r;
        written += 1;
    }
    if !rem.is_zero() {
        out.push_str("...");
    }
    out
}

/// Parses `"123"`, `"-7/2"` or `"1.25"`.
pub fn parse(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((w, f)) = s.split_once('.') {
        if f.is_empty() || !f.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let neg = w.starts_with('-');
        let digits: BigInt = format!("{}{}", w.trim_start_matches('-'), f).parse().ok()?;
        let den = num_traits::pow(BigInt::from(10), f.len());
        let v = Rational::new(digits, den);
        return Some(if neg { -v } else { v });
    }
    s.parse::<BigInt>().ok().map(Rational::from_integer)
}

/// Wrapper giving a `Rational` the `{"num", "den", "decimal"}` JSON shape.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub Rational);

impl From<Rational> for Exact {
    fn from(v: Rational) -> Self {
        Exact(v)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Exact", 3)?;
        st.serialize_field("num", &self.0.numer().to_string())?;
        st.serialize_field("den", &self.0.denom().to_string())?;
        st.serialize_field("decimal", &to_decimal(&self.0, 12))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            num: String,
            den: String,
        }
        let raw = Raw::deserialize(deserializer)?;
        let n: BigInt = raw.num.parse().map_err(de::Error::custom)?;
        let d: BigInt = raw.den.parse().map_err(de::Error::custom)?;
        if d.is_zero() {
            return Err(de::Error::custom("zero denominator"));
        }
        Ok(Exact(Rational::new(n, d)))
    }
}

/// Serde adapter for config quantities: accepts a JSON integer or a string
/// such as `"5/2"`, and writes integers as numbers and fractions as strings.
pub mod quantity {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
        if v.is_integer() {
            if let Some(i) = v.to_integer().to_i64() {
                return s.serialize_i64(i);
            }
        }
        s.serialize_str(&Exact(v.clone()).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Rational;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer or a rational string like \"5/2\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
                Ok(int(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
                Ok(Rational::from_integer(BigInt::from(v)))
            }
            fn visit_f64<E: de::Error>(self, _: f64) -> Result<Rational, E> {
                Err(E::custom("floating point quantities are not accepted; use an integer or \"num/den\""))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
                parse(v).ok_or_else(|| E::custom(format!("invalid rational {v:?}")))
            }
        }
        d.deserialize_any(V)
    }
}
