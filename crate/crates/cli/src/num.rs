//! Numeric literals that stay exact in rational mode.
//!
//! Scenario files accept numbers either as JSON numbers (`0.05`) or as
//! strings (`"76/9"`, `"1e-3"`). Both are kept as text until the numeric
//! mode is known, so `0.05` becomes exactly `1/20` in rational mode.

use std::fmt;

use rbsde_core::Scalar;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Num(String);

impl Num {
    pub fn new(text: impl Into<String>) -> Self {
        Num(text.into())
    }

    pub fn text(&self) -> &str {
        &self.0
    }

    pub fn to_scalar<S: Scalar>(&self) -> Result<S, String> {
        parse_scalar(&self.0)
    }
}

impl From<i64> for Num {
    fn from(v: i64) -> Self {
        Num(v.to_string())
    }
}

impl From<&str> for Num {
    fn from(v: &str) -> Self {
        Num(v.to_string())
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Num {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        match self.0.parse::<serde_json::Number>() {
            Ok(n) if !self.0.contains('/') => n.serialize(s),
            _ => s.serialize_str(&self.0),
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;

        impl<'de> Visitor<'de> for NumVisitor {
            type Value = Num;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or a numeric string such as \"76/9\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v.to_string()))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v.to_string()))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(format!("{v:?}")))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                parse_scalar::<f64>(v).map_err(E::custom)?;
                Ok(Num(v.trim().to_string()))
            }

            fn visit_map<A: de::MapAccess<'de>>(self, map: A) -> Result<Num, A::Error> {
                // arbitrary-precision numbers arrive as a single-entry map
                let n = serde_json::Number::deserialize(de::value::MapAccessDeserializer::new(map))?;
                Ok(Num(n.to_string()))
            }
        }

        d.deserialize_any(NumVisitor)
    }
}

/// Parses `a`, `a/b`, where each side is a decimal with optional exponent.
pub fn parse_scalar<S: Scalar>(text: &str) -> Result<S, String> {
    let text = text.trim();
    match text.split_once('/') {
        Some((num, den)) => {
            let den: S = parse_decimal(den)?;
            if den.is_zero() {
                return Err(format!("zero denominator in {text:?}"));
            }
            Ok(parse_decimal::<S>(num)? / den)
        }
        None => parse_decimal(text),
    }
}

fn parse_decimal<S: Scalar>(text: &str) -> Result<S, String> {
    let bad = || format!("not a number: {text:?}");
    let text = text.trim();
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let all = all.trim_start_matches('0');
    if all.len() > 18 {
        return Err(format!("too many significant digits in {text:?}"));
    }
    let m: i64 = if all.is_empty() { 0 } else { all.parse().map_err(|_| bad())? };
    if !S::EXACT {
        return text.parse::<f64>().map(S::from_f64).map_err(|_| bad());
    }
    let scale = exponent - frac_part.len() as i32;
    let mut value = S::from_int(if negative { -m } else { m });
    let ten = S::from_int(10);
    for _ in 0..scale.unsigned_abs() {
        value = if scale > 0 { value * ten.clone() } else { value / ten.clone() };
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rbsde_core::Rational;

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_scalar::<Rational>("0.05").unwrap(), Rational::ratio(1, 20));
        assert_eq!(parse_scalar::<Rational>("76/9").unwrap(), Rational::ratio(76, 9));
        assert_eq!(parse_scalar::<Rational>("-1.5e2").unwrap(), Rational::from_int(-150));
        assert_eq!(parse_scalar::<Rational>("2.5e-1/5").unwrap(), Rational::ratio(1, 20));
        assert!((parse_scalar::<f64>("1.2").unwrap() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage() {
        for s in ["", "abc", "1/0", "1..2", "--1", "1e", "."] {
            assert!(parse_scalar::<f64>(s).is_err(), "{s}");
        }
    }

    #[test]
    fn json_numbers_keep_their_text() {
        let n: Num = serde_json::from_str("0.1").unwrap();
        assert_eq!(n.text(), "0.1");
        let n: Num = serde_json::from_str("\"76/9\"").unwrap();
        assert_eq!(n.to_scalar::<Rational>().unwrap(), Rational::ratio(76, 9));
        assert!(serde_json::from_str::<Num>("\"x\"").is_err());
        assert_eq!(serde_json::to_string(&Num::from("0.1")).unwrap(), "0.1");
        assert_eq!(serde_json::to_string(&Num::from("1/3")).unwrap(), "\"1/3\"");
    }
}
