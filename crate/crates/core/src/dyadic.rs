//! Exact signed dyadic rationals `mantissa * 2^exponent` and the sample type
//! built on them.
//!
//! Sample values are either exact dyadics or inexact 64-bit floats. Every finite
//! float is itself a dyadic rational, so both forms share one exact ordering and
//! one exact quantizer; nothing here rounds except [`Dyadic::to_f64`].

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// An exact dyadic rational `mantissa * 2^exponent`.
///
/// Always normalized: the mantissa is odd, or the value is zero and stored as
/// `0 * 2^0`. Structural equality is therefore numeric equality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: i64,
    exponent: i64,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic {
        mantissa: 0,
        exponent: 0,
    };
    pub const ONE: Dyadic = Dyadic {
        mantissa: 1,
        exponent: 0,
    };

    pub fn new(mantissa: i64, exponent: i64) -> Self {
        if mantissa == 0 {
            return Self::ZERO;
        }
        let tz = mantissa.trailing_zeros();
        Dyadic {
            mantissa: mantissa >> tz,
            exponent: exponent
                .checked_add(i64::from(tz))
                .expect("dyadic exponent overflow"),
        }
    }

    pub fn integer(value: i64) -> Self {
        Self::new(value, 0)
    }

    /// `2^exponent`.
    pub fn pow2(exponent: i64) -> Self {
        Dyadic {
            mantissa: 1,
            exponent,
        }
    }

    pub fn mantissa(self) -> i64 {
        self.mantissa
    }

    pub fn exponent(self) -> i64 {
        self.exponent
    }

    pub fn is_zero(self) -> bool {
        self.mantissa == 0
    }

    pub fn signum(self) -> i64 {
        self.mantissa.signum()
    }

    /// Lossless conversion of a finite float. Returns `None` for NaN or infinities.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        let bits = x.to_bits();
        let negative = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let fraction = (bits & ((1u64 << 52) - 1)) as i64;
        let (mantissa, exponent) = if biased == 0 {
            (fraction, -1074)
        } else {
            (fraction | (1i64 << 52), biased - 1075)
        };
        Some(Self::new(
            if negative { -mantissa } else { mantissa },
            exponent,
        ))
    }

    /// Nearest float (round-to-nearest on the mantissa, then an exact power-of-two
    /// scale). Underflows to zero and overflows to infinity like ordinary floats.
    pub fn to_f64(self) -> f64 {
        if self.mantissa == 0 {
            return 0.0;
        }
        ldexp(self.mantissa as f64, self.exponent)
    }

    /// True when [`to_f64`](Self::to_f64) loses nothing.
    pub fn is_f64_exact(self) -> bool {
        Self::from_f64(self.to_f64()) == Some(self)
    }

    /// `self * 2^shift`, or `None` if the exponent leaves the `i64` range.
    pub fn scale(self, shift: i64) -> Option<Self> {
        if self.mantissa == 0 {
            return Some(self);
        }
        self.exponent.checked_add(shift).map(|exponent| Dyadic {
            mantissa: self.mantissa,
            exponent,
        })
    }

    /// `floor(self * 2^shift)` as an integer-valued dyadic (exponent >= 0).
    ///
    /// For an `i64` mantissa the result is always `odd * 2^s` with the odd part
    /// bounded by the input mantissa, so it is representable without big integers.
    pub fn floor_scaled(self, shift: i64) -> Self {
        if self.mantissa == 0 {
            return Self::ZERO;
        }
        let total = i128::from(self.exponent) + i128::from(shift);
        if total >= 0 {
            let exponent = i64::try_from(total).expect("cell index exponent overflow");
            return Dyadic {
                mantissa: self.mantissa,
                exponent,
            };
        }
        let right = -total;
        let floored = if right >= 64 {
            if self.mantissa < 0 {
                -1
            } else {
                0
            }
        } else {
            // Arithmetic shift floors toward negative infinity.
            self.mantissa >> right
        };
        Self::new(floored, 0)
    }

    /// The value as an `i64` when it is an integer in range.
    pub fn to_i64(self) -> Option<i64> {
        if self.mantissa == 0 {
            return Some(0);
        }
        if self.exponent < 0 || self.exponent >= 64 {
            return None;
        }
        let shifted = self.mantissa.checked_shl(self.exponent as u32)?;
        (shifted >> self.exponent == self.mantissa).then_some(shifted)
    }

    /// Bit length of |mantissa| plus exponent: the unique `b` with
    /// `2^(b-1) <= |x| < 2^b`.
    fn magnitude_order(self) -> i128 {
        let bits = 64 - i128::from(self.mantissa.unsigned_abs().leading_zeros());
        bits + i128::from(self.exponent)
    }

    fn cmp_magnitude(self, other: Self) -> Ordering {
        match self.magnitude_order().cmp(&other.magnitude_order()) {
            Ordering::Equal => {}
            unequal => return unequal,
        }
        // Equal orders put the exponents within 63 of each other.
        let low = self.exponent.min(other.exponent);
        let a = u128::from(self.mantissa.unsigned_abs()) << (self.exponent - low);
        let b = u128::from(other.mantissa.unsigned_abs()) << (other.exponent - low);
        a.cmp(&b)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.signum(), other.signum());
        if sa != sb || sa == 0 {
            return sa.cmp(&sb);
        }
        let by_magnitude = self.cmp_magnitude(*other);
        if sa > 0 {
            by_magnitude
        } else {
            by_magnitude.reverse()
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    /// Shortest round-trip decimal when the value is an exact float, otherwise
    /// the lossless literal `m*2^e`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_f64_exact() {
            write!(f, "{}", self.to_f64())
        } else {
            write!(f, "{}*2^{}", self.mantissa, self.exponent)
        }
    }
}

impl FromStr for Dyadic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((m, e)) = s.split_once("*2^") {
            let mantissa = m
                .trim()
                .parse::<i64>()
                .map_err(|_| Error::Parse(format!("bad dyadic mantissa in {s:?}")))?;
            let exponent = e
                .trim()
                .parse::<i64>()
                .map_err(|_| Error::Parse(format!("bad dyadic exponent in {s:?}")))?;
            return Ok(Dyadic::new(mantissa, exponent));
        }
        let x = s
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad number {s:?}")))?;
        Dyadic::from_f64(x).ok_or_else(|| Error::Parse(format!("non-finite value {s:?}")))
    }
}

/// `x * 2^exp` with explicit range handling so huge exponents do not loop.
fn ldexp(mut x: f64, exp: i64) -> f64 {
    let mut exp = exp.clamp(-2200, 2200) as i32;
    while exp > 1000 {
        x *= 2f64.powi(1000);
        exp -= 1000;
    }
    while exp < -1000 {
        x *= 2f64.powi(-1000);
        exp += 1000;
    }
    x * 2f64.powi(exp)
}

/// One sample of the process: an exact dyadic or an inexact real.
///
/// Equality, ordering and hashing are numeric, so `Exact(1/2)` equals
/// `Inexact(0.5)`.
#[derive(Clone, Copy, Debug)]
pub enum DyadicValue {
    Exact(Dyadic),
    Inexact(f64),
}

impl DyadicValue {
    pub const ZERO: DyadicValue = DyadicValue::Exact(Dyadic::ZERO);

    pub fn exact(mantissa: i64, exponent: i64) -> Self {
        DyadicValue::Exact(Dyadic::new(mantissa, exponent))
    }

    pub fn integer(value: i64) -> Self {
        DyadicValue::Exact(Dyadic::integer(value))
    }

    /// An inexact sample. Panics on NaN or infinities: the quantizer is only
    /// defined on finite reals.
    pub fn real(x: f64) -> Self {
        assert!(x.is_finite(), "sample values must be finite, got {x}");
        DyadicValue::Inexact(x)
    }

    /// The exact dyadic this value denotes.
    pub fn as_dyadic(&self) -> Dyadic {
        match *self {
            DyadicValue::Exact(d) => d,
            DyadicValue::Inexact(x) => Dyadic::from_f64(x).expect("finite sample"),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match *self {
            DyadicValue::Exact(d) => d.to_f64(),
            DyadicValue::Inexact(x) => x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, DyadicValue::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        self.as_dyadic().is_zero()
    }
}

impl From<Dyadic> for DyadicValue {
    fn from(d: Dyadic) -> Self {
        DyadicValue::Exact(d)
    }
}

impl PartialEq for DyadicValue {
    fn eq(&self, other: &Self) -> bool {
        self.as_dyadic() == other.as_dyadic()
    }
}

impl Eq for DyadicValue {}

impl Hash for DyadicValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.as_dyadic().hash(state)
    }
}

impl Ord for DyadicValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_dyadic().cmp(&other.as_dyadic())
    }
}

impl PartialOrd for DyadicValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DyadicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DyadicValue::Exact(d) => d.fmt(f),
            DyadicValue::Inexact(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for DyadicValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<Dyadic>().map(DyadicValue::Exact)
    }
}

impl Serialize for DyadicValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let d = self.as_dyadic();
        if d.is_f64_exact() {
            serializer.serialize_f64(d.to_f64())
        } else {
            serializer.serialize_str(&d.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for DyadicValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ValueVisitor;

        impl Visitor<'_> for ValueVisitor {
            type Value = DyadicValue;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a finite number or a dyadic literal like \"1*2^-33\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<DyadicValue, E> {
                Dyadic::from_f64(v)
                    .map(DyadicValue::Exact)
                    .ok_or_else(|| E::custom("non-finite value"))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<DyadicValue, E> {
                Ok(DyadicValue::integer(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<DyadicValue, E> {
                i64::try_from(v)
                    .map(DyadicValue::integer)
                    .map_err(|_| E::custom("integer out of range"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<DyadicValue, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(ValueVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_trailing_zeros() {
        assert_eq!(Dyadic::new(12, 0), Dyadic::new(3, 2));
        assert_eq!(Dyadic::new(0, 17), Dyadic::ZERO);
        assert_eq!(Dyadic::new(i64::MIN, 0), Dyadic::new(-1, 63));
    }

    #[test]
    fn float_round_trip() {
        for x in [0.0, -0.0, 0.3, -0.25, 1.0, 5e-324, f64::MAX, -1234.5678] {
            let d = Dyadic::from_f64(x).unwrap();
            assert_eq!(d.to_f64(), x);
            assert!(d.is_f64_exact());
        }
        assert!(Dyadic::from_f64(f64::NAN).is_none());
    }

    #[test]
    fn tiny_values_underflow_only_on_conversion() {
        // 2^-1025 is still a subnormal double; 2^-2049 is not.
        assert!(Dyadic::pow2(-1025).is_f64_exact());
        let h11 = Dyadic::pow2(-(1 << 11) - 1);
        assert_eq!(h11.to_f64(), 0.0);
        assert!(!h11.is_f64_exact());
        assert!(h11 > Dyadic::ZERO);
        assert!(h11 < Dyadic::pow2(-1074));
        assert_eq!(h11.to_string(), "1*2^-2049");
    }

    #[test]
    fn ordering_across_exponents() {
        let mut xs = [
            Dyadic::new(3, -1),
            Dyadic::new(-5, 10),
            Dyadic::pow2(-4000),
            Dyadic::ZERO,
            Dyadic::new(-1, -4000),
            Dyadic::new(7, 0),
            Dyadic::new(1, 1),
        ];
        xs.sort();
        let back: Vec<f64> = xs.iter().map(|d| d.to_f64()).collect();
        assert_eq!(back[0], -5120.0);
        assert_eq!(xs[1], Dyadic::new(-1, -4000));
        assert!(xs[1] < Dyadic::new(-1, -4001));
        assert_eq!(xs[2], Dyadic::ZERO);
        assert_eq!(&back[4..], &[1.5, 2.0, 7.0]);
    }

    #[test]
    fn floor_scaled_matches_float_floor() {
        for &x in &[0.3, -0.25, -0.3, 1.0, 7.75, -7.75, 1e-30] {
            for k in 0..10 {
                let d = Dyadic::from_f64(x).unwrap().floor_scaled(k);
                assert_eq!(
                    d.to_i64().unwrap() as f64,
                    (x * 2f64.powi(k as i32)).floor()
                );
            }
        }
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("1*2^-5".parse::<Dyadic>().unwrap(), Dyadic::pow2(-5));
        assert_eq!("0.03125".parse::<Dyadic>().unwrap(), Dyadic::pow2(-5));
        assert_eq!(Dyadic::pow2(-5).to_string(), "0.03125");
        assert!("abc".parse::<Dyadic>().is_err());
    }

    #[test]
    fn value_equality_is_numeric() {
        assert_eq!(DyadicValue::real(0.5), DyadicValue::exact(1, -1));
        assert_ne!(DyadicValue::real(0.5), DyadicValue::ZERO);
        assert_eq!(DyadicValue::real(-0.0), DyadicValue::ZERO);
    }

    #[test]
    fn serde_uses_literal_only_when_needed() {
        let v = vec![DyadicValue::exact(1, -1), DyadicValue::exact(1, -2000)];
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"[0.5,"1*2^-2000"]"#);
        let back: Vec<DyadicValue> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }
}
