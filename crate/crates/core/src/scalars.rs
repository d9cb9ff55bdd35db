//! Exact field arithmetic over the rationals and prime fields.
//!
//! A [`Scalar`] carries its field with it: rationals are arbitrary-precision
//! and always in lowest terms, residues remember their modulus so that mixing
//! two different fields is caught instead of silently producing garbage.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest modulus accepted for prime fields (exclusive).
pub const MAX_PRIME: u64 = 1 << 31;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("field mismatch: {0} vs {1}")]
    FieldMismatch(FieldSpec, FieldSpec),
    #[error("division by zero")]
    ZeroInversion,
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("malformed scalar `{0}`")]
    Malformed(String),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is out of range (must be below 2^31)")]
    ModulusTooLarge(u64),
    #[error("unknown field `{0}` (expected `Q` or `GF:p`)")]
    UnknownField(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldSpec {
    Rationals,
    PrimeField(u32),
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl FieldSpec {
    pub fn prime(p: u64) -> Result<Self, ScalarError> {
        if p >= MAX_PRIME {
            return Err(ScalarError::ModulusTooLarge(p));
        }
        if !is_prime(p) {
            return Err(ScalarError::NotPrime(p));
        }
        Ok(FieldSpec::PrimeField(p as u32))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, FieldSpec::PrimeField(_))
    }

    /// Number of elements, `None` for the rationals.
    pub fn order(&self) -> Option<u64> {
        match self {
            FieldSpec::Rationals => None,
            FieldSpec::PrimeField(p) => Some(*p as u64),
        }
    }

    pub fn zero(&self) -> Scalar {
        self.from_i64(0)
    }

    pub fn one(&self) -> Scalar {
        self.from_i64(1)
    }

    pub fn from_i64(&self, v: i64) -> Scalar {
        match *self {
            FieldSpec::Rationals => Scalar::Rational(BigRational::from_integer(BigInt::from(v))),
            FieldSpec::PrimeField(p) => Scalar::Residue {
                value: v.rem_euclid(p as i64) as u32,
                modulus: p,
            },
        }
    }

    /// Residue `value mod p`; only meaningful for prime fields.
    pub fn residue(&self, value: u64) -> Scalar {
        match *self {
            FieldSpec::Rationals => self.from_i64(value as i64),
            FieldSpec::PrimeField(p) => Scalar::Residue {
                value: (value % p as u64) as u32,
                modulus: p,
            },
        }
    }

    /// Small random element: numerators and denominators up to `bound` over
    /// the rationals, uniform residues over prime fields.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R, bound: i64) -> Scalar {
        match *self {
            FieldSpec::Rationals => {
                let num = rng.gen_range(-bound..=bound);
                let den = rng.gen_range(1..=bound.max(1));
                Scalar::Rational(BigRational::new(num.into(), den.into()))
            }
            FieldSpec::PrimeField(p) => Scalar::Residue {
                value: rng.gen_range(0..p),
                modulus: p,
            },
        }
    }

    /// Random nonzero element.
    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R, bound: i64) -> Scalar {
        loop {
            let x = self.random(rng, bound);
            if !x.is_zero() {
                return x;
            }
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Rationals => write!(f, "Q"),
            FieldSpec::PrimeField(p) => write!(f, "GF:{p}"),
        }
    }
}

impl FromStr for FieldSpec {
    type Err = ScalarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t == "Q" || t == "q" {
            return Ok(FieldSpec::Rationals);
        }
        let rest = t
            .strip_prefix("GF:")
            .or_else(|| t.strip_prefix("gf:"))
            .ok_or_else(|| ScalarError::UnknownField(t.to_string()))?;
        let p: u64 = rest
            .trim()
            .parse()
            .map_err(|_| ScalarError::UnknownField(t.to_string()))?;
        FieldSpec::prime(p)
    }
}

impl Serialize for FieldSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FieldSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An exact field element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Scalar {
    Rational(BigRational),
    Residue { value: u32, modulus: u32 },
}

fn mod_pow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

impl Scalar {
    pub fn field(&self) -> FieldSpec {
        match self {
            Scalar::Rational(_) => FieldSpec::Rationals,
            Scalar::Residue { modulus, .. } => FieldSpec::PrimeField(*modulus),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Rational(q) => q.is_zero(),
            Scalar::Residue { value, .. } => *value == 0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Scalar::Rational(q) => q.is_one(),
            Scalar::Residue { value, .. } => *value == 1,
        }
    }

    fn same_field(&self, other: &Scalar) -> Result<(), ScalarError> {
        if self.field() == other.field() {
            Ok(())
        } else {
            Err(ScalarError::FieldMismatch(self.field(), other.field()))
        }
    }

    pub fn try_add(&self, other: &Scalar) -> Result<Scalar, ScalarError> {
        self.same_field(other)?;
        Ok(match (self, other) {
            (Scalar::Rational(x), Scalar::Rational(y)) => Scalar::Rational(x + y),
            (Scalar::Residue { value: x, modulus }, Scalar::Residue { value: y, .. }) => {
                Scalar::Residue {
                    value: ((*x as u64 + *y as u64) % *modulus as u64) as u32,
                    modulus: *modulus,
                }
            }
            _ => unreachable!(),
        })
    }

    pub fn try_sub(&self, other: &Scalar) -> Result<Scalar, ScalarError> {
        self.try_add(&other.neg())
    }

    pub fn try_mul(&self, other: &Scalar) -> Result<Scalar, ScalarError> {
        self.same_field(other)?;
        Ok(match (self, other) {
            (Scalar::Rational(x), Scalar::Rational(y)) => Scalar::Rational(x * y),
            (Scalar::Residue { value: x, modulus }, Scalar::Residue { value: y, .. }) => {
                Scalar::Residue {
                    value: ((*x as u64 * *y as u64) % *modulus as u64) as u32,
                    modulus: *modulus,
                }
            }
            _ => unreachable!(),
        })
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Rational(x) => Scalar::Rational(-x),
            Scalar::Residue { value, modulus } => Scalar::Residue {
                value: if *value == 0 { 0 } else { modulus - value },
                modulus: *modulus,
            },
        }
    }

    pub fn inv(&self) -> Result<Scalar, ScalarError> {
        if self.is_zero() {
            return Err(ScalarError::ZeroInversion);
        }
        Ok(match self {
            Scalar::Rational(x) => Scalar::Rational(x.recip()),
            Scalar::Residue { value, modulus } => Scalar::Residue {
                value: mod_pow(*value as u64, *modulus as u64 - 2, *modulus as u64) as u32,
                modulus: *modulus,
            },
        })
    }

    pub fn try_div(&self, other: &Scalar) -> Result<Scalar, ScalarError> {
        self.same_field(other)?;
        self.try_mul(&other.inv()?)
    }

    /// Parses `int` or `int/int` (optional sign, `-` or `−`) into `field`.
    pub fn parse(text: &str, field: FieldSpec) -> Result<Scalar, ScalarError> {
        let t = text.trim();
        let malformed = || ScalarError::Malformed(text.to_string());
        let (neg, body) = match t.chars().next() {
            Some('-') => (true, &t[1..]),
            Some('−') => (true, &t['−'.len_utf8()..]),
            Some('+') => (false, &t[1..]),
            _ => (false, t),
        };
        let (num_s, den_s) = match body.split_once('/') {
            Some((n, d)) => (n.trim(), Some(d.trim())),
            None => (body.trim(), None),
        };
        let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if !digits(num_s) || den_s.is_some_and(|d| !digits(d)) {
            return Err(malformed());
        }
        let mut num: BigInt = num_s.parse().map_err(|_| malformed())?;
        if neg {
            num = -num;
        }
        let den: BigInt = match den_s {
            Some(d) => d.parse().map_err(|_| malformed())?,
            None => BigInt::one(),
        };
        if den.is_zero() {
            return Err(ScalarError::ZeroDenominator(text.to_string()));
        }
        match field {
            FieldSpec::Rationals => Ok(Scalar::Rational(BigRational::new(num, den))),
            FieldSpec::PrimeField(p) => {
                let p_big = BigInt::from(p);
                let reduce = |x: &BigInt| -> u32 {
                    let r = ((x % &p_big) + &p_big) % &p_big;
                    r.to_u32().expect("residue below modulus")
                };
                let n = field.residue(reduce(&num) as u64);
                let d = field.residue(reduce(&den) as u64);
                // a denominator divisible by p has no inverse in GF(p)
                n.try_div(&d)
                    .map_err(|_| ScalarError::ZeroDenominator(text.to_string()))
            }
        }
    }

    /// Exact rational value, if this is a rational scalar.
    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Scalar::Rational(q) => Some(q),
            Scalar::Residue { .. } => None,
        }
    }

    /// True when rendering would start with a minus sign.
    pub fn is_negative(&self) -> bool {
        match self {
            Scalar::Rational(q) => q.is_negative(),
            Scalar::Residue { .. } => false,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Rational(q) => {
                if q.denom().is_one() {
                    write!(f, "{}", q.numer())
                } else {
                    write!(f, "{}/{}", q.numer(), q.denom())
                }
            }
            Scalar::Residue { value, .. } => write!(f, "{value}"),
        }
    }
}

// Operator impls panic on field mismatch; callers that cannot rule out mixing
// fields use the `try_*` methods.
macro_rules! forward_binop {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl std::ops::$tr<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                self.$checked(rhs).expect("scalar field mismatch")
            }
        }
        impl std::ops::$tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$checked(&rhs).expect("scalar field mismatch")
            }
        }
    };
}

forward_binop!(Add, add, try_add);
forward_binop!(Sub, sub, try_sub);
forward_binop!(Mul, mul, try_mul);

impl std::ops::Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::neg(self)
    }
}

impl std::ops::Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::neg(&self)
    }
}

impl Serialize for Scalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(text: &str) -> Scalar {
        Scalar::parse(text, FieldSpec::Rationals).unwrap()
    }

    fn gf(p: u64, v: u64) -> Scalar {
        FieldSpec::prime(p).unwrap().residue(v)
    }

    #[test]
    fn rational_arithmetic() {
        assert_eq!(&q("1/2") + &q("1/3"), q("5/6"));
        assert_eq!(&q("2/3") * &q("3/4"), q("1/2"));
        let x = q("-7/9");
        assert!((&x + &x.neg()).is_zero());
        assert_eq!(q("-2/7").inv().unwrap(), q("-7/2"));
        assert_eq!(q("1").inv().unwrap(), q("1"));
    }

    #[test]
    fn residue_arithmetic() {
        assert_eq!(&gf(3, 2) + &gf(3, 2), gf(3, 1));
        assert_eq!(&gf(5, 3) * &gf(5, 4), gf(5, 2));
        assert_eq!(gf(7, 3).inv().unwrap(), gf(7, 5));
        assert_eq!(gf(7, 1).inv().unwrap(), gf(7, 1));
    }

    #[test]
    fn identity_law() {
        for x in [q("-4/6"), gf(11, 7)] {
            assert_eq!(&x * &x.field().one(), x);
        }
    }

    #[test]
    fn parse_and_render() {
        assert_eq!(q("−4/6").to_string(), "-2/3");
        assert_eq!(q("-4/6").to_string(), "-2/3");
        assert_eq!(q("6/3").to_string(), "2");
        let gf5 = FieldSpec::prime(5).unwrap();
        assert_eq!(Scalar::parse("7", gf5).unwrap(), gf(5, 2));
        assert_eq!(Scalar::parse("-1", gf5).unwrap(), gf(5, 4));
        assert_eq!(Scalar::parse("1/2", gf5).unwrap(), gf(5, 3));
        assert!(matches!(
            Scalar::parse("1/0", FieldSpec::Rationals),
            Err(ScalarError::ZeroDenominator(_))
        ));
        assert!(matches!(
            Scalar::parse("1/5", gf5),
            Err(ScalarError::ZeroDenominator(_))
        ));
        for bad in ["", "x", "1/", "/2", "1.5", "--1"] {
            assert!(Scalar::parse(bad, FieldSpec::Rationals).is_err(), "{bad}");
        }
    }

    #[test]
    fn field_errors() {
        assert!(matches!(q("0").inv(), Err(ScalarError::ZeroInversion)));
        assert!(matches!(
            q("1").try_add(&gf(3, 1)),
            Err(ScalarError::FieldMismatch(..))
        ));
        assert!(matches!(
            gf(3, 1).try_mul(&gf(5, 1)),
            Err(ScalarError::FieldMismatch(..))
        ));
        assert!(matches!(FieldSpec::prime(9), Err(ScalarError::NotPrime(9))));
        assert!(matches!(
            FieldSpec::prime(1 << 31),
            Err(ScalarError::ModulusTooLarge(_))
        ));
        assert_eq!(
            FieldSpec::prime(2147483647).unwrap(),
            FieldSpec::PrimeField(2147483647)
        );
    }

    #[test]
    fn field_spec_text() {
        assert_eq!("Q".parse::<FieldSpec>().unwrap(), FieldSpec::Rationals);
        assert_eq!("GF:7".parse::<FieldSpec>().unwrap(), FieldSpec::PrimeField(7));
        assert!("GF:8".parse::<FieldSpec>().is_err());
        assert!("R".parse::<FieldSpec>().is_err());
        assert_eq!(FieldSpec::PrimeField(7).to_string(), "GF:7");
    }

    fn field_strategy() -> impl Strategy<Value = FieldSpec> {
        prop_oneof![
            Just(FieldSpec::Rationals),
            Just(FieldSpec::PrimeField(2)),
            Just(FieldSpec::PrimeField(7)),
            Just(FieldSpec::PrimeField(2147483647)),
        ]
    }

    proptest! {
        #[test]
        fn parse_render_roundtrip(field in field_strategy(), num in -1000i64..1000, den in 1i64..50) {
            let text = format!("{num}/{den}");
            if let Ok(x) = Scalar::parse(&text, field) {
                prop_assert_eq!(Scalar::parse(&x.to_string(), field).unwrap(), x);
            }
        }

        #[test]
        fn large_modulus_no_overflow(a in 0u64..2147483647, b in 0u64..2147483647) {
            let f = FieldSpec::PrimeField(2147483647);
            let x = f.residue(a);
            let y = f.residue(b);
            let expected = (a as u128 * b as u128 % 2147483647) as u64;
            prop_assert_eq!(&x * &y, f.residue(expected));
            if !x.is_zero() {
                prop_assert!((&x * &x.inv().unwrap()).is_one());
            }
        }
    }
}
