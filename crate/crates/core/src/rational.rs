//! Exact rational numbers for every time, rate and size in the toolkit.
//!
//! `Rational` wraps `Ratio<i128>` and uses checked arithmetic throughout, so
//! an overflow aborts loudly instead of silently wrapping in release builds.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rational(Ratio<i128>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal {0:?}")]
pub struct ParseRationalError(pub String);

impl Rational {
    pub const ZERO: Rational = Rational(Ratio::new_raw(0, 1));
    pub const ONE: Rational = Rational(Ratio::new_raw(1, 1));

    /// Builds `numer / denom`, reduced. Panics when `denom` is zero.
    pub fn new(numer: i128, denom: i128) -> Self {
        assert!(denom != 0, "rational with zero denominator");
        Rational(Ratio::new(numer, denom))
    }

    pub fn from_integer(n: i128) -> Self {
        Rational(Ratio::from_integer(n))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rational(self.0.recip())
    }

    pub fn floor(&self) -> Self {
        Rational(self.0.floor())
    }

    pub fn ceil(&self) -> Self {
        Rational(self.0.ceil())
    }

    /// Integer part after flooring; panics if it does not fit in `i128`.
    pub fn floor_int(&self) -> i128 {
        self.0.floor().to_integer()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn checked_add(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_add(&rhs.0).map(Rational)
    }

    pub fn checked_sub(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_sub(&rhs.0).map(Rational)
    }

    pub fn checked_mul(&self, rhs: &Self) -> Option<Self> {
        self.0.checked_mul(&rhs.0).map(Rational)
    }

    pub fn checked_div(&self, rhs: &Self) -> Option<Self> {
        if rhs.is_zero() {
            return None;
        }
        self.0.checked_div(&rhs.0).map(Rational)
    }

    /// True when the value has a finite decimal expansion.
    pub fn is_finite_decimal(&self) -> bool {
        let mut d = self.denom();
        while d % 2 == 0 {
            d /= 2;
        }
        while d % 5 == 0 {
            d /= 5;
        }
        d == 1
    }

    /// Renders with exactly `places` fractional digits, rounding half away
    /// from zero.
    pub fn to_fixed(&self, places: u32) -> String {
        let scale = 10i128.pow(places);
        let scaled = self.abs().0 * Ratio::from_integer(scale);
        let (q, r) = scaled.numer().div_rem(scaled.denom());
        let rounded = if r * 2 >= *scaled.denom() { q + 1 } else { q };
        let sign = if self.is_negative() && rounded != 0 { "-" } else { "" };
        if places == 0 {
            return format!("{sign}{rounded}");
        }
        let int = rounded / scale;
        let frac = rounded % scale;
        format!("{sign}{int}.{frac:0width$}", width = places as usize)
    }

    /// Shortest exact textual form: a plain decimal when one exists,
    /// otherwise `p/q`. Parsing the result yields the same value.
    pub fn to_exact_string(&self) -> String {
        if self.is_integer() {
            return self.numer().to_string();
        }
        if !self.is_finite_decimal() {
            return format!("{}/{}", self.numer(), self.denom());
        }
        let mut places = 0;
        let mut probe = self.abs().0;
        while !probe.is_integer() {
            probe *= Ratio::from_integer(10);
            places += 1;
        }
        self.to_fixed(places)
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_exact_string())
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match f.precision() {
            Some(p) => self.to_fixed(p as u32),
            None => self.to_exact_string(),
        };
        // numbers right-align by default; `pad` would truncate to the precision
        match (f.width(), f.align()) {
            (Some(w), Some(fmt::Alignment::Left)) => write!(f, "{s:<w$}"),
            (Some(w), Some(fmt::Alignment::Center)) => write!(f, "{s:^w$}"),
            (Some(w), _) => write!(f, "{s:>w$}"),
            (None, _) => f.write_str(&s),
        }
    }
}

fn parse_decimal(s: &str) -> Option<Ratio<i128>> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    let digits_ok = |p: &str| p.chars().all(|c| c.is_ascii_digit() || c == '_');
    if (int_part.is_empty() && frac_part.is_empty()) || !digits_ok(int_part) || !digits_ok(frac_part) {
        return None;
    }
    let int_digits: String = int_part.chars().filter(|c| *c != '_').collect();
    let frac_digits: String = frac_part.chars().filter(|c| *c != '_').collect();
    let mut numer: i128 = 0;
    for c in int_digits.chars().chain(frac_digits.chars()) {
        numer = numer.checked_mul(10)?.checked_add(c.to_digit(10)? as i128)?;
    }
    let denom = 10i128.checked_pow(frac_digits.len() as u32)?;
    let value = Ratio::new(numer, denom);
    Some(if neg { -value } else { value })
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts decimals (`8.6`, `-3`, `55_635`) and fractions of decimals
    /// (`1000/3`, `10000/17.9`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRationalError(s.to_string());
        let t = s.trim();
        match t.split_once('/') {
            Some((n, d)) => {
                let n = parse_decimal(n.trim()).ok_or_else(err)?;
                let d = parse_decimal(d.trim()).ok_or_else(err)?;
                if d.is_zero() {
                    return Err(err());
                }
                n.checked_div(&d).map(Rational).ok_or_else(err)
            }
            None => parse_decimal(t).map(Rational).ok_or_else(err),
        }
    }
}

macro_rules! checked_op {
    ($trait:ident, $method:ident, $checked:ident, $name:literal) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                self.$checked(&rhs).unwrap_or_else(|| panic!("rational {} overflow: {:?} and {:?}", $name, self, rhs))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                $trait::$method(self, *rhs)
            }
        }
    };
}

checked_op!(Add, add, checked_add, "add");
checked_op!(Sub, sub, checked_sub, "sub");
checked_op!(Mul, mul, checked_mul, "mul");

impl Div for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        assert!(!rhs.is_zero(), "rational division by zero");
        self.checked_div(&rhs).unwrap_or_else(|| panic!("rational div overflow: {:?} and {:?}", self, rhs))
    }
}

impl<'a> Div<&'a Rational> for Rational {
    type Output = Rational;
    fn div(self, rhs: &'a Rational) -> Rational {
        self / *rhs
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl AddAssign for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        *self = *self + rhs;
    }
}

impl SubAssign for Rational {
    fn sub_assign(&mut self, rhs: Rational) {
        *self = *self - rhs;
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::ZERO, |a, b| a + *b)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n as i128)
    }
}

impl From<u64> for Rational {
    fn from(n: u64) -> Self {
        Rational::from_integer(n as i128)
    }
}

impl From<u32> for Rational {
    fn from(n: u32) -> Self {
        Rational::from_integer(n as i128)
    }
}

impl From<usize> for Rational {
    fn from(n: usize) -> Self {
        Rational::from_integer(n as i128)
    }
}

/// Shorthand used heavily in tests and data tables.
pub fn q(s: &str) -> Rational {
    s.parse().unwrap_or_else(|e| panic!("{e}"))
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        *self == Rational::from(*other)
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.cmp(&Rational::from(*other)))
    }
}
