//! Coefficient fields used by the series engine.
//!
//! Two implementations of [`Coeff`] exist: [`Gq`], exact Gaussian rationals
//! (pairs of arbitrary-precision rationals), and [`Complex64`] for float-mode
//! construction at spectral parameters that are not Gaussian rationals.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Field operations required by the series and linear-algebra code.
pub trait Coeff:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_ratio(r: &BigRational) -> Self;
    /// Exact zero test (bitwise for floats).
    fn is_zero(&self) -> bool;
    fn conj(&self) -> Self;
    fn to_c64(&self) -> Complex64;
    /// Magnitude used by pivoting and tail estimates.
    fn magnitude(&self) -> f64 {
        self.to_c64().norm()
    }
    fn is_exact() -> bool;
}

/// Gaussian rational `re + i·im`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Gq {
    pub re: BigRational,
    pub im: BigRational,
}

impl Gq {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Gq { re, im }
    }

    pub fn real(re: BigRational) -> Self {
        Gq { re, im: BigRational::zero() }
    }

    pub fn int(v: i64) -> Self {
        Gq::real(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn frac(num: i64, den: i64) -> Self {
        Gq::real(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// The imaginary unit.
    pub fn i() -> Self {
        Gq { re: BigRational::zero(), im: BigRational::one() }
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // scale both down to keep the quotient representable
            let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
            let n = (r.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (r.denom() >> shift).to_f64().unwrap_or(1.0);
            n / d
        }
    }
}

/// Parse `"num/den"`, an integer, or a decimal literal into an exact rational.
pub fn parse_ratio(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exp) = match body.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mut num: BigInt = digits.parse().ok()?;
    if neg {
        num = -num;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        BigRational::from_integer(num * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num_traits::pow(ten, (-scale) as usize))
    };
    Some(r)
}

pub fn format_ratio(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Debug for Gq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Gq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            write!(f, "{}", format_ratio(&self.re))
        } else if self.re.is_zero() {
            write!(f, "{}i", format_ratio(&self.im))
        } else {
            let sign = if self.im.is_negative() { "-" } else { "+" };
            write!(f, "{}{}{}i", format_ratio(&self.re), sign, format_ratio(&self.im.abs()))
        }
    }
}

impl Serialize for Gq {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (format_ratio(&self.re), format_ratio(&self.im)).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Gq {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (re, im): (String, String) = Deserialize::deserialize(d)?;
        let re = parse_ratio(&re).ok_or_else(|| serde::de::Error::custom("bad rational"))?;
        let im = parse_ratio(&im).ok_or_else(|| serde::de::Error::custom("bad rational"))?;
        Ok(Gq { re, im })
    }
}

impl Add for Gq {
    type Output = Gq;
    fn add(self, o: Gq) -> Gq {
        Gq { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for Gq {
    type Output = Gq;
    fn sub(self, o: Gq) -> Gq {
        Gq { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for Gq {
    type Output = Gq;
    fn mul(self, o: Gq) -> Gq {
        if self.im.is_zero() && o.im.is_zero() {
            return Gq::real(self.re * o.re);
        }
        Gq {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
}

impl Div for Gq {
    type Output = Gq;
    fn div(self, o: Gq) -> Gq {
        if o.im.is_zero() {
            return Gq { re: self.re / &o.re, im: self.im / &o.re };
        }
        let den = o.norm_sqr();
        Gq {
            re: (&self.re * &o.re + &self.im * &o.im) / &den,
            im: (&self.im * &o.re - &self.re * &o.im) / &den,
        }
    }
}

impl Neg for Gq {
    type Output = Gq;
    fn neg(self) -> Gq {
        Gq { re: -self.re, im: -self.im }
    }
}

impl Coeff for Gq {
    fn zero() -> Self {
        Gq::default()
    }
    fn one() -> Self {
        Gq::int(1)
    }
    fn from_i64(v: i64) -> Self {
        Gq::int(v)
    }
    fn from_ratio(r: &BigRational) -> Self {
        Gq::real(r.clone())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn conj(&self) -> Self {
        Gq { re: self.re.clone(), im: -self.im.clone() }
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(ratio_to_f64(&self.re), ratio_to_f64(&self.im))
    }
    fn is_exact() -> bool {
        true
    }
}

impl Coeff for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_i64(v: i64) -> Self {
        Complex64::new(v as f64, 0.0)
    }
    fn from_ratio(r: &BigRational) -> Self {
        Complex64::new(ratio_to_f64(r), 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn to_c64(&self) -> Complex64 {
        *self
    }
    fn is_exact() -> bool {
        false
    }
}
