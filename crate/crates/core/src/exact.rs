//! Exact arithmetic for expansion exponents.
//!
//! Exponents that occur in asymptotic expansions here are of the form
//! `a + b*sqrt(d)` with rational `a, b` and a squarefree integer `d`
//! (the characteristic roots `(n-1)/2 +- sqrt((n-1)^2/4 + lambda)` for
//! rational `lambda`), or complex with a surd imaginary part when the
//! discriminant is negative. Keeping them exact makes integer-coincidence
//! detection and index-set membership decidable instead of tolerance-based.
//! Irrational inputs fall back to floating point with a fixed tolerance.

use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};
use std::fmt;

/// Tolerance used whenever a comparison has to fall back to floating point.
pub const FLOAT_EXPONENT_TOL: f64 = 1e-9;

fn rat(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

/// Largest square factor extraction: returns `(k, d)` with `m = k^2 * d`, `d` squarefree.
fn extract_square(m: u64) -> (u64, u64) {
    if m == 0 {
        return (0, 0);
    }
    let mut k: u64 = 1;
    let mut d = m;
    let mut p: u64 = 2;
    while p.saturating_mul(p) <= d {
        let mut count = 0u32;
        while d % (p * p) == 0 {
            d /= p * p;
            k *= p;
            count += 1;
            if count > 64 {
                break;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    (k, d)
}

/// `a + b*sqrt(d)` with `d` squarefree, `d == 0` exactly when `b == 0`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Surd {
    a: Rational64,
    b: Rational64,
    d: u64,
}

impl Surd {
    pub fn from_rational(a: Rational64) -> Self {
        Surd { a, b: Rational64::zero(), d: 0 }
    }

    pub fn from_integer(a: i64) -> Self {
        Self::from_rational(Rational64::from_integer(a))
    }

    /// `a + b*sqrt(d)`; normalizes the radicand.
    pub fn new(a: Rational64, b: Rational64, d: u64) -> Self {
        if b.is_zero() || d == 0 {
            return Self::from_rational(a);
        }
        let (k, d) = extract_square(d);
        if d == 1 {
            return Self::from_rational(a + b * rat(k as i64, 1));
        }
        Surd { a, b: b * rat(k as i64, 1), d }
    }

    /// Exact square root of a nonnegative rational, as `b*sqrt(d)`.
    pub fn sqrt_of_rational(r: Rational64) -> Option<Self> {
        if r.is_negative() {
            return None;
        }
        if r.is_zero() {
            return Some(Self::from_rational(Rational64::zero()));
        }
        let p = *r.numer() as u64;
        let q = *r.denom() as u64;
        // sqrt(p/q) = sqrt(p*q)/q
        let (k, d) = extract_square(p.checked_mul(q)?);
        let b = rat(k as i64, q as i64);
        if d == 1 {
            Some(Self::from_rational(b))
        } else {
            Some(Surd { a: Rational64::zero(), b, d })
        }
    }

    pub fn rational_part(&self) -> Rational64 {
        self.a
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn as_rational(&self) -> Option<Rational64> {
        self.is_rational().then_some(self.a)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.a.to_f64().unwrap_or(f64::NAN)
            + self.b.to_f64().unwrap_or(f64::NAN) * (self.d as f64).sqrt()
    }

    /// Addition, defined when the radicands are compatible.
    pub fn checked_add(&self, other: &Surd) -> Option<Surd> {
        if self.is_rational() {
            return Some(Surd { a: self.a + other.a, b: other.b, d: other.d });
        }
        if other.is_rational() {
            return Some(Surd { a: self.a + other.a, b: self.b, d: self.d });
        }
        if self.d == other.d {
            let b = self.b + other.b;
            if b.is_zero() {
                return Some(Surd::from_rational(self.a + other.a));
            }
            return Some(Surd { a: self.a + other.a, b, d: self.d });
        }
        None
    }

    pub fn add_rational(&self, r: Rational64) -> Surd {
        Surd { a: self.a + r, b: self.b, d: self.d }
    }

    pub fn neg(&self) -> Surd {
        Surd { a: -self.a, b: -self.b, d: self.d }
    }

    pub fn checked_sub(&self, other: &Surd) -> Option<Surd> {
        self.checked_add(&other.neg())
    }

    pub fn scale(&self, r: Rational64) -> Surd {
        if r.is_zero() {
            return Surd::from_rational(Rational64::zero());
        }
        Surd { a: self.a * r, b: self.b * r, d: self.d }
    }
}

impl fmt::Debug for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_rational() {
            write!(f, "{}", self.a)
        } else if self.a.is_zero() {
            write!(f, "{}*sqrt({})", self.b, self.d)
        } else {
            write!(f, "{} + {}*sqrt({})", self.a, self.b, self.d)
        }
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// An expansion exponent: exact (rational plus optional surd, possibly complex)
/// or a floating-point fallback.
#[derive(Clone, Copy, PartialEq)]
pub enum Exponent {
    Exact { re: Surd, im: Surd },
    Float { re: f64, im: f64 },
}

impl Exponent {
    pub fn from_integer(z: i64) -> Self {
        Exponent::Exact { re: Surd::from_integer(z), im: Surd::from_integer(0) }
    }

    pub fn from_rational(z: Rational64) -> Self {
        Exponent::Exact { re: Surd::from_rational(z), im: Surd::from_integer(0) }
    }

    pub fn from_surd(re: Surd) -> Self {
        Exponent::Exact { re, im: Surd::from_integer(0) }
    }

    pub fn from_f64(re: f64) -> Self {
        Exponent::Float { re, im: 0.0 }
    }

    pub fn re_f64(&self) -> f64 {
        match self {
            Exponent::Exact { re, .. } => re.to_f64(),
            Exponent::Float { re, .. } => *re,
        }
    }

    pub fn im_f64(&self) -> f64 {
        match self {
            Exponent::Exact { im, .. } => im.to_f64(),
            Exponent::Float { im, .. } => *im,
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            Exponent::Exact { im, .. } => im.is_zero(),
            Exponent::Float { im, .. } => im.abs() <= FLOAT_EXPONENT_TOL,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Exponent::Exact { .. })
    }

    /// Shift by a real rational amount.
    pub fn add_rational(&self, r: Rational64) -> Exponent {
        match self {
            Exponent::Exact { re, im } => Exponent::Exact { re: re.add_rational(r), im: *im },
            Exponent::Float { re, im } => Exponent::Float {
                re: re + r.to_f64().unwrap_or(f64::NAN),
                im: *im,
            },
        }
    }

    pub fn add_integer(&self, k: i64) -> Exponent {
        self.add_rational(Rational64::from_integer(k))
    }

    /// Sum of two exponents; demotes to float when the surd parts are incompatible.
    pub fn add(&self, other: &Exponent) -> Exponent {
        match (self, other) {
            (Exponent::Exact { re: r1, im: i1 }, Exponent::Exact { re: r2, im: i2 }) => {
                match (r1.checked_add(r2), i1.checked_add(i2)) {
                    (Some(re), Some(im)) => Exponent::Exact { re, im },
                    _ => Exponent::Float {
                        re: r1.to_f64() + r2.to_f64(),
                        im: i1.to_f64() + i2.to_f64(),
                    },
                }
            }
            _ => Exponent::Float {
                re: self.re_f64() + other.re_f64(),
                im: self.im_f64() + other.im_f64(),
            },
        }
    }

    /// Division by a positive integer (pushforward along a boundary-defining
    /// function of multiplicity `e`).
    pub fn div_positive(&self, e: u32) -> Exponent {
        let r = rat(1, e as i64);
        match self {
            Exponent::Exact { re, im } => Exponent::Exact { re: re.scale(r), im: im.scale(r) },
            Exponent::Float { re, im } => {
                Exponent::Float { re: re / e as f64, im: im / e as f64 }
            }
        }
    }

    /// `self - other` when it is a (possibly negative) integer.
    pub fn integer_difference(&self, other: &Exponent) -> Option<i64> {
        match (self, other) {
            (Exponent::Exact { re: r1, im: i1 }, Exponent::Exact { re: r2, im: i2 }) => {
                if i1.checked_sub(i2)?.is_zero() {
                    let diff = r1.checked_sub(r2)?;
                    let q = diff.as_rational()?;
                    q.is_integer().then(|| q.to_integer())
                } else {
                    None
                }
            }
            _ => {
                if (self.im_f64() - other.im_f64()).abs() > FLOAT_EXPONENT_TOL {
                    return None;
                }
                let d = self.re_f64() - other.re_f64();
                let k = d.round();
                ((d - k).abs() <= FLOAT_EXPONENT_TOL).then_some(k as i64)
            }
        }
    }

    /// Equality, exact where possible, tolerance-based otherwise.
    pub fn same(&self, other: &Exponent) -> bool {
        match (self, other) {
            (Exponent::Exact { re: r1, im: i1 }, Exponent::Exact { re: r2, im: i2 }) => {
                r1 == r2 && i1 == i2
            }
            _ => {
                (self.re_f64() - other.re_f64()).abs() <= FLOAT_EXPONENT_TOL
                    && (self.im_f64() - other.im_f64()).abs() <= FLOAT_EXPONENT_TOL
            }
        }
    }

    /// Hashable key; floats are snapped to the comparison tolerance grid.
    pub fn key(&self) -> ExponentKey {
        match self {
            Exponent::Exact { re, im } => ExponentKey::Exact {
                re: (*re.rational_part().numer(), *re.rational_part().denom(), surd_key(re)),
                im: (*im.rational_part().numer(), *im.rational_part().denom(), surd_key(im)),
            },
            Exponent::Float { re, im } => ExponentKey::Float {
                re: (re / FLOAT_EXPONENT_TOL).round() as i128,
                im: (im / FLOAT_EXPONENT_TOL).round() as i128,
            },
        }
    }
}

fn surd_key(s: &Surd) -> (i64, i64, u64) {
    let b = s.b();
    (*b.numer(), *b.denom(), s.radicand())
}

impl Surd {
    pub fn b(&self) -> Rational64 {
        self.b
    }

    pub fn radicand(&self) -> u64 {
        self.d
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum ExponentKey {
    Exact { re: (i64, i64, (i64, i64, u64)), im: (i64, i64, (i64, i64, u64)) },
    Float { re: i128, im: i128 },
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Exact { re, im } => {
                if im.is_zero() {
                    write!(f, "{re:?}")
                } else {
                    write!(f, "{re:?} + ({im:?})i")
                }
            }
            Exponent::Float { re, im } => {
                if im.abs() == 0.0 {
                    write!(f, "{re}")
                } else {
                    write!(f, "{re} + {im}i")
                }
            }
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Characteristic exponents `(n-1)/2 +- sqrt((n-1)^2/4 + lambda)`.
#[derive(Clone, Debug)]
pub struct CharacteristicRoots {
    pub s_minus: Exponent,
    pub s_plus: Exponent,
    /// `s_plus - s_minus` when it is a nonnegative integer.
    pub integer_coincidence: Option<u32>,
    /// Set when the discriminant is negative (oscillatory regime).
    pub complex: bool,
}

/// Exact characteristic roots for rational `lambda`.
pub fn characteristic_roots_rational(n: u32, lambda: Rational64) -> CharacteristicRoots {
    let half = rat((n as i64) - 1, 2);
    let disc = half * half + lambda;
    if disc.is_negative() {
        let root = Surd::sqrt_of_rational(-disc).expect("positive by construction");
        let s_minus = Exponent::Exact { re: Surd::from_rational(half), im: root.neg() };
        let s_plus = Exponent::Exact { re: Surd::from_rational(half), im: root };
        return CharacteristicRoots { s_minus, s_plus, integer_coincidence: None, complex: true };
    }
    let root = Surd::sqrt_of_rational(disc).expect("nonnegative");
    let s_minus = Exponent::from_surd(Surd::from_rational(half).checked_sub(&root).unwrap());
    let s_plus = Exponent::from_surd(Surd::from_rational(half).checked_add(&root).unwrap());
    let integer_coincidence = s_plus
        .integer_difference(&s_minus)
        .and_then(|k| u32::try_from(k).ok());
    CharacteristicRoots { s_minus, s_plus, integer_coincidence, complex: false }
}

/// Floating-point characteristic roots for arbitrary real `lambda`.
pub fn characteristic_roots_f64(n: u32, lambda: f64) -> (f64, f64) {
    let half = (n as f64 - 1.0) / 2.0;
    let disc = half * half + lambda;
    let root = disc.max(0.0).sqrt();
    (half - root, half + root)
}

/// Parse a decimal literal ("0.2", "-3", "3/2") into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational64> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().ok()?;
        let d: i64 = den.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(rat(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let neg = int_part.trim_start().starts_with('-');
        let i: i64 = if int_part.is_empty() || int_part == "-" { 0 } else { int_part.parse().ok()? };
        if frac_part.len() > 12 {
            return None;
        }
        let f: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().ok()? };
        let scale = 10i64.checked_pow(frac_part.len() as u32)?;
        let frac = rat(if neg { -f } else { f }, scale);
        return Some(rat(i, 1) + frac);
    }
    s.parse::<i64>().ok().map(Rational64::from_integer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_extraction() {
        assert_eq!(extract_square(45), (3, 5));
        assert_eq!(extract_square(1), (1, 1));
        assert_eq!(extract_square(2), (1, 2));
        assert_eq!(extract_square(144), (12, 1));
    }

    #[test]
    fn sqrt_of_rational_values() {
        let s = Surd::sqrt_of_rational(rat(9, 4)).unwrap();
        assert_eq!(s.as_rational(), Some(rat(3, 2)));
        let s = Surd::sqrt_of_rational(rat(9, 20)).unwrap();
        // sqrt(9/20) = 3/(2 sqrt 5) = (3/10) sqrt 5
        assert!(!s.is_rational());
        assert!((s.to_f64() - (0.45f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn characteristic_roots_examples() {
        // n=4, lambda=0: (0, 3), coincidence 3
        let r = characteristic_roots_rational(4, rat(0, 1));
        assert!(r.s_minus.same(&Exponent::from_integer(0)));
        assert!(r.s_plus.same(&Exponent::from_integer(3)));
        assert_eq!(r.integer_coincidence, Some(3));

        // n=4, lambda=-2: (1, 2), coincidence 1
        let r = characteristic_roots_rational(4, rat(-2, 1));
        assert!(r.s_minus.same(&Exponent::from_integer(1)));
        assert!(r.s_plus.same(&Exponent::from_integer(2)));
        assert_eq!(r.integer_coincidence, Some(1));

        // n=2, lambda=1/5: irrational but exact, no coincidence
        let r = characteristic_roots_rational(2, rat(1, 5));
        assert!(r.s_minus.is_exact());
        assert!((r.s_minus.re_f64() - (0.5 - 0.45f64.sqrt())).abs() < 1e-15);
        assert!((r.s_plus.re_f64() - (0.5 + 0.45f64.sqrt())).abs() < 1e-15);
        assert_eq!(r.integer_coincidence, None);
        assert!(!r.complex);

        // below the spectral threshold: complex
        let r = characteristic_roots_rational(2, rat(-1, 1));
        assert!(r.complex);
        assert!((r.s_plus.im_f64() - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn integer_difference_and_division() {
        let a = Exponent::from_rational(rat(3, 2));
        let b = Exponent::from_rational(rat(-1, 2));
        assert_eq!(a.integer_difference(&b), Some(2));
        assert_eq!(b.integer_difference(&a), Some(-2));
        let c = Exponent::from_rational(rat(1, 3));
        assert_eq!(a.integer_difference(&c), None);
        assert!(a.div_positive(3).same(&Exponent::from_rational(rat(1, 2))));
    }

    #[test]
    fn surd_addition_compatibility() {
        let s5 = Surd::new(rat(0, 1), rat(1, 1), 5);
        let s2 = Surd::new(rat(0, 1), rat(1, 1), 2);
        assert!(s5.checked_add(&s2).is_none());
        let sum = s5.checked_add(&s5.neg()).unwrap();
        assert!(sum.is_zero());
        let e5 = Exponent::from_surd(s5);
        let e2 = Exponent::from_surd(s2);
        // incompatible surds demote to float
        assert!(!e5.add(&e2).is_exact());
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("0.2"), Some(rat(1, 5)));
        assert_eq!(parse_rational("-2"), Some(rat(-2, 1)));
        assert_eq!(parse_rational("3/2"), Some(rat(3, 2)));
        assert_eq!(parse_rational("-0.25"), Some(rat(-1, 4)));
        assert_eq!(parse_rational("1e5"), None);
    }
}
