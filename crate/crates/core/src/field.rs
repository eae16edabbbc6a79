//! Exact arithmetic in a real quadratic field.
//!
//! An element is stored as `(a + b*sqrt(d)) / c` with `gcd(a, b, c) = 1` and
//! `c > 0`. Rationals that have not yet met an irrational operand carry no
//! radicand and adopt the radicand of whatever they are combined with.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FieldError {
    #[error("denominator is zero")]
    ZeroDenominator,
    #[error("radicand {0} must be a positive non-square integer")]
    BadRadicand(BigInt),
    #[error("cannot combine elements of Q(sqrt {0}) and Q(sqrt {1})")]
    FieldMismatch(BigInt, BigInt),
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot parse {0:?} as an exact number")]
    Parse(String),
}

#[derive(Clone)]
pub struct FieldElement {
    a: BigInt,
    b: BigInt,
    c: BigInt,
    d: Option<Arc<BigInt>>,
}

fn same_radicand(x: &Arc<BigInt>, y: &Arc<BigInt>) -> bool {
    Arc::ptr_eq(x, y) || x == y
}

/// Radicand shared by two operands. Panics when they live in different fields;
/// use [`FieldElement::compatible`] to check beforehand.
fn join(x: &Option<Arc<BigInt>>, y: &Option<Arc<BigInt>>) -> Option<Arc<BigInt>> {
    match (x, y) {
        (None, None) => None,
        (Some(d), None) | (None, Some(d)) => Some(d.clone()),
        (Some(d1), Some(d2)) => {
            if same_radicand(d1, d2) {
                Some(d1.clone())
            } else {
                panic!("{}", FieldError::FieldMismatch((**d1).clone(), (**d2).clone()))
            }
        }
    }
}

/// Sign of `a + b*sqrt(d)` for a non-square `d > 0`.
fn sign_of(a: &BigInt, b: &BigInt, d: Option<&BigInt>) -> Ordering {
    let sa = a.sign();
    let sb = b.sign();
    match (sa, sb) {
        (_, Sign::NoSign) => a.cmp(&BigInt::zero()),
        (Sign::NoSign, _) => b.cmp(&BigInt::zero()),
        (Sign::Plus, Sign::Plus) => Ordering::Greater,
        (Sign::Minus, Sign::Minus) => Ordering::Less,
        _ => {
            let d = d.expect("irrational part without a radicand");
            let a2 = a * a;
            let b2d = b * b * d;
            // a and b have opposite signs; the larger magnitude wins.
            let a_wins = a2 > b2d;
            match (sa, a_wins) {
                (Sign::Plus, true) | (Sign::Minus, false) => Ordering::Greater,
                _ => Ordering::Less,
            }
        }
    }
}

/// Whether `n` is a perfect square (n >= 0).
pub fn is_square(n: &BigInt) -> bool {
    if n.is_negative() {
        return false;
    }
    let r = n.sqrt();
    &r * &r == *n
}

/// Split `n > 0` as `f^2 * s`. Exact (s squarefree) below 2^128; above that,
/// trial division stops at 2e6 and `s` may keep a square factor.
pub fn square_part(n: &BigInt) -> (BigInt, BigInt) {
    assert!(n.is_positive());
    if let Some(v) = n.to_u128() {
        let (f, s) = square_part_u128(v);
        return (BigInt::from(f), BigInt::from(s));
    }
    let mut rest = n.clone();
    let mut f = BigInt::one();
    let mut s = BigInt::one();
    let limit: u64 = n.cbrt().to_u64().unwrap_or(u64::MAX).min(2_000_000);
    let mut p: u64 = 2;
    while p <= limit {
        let pb = BigInt::from(p);
        let mut e = 0u32;
        while (&rest % &pb).is_zero() {
            rest /= &pb;
            e += 1;
        }
        f *= num_traits::pow(pb.clone(), (e / 2) as usize);
        if e % 2 == 1 {
            s *= &pb;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if rest > BigInt::one() {
        if is_square(&rest) {
            f *= rest.sqrt();
        } else {
            s *= rest;
        }
    }
    (f, s)
}

fn square_part_u128(mut n: u128) -> (u128, u128) {
    let mut f: u128 = 1;
    let mut s: u128 = 1;
    let mut p: u128 = 2;
    // Trial division up to the cube root; what remains is 1, a prime, a
    // prime square, or a product of two distinct primes.
    while p * p * p <= n {
        let mut e = 0;
        while n.is_multiple_of(p) {
            n /= p;
            e += 1;
        }
        for _ in 0..e / 2 {
            f *= p;
        }
        if e % 2 == 1 {
            s *= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        let r = isqrt_u128(n);
        if r * r == n {
            f *= r;
        } else {
            s *= n;
        }
    }
    (f, s)
}

fn isqrt_u128(n: u128) -> u128 {
    let mut r = (n as f64).sqrt() as u128;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

impl FieldElement {
    fn make(a: BigInt, b: BigInt, c: BigInt, d: Option<Arc<BigInt>>) -> Self {
        debug_assert!(!c.is_zero());
        let (mut a, mut b, mut c) = (a, b, c);
        if c.is_negative() {
            a = -a;
            b = -b;
            c = -c;
        }
        let g = a.gcd(&b).gcd(&c);
        if !g.is_one() {
            a /= &g;
            b /= &g;
            c /= &g;
        }
        FieldElement { a, b, c, d }
    }

    /// `(a + b*sqrt(d)) / c`, validating `c` and `d`.
    pub fn new(a: BigInt, b: BigInt, c: BigInt, d: &BigInt) -> Result<Self, FieldError> {
        if c.is_zero() {
            return Err(FieldError::ZeroDenominator);
        }
        if d <= &BigInt::one() || is_square(d) {
            return Err(FieldError::BadRadicand(d.clone()));
        }
        Ok(Self::make(a, b, c, Some(Arc::new(d.clone()))))
    }

    pub fn from_i64s(a: i64, b: i64, c: i64, d: i64) -> Result<Self, FieldError> {
        Self::new(a.into(), b.into(), c.into(), &d.into())
    }

    pub fn rational(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        let den = den.into();
        assert!(!den.is_zero(), "zero denominator");
        Self::make(num.into(), BigInt::zero(), den, None)
    }

    pub fn from_ratio(r: &BigRational) -> Self {
        Self::rational(r.numer().clone(), r.denom().clone())
    }

    pub fn integer(n: impl Into<BigInt>) -> Self {
        Self::rational(n, 1)
    }

    pub fn zero() -> Self {
        Self::integer(0)
    }

    pub fn one() -> Self {
        Self::integer(1)
    }

    /// `sqrt(d)` itself.
    pub fn sqrt_of(d: &BigInt) -> Result<Self, FieldError> {
        Self::new(BigInt::zero(), BigInt::one(), BigInt::one(), d)
    }

    /// `(a + sqrt(disc)) / c` for an arbitrary non-square `disc > 0`, pulling
    /// square factors out of the radicand.
    pub fn with_sqrt_of(a: BigInt, disc: &BigInt, c: BigInt) -> Result<Self, FieldError> {
        if disc <= &BigInt::zero() || is_square(disc) {
            return Err(FieldError::BadRadicand(disc.clone()));
        }
        let (f, s) = square_part(disc);
        Self::new(a, f, c, &s)
    }

    pub fn num_rational(&self) -> &BigInt {
        &self.a
    }
    pub fn num_irrational(&self) -> &BigInt {
        &self.b
    }
    pub fn denom(&self) -> &BigInt {
        &self.c
    }
    pub fn radicand(&self) -> Option<&BigInt> {
        self.d.as_deref()
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    pub fn to_rational(&self) -> Option<BigRational> {
        self.is_rational()
            .then(|| BigRational::new(self.a.clone(), self.c.clone()))
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// True when the two elements can be combined.
    pub fn compatible(&self, other: &Self) -> bool {
        match (&self.d, &other.d) {
            (Some(x), Some(y)) => same_radicand(x, y),
            _ => true,
        }
    }

    /// Attach the radicand of `other` (used to place rationals in a field).
    pub fn in_field_of(mut self, other: &Self) -> Result<Self, FieldError> {
        match (&self.d, &other.d) {
            (Some(x), Some(y)) if !same_radicand(x, y) => {
                Err(FieldError::FieldMismatch((**x).clone(), (**y).clone()))
            }
            (None, Some(y)) => {
                self.d = Some(y.clone());
                Ok(self)
            }
            _ => Ok(self),
        }
    }

    pub fn signum(&self) -> Ordering {
        sign_of(&self.a, &self.b, self.d.as_deref())
    }

    pub fn is_positive(&self) -> bool {
        self.signum() == Ordering::Greater
    }

    pub fn is_negative(&self) -> bool {
        self.signum() == Ordering::Less
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// Exact floor.
    pub fn floor(&self) -> BigInt {
        if self.b.is_zero() {
            return self.a.div_floor(&self.c);
        }
        let d = self.d.as_deref().expect("irrational part without a radicand");
        let s = (&self.b * &self.b * d).sqrt();
        // s < |b| sqrt(d) < s + 1 because d is not a square.
        if self.b.is_positive() {
            (&self.a + s).div_floor(&self.c)
        } else {
            (&self.a - s - BigInt::one()).div_floor(&self.c)
        }
    }

    pub fn ceil(&self) -> BigInt {
        -(-self).floor()
    }

    /// Representative in [0, 1).
    pub fn frac(&self) -> Self {
        let f = self.floor();
        if f.is_zero() {
            self.clone()
        } else {
            self.sub_int(&f)
        }
    }

    pub fn add_int(&self, n: &BigInt) -> Self {
        Self::make(&self.a + n * &self.c, self.b.clone(), self.c.clone(), self.d.clone())
    }

    pub fn sub_int(&self, n: &BigInt) -> Self {
        Self::make(&self.a - n * &self.c, self.b.clone(), self.c.clone(), self.d.clone())
    }

    pub fn mul_int(&self, n: &BigInt) -> Self {
        Self::make(&self.a * n, &self.b * n, self.c.clone(), self.d.clone())
    }

    pub fn div_int(&self, n: &BigInt) -> Self {
        assert!(!n.is_zero(), "division by zero");
        Self::make(self.a.clone(), self.b.clone(), &self.c * n, self.d.clone())
    }

    pub fn recip(&self) -> Result<Self, FieldError> {
        if self.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        Ok(Self::one().div_ref(self))
    }

    pub fn square(&self) -> Self {
        self * self
    }

    /// Galois conjugate `(a - b*sqrt(d)) / c`.
    pub fn conjugate(&self) -> Self {
        Self::make(self.a.clone(), -&self.b, self.c.clone(), self.d.clone())
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

    fn add_ref(&self, o: &Self) -> Self {
        let d = join(&self.d, &o.d);
        if self.c == o.c {
            return Self::make(&self.a + &o.a, &self.b + &o.b, self.c.clone(), d);
        }
        Self::make(
            &self.a * &o.c + &o.a * &self.c,
            &self.b * &o.c + &o.b * &self.c,
            &self.c * &o.c,
            d,
        )
    }

    fn sub_ref(&self, o: &Self) -> Self {
        let d = join(&self.d, &o.d);
        if self.c == o.c {
            return Self::make(&self.a - &o.a, &self.b - &o.b, self.c.clone(), d);
        }
        Self::make(
            &self.a * &o.c - &o.a * &self.c,
            &self.b * &o.c - &o.b * &self.c,
            &self.c * &o.c,
            d,
        )
    }

    fn mul_ref(&self, o: &Self) -> Self {
        let d = join(&self.d, &o.d);
        let bb = &self.b * &o.b;
        let a = if bb.is_zero() {
            &self.a * &o.a
        } else {
            &self.a * &o.a + bb * d.as_deref().expect("radicand")
        };
        let b = &self.a * &o.b + &o.a * &self.b;
        Self::make(a, b, &self.c * &o.c, d)
    }

    fn div_ref(&self, o: &Self) -> Self {
        assert!(!o.is_zero(), "division by zero");
        let d = join(&self.d, &o.d);
        if o.b.is_zero() {
            return Self::make(&self.a * &o.c, &self.b * &o.c, &self.c * &o.a, d);
        }
        let dd = d.as_deref().expect("radicand");
        // x / y = x * conj(y) * c_y / (a_y^2 - b_y^2 d)
        let norm = &o.a * &o.a - &o.b * &o.b * dd;
        let a = (&self.a * &o.a - &self.b * &o.b * dd) * &o.c;
        let b = (&self.b * &o.a - &self.a * &o.b) * &o.c;
        Self::make(a, b, &self.c * norm, d)
    }

    /// Approximation as f64, correctly rounded up to one ulp.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.b.is_zero() {
            if let (Some(a), Some(c)) = (self.a.to_i64(), self.c.to_i64()) {
                if a.unsigned_abs() < (1 << 53) && c < (1 << 53) {
                    return a as f64 / c as f64;
                }
            }
        }
        // floor(x * 2^s) with s large enough to hold 64 significant bits.
        let mut s: i64 = 64;
        loop {
            let n = self.scaled_floor_pow2(s);
            let bits = n.bits() as i64;
            if bits >= 64 || s > 4000 {
                return scale_pow2(big_to_f64(&n), -s);
            }
            s += 64 - bits + 2;
        }
    }

    fn scaled_floor_pow2(&self, s: i64) -> BigInt {
        let scaled = if s >= 0 {
            self.mul_int(&(BigInt::one() << (s as usize)))
        } else {
            self.div_int(&(BigInt::one() << ((-s) as usize)))
        };
        scaled.floor()
    }

    /// Decimal approximation with `digits` significant digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let neg = self.is_negative();
        let x = self.abs();
        // Exponent estimate, then fix it exactly.
        let mut e = x.to_f64().log10().floor() as i64;
        let ten = BigInt::from(10);
        let pow10 = |k: i64| -> FieldElement {
            if k >= 0 {
                FieldElement::integer(num_traits::pow(ten.clone(), k as usize))
            } else {
                FieldElement::rational(1, num_traits::pow(ten.clone(), (-k) as usize))
            }
        };
        loop {
            if x < pow10(e) {
                e -= 1;
            } else if x >= pow10(e + 1) {
                e += 1;
            } else {
                break;
            }
        }
        let shift = digits as i64 - 1 - e;
        // round half up
        let scaled = &x * &pow10(shift) + FieldElement::rational(1, 2);
        let mut n = scaled.floor();
        if n.to_string().len() > digits {
            n /= &ten;
            e += 1;
        }
        let ds = n.to_string();
        let body = if (-5..digits as i64).contains(&e) {
            if e >= 0 {
                let (int, frac) = ds.split_at((e + 1) as usize);
                let frac = frac.trim_end_matches('0');
                if frac.is_empty() {
                    int.to_string()
                } else {
                    format!("{int}.{frac}")
                }
            } else {
                let zeros = "0".repeat((-e - 1) as usize);
                format!("0.{zeros}{}", ds.trim_end_matches('0'))
            }
        } else {
            let (h, t) = ds.split_at(1);
            let t = t.trim_end_matches('0');
            if t.is_empty() {
                format!("{h}e{e}")
            } else {
                format!("{h}.{t}e{e}")
            }
        };
        if neg {
            format!("-{body}")
        } else {
            body
        }
    }

    /// The 17-significant-digit decimal used in reports.
    pub fn decimal17(&self) -> String {
        self.to_decimal(17)
    }

    /// Exact string form `(a+b*sqrt(d))/c`.
    pub fn exact_string(&self) -> String {
        self.to_string()
    }
}

fn scale_pow2(mut v: f64, mut e: i64) -> f64 {
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
    }
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    v * 2f64.powi(e as i32)
}

fn big_to_f64(n: &BigInt) -> f64 {
    // n has about 64 significant bits here; to_f64 rounds correctly.
    n.to_f64().unwrap_or(f64::NAN)
}

impl PartialEq for FieldElement {
    fn eq(&self, other: &Self) -> bool {
        if self.a != other.a || self.b != other.b || self.c != other.c {
            return false;
        }
        self.b.is_zero() || self.compatible(other)
    }
}

impl Eq for FieldElement {}

impl PartialOrd for FieldElement {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FieldElement {
    fn cmp(&self, o: &Self) -> Ordering {
        if self.c == o.c {
            if self.b == o.b {
                return self.a.cmp(&o.a);
            }
            let d = join(&self.d, &o.d);
            return sign_of(&(&self.a - &o.a), &(&self.b - &o.b), d.as_deref());
        }
        let d = join(&self.d, &o.d);
        sign_of(
            &(&self.a * &o.c - &o.a * &self.c),
            &(&self.b * &o.c - &o.b * &self.c),
            d.as_deref(),
        )
    }
}

impl std::hash::Hash for FieldElement {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.a.hash(state);
        self.b.hash(state);
        self.c.hash(state);
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $imp:ident) => {
        impl<'a> $tr<&'a FieldElement> for &'a FieldElement {
            type Output = FieldElement;
            fn $m(self, o: &'a FieldElement) -> FieldElement {
                self.$imp(o)
            }
        }
        impl $tr<FieldElement> for FieldElement {
            type Output = FieldElement;
            fn $m(self, o: FieldElement) -> FieldElement {
                self.$imp(&o)
            }
        }
        impl<'a> $tr<&'a FieldElement> for FieldElement {
            type Output = FieldElement;
            fn $m(self, o: &'a FieldElement) -> FieldElement {
                self.$imp(o)
            }
        }
        impl<'a> $tr<FieldElement> for &'a FieldElement {
            type Output = FieldElement;
            fn $m(self, o: FieldElement) -> FieldElement {
                self.$imp(&o)
            }
        }
    };
}

binop!(Add, add, add_ref);
binop!(Sub, sub, sub_ref);
binop!(Mul, mul, mul_ref);
binop!(Div, div, div_ref);

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        FieldElement {
            a: -&self.a,
            b: -&self.b,
            c: self.c.clone(),
            d: self.d.clone(),
        }
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        -&self
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.d {
            None => {
                if self.c.is_one() {
                    write!(f, "{}", self.a)
                } else {
                    write!(f, "{}/{}", self.a, self.c)
                }
            }
            Some(d) => {
                let sign = if self.b.is_negative() { '-' } else { '+' };
                write!(f, "({}{}{}*sqrt({}))/{}", self.a, sign, self.b.abs(), d, self.c)
            }
        }
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [~{}]", self, self.to_decimal(10))
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.s[self.pos..].starts_with(w.as_bytes()) {
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    /// Unsigned integer or decimal literal as a rational.
    fn number(&mut self) -> Option<BigRational> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9') | Some(b'.')) {
            self.pos += 1;
        }
        let lit = std::str::from_utf8(&self.s[start..self.pos]).ok()?;
        if lit.is_empty() {
            return None;
        }
        parse_decimal(lit)
    }

    fn integer(&mut self) -> Option<BigInt> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).ok()?.parse().ok()
    }

    /// One signed term: number, number*sqrt(n), or sqrt(n).
    fn term(&mut self) -> Option<(BigRational, BigRational, Option<BigInt>)> {
        let neg = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        let sgn = |r: BigRational| if neg { -r } else { r };
        if self.eat_word("sqrt(") {
            let d = self.integer()?;
            if !self.eat(b')') {
                return None;
            }
            return Some((BigRational::zero(), sgn(BigRational::one()), Some(d)));
        }
        let n = self.number()?;
        if self.eat(b'*') {
            if !self.eat_word("sqrt(") {
                return None;
            }
            let d = self.integer()?;
            if !self.eat(b')') {
                return None;
            }
            return Some((BigRational::zero(), sgn(n), Some(d)));
        }
        Some((sgn(n), BigRational::zero(), None))
    }

    /// Sum of terms, with an optional outer parenthesis and `/den`.
    fn expr(&mut self) -> Option<(BigRational, BigRational, Option<BigInt>)> {
        let paren = self.eat(b'(');
        let mut ra = BigRational::zero();
        let mut rb = BigRational::zero();
        let mut d: Option<BigInt> = None;
        loop {
            let (ta, tb, td) = self.term()?;
            ra += ta;
            rb += tb;
            if let Some(td) = td {
                if let Some(d0) = &d {
                    if *d0 != td {
                        return None;
                    }
                }
                d = Some(td);
            }
            match self.peek() {
                Some(b'+') | Some(b'-') => continue,
                _ => break,
            }
        }
        if paren && !self.eat(b')') {
            return None;
        }
        if self.eat(b'/') {
            let den = self.number()?;
            if den.is_zero() {
                return None;
            }
            ra /= den.clone();
            rb /= den;
        }
        Some((ra, rb, d))
    }
}

fn parse_decimal(lit: &str) -> Option<BigRational> {
    let (int, frac) = match lit.split_once('.') {
        Some((i, f)) => (i, f),
        None => (lit, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits = format!("{int}{frac}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Some(BigRational::new(n, den))
}

impl FromStr for FieldElement {
    type Err = FieldError;

    /// Accepts `(a+b*sqrt(d))/c`, `a+b*sqrt(d)`, `sqrt(d)`, `p/q`, integers and
    /// finite decimals such as `0.7` (read exactly as 7/10).
    fn from_str(s: &str) -> Result<Self, FieldError> {
        let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let err = || FieldError::Parse(s.to_string());
        let mut p = Parser { s: cleaned.as_bytes(), pos: 0 };
        let (ra, rb, d) = p.expr().ok_or_else(err)?;
        if p.pos != cleaned.len() {
            return Err(err());
        }
        let rat = FieldElement::from_ratio(&ra);
        match d {
            None => Ok(rat),
            Some(d) => {
                if d <= BigInt::one() || is_square(&d) {
                    return Err(FieldError::BadRadicand(d));
                }
                let unit = FieldElement::sqrt_of(&d)?;
                Ok(rat.in_field_of(&unit)? + FieldElement::from_ratio(&rb) * unit)
            }
        }
    }
}

impl serde::Serialize for FieldElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(s: &str) -> FieldElement {
        s.parse().unwrap()
    }

    fn golden() -> FieldElement {
        fe("(-1+1*sqrt(5))/2")
    }

    #[test]
    fn canonical_form_and_equality() {
        let x = FieldElement::from_i64s(2, 4, 6, 5).unwrap();
        assert_eq!(x.to_string(), "(1+2*sqrt(5))/3");
        let y = FieldElement::from_i64s(-2, -4, -6, 5).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn rejects_bad_radicands() {
        assert!(FieldElement::from_i64s(0, 1, 1, 4).is_err());
        assert!(FieldElement::from_i64s(0, 1, 1, 1).is_err());
        assert!(FieldElement::from_i64s(0, 1, 0, 5).is_err());
        assert!("sqrt(9)".parse::<FieldElement>().is_err());
    }

    #[test]
    fn golden_identities() {
        let g = golden();
        // g^2 + g = 1
        assert_eq!(&g * &g + &g, FieldElement::one());
        assert_eq!(g.recip().unwrap(), &g + &FieldElement::one());
        assert_eq!(g.floor(), BigInt::zero());
        assert_eq!((-&g).floor(), BigInt::from(-1));
    }

    #[test]
    fn sign_needs_no_floats() {
        // 8*sqrt(5) = 17.88854381999832...
        let a = fe("(-1788854382+800000000*sqrt(5))/100000000");
        assert!(a.is_negative());
        let b = fe("(-1788854381+800000000*sqrt(5))/100000000");
        assert!(b.is_positive());
    }

    #[test]
    fn floor_matches_floats_on_a_grid() {
        for a in -30i64..30 {
            for b in [-7i64, -3, -1, 1, 2, 5] {
                for c in [1i64, 2, 3, 7] {
                    let x = FieldElement::from_i64s(a, b, c, 7).unwrap();
                    let f = ((a as f64 + b as f64 * 7f64.sqrt()) / c as f64).floor();
                    assert_eq!(x.floor(), BigInt::from(f as i64), "{x}");
                }
            }
        }
    }

    #[test]
    fn parse_and_print_roundtrip() {
        for s in ["(3-1*sqrt(5))/2", "(0+1*sqrt(2))/1", "7/10", "-4", "(-8+4*sqrt(5))/1"] {
            assert_eq!(fe(s).to_string(), s);
        }
        assert_eq!(fe("0.7"), FieldElement::rational(7, 10));
        assert_eq!(fe("4*sqrt(5)-8"), fe("(-8+4*sqrt(5))/1"));
        assert_eq!(fe("sqrt(2) - 1"), fe("(-1+1*sqrt(2))/1"));
        assert!("(1+sqrt(2)+sqrt(3))".parse::<FieldElement>().is_err());
        assert!("abc".parse::<FieldElement>().is_err());
    }

    #[test]
    fn decimals() {
        assert_eq!(golden().decimal17(), "0.61803398874989485");
        assert_eq!(fe("9-4*sqrt(5)").decimal17(), "0.055728090000841214");
        assert_eq!(FieldElement::rational(1, 3).to_decimal(5), "0.33333");
        assert_eq!(FieldElement::rational(-2, 3).to_decimal(3), "-0.667");
        assert_eq!(FieldElement::integer(1000).to_decimal(4), "1000");
        assert_eq!(FieldElement::rational(1, 10_000_000).to_decimal(3), "1e-7");
    }

    #[test]
    fn to_f64_is_accurate() {
        let g = golden();
        assert_eq!(g.to_f64(), (5f64.sqrt() - 1.0) / 2.0);
        let tiny = fe("9-4*sqrt(5)").mul_int(&BigInt::from(3));
        assert!((tiny.to_f64() - 0.16718427000252361).abs() < 1e-16);
        // a number of size 1e-30 built by cancellation
        let mut p = g.clone();
        for _ in 0..60 {
            p = &p * &g;
        }
        let expect = ((5f64.sqrt() - 1.0) / 2.0).powi(61);
        assert!((p.to_f64() / expect - 1.0).abs() < 1e-14);
    }

    #[test]
    #[should_panic]
    fn mixing_fields_panics() {
        let _ = fe("sqrt(2)") + fe("sqrt(3)");
    }

    #[test]
    fn rationals_adopt_the_field() {
        let x = FieldElement::rational(1, 2) + golden();
        assert_eq!(x.radicand(), Some(&BigInt::from(5)));
        assert!(FieldElement::rational(1, 2).compatible(&fe("sqrt(3)")));
    }

    #[test]
    fn square_part_splits() {
        assert_eq!(square_part(&BigInt::from(72)), (BigInt::from(6), BigInt::from(2)));
        assert_eq!(square_part(&BigInt::from(85)), (BigInt::from(1), BigInt::from(85)));
        let big = BigInt::from(1_000_003u64) * BigInt::from(1_000_003u64) * BigInt::from(7);
        assert_eq!(square_part(&big), (BigInt::from(1_000_003u64), BigInt::from(7)));
    }
}
