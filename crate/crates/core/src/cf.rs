//! Continued fractions of numbers in (0, 1): Gauss-map digits, convergents,
//! the norms `|q_k α - p_k|`, and Ostrowski numeration.
//!
//! Indexing: `a_0 = 0`, stored digits are `a_1, a_2, ...`, and
//! `(q_{-1}, q_0) = (0, 1)`, `(p_{-1}, p_0) = (1, 0)`.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};

use crate::field::{FieldElement, FieldError};

pub const DEFAULT_DEPTH: usize = 60;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CfError {
    #[error("alpha must lie strictly between 0 and 1")]
    OutOfRange,
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("empty digit sequence")]
    Empty,
    #[error("empty period")]
    EmptyPeriod,
    #[error("digits must be positive")]
    ZeroDigit,
    #[error("digit does not fit in 64 bits")]
    DigitOverflow,
    #[error("inadmissible Ostrowski digits at position {0}")]
    Inadmissible(usize),
    #[error("expansion too short: need {need} digits, have {have}")]
    TooShort { need: usize, have: usize },
    #[error("x must lie in [0, 1)")]
    PointOutOfRange,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Digits `a_1..a_K` from exact Gauss-map iteration, and whether the
/// expansion terminated (rational input).
pub fn cf_expand(alpha: &FieldElement, depth: usize) -> Result<(Vec<u64>, bool), CfError> {
    if depth == 0 {
        return Err(CfError::ZeroDepth);
    }
    let zero = FieldElement::zero();
    if *alpha <= zero || *alpha >= FieldElement::one() {
        return Err(CfError::OutOfRange);
    }
    let mut x = alpha.clone();
    let mut digits = Vec::with_capacity(depth);
    while digits.len() < depth {
        if x.is_zero() {
            return Ok((digits, true));
        }
        let inv = x.recip()?;
        let a = inv.floor();
        digits.push(a.to_u64().ok_or(CfError::DigitOverflow)?);
        x = inv.sub_int(&a);
    }
    Ok((digits, x.is_zero()))
}

/// Convergent numerators and denominators `p_k, q_k` for `k = 0..=K`.
pub fn convergents(digits: &[u64]) -> Result<Vec<(BigInt, BigInt)>, CfError> {
    if digits.is_empty() {
        return Err(CfError::Empty);
    }
    let mut out = Vec::with_capacity(digits.len() + 1);
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p, mut q) = (BigInt::zero(), BigInt::one());
    out.push((p.clone(), q.clone()));
    for &a in digits {
        let a = BigInt::from(a);
        let p_next = &a * &p + &p_prev;
        let q_next = &a * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, p_next);
        q_prev = std::mem::replace(&mut q, q_next);
        out.push((p.clone(), q.clone()));
    }
    Ok(out)
}

/// The number in (0, 1) whose expansion is `pre` followed by `period` repeated.
pub fn cf_from_periodic(pre: &[u64], period: &[u64]) -> Result<FieldElement, CfError> {
    if period.is_empty() {
        return Err(CfError::EmptyPeriod);
    }
    if pre.iter().chain(period).any(|&a| a == 0) {
        return Err(CfError::ZeroDigit);
    }
    // y = [0; c_1, ..., c_P + y] = (P_P + y P_{P-1}) / (Q_P + y Q_{P-1})
    let cv = convergents(period)?;
    let n = period.len();
    let (pp, qp) = &cv[n];
    let (pp1, qp1) = &cv[n - 1];
    let b = qp - pp1;
    let disc = &b * &b + BigInt::from(4) * qp1 * pp;
    let y = FieldElement::with_sqrt_of(-b, &disc, BigInt::from(2) * qp1)?;
    if pre.is_empty() {
        return Ok(y);
    }
    let cv = convergents(pre)?;
    let s = pre.len();
    let (ps, qs) = &cv[s];
    let (ps1, qs1) = &cv[s - 1];
    let num = y.mul_int(ps1).add_int(ps);
    let den = y.mul_int(qs1).add_int(qs);
    Ok(num / den)
}

/// Continued-fraction data of a fixed `alpha`, immutable after construction.
#[derive(Clone, Debug)]
pub struct ContinuedFraction {
    alpha: FieldElement,
    digits: Vec<u64>,
    terminated: bool,
    p: Vec<BigInt>,
    q: Vec<BigInt>,
    /// `q_k α - p_k` for `k = 0..=K`.
    signed: Vec<FieldElement>,
}

impl ContinuedFraction {
    pub fn new(alpha: FieldElement, depth: usize) -> Result<Self, CfError> {
        let (digits, terminated) = cf_expand(&alpha, depth)?;
        Self::from_digits(alpha, digits, terminated)
    }

    fn from_digits(alpha: FieldElement, digits: Vec<u64>, terminated: bool) -> Result<Self, CfError> {
        let cv = convergents(&digits)?;
        let mut p = Vec::with_capacity(cv.len());
        let mut q = Vec::with_capacity(cv.len());
        let mut signed = Vec::with_capacity(cv.len());
        for (pk, qk) in cv {
            signed.push(alpha.mul_int(&qk).sub_int(&pk));
            p.push(pk);
            q.push(qk);
        }
        Ok(ContinuedFraction { alpha, digits, terminated, p, q, signed })
    }

    pub fn golden(depth: usize) -> Self {
        Self::periodic(&[], &[1], depth).expect("golden mean")
    }

    pub fn periodic(pre: &[u64], period: &[u64], depth: usize) -> Result<Self, CfError> {
        Self::new(cf_from_periodic(pre, period)?, depth)
    }

    pub fn alpha(&self) -> &FieldElement {
        &self.alpha
    }

    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    pub fn is_rational(&self) -> bool {
        self.alpha.is_rational()
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    /// Number of digits `K`; convergents exist for `k = 0..=K`.
    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    /// `a_i` for `i >= 1`; `a_0 = 0`.
    pub fn a(&self, i: usize) -> u64 {
        if i == 0 {
            0
        } else {
            self.digits[i - 1]
        }
    }

    pub fn q(&self, k: usize) -> &BigInt {
        &self.q[k]
    }

    pub fn p(&self, k: usize) -> &BigInt {
        &self.p[k]
    }

    /// `q_k` as u64, for indices used as iteration counts.
    pub fn q_u64(&self, k: usize) -> u64 {
        self.q[k].to_u64().expect("q_k exceeds u64")
    }

    /// Largest `k` with `q_k` computed.
    pub fn max_index(&self) -> usize {
        self.q.len() - 1
    }

    /// `β_k = |q_k α - p_k|`, with `β_{-1} = 1` available as `beta_m1`.
    pub fn beta(&self, k: usize) -> FieldElement {
        self.signed[k].abs()
    }

    pub fn beta_m1(&self) -> FieldElement {
        FieldElement::one()
    }

    /// `β_{k-1}` allowing `k = 0`.
    pub fn beta_prev(&self, k: usize) -> FieldElement {
        if k == 0 {
            self.beta_m1()
        } else {
            self.beta(k - 1)
        }
    }

    /// `⟨⟨q_k α⟩⟩ = q_k α - p_k = (-1)^k β_k`.
    pub fn signed_norm(&self, k: usize) -> &FieldElement {
        &self.signed[k]
    }

    /// Index `k` with `q_k <= n < q_{k+1}`; `None` if `n` is past the table.
    pub fn bracket(&self, n: &BigInt) -> Option<usize> {
        (0..self.max_index()).rev().find(|&k| self.q[k] <= *n && *n < self.q[k + 1])
    }

    /// `1/(q_{k+1}+q_k) < β_k < 1/(a_{k+1} q_k)`, exact; needs `k < K`.
    pub fn sandwich(&self, k: usize) -> (bool, bool) {
        let b = self.beta(k);
        let lower = FieldElement::rational(1, &self.q[k + 1] + &self.q[k]);
        let upper = FieldElement::rational(1, BigInt::from(self.a(k + 1)) * &self.q[k]);
        (lower < b, b < upper)
    }

    /// Gauss-map iterate `x_k = G^k(α)`; `β_k = x_0 x_1 ... x_k`.
    pub fn gauss_iterate(&self, k: usize) -> FieldElement {
        if k == 0 {
            self.alpha.clone()
        } else {
            &self.beta(k) / &self.beta(k - 1)
        }
    }

    /// `Σ_{i<=k} a_i / q_k`, exact.
    pub fn digit_sum_ratio(&self, k: usize) -> FieldElement {
        let s: u64 = (1..=k).map(|i| self.a(i)).sum();
        FieldElement::rational(s, self.q[k].clone())
    }

    fn require(&self, need: usize) -> Result<(), CfError> {
        if self.depth() < need {
            Err(CfError::TooShort { need, have: self.depth() })
        } else {
            Ok(())
        }
    }

    /// Ostrowski digits `b_1..b_{K+1}` of `x ∈ [0,1)`, so the expansion runs
    /// through the term `⟨⟨q_K α⟩⟩`; the truncation error is at most `β_K`.
    pub fn ostrowski_encode(&self, x: &FieldElement, k_max: usize) -> Result<OstrowskiCode, CfError> {
        if x.is_negative() || *x >= FieldElement::one() {
            return Err(CfError::PointOutOfRange);
        }
        self.require(k_max + 1)?;
        let mut r = x.clone();
        let mut restricted = false;
        let mut digits = Vec::with_capacity(k_max + 1);
        for j in 1..=k_max + 1 {
            let cap = if restricted { self.a(j) - 1 } else { self.a(j) };
            let theta = &self.signed[j - 1];
            let mut chosen = None;
            for b in (0..=cap).rev() {
                let next = &r - &theta.mul_int(&BigInt::from(b));
                let (lo, hi) = self.tail_window(j + 1, b > 0);
                if lo <= next && next < hi {
                    chosen = Some((b, next));
                    break;
                }
            }
            let (b, next) = chosen.ok_or(CfError::Inadmissible(j))?;
            digits.push(b);
            r = next;
            restricted = b > 0;
        }
        Ok(OstrowskiCode { digits })
    }

    /// Range `[lo, hi)` of tails `Σ_{i>=j} b_i ⟨⟨q_{i-1}α⟩⟩`; `restricted`
    /// means `b_j <= a_j - 1` because the previous digit is nonzero.
    fn tail_window(&self, j: usize, restricted: bool) -> (FieldElement, FieldElement) {
        let near = self.beta(j - 1);
        let far = if j >= 2 { self.beta(j - 2) } else { self.beta_m1() };
        let far = if restricted { &far - &near } else { far };
        if j % 2 == 1 {
            // positive weight at position j
            (-near, far)
        } else {
            (-far, near)
        }
    }

    /// Checks `b_i <= a_i` and that a full digit is preceded by a zero.
    pub fn is_admissible(&self, code: &OstrowskiCode) -> Result<(), CfError> {
        self.require(code.digits.len())?;
        for (idx, &b) in code.digits.iter().enumerate() {
            let i = idx + 1;
            if b > self.a(i) {
                return Err(CfError::Inadmissible(i));
            }
            if b == self.a(i) && i >= 2 && code.digits[idx - 1] != 0 {
                return Err(CfError::Inadmissible(i));
            }
        }
        Ok(())
    }

    /// `Σ b_i ⟨⟨q_{i-1} α⟩⟩`, exact.
    pub fn ostrowski_decode(&self, code: &OstrowskiCode) -> Result<FieldElement, CfError> {
        self.is_admissible(code)?;
        Ok(self.ostrowski_sum(&code.digits))
    }

    /// The sum without any admissibility check.
    pub fn ostrowski_sum(&self, digits: &[u64]) -> FieldElement {
        let mut s = FieldElement::zero();
        for (idx, &b) in digits.iter().enumerate() {
            if b != 0 {
                s = s + self.signed[idx].mul_int(&BigInt::from(b));
            }
        }
        s
    }

    /// Infinite Ostrowski sum with digits `prefix` followed by `period`
    /// repeated forever. Requires the digits of α to be periodic with the
    /// same period length from position `prefix.len() + 1` on; the tail is
    /// then a geometric series with ratio `±Π x_i` over one period.
    pub fn ostrowski_sum_periodic(&self, prefix: &[u64], period: &[u64]) -> Result<FieldElement, CfError> {
        let s = prefix.len();
        let p = period.len();
        if p == 0 {
            return Err(CfError::EmptyPeriod);
        }
        self.require(s + 2 * p + 1)?;
        for i in s + 1..=s + p {
            if self.a(i) != self.a(i + p) {
                return Err(CfError::Inadmissible(i));
            }
        }
        let head = self.ostrowski_sum(prefix);
        let mut block = FieldElement::zero();
        for (t, &b) in period.iter().enumerate() {
            let j = s + 1 + t;
            if b != 0 {
                block = block + self.signed[j - 1].mul_int(&BigInt::from(b));
            }
        }
        // θ_{k+P} = ρ θ_k for k >= s, ρ = θ_{s+P} / θ_s.
        let rho = &self.signed[s + p] / &self.signed[s];
        Ok(head + block / (FieldElement::one() - rho))
    }
}

/// Ostrowski digits `b_1, b_2, ...`.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct OstrowskiCode {
    pub digits: Vec<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fe(s: &str) -> FieldElement {
        s.parse().unwrap()
    }

    #[test]
    fn expansions() {
        assert_eq!(cf_expand(&fe("(-1+sqrt(5))/2"), 6).unwrap(), (vec![1; 6], false));
        assert_eq!(cf_expand(&fe("sqrt(2)-1"), 4).unwrap(), (vec![2; 4], false));
        assert_eq!(cf_expand(&fe("7/10"), 10).unwrap(), (vec![1, 2, 3], true));
        assert_eq!(cf_expand(&fe("3/2"), 3), Err(CfError::OutOfRange));
        assert_eq!(cf_expand(&fe("0"), 3), Err(CfError::OutOfRange));
    }

    #[test]
    fn golden_convergents_and_norms() {
        let cf = ContinuedFraction::golden(DEFAULT_DEPTH);
        let qs: Vec<i64> = (0..=5).map(|k| cf.q(k).to_i64().unwrap()).collect();
        assert_eq!(qs, vec![1, 1, 2, 3, 5, 8]);
        assert_eq!(cf.beta(5), fe("9-4*sqrt(5)"));
        assert_eq!(cf.beta(0), fe("(-1+sqrt(5))/2"));
        assert_eq!(cf.beta(3).decimal17(), "0.14589803375031546");
        assert_eq!(cf.sandwich(3), (true, true));
        for k in 0..=cf.max_index() {
            let sign = if k % 2 == 0 { cf.beta(k) } else { -cf.beta(k) };
            assert_eq!(*cf.signed_norm(k), sign);
        }
    }

    #[test]
    fn beta_recurrence_and_gauss_product() {
        for cf in [ContinuedFraction::golden(40), ContinuedFraction::periodic(&[3], &[1, 4, 2], 40).unwrap()] {
            for k in 1..cf.depth() {
                let rhs = &cf.beta(k - 1) - &cf.beta(k).mul_int(&BigInt::from(cf.a(k + 1)));
                assert_eq!(cf.beta(k + 1), rhs);
                assert!(cf.beta(k + 1) < cf.beta(k));
            }
            let mut prod = FieldElement::one();
            for k in 0..10 {
                prod = prod * cf.gauss_iterate(k);
                assert_eq!(prod, cf.beta(k));
            }
        }
    }

    #[test]
    fn periodic_construction() {
        assert_eq!(cf_from_periodic(&[], &[1]).unwrap(), fe("(-1+sqrt(5))/2"));
        assert_eq!(cf_from_periodic(&[], &[2]).unwrap(), fe("sqrt(2)-1"));
        assert_eq!(cf_from_periodic(&[], &[9]).unwrap(), fe("(-9+sqrt(85))/2"));
        let period = [20, 20, 8, 20, 20, 8, 20, 20];
        let x = cf_from_periodic(&[1, 1], &period).unwrap();
        let (digits, _) = cf_expand(&x, 34).unwrap();
        let expect: Vec<u64> = [1, 1].iter().chain(period.iter().cycle().take(32)).copied().collect();
        assert_eq!(digits, expect);
        assert_eq!(cf_from_periodic(&[], &[]), Err(CfError::EmptyPeriod));
    }

    #[test]
    fn ostrowski_basics() {
        let cf = ContinuedFraction::golden(40);
        let one = OstrowskiCode { digits: vec![1, 0, 0, 0] };
        assert_eq!(cf.ostrowski_decode(&one).unwrap(), *cf.alpha());
        let zero = cf.ostrowski_encode(&FieldElement::zero(), 10).unwrap();
        assert!(zero.digits.iter().all(|&b| b == 0));
        let bad = OstrowskiCode { digits: vec![1, 1] };
        assert_eq!(cf.ostrowski_decode(&bad), Err(CfError::Inadmissible(2)));
    }

    #[test]
    fn ostrowski_roundtrip_non_golden() {
        // a = (2,2,...): 0.7 sits in a gap of the forward-full rule
        let cf = ContinuedFraction::periodic(&[], &[2], 40).unwrap();
        for num in 0..50 {
            let x = FieldElement::rational(num, 50);
            let code = cf.ostrowski_encode(&x, 20).unwrap();
            let y = cf.ostrowski_decode(&code).unwrap();
            assert!((&x - &y).abs() <= cf.beta(20));
        }
    }

    #[test]
    fn periodic_sum_matches_long_truncation() {
        let cf = ContinuedFraction::periodic(&[], &[5, 3], 80).unwrap();
        let exact = cf.ostrowski_sum_periodic(&[1], &[0, 2]).unwrap();
        let mut digits = vec![1];
        for _ in 0..35 {
            digits.extend([0, 2]);
        }
        let approx = cf.ostrowski_sum(&digits);
        assert!((&exact - &approx).abs() <= cf.beta(70));
    }

    #[test]
    fn digit_sum_ratio_trend() {
        let cf = ContinuedFraction::golden(20);
        for k in 3..15 {
            assert!(cf.digit_sum_ratio(k + 1) < cf.digit_sum_ratio(k));
        }
        assert_eq!(cf.digit_sum_ratio(10), FieldElement::rational(10, 89));
    }
}
