//! The Möbius function, correlation sums `(1/N) Σ μ(n) f(T^n x)`, the
//! variance of the truncated prime-divisor count `ω_P(n)`, and the
//! dyadic bilinear decomposition used to bound Möbius sums by correlations
//! of distinct powers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MobiusError {
    #[error("table size must be at least 1")]
    EmptyTable,
    #[error("{samples} samples but the table only reaches {table}")]
    LengthMismatch { samples: usize, table: usize },
    #[error("prime cutoff must be at least 2")]
    BadCutoff,
}

/// `μ(1..=N)` together with the primes up to `N`.
#[derive(Debug, Clone)]
pub struct MobiusTable {
    mu: Vec<i8>,
    primes: Vec<u32>,
}

/// Linear sieve.
pub fn mobius_sieve(n: usize) -> Result<MobiusTable, MobiusError> {
    if n == 0 {
        return Err(MobiusError::EmptyTable);
    }
    let mut mu = vec![0i8; n + 1];
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    mu[1] = 1;
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u32);
            mu[i] = -1;
        }
        for &p in &primes {
            let p = p as usize;
            let ip = i * p;
            if ip > n {
                break;
            }
            composite[ip] = true;
            if i % p == 0 {
                mu[ip] = 0;
                break;
            }
            mu[ip] = -mu[i];
        }
    }
    Ok(MobiusTable { mu, primes })
}

/// `μ(n)` by trial division; the oracle for the sieve.
pub fn mobius_trial(mut n: u64) -> i8 {
    assert!(n >= 1);
    let mut sign = 1i8;
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            sign = -sign;
        }
        p += 1;
    }
    if n > 1 {
        sign = -sign;
    }
    sign
}

impl MobiusTable {
    pub fn len(&self) -> usize {
        self.mu.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mu(&self, n: usize) -> i8 {
        assert!(n >= 1, "μ(0) is undefined");
        self.mu[n]
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    pub fn primes_up_to(&self, p: usize) -> &[u32] {
        let k = self.primes.partition_point(|&q| q as usize <= p);
        &self.primes[..k]
    }

    /// `M(n) = Σ_{k<=n} μ(k)`.
    pub fn mertens(&self, n: usize) -> i64 {
        self.mu[1..=n].iter().map(|&v| v as i64).sum()
    }
}

/// Compensated running sum (Neumaier).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub n: usize,
    pub partial_sum: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    pub n: usize,
    pub value: f64,
    pub checkpoints: Vec<Checkpoint>,
}

/// `(1/N) Σ_{n=1}^{N} μ(n) f_n` where `samples[n-1] = f(T^n x)`, with the
/// partial sums at every power of ten and at `N`.
pub fn correlation_sum(samples: &[f64], table: &MobiusTable) -> Result<Correlation, MobiusError> {
    let n = samples.len();
    if n > table.len() {
        return Err(MobiusError::LengthMismatch { samples: n, table: table.len() });
    }
    let mut acc = CompensatedSum::default();
    let mut checkpoints = Vec::new();
    let mut next = 1usize;
    for (i, &f) in samples.iter().enumerate() {
        let k = i + 1;
        acc.add(table.mu[k] as f64 * f);
        if k == next || k == n {
            let s = acc.value();
            checkpoints.push(Checkpoint { n: k, partial_sum: s, normalized: s / k as f64 });
            if k == next {
                next = next.saturating_mul(10);
            }
        }
    }
    let value = if n == 0 { 0.0 } else { acc.value() / n as f64 };
    Ok(Correlation { n, value, checkpoints })
}

/// Exact version for rational-valued `f`.
pub fn correlation_sum_exact(samples: &[BigRational], table: &MobiusTable) -> Result<BigRational, MobiusError> {
    let n = samples.len();
    if n > table.len() {
        return Err(MobiusError::LengthMismatch { samples: n, table: table.len() });
    }
    if n == 0 {
        return Ok(BigRational::zero());
    }
    let mut s = BigRational::zero();
    for (i, f) in samples.iter().enumerate() {
        match table.mu[i + 1] {
            1 => s += f,
            -1 => s -= f,
            _ => {}
        }
    }
    Ok(s / BigRational::from_integer(BigInt::from(n)))
}

/// `ω_P(n)`, the number of distinct primes `p <= P` dividing `n`.
pub fn omega_truncated(n: u64, cutoff: u64) -> u32 {
    let mut c = 0;
    let mut p = 2;
    while p <= cutoff && p <= n {
        if n.is_multiple_of(p) && mobius_trial(p) == -1 {
            c += 1;
        }
        p += 1;
    }
    c
}

/// Prime cutoff `⌊e^{1/τ}⌋`.
pub fn cutoff_for_tau(tau: f64) -> u64 {
    (1.0 / tau).exp().floor() as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TkStats {
    pub n: u64,
    pub cutoff: u64,
    pub prime_count: u64,
    /// `Σ_{p<=P} 1/p`
    pub mean: BigRational,
    /// `Σ_{n<=N} (ω_P(n) - mean)²`
    pub variance: BigRational,
    /// `Σ_{p,q<=P} ⌊N/pq⌋ - N mean² + N mean + 2 mean π(P)`
    pub bound: BigRational,
}

impl TkStats {
    pub fn holds(&self) -> bool {
        self.variance <= self.bound
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "N": self.n,
            "P": self.cutoff,
            "prime_count": self.prime_count,
            "mean_exact": self.mean.to_string(),
            "mean_decimal": ratio_f64(&self.mean),
            "variance_exact": self.variance.to_string(),
            "variance_decimal": ratio_f64(&self.variance),
            "bound_exact": self.bound.to_string(),
            "bound_decimal": ratio_f64(&self.bound),
            "holds": self.holds(),
        })
    }
}

pub fn ratio_f64(r: &BigRational) -> f64 {
    // numerator and denominator may exceed f64 range individually
    let shift = r.denom().bits().saturating_sub(1000) as i64;
    let num = r.numer() >> (shift.max(0) as usize);
    let den = r.denom() >> (shift.max(0) as usize);
    num.to_f64().unwrap_or(f64::NAN) / den.to_f64().unwrap_or(f64::NAN)
}

/// Exact variance of `ω_P` over `n <= N` and the bound it is compared with.
pub fn tk_stats(n: u64, cutoff: u64) -> Result<TkStats, MobiusError> {
    if cutoff < 2 {
        return Err(MobiusError::BadCutoff);
    }
    let primes: Vec<u64> = mobius_sieve(cutoff as usize)?.primes().iter().map(|&p| p as u64).collect();
    let mut mean = BigRational::zero();
    for &p in &primes {
        mean += BigRational::new(BigInt::one(), BigInt::from(p));
    }
    // Σ ω and Σ ω² by counting multiples
    let mut omega = vec![0u8; n as usize + 1];
    for &p in &primes {
        let mut m = p;
        while m <= n {
            omega[m as usize] += 1;
            m += p;
        }
    }
    let (mut s1, mut s2) = (0u128, 0u128);
    for &w in &omega[1..] {
        s1 += w as u128;
        s2 += (w as u128) * (w as u128);
    }
    let nn = BigRational::from_integer(BigInt::from(n));
    let two = BigRational::from_integer(BigInt::from(2));
    let variance = BigRational::from_integer(BigInt::from(s2)) - &two * &mean * BigRational::from_integer(BigInt::from(s1))
        + &nn * &mean * &mean;
    let mut pair_sum = BigInt::zero();
    for &p in &primes {
        for &q in &primes {
            pair_sum += BigInt::from(n / (p * q));
        }
    }
    let pi = BigRational::from_integer(BigInt::from(primes.len()));
    let bound = BigRational::from_integer(pair_sum) - &nn * &mean * &mean + &nn * &mean + &two * &mean * pi;
    Ok(TkStats { n, cutoff, prime_count: primes.len() as u64, mean, variance, bound })
}

/// One dyadic block `2^j <= k < 2^{j+1}` of the bilinear decomposition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicBlock {
    pub j: u32,
    /// `Σ_k |μ(k)| |Σ_{p <= min(P, N/k)} μ(p) f(pk)|`
    pub block_sum: f64,
    /// `Σ_{p1 = p2} |Σ_m f(p1 m) f(p2 m)|`
    pub diagonal: f64,
    /// the same over `p1 != p2`
    pub off_diagonal: f64,
    /// `sqrt(2^j (diagonal + off_diagonal))`, which dominates `block_sum`
    pub cauchy_schwarz: f64,
}

/// `f[n-1] = F(n)` for `n = 1..=N`.
pub fn bilinear_diagnostic(f: &[f64], table: &MobiusTable, cutoff: usize) -> Result<Vec<DyadicBlock>, MobiusError> {
    let n = f.len();
    if n > table.len() {
        return Err(MobiusError::LengthMismatch { samples: n, table: table.len() });
    }
    let val = |k: usize| f[k - 1];
    let primes = table.primes_up_to(cutoff.min(n));
    let mut out = Vec::new();
    let mut j = 0u32;
    while (1usize << j) <= n {
        let lo = 1usize << j;
        let hi = (lo << 1).min(n + 1);
        let mut block = CompensatedSum::default();
        for k in lo..hi {
            if table.mu[k] == 0 {
                continue;
            }
            let mut inner = CompensatedSum::default();
            for &p in primes {
                let p = p as usize;
                if p * k > n {
                    break;
                }
                inner.add(table.mu[p] as f64 * val(p * k));
            }
            block.add(inner.value().abs());
        }
        let ps: Vec<usize> = primes.iter().map(|&p| p as usize).take_while(|&p| p * lo <= n).collect();
        let (mut diag, mut off) = (CompensatedSum::default(), CompensatedSum::default());
        for (a, &p1) in ps.iter().enumerate() {
            for (b, &p2) in ps.iter().enumerate() {
                let top = (lo << 1).min(n / p1 + 1).min(n / p2 + 1);
                let mut s = CompensatedSum::default();
                for m in lo..top {
                    s.add(val(p1 * m) * val(p2 * m));
                }
                if a == b {
                    diag.add(s.value().abs());
                } else {
                    off.add(s.value().abs());
                }
            }
        }
        let (d, o) = (diag.value(), off.value());
        out.push(DyadicBlock {
            j,
            block_sum: block.value(),
            diagonal: d,
            off_diagonal: o,
            cauchy_schwarz: ((lo as f64) * (d + o)).sqrt(),
        });
        j += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_values() {
        let t = mobius_sieve(100).unwrap();
        let got: Vec<i8> = (1..=10).map(|n| t.mu(n)).collect();
        assert_eq!(got, vec![1, -1, -1, 0, -1, 1, -1, 0, 0, 1]);
        assert_eq!(t.mertens(10), -1);
        assert_eq!(t.mu(30), -1);
        assert!(mobius_sieve(0).is_err());
    }

    #[test]
    fn sieve_matches_trial_division() {
        let t = mobius_sieve(10_000).unwrap();
        for n in 1..=10_000 {
            assert_eq!(t.mu(n), mobius_trial(n as u64), "n = {n}");
        }
    }

    #[test]
    fn correlation_basics() {
        let t = mobius_sieve(10).unwrap();
        let c = correlation_sum(&[1.0; 10], &t).unwrap();
        assert_eq!(c.value, -0.1);
        assert_eq!(c.checkpoints.last().unwrap().n, 10);
        assert_eq!(correlation_sum(&[0.0; 10], &t).unwrap().value, 0.0);
        assert!(correlation_sum(&[0.0; 11], &t).is_err());
        let ones: Vec<BigRational> = (0..10).map(|_| BigRational::one()).collect();
        assert_eq!(correlation_sum_exact(&ones, &t).unwrap(), BigRational::new((-1).into(), 10.into()));
    }

    #[test]
    fn tk_examples() {
        let s = tk_stats(1000, 10).unwrap();
        assert_eq!(s.mean, BigRational::new(247.into(), 210.into()));
        assert_eq!(s.prime_count, 4);
        assert!(s.holds());
        assert_eq!(omega_truncated(12, 10), 2);
        // direct evaluation of the variance
        let mut v = BigRational::zero();
        for n in 1..=1000u64 {
            let d = BigRational::from_integer(omega_truncated(n, 10).into()) - &s.mean;
            v += &d * &d;
        }
        assert_eq!(v, s.variance);
    }

    #[test]
    fn bilinear_constant_one() {
        let t = mobius_sieve(100).unwrap();
        let f = vec![1.0; 100];
        let blocks = bilinear_diagnostic(&f, &t, 10).unwrap();
        assert_eq!(blocks.len(), 7);
        // direct: Σ over squarefree k in the block of #{p <= min(10, 100/k)}
        for b in &blocks {
            let lo = 1usize << b.j;
            let mut expect = 0.0;
            for k in lo..(2 * lo).min(101) {
                if mobius_trial(k as u64) != 0 {
                    expect += [2usize, 3, 5, 7].iter().filter(|&&p| p * k <= 100).count() as f64;
                }
            }
            assert_eq!(b.block_sum, expect, "j = {}", b.j);
            assert!(b.block_sum <= b.cauchy_schwarz + 1e-9);
        }
        let zero = bilinear_diagnostic(&[0.0; 100], &t, 10).unwrap();
        assert!(zero.iter().all(|b| b.block_sum == 0.0 && b.cauchy_schwarz == 0.0));
    }
}
