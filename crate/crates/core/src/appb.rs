//! Patterned rotation/marked-point pairs whose digit pairs
//! `(a_i, b_i)` contain `(10m,0), (10m,0), (4m,1), (10m,0)` at an even
//! offset, and the level sets that separate `T^n` from `T^m` on them.
//!
//! The rotation number is periodic with period
//! `(10m, 10m, 4m, 10m, 10m, 4m, 10m, 10m)` and the marked point has the
//! periodic Ostrowski digits `(0, 0, 1, 0, 0, 1, 0, 0)`. On its own this
//! puts `z` far below `1 - α`, so a short prefix is tried when needed.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use crate::cf::{CfError, ContinuedFraction, OstrowskiCode};
use crate::circle::{self, psi_partition, CircleError, Interval, IntervalUnion, StepFunction};
use crate::field::FieldElement as Fe;
use crate::iet::{IetError, IetSystem};
use crate::mobius::CompensatedSum;
use crate::rng::task_rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AppbError {
    #[error("pattern parameter m must be at least 2, got {0}")]
    SmallM(u64),
    #[error("need 0 < n < m, got n = {n}, m = {m}")]
    BadPowers { n: u64, m: u64 },
    #[error("no prefix and period rotation satisfies z >= max(alpha, 1 - alpha)")]
    NoPlacement,
    #[error("x_(l-1) is not R^r(0) with 0 <= r < q_l")]
    NoOrbitIndex,
    #[error("{0} level values, expected two consecutive ones")]
    LevelCount(usize),
    #[error(transparent)]
    Cf(#[from] CfError),
    #[error(transparent)]
    Circle(#[from] CircleError),
    #[error(transparent)]
    Iet(#[from] IetError),
}

/// Prefixes tried in order: none, then `a = (1, 1)`, `b = (1, 0)`, which
/// makes `α > 1/2` and `z ≈ α + β_{ℓ+2}`.
const PREFIXES: [(&[u64], &[u64]); 2] = [(&[], &[]), (&[1, 1], &[1, 0])];

#[derive(Debug, Clone)]
pub struct PatternPair {
    pub m: u64,
    pub prefix_a: Vec<u64>,
    pub prefix_b: Vec<u64>,
    /// rotation applied to both periods before use
    pub shift: usize,
    pub period_a: Vec<u64>,
    pub period_b: Vec<u64>,
    pub cf: ContinuedFraction,
    pub z: Fe,
    /// pattern occupies positions `ℓ+1 ..= ℓ+4`
    pub ell: usize,
    /// `Σ_{i<=ℓ} b_i ⟨⟨q_{i-1} α⟩⟩`, the marked-point digits before the pattern
    pub head: Fe,
    /// `head = R^r(0)`
    pub r: u64,
}

impl PatternPair {
    pub fn b(&self, i: usize) -> u64 {
        let s = self.prefix_b.len();
        if i == 0 {
            0
        } else if i <= s {
            self.prefix_b[i - 1]
        } else {
            self.period_b[(i - s - 1) % self.period_b.len()]
        }
    }

    pub fn b_digits(&self, count: usize) -> Vec<u64> {
        (1..=count).map(|i| self.b(i)).collect()
    }

    /// `b_i <= a_i`, and a full digit has a zero on both sides, which
    /// satisfies either form of the admissibility rule.
    pub fn admissible(&self, count: usize) -> bool {
        (1..=count).all(|i| {
            let (a, b) = (self.cf.a(i), self.b(i));
            b <= a && (b < a || (self.b(i - 1) == 0 && self.b(i + 1) == 0))
        })
    }

    /// Positions with `b_i = a_i`, where the strict slack `b_i <= a_i - 1` fails.
    pub fn full_digits(&self, count: usize) -> Vec<usize> {
        (1..=count).filter(|&i| self.b(i) >= self.cf.a(i)).collect()
    }

    pub fn system(&self) -> Result<IetSystem, AppbError> {
        Ok(IetSystem::new(self.cf.clone(), self.z.clone())?)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "m": self.m,
            "alpha_exact": self.cf.alpha().exact_string(),
            "z_exact": self.z.exact_string(),
            "alpha_decimal": self.cf.alpha().decimal17(),
            "z_decimal": self.z.decimal17(),
            "prefix_a": self.prefix_a,
            "prefix_b": self.prefix_b,
            "shift": self.shift,
            "period_a": self.period_a,
            "period_b": self.period_b,
            "ell": self.ell,
            "head": self.head.exact_string(),
            "r": self.r,
            "full_digit_positions": self.full_digits(self.prefix_a.len() + self.period_a.len()),
        })
    }
}

fn pattern(m: u64) -> [(u64, u64); 4] {
    [(10 * m, 0), (10 * m, 0), (4 * m, 1), (10 * m, 0)]
}

pub fn construct_pair(m: u64) -> Result<PatternPair, AppbError> {
    if m < 2 {
        return Err(AppbError::SmallM(m));
    }
    let base_a = [10 * m, 10 * m, 4 * m, 10 * m, 10 * m, 4 * m, 10 * m, 10 * m];
    let base_b = [0u64, 0, 1, 0, 0, 1, 0, 0];
    for (pa, pb) in PREFIXES {
        for shift in 0..base_a.len() {
            let mut period_a = base_a.to_vec();
            let mut period_b = base_b.to_vec();
            period_a.rotate_left(shift);
            period_b.rotate_left(shift);
            if let Some(pair) = try_placement(m, pa, pb, shift, period_a, period_b)? {
                return Ok(pair);
            }
        }
    }
    Err(AppbError::NoPlacement)
}

fn try_placement(
    m: u64,
    prefix_a: &[u64],
    prefix_b: &[u64],
    shift: usize,
    period_a: Vec<u64>,
    period_b: Vec<u64>,
) -> Result<Option<PatternPair>, AppbError> {
    let p = period_a.len();
    let depth = prefix_a.len() + 3 * p + 2;
    let cf = ContinuedFraction::periodic(prefix_a, &period_a, depth)?;
    let z = cf.ostrowski_sum_periodic(prefix_b, &period_b)?;
    let alpha = cf.alpha();
    let one = Fe::one();
    if z.is_negative() || z >= one || z < alpha.clone().max(&one - alpha) {
        return Ok(None);
    }
    let mut pair = PatternPair {
        m,
        prefix_a: prefix_a.to_vec(),
        prefix_b: prefix_b.to_vec(),
        shift,
        period_a,
        period_b,
        cf,
        z,
        ell: 0,
        head: Fe::zero(),
        r: 0,
    };
    if !pair.admissible(depth - 1) {
        return Ok(None);
    }
    let pat = pattern(m);
    let Some(ell) = (1..depth - 5).find(|&l| {
        (l + 2) % 2 == 0 && (0..4).all(|t| (pair.cf.a(l + 1 + t), pair.b(l + 1 + t)) == pat[t])
    }) else {
        return Ok(None);
    };
    let head = pair.cf.ostrowski_sum(&pair.b_digits(ell));
    let r = circle::orbit_index(&head.frac(), pair.cf.alpha())
        .and_then(|r| u64::try_from(r).ok())
        .filter(|&r| BigInt::from(r) < *pair.cf.q(ell))
        .ok_or(AppbError::NoOrbitIndex)?;
    pair.ell = ell;
    pair.head = head;
    pair.r = r;
    Ok(Some(pair))
}

/// The two-valued count over `[0, head)` for `q_{ℓ+2}` steps.
#[derive(Debug, Clone)]
pub struct PhiLevels {
    pub function: StepFunction,
    /// majority value `j`
    pub dominant: i64,
    pub minority: IntervalUnion,
    pub minority_measure: Fe,
    /// `r · β_{ℓ+2}`, the measure of `⋃_{i=1}^r R^i(origin interval)`
    pub predicted: Fe,
    /// `q_ℓ β_{ℓ+2}`
    pub chain_bound: Fe,
    /// `1/(100 m³)`
    pub target: Fe,
    pub consecutive: bool,
}

impl PhiLevels {
    pub fn holds(&self) -> bool {
        self.consecutive && self.minority_measure <= self.chain_bound && self.chain_bound < self.target
    }
}

pub fn phi_levels(pair: &PatternPair) -> Result<PhiLevels, AppbError> {
    let cf = &pair.cf;
    let ell = pair.ell;
    let q = cf.q_u64(ell + 2);
    let head = Interval::initial(&pair.head.frac())?;
    let function = psi_partition(q, &head, cf)?;
    let lm = function.level_measures();
    if lm.len() != 2 {
        return Err(AppbError::LevelCount(lm.len()));
    }
    let (dominant, _) = lm.iter().max_by(|a, b| a.1.cmp(b.1)).expect("two levels");
    let dominant = *dominant;
    let (lo, hi) = function.value_range();
    let minority = function.where_value(|v| v != dominant);
    let beta = cf.beta(ell + 2);
    let m3 = pair.m * pair.m * pair.m;
    Ok(PhiLevels {
        minority_measure: minority.measure(),
        minority,
        dominant,
        predicted: beta.mul_int(&BigInt::from(pair.r)),
        chain_bound: beta.mul_int(cf.q(ell)),
        target: Fe::rational(1, 100 * m3),
        consecutive: hi - lo == 1,
        function,
    })
}

/// Witness sets for the pair `(T^n, T^m)` and the separating constant.
#[derive(Debug, Clone)]
pub struct WitnessSets {
    pub n: u64,
    pub m: u64,
    /// dominant value of the two-valued count
    pub j: i64,
    /// `{ψ_{n q} = n j}` with `q = q_{ℓ+2}`
    pub f: IntervalUnion,
    /// `{ψ_{m q} = m j + 1}`
    pub g: IntervalUnion,
    pub c: Fe,
    /// `q β_{ℓ+2}`
    pub q_beta: Fe,
    /// `q β_{ℓ+2} > 1/(10m + 3)`
    pub positivity_chain: bool,
    /// `(λ(G) - c) - (1 - λ(F))`
    pub margin: Fe,
    /// `β(1 - 1/(10m)) < z - head < β(1 + 1/(10m))`
    pub sandwich: bool,
    pub f_lower_bound: Fe,
    pub g_lower_bound: Fe,
    /// `‖n q α‖` and `‖m q α‖`
    pub f_displacement: Fe,
    pub g_displacement: Fe,
    /// sampled points checked against the exact return identities
    pub displacement_samples: usize,
    pub displacement_ok: bool,
}

impl WitnessSets {
    pub fn holds(&self) -> bool {
        self.c.is_positive()
            && self.positivity_chain
            && self.margin.is_positive()
            && self.sandwich
            && self.f.measure() >= self.f_lower_bound
            && self.g.measure() > self.g_lower_bound
            && self.displacement_ok
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,exact,decimal\n");
        let rows = [
            ("measure_F", self.f.measure()),
            ("measure_G", self.g.measure()),
            ("c", self.c.clone()),
            ("q_beta", self.q_beta.clone()),
            ("margin", self.margin.clone()),
            ("F_lower_bound", self.f_lower_bound.clone()),
            ("G_lower_bound", self.g_lower_bound.clone()),
            ("F_displacement", self.f_displacement.clone()),
            ("G_displacement", self.g_displacement.clone()),
        ];
        for (name, v) in rows {
            s.push_str(&format!("{name},{},{}\n", v.exact_string(), v.decimal17()));
        }
        s
    }
}

pub fn witness_sets(pair: &PatternPair, n: u64, seed: u64) -> Result<WitnessSets, AppbError> {
    let m = pair.m;
    if n == 0 || n >= m {
        return Err(AppbError::BadPowers { n, m });
    }
    let cf = &pair.cf;
    let ell = pair.ell;
    let q = cf.q_u64(ell + 2);
    let beta = cf.beta(ell + 2);
    let system = pair.system()?;
    let j = phi_levels(pair)?.dominant;
    let big_j = system.j();
    let f = psi_partition(n * q, big_j, cf)?.level_set(n as i64 * j);
    let g = psi_partition(m * q, big_j, cf)?.level_set(m as i64 * j + 1);

    let q_beta = beta.mul_int(&BigInt::from(q));
    let ten_m = Fe::integer(10 * m);
    let coeff = Fe::integer(m - n) - Fe::integer(m + n) / ten_m.clone();
    let hundred_m2 = Fe::integer(100 * m * m);
    let c = &coeff * &q_beta - Fe::integer(2) / hundred_m2.clone();
    let positivity_chain = q_beta > Fe::rational(1, 10 * m + 3);
    let margin = (g.measure() - c.clone()) - (Fe::one() - f.measure());
    let tail = &pair.z - &pair.head;
    let slack = &beta / &ten_m;
    let sandwich = &beta - &slack < tail && tail < &beta + &slack;
    let nqb = q_beta.mul_int(&BigInt::from(n));
    let mqb = q_beta.mul_int(&BigInt::from(m));
    let f_lower_bound = Fe::one() - nqb.clone() - Fe::one() / hundred_m2.clone() - &nqb / &ten_m;
    let g_lower_bound = mqb.clone() - Fe::one() / hundred_m2 - &mqb / &ten_m;

    let alpha = cf.alpha();
    let f_displacement = circle::norm(&alpha.mul_int(&BigInt::from(n * q)));
    let g_displacement = circle::norm(&alpha.mul_int(&BigInt::from(m * q)));
    let (count, ok) = check_displacements(&system, &f, &g, n, m, q, j, seed)?;
    let displacement_ok = ok
        && f_displacement <= beta.mul_int(&BigInt::from(n))
        && g_displacement <= beta.mul_int(&BigInt::from(m));
    Ok(WitnessSets {
        n,
        m,
        j,
        f,
        g,
        c,
        q_beta,
        positivity_chain,
        margin,
        sandwich,
        f_lower_bound,
        g_lower_bound,
        f_displacement,
        g_displacement,
        displacement_samples: count,
        displacement_ok,
    })
}

/// On `F`, `T^{nj} x = R^{nq} x`; on `G`, `T^{mj} x = R^{mq-1} x`, whenever
/// the endpoints of those rotations lie in `J`.
fn check_displacements(
    system: &IetSystem,
    f: &IntervalUnion,
    g: &IntervalUnion,
    n: u64,
    m: u64,
    q: u64,
    j: i64,
    seed: u64,
) -> Result<(usize, bool), AppbError> {
    let alpha = system.alpha();
    let mut count = 0;
    let mut ok = true;
    let jf = f.intersection(system.j_union());
    for x in crate::witness::sample_points(&jf, 20, seed, "appb-f") {
        let target = circle::rotate_big(&x, &BigInt::from(n * q), alpha);
        if !system.in_j(&target) {
            continue;
        }
        count += 1;
        ok &= system.apply(&x, n as i64 * j)? == target;
    }
    let jg = g.intersection(system.j_union());
    for x in crate::witness::sample_points(&jg, 20, seed, "appb-g") {
        let target = circle::rotate_big(&x, &BigInt::from(m * q - 1), alpha);
        let end = circle::rotate_big(&x, &BigInt::from(m * q), alpha);
        if !system.in_j(&target) || !system.in_j(&end) {
            continue;
        }
        count += 1;
        ok &= system.apply(&x, m as i64 * j)? == target;
    }
    Ok((count, ok))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DisjointnessPoint {
    pub n: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Disjointness {
    pub n: usize,
    pub deviation: f64,
    pub checkpoints: Vec<DisjointnessPoint>,
}

/// `|avg f(T^{nk} x0) g(T^{mk} y0) - avg f(T^{nk} x0) · avg g(T^{mk} y0)|`
/// over `1 <= k <= N`, with the same quantity at every power of 10.
pub fn empirical_disjointness(
    system: &IetSystem,
    n: u64,
    m: u64,
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    x0: &Fe,
    y0: &Fe,
    count: usize,
) -> Disjointness {
    let xs = system.fast_orbit(x0, count * n as usize);
    let ys = system.fast_orbit(y0, count * m as usize);
    let (mut sf, mut sg, mut sfg) = (CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default());
    let mut checkpoints = Vec::new();
    let mut next = 1usize;
    let dev = |sf: &CompensatedSum, sg: &CompensatedSum, sfg: &CompensatedSum, k: usize| {
        let k = k as f64;
        (sfg.value() / k - (sf.value() / k) * (sg.value() / k)).abs()
    };
    for k in 1..=count {
        let a = f(xs[k * n as usize - 1]);
        let b = g(ys[k * m as usize - 1]);
        sf.add(a);
        sg.add(b);
        sfg.add(a * b);
        if k == next {
            checkpoints.push(DisjointnessPoint { n: k, deviation: dev(&sf, &sg, &sfg, k) });
            next *= 10;
        }
    }
    if checkpoints.last().map(|c| c.n) != Some(count) && count > 0 {
        checkpoints.push(DisjointnessPoint { n: count, deviation: dev(&sf, &sg, &sfg, count) });
    }
    let deviation = checkpoints.last().map(|c| c.deviation).unwrap_or(0.0);
    Disjointness { n: count, deviation, checkpoints }
}

/// `x ↦ cos(2π x / z)`, which has mean zero on `[0, z)`.
pub fn mean_zero_cosine(z: f64, freq: f64) -> impl Fn(f64) -> f64 {
    move |x| (std::f64::consts::TAU * freq * x / z).cos()
}

/// Seeded start point in `J` for the empirical test.
pub fn start_point(system: &IetSystem, seed: u64, index: u64) -> Fe {
    let mut rng = task_rng(seed, "appb-start", index);
    crate::rng::rational_points(&mut rng, 1, &Fe::zero(), system.z(), 9973).remove(0)
}

/// The pair's Ostrowski code through `count` digits, for round-trip checks.
pub fn pair_code(pair: &PatternPair, count: usize) -> OstrowskiCode {
    OstrowskiCode { digits: pair.b_digits(count) }
}

/// `q_{ℓ+2}` as a convenience for reports.
pub fn pattern_q(pair: &PatternPair) -> u64 {
    pair.cf.q(pair.ell + 2).to_u64().expect("q fits u64")
}
