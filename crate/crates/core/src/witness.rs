//! The set constructions behind the commutation argument for powers
//! `T^n`, `T^m`, `T^{m'}` of the exchange.
//!
//! Every object here is an exact finite union of arcs. The difference
//! function `x ↦ ψ_s(x) - ψ_s(R^{q_k} x)` is assembled from two `ψ_s`
//! partitions, so the windows, the concentration set `A_k`, its cleaned
//! subset and the hitting statistics are all computed without sampling.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::Rng;
use serde_json::{json, Value};

use crate::cf::ContinuedFraction;
use crate::circle::{self, psi_partition, return_partition, CircleError, Interval, IntervalUnion, Side, StepFunction};
use crate::field::FieldElement as Fe;
use crate::iet::{IetError, IetSystem};
use crate::rng::task_rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WitnessError {
    #[error("need m' < m < n, got n = {n}, m = {m}, m' = {m_prime}")]
    BadPowers { n: u64, m: u64, m_prime: u64 },
    #[error("r = floor(|J| L / n) is zero")]
    TooShort,
    #[error("(m - m') w = {0} is not bracketed by the convergent table")]
    NoBracket(u64),
    #[error("point {0} or its image under R^q_k is outside J")]
    OutsideJ(Fe),
    #[error("no nonzero level of the difference function")]
    NoLevel,
    #[error(transparent)]
    Circle(#[from] CircleError),
    #[error(transparent)]
    Iet(#[from] IetError),
}

/// Scale parameters tying a length `L` to the three powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerParams {
    pub n: u64,
    pub m: u64,
    pub m_prime: u64,
    /// `(m - m')/n`
    pub c: Fe,
    pub l: u64,
    /// `⌊|J| L / n⌋`
    pub r: u64,
    /// `⌊r / |J|⌋`
    pub w: u64,
    /// `q_{k-1} <= (m - m') w < q_k`
    pub k: usize,
}

impl PowerParams {
    /// `(m - m') w`, the length of the sums in `F`.
    pub fn span(&self) -> u64 {
        (self.m - self.m_prime) * self.w
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n, "m": self.m, "m_prime": self.m_prime,
            "c": self.c.exact_string(), "L": self.l, "r": self.r, "w": self.w,
            "span": self.span(), "k": self.k,
        })
    }
}

pub fn derive_parameters(
    n: u64,
    m: u64,
    m_prime: u64,
    j_len: &Fe,
    l: u64,
    cf: &ContinuedFraction,
) -> Result<PowerParams, WitnessError> {
    if !(m_prime < m && m < n) || m_prime == 0 {
        return Err(WitnessError::BadPowers { n, m, m_prime });
    }
    let r = j_len.mul_int(&BigInt::from(l)).div_int(&BigInt::from(n)).floor();
    let r = r.to_u64().unwrap_or(0);
    if r == 0 {
        return Err(WitnessError::TooShort);
    }
    let w = (Fe::integer(r) / j_len.clone()).floor().to_u64().expect("w fits u64");
    let span = BigInt::from((m - m_prime) * w);
    let k = (1..=cf.max_index())
        .find(|&k| *cf.q(k - 1) <= span && span < *cf.q(k))
        .ok_or(WitnessError::NoBracket((m - m_prime) * w))?;
    Ok(PowerParams { n, m, m_prime, c: Fe::rational(m - m_prime, n), l, r, w, k })
}

/// Value of the two-interval count at one point, with the pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FValue {
    pub value: i64,
    pub origin_hits: u64,
    pub end_hits: u64,
    /// `span < q_k`, which caps each count at 1
    pub guaranteed: bool,
}

/// Hits of `y, R y, ..., R^{W-1} y` on the critical interval at 0 minus hits
/// on the one at `z`, each of length `β_k`.
pub fn f_of_y(y: &Fe, span: u64, k: usize, z: &Fe, cf: &ContinuedFraction) -> FValue {
    let a = circle::critical_interval(k, Side::Origin, z, cf);
    let b = circle::critical_interval(k, Side::End, z, cf);
    let origin_hits = circle::hit_count(y, &a, span, cf);
    let end_hits = circle::hit_count(y, &b, span, cf);
    FValue {
        value: origin_hits as i64 - end_hits as i64,
        origin_hits,
        end_hits,
        guaranteed: BigInt::from(span) < *cf.q(k),
    }
}

/// `x ↦ ψ_s(x) - ψ_s(R^{q_k} x)` as an exact step function.
pub fn psi_difference(s: u64, k: usize, j: &Interval, cf: &ContinuedFraction) -> Result<StepFunction, WitnessError> {
    if s == 0 {
        return Ok(StepFunction::constant(0));
    }
    let psi = psi_partition(s, j, cf)?;
    let q = cf.q(k).to_i64().expect("q_k fits i64");
    Ok(psi.combine(&psi.pullback(q, cf), |a, b| a - b))
}

/// The two-interval count as a step function in `y`.
pub fn f_literal_partition(span: u64, k: usize, z: &Fe, cf: &ContinuedFraction) -> Result<StepFunction, WitnessError> {
    if span == 0 {
        return Ok(StepFunction::constant(0));
    }
    let a = psi_partition(span, &circle::critical_interval(k, Side::Origin, z, cf), cf)?;
    let b = psi_partition(span, &circle::critical_interval(k, Side::End, z, cf), cf)?;
    Ok(a.combine(&b, |x, y| x - y))
}

/// Return-structure facts about the critical intervals that explain where
/// the window comes from.
#[derive(Debug, Clone)]
pub struct ClaimDiagnostics {
    /// every point of the origin interval reaches the end interval within
    /// `q_{k+1} + q_k` steps
    pub covers: bool,
    /// times `0 <= t <= q_{k+1} + q_k` at which the origin interval meets the end one
    pub meeting_times: Vec<u64>,
    /// the long-return piece of the origin interval
    pub long_piece: Interval,
    pub best_time: u64,
    /// `λ(R^t(long piece) ∩ end interval)` at the best time
    pub best_overlap: Fe,
    /// `best_overlap >= β_{k+1}/4`
    pub overlap_ok: bool,
}

pub fn claim_diagnostics(k: usize, z: &Fe, cf: &ContinuedFraction) -> Result<ClaimDiagnostics, WitnessError> {
    let a = circle::critical_interval(k, Side::Origin, z, cf);
    let b = circle::critical_interval(k, Side::End, z, cf);
    let horizon = cf.q_u64(k + 1) + cf.q_u64(k);
    let au = a.to_union();
    let bu = b.to_union();
    let part = return_partition(&a, cf)?;
    let long = part
        .pieces
        .get(&horizon)
        .and_then(|p| p.largest_component())
        .ok_or(CircleError::NoReturn(horizon))?;
    let long_u = long.to_union();
    let mut reach = IntervalUnion::empty();
    let mut meeting = Vec::new();
    let mut best = (0u64, Fe::zero());
    for t in 0..=horizon {
        let t_i = t as i64;
        if t >= 1 {
            reach = reach.union(&bu.rotate(-t_i, cf));
        }
        if !au.rotate(t_i, cf).intersection(&bu).is_empty() {
            meeting.push(t);
        }
        let ov = long_u.rotate(t_i, cf).intersection(&bu).measure();
        if ov > best.1 {
            best = (t, ov);
        }
    }
    let quarter = cf.beta(k + 1).div_int(&BigInt::from(4));
    Ok(ClaimDiagnostics {
        covers: au.is_subset(&reach),
        meeting_times: meeting,
        long_piece: long,
        best_time: best.0,
        overlap_ok: best.1 >= quarter,
        best_overlap: best.1,
    })
}

/// An arc `I` whose first `length` images stay in the `±1` region.
#[derive(Debug, Clone)]
pub struct Window {
    pub interval: Interval,
    pub length: u64,
    /// `λ(I) / β_k`
    pub ratio: Fe,
    /// the lower bound `1/(8(C_3 + 2))` for that ratio, `C_3 = a_{k+2} + 1`
    pub bound: Fe,
}

#[derive(Debug, Clone)]
pub struct DiffPartition {
    /// `G_m - G_{m'}` with `G_s = ψ_{s w} - ψ_{s w} ∘ R^{q_k}`
    pub diff: StepFunction,
    /// `G_{m - m'}`, the count over the span
    pub f: StepFunction,
    /// the two-interval count read literally
    pub f_literal: StepFunction,
    /// `diff == f ∘ R^{m' w}`
    pub pullback_identity: bool,
    /// `f == (-1)^{k+1} f_literal ∘ R^{q_k}`
    pub literal_identity: bool,
    /// each of the two interval counts is at most 1 everywhere
    pub counts_at_most_one: bool,
    pub region: IntervalUnion,
    pub window: Option<Window>,
}

impl DiffPartition {
    pub fn f_range_ok(&self) -> bool {
        let (lo, hi) = self.f.value_range();
        lo >= -1 && hi <= 1
    }
}

/// Longest `h` for which `⋂_{i<h} R^{-i}(region)` still has a component of
/// measure at least `threshold`. Moving `I` along its orbit only shifts the
/// window, so windows are taken to start at 0.
pub fn longest_window(region: &IntervalUnion, threshold: &Fe, cap: u64, cf: &ContinuedFraction) -> Option<(Interval, u64)> {
    let mut x = region.clone();
    let mut best = None;
    for h in 1..=cap {
        if h > 1 {
            x = x.intersection(&region.rotate(-((h - 1) as i64), cf));
        }
        match x.largest_component() {
            Some(c) if c.measure() >= threshold => best = Some((c, h)),
            _ => break,
        }
    }
    best
}

pub fn diff_partition(params: &PowerParams, system: &IetSystem) -> Result<DiffPartition, WitnessError> {
    let cf = system.cf();
    let (k, w) = (params.k, params.w);
    let j = system.j();
    let g_m = psi_difference(params.m * w, k, j, cf)?;
    let g_mp = psi_difference(params.m_prime * w, k, j, cf)?;
    let diff = g_m.combine(&g_mp, |a, b| a - b);
    let f = psi_difference(params.span(), k, j, cf)?;
    let f_literal = f_literal_partition(params.span(), k, system.z(), cf)?;
    let pullback_identity = diff == f.pullback((params.m_prime * w) as i64, cf);
    let sign = if k % 2 == 1 { 1 } else { -1 };
    let q = cf.q(k).to_i64().expect("q_k fits i64");
    let literal_identity = f == f_literal.pullback(q, cf).map(|v| sign * v);
    let counts_at_most_one = [Side::Origin, Side::End].iter().all(|&side| {
        let crit = circle::critical_interval(k, side, system.z(), cf);
        psi_partition(params.span().max(1), &crit, cf).map(|p| p.value_range().1 <= 1).unwrap_or(false)
    });
    let region = diff.where_value(|v| v == 1 || v == -1);
    let beta = cf.beta(k);
    let bound = Fe::rational(1, 8 * (cf.a(k + 2) + 3));
    let threshold = &beta * &bound;
    let cap = 4 * cf.q_u64(k + 1);
    let window = longest_window(&region, &threshold, cap, cf).map(|(interval, length)| Window {
        ratio: interval.measure() / &beta,
        interval,
        length,
        bound,
    });
    Ok(DiffPartition { diff, f, f_literal, pullback_identity, literal_identity, counts_at_most_one, region, window })
}

/// The concentration set: a nonzero level of `G_{m̂}` of maximal measure.
#[derive(Debug, Clone)]
pub struct AkResult {
    pub m_hat: u64,
    /// value of `ψ_{m̂ w}(x) - ψ_{m̂ w}(R^{q_k} x)` on the set
    pub level: i64,
    pub set: IntervalUnion,
    pub measure: Fe,
    pub components: usize,
    /// `4 q_k + 1`
    pub component_bound: u64,
    /// both difference functions take values in `[-4, 4]`
    pub ranges_ok: bool,
    /// level measures for `m̂ = m` then `m̂ = m'`
    pub levels: Vec<(u64, BTreeMap<i64, Fe>)>,
}

pub fn ak_search(params: &PowerParams, system: &IetSystem) -> Result<AkResult, WitnessError> {
    let cf = system.cf();
    let mut ranges_ok = true;
    let mut levels = Vec::new();
    let mut best: Option<(u64, i64, Fe, StepFunction)> = None;
    for m_hat in [params.m, params.m_prime] {
        let g = psi_difference(m_hat * params.w, params.k, system.j(), cf)?;
        let (lo, hi) = g.value_range();
        ranges_ok &= lo >= -4 && hi <= 4;
        let lm = g.level_measures();
        for (&v, meas) in &lm {
            if v == 0 {
                continue;
            }
            if best.as_ref().is_none_or(|b| *meas > b.2) {
                best = Some((m_hat, v, meas.clone(), g.clone()));
            }
        }
        levels.push((m_hat, lm));
    }
    let (m_hat, level, measure, g) = best.ok_or(WitnessError::NoLevel)?;
    let set = g.level_set(level);
    Ok(AkResult {
        m_hat,
        level,
        components: set.component_count(),
        set,
        measure,
        component_bound: 4 * cf.q_u64(params.k) + 1,
        ranges_ok,
        levels,
    })
}

/// Shift `d ∈ [-3, 3]` with `R^{q_k} T^{m̂ r} x = T^d T^{m̂ r} R^{q_k} x`, if any.
pub fn commutation_shift(x: &Fe, power: u64, k: usize, system: &IetSystem) -> Result<Option<i64>, WitnessError> {
    let cf = system.cf();
    let qx = circle::rotate_big(x, cf.q(k), cf.alpha());
    if !system.in_j(x) || !system.in_j(&qx) {
        return Err(WitnessError::OutsideJ(x.clone()));
    }
    let p = power as i64;
    let lhs = circle::rotate_big(&system.apply(x, p)?, cf.q(k), cf.alpha());
    if !system.in_j(&lhs) {
        return Ok(None);
    }
    let base = system.apply(&qx, p)?;
    if base == lhs {
        return Ok(Some(0));
    }
    let (mut fwd, mut back) = (base.clone(), base);
    for d in 1..=3 {
        fwd = system.step(&fwd);
        back = system.step_back(&back);
        if fwd == lhs {
            return Ok(Some(d));
        }
        if back == lhs {
            return Ok(Some(-d));
        }
    }
    Ok(None)
}

pub fn commutation_check(x: &Fe, power: u64, k: usize, d: i64, system: &IetSystem) -> Result<bool, WitnessError> {
    Ok(commutation_shift(x, power, k, system)? == Some(d))
}

/// `A_k` restricted to the points where the commutation holds, then thinned
/// to its long components.
#[derive(Debug, Clone)]
pub struct CleanedSet {
    /// the shift the commutation takes on this set (`-level`)
    pub shift: i64,
    /// `A_k ∩ J ∩ R^{-q_k} J` where the commutation holds
    pub good: IntervalUnion,
    /// part of `A_k ∩ J ∩ R^{-q_k} J` where it fails
    pub removed: IntervalUnion,
    /// components of `good` of length at least `λ(good) / (2 · count)`
    pub set: IntervalUnion,
    pub cells_checked: usize,
}

/// Every quantity in the commutation is constant between consecutive cuts
/// `-iα`, `z - iα` for `i` up to the largest rotation time involved, so one
/// exact evaluation per cell decides it.
pub fn cleaned_set(ak: &AkResult, params: &PowerParams, system: &IetSystem) -> Result<CleanedSet, WitnessError> {
    let cf = system.cf();
    let q = cf.q_u64(params.k);
    let power = ak.m_hat * params.r;
    let shift = -ak.level;
    let domain = ak
        .set
        .intersection(system.j_union())
        .intersection(&system.j_union().rotate(-(q as i64), cf));
    let horizon = 2 * power + 2 * q + 8;
    let mut cuts: Vec<Fe> = Vec::with_capacity(2 * horizon as usize + 2);
    for e in [Fe::zero(), system.z().clone()] {
        let mut p = e.frac();
        for _ in 0..=horizon {
            cuts.push(p.clone());
            p = circle::step_back(&p, cf.alpha());
        }
    }
    cuts.sort();
    cuts.dedup();
    let mut good = Vec::new();
    let mut bad = Vec::new();
    let mut checked = 0;
    for (a, b) in domain.pieces() {
        let mut pts: Vec<Fe> = cuts.iter().filter(|c| *c > a && *c < b).cloned().collect();
        pts.insert(0, a.clone());
        pts.push(b.clone());
        for w in pts.windows(2) {
            checked += 1;
            let ok = commutation_shift(&w[0], power, params.k, system)? == Some(shift);
            if ok {
                good.push((w[0].clone(), w[1].clone()));
            } else {
                bad.push((w[0].clone(), w[1].clone()));
            }
        }
    }
    let good = IntervalUnion::from_pieces(good);
    let removed = IntervalUnion::from_pieces(bad);
    let comps = good.components();
    let set = if comps.is_empty() {
        IntervalUnion::empty()
    } else {
        let min_len = good.measure().div_int(&BigInt::from(2 * comps.len()));
        IntervalUnion::from_intervals(&comps.into_iter().filter(|c| *c.measure() >= min_len).collect::<Vec<_>>())
    };
    Ok(CleanedSet { shift, good, removed, set, cells_checked: checked })
}

/// `count / N` over `T^{i m̂} y`, `0 <= i < N`.
pub fn hitting_frequency(a: &IntervalUnion, m_hat: u64, y: &Fe, n: u64, system: &IetSystem) -> Fe {
    let mut p = y.clone();
    let mut hits = 0u64;
    for i in 0..n {
        if i > 0 {
            for _ in 0..m_hat {
                p = system.step(&p);
            }
        }
        if a.contains(&p) {
            hits += 1;
        }
    }
    Fe::rational(hits, n)
}

/// Same count from the double-double orbit; used as an independent check.
pub fn hitting_frequency_fast(a: &IntervalUnion, m_hat: u64, y: &Fe, n: u64, system: &IetSystem) -> Fe {
    let pts = system.fast_orbit(y, (n * m_hat) as usize);
    let pieces: Vec<(f64, f64)> = a.pieces().iter().map(|(l, r)| (l.to_f64(), r.to_f64())).collect();
    let inside = |x: f64| pieces.iter().any(|&(l, r)| l <= x && x < r);
    let mut hits = u64::from(a.contains(y));
    for i in 1..n {
        if inside(pts[(i * m_hat - 1) as usize]) {
            hits += 1;
        }
    }
    Fe::rational(hits, n)
}

#[derive(Debug, Clone)]
pub struct HittingReport {
    pub n: u64,
    pub frequencies: Vec<Fe>,
    pub min_frequency: Fe,
    /// `λ(A) / Ĉ`
    pub target: Fe,
    /// `q_{k+u} / (2 m̂)`, the orbit length the lower bound asks for
    pub required_n: Option<BigInt>,
    pub u: u32,
}

impl HittingReport {
    pub fn holds(&self) -> bool {
        self.min_frequency >= self.target
    }

    pub fn margin(&self) -> Fe {
        &self.min_frequency - &self.target
    }
}

pub fn hitting_report(
    a: &IntervalUnion,
    m_hat: u64,
    k: usize,
    n: u64,
    starts: usize,
    c_hat: u64,
    seed: u64,
    system: &IetSystem,
) -> HittingReport {
    let cf = system.cf();
    let meas = a.measure();
    let mut rng = task_rng(seed, "hitting", k as u64);
    let ys = crate::rng::rational_points(&mut rng, starts, &Fe::zero(), system.z(), 9973);
    let frequencies: Vec<Fe> = ys.iter().map(|y| hitting_frequency(a, m_hat, y, n, system)).collect();
    let min_frequency = frequencies.iter().cloned().reduce(Fe::min).unwrap_or_else(Fe::zero);
    let u = if meas.is_positive() { circle::hitting_u(&meas) } else { 0 };
    let required_n = (k + (u as usize) <= cf.max_index()).then(|| cf.q(k + u as usize) / BigInt::from(2 * m_hat));
    HittingReport { n, frequencies, min_frequency, target: meas.div_int(&BigInt::from(c_hat)), required_n, u }
}

/// Tower over a level set: floors `R^i V`, `0 <= i < height`.
#[derive(Debug, Clone)]
pub struct Tower {
    pub base: IntervalUnion,
    pub height: u64,
    pub covered: Fe,
    /// `covered / λ(level set)`
    pub fraction: Fe,
    pub floors_inside: bool,
    pub floors_disjoint: bool,
    pub half_covered: bool,
}

/// Run-length construction: split the level set into maximal orbit runs and
/// start a floor block every `height` steps along each run.
pub fn tower_decomposition(level: &IntervalUnion, height: u64, cf: &ContinuedFraction) -> Result<Tower, WitnessError> {
    let empty = Tower {
        base: IntervalUnion::empty(),
        height,
        covered: Fe::zero(),
        fraction: Fe::zero(),
        floors_inside: true,
        floors_disjoint: true,
        half_covered: false,
    };
    if level.is_empty() || height == 0 {
        return Ok(empty);
    }
    let alpha = cf.alpha();
    let outside = level.complement();
    if outside.is_empty() {
        return Ok(empty);
    }
    let starts = level.difference(&level.rotate(1, cf));
    let back = (-alpha).frac();
    // run lengths change only where some R^t y meets an endpoint of the level set
    let mut horizon = (Fe::integer(4) / outside.measure()).ceil().to_u64().unwrap_or(1 << 20).max(64);
    let base = loop {
        let mut cuts: Vec<Fe> = Vec::new();
        for (l, r) in level.pieces() {
            for e in [l, r] {
                for t in circle::hit_times(e, &back, &starts, 1, horizon + 1) {
                    cuts.push(circle::rotate(e, -(t as i64), cf));
                }
            }
        }
        cuts.sort();
        cuts.dedup();
        let mut pieces = Vec::new();
        let mut complete = true;
        'outer: for (a, b) in starts.pieces() {
            let mut pts: Vec<Fe> = cuts.iter().filter(|c| *c > a && *c < b).cloned().collect();
            pts.insert(0, a.clone());
            pts.push(b.clone());
            for w in pts.windows(2) {
                let Some(run) = circle::first_hit(&w[0], alpha, &outside, 1, horizon + 1) else {
                    complete = false;
                    break 'outer;
                };
                let cell = Interval::new(&w[0], &w[1])?;
                for block in 0..run / height {
                    pieces.push(cell.to_union().rotate((block * height) as i64, cf));
                }
            }
        }
        if complete {
            break pieces.into_iter().fold(IntervalUnion::empty(), |acc, p| acc.union(&p));
        }
        horizon *= 2;
        if horizon > 1 << 40 {
            return Err(CircleError::NoReturn(horizon).into());
        }
    };
    let mut union = IntervalUnion::empty();
    let mut floors_inside = true;
    for i in 0..height {
        let floor = base.rotate(i as i64, cf);
        floors_inside &= floor.is_subset(level);
        union = union.union(&floor);
    }
    let covered = union.measure();
    let floors_disjoint = covered == base.measure().mul_int(&BigInt::from(height));
    let fraction = &covered / &level.measure();
    let half_covered = fraction > Fe::rational(1, 2);
    Ok(Tower { base, height, covered, fraction, floors_inside, floors_disjoint, half_covered })
}

/// `λ{x : ψ(x) ≠ ψ(R^j x) for some 0 < j < r}` and the bound `3r/(q - 1)`.
pub fn instability(psi: &StepFunction, r: u64, q: u64, cf: &ContinuedFraction) -> (Fe, Fe) {
    let mut set = IntervalUnion::empty();
    for j in 1..r {
        let moved = psi.pullback(j as i64, cf);
        set = set.union(&psi.combine(&moved, |a, b| i64::from(a != b)).level_set(1));
    }
    (set.measure(), Fe::rational(3 * r, q - 1))
}

/// Uniform rational points in a union, picked by component then position.
pub fn sample_points(u: &IntervalUnion, count: usize, seed: u64, label: &str) -> Vec<Fe> {
    let comps = u.components();
    if comps.is_empty() {
        return Vec::new();
    }
    let mut rng = task_rng(seed, label, 0);
    (0..count)
        .map(|_| {
            let c = &comps[rng.gen_range(0..comps.len())];
            let den: i64 = rng.gen_range(2..=1009);
            let num: i64 = rng.gen_range(0..den);
            (c.left() + &c.measure().mul_int(&BigInt::from(num)).div_int(&BigInt::from(den))).frac()
        })
        .collect()
}

/// Everything the pipeline computes for one `(n, m, m', L)` instance.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub params: PowerParams,
    pub diff: DiffPartition,
    pub claims: ClaimDiagnostics,
    pub ak: AkResult,
    pub cleaned: CleanedSet,
    pub samples: usize,
    /// samples where the discovered shift equals `cleaned.shift`
    pub samples_ok: usize,
    pub hitting: HittingReport,
}

impl PipelineReport {
    pub fn checks(&self) -> Vec<(&'static str, bool)> {
        let w = self.diff.window.as_ref();
        vec![
            ("f_range", self.diff.f_range_ok()),
            ("counts_at_most_one", self.diff.counts_at_most_one),
            ("pullback_identity", self.diff.pullback_identity),
            ("literal_identity", self.diff.literal_identity),
            ("window_found", w.is_some()),
            ("differences_in_range", self.ak.ranges_ok),
            ("component_bound", self.ak.components as u64 <= self.ak.component_bound),
            ("commutation", self.samples > 0 && self.samples_ok == self.samples),
            ("hitting", self.hitting.holds()),
            ("claims_cover", self.claims.covers),
            ("claims_meetings", self.claims.meeting_times.len() <= 4),
            ("claims_overlap", self.claims.overlap_ok),
        ]
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.1)
    }

    pub fn to_json(&self) -> Value {
        let w = self.diff.window.as_ref().map(|w| {
            json!({
                "left": w.interval.left().exact_string(),
                "measure": w.interval.measure().exact_string(),
                "length": w.length,
                "ratio": w.ratio.exact_string(),
                "ratio_decimal": w.ratio.decimal17(),
                "bound": w.bound.exact_string(),
            })
        });
        let levels: Vec<Value> = self
            .ak
            .levels
            .iter()
            .map(|(m, lm)| {
                json!({"m_hat": m, "levels": lm.iter().map(|(k, v)| (k.to_string(), v.exact_string())).collect::<BTreeMap<_, _>>()})
            })
            .collect();
        json!({
            "params": self.params.to_json(),
            "checks": self.checks().into_iter().collect::<BTreeMap<_, _>>(),
            "region_measure": self.diff.region.measure().exact_string(),
            "window": w,
            "claims": {
                "meeting_times": self.claims.meeting_times,
                "best_time": self.claims.best_time,
                "best_overlap": self.claims.best_overlap.exact_string(),
            },
            "a_k": {
                "m_hat": self.ak.m_hat,
                "level": self.ak.level,
                "measure": self.ak.measure.exact_string(),
                "measure_decimal": self.ak.measure.decimal17(),
                "components": self.ak.components,
                "component_bound": self.ak.component_bound,
                "levels": levels,
            },
            "cleaned": {
                "shift": self.cleaned.shift,
                "good_measure": self.cleaned.good.measure().exact_string(),
                "removed_measure": self.cleaned.removed.measure().exact_string(),
                "measure": self.cleaned.set.measure().exact_string(),
                "components": self.cleaned.set.component_count(),
                "cells_checked": self.cleaned.cells_checked,
            },
            "commutation": {"samples": self.samples, "agree": self.samples_ok},
            "hitting": {
                "n": self.hitting.n,
                "min_frequency": self.hitting.min_frequency.exact_string(),
                "target": self.hitting.target.exact_string(),
                "margin": self.hitting.margin().exact_string(),
                "u": self.hitting.u,
                "required_n": self.hitting.required_n.as_ref().map(|n| n.to_string()),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub n: u64,
    pub m: u64,
    pub m_prime: u64,
    pub samples: usize,
    pub hitting_n: u64,
    pub hitting_starts: usize,
    pub c_hat: u64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { n: 5, m: 3, m_prime: 2, samples: 50, hitting_n: 10_000, hitting_starts: 20, c_hat: 16, seed: 1 }
    }
}

pub fn run_pipeline(l: u64, config: &PipelineConfig, system: &IetSystem) -> Result<PipelineReport, WitnessError> {
    let cf = system.cf();
    let params = derive_parameters(config.n, config.m, config.m_prime, system.z(), l, cf)?;
    let diff = diff_partition(&params, system)?;
    let claims = claim_diagnostics(params.k, system.z(), cf)?;
    let ak = ak_search(&params, system)?;
    let cleaned = cleaned_set(&ak, &params, system)?;
    let power = ak.m_hat * params.r;
    let pts = sample_points(&cleaned.set, config.samples, config.seed, "commute");
    let mut samples_ok = 0;
    for x in &pts {
        if commutation_shift(x, power, params.k, system)? == Some(cleaned.shift) {
            samples_ok += 1;
        }
    }
    let hitting = hitting_report(
        &cleaned.set,
        ak.m_hat,
        params.k,
        config.hitting_n,
        config.hitting_starts,
        config.c_hat,
        config.seed,
        system,
    );
    Ok(PipelineReport { params, diff, claims, ak, cleaned, samples: pts.len(), samples_ok, hitting })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::psi_partition_direct;

    fn golden_system() -> IetSystem {
        IetSystem::new(ContinuedFraction::golden(60), Fe::rational(7, 10)).unwrap()
    }

    #[test]
    fn parameter_examples() {
        let cf = ContinuedFraction::golden(60);
        let z = Fe::rational(7, 10);
        let p = derive_parameters(5, 3, 2, &z, 55, &cf).unwrap();
        assert_eq!((p.r, p.w, p.span(), p.k), (7, 10, 10, 6));
        assert_eq!(p.c, Fe::rational(1, 5));
        let p = derive_parameters(5, 3, 2, &z, 233, &cf).unwrap();
        assert_eq!((p.r, p.w, p.k), (32, 45, 9));
        let p = derive_parameters(5, 3, 2, &z, 987, &cf).unwrap();
        assert_eq!((p.r, p.w, p.k), (138, 197, 12));
        assert!(derive_parameters(5, 2, 2, &z, 55, &cf).is_err());
        assert!(derive_parameters(5, 3, 2, &z, 3, &cf).is_err());
        let mut prev = 0;
        for l in 10..400 {
            let p = derive_parameters(5, 3, 2, &z, l, &cf).unwrap();
            assert!(p.span() >= prev);
            prev = p.span();
        }
    }

    #[test]
    fn f_examples() {
        let cf = ContinuedFraction::golden(60);
        let z = Fe::rational(7, 10);
        let v = f_of_y(&Fe::rational(95, 100), 5, 5, &z, &cf);
        assert_eq!((v.value, v.origin_hits, v.end_hits), (1, 1, 0));
        assert!(v.guaranteed);
        assert_eq!(f_of_y(&Fe::rational(3, 10), 5, 5, &z, &cf).value, 0);
        assert_eq!(f_of_y(&Fe::rational(3, 10), 0, 5, &z, &cf).value, 0);
    }

    #[test]
    fn literal_partition_matches_pointwise() {
        let cf = ContinuedFraction::golden(60);
        let z = Fe::rational(7, 10);
        let part = f_literal_partition(10, 6, &z, &cf).unwrap();
        for i in 0..200 {
            let y = Fe::rational(i * 5 + 1, 1001);
            assert_eq!(part.value_at(&y), f_of_y(&y, 10, 6, &z, &cf).value);
        }
    }

    #[test]
    fn difference_matches_direct_oracle() {
        let sys = golden_system();
        let cf = sys.cf();
        for (s, k) in [(20u64, 6usize), (30, 6), (33, 7)] {
            let fast = psi_difference(s, k, sys.j(), cf).unwrap();
            let d = psi_partition_direct(s, sys.j(), cf);
            let q = cf.q(k).to_i64().unwrap();
            let slow = d.combine(&d.pullback(q, cf), |a, b| a - b);
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn small_pipeline() {
        let sys = golden_system();
        let cfg = PipelineConfig { hitting_n: 500, hitting_starts: 3, samples: 10, ..PipelineConfig::default() };
        let rep = run_pipeline(55, &cfg, &sys).unwrap();
        assert!(rep.diff.pullback_identity && rep.diff.literal_identity);
        let f_support = rep.diff.f.where_value(|v| v != 0).measure();
        let d_support = rep.diff.diff.where_value(|v| v != 0).measure();
        assert_eq!(f_support, d_support);
        assert!(rep.ak.measure.is_positive());
        assert!(rep.cleaned.set.is_subset(&rep.ak.set));
        assert_eq!(rep.samples_ok, rep.samples);
        let json = rep.to_json();
        assert_eq!(json["params"]["k"], 6);
    }

    #[test]
    fn discovery_is_unique_and_zero_shift_exists() {
        let sys = golden_system();
        let cf = sys.cf();
        let k = 6;
        let mut zero = 0;
        for i in 0..40 {
            let x = Fe::rational(7 * i + 1, 400);
            let qx = circle::rotate_big(&x, cf.q(k), cf.alpha());
            if !sys.in_j(&x) || !sys.in_j(&qx) {
                assert!(commutation_shift(&x, 21, k, &sys).is_err());
                continue;
            }
            let found = commutation_shift(&x, 21, k, &sys).unwrap();
            let hits: Vec<i64> = (-3..=3).filter(|&d| commutation_check(&x, 21, k, d, &sys).unwrap()).collect();
            assert!(hits.len() <= 1);
            assert_eq!(found, hits.first().copied());
            if found == Some(0) {
                zero += 1;
            }
        }
        assert!(zero > 0);
    }

    #[test]
    fn hitting_trivial_sets() {
        let sys = golden_system();
        let y = Fe::rational(1, 3);
        assert_eq!(hitting_frequency(sys.j_union(), 2, &y, 300, &sys), Fe::one());
        assert_eq!(hitting_frequency(&IntervalUnion::empty(), 2, &y, 300, &sys), Fe::zero());
        let a = IntervalUnion::from_pieces(vec![(Fe::rational(1, 10), Fe::rational(3, 10))]);
        assert_eq!(hitting_frequency(&a, 3, &y, 2000, &sys), hitting_frequency_fast(&a, 3, &y, 2000, &sys));
    }

    #[test]
    fn tower_on_dominant_level() {
        let cf = ContinuedFraction::golden(60);
        let j = Interval::initial(&Fe::rational(7, 10)).unwrap();
        let psi = psi_partition(cf.q_u64(6), &j, &cf).unwrap();
        let (u, _) = psi.level_measures().into_iter().max_by(|a, b| a.1.cmp(&b.1)).unwrap();
        let level = psi.level_set(u);
        let t = tower_decomposition(&level, cf.q_u64(4), &cf).unwrap();
        assert!(t.floors_inside && t.floors_disjoint && t.half_covered, "{t:?}");
        for r in [2, 5, 8] {
            let (m, bound) = instability(&psi, r, cf.q_u64(6), &cf);
            assert!(m <= bound);
        }
        let e = tower_decomposition(&IntervalUnion::empty(), 5, &cf).unwrap();
        assert!(e.base.is_empty());
    }
}
