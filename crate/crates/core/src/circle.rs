//! Rotation by α on the circle [0, 1): orbits, hit counts, return times, and
//! the level sets of the counting functions `ψ_L(x) = #{ℓ < L : R^ℓ x ∈ J}`.
//!
//! Everything is exact. Counting along long orbit segments goes through
//! floor sums `Σ_{k<n} ⌊kα + b⌋`, evaluated by the Euclid-like reciprocity
//! recursion in O(log n) field operations.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::cf::ContinuedFraction;
use crate::field::FieldElement as Fe;

/// Default cap on `L` for the breakpoint sweep.
pub const SWEEP_CAP: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CircleError {
    #[error("L = {0} exceeds the sweep cap {1}")]
    OverCap(u64, u64),
    #[error("L must be positive")]
    ZeroLength,
    #[error("interval length must lie in (0, 1]")]
    BadLength,
    #[error("k = {0} is beyond the continued-fraction table")]
    IndexTooLarge(usize),
    #[error("rotation number is rational with period {0}")]
    Rational(u64),
    #[error("no return to the interval within {0} steps")]
    NoReturn(u64),
}

// ---------------------------------------------------------------------------
// basic rotation arithmetic

/// `x + n α mod 1`.
pub fn rotate(x: &Fe, n: i64, cf: &ContinuedFraction) -> Fe {
    rotate_big(x, &BigInt::from(n), cf.alpha())
}

pub fn rotate_big(x: &Fe, n: &BigInt, alpha: &Fe) -> Fe {
    (x + &alpha.mul_int(n)).frac()
}

/// One step `x ↦ x + α mod 1` for `x ∈ [0, 1)`, avoiding a full floor.
pub fn step(x: &Fe, alpha: &Fe) -> Fe {
    let y = x + alpha;
    if y >= Fe::one() {
        y.sub_int(&BigInt::one())
    } else {
        y
    }
}

/// One step backwards, `x ↦ x - α mod 1`.
pub fn step_back(x: &Fe, alpha: &Fe) -> Fe {
    let y = x - alpha;
    if y.is_negative() {
        y.add_int(&BigInt::one())
    } else {
        y
    }
}

/// The `j` with `jα ≡ p (mod 1)`, if `p` lies on the orbit of 0.
pub fn orbit_index(p: &Fe, alpha: &Fe) -> Option<i64> {
    let num = p.num_irrational() * alpha.denom();
    let den = alpha.num_irrational() * p.denom();
    if den.is_zero() {
        return None;
    }
    let (j, r) = num.div_rem(&den);
    if !r.is_zero() {
        return None;
    }
    let diff = p - &alpha.mul_int(&j);
    if diff.is_rational() && diff.denom().is_one() {
        j.to_i64()
    } else {
        None
    }
}

/// `d(x, y) = min(|x - y|, 1 - |x - y|)` for points of [0, 1).
pub fn circle_dist(x: &Fe, y: &Fe) -> Fe {
    let d = (x - y).frac();
    let e = Fe::one() - &d;
    d.min(e)
}

/// `‖x‖`, the distance from `x` to the nearest integer.
pub fn norm(x: &Fe) -> Fe {
    circle_dist(&x.frac(), &Fe::zero())
}

// ---------------------------------------------------------------------------
// floor sums

/// `Σ_{k<n} ⌊k a + b⌋`, exact.
pub fn floor_sum(n: u64, a: &Fe, b: &Fe) -> BigInt {
    let mut total = BigInt::zero();
    let mut sign = BigInt::one();
    let mut n = BigInt::from(n);
    let mut a = a.clone();
    let mut b = b.clone();
    let two = BigInt::from(2);
    loop {
        if n.is_zero() {
            return total;
        }
        let big_a = a.floor();
        let big_b = b.floor();
        let nn1 = &n * (&n - 1u32) / &two;
        total += &sign * (&big_a * &nn1 + &big_b * &n);
        let a1 = a.sub_int(&big_a);
        let b1 = b.sub_int(&big_b);
        if a1.is_zero() {
            return total;
        }
        if a1.is_rational() {
            // Not reached for irrational rotations; plain summation.
            let cnt = n.to_u64().expect("rational floor sum too long");
            let mut s = BigInt::zero();
            let mut y = b1.clone();
            for _ in 0..cnt {
                s += y.floor();
                y = y + &a1;
            }
            return total + sign * s;
        }
        // Σ_{k<n} ⌊k a1 + b1⌋ = n m - Σ_{j=1}^m ⌈(j - b1)/a1⌉
        let m = (a1.mul_int(&(&n - 1u32)) + &b1).floor();
        if m.is_zero() {
            return total;
        }
        let u = a1.recip().expect("nonzero");
        let v = &b1 * &u;
        let ties = tie_count(&u, &v, &m);
        // Σ ⌈(j - b1) u⌉ = Σ_{i<m} ⌊i u + (u - v)⌋ + m - ties
        total += &sign * (&n * &m - &m + ties);
        sign = -sign;
        b = &u - &v;
        a = u;
        n = m;
    }
}

/// Number of `j ∈ [1, m]` with `j u - v` an integer (at most one when `u` is
/// irrational).
fn tie_count(u: &Fe, v: &Fe, m: &BigInt) -> BigInt {
    let ub = u.num_irrational();
    let vb = v.num_irrational();
    // irrational parts: j ub / uc = vb / vc
    let num = vb * u.denom();
    let den = ub * v.denom();
    if den.is_zero() {
        return BigInt::zero();
    }
    let (j, r) = num.div_rem(&den);
    if !r.is_zero() || j < BigInt::one() || j > *m {
        return BigInt::zero();
    }
    let w = &u.mul_int(&j) - v;
    if w.is_rational() && w.denom().is_one() {
        BigInt::one()
    } else {
        BigInt::zero()
    }
}

/// `#{0 <= i < n : frac(x + i step) ∈ [l, r)}` for `0 <= l < r <= 1`.
fn count_piece(x: &Fe, step: &Fe, l: &Fe, r: &Fe, n: u64) -> BigInt {
    let one = Fe::one();
    let hi = floor_sum(n, step, &(x - l + &one));
    let lo = floor_sum(n, step, &(x - r + &one));
    hi - lo
}

/// `#{0 <= i < n : frac(x + i step) ∈ U}`.
pub fn count_in_union(x: &Fe, step: &Fe, u: &IntervalUnion, n: u64) -> u64 {
    let mut c = BigInt::zero();
    for (l, r) in &u.pieces {
        c += count_piece(x, step, l, r, n);
    }
    c.to_u64().expect("count fits")
}

/// Same count by direct iteration; the oracle for [`count_in_union`].
pub fn count_in_union_direct(x: &Fe, step: &Fe, u: &IntervalUnion, n: u64) -> u64 {
    let step = step.frac();
    let mut y = x.frac();
    let mut c = 0;
    for _ in 0..n {
        if u.contains(&y) {
            c += 1;
        }
        y = self::step(&y, &step);
    }
    c
}

/// `Σ_{i<N} χ_I(R^i x)`.
pub fn hit_count(x: &Fe, interval: &Interval, n: u64, cf: &ContinuedFraction) -> u64 {
    let u = interval.to_union();
    if n <= 64 {
        count_in_union_direct(x, cf.alpha(), &u, n)
    } else {
        count_in_union(x, cf.alpha(), &u, n)
    }
}

/// `ψ_L(x) = Σ_{ℓ<L} χ_J(R^ℓ x)`.
pub fn psi_value(x: &Fe, l: u64, j: &Interval, cf: &ContinuedFraction) -> u64 {
    hit_count(x, j, l, cf)
}

/// Smallest `t ∈ [from, to)` with `frac(x + t step) ∈ U`.
pub fn first_hit(x: &Fe, step: &Fe, u: &IntervalUnion, from: u64, to: u64) -> Option<u64> {
    if from >= to || u.is_empty() {
        return None;
    }
    if to - from <= 256 {
        let mut y = (x + &step.mul_int(&BigInt::from(from))).frac();
        let st = step.frac();
        for t in from..to {
            if u.contains(&y) {
                return Some(t);
            }
            y = self::step(&y, &st);
        }
        return None;
    }
    let base = count_in_union(x, step, u, from);
    if count_in_union(x, step, u, to) == base {
        return None;
    }
    // smallest n in (from, to] with count(n) > base
    let (mut lo, mut hi) = (from, to);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if count_in_union(x, step, u, mid) > base {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi - 1)
}

/// All `t ∈ [from, to)` with `frac(x + t step) ∈ U`.
pub fn hit_times(x: &Fe, step: &Fe, u: &IntervalUnion, from: u64, to: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut t = from;
    while let Some(h) = first_hit(x, step, u, t, to) {
        out.push(h);
        t = h + 1;
    }
    out
}

// ---------------------------------------------------------------------------
// intervals and unions

/// Half-open arc `[left, left + len)` of the circle; may wrap past 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    left: Fe,
    len: Fe,
}

impl Interval {
    /// `[left, right)` read on the real line; `right - left ∈ (0, 1]`.
    pub fn new(left: &Fe, right: &Fe) -> Result<Self, CircleError> {
        Self::arc(left, &(right - left))
    }

    pub fn arc(left: &Fe, len: &Fe) -> Result<Self, CircleError> {
        if !len.is_positive() || *len > Fe::one() {
            return Err(CircleError::BadLength);
        }
        Ok(Interval { left: left.frac(), len: len.clone() })
    }

    /// `J = [0, z)`.
    pub fn initial(z: &Fe) -> Result<Self, CircleError> {
        Self::arc(&Fe::zero(), z)
    }

    pub fn left(&self) -> &Fe {
        &self.left
    }

    /// Right end on the real line (may exceed 1).
    pub fn right(&self) -> Fe {
        &self.left + &self.len
    }

    pub fn measure(&self) -> &Fe {
        &self.len
    }

    pub fn contains(&self, x: &Fe) -> bool {
        (x - &self.left).frac() < self.len
    }

    pub fn to_union(&self) -> IntervalUnion {
        let one = Fe::one();
        let r = self.right();
        if r <= one {
            IntervalUnion::from_sorted(vec![(self.left.clone(), r)])
        } else {
            let r2 = r.sub_int(&BigInt::one());
            IntervalUnion::from_pieces(vec![(Fe::zero(), r2), (self.left.clone(), one)])
        }
    }
}

/// Finite disjoint union of half-open pieces `[l, r)` with `0 <= l < r <= 1`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct IntervalUnion {
    pieces: Vec<(Fe, Fe)>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion { pieces: Vec::new() }
    }

    pub fn full() -> Self {
        IntervalUnion { pieces: vec![(Fe::zero(), Fe::one())] }
    }

    /// Pieces already sorted and disjoint; adjacent ones are merged.
    fn from_sorted(pieces: Vec<(Fe, Fe)>) -> Self {
        let mut out: Vec<(Fe, Fe)> = Vec::with_capacity(pieces.len());
        for (l, r) in pieces {
            if l >= r {
                continue;
            }
            if let Some(last) = out.last_mut() {
                if last.1 >= l {
                    if r > last.1 {
                        last.1 = r;
                    }
                    continue;
                }
            }
            out.push((l, r));
        }
        IntervalUnion { pieces: out }
    }

    /// Arbitrary pieces inside [0, 1]; sorted and merged.
    pub fn from_pieces(mut pieces: Vec<(Fe, Fe)>) -> Self {
        pieces.sort_by(|a, b| a.0.cmp(&b.0));
        Self::from_sorted(pieces)
    }

    pub fn from_intervals(ints: &[Interval]) -> Self {
        let mut pieces = Vec::new();
        for i in ints {
            pieces.extend(i.to_union().pieces);
        }
        Self::from_pieces(pieces)
    }

    pub fn pieces(&self) -> &[(Fe, Fe)] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn measure(&self) -> Fe {
        let mut s = Fe::zero();
        for (l, r) in &self.pieces {
            s = s + (r - l);
        }
        s
    }

    pub fn contains(&self, x: &Fe) -> bool {
        let x = x.frac();
        // last piece with l <= x
        let idx = self.pieces.partition_point(|(l, _)| *l <= x);
        idx > 0 && x < self.pieces[idx - 1].1
    }

    /// Boolean combination by a merged sweep over both endpoint lists.
    fn combine(&self, other: &Self, keep: impl Fn(bool, bool) -> bool) -> Self {
        let mut pts: Vec<&Fe> = Vec::with_capacity(2 * (self.pieces.len() + other.pieces.len()) + 2);
        let zero = Fe::zero();
        let one = Fe::one();
        pts.push(&zero);
        pts.push(&one);
        for (l, r) in self.pieces.iter().chain(other.pieces.iter()) {
            pts.push(l);
            pts.push(r);
        }
        pts.sort();
        pts.dedup();
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            while i < self.pieces.len() && self.pieces[i].1 <= *a {
                i += 1;
            }
            while j < other.pieces.len() && other.pieces[j].1 <= *a {
                j += 1;
            }
            let in_a = i < self.pieces.len() && self.pieces[i].0 <= *a;
            let in_b = j < other.pieces.len() && other.pieces[j].0 <= *a;
            if keep(in_a, in_b) {
                out.push((a.clone(), b.clone()));
            }
        }
        Self::from_sorted(out)
    }

    pub fn union(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a && !b)
    }

    pub fn symmetric_difference(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a != b)
    }

    pub fn complement(&self) -> Self {
        Self::full().difference(self)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    /// Image under `x ↦ x + shift mod 1`.
    pub fn translate(&self, shift: &Fe) -> Self {
        let one = Fe::one();
        let mut out = Vec::with_capacity(self.pieces.len() + 1);
        for (l, r) in &self.pieces {
            let len = r - l;
            let nl = (l + shift).frac();
            let nr = &nl + &len;
            if nr <= one {
                out.push((nl, nr));
            } else {
                out.push((nl, one.clone()));
                out.push((Fe::zero(), nr.sub_int(&BigInt::one())));
            }
        }
        Self::from_pieces(out)
    }

    /// `R^n(U)`.
    pub fn rotate(&self, n: i64, cf: &ContinuedFraction) -> Self {
        self.translate(&cf.alpha().mul_int(&BigInt::from(n)))
    }

    /// Connected components on the circle (a piece ending at 1 joins one
    /// starting at 0).
    pub fn components(&self) -> Vec<Interval> {
        let n = self.pieces.len();
        if n == 0 {
            return Vec::new();
        }
        let one = Fe::one();
        let wraps = n > 1 && self.pieces[0].0.is_zero() && self.pieces[n - 1].1 == one;
        let mut out = Vec::new();
        let range = if wraps { 1..n - 1 } else { 0..n };
        for (l, r) in &self.pieces[range] {
            out.push(Interval::new(l, r).expect("nonempty piece"));
        }
        if wraps {
            let (l, _) = &self.pieces[n - 1];
            let (_, r0) = &self.pieces[0];
            out.push(Interval::new(l, &r0.add_int(&BigInt::one())).expect("wrapped piece"));
        }
        out
    }

    pub fn component_count(&self) -> usize {
        self.components().len()
    }

    pub fn largest_component(&self) -> Option<Interval> {
        self.components().into_iter().max_by(|a, b| a.measure().cmp(b.measure()))
    }
}

// ---------------------------------------------------------------------------
// step functions

/// Integer-valued function on [0, 1), constant on `[breaks[i], breaks[i+1])`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepFunction {
    breaks: Vec<Fe>,
    values: Vec<i64>,
}

impl StepFunction {
    /// `breaks` sorted, starting at 0, with one value per cell.
    pub fn new(breaks: Vec<Fe>, values: Vec<i64>) -> Self {
        assert_eq!(breaks.len(), values.len());
        assert!(breaks.first().is_some_and(|b| b.is_zero()));
        let mut f = StepFunction { breaks, values };
        f.merge_equal_neighbours();
        f
    }

    pub fn constant(v: i64) -> Self {
        StepFunction { breaks: vec![Fe::zero()], values: vec![v] }
    }

    fn merge_equal_neighbours(&mut self) {
        let mut b = Vec::with_capacity(self.breaks.len());
        let mut v: Vec<i64> = Vec::with_capacity(self.values.len());
        for (x, val) in self.breaks.drain(..).zip(self.values.drain(..)) {
            if v.last() == Some(&val) {
                continue;
            }
            b.push(x);
            v.push(val);
        }
        self.breaks = b;
        self.values = v;
    }

    pub fn breaks(&self) -> &[Fe] {
        &self.breaks
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    /// `(left, right, value)` for each cell; the last right end is 1.
    pub fn cells(&self) -> impl Iterator<Item = (&Fe, Fe, i64)> + '_ {
        let one = Fe::one();
        self.breaks.iter().enumerate().map(move |(i, l)| {
            let r = self.breaks.get(i + 1).cloned().unwrap_or_else(|| one.clone());
            (l, r, self.values[i])
        })
    }

    pub fn value_at(&self, x: &Fe) -> i64 {
        let x = x.frac();
        let idx = self.breaks.partition_point(|b| *b <= x);
        self.values[idx - 1]
    }

    pub fn level_set(&self, j: i64) -> IntervalUnion {
        let pieces = self.cells().filter(|c| c.2 == j).map(|(l, r, _)| (l.clone(), r)).collect();
        IntervalUnion::from_sorted(pieces)
    }

    /// Set where the predicate on the value holds.
    pub fn where_value(&self, pred: impl Fn(i64) -> bool) -> IntervalUnion {
        let pieces = self.cells().filter(|c| pred(c.2)).map(|(l, r, _)| (l.clone(), r)).collect();
        IntervalUnion::from_sorted(pieces)
    }

    /// Exact measure of every attained level.
    pub fn level_measures(&self) -> BTreeMap<i64, Fe> {
        let mut m: BTreeMap<i64, Fe> = BTreeMap::new();
        for (l, r, v) in self.cells() {
            let len = r - l;
            match m.get_mut(&v) {
                Some(acc) => *acc = &*acc + &len,
                None => {
                    m.insert(v, len);
                }
            }
        }
        m
    }

    pub fn value_range(&self) -> (i64, i64) {
        let min = *self.values.iter().min().expect("nonempty");
        let max = *self.values.iter().max().expect("nonempty");
        (min, max)
    }

    /// `∫ f dλ`.
    pub fn integral(&self) -> Fe {
        let mut s = Fe::zero();
        for (j, m) in self.level_measures() {
            s = s + m.mul_int(&BigInt::from(j));
        }
        s
    }

    /// Pointwise combination on the common refinement.
    pub fn combine(&self, other: &Self, f: impl Fn(i64, i64) -> i64) -> Self {
        let mut breaks = Vec::with_capacity(self.breaks.len() + other.breaks.len());
        let mut values = Vec::with_capacity(breaks.capacity());
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let x = match (self.breaks.get(i), other.breaks.get(j)) {
                (None, None) => break,
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (Some(a), Some(b)) => a.clone().min(b.clone()),
            };
            while i < self.breaks.len() && self.breaks[i] <= x {
                i += 1;
            }
            while j < other.breaks.len() && other.breaks[j] <= x {
                j += 1;
            }
            breaks.push(x);
            values.push(f(self.values[i - 1], other.values[j - 1]));
        }
        Self::new(breaks, values)
    }

    /// `x ↦ f(x + shift)`.
    pub fn shifted(&self, shift: &Fe) -> Self {
        let mut cells: Vec<(Fe, i64)> = self
            .breaks
            .iter()
            .zip(&self.values)
            .map(|(b, &v)| ((b - shift).frac(), v))
            .collect();
        cells.sort_by(|a, b| a.0.cmp(&b.0));
        let mut breaks: Vec<Fe> = Vec::with_capacity(cells.len() + 1);
        let mut values = Vec::with_capacity(cells.len() + 1);
        if !cells[0].0.is_zero() {
            breaks.push(Fe::zero());
            values.push(cells.last().expect("nonempty").1);
        }
        for (b, v) in cells {
            breaks.push(b);
            values.push(v);
        }
        Self::new(breaks, values)
    }

    /// `x ↦ f(R^n x)`.
    pub fn pullback(&self, n: i64, cf: &ContinuedFraction) -> Self {
        self.shifted(&cf.alpha().mul_int(&BigInt::from(n)))
    }

    pub fn map(&self, f: impl Fn(i64) -> i64) -> Self {
        Self::new(self.breaks.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// CSV rows `level,left_exact,right_exact,left_decimal,right_decimal,measure_decimal`.
    pub fn csv_rows(&self) -> Vec<[String; 6]> {
        self.cells()
            .map(|(l, r, v)| {
                let m = &r - l;
                [v.to_string(), l.to_string(), r.to_string(), l.decimal17(), r.decimal17(), m.decimal17()]
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// double-double positions for fast presorting

#[derive(Clone, Copy, Debug)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl Dd {
    pub fn of(x: &Fe) -> Dd {
        let hi = x.to_f64();
        let lo = (x - &Fe::from_ratio(&num_rational::BigRational::from_float(hi).expect("finite"))).to_f64();
        Dd { hi, lo }
    }

    /// `frac(self + n * step)`.
    pub fn orbit(self, n: i64, step: Dd) -> f64 {
        let nf = n as f64;
        let p = nf * step.hi;
        let pe = nf.mul_add(step.hi, -p);
        let (s, e) = two_sum(self.hi, p);
        let lo = e + pe + self.lo + nf * step.lo;
        let (s, lo) = two_sum(s, lo);
        let fl = s.floor();
        let r = (s - fl) + lo;
        if r >= 1.0 {
            r - 1.0
        } else if r < 0.0 {
            r + 1.0
        } else {
            r
        }
    }
}

/// Sort `(key, payload)` by exact value, using f64 keys and exact checks.
fn sort_points<T>(items: &mut [(f64, Fe, T)]) {
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ok = items.windows(2).all(|w| w[0].1 <= w[1].1);
    if !ok {
        items.sort_by(|a, b| a.1.cmp(&b.1));
    }
}

// ---------------------------------------------------------------------------
// ψ_L level sets

/// Level sets of `ψ_L` for `J = [l, l + len)` by a sweep over the `2L`
/// breakpoints `{l - iα}` (ψ jumps up) and `{r - iα}` (ψ jumps down).
pub fn psi_partition(l: u64, j: &Interval, cf: &ContinuedFraction) -> Result<StepFunction, CircleError> {
    psi_partition_capped(l, j, cf, SWEEP_CAP)
}

pub fn psi_partition_capped(
    l: u64,
    j: &Interval,
    cf: &ContinuedFraction,
    cap: u64,
) -> Result<StepFunction, CircleError> {
    if l == 0 {
        return Err(CircleError::ZeroLength);
    }
    if l > cap {
        return Err(CircleError::OverCap(l, cap));
    }
    let alpha = cf.alpha();
    let ends = [j.left().clone(), j.right()];
    let dd_a = Dd::of(alpha);
    let mut items: Vec<(f64, Fe, i64)> = Vec::with_capacity(2 * l as usize);
    for (e, jump) in ends.iter().zip([1i64, -1]) {
        let dd_e = Dd::of(e);
        let mut p = e.frac();
        for i in 0..l {
            if i > 0 {
                p = step_back(&p, alpha);
            }
            items.push((dd_e.orbit(-(i as i64), dd_a), p.clone(), jump));
        }
    }
    sort_points(&mut items);
    let start = psi_value(&Fe::zero(), l, j, cf) as i64;
    let mut breaks = vec![Fe::zero()];
    let mut values = vec![start];
    let mut v = start;
    let mut idx = 0;
    while idx < items.len() {
        let x = items[idx].1.clone();
        let mut jump = 0;
        while idx < items.len() && items[idx].1 == x {
            jump += items[idx].2;
            idx += 1;
        }
        if x.is_zero() {
            continue;
        }
        v += jump;
        breaks.push(x);
        values.push(v);
    }
    Ok(StepFunction::new(breaks, values))
}

/// Direct oracle: ψ_L evaluated at each cell's left end of the refinement
/// by all `2L` breakpoints, sorted exactly. Quadratic-free but slow; tests only.
pub fn psi_partition_direct(l: u64, j: &Interval, cf: &ContinuedFraction) -> StepFunction {
    let alpha = cf.alpha();
    let mut pts = vec![Fe::zero()];
    for e in [j.left().clone(), j.right()] {
        for i in 0..l {
            pts.push(rotate_big(&e, &BigInt::from(-(i as i64)), alpha));
        }
    }
    pts.sort();
    pts.dedup();
    let values = pts
        .iter()
        .map(|x| {
            let mut y = x.clone();
            let mut c = 0;
            for _ in 0..l {
                if j.contains(&y) {
                    c += 1;
                }
                y = step(&y, alpha);
            }
            c
        })
        .collect();
    StepFunction::new(pts, values)
}

/// Exact measures of the levels of `ψ_L` without listing its cells.
///
/// Every point is `R^t y` for a unique `y` in `D = {χ_J ≠ χ_J ∘ R^L}` and
/// `1 <= t <= τ_D(y)`, and ψ_L is constant along such a stretch, so the
/// level measures are `Σ τ · λ(piece)` over the pieces of `D` on which the
/// first-return time and `ψ_L ∘ R` are constant. Cost grows with
/// `L λ(D)`, so this suits `L` near multiples of convergent denominators.
pub fn psi_level_measures(l: u64, j: &Interval, cf: &ContinuedFraction) -> Result<BTreeMap<i64, Fe>, CircleError> {
    if l == 0 {
        return Err(CircleError::ZeroLength);
    }
    let alpha = cf.alpha();
    let ju = j.to_union();
    let d = ju.symmetric_difference(&ju.translate(&-alpha.mul_int(&BigInt::from(l))));
    if d.is_empty() {
        // ψ_L is constant: J is the whole circle or Lα is an integer.
        let v = psi_value(&Fe::zero(), l, j, cf) as i64;
        return Ok(BTreeMap::from([(v, Fe::one())]));
    }
    let back = (-alpha).frac();
    // ψ_L ∘ R jumps at l - sα and r - sα for 1 <= s <= L
    let mut cuts: Vec<Fe> = Vec::new();
    for e in [j.left().clone(), j.right()] {
        for s in hit_times(&e, &back, &d, 1, l + 1) {
            cuts.push(rotate_big(&e, &BigInt::from(-(s as i64)), alpha));
        }
    }
    let mut horizon = (Fe::integer(4) / d.measure()).ceil().to_u64().unwrap_or(u64::MAX / 4).max(16);
    loop {
        let mut all = cuts.clone();
        for (a, b) in d.pieces() {
            for e in [a, b] {
                for s in hit_times(e, &back, &d, 1, horizon + 1) {
                    all.push(rotate_big(e, &BigInt::from(-(s as i64)), alpha));
                }
            }
        }
        match tower_measures(l, j, &d, all, horizon, cf) {
            Some(m) => return Ok(m),
            None => horizon = horizon.saturating_mul(2),
        }
        if horizon > 1 << 50 {
            return Err(CircleError::NoReturn(horizon));
        }
    }
}

fn tower_measures(
    l: u64,
    j: &Interval,
    d: &IntervalUnion,
    cuts: Vec<Fe>,
    horizon: u64,
    cf: &ContinuedFraction,
) -> Option<BTreeMap<i64, Fe>> {
    let alpha = cf.alpha();
    let mut out: BTreeMap<i64, Fe> = BTreeMap::new();
    for (a, b) in d.pieces() {
        let mut pts: Vec<Fe> = cuts.iter().filter(|c| *c > a && *c < b).cloned().collect();
        pts.push(a.clone());
        pts.sort();
        pts.dedup();
        for (i, y) in pts.iter().enumerate() {
            let right = pts.get(i + 1).unwrap_or(b);
            let len = right - y;
            let tau = first_hit(y, alpha, d, 1, horizon + 1)?;
            let v = psi_value(&step(y, alpha), l, j, cf) as i64;
            let w = len.mul_int(&BigInt::from(tau));
            match out.get_mut(&v) {
                Some(acc) => *acc = &*acc + &w,
                None => {
                    out.insert(v, w);
                }
            }
        }
    }
    Some(out)
}

// ---------------------------------------------------------------------------
// gaps, returns, critical intervals

/// Minimum and maximum gap of `{R^i x}_{i<q_k}`, including the wrap gap.
///
/// Gaps depend only on index differences, so they are independent of `x`.
/// Small cases sort the points exactly. Large cases use the candidate cyclic
/// order `i ↦ i ± q_{k-1} mod q_k` and certify it: the gaps `frac((j-i)α)`
/// along any cyclic ordering sum to its winding number, which is 1 exactly
/// when the ordering is the true circular one.
pub fn gap_audit(x: &Fe, k: usize, cf: &ContinuedFraction) -> Result<(Fe, Fe), CircleError> {
    if k > cf.max_index() {
        return Err(CircleError::IndexTooLarge(k));
    }
    if cf.is_rational() {
        let period = cf.q(cf.max_index()).to_u64().unwrap_or(u64::MAX);
        if cf.q(k).to_u64().unwrap_or(u64::MAX) > period {
            return Err(CircleError::Rational(period));
        }
    }
    let n = cf.q_u64(k);
    if n == 1 {
        return Ok((Fe::one(), Fe::one()));
    }
    if n <= 4096 {
        return Ok(gap_audit_sorted(x, n, cf));
    }
    let alpha = cf.alpha();
    let qk = cf.q(k).clone();
    let qk1 = cf.q(k - 1).clone();
    let s = if cf.signed_norm(k - 1).is_positive() { qk1.clone() } else { -qk1.clone() };
    let wrap = if s.is_positive() { &s - &qk } else { &s + &qk };
    let g1 = alpha.mul_int(&s).frac();
    let g2 = alpha.mul_int(&wrap).frac();
    let total = g1.mul_int(&(&qk - &qk1)) + g2.mul_int(&qk1);
    assert_eq!(total, Fe::one(), "cyclic order certificate failed at k = {k}");
    Ok((g1.clone().min(g2.clone()), g1.max(g2)))
}

/// Exact sort of `N` orbit points; the oracle for [`gap_audit`].
pub fn gap_audit_sorted(x: &Fe, n: u64, cf: &ContinuedFraction) -> (Fe, Fe) {
    let alpha = cf.alpha();
    let mut pts = Vec::with_capacity(n as usize);
    let mut y = x.frac();
    for _ in 0..n {
        pts.push(y.clone());
        y = step(&y, alpha);
    }
    pts.sort();
    let mut gaps: Vec<Fe> = pts.windows(2).map(|w| &w[1] - &w[0]).collect();
    gaps.push(Fe::one() - (&pts[pts.len() - 1] - &pts[0]));
    let min = gaps.iter().min().expect("gaps").clone();
    let max = gaps.iter().max().expect("gaps").clone();
    (min, max)
}

/// First-return decomposition of an arc.
#[derive(Clone, Debug)]
pub struct ReturnPartition {
    pub interval: Interval,
    pub pieces: BTreeMap<u64, IntervalUnion>,
}

impl ReturnPartition {
    /// `Σ t · λ(piece_t)`, which is 1 by Kac's formula.
    pub fn kac_sum(&self) -> Fe {
        let mut s = Fe::zero();
        for (t, u) in &self.pieces {
            s = s + u.measure().mul_int(&BigInt::from(*t));
        }
        s
    }

    pub fn times(&self) -> Vec<u64> {
        self.pieces.keys().copied().collect()
    }
}

pub fn return_partition(i: &Interval, cf: &ContinuedFraction) -> Result<ReturnPartition, CircleError> {
    let alpha = cf.alpha();
    let u = i.to_union();
    let back = (-alpha).frac();
    let mut horizon = (Fe::integer(4) / i.measure()).ceil().to_u64().unwrap_or(u64::MAX / 4).max(8);
    'grow: loop {
        if horizon > 1 << 50 {
            return Err(CircleError::NoReturn(horizon));
        }
        let mut cuts = vec![i.left().clone()];
        let right = i.right().frac();
        for e in [i.left().clone(), right] {
            for s in hit_times(&e, &back, &u, 1, horizon + 1) {
                cuts.push(rotate_big(&e, &BigInt::from(-(s as i64)), alpha));
            }
        }
        // order cuts along the arc starting at its left end
        cuts.sort_by_key(|a| (a - i.left()).frac());
        cuts.dedup();
        let mut pieces: BTreeMap<u64, Vec<(Fe, Fe)>> = BTreeMap::new();
        for (idx, c) in cuts.iter().enumerate() {
            let offset = (c - i.left()).frac();
            let next = match cuts.get(idx + 1) {
                Some(n) => (n - i.left()).frac(),
                None => i.measure().clone(),
            };
            let Some(t) = first_hit(c, alpha, &u, 1, horizon + 1) else {
                horizon *= 2;
                continue 'grow;
            };
            let piece = Interval::arc(c, &(next - offset)).expect("positive piece");
            pieces.entry(t).or_default().extend(piece.to_union().pieces);
        }
        let pieces = pieces.into_iter().map(|(t, p)| (t, IntervalUnion::from_pieces(p))).collect();
        return Ok(ReturnPartition { interval: i.clone(), pieces });
    }
}

/// The arc of length `β_k` used for the return-time dichotomy:
/// `[0, β_k)` for odd `k`, `[-β_k, 0)` for even `k`.
pub fn return_interval(k: usize, cf: &ContinuedFraction) -> Interval {
    let b = cf.beta(k);
    if k % 2 == 1 {
        Interval::arc(&Fe::zero(), &b).expect("beta in (0,1]")
    } else {
        Interval::arc(&-&b, &b).expect("beta in (0,1]")
    }
}

/// Which end of the arc the longer-return piece occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum End {
    Left,
    Right,
    Neither,
}

/// Locate the piece with the larger return time inside its arc.
pub fn long_piece_end(p: &ReturnPartition) -> End {
    let Some((_, long)) = p.pieces.iter().next_back() else {
        return End::Neither;
    };
    let comps = long.components();
    if comps.len() != 1 {
        return End::Neither;
    }
    let c = &comps[0];
    let start = (c.left() - p.interval.left()).frac();
    if start.is_zero() {
        End::Left
    } else if &start + c.measure() == *p.interval.measure() {
        End::Right
    } else {
        End::Neither
    }
}

/// Which of the two critical intervals attached to `J = [0, z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// the one at 0
    Origin,
    /// the one at z
    End,
}

/// Critical intervals of length `β_k`: for odd `k`, `[-β_k, 0)` and
/// `[z-β_k, z)`; for even `k`, the mirrored `[0, β_k)` and `[z, z+β_k)`.
pub fn critical_interval(k: usize, side: Side, z: &Fe, cf: &ContinuedFraction) -> Interval {
    let b = cf.beta(k);
    let base = match side {
        Side::Origin => Fe::zero(),
        Side::End => z.clone(),
    };
    let left = if k % 2 == 1 { &base - &b } else { base };
    Interval::arc(&left, &b).expect("beta in (0,1]")
}

/// Smallest `b` with `2^b > 12/γ`; the lower-bound statement then uses `u = 2b`.
pub fn hitting_u(gamma: &Fe) -> u32 {
    let target = Fe::integer(12) / gamma;
    let mut b = 0u32;
    while Fe::integer(BigInt::one() << b) <= target {
        b += 1;
    }
    2 * b
}
