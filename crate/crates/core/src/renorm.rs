//! Flat tori under the diagonal flow `g_t = diag(e^t, e^{-t})`: systoles,
//! the distance between the two marked points, the index function
//! `f(t) = max{j : q_j <= e^t}`, and per-window statistics over
//! `[log q_k, log q_{k+1})`.
//!
//! The flowed lattice of a rotation has vectors `(e^t (a - bα), e^{-t} b)`.
//! Reduction runs on the integer coefficients `(a, b)` and evaluates
//! `a - bα` in double-double, so there is no cancellation even when `e^t`
//! is large.

use serde::Serialize;

use crate::cf::ContinuedFraction;
use crate::circle::{self, Dd, Interval, IntervalUnion};
use crate::field::FieldElement as Fe;

/// Slack for every floating comparison in this module.
pub const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenormError {
    #[error("degenerate basis")]
    Degenerate,
    #[error("step must be positive")]
    BadStep,
    #[error("k = {0} is beyond the continued-fraction table")]
    IndexTooLarge(usize),
}

/// A planar lattice given by two basis vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub v1: [f64; 2],
    pub v2: [f64; 2],
}

fn dot(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

impl Lattice {
    pub fn new(v1: [f64; 2], v2: [f64; 2]) -> Result<Self, RenormError> {
        let l = Lattice { v1, v2 };
        if l.det().abs() < 1e-300 || !l.det().is_finite() {
            return Err(RenormError::Degenerate);
        }
        Ok(l)
    }

    pub fn det(&self) -> f64 {
        self.v1[0] * self.v2[1] - self.v1[1] * self.v2[0]
    }

    /// `g_t` applied to both basis vectors.
    pub fn flow(&self, t: f64) -> Lattice {
        let (e, f) = (t.exp(), (-t).exp());
        Lattice { v1: [e * self.v1[0], f * self.v1[1]], v2: [e * self.v2[0], f * self.v2[1]] }
    }

    /// Lagrange–Gauss reduction; the first vector is a shortest one.
    pub fn reduced(&self) -> Lattice {
        let (mut u, mut w) = (self.v1, self.v2);
        if dot(u, u) > dot(w, w) {
            std::mem::swap(&mut u, &mut w);
        }
        for _ in 0..10_000 {
            let mu = (dot(u, w) / dot(u, u)).round();
            w = [w[0] - mu * u[0], w[1] - mu * u[1]];
            if dot(w, w) >= dot(u, u) {
                break;
            }
            std::mem::swap(&mut u, &mut w);
        }
        Lattice { v1: u, v2: w }
    }

    pub fn systole(&self) -> f64 {
        let r = self.reduced();
        dot(r.v1, r.v1).sqrt()
    }

    /// Shortest nonzero `i v1 + j v2` over `|i|, |j| <= bound`; the oracle for
    /// [`Lattice::systole`].
    pub fn systole_exhaustive(&self, bound: i64) -> f64 {
        let mut best = f64::INFINITY;
        for i in -bound..=bound {
            for j in -bound..=bound {
                if i == 0 && j == 0 {
                    continue;
                }
                let v = [i as f64 * self.v1[0] + j as f64 * self.v2[0], i as f64 * self.v1[1] + j as f64 * self.v2[1]];
                best = best.min(dot(v, v).sqrt());
            }
        }
        best
    }
}

/// A unimodular lattice with two marked points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkedTorus {
    pub lattice: Lattice,
    pub marked: [[f64; 2]; 2],
}

/// The torus of the rotation by `α`: basis `(1, 0)`, `(-α, 1)`, marked
/// points `(0, 0)` and `(z, 0)`.
pub fn torus_from_alpha(alpha: f64, z: Option<f64>) -> MarkedTorus {
    let lattice = Lattice { v1: [1.0, 0.0], v2: [-alpha, 1.0] };
    MarkedTorus { lattice, marked: [[0.0, 0.0], [z.unwrap_or(0.0), 0.0]] }
}

// ---------------------------------------------------------------------------
// accurate flowed lattice of a rotation

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `c + b α - a` in double-double, returned as f64.
fn offset(c: Dd, a: i128, b: i128, alpha: Dd) -> f64 {
    let (bh, bl) = split_i128(b);
    let (ah, al) = split_i128(a);
    let (p1, e1) = two_prod(bh, alpha.hi);
    let (p2, e2) = two_prod(bl, alpha.hi);
    // terms ordered so the large ones cancel first
    let s = (p1 - ah) + (p2 - al) + c.hi;
    s + (e1 + e2 + bh * alpha.lo + bl * alpha.lo + c.lo)
}

/// `x = hi + lo` with both parts exact doubles (|x| < 2^100).
fn split_i128(x: i128) -> (f64, f64) {
    let hi = x as f64;
    let lo = (x - hi as i128) as f64;
    (hi, lo)
}

/// The lattice `{(a - bα, b)}` of a rotation, with its marked point `z`,
/// evaluated accurately along the flow.
#[derive(Debug, Clone)]
pub struct RotationTorus {
    alpha: Dd,
    z: Dd,
}

type Coeffs = [i128; 2];

impl RotationTorus {
    pub fn new(alpha: &Fe, z: &Fe) -> Self {
        RotationTorus { alpha: Dd::of(alpha), z: Dd::of(z) }
    }

    fn vector(&self, c: Coeffs, t: f64) -> [f64; 2] {
        let x = -offset(Dd { hi: 0.0, lo: 0.0 }, c[0], c[1], self.alpha);
        [t.exp() * x, (-t).exp() * c[1] as f64]
    }

    fn norm2(&self, c: Coeffs, t: f64) -> f64 {
        let v = self.vector(c, t);
        dot(v, v)
    }

    /// Reduced coefficient basis at time `t`, starting from `start`.
    fn reduce(&self, start: [Coeffs; 2], t: f64) -> [Coeffs; 2] {
        let [mut u, mut w] = start;
        if self.norm2(u, t) > self.norm2(w, t) {
            std::mem::swap(&mut u, &mut w);
        }
        for _ in 0..100_000 {
            let (vu, vw) = (self.vector(u, t), self.vector(w, t));
            let mu = (dot(vu, vw) / dot(vu, vu)).round() as i128;
            w = [w[0] - mu * u[0], w[1] - mu * u[1]];
            if self.norm2(w, t) >= self.norm2(u, t) {
                break;
            }
            std::mem::swap(&mut u, &mut w);
        }
        [u, w]
    }

    fn standard() -> [Coeffs; 2] {
        [[1, 0], [0, 1]]
    }

    /// `(systole, (a, b))` of `g_t` applied to the lattice.
    pub fn systole(&self, t: f64) -> (f64, (i128, i128)) {
        let [u, _] = self.reduce(Self::standard(), t);
        (self.norm2(u, t).sqrt(), (u[0], u[1]))
    }

    /// Distance between the two marked points on the flowed torus.
    pub fn marked_separation(&self, t: f64) -> f64 {
        let basis = self.reduce(Self::standard(), t);
        self.separation_with(basis, t)
    }

    fn separation_with(&self, [u, w]: [Coeffs; 2], t: f64) -> f64 {
        // target (e^t z, 0) in the plane; solve for approximate coordinates
        let (vu, vw) = (self.vector(u, t), self.vector(w, t));
        let target = [t.exp() * self.z.hi, 0.0];
        let det = vu[0] * vw[1] - vu[1] * vw[0];
        let n1 = ((target[0] * vw[1] - target[1] * vw[0]) / det).round() as i128;
        let n2 = ((vu[0] * target[1] - vu[1] * target[0]) / det).round() as i128;
        let mut best = f64::INFINITY;
        for d1 in -2..=2 {
            for d2 in -2..=2 {
                let (m1, m2) = (n1 + d1, n2 + d2);
                let a = m1 * u[0] + m2 * w[0];
                let b = m1 * u[1] + m2 * w[1];
                let x = t.exp() * offset(self.z, a, b, self.alpha);
                let y = (-t).exp() * b as f64;
                best = best.min((x * x + y * y).sqrt());
            }
        }
        best
    }
}

/// `f(t) = max{j : q_j <= e^t}`.
pub fn f_of_t(cf: &ContinuedFraction, t: f64) -> usize {
    let bound = t.exp() * (1.0 + 1e-12);
    let mut j = 0;
    while j < cf.max_index() && (cf.q(j + 1).to_string().parse::<f64>().unwrap_or(f64::INFINITY)) <= bound {
        j += 1;
    }
    j
}

fn ln_q(cf: &ContinuedFraction, k: usize) -> f64 {
    let q: f64 = cf.q(k).to_string().parse().expect("q_k as float");
    q.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub t: f64,
    pub systole: f64,
    pub marked_separation: f64,
    pub f_of_t: usize,
}

/// Samples on the grid `0, step, 2 step, ... <= t_max`.
pub fn geodesic_profile(cf: &ContinuedFraction, z: &Fe, t_max: f64, step: f64) -> Result<Vec<ProfileRow>, RenormError> {
    if step.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(RenormError::BadStep);
    }
    let torus = RotationTorus::new(cf.alpha(), z);
    let n = (t_max / step).floor() as usize;
    let mut basis = RotationTorus::standard();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = i as f64 * step;
        basis = torus.reduce(basis, t);
        out.push(ProfileRow {
            t,
            systole: torus.norm2(basis[0], t).sqrt(),
            marked_separation: torus.separation_with(basis, t),
            f_of_t: f_of_t(cf, t),
        });
    }
    Ok(out)
}

/// Measure of `{t : g(t) >= level}` for a function sampled on a uniform
/// grid, interpolating linearly between nodes.
fn superlevel_measure(values: &[f64], h: f64, level: f64) -> f64 {
    let mut m = 0.0;
    for w in values.windows(2) {
        let (a, b) = (w[0] - level, w[1] - level);
        m += if a >= 0.0 && b >= 0.0 {
            h
        } else if a < 0.0 && b < 0.0 {
            0.0
        } else if a >= 0.0 {
            h * a / (a - b)
        } else {
            h * b / (b - a)
        };
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSummary {
    pub k: usize,
    pub log_qk: f64,
    pub window_length: f64,
    pub min_systole: f64,
    /// measure of `{t : systole >= δ}` for each configured `δ`
    pub compact_time: Vec<f64>,
    /// same with the marked separation also `>= δ`
    pub compact_time_marked: Vec<f64>,
}

/// Statistics over each window `[log q_k, log q_{k+1})`, sampled with a
/// step no larger than `step`.
pub fn window_stats(
    cf: &ContinuedFraction,
    z: &Fe,
    ks: std::ops::RangeInclusive<usize>,
    deltas: &[f64],
    step: f64,
) -> Result<Vec<WindowSummary>, RenormError> {
    if step.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(RenormError::BadStep);
    }
    let torus = RotationTorus::new(cf.alpha(), z);
    let mut out = Vec::new();
    for k in ks {
        if k + 1 > cf.max_index() {
            return Err(RenormError::IndexTooLarge(k + 1));
        }
        let (t0, t1) = (ln_q(cf, k), ln_q(cf, k + 1));
        let len = t1 - t0;
        let n = ((len / step).ceil() as usize).max(1);
        let h = len / n as f64;
        let mut sys = Vec::with_capacity(n + 1);
        let mut both = Vec::with_capacity(n + 1);
        let mut basis = RotationTorus::standard();
        for i in 0..=n {
            let t = t0 + i as f64 * h;
            basis = torus.reduce(basis, t);
            let s = torus.norm2(basis[0], t).sqrt();
            sys.push(s);
            both.push(s.min(torus.separation_with(basis, t)));
        }
        out.push(WindowSummary {
            k,
            log_qk: t0,
            window_length: len,
            min_systole: sys.iter().cloned().fold(f64::INFINITY, f64::min),
            compact_time: deltas.iter().map(|&d| superlevel_measure(&sys, h, d)).collect(),
            compact_time_marked: deltas.iter().map(|&d| superlevel_measure(&both, h, d)).collect(),
        });
    }
    Ok(out)
}

/// Largest minus smallest compact time at `delta_index` over the windows.
pub fn window_spread(rows: &[WindowSummary], delta_index: usize) -> f64 {
    let v: Vec<f64> = rows.iter().map(|r| r.compact_time[delta_index]).collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

/// Closest approach of the orbit of one marked point to the other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Approach {
    pub k: usize,
    /// least `j >= 1` with `d(R^j 0, z) <= β_k`
    pub from_origin: Option<u64>,
    /// least `j >= 1` with `d(R^j z, 0) <= β_k`
    pub from_z: Option<u64>,
    pub horizon: u64,
}

impl Approach {
    pub fn min(&self) -> Option<u64> {
        match (self.from_origin, self.from_z) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// `q_k / j`, or `q_k / horizon` as a bound when no approach was found.
    pub fn margin(&self, cf: &ContinuedFraction) -> f64 {
        let q = cf.q_u64(self.k) as f64;
        q / self.min().unwrap_or(self.horizon) as f64
    }
}

/// Exact search for `1 <= j <= horizon` with `d(jα, center) <= radius`.
fn first_approach(center: &Fe, radius: &Fe, horizon: u64, cf: &ContinuedFraction) -> Option<u64> {
    let alpha = cf.alpha();
    let arc = Interval::arc(&(center - radius), &radius.mul_int(&num_bigint::BigInt::from(2))).ok()?;
    let u: IntervalUnion = arc.to_union();
    let open = circle::first_hit(&Fe::zero(), alpha, &u, 1, horizon + 1);
    // the closed right end is hit by at most one orbit point
    let edge = circle::orbit_index(&(center + radius), alpha).filter(|&j| j >= 1 && j as u64 <= horizon);
    match (open, edge) {
        (Some(a), Some(b)) => Some(a.min(b as u64)),
        (a, b) => a.or(b.map(|j| j as u64)),
    }
}

pub fn vertical_approach(cf: &ContinuedFraction, z: &Fe, k: usize, horizon: u64) -> Result<Approach, RenormError> {
    if k > cf.max_index() {
        return Err(RenormError::IndexTooLarge(k));
    }
    let beta = cf.beta(k);
    let from_origin = first_approach(z, &beta, horizon, cf);
    let from_z = first_approach(&(-z).frac(), &beta, horizon, cf);
    Ok(Approach { k, from_origin, from_z, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn golden() -> ContinuedFraction {
        ContinuedFraction::golden(60)
    }

    #[test]
    fn basic_lattices() {
        let sq = torus_from_alpha(0.0, None).lattice;
        assert_eq!(sq.systole(), 1.0);
        assert!((sq.flow(1.0).systole() - (-1.0f64).exp()).abs() < 1e-15);
        let g = torus_from_alpha(golden().alpha().to_f64(), Some(0.7));
        assert_eq!(g.lattice.det(), 1.0);
        assert!(Lattice::new([1.0, 2.0], [2.0, 4.0]).is_err());
    }

    #[test]
    fn systole_at_log5() {
        let cf = golden();
        let torus = RotationTorus::new(cf.alpha(), &Fe::rational(7, 10));
        let (s, (a, b)) = torus.systole(5f64.ln());
        assert!((s - 0.94454).abs() < 1e-5, "{s}");
        assert_eq!(b.abs(), 3);
        assert_eq!(a.abs(), 2);
        let lat = torus_from_alpha(cf.alpha().to_f64(), None).lattice.flow(5f64.ln());
        assert!((lat.systole_exhaustive(50) - s).abs() < 1e-12);
    }

    #[test]
    fn reduction_matches_exhaustive_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a: f64 = rng.gen_range(-2.0..2.0);
            let b: f64 = rng.gen_range(-2.0..2.0);
            let c: f64 = rng.gen_range(-2.0..2.0);
            let d: f64 = rng.gen_range(-2.0..2.0);
            let Ok(l) = Lattice::new([a, b], [c, d]) else { continue };
            if l.det().abs() < 0.05 {
                continue;
            }
            let fast = l.systole();
            let slow = l.systole_exhaustive(50);
            assert!((fast - slow).abs() < 1e-9, "{l:?}: {fast} vs {slow}");
        }
    }

    #[test]
    fn index_function() {
        let cf = golden();
        assert_eq!(f_of_t(&cf, 10f64.ln()), 5);
        for k in 1..30 {
            assert_eq!(f_of_t(&cf, ln_q(&cf, k)), k);
        }
    }

    #[test]
    fn approach_example() {
        let cf = golden();
        let a = vertical_approach(&cf, &Fe::rational(7, 10), 5, 1000).unwrap();
        assert_eq!(a.from_origin, Some(6));
        assert_eq!(a.min(), Some(6));
        assert!((a.margin(&cf) - 8.0 / 6.0).abs() < 1e-12);
        let on_orbit = vertical_approach(&cf, &cf.alpha().clone(), 9, 1000).unwrap();
        assert_eq!(on_orbit.from_origin, Some(1));
    }

    #[test]
    fn flow_is_log_lipschitz() {
        let cf = golden();
        let torus = RotationTorus::new(cf.alpha(), &Fe::rational(7, 10));
        let mut prev = torus.systole(0.0).0.ln();
        for i in 1..=200 {
            let t = i as f64 * 0.05;
            let cur = torus.systole(t).0.ln();
            assert!((cur - prev).abs() <= 0.05 + SLACK);
            prev = cur;
        }
    }
}
