//! Three-interval exchanges with permutation (3 2 1), realized as the map
//! induced by a rotation on `J = [0, z)`.
//!
//! With `z >= max(α, 1 - α)` the complement `[z, 1)` is crossed in a single
//! step, so `T x = R x` when `R x ∈ J` and `T x = R² x` otherwise.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::cf::ContinuedFraction;
use crate::circle::{self, count_in_union, rotate_big, Dd, Interval, IntervalUnion};
use crate::field::FieldElement as Fe;

/// Above this many steps `T^k` is located by counting instead of iterating.
pub const DIRECT_STEPS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IetError {
    #[error("lengths must be positive")]
    NonPositiveLength,
    #[error("rotation number {0} is rational")]
    RationalRotation(Fe),
    #[error("z = {z} violates z >= max(alpha, 1 - alpha)")]
    StandingAssumption { z: Fe },
    #[error("z = {z} makes a length vanish; the exchange has only two intervals")]
    Degenerate { z: Fe },
    #[error("z must lie in (0, 1]")]
    BadZ,
    #[error("point {0} is not in J")]
    OutsideJ(Fe),
}

/// Lengths `(ℓ1, ℓ2, ℓ3)` of the exchanged intervals, permutation (3 2 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthData {
    pub l1: Fe,
    pub l2: Fe,
    pub l3: Fe,
}

impl LengthData {
    pub fn new(l1: Fe, l2: Fe, l3: Fe) -> Result<Self, IetError> {
        if !(l1.is_positive() && l2.is_positive() && l3.is_positive()) {
            return Err(IetError::NonPositiveLength);
        }
        Ok(LengthData { l1, l2, l3 })
    }

    pub fn total(&self) -> Fe {
        &(&self.l1 + &self.l2) + &self.l3
    }
}

/// The rotation `(α, z)` whose induced map on `[0, z)` is the exchange with
/// these lengths, after rescaling the circle `[0, ℓ1 + 2ℓ2 + ℓ3)` to length 1.
pub fn lengths_to_rotation(l: &LengthData) -> Result<(Fe, Fe), IetError> {
    let tau = &(&l.l1 + &l.l2.mul_int(&BigInt::from(2))) + &l.l3;
    let alpha = &(&l.l2 + &l.l3) / &tau;
    let z = &l.total() / &tau;
    if alpha.is_rational() {
        return Err(IetError::RationalRotation(alpha));
    }
    Ok((alpha, z))
}

/// Inverse of [`lengths_to_rotation`], normalized to total circle length 1.
pub fn rotation_to_lengths(alpha: &Fe, z: &Fe) -> Result<LengthData, IetError> {
    check_z(alpha, z)?;
    let one = Fe::one();
    let l1 = z - alpha;
    let l2 = &one - z;
    let l3 = alpha - &l2;
    LengthData::new(l1, l2, l3).map_err(|_| IetError::Degenerate { z: z.clone() })
}

fn check_z(alpha: &Fe, z: &Fe) -> Result<(), IetError> {
    if !z.is_positive() || *z > Fe::one() {
        return Err(IetError::BadZ);
    }
    let lower = alpha.clone().max(Fe::one() - alpha);
    if *z < lower {
        return Err(IetError::StandingAssumption { z: z.clone() });
    }
    Ok(())
}

/// A rotation by an irrational `α` together with `J = [0, z)`.
#[derive(Debug, Clone)]
pub struct IetSystem {
    cf: ContinuedFraction,
    z: Fe,
    j: Interval,
    j_union: IntervalUnion,
}

#[derive(Serialize)]
struct SystemJson {
    alpha_exact: String,
    z_exact: String,
    d: i64,
    lengths_decimal: Vec<f64>,
}

impl IetSystem {
    /// Accepts `z >= max(α, 1 - α)`, including the degenerate ends where a
    /// length vanishes; [`IetSystem::lengths`] reports those.
    pub fn new(cf: ContinuedFraction, z: Fe) -> Result<Self, IetError> {
        if cf.alpha().is_rational() {
            return Err(IetError::RationalRotation(cf.alpha().clone()));
        }
        let z = z.in_field_of(cf.alpha()).map_err(|_| IetError::BadZ)?;
        check_z(cf.alpha(), &z)?;
        let j = Interval::initial(&z).map_err(|_| IetError::BadZ)?;
        let j_union = j.to_union();
        Ok(IetSystem { cf, z, j, j_union })
    }

    pub fn from_lengths(l: &LengthData, depth: usize) -> Result<Self, IetError> {
        let (alpha, z) = lengths_to_rotation(l)?;
        let cf = ContinuedFraction::new(alpha.clone(), depth).map_err(|_| IetError::RationalRotation(alpha))?;
        Self::new(cf, z)
    }

    pub fn cf(&self) -> &ContinuedFraction {
        &self.cf
    }

    pub fn alpha(&self) -> &Fe {
        self.cf.alpha()
    }

    pub fn z(&self) -> &Fe {
        &self.z
    }

    pub fn j(&self) -> &Interval {
        &self.j
    }

    pub fn j_union(&self) -> &IntervalUnion {
        &self.j_union
    }

    pub fn in_j(&self, x: &Fe) -> bool {
        !x.is_negative() && x < &self.z
    }

    pub fn lengths(&self) -> Result<LengthData, IetError> {
        rotation_to_lengths(self.alpha(), &self.z)
    }

    /// The three branches `(piece, translation)`: `T x = x + translation` on
    /// each piece. Pieces are listed left to right; empty ones are skipped.
    pub fn branches(&self) -> Vec<(Interval, Fe)> {
        let a = self.alpha();
        let one = Fe::one();
        let cuts = [Fe::zero(), &self.z - a, &one - a, self.z.clone()];
        let shifts = [a.clone(), &a.mul_int(&BigInt::from(2)) - &one, a - &one];
        let mut out = Vec::new();
        for i in 0..3 {
            if cuts[i] < cuts[i + 1] {
                out.push((Interval::new(&cuts[i], &cuts[i + 1]).expect("ordered cuts"), shifts[i].clone()));
            }
        }
        out
    }

    /// `T x` for `x ∈ J`.
    pub fn step(&self, x: &Fe) -> Fe {
        let y = circle::step(x, self.alpha());
        if self.in_j(&y) {
            y
        } else {
            circle::step(&y, self.alpha())
        }
    }

    /// `T^{-1} x` for `x ∈ J`.
    pub fn step_back(&self, x: &Fe) -> Fe {
        let y = circle::step_back(x, self.alpha());
        if self.in_j(&y) {
            y
        } else {
            circle::step_back(&y, self.alpha())
        }
    }

    /// `T^k x`, exact, for any integer `k`.
    pub fn apply(&self, x: &Fe, k: i64) -> Result<Fe, IetError> {
        if !self.in_j(x) {
            return Err(IetError::OutsideJ(x.clone()));
        }
        let n = k.unsigned_abs();
        if n <= DIRECT_STEPS {
            let mut y = x.clone();
            for _ in 0..n {
                y = if k > 0 { self.step(&y) } else { self.step_back(&y) };
            }
            return Ok(y);
        }
        let m = self.return_time(x, k);
        Ok(rotate_big(x, &BigInt::from(m), self.alpha()))
    }

    /// The signed rotation time `M` with `T^k x = R^M x`.
    ///
    /// For `k > 0`, `M` is the `(k+1)`-th visit time of the forward orbit to
    /// `J` (time 0 is the first), so `M ∈ [k, 2k]`; backwards likewise.
    pub fn return_time(&self, x: &Fe, k: i64) -> i64 {
        let n = k.unsigned_abs();
        if n == 0 {
            return 0;
        }
        let step = if k > 0 { self.alpha().clone() } else { (-self.alpha()).frac() };
        // smallest M with count(M + 1) = n + 1
        let (mut lo, mut hi) = (n, 2 * n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if count_in_union(x, &step, &self.j_union, mid + 1) > n {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let m = lo.to_i64().expect("time fits i64");
        if k > 0 {
            m
        } else {
            -m
        }
    }

    /// `ψ_M(x)`, the number of visits to `J` among `x, R x, ..., R^{M-1} x`.
    pub fn psi(&self, x: &Fe, m: u64) -> u64 {
        circle::psi_value(x, m, &self.j, &self.cf)
    }

    /// Checks `T^{ψ_M(x)} x = R^M x`; `None` when `x` or `R^M x` is outside `J`.
    pub fn induced_identity_check(&self, x: &Fe, m: u64) -> Option<bool> {
        let rm = rotate_big(x, &BigInt::from(m), self.alpha());
        if !self.in_j(x) || !self.in_j(&rm) {
            return None;
        }
        let k = self.psi(x, m) as i64;
        Some(self.apply(x, k).ok()? == rm)
    }

    /// Positions of `T x0, T² x0, ..., T^n x0` as floats.
    ///
    /// Tracks the rotation time `M` exactly and evaluates `frac(x0 + Mα)` in
    /// double-double; membership tests that land within `1e-20` of an
    /// endpoint are redone exactly.
    pub fn fast_orbit(&self, x0: &Fe, n: usize) -> Vec<f64> {
        let a = Dd::of(self.alpha());
        let base = Dd::of(x0);
        let z = self.z.to_f64();
        let mut m: i64 = 0;
        let mut out = Vec::with_capacity(n);
        let near = |y: f64| y < 1e-20 || (y - z).abs() < 1e-20 || 1.0 - y < 1e-20;
        for _ in 0..n {
            m += 1;
            let y = base.orbit(m, a);
            let inside = if near(y) {
                self.in_j(&rotate_big(x0, &BigInt::from(m), self.alpha()))
            } else {
                y < z
            };
            if inside {
                out.push(y);
            } else {
                m += 1;
                out.push(base.orbit(m, a));
            }
        }
        out
    }

    /// `T^{-1}(U)` for `U ⊂ J`, assembled from the branches.
    pub fn preimage(&self, u: &IntervalUnion) -> IntervalUnion {
        let u = u.intersection(&self.j_union);
        let mut out = IntervalUnion::empty();
        for (piece, shift) in self.branches() {
            let p = piece.to_union();
            out = out.union(&p.intersection(&u.translate(&-shift)));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let d = self.alpha().radicand().and_then(|d| d.to_i64()).unwrap_or(1);
        let lengths_decimal = match self.lengths() {
            Ok(l) => vec![l.l1.to_f64(), l.l2.to_f64(), l.l3.to_f64()],
            Err(_) => {
                let one = Fe::one();
                let a = self.alpha();
                vec![(&self.z - a).to_f64(), (&one - &self.z).to_f64(), (a - &(&one - &self.z)).to_f64()]
            }
        };
        serde_json::to_value(SystemJson {
            alpha_exact: self.alpha().to_string(),
            z_exact: self.z.to_string(),
            d,
            lengths_decimal,
        })
        .expect("plain struct")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_system() -> IetSystem {
        IetSystem::new(ContinuedFraction::golden(60), Fe::rational(7, 10)).unwrap()
    }

    #[test]
    fn length_roundtrip() {
        let cf = ContinuedFraction::golden(60);
        let a = cf.alpha().clone();
        let l = LengthData::new(Fe::rational(7, 10) - &a, Fe::rational(3, 10), &a - &Fe::rational(3, 10)).unwrap();
        let (alpha, z) = lengths_to_rotation(&l).unwrap();
        assert_eq!((alpha.clone(), z.clone()), (a.clone(), Fe::rational(7, 10)));
        assert_eq!(rotation_to_lengths(&alpha, &z).unwrap(), l);
        assert_eq!(l.l1.to_decimal(6), "0.081966");
        let ones = LengthData::new(Fe::one(), Fe::one(), Fe::one()).unwrap();
        assert!(matches!(lengths_to_rotation(&ones), Err(IetError::RationalRotation(_))));
        assert!(matches!(rotation_to_lengths(&a, &a), Err(IetError::Degenerate { .. })));
        assert!(matches!(rotation_to_lengths(&a, &Fe::rational(1, 2)), Err(IetError::StandingAssumption { .. })));
    }

    #[test]
    fn single_steps() {
        let s = golden_system();
        assert_eq!(s.step(&Fe::zero()), s.alpha().clone());
        let t = s.step(&Fe::rational(15, 100));
        assert_eq!(t.to_decimal(6), "0.386068");
        assert_eq!(s.step_back(&t), Fe::rational(15, 100));
    }

    #[test]
    fn branches_agree_with_steps() {
        let s = golden_system();
        let br = s.branches();
        assert_eq!(br.len(), 3);
        for i in 1..70 {
            let x = Fe::rational(i, 100);
            let (_, sh) = br.iter().find(|(p, _)| p.contains(&x)).unwrap();
            assert_eq!(&x + sh, s.step(&x));
        }
    }

    #[test]
    fn fast_powers_match_iteration() {
        let s = golden_system();
        let x = Fe::rational(1, 7);
        let mut y = x.clone();
        let mut back = x.clone();
        for k in 1..=1500i64 {
            y = s.step(&y);
            back = s.step_back(&back);
            if k % 250 == 0 || k > 1495 {
                let m = s.return_time(&x, k);
                assert_eq!(rotate_big(&x, &BigInt::from(m), s.alpha()), y, "k = {k}");
                let mb = s.return_time(&x, -k);
                assert_eq!(rotate_big(&x, &BigInt::from(mb), s.alpha()), back, "k = -{k}");
            }
        }
        assert_eq!(s.apply(&x, 1500).unwrap(), y);
        assert_eq!(s.apply(&s.apply(&x, 123_456).unwrap(), -123_456).unwrap(), x);
    }

    #[test]
    fn identity_examples() {
        let s = golden_system();
        assert_eq!(s.psi(&Fe::zero(), 2), 2);
        assert_eq!(s.induced_identity_check(&Fe::zero(), 2), Some(true));
        assert_eq!(s.induced_identity_check(&Fe::rational(1, 3), 0), Some(true));
        assert_eq!(s.induced_identity_check(&Fe::rational(9, 10), 5), None);
    }

    #[test]
    fn preimage_preserves_measure() {
        let s = golden_system();
        let u = IntervalUnion::from_pieces(vec![(Fe::rational(1, 20), Fe::rational(3, 5))]);
        let p = s.preimage(&u);
        assert_eq!(p.measure(), u.measure());
        for i in 0..70 {
            let x = Fe::rational(i, 100);
            assert_eq!(p.contains(&x), u.contains(&s.step(&x)));
        }
    }

    #[test]
    fn fast_orbit_matches_exact() {
        let s = golden_system();
        let x = Fe::rational(1, 7);
        let fast = s.fast_orbit(&x, 3000);
        let mut y = x.clone();
        for (i, f) in fast.iter().enumerate() {
            y = s.step(&y);
            assert!((y.to_f64() - f).abs() < 1e-13, "step {}", i + 1);
        }
        // an orbit passing exactly through 0
        let zero = s.fast_orbit(&Fe::zero(), 10);
        assert!((zero[0] - s.alpha().to_f64()).abs() < 1e-15);
    }

    #[test]
    fn json_shape() {
        let v = golden_system().to_json();
        assert_eq!(v["d"], 5);
        assert_eq!(v["z_exact"], "(7+0*sqrt(5))/10");
        assert_eq!(v["lengths_decimal"].as_array().unwrap().len(), 3);
    }
}
