//! Search and verification of the diophantine conditions (A0)–(A9) on a
//! rotation/marked-point pair, plus the scale-snapping rule that turns a
//! flow time `t` into an admissible length `L`.
//!
//! Candidate lengths are `q_v` and, when `a_{v+1} > 4`, the multiples
//! `p q_v` with `p <= ⌊a_{v+1}/4⌋`. A candidate becomes a witness when its
//! scale index `k` exists (strict bracket of `cL`), lies in range, sits
//! `ℓ` convergents below `L`, and `‖Lα‖` is under the smallness threshold.
//! The remaining conditions are then evaluated on each witness and turned
//! into the smallest constants that make them true.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cf::ContinuedFraction;
use crate::circle::{self, CircleError, Interval};
use crate::field::FieldElement as Fe;
use crate::iet::IetSystem;
use crate::renorm::{self, Approach};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiophError {
    #[error("flow time must be positive")]
    BadTime,
    #[error("continued fraction too short for index {0}")]
    TooShort(usize),
    #[error("eta must lie in (0, 1/2400]")]
    BadEta,
    #[error("c must be positive")]
    BadC,
    #[error(transparent)]
    Circle(#[from] CircleError),
}

/// `L = p q_v` of the admissible form together with the offset `s = ln L - t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snap {
    pub l: u64,
    pub v: usize,
    pub p: u64,
    pub s: f64,
}

/// Snap `e^t` to an admissible length following the case split on
/// `a_{j+1} <= 4` with `j = f(t)`.
pub fn admissible_l(cf: &ContinuedFraction, t: f64) -> Result<Snap, DiophError> {
    if t.is_nan() || t <= 0.0 {
        return Err(DiophError::BadTime);
    }
    let j = renorm::f_of_t(cf, t);
    if j + 1 > cf.depth() {
        return Err(DiophError::TooShort(j + 1));
    }
    let qj = cf.q_u64(j);
    let a_next = cf.a(j + 1);
    let (l, v, p) = if a_next <= 4 {
        (qj, j, 1)
    } else {
        let i = ((t.exp() / qj as f64) * (1.0 + 1e-12)).floor() as u64;
        if i <= a_next / 4 {
            (i.max(1) * qj, j, i.max(1))
        } else {
            (cf.q_u64(j + 1), j + 1, 1)
        }
    };
    Ok(Snap { l, v, p, s: (l as f64).ln() - t })
}

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub eta: Fe,
    pub ell: usize,
    pub c: Fe,
    pub k_min: usize,
    pub k_max: usize,
    pub witness_count: usize,
    /// upper bound on `‖L α‖` at a witness
    pub a6_threshold: Fe,
    /// (A4) fails when `q_k / j` exceeds this
    pub c4_cap: Fe,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            eta: Fe::rational(1, 2400),
            ell: 2,
            c: Fe::rational(1, 5),
            k_min: 1,
            k_max: 15,
            witness_count: 5,
            a6_threshold: Fe::rational(1, 1000),
            c4_cap: Fe::integer(100),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails { witness: usize, reason: String },
    /// fewer witnesses than requested inside the scanned range
    NotEstablished { reason: String },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }
}

/// Which tail the dominant level is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Below,
    Above,
}

#[derive(Debug, Clone)]
pub struct Witness {
    pub l: u64,
    pub k: usize,
    pub v: usize,
    pub p: u64,
    /// `ln L - ln q_v`: how far the admissible length sits above its convergent
    pub snap: f64,
    pub digits: [u64; 3],
    pub approach: Approach,
    pub collision: bool,
    pub levels: BTreeMap<i64, Fe>,
    pub dominant: i64,
    pub tail_side: Tail,
    pub dominant_mass: Fe,
    pub tail_mass: Fe,
    pub norm: Fe,
}

impl Witness {
    pub fn level_range(&self) -> i64 {
        let lo = *self.levels.keys().next().unwrap();
        let hi = *self.levels.keys().next_back().unwrap();
        hi - lo
    }

    /// `q_k / j` for the closest approach, or `q_k / horizon` if none was found.
    pub fn c4_needed(&self, cf: &ContinuedFraction) -> Fe {
        let q = Fe::integer(cf.q(self.k).clone());
        match self.approach.min() {
            Some(j) => q / Fe::integer(j),
            None => q / Fe::integer(self.approach.horizon),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub config: CheckConfig,
    pub verdicts: Vec<(&'static str, Verdict)>,
    pub witnesses: Vec<Witness>,
    pub c1: u64,
    pub c2: u64,
    pub c3: u64,
    pub c4: Option<Fe>,
    /// `ĉ_η`, midpoint of the interval allowed by every witness
    pub c_eta: Option<Fe>,
    /// smallest `k_c` consistent with the witnesses
    pub k_c_observed: i64,
    /// `k_c` from the a priori count of values of `ψ_{p q_v}`
    pub k_c: i64,
    pub candidates_scanned: usize,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.verdicts.iter().all(|(_, v)| v.holds())
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    pub fn to_json(&self, cf: &ContinuedFraction) -> Value {
        let ws: Vec<Value> = self
            .witnesses
            .iter()
            .map(|w| {
                json!({
                    "L": w.l,
                    "k": w.k,
                    "v": w.v,
                    "p": w.p,
                    "u": w.dominant,
                    "s": w.snap,
                    "tail_side": w.tail_side,
                    "dominant_mass": w.dominant_mass.exact_string(),
                    "tail_mass": w.tail_mass.exact_string(),
                    "digits": w.digits,
                    "approach": w.approach,
                    "c4_needed": w.c4_needed(cf).exact_string(),
                    "collision": w.collision,
                    "norm_L_alpha": w.norm.exact_string(),
                    "level_range": w.level_range(),
                    "levels": w.levels.iter().map(|(k, m)| (k.to_string(), m.exact_string())).collect::<BTreeMap<_, _>>(),
                })
            })
            .collect();
        let verdicts: BTreeMap<&str, &Verdict> = self.verdicts.iter().map(|(n, v)| (*n, v)).collect();
        json!({
            "config": {
                "eta": self.config.eta.exact_string(),
                "ell": self.config.ell,
                "c": self.config.c.exact_string(),
                "k_min": self.config.k_min,
                "k_max": self.config.k_max,
                "witness_count": self.config.witness_count,
                "a6_threshold": self.config.a6_threshold.exact_string(),
                "c4_cap": self.config.c4_cap.exact_string(),
            },
            "scope": format!("established up to k = {}", self.config.k_max),
            "verdicts": verdicts,
            "constants": {
                "C1": self.c1,
                "C2": self.c2,
                "C3": self.c3,
                "C4": self.c4.as_ref().map(|c| c.exact_string()),
                "c_eta": self.c_eta.as_ref().map(|c| c.exact_string()),
                "k_c": self.k_c,
                "k_c_observed": self.k_c_observed,
            },
            "candidates_scanned": self.candidates_scanned,
            "witnesses": ws,
        })
    }
}

/// `∫ d(R^L x, x) dx`: the displacement is the constant `Lα mod 1`.
pub fn displacement_integral(l: &BigInt, alpha: &Fe) -> Fe {
    circle::norm(&alpha.mul_int(l))
}

/// Candidate lengths `(L, v, p)` in increasing order, for `v <= v_max`.
fn candidates(cf: &ContinuedFraction, v_max: usize) -> Vec<(BigInt, usize, u64)> {
    let mut out = Vec::new();
    for v in 0..=v_max.min(cf.max_index()) {
        let q = cf.q(v).clone();
        if v > 0 && q == *cf.q(v - 1) {
            continue;
        }
        out.push((q.clone(), v, 1));
        let a = cf.a(v + 1);
        if a > 4 {
            for p in 2..=a / 4 {
                out.push((&q * BigInt::from(p), v, p));
            }
        }
    }
    out
}

/// `k` with `q_{k-1} < cL < q_k`, if the bracket is strict.
pub fn scale_index(cf: &ContinuedFraction, c: &Fe, l: &BigInt) -> Option<usize> {
    let cl = c.mul_int(l);
    let k = (1..=cf.max_index()).find(|&k| Fe::integer(cf.q(k).clone()) > cl)?;
    (Fe::integer(cf.q(k - 1).clone()) < cl).then_some(k)
}

/// Pick the dominant extreme level: among the three lowest and three highest
/// levels, those with `tail < η·mass`; largest mass wins, ties toward the
/// smaller tail.
fn dominant_level(levels: &BTreeMap<i64, Fe>, eta: &Fe) -> Option<(i64, Tail, Fe, Fe)> {
    let keys: Vec<i64> = levels.keys().copied().collect();
    let mut best: Option<(i64, Tail, Fe, Fe)> = None;
    let mut consider = |u: i64, side: Tail, tail: Fe| {
        let mass = levels[&u].clone();
        if tail >= eta * &mass {
            return;
        }
        let better = match &best {
            None => true,
            Some((_, _, bm, bt)) => mass > *bm || (mass == *bm && tail < *bt),
        };
        if better {
            best = Some((u, side, mass, tail));
        }
    };
    let mut below = Fe::zero();
    for &u in keys.iter().take(3) {
        consider(u, Tail::Below, below.clone());
        below = &below + &levels[&u];
    }
    let mut above = Fe::zero();
    for &u in keys.iter().rev().take(3) {
        consider(u, Tail::Above, above.clone());
        above = &above + &levels[&u];
    }
    best
}

fn level_measures(l: u64, j: &Interval, cf: &ContinuedFraction) -> Result<BTreeMap<i64, Fe>, CircleError> {
    if l <= circle::SWEEP_CAP {
        Ok(circle::psi_partition(l, j, cf)?.level_measures())
    } else {
        circle::psi_level_measures(l, j, cf)
    }
}

fn evaluate(
    system: &IetSystem,
    config: &CheckConfig,
    (l, k, v, p): (u64, usize, usize, u64),
) -> Result<Witness, DiophError> {
    let cf = system.cf();
    if k + 2 > cf.depth() || k + 2 > cf.max_index() {
        return Err(DiophError::TooShort(k + 2));
    }
    let horizon = cf.q_u64(k + 2);
    let approach = renorm::vertical_approach(cf, system.z(), k, horizon).map_err(|_| DiophError::TooShort(k))?;
    let collision = circle::orbit_index(system.z(), cf.alpha()).is_some();
    let levels = level_measures(l, system.j(), cf)?;
    let (dominant, tail_side, dominant_mass, tail_mass) =
        dominant_level(&levels, &config.eta).expect("the lowest level always has an empty tail below");
    let norm = displacement_integral(&BigInt::from(l), cf.alpha());
    Ok(Witness {
        l,
        k,
        v,
        p,
        snap: (p as f64).ln(),
        digits: [cf.a(k), cf.a(k + 1), cf.a(k + 2)],
        approach,
        collision,
        levels,
        dominant,
        tail_side,
        dominant_mass,
        tail_mass,
        norm,
    })
}

/// Scan admissible lengths and evaluate (A0)–(A9) on the first witnesses.
pub fn check_assumptions(system: &IetSystem, config: &CheckConfig) -> Result<AssumptionReport, DiophError> {
    if !config.eta.is_positive() || config.eta > Fe::rational(1, 2400) {
        return Err(DiophError::BadEta);
    }
    if !config.c.is_positive() {
        return Err(DiophError::BadC);
    }
    let cf = system.cf();
    // cL < q_k with k <= k_max bounds L; stop once even the smallest scale
    // index exceeds the range
    let v_max = cf.max_index().saturating_sub(config.ell + 3);
    let mut picked = Vec::new();
    let mut scanned = 0;
    for (l, v, p) in candidates(cf, v_max) {
        if picked.len() == config.witness_count {
            break;
        }
        scanned += 1;
        let Some(k) = scale_index(cf, &config.c, &l) else { continue };
        if k > config.k_max {
            break;
        }
        if k < config.k_min || k + config.ell > cf.max_index() {
            continue;
        }
        if l <= *cf.q(k + config.ell) {
            continue;
        }
        if displacement_integral(&l, cf.alpha()) > config.a6_threshold {
            continue;
        }
        let Ok(l) = u64::try_from(&l) else { break };
        picked.push((l, k, v, p));
    }
    let witnesses = picked
        .into_par_iter()
        .map(|cand| evaluate(system, config, cand))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(system, config, witnesses, scanned))
}

fn assemble(system: &IetSystem, config: &CheckConfig, witnesses: Vec<Witness>, scanned: usize) -> AssumptionReport {
    let cf = system.cf();
    let short = witnesses.len() < config.witness_count;
    let missing = || Verdict::NotEstablished {
        reason: format!(
            "found {} of {} witnesses with k in [{}, {}]",
            witnesses.len(),
            config.witness_count,
            config.k_min,
            config.k_max
        ),
    };
    let first_failure = |pred: &dyn Fn(&Witness) -> Option<String>| -> Verdict {
        for (i, w) in witnesses.iter().enumerate() {
            if let Some(reason) = pred(w) {
                return Verdict::Fails { witness: i, reason };
            }
        }
        if short {
            missing()
        } else {
            Verdict::Holds
        }
    };

    let c1 = witnesses.iter().map(|w| w.digits[0]).max().unwrap_or(0) + 1;
    let c2 = witnesses.iter().map(|w| w.digits[1]).max().unwrap_or(0) + 1;
    let c3 = witnesses.iter().map(|w| w.digits[2]).max().unwrap_or(0) + 1;

    let a0 = first_failure(&|w| {
        let cl = config.c.mul_int(&BigInt::from(w.l));
        let ok = Fe::integer(cf.q(w.k - 1).clone()) < cl && cl < Fe::integer(cf.q(w.k).clone());
        (!ok).then(|| format!("cL = {} not strictly inside (q_{}, q_{})", cl.exact_string(), w.k - 1, w.k))
    });
    // digit bounds always hold with the reported constants
    let digit = |_: &Witness| None;
    let c4_need: Vec<Fe> = witnesses.iter().map(|w| w.c4_needed(cf)).collect();
    let a4 = first_failure(&|w| {
        if w.collision {
            return Some("marked point lies on the orbit of the origin".into());
        }
        let need = w.c4_needed(cf);
        (need > config.c4_cap).then(|| format!("approach at j = {:?} needs C4 = {}", w.approach.min(), need.decimal17()))
    });
    let c4 = c4_need.iter().cloned().reduce(Fe::max).filter(|_| !witnesses.iter().any(|w| w.collision));

    // ĉ_η must exceed every tail/η and stay below every dominant mass
    let lower = witnesses.iter().map(|w| &w.tail_mass / &config.eta).reduce(Fe::max);
    let upper = witnesses.iter().map(|w| w.dominant_mass.clone()).reduce(Fe::min);
    let c_eta = match (&lower, &upper) {
        (Some(lo), Some(hi)) if lo < hi => Some((lo + hi).div_int(&BigInt::from(2))),
        _ => None,
    };
    let a5 = match (&c_eta, witnesses.is_empty()) {
        (Some(_), _) if short => missing(),
        (Some(_), _) => Verdict::Holds,
        (None, true) => missing(),
        (None, false) => Verdict::Fails {
            witness: 0,
            reason: format!(
                "no common constant: tails/eta reach {}, masses drop to {}",
                lower.unwrap().decimal17(),
                upper.unwrap().decimal17()
            ),
        },
    };

    let mut prev: Option<Fe> = None;
    let mut a6 = Verdict::Holds;
    for (i, w) in witnesses.iter().enumerate() {
        if w.norm > config.a6_threshold {
            a6 = Verdict::Fails { witness: i, reason: format!("|L alpha| = {}", w.norm.decimal17()) };
            break;
        }
        if let Some(p) = &prev {
            if w.norm >= *p {
                a6 = Verdict::Fails { witness: i, reason: "|L alpha| not decreasing".into() };
                break;
            }
        }
        prev = Some(w.norm.clone());
    }
    if a6.holds() && short {
        a6 = missing();
    }
    let a7 = first_failure(&|w| (BigInt::from(w.l) <= *cf.q(w.k + config.ell)).then(|| format!("L <= q_{}", w.k + config.ell)));

    let k_c_observed = witnesses.iter().map(|w| w.level_range()).max().unwrap_or(0) + 1;
    // ψ_{q_v} takes at most 5 consecutive values; ψ_{p q_v} at most 5 + 2p
    let k_c = witnesses.iter().map(|w| if w.p == 1 { 5 } else { 5 + 2 * w.p as i64 }).max().unwrap_or(5);
    let a8 = first_failure(&|w| (w.level_range() >= k_c).then(|| format!("range {} >= {}", w.level_range(), k_c)));
    let a9 = first_failure(&|w| {
        let q = cf.q_u64(w.v);
        let ok = q <= w.l && BigInt::from(w.l) < *cf.q(w.v + 1) && (w.p == 1 || (cf.a(w.v + 1) > 4 && w.p <= cf.a(w.v + 1) / 4));
        (!ok || w.l != w.p * q).then(|| "length not of the admissible form".into())
    });

    let verdicts = vec![
        ("A0", a0),
        ("A1", first_failure(&digit)),
        ("A2", first_failure(&digit)),
        ("A3", first_failure(&digit)),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
        ("A9", a9),
    ];
    AssumptionReport {
        config: config.clone(),
        verdicts,
        witnesses,
        c1,
        c2,
        c3,
        c4,
        c_eta,
        k_c_observed,
        k_c,
        candidates_scanned: scanned,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_system(z: Fe) -> IetSystem {
        IetSystem::new(ContinuedFraction::golden(60), z).unwrap()
    }

    #[test]
    fn snapping_examples() {
        let g = ContinuedFraction::golden(40);
        let s = admissible_l(&g, 10f64.ln()).unwrap();
        assert_eq!((s.l, s.v, s.p), (8, 5, 1));
        assert!((s.s - 0.8f64.ln()).abs() < 1e-12);
        let nine = ContinuedFraction::periodic(&[], &[9], 20).unwrap();
        let s = admissible_l(&nine, 20f64.ln()).unwrap();
        assert_eq!((s.l, s.v, s.p), (18, 1, 2));
        assert!((s.s - 0.9f64.ln()).abs() < 1e-12);
        for k in 2..20 {
            let s = admissible_l(&g, (g.q_u64(k) as f64).ln()).unwrap();
            assert_eq!(s.l, g.q_u64(k));
            assert!(s.s.abs() < 1e-9);
        }
        assert!(admissible_l(&g, 0.0).is_err());
    }

    #[test]
    fn snap_offset_is_bounded() {
        for cf in [
            ContinuedFraction::golden(50),
            ContinuedFraction::periodic(&[], &[9], 20).unwrap(),
            ContinuedFraction::periodic(&[], &[30, 1, 7], 20).unwrap(),
        ] {
            for i in 1..400 {
                let t = 0.05 * i as f64;
                let s = admissible_l(&cf, t).unwrap();
                assert!(s.s.abs() <= 2.0, "t = {t}: {s:?}");
            }
        }
    }

    #[test]
    fn golden_report() {
        let sys = golden_system(Fe::rational(7, 10));
        let rep = check_assumptions(&sys, &CheckConfig::default()).unwrap();
        assert!(rep.all_hold(), "{:?}", rep.verdicts);
        let ls: Vec<u64> = rep.witnesses.iter().map(|w| w.l).collect();
        assert_eq!(ls, [610, 987, 1597, 2584, 4181]);
        let ks: Vec<usize> = rep.witnesses.iter().map(|w| w.k).collect();
        assert_eq!(ks, [11, 12, 13, 14, 15]);
        assert_eq!((rep.c1, rep.c2, rep.c3), (2, 2, 2));
        assert_eq!(rep.k_c, 5);
        assert!(rep.k_c_observed <= 5);
        let c_eta = rep.c_eta.clone().unwrap();
        for w in &rep.witnesses {
            assert!(w.dominant_mass > c_eta);
            assert!(w.tail_mass < &rep.config.eta * &c_eta);
            let total = w.levels.values().fold(Fe::zero(), |a, b| &a + b);
            assert_eq!(total, Fe::one());
        }
        let again = check_assumptions(&sys, &CheckConfig::default()).unwrap();
        assert_eq!(again.to_json(sys.cf()), rep.to_json(sys.cf()));
    }

    #[test]
    fn golden_norms_are_powers() {
        let cf = ContinuedFraction::golden(40);
        let inv = cf.alpha().clone();
        let mut pow = inv.clone();
        for k in 1..30 {
            pow = &pow * &inv;
            assert_eq!(displacement_integral(cf.q(k), cf.alpha()), pow);
        }
    }

    #[test]
    fn marked_point_on_orbit_fails_a4() {
        let cf = ContinuedFraction::golden(60);
        let sys = IetSystem::new(cf.clone(), cf.alpha().clone()).unwrap();
        let rep = check_assumptions(&sys, &CheckConfig::default()).unwrap();
        match rep.verdict("A4").unwrap() {
            Verdict::Fails { witness, .. } => assert_eq!(*witness, 0),
            v => panic!("{v:?}"),
        }
        assert_eq!(rep.witnesses[0].approach.min(), Some(1));
    }

    #[test]
    fn short_range_is_not_established() {
        let sys = golden_system(Fe::rational(7, 10));
        let cfg = CheckConfig { k_max: 12, ..CheckConfig::default() };
        let rep = check_assumptions(&sys, &cfg).unwrap();
        assert!(matches!(rep.verdict("A0"), Some(Verdict::NotEstablished { .. })));
        assert!(!rep.verdicts.iter().any(|(_, v)| matches!(v, Verdict::Fails { .. })));
    }

    #[test]
    fn displacement_matches_quadrature() {
        let cf = ContinuedFraction::golden(40);
        for l in [1u64, 7, 55, 610, 1000] {
            let exact = displacement_integral(&BigInt::from(l), cf.alpha()).to_f64();
            let a = cf.alpha().to_f64();
            let n = 1000;
            let sum: f64 = (0..n)
                .map(|i| {
                    let x = (i as f64 + 0.5) / n as f64;
                    let y = (x + l as f64 * a).rem_euclid(1.0);
                    let d = (y - x).abs();
                    d.min(1.0 - d)
                })
                .sum();
            assert!((sum / n as f64 - exact).abs() < 1e-12, "L = {l}");
        }
    }
}
