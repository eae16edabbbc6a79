//! The frozen pipeline values, recomputed by brute-force oracles that share
//! no code with the sweep-based partitions.

use iet3::cf::ContinuedFraction;
use iet3::circle::{rotate_big, step};
use iet3::field::FieldElement as Fe;
use iet3::iet::IetSystem;
use iet3::rng::{rational_points, task_rng};
use iet3::suite::PIPELINE_BASELINES;
use iet3::witness::{hitting_frequency_fast, run_pipeline, sample_points, PipelineConfig, PipelineReport};
use num_bigint::BigInt;

fn system() -> IetSystem {
    IetSystem::new(ContinuedFraction::golden(80), Fe::rational(7, 10)).unwrap()
}

fn visits(x: &Fe, len: u64, z: &Fe, alpha: &Fe) -> i64 {
    let mut y = x.clone();
    let mut c = 0;
    for _ in 0..len {
        if &y < z {
            c += 1;
        }
        y = step(&y, alpha);
    }
    c
}

fn difference(x: &Fe, len: u64, q: u64, z: &Fe, alpha: &Fe) -> i64 {
    visits(x, len, z, alpha) - visits(&rotate_big(x, &BigInt::from(q), alpha), len, z, alpha)
}

/// Measure of `{x : ψ_len(x) - ψ_len(R^q x) = level}` by sorting every
/// possible breakpoint and counting visits at each cell's left end.
fn level_measure_direct(len: u64, q: u64, level: i64, z: &Fe, alpha: &Fe) -> Fe {
    let mut pts = vec![Fe::zero()];
    for e in [Fe::zero(), z.clone()] {
        for i in 0..(len + q) as i64 {
            pts.push(rotate_big(&e, &BigInt::from(-i), alpha));
        }
    }
    pts.sort();
    pts.dedup();
    let mut total = Fe::zero();
    for (i, p) in pts.iter().enumerate() {
        let right = pts.get(i + 1).cloned().unwrap_or_else(Fe::one);
        if difference(p, len, q, z, alpha) == level {
            total = total + (right - p.clone());
        }
    }
    total
}

fn check(index: usize) -> PipelineReport {
    let sys = system();
    let cf = sys.cf();
    let (l, ak, win, len, margin) = PIPELINE_BASELINES[index];
    let rep = run_pipeline(l, &PipelineConfig::default(), &sys).unwrap();
    let (z, alpha) = (sys.z(), sys.alpha());
    let q = cf.q_u64(rep.params.k);

    let direct = level_measure_direct(rep.ak.m_hat * rep.params.w, q, rep.ak.level, z, alpha);
    assert_eq!(direct, rep.ak.measure);
    assert_eq!(direct.exact_string(), ak);

    let w = rep.diff.window.as_ref().unwrap();
    assert_eq!(w.interval.measure().exact_string(), win);
    assert_eq!(w.length, len);
    assert!(w.interval.measure() >= &(cf.beta(rep.params.k) * w.bound.clone()));
    let (m, mp, wlen) = (rep.params.m, rep.params.m_prime, rep.params.w);
    for x in sample_points(&w.interval.to_union(), 4, 7, "window-oracle") {
        let mut y = x.clone();
        for i in 0..len {
            let d = difference(&y, m * wlen, q, z, alpha) - difference(&y, mp * wlen, q, z, alpha);
            assert!(d == 1 || d == -1, "L = {l}, step {i}: difference {d}");
            y = step(&y, alpha);
        }
    }

    let mut rng = task_rng(1, "hitting", rep.params.k as u64);
    let ys = rational_points(&mut rng, 20, &Fe::zero(), z, 9973);
    let fast: Vec<Fe> =
        ys.iter().map(|y| hitting_frequency_fast(&rep.cleaned.set, rep.ak.m_hat, y, 10_000, &sys)).collect();
    assert_eq!(fast, rep.hitting.frequencies);
    assert_eq!(rep.hitting.margin().exact_string(), margin);
    assert!(rep.passed(), "{:?}", rep.checks());
    rep
}

#[test]
fn length_55() {
    let rep = check(0);
    assert_eq!((rep.params.r, rep.params.w, rep.params.k), (7, 10, 6));
    assert_eq!(rep.ak.components, 13);
}

#[test]
fn length_233() {
    let rep = check(1);
    assert_eq!((rep.params.r, rep.params.w, rep.params.k), (32, 45, 9));
    assert_eq!(rep.ak.components, 55);
}

#[test]
fn length_987() {
    let rep = check(2);
    assert_eq!((rep.params.r, rep.params.w, rep.params.k), (138, 197, 12));
    assert_eq!(rep.ak.components, 233);
    // the orbit length the lower bound asks for exceeds the one we run
    assert_eq!(rep.hitting.required_n, Some(BigInt::from(128_557)));
}
