//! Frozen values for the `m = 2`, `n = 1` patterned pair, each recomputed
//! by a brute-force path.

use iet3::appb::{self, construct_pair, phi_levels, witness_sets};
use iet3::circle::{rotate_big, step};
use iet3::field::FieldElement as Fe;
use num_bigint::BigInt;

const ALPHA: &str = "(509895719-1*sqrt(31223994767622397))/650556327";
const Z: &str = "(180178268953622291-353086015*sqrt(31223994767622397))/229910673239956404";
const EXCEPTIONAL: &str = "(48416689117-274*sqrt(31223994767622397))/216852109";
const C: &str = "(6765747920357471-38288760*sqrt(31223994767622397))/43370421800";
const MEASURE_F: &str = "(-8514038828769320119+48372784055*sqrt(31223994767622397))/38318445539992734";
const MEASURE_G: &str = "(51314165711864890015-290237024567*sqrt(31223994767622397))/114955336619978202";
const DEVIATION_1E5: f64 = 3.047525091464025e-5;

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

/// `λ{x ∈ [0,1) : ψ_len(x) = value}` from all breakpoints, sorted exactly.
fn level_measure_direct(len: u64, value: i64, z: &Fe, alpha: &Fe) -> Fe {
    let mut pts = vec![Fe::zero()];
    for e in [Fe::zero(), z.clone()] {
        for i in 0..len as i64 {
            pts.push(rotate_big(&e, &BigInt::from(-i), alpha));
        }
    }
    pts.sort();
    pts.dedup();
    let mut total = Fe::zero();
    for (i, p) in pts.iter().enumerate() {
        let right = pts.get(i + 1).cloned().unwrap_or_else(Fe::one);
        if visits(p, len, z, alpha) == value {
            total = total + (right - p.clone());
        }
    }
    total
}

#[test]
fn pair_values() {
    let pair = construct_pair(2).unwrap();
    let alpha = pair.cf.alpha();
    assert_eq!(alpha.exact_string(), ALPHA);
    assert_eq!(pair.z.exact_string(), Z);
    // a long plain Ostrowski sum lands within the tail bound of the periodic one
    let truncated = pair.cf.ostrowski_sum(&pair.b_digits(24));
    assert!((&truncated - &pair.z).abs() <= pair.cf.beta(23));
    assert_eq!(pair.head, *alpha);
}

#[test]
fn level_sets_match_direct_counts() {
    let pair = construct_pair(2).unwrap();
    let (alpha, z) = (pair.cf.alpha().clone(), pair.z.clone());
    let q = pair.cf.q_u64(pair.ell + 2);
    assert_eq!(q, 822);

    let phi = phi_levels(&pair).unwrap();
    assert_eq!(phi.minority_measure.exact_string(), EXCEPTIONAL);
    let j = phi.dominant;
    assert_eq!(level_measure_direct(q, j, &pair.head, &alpha), Fe::one() - phi.minority_measure.clone());

    let w = witness_sets(&pair, 1, 1).unwrap();
    assert_eq!(w.c.exact_string(), C);
    assert_eq!(w.f.measure().exact_string(), MEASURE_F);
    assert_eq!(w.g.measure().exact_string(), MEASURE_G);
    assert_eq!(level_measure_direct(q, j, &z, &alpha), w.f.measure());
    assert_eq!(level_measure_direct(2 * q, 2 * j + 1, &z, &alpha), w.g.measure());
    assert!(w.holds());
}

#[test]
fn disjointness_matches_exact_orbits() {
    let pair = construct_pair(2).unwrap();
    let sys = pair.system().unwrap();
    let zf = sys.z().to_f64();
    let f = appb::mean_zero_cosine(zf, 1.0);
    let (x0, y0) = (appb::start_point(&sys, 1, 0), appb::start_point(&sys, 1, 1));
    let n = 100_000;
    let fast = appb::empirical_disjointness(&sys, 1, 2, &f, &f, &x0, &y0, n);
    assert_eq!(fast.deviation, DEVIATION_1E5);

    let (mut x, mut y) = (x0, y0);
    let (mut sf, mut sg, mut sfg) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        x = sys.step(&x);
        y = sys.step(&sys.step(&y));
        let (a, b) = (f(x.to_f64()), f(y.to_f64()));
        sf += a;
        sg += b;
        sfg += a * b;
    }
    let k = n as f64;
    let direct = (sfg / k - (sf / k) * (sg / k)).abs();
    assert!((direct - DEVIATION_1E5).abs() < 1e-12, "{direct}");
}
