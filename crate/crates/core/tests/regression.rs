//! Smaller frozen values, each with a direct recomputation.

use iet3::cf::ContinuedFraction;
use iet3::circle::{psi_partition, Interval, IntervalUnion};
use iet3::field::FieldElement as Fe;
use iet3::iet::IetSystem;
use iet3::mobius::{bilinear_diagnostic, correlation_sum, mobius_sieve};
use iet3::witness::tower_decomposition;

const TOWER_FRACTION: &str = "(8225+2475*sqrt(5))/14809";
const CORRELATION_1E4: f64 = 4.96883258880026e-4;
const BLOCK_SUMS_1E4: [f64; 14] = [
    1.2373277052900884,
    3.749943986900138,
    6.291302334287522,
    5.327644891708181,
    9.063942507885475,
    13.455850956337434,
    46.9845459846623,
    84.51952370358107,
    183.49444590084457,
    338.34028344807786,
    659.3925484677428,
    923.9278764892664,
    346.3259592837471,
    0.0,
];

fn golden_system() -> IetSystem {
    IetSystem::new(ContinuedFraction::golden(80), Fe::rational(7, 10)).unwrap()
}

fn cosine_orbit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let sys = golden_system();
    let z = sys.z().to_f64();
    let f = |x: f64| (std::f64::consts::TAU * x / z).cos();
    let fast = sys.fast_orbit(&Fe::rational(1, 7), n).into_iter().map(f).collect();
    let mut y = Fe::rational(1, 7);
    let exact = (0..n)
        .map(|_| {
            y = sys.step(&y);
            f(y.to_f64())
        })
        .collect();
    (fast, exact)
}

#[test]
fn tower_over_dominant_level() {
    let cf = ContinuedFraction::golden(60);
    let j = Interval::initial(&Fe::rational(7, 10)).unwrap();
    let psi = psi_partition(cf.q_u64(6), &j, &cf).unwrap();
    let (value, _) = psi.level_measures().into_iter().max_by(|a, b| a.1.cmp(&b.1)).unwrap();
    let level = psi.level_set(value);
    let height = cf.q_u64(4);
    let t = tower_decomposition(&level, height, &cf).unwrap();
    assert_eq!(t.fraction.exact_string(), TOWER_FRACTION);

    let mut covered = IntervalUnion::empty();
    for i in 0..height as i64 {
        let floor = t.base.rotate(i, &cf);
        assert!(floor.is_subset(&level));
        assert!(floor.intersection(&covered).is_empty());
        covered = covered.union(&floor);
    }
    assert_eq!(covered.measure(), t.covered);
    assert_eq!(covered.measure() / level.measure(), t.fraction);
}

#[test]
fn correlation_at_ten_thousand() {
    let (fast, exact) = cosine_orbit(10_000);
    let table = mobius_sieve(10_000).unwrap();
    assert_eq!(correlation_sum(&fast, &table).unwrap().value, CORRELATION_1E4);
    let direct: f64 = (1..=10_000).map(|n| table.mu(n) as f64 * exact[n - 1]).sum::<f64>() / 1e4;
    assert!((direct - CORRELATION_1E4).abs() < 1e-12);
}

#[test]
fn bilinear_blocks_at_ten_thousand() {
    let n = 10_000;
    let (f, _) = cosine_orbit(n);
    let table = mobius_sieve(n).unwrap();
    let blocks = bilinear_diagnostic(&f, &table, 10).unwrap();
    assert_eq!(blocks.iter().map(|b| b.block_sum).collect::<Vec<_>>(), BLOCK_SUMS_1E4);
    for b in &blocks {
        assert!(b.block_sum <= b.cauchy_schwarz + 1e-9);
        let lo = 1usize << b.j;
        let mut direct = 0.0;
        for k in lo..(2 * lo).min(n + 1) {
            if table.mu(k) == 0 {
                continue;
            }
            let inner: f64 = [2usize, 3, 5, 7].iter().filter(|&&p| p * k <= n).map(|&p| -f[p * k - 1]).sum();
            direct += inner.abs();
        }
        assert!((direct - b.block_sum).abs() < 1e-9, "block {}: {direct} vs {}", b.j, b.block_sum);
    }
}
