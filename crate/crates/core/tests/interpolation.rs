mod common;

use common::{random_spec, rng};
use dcacert::interpolation::{check_interpolation, parse_triplets, Tolerance, Triplet};
use dcacert::{CurvatureClass, ExtReal, FunctionSpec, SubgradPolicy};
use proptest::prelude::*;
use rand::Rng;

fn sample(spec: &FunctionSpec, m: usize, seed: u64) -> Vec<Triplet> {
    let mut r = rng(seed);
    let d = spec.dimension();
    (0..m)
        .map(|i| {
            // a few exact kinks for the nonsmooth families
            let x: Vec<f64> = if i < 2 && d == 1 {
                vec![0.0]
            } else {
                (0..d).map(|_| r.gen_range(-2.0..2.0)).collect()
            };
            let policy = match i % 3 {
                0 => SubgradPolicy::LeastNorm,
                1 => SubgradPolicy::Leftmost,
                _ => SubgradPolicy::Rightmost,
            };
            let a = spec.evaluate(&x, policy);
            Triplet::new(x, a.subgradient, a.value)
        })
        .collect()
}

fn widen(cls: &CurvatureClass, dmu: f64, dl: f64) -> CurvatureClass {
    let l = match cls.l {
        ExtReal::Finite(v) => ExtReal::Finite(v + dl),
        ExtReal::Infinity => ExtReal::Infinity,
    };
    CurvatureClass::new(cls.mu - dmu, l)
}

#[test]
fn json_round_trip() {
    let ts = sample(&FunctionSpec::quadratic(vec![1.0, 2.0], vec![0.5, -0.5]), 5, 1);
    let text = serde_json::to_string(&ts).unwrap();
    assert_eq!(parse_triplets(&text).unwrap(), ts);
}

#[test]
fn report_names_the_violating_pair() {
    let ts = vec![
        Triplet::new(vec![0.0], vec![0.0], 0.0),
        Triplet::new(vec![1.0], vec![0.0], -1.0),
    ];
    let r = check_interpolation(&ts, &CurvatureClass::new(0.0, 1.0), Tolerance::default());
    assert!(!r.feasible);
    assert_eq!(r.worst_pair, Some((1, 0)));
    assert_eq!(r.min_slack, r.slack[1][0]);
}

#[test]
fn scaled_tolerance_grows_with_magnitude() {
    let ts = vec![
        Triplet::new(vec![0.0], vec![0.0], 1e6),
        Triplet::new(vec![0.0], vec![0.0], 1e6 + 1e-4),
    ];
    let cls = CurvatureClass::new(0.0, 1.0);
    assert!(!check_interpolation(&ts, &cls, Tolerance::Absolute(1e-9)).feasible);
    assert!(check_interpolation(&ts, &cls, Tolerance::Scaled(1e-9)).feasible);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn oracle_samples_fit_their_certified_class(seed in any::<u64>(), family in 0usize..3) {
        let spec = random_spec(&mut rng(seed), family);
        let ts = sample(&spec, 50, seed ^ 0x5eed);
        let r = check_interpolation(&ts, &spec.certified_class(), Tolerance::Absolute(1e-9));
        prop_assert!(r.feasible, "{spec:?}: {} at {:?}", r.min_slack, r.worst_pair);
    }

    #[test]
    fn wider_classes_never_lose_feasibility(seed in any::<u64>(), family in 0usize..3, dmu in 0.0f64..2.0, dl in 0.0f64..5.0) {
        let spec = random_spec(&mut rng(seed), family);
        let ts = sample(&spec, 20, seed);
        let tight = spec.certified_class();
        let a = check_interpolation(&ts, &tight, Tolerance::Absolute(1e-9));
        let b = check_interpolation(&ts, &widen(&tight, dmu, dl), Tolerance::Absolute(1e-9));
        prop_assert!(b.min_slack >= a.min_slack - 1e-12);
        prop_assert!(!a.feasible || b.feasible);
    }

    #[test]
    fn over_tight_classes_are_flagged(seed in any::<u64>(), c in 0.5f64..4.0, frac in 0.1f64..0.9) {
        // 1-D quadratic with curvature c: every pair is tight, so any
        // smaller L or larger μ is violated
        let spec = FunctionSpec::quadratic(vec![c], vec![0.3]);
        let ts = sample(&spec, 50, seed);
        let low_l = CurvatureClass::new(-1.0, c * frac);
        prop_assert!(!check_interpolation(&ts, &low_l, Tolerance::default()).feasible);
        let high_mu = CurvatureClass::new(c + frac, c + 2.0);
        prop_assert!(!check_interpolation(&ts, &high_mu, Tolerance::default()).feasible);
    }
}
