mod common;

use common::{inf, params_in, rng, smooth_params};
use dcacert::regimes::{
    asymptotic_constants, classify_nonsmooth, matching_rows, mirror_index, regime_map, thresholds, GridSpec, RegimeError,
};
use dcacert::{classify, DcParams, ExtReal};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

#[test]
fn worked_values() {
    let c = classify(&DcParams::new(0.5, 2.0, 0.0, 1.0)).unwrap();
    assert_eq!(c.index, 1);
    assert!(close(c.sigma, 1.0 / 3.0, 1e-14) && close(c.sigma_plus, 4.0 / 3.0, 1e-14));
    assert!(close(c.alpha, 1.0 / 3.0, 1e-14));

    let c = classify(&DcParams::new(2.0, 4.0, -1.0, 3.0)).unwrap();
    assert_eq!(c.index, 3);
    assert!(close(c.sigma, 0.1, 1e-14) && close(c.sigma_plus, 0.5, 1e-14) && close(c.alpha, 0.5, 1e-14));

    let c = classify(&DcParams::new(2.0, 10.0, -1.0, 1.5)).unwrap();
    assert_eq!((c.index, c.sigma, c.sigma_plus, c.alpha), (5, 0.0, 1.0, 1.0));

    let c = classify_nonsmooth(&DcParams::new(1.0, inf(), 0.0, 2.0)).unwrap();
    assert_eq!((c.label.as_str(), c.sigma, c.sigma_plus, c.alpha), ("p1,7", 0.0, 0.75, 0.5));

    let c = classify_nonsmooth(&DcParams::new(2.0, inf(), -1.0, 1.5)).unwrap();
    assert_eq!((c.index, c.sigma, c.sigma_plus), (5, 0.0, 1.0));
}

#[test]
fn threshold_sums() {
    let t = thresholds(&DcParams::new(2.0, 5.0, -1.0, 3.0));
    assert!(close(t.s1.value(), -1.0 / 6.0, 1e-15));
    let t = thresholds(&DcParams::new(2.0, 5.0, -2.0, 4.0));
    assert_eq!(t.s1.value(), 0.25);
    assert_eq!(thresholds(&DcParams::new(1.0, inf(), 1.0, 3.0)).s2.value(), 2.0);
}

#[test]
fn asymptotic_constant_values() {
    let a = asymptotic_constants(&DcParams::new(1.0, 4.0, -0.8, 2.0)).unwrap();
    // (2 + 1)(0.2)/((2 − 0.8)·1)
    assert!(close(a.p5_inf, 0.5, 1e-14));
    assert!(a.hypotheses_hold);
    let s = asymptotic_constants(&DcParams::new(0.7, 3.0, 0.7, 3.0)).unwrap();
    assert_eq!(s.p5_inf, s.p6_inf);
    assert!(matches!(
        asymptotic_constants(&DcParams::new(2.0, 10.0, -1.0, 1.0)),
        Err(RegimeError::DenominatorZero(_))
    ));
}

#[test]
fn map_marks_invalid_nodes_and_splits_the_convex_quadrant() {
    let g = GridSpec { lo: -1.0, hi: 1.0, steps: 9 };
    let rows = regime_map(ExtReal::Finite(3.0), ExtReal::Finite(2.0), &g, &g);
    assert_eq!(rows.len(), 81);
    for r in &rows {
        if r.mu1 + r.mu2 <= 0.0 && !(r.mu1 == 0.0 && r.mu2 == 0.0) {
            assert_eq!(r.regime, 0, "{r:?}");
            assert!(r.p.is_none());
        } else if r.mu1 >= 0.0 && r.mu2 >= 0.0 {
            assert!(r.regime == 1 || r.regime == 2, "{r:?}");
        }
    }
    let seven = classify(&DcParams::new(2.5, 3.0, 0.5, 2.0)).unwrap();
    assert_eq!(seven.index, 7);
}

#[test]
fn grid_spec_parsing() {
    assert_eq!("0:1:3".parse::<GridSpec>().unwrap().nodes(), vec![0.0, 0.5, 1.0]);
    for bad in ["", "1:0:3", "0:1", "0:1:0", "a:1:2", "0:inf:2"] {
        assert!(bad.parse::<GridSpec>().is_err(), "{bad}");
    }
}

#[test]
fn every_regime_is_reachable_by_the_sampler() {
    let mut r = rng(3);
    for i in 1..=8 {
        assert_eq!(classify(&params_in(i, &mut r)).unwrap().index, i);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn convex_constant_is_sum_of_reciprocals(l1 in 0.01f64..100.0, l2 in 0.01f64..100.0) {
        let c = classify(&DcParams::new(0.0, l1, 0.0, l2)).unwrap();
        prop_assert!(close(c.p, 1.0 / l1 + 1.0 / l2, 1e-12));
    }

    #[test]
    fn rows_partition_and_agree_on_ties(seed in any::<u64>()) {
        let p = smooth_params(&mut rng(seed));
        let rows = matching_rows(&p).unwrap();
        prop_assert!(!rows.is_empty());
        for r in &rows[1..] {
            prop_assert!(close(r.sigma, rows[0].sigma, 1e-9) && close(r.sigma_plus, rows[0].sigma_plus, 1e-9));
        }
        let c = classify(&p).unwrap();
        prop_assert_eq!(c.index, rows[0].index);
        prop_assert_eq!(c.p, c.sigma + c.sigma_plus);
    }

    #[test]
    fn swap_mirrors_the_regime(seed in any::<u64>()) {
        let p = smooth_params(&mut rng(seed));
        let a = classify(&p).unwrap();
        let b = classify(&p.swapped()).unwrap();
        let tie = a.ties.contains(&mirror_index(b.index)) || b.ties.contains(&mirror_index(a.index));
        prop_assert!(b.index == mirror_index(a.index) || tie, "{} vs {}", a.index, b.index);
        prop_assert!(close(a.sigma, b.sigma_plus, 1e-10) && close(a.sigma_plus, b.sigma, 1e-10));
    }

    #[test]
    fn coefficients_are_nonnegative(seed in any::<u64>()) {
        let c = classify(&smooth_params(&mut rng(seed))).unwrap();
        prop_assert!(c.sigma >= -1e-12 && c.sigma_plus >= -1e-12 && c.alpha >= -1e-12, "{c:?}");
    }

    #[test]
    fn large_l_converges_to_the_nonsmooth_row(seed in any::<u64>(), which in 0usize..2) {
        let p = smooth_params(&mut rng(seed));
        let at = |l: ExtReal| if which == 0 {
            DcParams { l1: l, ..p }
        } else {
            DcParams { l2: l, ..p }
        };
        let Ok(limit) = classify_nonsmooth(&at(ExtReal::Infinity)) else { return Ok(()) };
        let mut last = f64::INFINITY;
        for k in 3..=8 {
            let l = 10f64.powi(k);
            let mu = if which == 0 { p.mu1 } else { p.mu2 };
            if l <= mu {
                continue;
            }
            let c = classify(&at(ExtReal::Finite(l))).unwrap();
            let err = (c.sigma - limit.sigma).abs() + (c.sigma_plus - limit.sigma_plus).abs();
            prop_assert!(err <= last * (1.0 + 1e-6) + 1e-12, "k={k}: {err} after {last}");
            last = err;
        }
        prop_assert!(last < 1e-5 * (1.0 + limit.p), "{last}");
    }

    #[test]
    fn first_and_third_rows_meet_continuously(mu1 in 0.1f64..3.0, l2 in 0.5f64..5.0, extra in 0.0f64..5.0) {
        // S1 = 0 exactly: 1/μ2 = −(1/μ1 + 1/L2)
        let mu2 = -1.0 / (1.0 / mu1 + 1.0 / l2);
        let l1 = mu1.max(l2) + 0.1 + extra;
        let p = DcParams::new(mu1, l1, mu2, l2);
        if mu1 + mu2 <= 0.0 || mu1 >= l2 {
            return Ok(());
        }
        let eps = 1e-7 * mu2.abs();
        let below = classify(&DcParams { mu2: mu2 - eps, ..p });
        let above = classify(&DcParams { mu2: mu2 + eps, ..p });
        if let (Ok(a), Ok(b)) = (below, above) {
            prop_assert!((a.p - b.p).abs() < 1e-5 * (1.0 + a.p), "{} {} vs {} {}", a.index, a.p, b.index, b.p);
        }
    }
}
