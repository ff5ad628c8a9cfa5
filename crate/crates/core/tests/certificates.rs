mod common;

use common::{params_in, quadratic_instance, rng, start_point};
use dcacert::certificates::{certify, check_nonsmooth_rate, check_one_step, check_rate, replay_proof_combination};
use dcacert::engine::{run_dca, RunOptions, Trajectory};
use dcacert::{classify, DcInstance, DcParams, ExtReal, FunctionSpec};
use proptest::prelude::*;

fn truncated(traj: &Trajectory, n: usize) -> Trajectory {
    let mut t = traj.clone();
    t.points.truncate(n + 1);
    t
}

fn random_run(regime: u8, seed: u64, steps: usize) -> Trajectory {
    let mut r = rng(seed);
    let p = params_in(regime, &mut r);
    let dim = 1 + (seed % 3) as usize;
    let inst = quadratic_instance(&p, dim, &mut r);
    run_dca(&inst, &start_point(dim, &mut r), &RunOptions::new(steps)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn certificates_hold_on_random_instances(regime in 1u8..=8, seed in any::<u64>()) {
        let tr = random_run(regime, seed, 6);
        let rep = certify(&tr).unwrap();
        prop_assert!(rep.pass, "{rep:?}");
        prop_assert_eq!(rep.regime.as_ref().unwrap().index, regime);
        for k in 0..tr.steps() {
            let one = check_one_step(&tr, k).unwrap();
            prop_assert!(one.holds, "{one:?}");
        }
    }

    #[test]
    fn proof_combination_is_an_identity(regime in 1u8..=8, seed in any::<u64>()) {
        let tr = random_run(regime, seed, 3);
        let cert = classify(&tr.instance.declared).unwrap();
        for k in 0..tr.steps() {
            let c = replay_proof_combination(&tr, k, &cert).unwrap();
            let one = check_one_step(&tr, k).unwrap();
            let scale = 1f64.max(c.combination_rhs.abs()).max(one.lhs.abs());
            let residual = c.decomposition_residual.unwrap();
            prop_assert!(residual.abs() <= 1e-9 * scale, "k={k}: residual {residual}");
            // decrease ≥ combination ≥ certified one-step bound
            let mass = c.neglected_mass.unwrap();
            prop_assert!(mass >= -1e-9 * scale);
            prop_assert!(one.lhs >= c.combination_rhs - 1e-9 * scale);
            prop_assert!(c.combination_rhs >= one.rhs - 1e-9 * scale);
        }
    }

    #[test]
    fn longer_horizons_keep_the_rate(regime in 1u8..=8, seed in any::<u64>()) {
        let tr = random_run(regime, seed, 25);
        for n in [1, 5, 25] {
            let r = check_rate(&truncated(&tr, n), false).unwrap();
            prop_assert!(r.holds, "N={n}: {r:?}");
            prop_assert_eq!(r.prediction.n, n);
        }
    }

    #[test]
    fn nonsmooth_rate_on_abs_plus_quadratic(
        a1 in 0.0f64..2.0, mu1 in 0.1f64..3.0, b1 in -1.0f64..1.0,
        a2 in 0.0f64..2.0, frac in -0.9f64..0.9, b2 in -1.0f64..1.0,
        x0 in -3.0f64..3.0,
    ) {
        // F bounded below needs μ1 ≥ μ2
        let mu2 = mu1 * frac;
        let inst = DcInstance::new(
            FunctionSpec::abs_plus_quadratic(a1, mu1, b1),
            FunctionSpec::abs_plus_quadratic(a2, mu2, b2),
            DcParams::new(mu1, ExtReal::Infinity, mu2, ExtReal::Infinity),
        );
        let tr = run_dca(&inst, &[x0], &RunOptions::new(8)).unwrap();
        let r = check_nonsmooth_rate(&tr).unwrap();
        prop_assert!(r.holds, "{r:?}");
        for p in &tr.points[..tr.steps()] {
            prop_assert!(p.t.unwrap() >= -1e-12);
        }
    }
}

#[test]
fn equality_instances_are_recognized() {
    // f1 = x², f2 = 0 with L1 = 2: one exact step to the minimizer
    let inst = DcInstance::new(
        FunctionSpec::quadratic(vec![2.0], vec![0.0]),
        FunctionSpec::quadratic(vec![0.0], vec![0.0]),
        DcParams::new(0.0, 2.0, 0.0, 1.0),
    );
    let tr = run_dca(&inst, &[1.0], &RunOptions::new(1)).unwrap();
    let c = check_one_step(&tr, 0).unwrap();
    assert!(c.holds);
    assert_eq!(c.lhs, 1.0);
    assert!(c.equality_hit);
}
