mod common;

use common::{params_in, quadratic_instance, rng, start_point};
use dcacert::engine::{
    run_dca, t_measure_inf, EngineError, RunOptions, StopMeasure, StopReason, SubproblemSolver, Trajectory,
};
use dcacert::{DcInstance, DcParams, ExtReal, FunctionSpec};
use proptest::prelude::*;

fn coeffs(f: &FunctionSpec) -> (Vec<f64>, Vec<f64>) {
    match f {
        FunctionSpec::Quadratic { c, b } => (c.clone(), b.clone()),
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_the_closed_form_iteration(regime in 1u8..=8, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = params_in(regime, &mut r);
        let inst = quadratic_instance(&p, 2, &mut r);
        let x0 = start_point(2, &mut r);
        let tr = run_dca(&inst, &x0, &RunOptions::new(5)).unwrap();
        let (c1, b1) = coeffs(&inst.f1);
        let (c2, b2) = coeffs(&inst.f2);
        let mut x = x0;
        for pt in &tr.points {
            for i in 0..2 {
                prop_assert!((pt.x[i] - x[i]).abs() <= 1e-12 * 1f64.max(x[i].abs()));
            }
            // x⁺ = (c2 x + b2 − b1)/c1
            x = (0..2).map(|i| (c2[i] * x[i] + b2[i] - b1[i]) / c1[i]).collect();
        }
    }

    #[test]
    fn objective_decreases_by_the_curvature_margin(regime in 1u8..=8, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = params_in(regime, &mut r);
        let inst = quadratic_instance(&p, 3, &mut r);
        let tr = run_dca(&inst, &start_point(3, &mut r), &RunOptions::new(10)).unwrap();
        prop_assert!(tr.check().is_ok());
        for w in tr.points.windows(2) {
            let margin = 0.5 * (p.mu1 + p.mu2) * w[0].dx_norm_sq.unwrap();
            let scale = 1f64.max(w[0].f.abs());
            prop_assert!(w[0].f - w[1].f >= margin - 1e-10 * scale);
            prop_assert!(w[0].t.unwrap() >= -1e-10 * scale);
        }
    }

    #[test]
    fn t_measure_forms_agree(regime in 1u8..=8, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = params_in(regime, &mut r);
        let inst = quadratic_instance(&p, 2, &mut r);
        let tr = run_dca(&inst, &start_point(2, &mut r), &RunOptions::new(3)).unwrap();
        for pt in &tr.points[..3] {
            let direct = t_measure_inf(&inst.f1, &pt.x, &pt.g2).unwrap();
            prop_assert!((direct - pt.t.unwrap()).abs() <= 1e-9 * 1f64.max(direct.abs()));
        }
    }

    #[test]
    fn json_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = params_in(1 + (seed % 8) as u8, &mut r);
        let inst = quadratic_instance(&p, 2, &mut r);
        let tr = run_dca(&inst, &start_point(2, &mut r), &RunOptions::new(4)).unwrap();
        prop_assert_eq!(Trajectory::from_json(&tr.to_json()).unwrap(), tr);
    }
}

fn simple() -> DcInstance {
    DcInstance::new(
        FunctionSpec::quadratic(vec![2.0], vec![0.0]),
        FunctionSpec::quadratic(vec![1.0], vec![0.0]),
        DcParams::new(1.0, 3.0, 0.5, 2.0),
    )
}

#[test]
fn csv_has_one_row_per_iterate() {
    let tr = run_dca(&simple(), &[1.0], &RunOptions::new(3)).unwrap();
    let csv = tr.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,F,G_norm_sq,T,dx_norm_sq");
    assert_eq!(lines.len(), 5);
    // T is unknown at the last iterate
    assert!(lines[4].ends_with(",,"));
}

#[test]
fn tolerance_stops_early() {
    let opts = RunOptions {
        tol: Some(1e-3),
        ..RunOptions::new(100)
    };
    let tr = run_dca(&simple(), &[1.0], &opts).unwrap();
    assert_eq!(tr.stop_reason, StopReason::CriticalityTol);
    assert!(tr.last().g_norm_sq.sqrt() <= 1e-3);
    assert!(tr.steps() < 100);

    let opts = RunOptions {
        tol: Some(1e-6),
        stop_on: StopMeasure::TMeasure,
        ..RunOptions::new(100)
    };
    let tr = run_dca(&simple(), &[1.0], &opts).unwrap();
    assert_eq!(tr.stop_reason, StopReason::CriticalityTol);
    assert!(tr.points[tr.steps() - 1].t.unwrap() <= 1e-6);
}

#[test]
fn unbounded_subproblem_returns_the_prefix() {
    let inst = DcInstance::new(
        FunctionSpec::abs_plus_quadratic(1.0, 0.0, 0.0),
        FunctionSpec::quadratic(vec![1.0], vec![0.0]),
        DcParams::new(0.0, ExtReal::Infinity, 0.0, 1.0),
    );
    // g2 = 5 exceeds the slope of |x|
    let tr = run_dca(&inst, &[5.0], &RunOptions::new(10)).unwrap();
    assert_eq!(tr.stop_reason, StopReason::SubproblemUnbounded);
    assert_eq!(tr.steps(), 0);
}

#[test]
fn iterative_solver_is_flagged() {
    let opts = RunOptions {
        solver: SubproblemSolver::Iterative { tol: 1e-12, max_iter: 10_000 },
        ..RunOptions::new(3)
    };
    let tr = run_dca(&simple(), &[1.0], &opts).unwrap();
    assert!(tr.inexact);
    let exact = run_dca(&simple(), &[1.0], &RunOptions::new(3)).unwrap();
    assert!((tr.last().x[0] - exact.last().x[0]).abs() < 1e-9);
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(matches!(
        run_dca(&simple(), &[1.0, 2.0], &RunOptions::new(1)),
        Err(EngineError::Dimension { .. })
    ));
    assert!(matches!(run_dca(&simple(), &[1.0], &RunOptions::new(0)), Err(EngineError::NoIterations)));
    let mut tr = run_dca(&simple(), &[1.0], &RunOptions::new(2)).unwrap();
    tr.points[1].g1[0] += 1e-6;
    assert!(matches!(Trajectory::from_json(&tr.to_json()), Err(EngineError::Malformed(_))));
}
