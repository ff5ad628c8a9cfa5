#![allow(dead_code)]

use dcacert::oracles::QuadPiece;
use dcacert::{classify, DcInstance, DcParams, ExtReal, FunctionSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Random smooth parameters satisfying validation and the decrease
/// precondition; about one draw in twenty sits on a convex edge.
pub fn smooth_params(rng: &mut ChaCha8Rng) -> DcParams {
    loop {
        let l1 = log_uniform(rng, 0.2, 20.0);
        let l2 = log_uniform(rng, 0.2, 20.0);
        let (mu1, mu2) = if rng.gen_bool(0.05) {
            (0.0, 0.0)
        } else {
            (l1 * rng.gen_range(-0.95..0.95), l2 * rng.gen_range(-0.95..0.95))
        };
        let p = DcParams::new(mu1, l1, mu2, l2);
        if (mu1 + mu2 > 0.0 || (mu1 == 0.0 && mu2 == 0.0)) && p.validate().is_valid() {
            return p;
        }
    }
}

/// Rejection-samples smooth parameters that classify into `regime`.
pub fn params_in(regime: u8, rng: &mut ChaCha8Rng) -> DcParams {
    loop {
        let p = smooth_params(rng);
        if classify(&p).map(|c| c.index) == Ok(regime) {
            return p;
        }
    }
}

fn coeff(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    match rng.gen_range(0..4) {
        0 => lo,
        1 => hi,
        _ => rng.gen_range(lo..=hi),
    }
}

/// Diagonal quadratic DC instance of dimension `dim` whose terms lie in
/// the declared classes. `f1` is kept strictly convex so that every DCA
/// subproblem is solvable; endpoint curvatures are drawn often.
pub fn quadratic_instance(params: &DcParams, dim: usize, rng: &mut ChaCha8Rng) -> DcInstance {
    let l1 = params.l1.value();
    let l2 = params.l2.value();
    let lo1 = params.mu1.max(0.02 * l1);
    let c1: Vec<f64> = (0..dim).map(|_| coeff(rng, lo1, l1)).collect();
    let c2: Vec<f64> = (0..dim).map(|_| coeff(rng, params.mu2, l2)).collect();
    let b1: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b2: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DcInstance::new(FunctionSpec::quadratic(c1, b1), FunctionSpec::quadratic(c2, b2), *params)
}

pub fn start_point(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect()
}

/// A random member of each function family.
pub fn random_spec(rng: &mut ChaCha8Rng, family: usize) -> FunctionSpec {
    match family % 3 {
        0 => {
            let dim = rng.gen_range(1..=3);
            FunctionSpec::quadratic(
                (0..dim).map(|_| rng.gen_range(-2.0..4.0)).collect(),
                (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        }
        1 => {
            let k = rng.gen_range(1..=4);
            FunctionSpec::max_of_quadratics(
                (0..k)
                    .map(|_| QuadPiece {
                        a: rng.gen_range(-1.0..3.0),
                        b: rng.gen_range(-2.0..2.0),
                        c: rng.gen_range(-1.0..1.0),
                    })
                    .collect(),
            )
        }
        _ => FunctionSpec::abs_plus_quadratic(rng.gen_range(0.0..2.0), rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..1.0)),
    }
}

pub fn inf() -> ExtReal {
    ExtReal::Infinity
}
