//! Worst-case search for the N-step ratio `½ min_k ‖g1^k − g2^k‖² / (F(x^0) − F(x^N))`
//! over interpolation-feasible DCA iterates, and the explicit one-step
//! instances that attain the regime bounds.
//!
//! The search eliminates the function values exactly. For fixed iterates and
//! subgradients the interpolation constraints on `f` are difference
//! constraints `f_i − f_j ≥ w_ij`, so the smallest admissible
//! `F(x^0) − F(x^N)` is a sum of two longest paths; a positive cycle means the
//! iterates admit no interpolating function. The local search therefore only
//! moves `x` and `g`, rejecting infeasible moves.

mod penalty;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::{CurvatureClass, DcParams, ExtReal, Term};
use crate::engine::TrajectoryPoint;
use crate::interpolation::{check_interpolation, interpolation_rhs, InterpReport, Tolerance, Triplet};
use crate::regimes::{classify_any, RegimeCertificate, RegimeError};
use crate::vecops::{dist_sq, dot, norm_sq, sub};

pub const MAX_N: usize = 10;
pub const MAX_D: usize = 3;
/// Witness feasibility tolerance after the search.
pub const WITNESS_TOL: f64 = 1e-7;
/// Allowed excess of the best ratio over the certified bound.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error(transparent)]
    Regime(#[from] RegimeError),
    #[error("parameters lie in regime {actual}, not {requested}")]
    NotInRegime { requested: u8, actual: u8 },
    #[error("equality conditions give infeasible data for {term:?}: pair {pair:?} has slack {slack:e}")]
    InfeasibleConstruction { term: Term, pair: (usize, usize), slack: f64 },
    #[error("probe size N={n}, d={d} outside 1..={MAX_N}, 1..={MAX_D}")]
    Size { n: usize, d: usize },
    #[error("warm start does not match N={n}, d={d}")]
    WarmStart { n: usize, d: usize },
}

/// Iterates, subgradients and function values of an `N`-step DCA run.
/// `g1[k + 1] == g2[k]` holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PepVariables {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub x: Vec<Vec<f64>>,
    pub g1: Vec<Vec<f64>>,
    pub g2: Vec<Vec<f64>>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
}

impl PepVariables {
    pub fn triplets_f1(&self) -> Vec<Triplet> {
        (0..=self.n)
            .map(|k| Triplet::new(self.x[k].clone(), self.g1[k].clone(), self.f1[k]))
            .collect()
    }

    pub fn triplets_f2(&self) -> Vec<Triplet> {
        (0..=self.n)
            .map(|k| Triplet::new(self.x[k].clone(), self.g2[k].clone(), self.f2[k]))
            .collect()
    }

    pub fn link_holds(&self) -> bool {
        (0..self.n).all(|k| self.g1[k + 1] == self.g2[k])
    }

    pub fn numerator(&self) -> f64 {
        0.5 * (0..=self.n)
            .map(|k| norm_sq(&sub(&self.g1[k], &self.g2[k])))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn decrease(&self) -> f64 {
        (self.f1[0] - self.f2[0]) - (self.f1[self.n] - self.f2[self.n])
    }

    /// The PEP objective; 0 when the numerator vanishes.
    pub fn ratio(&self) -> f64 {
        let num = self.numerator();
        if num == 0.0 {
            0.0
        } else {
            num / self.decrease()
        }
    }

    pub fn feasibility(&self, params: &DcParams, tol: f64) -> (InterpReport, InterpReport) {
        (
            check_interpolation(&self.triplets_f1(), &params.f1(), Tolerance::Absolute(tol)),
            check_interpolation(&self.triplets_f2(), &params.f2(), Tolerance::Absolute(tol)),
        )
    }

    /// The iterates as trajectory points, so trajectory checks apply.
    pub fn points(&self) -> Vec<TrajectoryPoint> {
        (0..=self.n)
            .map(|k| {
                let next = (k < self.n).then(|| k + 1);
                TrajectoryPoint {
                    k,
                    x: self.x[k].clone(),
                    f1: self.f1[k],
                    f2: self.f2[k],
                    f: self.f1[k] - self.f2[k],
                    g1: self.g1[k].clone(),
                    g2: self.g2[k].clone(),
                    g_norm_sq: norm_sq(&sub(&self.g1[k], &self.g2[k])),
                    t: next.map(|j| {
                        self.f1[k] - self.f1[j] - dot(&self.g1[j], &sub(&self.x[k], &self.x[j]))
                    }),
                    dx_norm_sq: next.map(|j| dist_sq(&self.x[k], &self.x[j])),
                }
            })
            .collect()
    }
}

/// `(G, G⁺)` with `Δx = 1` meeting the odd-row equality conditions.
fn odd_equality(p: &DcParams, index: u8) -> (f64, f64) {
    let (m1, m2) = (p.mu1, p.mu2);
    let l2 = p.l2.value();
    // the reverse f2 inequality is tight only at an end of [μ2, L2]
    let g_plus_end = if p.l2.is_finite() { l2 } else { m2 };
    match index {
        1 => (l2.max(m1), l2),
        3 => {
            let il2 = p.l2.inv();
            let k = p.l1.value() + m2 * (p.l1.value() - m1) / (m1 * (1.0 + m2 * il2));
            if k.is_finite() {
                (k, g_plus_end)
            } else {
                (m1, g_plus_end)
            }
        }
        5 => (m1, m2),
        _ => (m1, l2),
    }
}

/// Smallest one-dimensional pair of interpolation half-sums for the class.
fn q(cls: &CurvatureClass, g: f64) -> f64 {
    interpolation_rhs(cls, &[1.0], &[g])
}

/// One-step data on the real line with `x^0 = 1`, `x^1 = 0` that attains the
/// bound of `regime` with equality.
pub fn extremal_instance(regime: u8, params: &DcParams) -> Result<PepVariables, ProbeError> {
    let cert = classify_any(params)?;
    if cert.index != regime && !cert.ties.contains(&regime) {
        return Err(ProbeError::NotInRegime {
            requested: regime,
            actual: cert.index,
        });
    }
    let (g, gp) = if regime % 2 == 1 {
        odd_equality(params, regime)
    } else {
        let (a, b) = odd_equality(&params.swapped(), regime - 1);
        (b, a)
    };
    let pep = PepVariables {
        n: 1,
        d: 1,
        x: vec![vec![1.0], vec![0.0]],
        g1: vec![vec![g], vec![0.0]],
        g2: vec![vec![0.0], vec![-gp]],
        f1: vec![q(&params.f1(), g), 0.0],
        f2: vec![-q(&params.f2(), gp), 0.0],
    };
    let (r1, r2) = pep.feasibility(params, 1e-9 * 1f64.max(g.abs()).max(gp.abs()).powi(2));
    for (term, r) in [(Term::F1, r1), (Term::F2, r2)] {
        if !r.feasible {
            return Err(ProbeError::InfeasibleConstruction {
                term,
                pair: r.worst_pair.unwrap_or((0, 0)),
                slack: r.min_slack,
            });
        }
    }
    Ok(pep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    /// Objective evaluations shared evenly by the starts.
    pub budget: usize,
    pub seed: u64,
    pub starts: usize,
    /// Seed start 0 with the analytic equality instance when `N = 1`.
    pub extremal_start: bool,
}


impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            n: 1,
            d: 1,
            budget: 200_000,
            seed: 0,
            starts: 32,
            extremal_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub regime: u8,
    pub best_ratio: f64,
    /// `1/(pN)`.
    pub certified_bound: f64,
    pub gap: f64,
    pub witness: PepVariables,
    pub feasibility: (InterpReport, InterpReport),
    pub witness_feasible: bool,
    pub certificate_violation: bool,
    pub budget_exhausted: bool,
    pub evaluations: usize,
    pub best_start: usize,
    pub config: ProbeConfig,
}

/// Search space: `x^0..x^{N−1}`, `g1^0`, `g2^0..g2^{N−1}`; `x^N = 0` and
/// `g2^N = 0` are fixed (translation and common linear shift invariance).
struct Space {
    n: usize,
    d: usize,
    c1: CurvatureClass,
    c2: CurvatureClass,
}

#[derive(Debug)]
struct Eval {
    ratio: f64,
    denom: f64,
}

impl Space {
    fn dim(&self) -> usize {
        self.d * (2 * self.n + 1)
    }

    fn unpack(&self, z: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (n, d) = (self.n, self.d);
        let chunk = |i: usize| z[i * d..(i + 1) * d].to_vec();
        let mut x: Vec<Vec<f64>> = (0..n).map(chunk).collect();
        x.push(vec![0.0; d]);
        let mut g2: Vec<Vec<f64>> = (0..n).map(|k| chunk(n + 1 + k)).collect();
        g2.push(vec![0.0; d]);
        let mut g1 = vec![chunk(n)];
        g1.extend(g2[..n].iter().cloned());
        (x, g1, g2)
    }

    fn pack(&self, pep: &PepVariables) -> Vec<f64> {
        let n = self.n;
        let shift = &pep.g2[n];
        let origin = &pep.x[n];
        let mut z = Vec::with_capacity(self.dim());
        for k in 0..n {
            z.extend(sub(&pep.x[k], origin));
        }
        z.extend(sub(&pep.g1[0], shift));
        for k in 0..n {
            z.extend(sub(&pep.g2[k], shift));
        }
        z
    }

    fn evaluate(&self, z: &[f64]) -> Option<Eval> {
        let (x, g1, g2) = self.unpack(z);
        let num = 0.5
            * (0..=self.n)
                .map(|k| norm_sq(&sub(&g1[k], &g2[k])))
                .fold(f64::INFINITY, f64::min);
        let d1 = longest_paths(&x, &g1, &self.c1)?;
        let d2 = longest_paths(&x, &g2, &self.c2)?;
        let denom = d1[self.n][0] + d2[0][self.n];
        if num == 0.0 {
            return Some(Eval { ratio: 0.0, denom });
        }
        if !(denom > 0.0) || !num.is_finite() {
            return None;
        }
        Some(Eval {
            ratio: num / denom,
            denom,
        })
    }

    /// Function values from the longest paths: `f1` anchored at `f1^N = 0`,
    /// `f2` at `f2^0 = 0`, which realizes the smallest decrease.
    fn witness(&self, z: &[f64]) -> Option<PepVariables> {
        let (x, g1, g2) = self.unpack(z);
        let d1 = longest_paths(&x, &g1, &self.c1)?;
        let d2 = longest_paths(&x, &g2, &self.c2)?;
        Some(PepVariables {
            n: self.n,
            d: self.d,
            f1: (0..=self.n).map(|i| d1[self.n][i]).collect(),
            f2: (0..=self.n).map(|i| d2[0][i]).collect(),
            x,
            g1,
            g2,
        })
    }
}

/// All-pairs longest paths for `f_i ≥ f_j + w_ij`; `None` on a positive cycle.
fn longest_paths(x: &[Vec<f64>], g: &[Vec<f64>], cls: &CurvatureClass) -> Option<Vec<Vec<f64>>> {
    let m = x.len();
    let mut dist = vec![vec![0.0; m]; m];
    let mut wmax = 0.0f64;
    for j in 0..m {
        for i in 0..m {
            if i != j {
                let dx = sub(&x[i], &x[j]);
                let w = dot(&g[j], &dx) + interpolation_rhs(cls, &dx, &sub(&g[i], &g[j]));
                if !w.is_finite() {
                    return None;
                }
                dist[j][i] = w;
                wmax = wmax.max(w.abs());
            }
        }
    }
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                let via = dist[j][k] + dist[k][i];
                if via > dist[j][i] {
                    dist[j][i] = via;
                }
            }
        }
    }
    let tol = 1e-12 * (1.0 + wmax);
    if (0..m).any(|i| dist[i][i] > tol) {
        return None;
    }
    Some(dist)
}

/// Iterates of DCA on separable quadratics drawn from the two classes.
fn quadratic_start(space: &Space, rng: &mut ChaCha8Rng, corner: bool) -> PepVariables {
    let (n, d) = (space.n, space.d);
    let pick = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        if corner {
            if rng.gen_bool(0.5) {
                lo
            } else {
                hi
            }
        } else {
            rng.gen_range(lo..=hi)
        }
    };
    let cap = |c: &CurvatureClass| match c.l {
        ExtReal::Finite(v) => v,
        ExtReal::Infinity => c.mu.abs().max(1.0) * 10.0 + c.mu,
    };
    let lo1 = space.c1.mu.max(1e-3 * cap(&space.c1));
    let (c1, c2): (Vec<f64>, Vec<f64>) = (0..d)
        .map(|_| (pick(rng, lo1, cap(&space.c1)), pick(rng, space.c2.mu, cap(&space.c2))))
        .unzip();
    let b1: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b2: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut x = vec![(0..d).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()];
    let grad = |c: &[f64], b: &[f64], x: &[f64]| -> Vec<f64> { (0..d).map(|i| c[i] * x[i] + b[i]).collect() };
    let mut g2 = Vec::new();
    for k in 0..n {
        let g = grad(&c2, &b2, &x[k]);
        x.push((0..d).map(|i| (g[i] - b1[i]) / c1[i]).collect());
        g2.push(g);
    }
    g2.push(grad(&c2, &b2, &x[n]));
    let mut g1 = vec![grad(&c1, &b1, &x[0])];
    g1.extend(g2[..n].iter().cloned());
    let val = |c: &[f64], b: &[f64], x: &[f64]| (0..d).map(|i| 0.5 * c[i] * x[i] * x[i] + b[i] * x[i]).sum::<f64>();
    PepVariables {
        n,
        d,
        f1: x.iter().map(|p| val(&c1, &b1, p)).collect(),
        f2: x.iter().map(|p| val(&c2, &b2, p)).collect(),
        x,
        g1,
        g2,
    }
}

/// Embeds a one-dimensional witness in the first coordinate.
fn embed(pep: &PepVariables, d: usize) -> PepVariables {
    let lift = |v: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        v.iter()
            .map(|p| {
                let mut q = vec![0.0; d];
                q[0] = p[0];
                q
            })
            .collect()
    };
    PepVariables {
        n: pep.n,
        d,
        x: lift(&pep.x),
        g1: lift(&pep.g1),
        g2: lift(&pep.g2),
        f1: pep.f1.clone(),
        f2: pep.f2.clone(),
    }
}

struct StartOutcome {
    z: Vec<f64>,
    ratio: f64,
    evaluations: usize,
    exhausted: bool,
}

const MIN_STEP: f64 = 1e-10;

fn rescale(z: &mut [f64], denom: f64) {
    let s = 1.0 / denom.sqrt();
    z.iter_mut().for_each(|v| *v *= s);
}

/// Local search from `z`: coordinate and random-direction moves, step halved
/// after every sweep without improvement. Keeps `F(x^0) − F(x^N) = 1`.
fn local_search(space: &Space, mut z: Vec<f64>, budget: usize, rng: &mut ChaCha8Rng) -> Option<StartOutcome> {
    let first = space.evaluate(&z)?;
    let mut ratio = first.ratio;
    if first.denom > 0.0 {
        rescale(&mut z, first.denom);
    }
    let dim = space.dim();
    let mut step = 0.1;
    let mut evaluations = 0;
    let try_move = |z: &mut Vec<f64>, cand: Vec<f64>, ratio: &mut f64, evaluations: &mut usize| -> bool {
        *evaluations += 1;
        match space.evaluate(&cand) {
            Some(e) if e.ratio > *ratio && e.denom > 0.0 => {
                *z = cand;
                rescale(z, e.denom);
                *ratio = e.ratio;
                true
            }
            _ => false,
        }
    };
    while step > MIN_STEP && evaluations < budget {
        let mut improved = false;
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                if evaluations >= budget {
                    break;
                }
                let mut cand = z.clone();
                cand[i] += sign * step;
                improved |= try_move(&mut z, cand, &mut ratio, &mut evaluations);
            }
        }
        for _ in 0..dim {
            if evaluations >= budget {
                break;
            }
            let dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = norm_sq(&dir).sqrt().max(f64::MIN_POSITIVE);
            let cand: Vec<f64> = z.iter().zip(&dir).map(|(v, u)| v + step * u / norm).collect();
            improved |= try_move(&mut z, cand, &mut ratio, &mut evaluations);
        }
        if !improved {
            step *= 0.5;
        }
    }
    Some(StartOutcome {
        z,
        ratio,
        evaluations,
        exhausted: step > MIN_STEP,
    })
}

/// Share of a start's budget given to the smooth penalty phase.
const PENALTY_SHARE: f64 = 0.7;

/// One start: smooth penalty phase from `init`, exact elimination of the
/// function values, then derivative-free polishing of the better of the
/// initial and penalized points.
fn search_start(space: &Space, init: &PepVariables, budget: usize, rng: &mut ChaCha8Rng) -> Option<StartOutcome> {
    let mut z0 = space.pack(init);
    let e0 = space.evaluate(&z0)?;
    if e0.denom > 0.0 {
        rescale(&mut z0, e0.denom);
    }
    let mut best = (e0.ratio, z0.clone());
    let mut used = 0;
    let pen_budget = (budget as f64 * PENALTY_SHARE) as usize;
    if pen_budget > 0 {
        if let Some(w) = space.witness(&z0) {
            let mut pen = penalty::Penalty::new(space.n, space.d, &space.c1, &space.c2);
            let v = pen.solve(pen.seed(&z0, &w.f1, &w.f2), pen_budget);
            used = pen.evaluations().min(pen_budget);
            let z1 = v[..pen.z_len()].to_vec();
            if let Some(e1) = space.evaluate(&z1) {
                if e1.ratio > best.0 && e1.denom > 0.0 {
                    let mut z1 = z1;
                    rescale(&mut z1, e1.denom);
                    best = (e1.ratio, z1);
                }
            }
        }
    }
    let mut out = local_search(space, best.1, budget - used, rng)?;
    out.evaluations += used;
    Some(out)
}

/// Multi-start search for the worst ratio at `params`.
///
/// Start 0 is `warm` if given, else the extremal one-step instance (N = 1)
/// or a corner quadratic run; the rest are DCA runs on random quadratics,
/// alternating between class corners and interior curvatures. Each start has
/// its own ChaCha stream, so results do not depend on scheduling.
pub fn probe(params: &DcParams, cfg: &ProbeConfig, warm: Option<&PepVariables>) -> Result<ProbeResult, ProbeError> {
    let (n, d) = (cfg.n, cfg.d);
    if !(1..=MAX_N).contains(&n) || !(1..=MAX_D).contains(&d) {
        return Err(ProbeError::Size { n, d });
    }
    if let Some(w) = warm {
        let shape_ok = w.n == n
            && w.d == d
            && w.x.len() == n + 1
            && [&w.x, &w.g1, &w.g2].iter().all(|v| v.len() == n + 1 && v.iter().all(|p| p.len() == d))
            && w.f1.len() == n + 1
            && w.f2.len() == n + 1;
        if !shape_ok {
            return Err(ProbeError::WarmStart { n, d });
        }
    }
    let cert: RegimeCertificate = classify_any(params)?;
    let space = Space {
        n,
        d,
        c1: params.f1(),
        c2: params.f2(),
    };
    let starts = cfg.starts.max(1);
    let per_start = cfg.budget / starts;

    let outcomes: Vec<Option<StartOutcome>> = (0..starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(s as u64);
            let init = if s == 0 {
                match warm {
                    Some(w) => w.clone(),
                    None if n == 1 && cfg.extremal_start => extremal_instance(cert.index, params)
                        .map(|p| embed(&p, d))
                        .unwrap_or_else(|_| quadratic_start(&space, &mut rng, true)),
                    None => quadratic_start(&space, &mut rng, true),
                }
            } else {
                quadratic_start(&space, &mut rng, s % 2 == 1)
            };
            search_start(&space, &init, per_start, &mut rng)
        })
        .collect();

    let evaluations = outcomes.iter().flatten().map(|o| o.evaluations).sum();
    let budget_exhausted = outcomes.iter().flatten().any(|o| o.exhausted);
    let mut best: Option<(usize, &StartOutcome)> = None;
    for (s, o) in outcomes.iter().enumerate() {
        if let Some(o) = o {
            if best.is_none_or(|(_, b)| o.ratio > b.ratio) {
                best = Some((s, o));
            }
        }
    }
    let (best_start, best) = match best {
        Some(b) => b,
        None => {
            // every start infeasible: report the trivial critical witness
            let zero = vec![0.0; space.dim()];
            let o = local_search(&space, zero, 0, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).expect("zero point is feasible");
            return Ok(finish(&space, &cert, cfg, params, o.z, 0.0, 0, evaluations, budget_exhausted));
        }
    };
    Ok(finish(
        &space,
        &cert,
        cfg,
        params,
        best.z.clone(),
        best.ratio,
        best_start,
        evaluations,
        budget_exhausted,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    space: &Space,
    cert: &RegimeCertificate,
    cfg: &ProbeConfig,
    params: &DcParams,
    z: Vec<f64>,
    best_ratio: f64,
    best_start: usize,
    evaluations: usize,
    budget_exhausted: bool,
) -> ProbeResult {
    let witness = space.witness(&z).expect("accepted points are feasible");
    let feasibility = witness.feasibility(params, WITNESS_TOL);
    let certified_bound = 1.0 / (cert.p * cfg.n as f64);
    ProbeResult {
        regime: cert.index,
        best_ratio,
        certified_bound,
        gap: certified_bound - best_ratio,
        witness_feasible: feasibility.0.feasible && feasibility.1.feasible && witness.link_holds(),
        feasibility,
        certificate_violation: best_ratio > certified_bound + VIOLATION_TOL,
        budget_exhausted,
        evaluations,
        best_start,
        config: *cfg,
        witness,
    }
}

/// Least-squares fit of `1/ratio = aN + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SublinearFit {
    pub a: f64,
    pub b: f64,
    /// Largest relative residual of `1/ratio`.
    pub max_rel_residual: f64,
}

pub fn fit_sublinear(samples: &[(usize, f64)]) -> Option<SublinearFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, r)| *r > 0.0 && r.is_finite())
        .map(|(n, r)| (*n as f64, 1.0 / r))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let max_rel_residual = pts
        .iter()
        .map(|(x, y)| ((a * x + b - y) / y).abs())
        .fold(0.0, f64::max);
    Some(SublinearFit { a, b, max_rel_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{check_step, replay_step};

    fn equality(index: u8, p: DcParams) {
        let pep = extremal_instance(index, &p).unwrap();
        let pts = pep.points();
        let cert = classify_any(&p).unwrap();
        let c = check_step(cert.clone(), &pts[0], &pts[1]);
        assert!(c.equality_hit, "regime {index}: {c:?}");
        let r = replay_step(&cert, &pts[0], &pts[1]);
        assert!(r.slack.abs() < 1e-9, "regime {index}: {r:?}");
    }

    #[test]
    fn regime_five_extremal() {
        let p = DcParams::new(2.0, 10.0, -1.0, 1.5);
        let pep = extremal_instance(5, &p).unwrap();
        assert_eq!(pep.g1[0][0] - pep.g2[0][0], 2.0);
        assert_eq!(pep.g1[1][0] - pep.g2[1][0], -1.0);
        equality(5, p);
    }

    #[test]
    fn extremal_instances_attain_bounds() {
        equality(1, DcParams::new(0.5, 2.0, 0.0, 1.0));
        equality(2, DcParams::new(0.0, 1.0, 0.5, 2.0));
        equality(3, DcParams::new(3.0, 4.0, -1.5, 4.0));
        equality(4, DcParams::new(-1.5, 4.0, 3.0, 4.0));
        equality(6, DcParams::new(-1.0, 1.5, 2.0, 10.0));
        equality(7, DcParams::new(5.0, 6.0, 1.0, 1.5));
        equality(8, DcParams::new(1.0, 1.5, 5.0, 6.0));
    }

    #[test]
    fn convex_extremal_has_equal_gaps() {
        let p = DcParams::new(0.0, 1.0, 0.0, 1.0);
        let pep = extremal_instance(1, &p).unwrap();
        assert_eq!(pep.g1[0][0] - pep.g2[0][0], 1.0);
        assert_eq!(pep.g1[1][0] - pep.g2[1][0], 1.0);
        equality(1, p);
    }

    #[test]
    fn wrong_regime_is_rejected() {
        assert!(matches!(
            extremal_instance(3, &DcParams::new(0.5, 2.0, 0.0, 1.0)),
            Err(ProbeError::NotInRegime { requested: 3, actual: 1 })
        ));
    }

    #[test]
    fn warm_started_regime_one_probe_is_tight() {
        let p = DcParams::new(0.5, 2.0, 0.0, 1.0);
        let cfg = ProbeConfig {
            budget: 2000,
            starts: 4,
            ..ProbeConfig::default()
        };
        let r = probe(&p, &cfg, None).unwrap();
        assert!((r.best_ratio - r.certified_bound).abs() < 1e-4, "{r:?}");
        assert!(r.witness_feasible);
        assert!(!r.certificate_violation);
    }

    #[test]
    fn zero_budget_at_a_critical_point() {
        let p = DcParams::new(0.5, 2.0, 0.0, 1.0);
        let crit = PepVariables {
            n: 1,
            d: 1,
            x: vec![vec![1.0], vec![0.0]],
            g1: vec![vec![0.0], vec![0.0]],
            g2: vec![vec![0.0], vec![0.0]],
            f1: vec![0.0, 0.0],
            f2: vec![0.0, 0.0],
        };
        let cfg = ProbeConfig {
            budget: 0,
            starts: 1,
            ..ProbeConfig::default()
        };
        let r = probe(&p, &cfg, Some(&crit)).unwrap();
        assert_eq!(r.best_ratio, 0.0);
    }

    #[test]
    fn probe_is_deterministic() {
        let p = DcParams::new(2.0, 10.0, -1.0, 1.5);
        let cfg = ProbeConfig {
            n: 2,
            budget: 3000,
            starts: 6,
            seed: 11,
            ..ProbeConfig::default()
        };
        let a = probe(&p, &cfg, None).unwrap();
        let b = probe(&p, &cfg, None).unwrap();
        assert_eq!(a, b);
        assert!(!a.certificate_violation);
        assert!(a.witness_feasible);
    }

    #[test]
    fn size_limits() {
        let p = DcParams::new(0.5, 2.0, 0.0, 1.0);
        let cfg = ProbeConfig {
            n: 11,
            ..ProbeConfig::default()
        };
        assert!(matches!(probe(&p, &cfg, None), Err(ProbeError::Size { .. })));
    }

    #[test]
    fn fit_recovers_line() {
        let s: Vec<(usize, f64)> = [2, 4, 6].iter().map(|&n| (n, 1.0 / (1.5 * n as f64 + 0.25))).collect();
        let f = fit_sublinear(&s).unwrap();
        assert!((f.a - 1.5).abs() < 1e-12 && (f.b - 0.25).abs() < 1e-12);
        assert!(fit_sublinear(&s[..1]).is_none());
    }
}
