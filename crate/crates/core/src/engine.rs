//! The DCA iteration and trajectory recording.
//!
//! Each step picks `g2^k ∈ ∂f2(x^k)` and solves `x^{k+1} ∈ argmin f1 − ⟨g2^k, ·⟩`.
//! The next `f1`-subgradient is set to `g1^{k+1} = g2^k`, which is exactly
//! the subproblem's optimality condition.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracles::{DcInstance, FunctionSpec, OracleError, SubgradPolicy};
use crate::vecops::{all_finite, dist_sq, dot, sub};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Instance(#[from] OracleError),
    #[error("starting point has dimension {got}, instance has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error("non-finite value at iteration {0}")]
    NonFinite(usize),
    #[error("trajectory JSON: {0}")]
    Json(String),
    #[error("malformed trajectory: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub k: usize,
    pub x: Vec<f64>,
    pub f1: f64,
    pub f2: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    #[serde(rename = "G_norm_sq")]
    pub g_norm_sq: f64,
    /// `T(x^k)`, known once `x^{k+1}` exists.
    #[serde(rename = "T")]
    pub t: Option<f64>,
    /// `‖x^k − x^{k+1}‖²`, known once `x^{k+1}` exists.
    pub dx_norm_sq: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    CriticalityTol,
    SubproblemUnbounded,
}

/// Criticality measure compared against the stopping tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StopMeasure {
    /// `‖g1^k − g2^k‖`, meaningful when one term is smooth.
    #[default]
    GradientGap,
    /// `T(x^k)`, the measure for two nonsmooth terms.
    TMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemSolver {
    #[default]
    Exact,
    /// Gradient descent on quadratic `f1`; the trajectory is flagged inexact.
    Iterative { tol: f64, max_iter: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub max_iters: usize,
    /// Early-stop threshold on the selected measure; `None` always runs
    /// `max_iters` steps.
    pub tol: Option<f64>,
    pub stop_on: StopMeasure,
    pub policy: SubgradPolicy,
    pub solver: SubproblemSolver,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: None,
            stop_on: StopMeasure::GradientGap,
            policy: SubgradPolicy::LeastNorm,
            solver: SubproblemSolver::Exact,
        }
    }
}

impl RunOptions {
    pub fn new(max_iters: usize) -> Self {
        Self {
            max_iters,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub instance: DcInstance,
    pub stop_reason: StopReason,
    pub policy: SubgradPolicy,
    /// Some subproblem was solved iteratively.
    #[serde(default)]
    pub inexact: bool,
    /// Steps `k` whose subproblem had several minimizers (least-norm taken).
    #[serde(default)]
    pub set_valued_steps: Vec<usize>,
}

impl Trajectory {
    /// Number of completed DCA steps.
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn first(&self) -> &TrajectoryPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("nonempty trajectory")
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        let mut out = String::from("k,F,G_norm_sq,T,dx_norm_sq\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{},{}",
                p.k,
                p.f,
                p.g_norm_sq,
                opt(p.t),
                opt(p.dx_norm_sq)
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }

    /// Parses a sidecar and checks its structural invariants.
    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        let traj: Trajectory =
            serde_json::from_str(text).map_err(|e| EngineError::Json(e.to_string()))?;
        traj.check()?;
        Ok(traj)
    }

    /// Structural invariants: nonempty, contiguous indices, consistent
    /// dimensions, finite values, `F = f1 − f2`, link constraint.
    pub fn check(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Malformed(m));
        if self.points.is_empty() {
            return bad("no points".into());
        }
        self.instance.check()?;
        let d = self.instance.dimension();
        for (i, p) in self.points.iter().enumerate() {
            if p.k != i {
                return bad(format!("index {} at position {i}", p.k));
            }
            if p.x.len() != d || p.g1.len() != d || p.g2.len() != d {
                return bad(format!("dimension mismatch at k={i}"));
            }
            if !(all_finite(&p.x) && all_finite(&p.g1) && all_finite(&p.g2))
                || !(p.f1.is_finite() && p.f2.is_finite())
            {
                return Err(EngineError::NonFinite(i));
            }
            if p.f != p.f1 - p.f2 {
                return bad(format!("F != f1 - f2 at k={i}"));
            }
        }
        for w in self.points.windows(2) {
            let gap = w[1]
                .g1
                .iter()
                .zip(&w[0].g2)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if gap > LINK_TOL {
                return bad(format!("link constraint off by {gap:e} at k={}", w[1].k));
            }
        }
        Ok(())
    }
}

/// Allowed deviation in `g1^{k+1} = g2^k`.
pub const LINK_TOL: f64 = 1e-12;

fn point(instance: &DcInstance, k: usize, x: Vec<f64>, g1: Vec<f64>, policy: SubgradPolicy) -> TrajectoryPoint {
    let f1 = instance.f1.value(&x);
    let a2 = instance.f2.evaluate(&x, policy);
    let g = sub(&g1, &a2.subgradient);
    TrajectoryPoint {
        k,
        f1,
        f2: a2.value,
        f: f1 - a2.value,
        g_norm_sq: dot(&g, &g),
        x,
        g1,
        g2: a2.subgradient,
        t: None,
        dx_norm_sq: None,
    }
}

/// Runs at most `opts.max_iters` DCA steps from `x0`.
///
/// An unbounded subproblem is not an error: the partial trajectory is
/// returned with [`StopReason::SubproblemUnbounded`].
pub fn run_dca(instance: &DcInstance, x0: &[f64], opts: &RunOptions) -> Result<Trajectory, EngineError> {
    instance.check()?;
    if x0.len() != instance.dimension() {
        return Err(EngineError::Dimension {
            expected: instance.dimension(),
            got: x0.len(),
        });
    }
    if opts.max_iters == 0 {
        return Err(EngineError::NoIterations);
    }
    if !all_finite(x0) {
        return Err(EngineError::NonFinite(0));
    }
    let g1 = instance.f1.evaluate(x0, opts.policy).subgradient;
    let mut points = vec![point(instance, 0, x0.to_vec(), g1, opts.policy)];
    let mut inexact = false;
    let mut set_valued_steps = Vec::new();
    let mut stop_reason = StopReason::MaxIters;

    for k in 0..opts.max_iters {
        let cur = &points[k];
        if opts.stop_on == StopMeasure::GradientGap
            && opts.tol.is_some_and(|tol| cur.g_norm_sq.sqrt() <= tol)
        {
            stop_reason = StopReason::CriticalityTol;
            break;
        }
        let solved = match opts.solver {
            SubproblemSolver::Exact => instance.f1.solve_dca_subproblem(&cur.g2),
            SubproblemSolver::Iterative { tol, max_iter } => {
                instance.f1.solve_dca_subproblem_iterative(&cur.g2, tol, max_iter)
            }
        };
        let sol = match solved {
            Ok(s) => s,
            Err(OracleError::Unbounded(_)) => {
                stop_reason = StopReason::SubproblemUnbounded;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        inexact |= sol.inexact;
        if sol.set_valued {
            set_valued_steps.push(k);
        }
        if !all_finite(&sol.x) {
            return Err(EngineError::NonFinite(k + 1));
        }
        let next = point(instance, k + 1, sol.x, cur.g2.clone(), opts.policy);
        let t = t_measure(&instance.f1, &cur.x, &next.x, &next.g1);
        let dx = dist_sq(&cur.x, &next.x);
        let cur = &mut points[k];
        cur.t = Some(t);
        cur.dx_norm_sq = Some(dx);
        points.push(next);
        if opts.stop_on == StopMeasure::TMeasure && opts.tol.is_some_and(|tol| t <= tol) {
            stop_reason = StopReason::CriticalityTol;
            break;
        }
    }
    Ok(Trajectory {
        points,
        instance: instance.clone(),
        stop_reason,
        policy: opts.policy,
        inexact,
        set_valued_steps,
    })
}

/// `T(x) = f1(x) − f1(x⁺) − ⟨g1⁺, x − x⁺⟩` for a DCA step `x → x⁺`.
pub fn t_measure(f1: &FunctionSpec, x: &[f64], x_plus: &[f64], g1_plus: &[f64]) -> f64 {
    f1.value(x) - f1.value(x_plus) - dot(g1_plus, &sub(x, x_plus))
}

/// `T(x) = f1(x) − ⟨g2, x⟩ − inf_w {f1(w) − ⟨g2, w⟩}`, with the infimum in
/// closed form for quadratic `f1` and from the exact subproblem otherwise.
pub fn t_measure_inf(f1: &FunctionSpec, x: &[f64], g2: &[f64]) -> Option<f64> {
    let inf = match f1 {
        FunctionSpec::Quadratic { c, b } => {
            let mut total = 0.0;
            for i in 0..c.len() {
                let m = b[i] - g2[i];
                if c[i] > 0.0 {
                    total -= m * m / (2.0 * c[i]);
                } else if !(c[i] == 0.0 && m == 0.0) {
                    return None;
                }
            }
            total
        }
        _ => {
            let w = f1.solve_dca_subproblem(g2).ok()?.x;
            f1.value(&w) - dot(g2, &w)
        }
    };
    Some(f1.value(x) - dot(g2, x) - inf)
}
