//! Checks of the one-step, N-step and nonsmooth guarantees on recorded
//! trajectories.
//!
//! Every slack is `lhs − rhs`, computed once in that order. A check passes
//! when `slack ≥ −SLACK_TOL · scale`, where `scale = max(1, |F^k|, |F^{k+1}|)`
//! absorbs the rounding of objective differences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::DcParams;
use crate::engine::{Trajectory, TrajectoryPoint};
use crate::oracles::FstarSource;
use crate::regimes::{classify_any, RegimeCertificate, RegimeError};
use crate::vecops::{dot, norm_sq, sub, sub_scaled};

pub const SLACK_TOL: f64 = 1e-9;
/// Relative tolerance for flagging equality in the one-step bound.
pub const EQ_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertError {
    #[error("decrease precondition fails: mu1 + mu2 = {}", mu1 + mu2)]
    PreconditionViolated { mu1: f64, mu2: f64 },
    #[error(transparent)]
    Regime(RegimeError),
    #[error("step {k} out of range for a trajectory with {steps} steps")]
    StepOutOfRange { k: usize, steps: usize },
    #[error("trajectory has no completed step")]
    NoSteps,
    #[error("no lower bound F* available for this instance")]
    MissingFstar,
    #[error("regime rate p = {0} is not positive")]
    DegenerateRate(f64),
    #[error("the nonsmooth measure T is missing at step {0}")]
    MissingT(usize),
}

impl From<RegimeError> for CertError {
    fn from(e: RegimeError) -> Self {
        match e {
            RegimeError::PreconditionViolated { mu1, mu2 } => CertError::PreconditionViolated { mu1, mu2 },
            other => CertError::Regime(other),
        }
    }
}

fn scale(a: f64, b: f64) -> f64 {
    1f64.max(a.abs()).max(b.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepCheck {
    pub k: usize,
    pub regime: RegimeCertificate,
    /// `F(x) − F(x⁺)`.
    pub lhs: f64,
    /// `σ·½‖G‖² + σ⁺·½‖G⁺‖²`.
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub equality_hit: bool,
}

/// The one-step bound between points `k` and `k + 1`.
pub fn check_one_step(traj: &Trajectory, k: usize) -> Result<OneStepCheck, CertError> {
    let regime = classify_any(&traj.instance.declared)?;
    one_step_with(traj, k, regime)
}

fn one_step_with(traj: &Trajectory, k: usize, regime: RegimeCertificate) -> Result<OneStepCheck, CertError> {
    let (a, b) = step_pair(traj, k)?;
    Ok(check_step(regime, a, b))
}

/// The one-step bound between two consecutive points of any source.
pub fn check_step(regime: RegimeCertificate, a: &TrajectoryPoint, b: &TrajectoryPoint) -> OneStepCheck {
    let lhs = a.f - b.f;
    let rhs = regime.sigma * 0.5 * a.g_norm_sq + regime.sigma_plus * 0.5 * b.g_norm_sq;
    let slack = lhs - rhs;
    let mag = lhs.abs().max(rhs.abs());
    OneStepCheck {
        k: a.k,
        lhs,
        rhs,
        slack,
        holds: slack >= -SLACK_TOL * scale(a.f, b.f),
        equality_hit: slack.abs() <= EQ_TOL * mag || mag == 0.0,
        regime,
    }
}

fn step_pair(traj: &Trajectory, k: usize) -> Result<(&TrajectoryPoint, &TrajectoryPoint), CertError> {
    if k + 1 >= traj.points.len() {
        return Err(CertError::StepOutOfRange { k, steps: traj.steps() });
    }
    Ok((&traj.points[k], &traj.points[k + 1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationCheck {
    pub k: usize,
    pub alpha: f64,
    /// Right-hand side of the α-weighted sum of interpolation inequalities.
    pub combination_rhs: f64,
    /// `ΔF − combination_rhs`.
    pub slack: f64,
    pub holds: bool,
    /// Sum of the nonnegative squares dropped when passing from the
    /// combination to `σ·½‖G‖² + σ⁺·½‖G⁺‖²`; `None` where the closed-form
    /// weights are not finite.
    pub neglected_mass: Option<f64>,
    /// `combination_rhs − final_rhs − neglected_mass`, zero up to rounding.
    pub decomposition_residual: Option<f64>,
}

/// `½(L⁻¹/(1 − μL⁻¹)‖G − μΔx‖² + μ‖Δx‖²)`: one interpolation inequality
/// between the two iterates for the class `(μ, L)`.
fn q(mu: f64, il: f64, g: &[f64], dx: &[f64]) -> f64 {
    let curv = mu * norm_sq(dx);
    if il == 0.0 {
        return 0.5 * curv;
    }
    0.5 * (il / (1.0 - mu * il) * norm_sq(&sub_scaled(g, mu, dx)) + curv)
}

/// Odd-row combination `q1(G) + (1 + 2α) q2(G⁺) − α⟨G⁺, Δx⟩`.
fn odd_combination(p: &DcParams, alpha: f64, g: &[f64], gp: &[f64], dx: &[f64]) -> f64 {
    q(p.mu1, p.l1.inv(), g, dx) + (1.0 + 2.0 * alpha) * q(p.mu2, p.l2.inv(), gp, dx) - alpha * dot(gp, dx)
}

/// Dropped squares for odd rows, all weights written in reciprocal form.
fn odd_neglected(p: &DcParams, index: u8, g: &[f64], gp: &[f64], dx: &[f64]) -> Option<f64> {
    let (m1, m2) = (p.mu1, p.mu2);
    let (il1, il2) = (p.l1.inv(), p.l2.inv());
    let l2 = p.l2.value();
    let half_sq = |w: f64, v: &[f64], s: f64| 0.5 * w * norm_sq(&sub_scaled(v, s, dx));
    let s1 = 1.0 / m1 + 1.0 / m2 + il2;
    let out = match index {
        1 => {
            let w1 = m1 * il1 * il2 / (1.0 - m1 * il1);
            let num = m1 + m2 + m1 * m2 * il2 - m1 * il1 * (2.0 * m2 + l2);
            let w2 = num * il2 * il2 / ((1.0 - m1 * il1) * (1.0 - m2 * il2));
            half_sq(w1, g, l2) + half_sq(w2, gp, l2)
        }
        3 => {
            // weight on ‖G/c − L2Δx‖², c = L1/L2 + μ2(L1 − μ1)/(μ1(L2 + μ2))
            let w3 = m1 * m2 * (s1 - il1) / ((1.0 - m1 * il1) * l2 * (l2 + m2));
            let inv_c = il1 / (il2 + m2 * (1.0 - m1 * il1) / (m1 * (l2 + m2)));
            let scaled: Vec<f64> = g.iter().map(|v| v * inv_c).collect();
            half_sq(w3, &scaled, l2)
        }
        5 => {
            let w5 = -m1 * s1 / (m2 * (1.0 - m2 * il2));
            half_sq(il1 / (1.0 - m1 * il1), g, m1) + half_sq(w5, gp, m2)
        }
        7 => {
            let w = (m1 + m2 + m1 * m2 * il2) * il2 * il2 / (1.0 - m2 * il2);
            half_sq(il1 / (1.0 - m1 * il1), g, m1) + half_sq(w, gp, l2)
        }
        _ => return None,
    };
    out.is_finite().then_some(out)
}

/// Evaluates the α-weighted sum of interpolation inequalities the one-step
/// bound is derived from, between points `k` and `k + 1`.
///
/// Odd rows add the `f2` inequality in both directions (weight α on `G⁺`),
/// even rows the `f1` one (weight α on `G`); the even case is evaluated as
/// the odd case of the mirrored problem.
pub fn replay_proof_combination(
    traj: &Trajectory,
    k: usize,
    regime: &RegimeCertificate,
) -> Result<CombinationCheck, CertError> {
    let (a, b) = step_pair(traj, k)?;
    Ok(replay_step(regime, a, b))
}

/// [`replay_proof_combination`] on two consecutive points of any source.
pub fn replay_step(regime: &RegimeCertificate, a: &TrajectoryPoint, b: &TrajectoryPoint) -> CombinationCheck {
    let dx = sub(&a.x, &b.x);
    let g = sub(&a.g1, &a.g2);
    let gp = sub(&b.g1, &b.g2);
    let p = &regime.params;
    let (params, index, g, gp) = if regime.is_odd() {
        (*p, regime.index, g, gp)
    } else {
        (p.swapped(), regime.index - 1, gp, g)
    };
    let (sigma, sigma_plus) = if regime.is_odd() {
        (regime.sigma, regime.sigma_plus)
    } else {
        (regime.sigma_plus, regime.sigma)
    };
    let combination_rhs = odd_combination(&params, regime.alpha, &g, &gp, &dx);
    let final_rhs = sigma * 0.5 * norm_sq(&g) + sigma_plus * 0.5 * norm_sq(&gp);
    let neglected_mass = odd_neglected(&params, index, &g, &gp, &dx);
    let slack = (a.f - b.f) - combination_rhs;
    CombinationCheck {
        k: a.k,
        alpha: regime.alpha,
        combination_rhs,
        slack,
        holds: slack >= -SLACK_TOL * scale(a.f, b.f),
        decomposition_residual: neglected_mass.map(|m| combination_rhs - final_rhs - m),
        neglected_mass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    /// `(F(x^0) − F(x^N)) / (pN)`.
    pub bound_no_fstar: f64,
    /// `(F(x^0) − F*) / (pN + 1/(L1 − μ2))`.
    pub bound_with_fstar: Option<f64>,
    pub p_used: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub fstar: Option<f64>,
    pub fstar_source: Option<FstarSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub prediction: RatePrediction,
    /// `½ min_{0≤k≤N} ‖g1^k − g2^k‖²`.
    pub observed: f64,
    pub holds: bool,
}

/// `1/(L1 − μ2)` as `L1⁻¹/(1 − μ2L1⁻¹)`, defined when `L1 > μ2`.
fn fstar_offset(p: &DcParams) -> Option<f64> {
    if !p.l1.gt(p.mu2) {
        return None;
    }
    let il1 = p.l1.inv();
    Some(il1 / (1.0 - p.mu2 * il1))
}

/// The N-step rate over the whole trajectory. With `require_fstar`, a
/// missing lower bound is an error; otherwise the `F*` bound is computed
/// whenever one is available.
pub fn check_rate(traj: &Trajectory, require_fstar: bool) -> Result<RateCheck, CertError> {
    let regime = classify_any(&traj.instance.declared)?;
    rate_with(traj, &regime, require_fstar)
}

fn rate_with(traj: &Trajectory, regime: &RegimeCertificate, require_fstar: bool) -> Result<RateCheck, CertError> {
    let n = traj.steps();
    if n == 0 {
        return Err(CertError::NoSteps);
    }
    if !(regime.p > 0.0) {
        return Err(CertError::DegenerateRate(regime.p));
    }
    let f0 = traj.first().f;
    let f_n = traj.last().f;
    let pn = regime.p * n as f64;
    let bound_no_fstar = (f0 - f_n) / pn;
    let fstar = traj.instance.fstar_with_source();
    if require_fstar && fstar.is_none() {
        return Err(CertError::MissingFstar);
    }
    let bound_with_fstar = match (fstar, fstar_offset(&traj.instance.declared)) {
        (Some((v, _)), Some(off)) => Some((f0 - v) / (pn + off)),
        _ => None,
    };
    let observed = 0.5
        * traj
            .points
            .iter()
            .map(|p| p.g_norm_sq)
            .fold(f64::INFINITY, f64::min);
    let tol = |b: f64| b + SLACK_TOL * scale(f0, f_n).max(fstar.map_or(0.0, |(v, _)| v.abs()));
    let holds = observed <= tol(bound_no_fstar) && bound_with_fstar.is_none_or(|b| observed <= tol(b));
    Ok(RateCheck {
        prediction: RatePrediction {
            bound_no_fstar,
            bound_with_fstar,
            p_used: regime.p,
            n,
            fstar: fstar.map(|f| f.0),
            fstar_source: fstar.map(|f| f.1),
        },
        observed,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSlack {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonsmoothRateCheck {
    /// Per-step `lhs ≤ ΔF` with `lhs = μ2/2‖Δx‖² + T` (μ2 ≥ 0) or
    /// `(μ1 + μ2)/μ1 · T` (μ2 < 0).
    pub per_step: Vec<StepSlack>,
    /// `(F(x^0) − F*)/N`, times `μ1/(μ1 + μ2)` when μ2 < 0.
    pub bound: f64,
    /// `min T + μ2/2 · min ‖Δx‖²` (μ2 ≥ 0) or `min T` (μ2 < 0), minima over
    /// `0 ≤ k ≤ N − 1` taken independently.
    pub observed: f64,
    pub holds: bool,
    pub fstar: f64,
    pub fstar_source: FstarSource,
}

/// Progress guarantees in terms of `T`. They only use the lower curvatures,
/// so finite `L` values are accepted too.
pub fn check_nonsmooth_rate(traj: &Trajectory) -> Result<NonsmoothRateCheck, CertError> {
    let p = &traj.instance.declared;
    let (m1, m2) = (p.mu1, p.mu2);
    if !p.decrease_precondition() {
        return Err(CertError::PreconditionViolated { mu1: m1, mu2: m2 });
    }
    let n = traj.steps();
    if n == 0 {
        return Err(CertError::NoSteps);
    }
    let (fstar, fstar_source) = traj.instance.fstar_with_source().ok_or(CertError::MissingFstar)?;
    let mut per_step = Vec::with_capacity(n);
    let (mut min_t, mut min_dx) = (f64::INFINITY, f64::INFINITY);
    for k in 0..n {
        let (a, b) = (&traj.points[k], &traj.points[k + 1]);
        let t = a.t.ok_or(CertError::MissingT(k))?;
        let dx = a.dx_norm_sq.unwrap_or_else(|| crate::vecops::dist_sq(&a.x, &b.x));
        min_t = min_t.min(t);
        min_dx = min_dx.min(dx);
        let lhs = if m2 >= 0.0 {
            0.5 * m2 * dx + t
        } else {
            (m1 + m2) / m1 * t
        };
        let rhs = a.f - b.f;
        let slack = rhs - lhs;
        per_step.push(StepSlack {
            k,
            lhs,
            rhs,
            slack,
            holds: slack >= -SLACK_TOL * scale(a.f, b.f),
        });
    }
    let f0 = traj.first().f;
    let (bound, observed) = if m2 >= 0.0 {
        ((f0 - fstar) / n as f64, min_t + 0.5 * m2 * min_dx)
    } else {
        (m1 / (m1 + m2) * (f0 - fstar) / n as f64, min_t)
    };
    let holds = per_step.iter().all(|s| s.holds) && observed <= bound + SLACK_TOL * scale(f0, fstar);
    Ok(NonsmoothRateCheck {
        per_step,
        bound,
        observed,
        holds,
        fstar,
        fstar_source,
    })
}

/// Everything checked on one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub formula_revision: String,
    pub regime: Option<RegimeCertificate>,
    pub one_step: Vec<StepReport>,
    pub rate: Option<RateCheck>,
    pub nonsmooth: Option<NonsmoothRateCheck>,
    pub pass: bool,
}

/// Compact per-step record for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub k: usize,
    pub slack: f64,
    pub equality_hit: bool,
    pub combination_slack: f64,
    pub neglected_mass: Option<f64>,
    pub holds: bool,
}

/// Runs every applicable check: the regime bounds when some `L` is finite,
/// the `T`-based bounds when both are infinite (or an `F*` is known).
pub fn certify(traj: &Trajectory) -> Result<CertificateReport, CertError> {
    let p = &traj.instance.declared;
    if !p.decrease_precondition() {
        return Err(CertError::PreconditionViolated { mu1: p.mu1, mu2: p.mu2 });
    }
    let both_nonsmooth = p.l1.is_infinite() && p.l2.is_infinite();
    let mut report = CertificateReport {
        formula_revision: crate::formula_table_revision(),
        regime: None,
        one_step: Vec::new(),
        rate: None,
        nonsmooth: None,
        pass: true,
    };
    if !both_nonsmooth {
        let regime = classify_any(p)?;
        for k in 0..traj.steps() {
            let one = one_step_with(traj, k, regime.clone())?;
            let comb = replay_proof_combination(traj, k, &regime)?;
            report.pass &= one.holds && comb.holds;
            report.one_step.push(StepReport {
                k,
                slack: one.slack,
                equality_hit: one.equality_hit,
                combination_slack: comb.slack,
                neglected_mass: comb.neglected_mass,
                holds: one.holds && comb.holds,
            });
        }
        if traj.steps() > 0 {
            let rate = rate_with(traj, &regime, false)?;
            report.pass &= rate.holds;
            report.rate = Some(rate);
        }
        report.regime = Some(regime);
    }
    let has_fstar = traj.instance.fstar_with_source().is_some();
    if traj.steps() > 0 && (both_nonsmooth || has_fstar) {
        match check_nonsmooth_rate(traj) {
            Ok(ns) => {
                report.pass &= ns.holds;
                report.nonsmooth = Some(ns);
            }
            Err(CertError::MissingFstar) if !both_nonsmooth => {}
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
