//! Classification of `(L1, L2, μ1, μ2)` into the eight one-step regimes and
//! evaluation of their coefficients.
//!
//! Every row is evaluated for the odd indices 1, 3, 5, 7 only. The even rows
//! are the same formulas applied to the swapped parameters `(L2, L1, μ2, μ1)`
//! with `σ ↔ σ⁺` exchanged afterwards.
//!
//! All formulas are written in terms of `1/L` so that `L = +∞` can be
//! substituted directly. Domain predicates on orderings and thresholds are
//! tested as closures with a relative slack of [`DOMAIN_REL_TOL`]; sign
//! conditions (`μ2 < 0`, `μ1 + μ2 > 0`, ...) are tested exactly because the
//! coefficients are singular on the other side of them.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::{CurvatureError, DcParams, ExtReal};

/// Relative slack used when testing non-sign domain predicates.
pub const DOMAIN_REL_TOL: f64 = 1e-12;
/// Maximum coefficient disagreement between two rows meeting on a boundary.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegimeError {
    #[error(transparent)]
    Invalid(#[from] CurvatureError),
    #[error("decrease precondition fails: need mu1 + mu2 > 0 or mu1 = mu2 = 0 (got mu1={mu1}, mu2={mu2})")]
    PreconditionViolated { mu1: f64, mu2: f64 },
    #[error("both terms are nonsmooth (L1 = L2 = inf); use the T-measure bounds instead")]
    BothNonsmooth,
    #[error("both terms are smooth; the one-nonsmooth table needs exactly one infinite L")]
    BothSmooth,
    #[error("no regime matches {0}")]
    NoRegime(String),
    #[error("regimes {a} and {b} both match {params} but disagree (sigma {sa} vs {sb}, sigma+ {pa} vs {pb})")]
    CoefficientMismatch {
        a: u8,
        b: u8,
        params: String,
        sa: f64,
        sb: f64,
        pa: f64,
        pb: f64,
    },
    #[error("denominator of {0} vanishes")]
    DenominatorZero(&'static str),
    #[error("bad grid spec {0:?}: expected lo:hi:steps")]
    Grid(String),
}

/// Which coefficient table produced a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientTable {
    /// At least one term smooth, evaluated in extended-real arithmetic.
    Smooth,
    /// Exactly one term nonsmooth, closed forms with `L = ∞` substituted.
    OneNonsmooth,
}

/// One evaluated domain predicate. `margin` is `lhs − rhs` oriented so that
/// a nonnegative value means the predicate holds (before slack).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainCheck {
    pub name: String,
    pub holds: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeCertificate {
    pub index: u8,
    /// Row label, `p1`..`p8` or the merged nonsmooth rows `p1,7` / `p2,8`.
    pub label: String,
    pub sigma: f64,
    pub sigma_plus: f64,
    pub p: f64,
    pub alpha: f64,
    pub table: CoefficientTable,
    pub params: DcParams,
    pub domain_trace: Vec<DomainCheck>,
    /// Other rows whose closed domains also contain these parameters.
    pub ties: Vec<u8>,
    /// Set when the parameters sit in the strip between the p1/p3/p5/p7
    /// domains (or its mirror) that only the p5 (p6) derivation covers.
    pub gap_fill: bool,
}

impl RegimeCertificate {
    /// Linear rates hold in regimes 7 and 8; only the sublinear form is certified.
    pub fn linear_regime(&self) -> bool {
        matches!(self.index, 7 | 8)
    }

    /// Odd rows weight the `G⁺` correction in the proof, even rows the `G` one.
    pub fn is_odd(&self) -> bool {
        self.index % 2 == 1
    }

    /// Exchanges the roles of the two terms: `i ↔ i±1`, `σ ↔ σ⁺`.
    fn mirrored(mut self, params: DcParams) -> Self {
        self.index = mirror_index(self.index);
        self.label = mirror_label(&self.label);
        std::mem::swap(&mut self.sigma, &mut self.sigma_plus);
        self.p = self.sigma + self.sigma_plus;
        self.params = params;
        self
    }
}

pub fn mirror_index(i: u8) -> u8 {
    if i % 2 == 1 {
        i + 1
    } else {
        i - 1
    }
}

fn mirror_label(label: &str) -> String {
    match label {
        "p1,7" => "p2,8".into(),
        "p2,8" => "p1,7".into(),
        other => {
            let i: u8 = other[1..].parse().unwrap_or(0);
            format!("p{}", mirror_index(i))
        }
    }
}

/// Collects predicate evaluations for one row.
struct Trace {
    checks: Vec<DomainCheck>,
}

impl Trace {
    fn new() -> Self {
        Self { checks: Vec::new() }
    }

    /// Closure test of `a ≥ b` with relative slack.
    fn ge(&mut self, name: String, a: f64, b: f64) -> bool {
        let margin = if a == b { 0.0 } else { a - b };
        let scale = if a.is_finite() && b.is_finite() {
            1f64.max(a.abs()).max(b.abs())
        } else {
            0.0
        };
        let holds = margin >= -DOMAIN_REL_TOL * scale;
        self.checks.push(DomainCheck {
            name,
            holds,
            margin,
        });
        holds
    }

    /// Exact sign test, recorded with the given margin.
    fn exact(&mut self, name: String, holds: bool, margin: f64) -> bool {
        self.checks.push(DomainCheck {
            name,
            holds,
            margin,
        });
        holds
    }
}

/// `μb · (1/μa + 1/μb + 1/L)` expanded so that `μb = 0` gives its limit 1.
fn mu_times_threshold(mu_b: f64, mu_a: f64, inv_l: f64) -> f64 {
    if mu_b == 0.0 {
        return 1.0;
    }
    let ratio = if mu_a == 0.0 {
        mu_b.signum() * f64::INFINITY
    } else {
        mu_b / mu_a
    };
    1.0 + ratio + mu_b * inv_l
}

/// Threshold sum `1/μa + 1/μb + 1/L` in extended arithmetic (`1/0 = +∞`).
fn threshold_sum(mu_a: f64, mu_b: f64, l: ExtReal) -> f64 {
    ExtReal::Finite(mu_a).inv() + ExtReal::Finite(mu_b).inv() + l.inv()
}

struct Candidate {
    index: u8,
    sigma: f64,
    sigma_plus: f64,
    alpha: f64,
    trace: Vec<DomainCheck>,
    gap_fill: bool,
}

/// Rows p1, p3, p5, p7 of the smooth table. `(a, b)` label the two terms in
/// the predicate names, so the mirrored evaluation reads naturally.
fn odd_rows(p: &DcParams, (a, b): (&str, &str)) -> Vec<Candidate> {
    let (m1, m2) = (p.mu1, p.mu2);
    let (l1, l2) = (p.l1, p.l2);
    let (il1, il2) = (l1.inv(), l2.inv());
    let s1 = threshold_sum(m1, m2, l2);
    // L1⁻¹ (2 + L2/μ2), only meaningful for μ2 < 0
    let thr = if m2 < 0.0 {
        il1 * (2.0 + l2.value() / m2)
    } else {
        f64::NAN
    };
    let mut out = Vec::new();

    // p1
    {
        let mut t = Trace::new();
        let mut ok = t.ge(format!("L{a}>=L{b}"), l1.value(), l2.value());
        ok &= t.ge(format!("L{b}>=mu{a}"), l2.value(), m1);
        ok &= t.exact(format!("mu{a}>=0"), m1 >= 0.0, m1);
        let branch = if m2 >= 0.0 {
            t.exact(format!("mu{b}>=0"), true, m2)
        } else {
            let pre = t.exact(format!("mu{a}>-mu{b}>0"), m1 + m2 > 0.0, m1 + m2);
            pre & t.ge(format!("S{a}<=L{a}^-1(2+L{b}/mu{b})"), thr, s1)
        };
        ok &= branch;
        if ok {
            let d = 1.0 - m1 * il1;
            out.push(Candidate {
                index: 1,
                sigma: il1 * (1.0 - m1 * il2) / d,
                sigma_plus: il2 * (1.0 + m1 * (il2 - il1) / d),
                alpha: m1 * il2 * (1.0 - l2.value() * il1) / d,
                trace: t.checks,
                gap_fill: false,
            });
        }
    }

    let hypo_b = m2 < 0.0 && m1 + m2 > 0.0;

    // p3
    {
        let mut t = Trace::new();
        let mut ok = t.exact(format!("mu{a}>-mu{b}>0"), hypo_b, m1 + m2);
        if ok {
            ok &= t.ge(format!("L{b}>mu{a}"), l2.value(), m1);
            ok &= t.ge(format!("S{a}>=L{a}^-1(2+L{b}/mu{b})"), s1, thr);
            ok &= t.ge(format!("S{a}<=0"), 0.0, s1);
        }
        if ok {
            let sigma = if il1 == 0.0 {
                0.0
            } else {
                il1 * s1 / (s1 - il1)
            };
            let d = 1.0 + m2 * il2;
            out.push(Candidate {
                index: 3,
                sigma,
                sigma_plus: il2 / d,
                alpha: -m2 * il2 / d,
                trace: t.checks,
                gap_fill: false,
            });
        }
    }

    // p5, extended over the strip μ1 > L2, 0 < S1 ≤ L1⁻¹(2 + L2/μ2)
    {
        let mut t = Trace::new();
        let mut ok = t.exact(format!("mu{a}>-mu{b}>0"), hypo_b, m1 + m2);
        let mut gap_fill = false;
        if ok {
            ok &= t.ge(format!("S{a}>0"), s1, 0.0);
            let above = t.ge(format!("S{a}>L{a}^-1(2+L{b}/mu{b})"), s1, thr);
            if !above {
                gap_fill = t.ge(format!("gap_fill:mu{a}>L{b}"), m1, l2.value());
            }
            ok &= above || gap_fill;
        }
        if ok {
            out.push(Candidate {
                index: 5,
                sigma: 0.0,
                sigma_plus: (m1 + m2) / (m2 * m2),
                alpha: (m1 + m2) / (-m2),
                trace: t.checks,
                gap_fill,
            });
        }
    }

    // p7
    {
        let mut t = Trace::new();
        let mut ok = t.ge(format!("mu{a}>L{b}"), m1, l2.value());
        ok &= t.exact(format!("L{b} finite"), l2.is_finite(), il2);
        if ok {
            ok &= t.ge(
                format!("mu{b}*S{a}>=0"),
                mu_times_threshold(m2, m1, il2),
                0.0,
            );
        }
        if ok {
            out.push(Candidate {
                index: 7,
                sigma: 0.0,
                sigma_plus: il2 * (1.0 + m1 * il2),
                alpha: m1 * il2,
                trace: t.checks,
                gap_fill: false,
            });
        }
    }
    out
}

fn into_certificate(
    c: Candidate,
    label: String,
    table: CoefficientTable,
    params: DcParams,
) -> RegimeCertificate {
    RegimeCertificate {
        index: c.index,
        label,
        sigma: c.sigma,
        sigma_plus: c.sigma_plus,
        p: c.sigma + c.sigma_plus,
        alpha: c.alpha,
        table,
        params,
        domain_trace: c.trace,
        ties: Vec::new(),
        gap_fill: c.gap_fill,
    }
}

fn preconditions(params: &DcParams) -> Result<(), RegimeError> {
    params.checked()?;
    if !params.decrease_precondition() {
        return Err(RegimeError::PreconditionViolated {
            mu1: params.mu1,
            mu2: params.mu2,
        });
    }
    if params.l1.is_infinite() && params.l2.is_infinite() {
        return Err(RegimeError::BothNonsmooth);
    }
    Ok(())
}

/// Every smooth-table row whose closed domain contains `params`, ordered by index.
pub fn matching_rows(params: &DcParams) -> Result<Vec<RegimeCertificate>, RegimeError> {
    preconditions(params)?;
    let swapped = params.swapped();
    let mut rows: Vec<RegimeCertificate> = odd_rows(params, ("1", "2"))
        .into_iter()
        .map(|c| {
            let label = format!("p{}", c.index);
            into_certificate(c, label, CoefficientTable::Smooth, *params)
        })
        .collect();
    rows.extend(odd_rows(&swapped, ("2", "1")).into_iter().map(|c| {
        let label = format!("p{}", c.index);
        into_certificate(c, label, CoefficientTable::Smooth, swapped).mirrored(*params)
    }));
    rows.sort_by_key(|r| r.index);
    Ok(rows)
}

fn agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * 1f64.max(a.abs()).max(b.abs())
}

fn resolve_ties(mut rows: Vec<RegimeCertificate>, params: &DcParams) -> Result<RegimeCertificate, RegimeError> {
    if rows.is_empty() {
        return Err(RegimeError::NoRegime(params.to_string()));
    }
    let mut best = rows.remove(0);
    for other in &rows {
        if !agree(best.sigma, other.sigma) || !agree(best.sigma_plus, other.sigma_plus) {
            return Err(RegimeError::CoefficientMismatch {
                a: best.index,
                b: other.index,
                params: params.to_string(),
                sa: best.sigma,
                sb: other.sigma,
                pa: best.sigma_plus,
                pb: other.sigma_plus,
            });
        }
        best.ties.push(other.index);
    }
    Ok(best)
}

/// One-step regime for parameters with at least one smooth term.
///
/// On boundaries shared by several rows the lowest index is returned, after
/// checking that the coefficients of all matching rows agree to [`TIE_TOL`].
pub fn classify(params: &DcParams) -> Result<RegimeCertificate, RegimeError> {
    let rows = matching_rows(params)?;
    resolve_ties(rows, params)
}

/// Rows p1,7 / p4 / p5 for `L1 = ∞`.
fn nonsmooth_f1_rows(p: &DcParams, (a, b): (&str, &str)) -> Vec<Candidate> {
    let (m1, m2) = (p.mu1, p.mu2);
    let il2 = p.l2.inv();
    let mut out = Vec::new();

    {
        let mut t = Trace::new();
        let mut ok = t.exact(format!("mu{a}>=0"), m1 >= 0.0, m1);
        ok &= t.ge(format!("mu{b}*S{a}>=0"), mu_times_threshold(m2, m1, il2), 0.0);
        if ok {
            out.push(Candidate {
                index: 1,
                sigma: 0.0,
                sigma_plus: il2 * (1.0 + m1 * il2),
                alpha: m1 * il2,
                trace: t.checks,
                gap_fill: false,
            });
        }
    }
    {
        let mut t = Trace::new();
        if t.exact(format!("mu{b}>-mu{a}>0"), m1 < 0.0 && m1 + m2 > 0.0, m1 + m2) {
            let s = 1.0 / m1 + 1.0 / m2;
            out.push(Candidate {
                index: 4,
                sigma: 0.0,
                sigma_plus: il2 * s / (s - il2),
                alpha: 0.0,
                trace: t.checks,
                gap_fill: false,
            });
        }
    }
    {
        let mut t = Trace::new();
        let mut ok = t.exact(format!("mu{a}>-mu{b}>0"), m2 < 0.0 && m1 + m2 > 0.0, m1 + m2);
        if ok {
            ok &= t.ge(format!("S{a}>0"), 1.0 / m1 + 1.0 / m2 + il2, 0.0);
        }
        if ok {
            out.push(Candidate {
                index: 5,
                sigma: 0.0,
                sigma_plus: (m1 + m2) / (m2 * m2),
                alpha: (m1 + m2) / (-m2),
                trace: t.checks,
                gap_fill: false,
            });
        }
    }
    out
}

fn nonsmooth_label(index: u8) -> String {
    match index {
        1 => "p1,7".into(),
        i => format!("p{i}"),
    }
}

/// One-step regime from the closed forms for exactly one nonsmooth term.
pub fn classify_nonsmooth(params: &DcParams) -> Result<RegimeCertificate, RegimeError> {
    params.checked()?;
    if !params.decrease_precondition() {
        return Err(RegimeError::PreconditionViolated {
            mu1: params.mu1,
            mu2: params.mu2,
        });
    }
    let rows: Vec<RegimeCertificate> = match (params.l1.is_infinite(), params.l2.is_infinite()) {
        (true, true) => return Err(RegimeError::BothNonsmooth),
        (false, false) => return Err(RegimeError::BothSmooth),
        (true, false) => nonsmooth_f1_rows(params, ("1", "2"))
            .into_iter()
            .map(|c| {
                let label = nonsmooth_label(c.index);
                into_certificate(c, label, CoefficientTable::OneNonsmooth, *params)
            })
            .collect(),
        (false, true) => {
            let swapped = params.swapped();
            nonsmooth_f1_rows(&swapped, ("2", "1"))
                .into_iter()
                .map(|c| {
                    let label = nonsmooth_label(c.index);
                    into_certificate(c, label, CoefficientTable::OneNonsmooth, swapped)
                        .mirrored(*params)
                })
                .collect()
        }
    };
    let mut rows = rows;
    rows.sort_by_key(|r| r.index);
    resolve_ties(rows, params)
}

/// Dispatches to [`classify_nonsmooth`] when exactly one `L` is infinite.
pub fn classify_any(params: &DcParams) -> Result<RegimeCertificate, RegimeError> {
    if params.l1.is_infinite() != params.l2.is_infinite() {
        classify_nonsmooth(params)
    } else {
        classify(params)
    }
}

/// `S1 = 1/μ1 + 1/μ2 + 1/L2` and `S2 = 1/μ1 + 1/μ2 + 1/L1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdValues {
    pub s1: ExtReal,
    pub s2: ExtReal,
}

pub fn thresholds(params: &DcParams) -> ThresholdValues {
    ThresholdValues {
        s1: ExtReal::from(threshold_sum(params.mu1, params.mu2, params.l2)),
        s2: ExtReal::from(threshold_sum(params.mu1, params.mu2, params.l1)),
    }
}

/// Conjectured leading constants of the sublinear rate in regimes 5 and 6.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub p5_inf: f64,
    pub p6_inf: f64,
    /// `L1 > μ2` and `L2 > μ1`; outside this set the constants are computed
    /// but carry no meaning.
    pub hypotheses_hold: bool,
}

/// `(L2 + μ1)(μ1 + μ2) / ((L2 + μ2) μ1²)`.
pub fn p5_infinity(params: &DcParams) -> Result<f64, RegimeError> {
    let (m1, m2) = (params.mu1, params.mu2);
    let il2 = params.l2.inv();
    // (L2 + μ1)/(L2 + μ2) = (1 + μ1/L2)/(1 + μ2/L2)
    let den = 1.0 + m2 * il2;
    if den == 0.0 || m1 == 0.0 {
        return Err(RegimeError::DenominatorZero("p5_inf"));
    }
    Ok((1.0 + m1 * il2) / den * (m1 + m2) / (m1 * m1))
}

/// `(L1 + μ2)(μ1 + μ2) / ((L1 + μ1) μ2²)`.
pub fn p6_infinity(params: &DcParams) -> Result<f64, RegimeError> {
    p5_infinity(&params.swapped()).map_err(|_| RegimeError::DenominatorZero("p6_inf"))
}

pub fn asymptotic_constants(params: &DcParams) -> Result<AsymptoticConstants, RegimeError> {
    params.checked()?;
    Ok(AsymptoticConstants {
        p5_inf: p5_infinity(params)?,
        p6_inf: p6_infinity(params)?,
        hypotheses_hold: params.l1.gt(params.mu2) && params.l2.gt(params.mu1),
    })
}

/// `lo:hi:steps`, `steps` evenly spaced nodes including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn nodes(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => {
                let h = (self.hi - self.lo) / (n - 1) as f64;
                (0..n).map(|i| self.lo + h * i as f64).collect()
            }
        }
    }
}

impl FromStr for GridSpec {
    type Err = RegimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RegimeError::Grid(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !lo.is_finite() || !hi.is_finite() || hi < lo || steps == 0 || steps > 100_000 {
            return Err(bad());
        }
        Ok(GridSpec { lo, hi, steps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub mu1: f64,
    pub mu2: f64,
    /// 0 when the node fails validation or the decrease precondition.
    pub regime: u8,
    pub p: Option<f64>,
}

/// Classifies every node of the `μ1 × μ2` grid for fixed `L1`, `L2`.
pub fn regime_map(l1: ExtReal, l2: ExtReal, mu1_grid: &GridSpec, mu2_grid: &GridSpec) -> Vec<MapRow> {
    let mu2s = mu2_grid.nodes();
    mu1_grid
        .nodes()
        .into_par_iter()
        .flat_map_iter(|mu1| {
            mu2s.iter()
                .map(|&mu2| {
                    let params = DcParams::new(mu1, l1, mu2, l2);
                    match classify_any(&params) {
                        Ok(c) => MapRow {
                            mu1,
                            mu2,
                            regime: c.index,
                            p: Some(c.p),
                        },
                        Err(_) => MapRow {
                            mu1,
                            mu2,
                            regime: 0,
                            p: None,
                        },
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Writes `mu1,mu2,regime,p` CSV; `p` is empty for index 0.
pub fn write_regime_csv<W: Write>(rows: &[MapRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "mu1,mu2,regime,p")?;
    for r in rows {
        match r.p {
            Some(p) => writeln!(w, "{},{},{},{}", r.mu1, r.mu2, r.regime, p)?,
            None => writeln!(w, "{},{},{},", r.mu1, r.mu2, r.regime)?,
        }
    }
    Ok(())
}
