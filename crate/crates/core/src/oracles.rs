//! Concrete function families with exact first-order oracles and exact
//! solutions of the DCA subproblem `argmin_w f1(w) − ⟨g2, w⟩`.
//!
//! Three families are supported:
//!
//! * `quadratic`: `Σ_i ½ c_i x_i² + b_i x_i`, any dimension;
//! * `max_of_quadratics`: `max_j ½ a_j x² + b_j x + c_j`, one dimension;
//! * `abs_plus_quadratic`: `a|x| + ½ μ x² + b x` with `a ≥ 0`, one dimension.
//!
//! At kinks the returned subgradient is chosen by a [`SubgradPolicy`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::{CurvatureClass, DcParams, ExtReal, Term};
use crate::vecops::{all_finite, dot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid function spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("DCA subproblem has no minimizer: {0}")]
    Unbounded(String),
    #[error("declared class of {term:?} does not contain the function's curvature range [{mu}, {l}]")]
    UnderDeclared { term: Term, mu: f64, l: ExtReal },
    #[error("invalid declared parameters: {0}")]
    Declared(String),
    #[error("instance JSON: {0}")]
    Json(String),
}

/// One quadratic piece `½ a x² + b x + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadPiece {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadPiece {
    pub fn value(&self, x: f64) -> f64 {
        0.5 * self.a * x * x + self.b * x + self.c
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.a * x + self.b
    }

    fn minus(&self, other: &QuadPiece) -> QuadPiece {
        QuadPiece {
            a: self.a - other.a,
            b: self.b - other.b,
            c: self.c - other.c,
        }
    }

    /// Real roots of `½ a x² + b x + c = 0`; empty for the zero polynomial.
    fn roots(&self) -> Vec<f64> {
        let (a, b, c) = (0.5 * self.a, self.b, self.c);
        if a == 0.0 {
            if b == 0.0 {
                return Vec::new();
            }
            return vec![-c / b];
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Vec::new();
        }
        let sq = disc.sqrt();
        // numerically stable pair
        let q = -0.5 * (b + b.signum() * sq);
        if q == 0.0 {
            return vec![0.0];
        }
        vec![q / a, c / q]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FunctionSpec {
    Quadratic { c: Vec<f64>, b: Vec<f64> },
    MaxOfQuadratics { pieces: Vec<QuadPiece> },
    AbsPlusQuadratic { a: f64, mu: f64, b: f64 },
}

/// Rule for picking one element of the subdifferential at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubgradPolicy {
    #[default]
    LeastNorm,
    Leftmost,
    Rightmost,
    /// `(1 − t)·left + t·right`, `t ∈ [0, 1]`.
    Weight(f64),
}

impl SubgradPolicy {
    fn select(self, lo: f64, hi: f64) -> f64 {
        match self {
            SubgradPolicy::LeastNorm => 0f64.clamp(lo, hi),
            SubgradPolicy::Leftmost => lo,
            SubgradPolicy::Rightmost => hi,
            SubgradPolicy::Weight(t) => {
                let t = t.clamp(0.0, 1.0);
                (1.0 - t) * lo + t * hi
            }
        }
    }
}

impl std::str::FromStr for SubgradPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "least-norm" | "least_norm" => Ok(SubgradPolicy::LeastNorm),
            "leftmost" => Ok(SubgradPolicy::Leftmost),
            "rightmost" => Ok(SubgradPolicy::Rightmost),
            other => other
                .strip_prefix("weight:")
                .and_then(|t| t.parse::<f64>().ok())
                .filter(|t| (0.0..=1.0).contains(t))
                .map(SubgradPolicy::Weight)
                .ok_or_else(|| format!("unknown subgradient policy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionTag {
    Differentiable,
    /// The subdifferential is `[lo, hi]` (one dimension).
    Kink { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAnswer {
    pub value: f64,
    pub subgradient: Vec<f64>,
    pub selection: SelectionTag,
}

/// Result of the DCA subproblem. `x` is a minimizer of `f1 − ⟨g2, ·⟩`, and
/// `g2 ∈ ∂f1(x)` up to `residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemSolution {
    pub x: Vec<f64>,
    pub residual: f64,
    /// The minimizer set has more than one point; `x` is its least-norm element.
    pub set_valued: bool,
    /// Produced by an iterative solver rather than a closed form.
    pub inexact: bool,
}

/// Residual bound enforced on exact subproblem solutions.
pub const SUBPROBLEM_RESIDUAL_TOL: f64 = 1e-12;

fn active_tol(v: f64) -> f64 {
    1e-12 * 1f64.max(v.abs())
}

impl FunctionSpec {
    pub fn quadratic(c: Vec<f64>, b: Vec<f64>) -> Self {
        FunctionSpec::Quadratic { c, b }
    }

    pub fn abs_plus_quadratic(a: f64, mu: f64, b: f64) -> Self {
        FunctionSpec::AbsPlusQuadratic { a, mu, b }
    }

    pub fn max_of_quadratics(pieces: Vec<QuadPiece>) -> Self {
        FunctionSpec::MaxOfQuadratics { pieces }
    }

    pub fn dimension(&self) -> usize {
        match self {
            FunctionSpec::Quadratic { c, .. } => c.len(),
            _ => 1,
        }
    }

    pub fn check(&self) -> Result<(), OracleError> {
        let bad = |m: &str| Err(OracleError::InvalidSpec(m.to_string()));
        match self {
            FunctionSpec::Quadratic { c, b } => {
                if c.is_empty() || c.len() != b.len() {
                    return bad("quadratic needs equal-length, nonempty c and b");
                }
                if !all_finite(c) || !all_finite(b) {
                    return bad("quadratic coefficients must be finite");
                }
            }
            FunctionSpec::MaxOfQuadratics { pieces } => {
                if pieces.is_empty() {
                    return bad("max_of_quadratics needs at least one piece");
                }
                if pieces
                    .iter()
                    .any(|p| !(p.a.is_finite() && p.b.is_finite() && p.c.is_finite()))
                {
                    return bad("piece coefficients must be finite");
                }
            }
            FunctionSpec::AbsPlusQuadratic { a, mu, b } => {
                if !(a.is_finite() && mu.is_finite() && b.is_finite()) {
                    return bad("abs_plus_quadratic coefficients must be finite");
                }
                if *a < 0.0 {
                    return bad("abs_plus_quadratic needs a >= 0");
                }
            }
        }
        Ok(())
    }

    /// Tightest `(μ, L)` the function satisfies. A quadratic with Hessian
    /// spectrum `[m, M]` is in every class with `μ ≤ m`, `M ≤ L`.
    pub fn curvature_range(&self) -> (f64, ExtReal) {
        match self {
            FunctionSpec::Quadratic { c, .. } => {
                let m = c.iter().cloned().fold(f64::INFINITY, f64::min);
                let big = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (m, ExtReal::Finite(big))
            }
            FunctionSpec::MaxOfQuadratics { pieces } => {
                let m = pieces.iter().map(|p| p.a).fold(f64::INFINITY, f64::min);
                if pieces.len() == 1 {
                    (m, ExtReal::Finite(m))
                } else {
                    (m, ExtReal::Infinity)
                }
            }
            FunctionSpec::AbsPlusQuadratic { a, mu, .. } => {
                if *a > 0.0 {
                    (*mu, ExtReal::Infinity)
                } else {
                    (*mu, ExtReal::Finite(*mu))
                }
            }
        }
    }

    pub fn belongs_to(&self, class: &CurvatureClass) -> bool {
        let (m, l) = self.curvature_range();
        class.mu <= m && l <= class.l
    }

    /// Tightest valid class: the curvature range, widened where needed so
    /// that `μ < L` and `L > 0` hold.
    pub fn certified_class(&self) -> CurvatureClass {
        let (m, l) = self.curvature_range();
        let l = match l {
            ExtReal::Finite(v) if v <= m || v <= 0.0 => {
                ExtReal::Finite(v.max(m).max(0.0) + 1e-9 * 1f64.max(v.abs()))
            }
            other => other,
        };
        CurvatureClass::new(m, l)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            FunctionSpec::Quadratic { c, b } => c
                .iter()
                .zip(b)
                .zip(x)
                .map(|((ci, bi), xi)| 0.5 * ci * xi * xi + bi * xi)
                .sum(),
            FunctionSpec::MaxOfQuadratics { pieces } => pieces
                .iter()
                .map(|p| p.value(x[0]))
                .fold(f64::NEG_INFINITY, f64::max),
            FunctionSpec::AbsPlusQuadratic { a, mu, b } => {
                let t = x[0];
                a * t.abs() + 0.5 * mu * t * t + b * t
            }
        }
    }

    /// One-dimensional subdifferential `[lo, hi]`; `None` for `d > 1`.
    pub fn subdifferential_1d(&self, x: f64) -> Option<(f64, f64)> {
        match self {
            FunctionSpec::Quadratic { c, b } if c.len() == 1 => {
                let g = c[0] * x + b[0];
                Some((g, g))
            }
            FunctionSpec::Quadratic { .. } => None,
            FunctionSpec::MaxOfQuadratics { pieces } => {
                let vmax = pieces
                    .iter()
                    .map(|p| p.value(x))
                    .fold(f64::NEG_INFINITY, f64::max);
                let tol = active_tol(vmax);
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for p in pieces.iter().filter(|p| p.value(x) >= vmax - tol) {
                    lo = lo.min(p.slope(x));
                    hi = hi.max(p.slope(x));
                }
                Some((lo, hi))
            }
            FunctionSpec::AbsPlusQuadratic { a, mu, b } => {
                let smooth = mu * x + b;
                if x > 0.0 {
                    Some((smooth + a, smooth + a))
                } else if x < 0.0 {
                    Some((smooth - a, smooth - a))
                } else {
                    Some((b - a, b + a))
                }
            }
        }
    }

    pub fn evaluate(&self, x: &[f64], policy: SubgradPolicy) -> OracleAnswer {
        let value = self.value(x);
        match self {
            FunctionSpec::Quadratic { c, b } => OracleAnswer {
                value,
                subgradient: c.iter().zip(b).zip(x).map(|((ci, bi), xi)| ci * xi + bi).collect(),
                selection: SelectionTag::Differentiable,
            },
            _ => {
                let (lo, hi) = self.subdifferential_1d(x[0]).expect("one-dimensional family");
                let selection = if lo == hi {
                    SelectionTag::Differentiable
                } else {
                    SelectionTag::Kink { lo, hi }
                };
                OracleAnswer {
                    value,
                    subgradient: vec![policy.select(lo, hi)],
                    selection,
                }
            }
        }
    }

    /// Distance from `g` to `∂f(x)`, used to certify subproblem solutions.
    pub fn subgradient_residual(&self, x: &[f64], g: &[f64]) -> f64 {
        match self {
            FunctionSpec::Quadratic { c, b } => c
                .iter()
                .zip(b)
                .zip(x.iter().zip(g))
                .map(|((ci, bi), (xi, gi))| (ci * xi + bi - gi).abs())
                .fold(0.0, f64::max),
            _ => {
                let (lo, hi) = self.subdifferential_1d(x[0]).expect("one-dimensional family");
                let t = g[0];
                if t < lo {
                    lo - t
                } else if t > hi {
                    t - hi
                } else {
                    0.0
                }
            }
        }
    }

    /// The piece describing `f` on a neighbourhood of `x` (one dimension).
    fn piece_at(&self, x: f64) -> QuadPiece {
        match self {
            FunctionSpec::Quadratic { c, b } => QuadPiece {
                a: c[0],
                b: b[0],
                c: 0.0,
            },
            FunctionSpec::MaxOfQuadratics { pieces } => *pieces
                .iter()
                .max_by(|p, q| p.value(x).total_cmp(&q.value(x)))
                .expect("nonempty"),
            FunctionSpec::AbsPlusQuadratic { a, mu, b } => QuadPiece {
                a: *mu,
                b: if x >= 0.0 { b + a } else { b - a },
                c: 0.0,
            },
        }
    }

    /// Points where the active piece may change (one dimension).
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            FunctionSpec::Quadratic { .. } => Vec::new(),
            FunctionSpec::AbsPlusQuadratic { .. } => vec![0.0],
            FunctionSpec::MaxOfQuadratics { pieces } => {
                let mut out = Vec::new();
                for (i, p) in pieces.iter().enumerate() {
                    for q in &pieces[i + 1..] {
                        out.extend(p.minus(q).roots());
                    }
                }
                out.retain(|v| v.is_finite());
                out
            }
        }
    }

    /// Exact minimizer of `f(w) − ⟨g2, w⟩`.
    pub fn solve_dca_subproblem(&self, g2: &[f64]) -> Result<SubproblemSolution, OracleError> {
        if g2.len() != self.dimension() {
            return Err(OracleError::DimensionMismatch {
                expected: self.dimension(),
                got: g2.len(),
            });
        }
        let (x, set_valued) = match self {
            FunctionSpec::Quadratic { c, b } => {
                let mut x = Vec::with_capacity(c.len());
                let mut set_valued = false;
                for ((ci, bi), gi) in c.iter().zip(b).zip(g2) {
                    if *ci > 0.0 {
                        x.push((gi - bi) / ci);
                    } else if *ci == 0.0 && gi == bi {
                        x.push(0.0);
                        set_valued = true;
                    } else {
                        return Err(OracleError::Unbounded(format!(
                            "quadratic coordinate with c={ci} and linear gap {}",
                            gi - bi
                        )));
                    }
                }
                (x, set_valued)
            }
            FunctionSpec::AbsPlusQuadratic { a, mu, b } => {
                let z = g2[0] - b;
                if *mu > 0.0 {
                    let shrunk = z.signum() * (z.abs() - a).max(0.0);
                    (vec![shrunk / mu], false)
                } else if *mu == 0.0 && z.abs() <= *a {
                    (vec![0.0], z.abs() == *a && *a > 0.0 || *a == 0.0)
                } else {
                    return Err(OracleError::Unbounded(format!(
                        "abs_plus_quadratic with mu={mu}, a={a} and |g2-b|={}",
                        z.abs()
                    )));
                }
            }
            FunctionSpec::MaxOfQuadratics { pieces } => {
                let shifted: Vec<QuadPiece> = pieces
                    .iter()
                    .map(|p| QuadPiece {
                        a: p.a,
                        b: p.b - g2[0],
                        c: p.c,
                    })
                    .collect();
                (vec![minimize_max_of_quadratics(&shifted)?], false)
            }
        };
        let residual = self.subgradient_residual(&x, g2);
        let scale = 1f64.max(g2.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        if residual > SUBPROBLEM_RESIDUAL_TOL * scale {
            return Err(OracleError::Unbounded(format!(
                "subproblem solution fails stationarity (residual {residual:e})"
            )));
        }
        Ok(SubproblemSolution {
            x,
            residual,
            set_valued,
            inexact: false,
        })
    }

    /// Gradient descent on a strongly convex quadratic `f1`, stopped at
    /// gradient norm `tol`. Demonstration only; results are flagged inexact.
    pub fn solve_dca_subproblem_iterative(
        &self,
        g2: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<SubproblemSolution, OracleError> {
        let FunctionSpec::Quadratic { c, b } = self else {
            return Err(OracleError::InvalidSpec(
                "iterative solver supports quadratics only".into(),
            ));
        };
        if c.iter().any(|v| *v <= 0.0) {
            return Err(OracleError::Unbounded("iterative solver needs c > 0".into()));
        }
        let step = 1.0 / c.iter().cloned().fold(0.0, f64::max);
        let mut x = vec![0.0; c.len()];
        for _ in 0..max_iter {
            let grad: Vec<f64> = (0..c.len()).map(|i| c[i] * x[i] + b[i] - g2[i]).collect();
            if dot(&grad, &grad).sqrt() <= tol {
                break;
            }
            for (xi, gi) in x.iter_mut().zip(&grad) {
                *xi -= step * gi;
            }
        }
        let residual = self.subgradient_residual(&x, g2);
        Ok(SubproblemSolution {
            x,
            residual,
            set_valued: false,
            inexact: true,
        })
    }
}

/// Global minimizer of `max_j ½ a_j w² + b_j w + c_j` over the reals,
/// least-norm among ties.
fn minimize_max_of_quadratics(pieces: &[QuadPiece]) -> Result<f64, OracleError> {
    let amax = pieces.iter().map(|p| p.a).fold(f64::NEG_INFINITY, f64::max);
    if amax < 0.0 {
        return Err(OracleError::Unbounded("all pieces strictly concave".into()));
    }
    if amax == 0.0 {
        let flat: Vec<f64> = pieces.iter().filter(|p| p.a == 0.0).map(|p| p.b).collect();
        let hi = flat.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = flat.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi < 0.0 || lo > 0.0 {
            return Err(OracleError::Unbounded("linear tail decreases without bound".into()));
        }
    }
    let h = |w: f64| pieces.iter().map(|p| p.value(w)).fold(f64::NEG_INFINITY, f64::max);
    let mut candidates = vec![0.0];
    for p in pieces {
        if p.a > 0.0 {
            candidates.push(-p.b / p.a);
        }
    }
    for (i, p) in pieces.iter().enumerate() {
        for q in &pieces[i + 1..] {
            candidates.extend(p.minus(q).roots());
        }
    }
    let mut best = (f64::INFINITY, f64::INFINITY);
    for w in candidates.into_iter().filter(|w| w.is_finite()) {
        let v = h(w);
        let tie = (v - best.0).abs() <= 1e-14 * 1f64.max(v.abs());
        if v < best.0 && !tie || tie && w.abs() < best.1.abs() {
            best = (v, w);
        }
    }
    Ok(best.1)
}

/// A DC objective `F = f1 − f2` together with the declared curvature classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcInstance {
    pub f1: FunctionSpec,
    pub f2: FunctionSpec,
    pub declared: DcParams,
    /// Caller-supplied lower bound on `F`.
    #[serde(rename = "Fstar", default)]
    pub fstar: Option<f64>,
}

/// Where a value of `F*` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FstarSource {
    Analytic,
    /// Supplied by the caller and not checked.
    Unverified,
}

impl DcInstance {
    pub fn new(f1: FunctionSpec, f2: FunctionSpec, declared: DcParams) -> Self {
        Self {
            f1,
            f2,
            declared,
            fstar: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, OracleError> {
        let inst: DcInstance =
            serde_json::from_str(text).map_err(|e| OracleError::Json(e.to_string()))?;
        inst.check()?;
        Ok(inst)
    }

    pub fn dimension(&self) -> usize {
        self.f1.dimension()
    }

    pub fn check(&self) -> Result<(), OracleError> {
        self.f1.check()?;
        self.f2.check()?;
        if self.f1.dimension() != self.f2.dimension() {
            return Err(OracleError::DimensionMismatch {
                expected: self.f1.dimension(),
                got: self.f2.dimension(),
            });
        }
        self.declared
            .checked()
            .map_err(|e| OracleError::Declared(e.to_string()))?;
        for (term, spec, class) in [
            (Term::F1, &self.f1, self.declared.f1()),
            (Term::F2, &self.f2, self.declared.f2()),
        ] {
            if !spec.belongs_to(&class) {
                let (mu, l) = spec.curvature_range();
                return Err(OracleError::UnderDeclared { term, mu, l });
            }
        }
        if let Some(v) = self.fstar {
            if !v.is_finite() {
                return Err(OracleError::InvalidSpec("Fstar must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.f1.value(x) - self.f2.value(x)
    }

    /// `F*` in closed form, or `None` when `F` is unbounded below or the
    /// family combination has no closed form.
    pub fn analytic_fstar(&self) -> Option<f64> {
        if let (FunctionSpec::Quadratic { c: c1, b: b1 }, FunctionSpec::Quadratic { c: c2, b: b2 }) =
            (&self.f1, &self.f2)
        {
            let mut total = 0.0;
            for i in 0..c1.len() {
                let k = c1[i] - c2[i];
                let m = b1[i] - b2[i];
                if k > 0.0 {
                    total -= m * m / (2.0 * k);
                } else if !(k == 0.0 && m == 0.0) {
                    return None;
                }
            }
            return Some(total);
        }
        if self.dimension() != 1 {
            return None;
        }
        minimize_difference_1d(&self.f1, &self.f2)
    }

    /// Analytic `F*` when available, else the caller's hint.
    pub fn fstar_with_source(&self) -> Option<(f64, FstarSource)> {
        self.analytic_fstar()
            .map(|v| (v, FstarSource::Analytic))
            .or(self.fstar.map(|v| (v, FstarSource::Unverified)))
    }
}

/// `inf_x f1(x) − f2(x)` for one-dimensional piecewise-quadratic terms.
fn minimize_difference_1d(f1: &FunctionSpec, f2: &FunctionSpec) -> Option<f64> {
    let mut bps = f1.breakpoints();
    bps.extend(f2.breakpoints());
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let diff_at = |x: f64| f1.piece_at(x).minus(&f2.piece_at(x));
    let mut best = f64::INFINITY;
    let mut consider = |q: QuadPiece, lo: f64, hi: f64| -> bool {
        // unbounded tails
        if lo == f64::NEG_INFINITY && (q.a < 0.0 || q.a == 0.0 && q.b > 0.0) {
            return false;
        }
        if hi == f64::INFINITY && (q.a < 0.0 || q.a == 0.0 && q.b < 0.0) {
            return false;
        }
        for x in [lo, hi] {
            if x.is_finite() {
                best = best.min(q.value(x));
            }
        }
        if q.a > 0.0 {
            let s = -q.b / q.a;
            if s >= lo && s <= hi {
                best = best.min(q.value(s));
            }
        } else if q.a == 0.0 && q.b == 0.0 {
            best = best.min(q.c);
        }
        true
    };
    if bps.is_empty() {
        return consider(diff_at(0.0), f64::NEG_INFINITY, f64::INFINITY).then_some(best);
    }
    let first = bps[0];
    if !consider(diff_at(first - 1.0), f64::NEG_INFINITY, first) {
        return None;
    }
    for w in bps.windows(2) {
        if !consider(diff_at(0.5 * (w[0] + w[1])), w[0], w[1]) {
            return None;
        }
    }
    let last = *bps.last().unwrap();
    if !consider(diff_at(last + 1.0), last, f64::INFINITY) {
        return None;
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_oracle() {
        let f = FunctionSpec::quadratic(vec![2.0], vec![0.0]);
        let ans = f.evaluate(&[3.0], SubgradPolicy::LeastNorm);
        assert_eq!(ans.value, 9.0);
        assert_eq!(ans.subgradient, vec![6.0]);
    }

    #[test]
    fn abs_least_norm_at_kink() {
        let f = FunctionSpec::abs_plus_quadratic(1.0, 0.0, 0.0);
        let ans = f.evaluate(&[0.0], SubgradPolicy::LeastNorm);
        assert_eq!(ans.value, 0.0);
        assert_eq!(ans.subgradient, vec![0.0]);
        assert_eq!(ans.selection, SelectionTag::Kink { lo: -1.0, hi: 1.0 });
        assert_eq!(f.evaluate(&[0.0], SubgradPolicy::Weight(0.75)).subgradient, vec![0.5]);
    }

    #[test]
    fn max_crossing_one_sided_gradients() {
        // ½x² and ½(x−2)² cross at x = 1
        let f = FunctionSpec::max_of_quadratics(vec![
            QuadPiece { a: 1.0, b: 0.0, c: 0.0 },
            QuadPiece { a: 1.0, b: -2.0, c: 2.0 },
        ]);
        let left = f.evaluate(&[1.0], SubgradPolicy::Leftmost);
        let right = f.evaluate(&[1.0], SubgradPolicy::Rightmost);
        assert_eq!(left.value, 0.5);
        assert_eq!(left.subgradient, vec![-1.0]);
        assert_eq!(right.subgradient, vec![1.0]);
        assert_eq!(f.evaluate(&[1.0], SubgradPolicy::LeastNorm).subgradient, vec![0.0]);
    }

    #[test]
    fn subproblem_examples() {
        let f = FunctionSpec::quadratic(vec![2.0], vec![0.0]);
        assert_eq!(f.solve_dca_subproblem(&[1.0]).unwrap().x, vec![0.5]);
        let f = FunctionSpec::quadratic(vec![1.0], vec![0.0]);
        assert_eq!(f.solve_dca_subproblem(&[0.0]).unwrap().x, vec![0.0]);
        let f = FunctionSpec::abs_plus_quadratic(1.0, 1.0, 0.0);
        assert_eq!(f.solve_dca_subproblem(&[0.5]).unwrap().x, vec![0.0]);
        assert_eq!(f.solve_dca_subproblem(&[3.0]).unwrap().x, vec![2.0]);
    }

    #[test]
    fn unbounded_subproblems_are_reported() {
        let f = FunctionSpec::quadratic(vec![0.0], vec![0.0]);
        assert!(matches!(f.solve_dca_subproblem(&[1.0]), Err(OracleError::Unbounded(_))));
        let f = FunctionSpec::quadratic(vec![-1.0], vec![0.0]);
        assert!(matches!(f.solve_dca_subproblem(&[0.0]), Err(OracleError::Unbounded(_))));
        let f = FunctionSpec::abs_plus_quadratic(1.0, 0.0, 0.0);
        assert!(f.solve_dca_subproblem(&[2.0]).is_err());
        assert_eq!(f.solve_dca_subproblem(&[0.5]).unwrap().x, vec![0.0]);
        let f = FunctionSpec::max_of_quadratics(vec![QuadPiece { a: -1.0, b: 0.0, c: 0.0 }]);
        assert!(f.solve_dca_subproblem(&[0.0]).is_err());
    }

    #[test]
    fn max_of_quadratics_subproblem_picks_global_minimum() {
        // hypoconvex double well: max{½(x−1)² − 1, ½(x+1)² − 1.5}
        let f = FunctionSpec::max_of_quadratics(vec![
            QuadPiece { a: 1.0, b: -1.0, c: -0.5 },
            QuadPiece { a: 1.0, b: 1.0, c: -1.0 },
        ]);
        let sol = f.solve_dca_subproblem(&[0.0]).unwrap();
        let v = f.value(&sol.x);
        for i in -400..=400 {
            let w = i as f64 * 0.01;
            assert!(v <= f.value(&[w]) + 1e-12);
        }
    }

    #[test]
    fn iterative_solver_is_flagged() {
        let f = FunctionSpec::quadratic(vec![2.0, 3.0], vec![1.0, -1.0]);
        let s = f.solve_dca_subproblem_iterative(&[0.5, 0.5], 1e-10, 10_000).unwrap();
        assert!(s.inexact);
        let exact = f.solve_dca_subproblem(&[0.5, 0.5]).unwrap();
        assert!((s.x[0] - exact.x[0]).abs() < 1e-9 && (s.x[1] - exact.x[1]).abs() < 1e-9);
    }

    #[test]
    fn classes_of_families() {
        let q = FunctionSpec::quadratic(vec![1.0, 3.0], vec![0.0, 0.0]);
        assert!(q.belongs_to(&CurvatureClass::new(1.0, 3.0)));
        assert!(q.belongs_to(&CurvatureClass::new(0.0, ExtReal::Infinity)));
        assert!(!q.belongs_to(&CurvatureClass::new(1.5, 3.0)));
        assert!(!q.belongs_to(&CurvatureClass::new(1.0, 2.0)));
        let a = FunctionSpec::abs_plus_quadratic(1.0, -0.5, 0.0);
        assert!(a.belongs_to(&CurvatureClass::new(-0.5, ExtReal::Infinity)));
        assert!(!a.belongs_to(&CurvatureClass::new(-0.5, 100.0)));
        let m = FunctionSpec::max_of_quadratics(vec![
            QuadPiece { a: 1.0, b: 0.0, c: 0.0 },
            QuadPiece { a: 2.0, b: 1.0, c: 0.0 },
        ]);
        assert_eq!(m.curvature_range(), (1.0, ExtReal::Infinity));
    }

    #[test]
    fn analytic_fstar_quadratic_and_piecewise() {
        let inst = DcInstance::new(
            FunctionSpec::quadratic(vec![2.0], vec![0.0]),
            FunctionSpec::quadratic(vec![0.0], vec![1.0]),
            DcParams::new(1.0, 3.0, 0.0, 1.0),
        );
        assert_eq!(inst.analytic_fstar(), Some(-0.25));
        // |x| + x² − 0.5|x|: minimum 0 at 0
        let inst = DcInstance::new(
            FunctionSpec::abs_plus_quadratic(1.0, 2.0, 0.0),
            FunctionSpec::abs_plus_quadratic(0.5, 0.0, 0.0),
            DcParams::new(2.0, ExtReal::Infinity, 0.0, ExtReal::Infinity),
        );
        assert_eq!(inst.analytic_fstar(), Some(0.0));
        // x² − 3|x|: minimum −2.25 at ±1.5
        let inst = DcInstance::new(
            FunctionSpec::abs_plus_quadratic(0.0, 2.0, 0.0),
            FunctionSpec::abs_plus_quadratic(3.0, 0.0, 0.0),
            DcParams::new(2.0, 3.0, 0.0, ExtReal::Infinity),
        );
        assert!((inst.analytic_fstar().unwrap() + 2.25).abs() < 1e-15);
        // x² − 2x² is unbounded
        let inst = DcInstance::new(
            FunctionSpec::quadratic(vec![2.0], vec![0.0]),
            FunctionSpec::quadratic(vec![4.0], vec![0.0]),
            DcParams::new(2.0, 3.0, 4.0, 5.0),
        );
        assert_eq!(inst.analytic_fstar(), None);
    }

    #[test]
    fn instance_json_and_validation() {
        let text = r#"{"f1":{"family":"quadratic","c":[2.0],"b":[0.0]},
                       "f2":{"family":"quadratic","c":[0.0],"b":[1.0]},
                       "declared":{"mu1":1,"L1":3,"mu2":0,"L2":1},"Fstar":null}"#;
        let inst = DcInstance::from_json(text).unwrap();
        assert_eq!(inst.dimension(), 1);
        let under = text.replace(r#""L1":3"#, r#""L1":1.5"#);
        assert!(matches!(
            DcInstance::from_json(&under),
            Err(OracleError::UnderDeclared { term: Term::F1, .. })
        ));
        assert!(DcInstance::from_json("{").is_err());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("leftmost".parse::<SubgradPolicy>(), Ok(SubgradPolicy::Leftmost));
        assert_eq!("weight:0.25".parse::<SubgradPolicy>(), Ok(SubgradPolicy::Weight(0.25)));
        assert!("weight:2".parse::<SubgradPolicy>().is_err());
    }
}
