//! `F_{μ,L}`-interpolation checks on finite sets of triplets `(x, g, f)`.
//!
//! For each ordered pair the inequality is evaluated as
//!
//! ```text
//! f_i − f_j − ⟨g_j, x_i − x_j⟩ ≥ μ/2‖x_i − x_j‖² + 1/(2(L−μ))‖g_i − g_j − μ(x_i − x_j)‖²
//! ```
//!
//! which is algebraically the usual two-term form but has a clean `L = ∞`
//! limit: `1/(L−μ)` is computed as `L⁻¹/(1 − μL⁻¹)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::CurvatureClass;
use crate::vecops::{all_finite, dot, norm_sq, sub, sub_scaled};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub f: f64,
}

impl Triplet {
    pub fn new(x: Vec<f64>, g: Vec<f64>, f: f64) -> Self {
        Self { x, g, f }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("triplet JSON: {0}")]
    Json(String),
    #[error("triplet {0} has non-finite entries")]
    NonFinite(usize),
    #[error("triplet {index} has dimension {got}, expected {expected}")]
    Dimension { index: usize, expected: usize, got: usize },
}

/// Parses `[{"x":[..],"g":[..],"f":..}, ...]` and checks shapes.
pub fn parse_triplets(text: &str) -> Result<Vec<Triplet>, InterpError> {
    let ts: Vec<Triplet> = serde_json::from_str(text).map_err(|e| InterpError::Json(e.to_string()))?;
    let d = ts.first().map(|t| t.x.len()).unwrap_or(0);
    for (i, t) in ts.iter().enumerate() {
        if t.x.len() != d || t.g.len() != d {
            return Err(InterpError::Dimension {
                index: i,
                expected: d,
                got: if t.x.len() != d { t.x.len() } else { t.g.len() },
            });
        }
        if !(all_finite(&t.x) && all_finite(&t.g) && t.f.is_finite()) {
            return Err(InterpError::NonFinite(i));
        }
    }
    Ok(ts)
}

/// How slacks are compared against the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    /// `slack ≥ −tol`.
    Absolute(f64),
    /// `slack ≥ −tol · max(1, magnitude of the terms in the pair)`.
    Scaled(f64),
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::Absolute(DEFAULT_TOL)
    }
}

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpReport {
    /// `slack[i][j]` is LHS − RHS of the inequality for the pair `(i, j)`.
    pub slack: Vec<Vec<f64>>,
    pub min_slack: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub feasible: bool,
    pub tolerance: Tolerance,
}

/// Right-hand side for `Δx = x_i − x_j`, `Δg = g_i − g_j`.
pub fn interpolation_rhs(cls: &CurvatureClass, dx: &[f64], dg: &[f64]) -> f64 {
    let mu = cls.mu;
    let il = cls.l.inv();
    let curv = 0.5 * mu * norm_sq(dx);
    if il == 0.0 {
        return curv;
    }
    let r = sub_scaled(dg, mu, dx);
    curv + 0.5 * il / (1.0 - mu * il) * norm_sq(&r)
}

fn pair(cls: &CurvatureClass, ti: &Triplet, tj: &Triplet) -> (f64, f64) {
    let dx = sub(&ti.x, &tj.x);
    let dg = sub(&ti.g, &tj.g);
    let lin = dot(&tj.g, &dx);
    let rhs = interpolation_rhs(cls, &dx, &dg);
    let slack = ti.f - tj.f - lin - rhs;
    let scale = 1f64
        .max(ti.f.abs())
        .max(tj.f.abs())
        .max(lin.abs())
        .max(rhs.abs())
        .max(norm_sq(&dg))
        .max(norm_sq(&dx));
    (slack, scale)
}

/// Evaluates all ordered pairs. Feasible iff every slack passes `tolerance`.
pub fn check_interpolation(triplets: &[Triplet], cls: &CurvatureClass, tolerance: Tolerance) -> InterpReport {
    let n = triplets.len();
    let mut slack = vec![vec![0.0; n]; n];
    let mut min_slack = 0.0f64;
    let mut worst_pair = None;
    let mut feasible = true;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (s, scale) = pair(cls, &triplets[i], &triplets[j]);
            slack[i][j] = s;
            let allowed = match tolerance {
                Tolerance::Absolute(t) => t,
                Tolerance::Scaled(t) => t * scale,
            };
            // NaN slacks are infeasible
            if !(s >= -allowed) {
                feasible = false;
            }
            if worst_pair.is_none() || s < min_slack {
                min_slack = s;
                worst_pair = Some((i, j));
            }
        }
    }
    InterpReport {
        slack,
        min_slack,
        worst_pair,
        feasible,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::ExtReal;

    fn data() -> Vec<Triplet> {
        vec![
            Triplet::new(vec![0.0], vec![0.0], 0.0),
            Triplet::new(vec![1.0], vec![2.0], 1.0),
        ]
    }

    #[test]
    fn quadratic_samples_are_tight() {
        let r = check_interpolation(&data(), &CurvatureClass::new(0.0, 2.0), Tolerance::default());
        assert!(r.feasible);
        assert_eq!(r.slack[0][1], 0.0);
        assert_eq!(r.slack[0][0], 0.0);
    }

    #[test]
    fn under_declared_curvature_is_infeasible() {
        let r = check_interpolation(&data(), &CurvatureClass::new(0.0, 1.0), Tolerance::default());
        assert!(!r.feasible);
        assert_eq!(r.slack[0][1], -1.0);
    }

    #[test]
    fn single_triplet_is_vacuous() {
        let r = check_interpolation(&data()[..1], &CurvatureClass::new(0.0, 1.0), Tolerance::default());
        assert!(r.feasible);
        assert_eq!(r.worst_pair, None);
    }

    #[test]
    fn infinite_l_is_the_lower_curvature_bound() {
        let cls = CurvatureClass::new(1.0, ExtReal::Infinity);
        let r = check_interpolation(&data(), &cls, Tolerance::default());
        // 0 − 1 − 2·(−1) − ½ = ½
        assert_eq!(r.slack[0][1], 0.5);
    }

    #[test]
    fn parsing_rejects_bad_shapes() {
        let ok = r#"[{"x":[0],"g":[0],"f":0},{"x":[1],"g":[2],"f":1}]"#;
        assert_eq!(parse_triplets(ok).unwrap(), data());
        assert!(matches!(
            parse_triplets(r#"[{"x":[0],"g":[0,1],"f":0}]"#),
            Err(InterpError::Dimension { .. })
        ));
        assert!(parse_triplets("[{").is_err());
        assert!(parse_triplets("[]").unwrap().is_empty());
    }
}
