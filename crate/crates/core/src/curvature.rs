//! Extended-real curvature arithmetic and the `(μ, L)` parameter pairs of the
//! two DC terms.
//!
//! Upper curvatures live on `(0, +∞]`; `+∞` marks a term that may be
//! nonsmooth. Lower curvatures are ordinary reals of either sign.

use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// A real number or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinity,
}

impl ExtReal {
    pub const INFINITY: ExtReal = ExtReal::Infinity;

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::Infinity)
    }

    /// Plain `f64` view, with `+∞` mapped to `f64::INFINITY`.
    pub fn value(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::Infinity => f64::INFINITY,
        }
    }

    /// Signed reciprocal: `1/+∞ = 0`, `1/0 = +∞` (for either zero sign),
    /// and `1/x` otherwise.
    pub fn recip(self) -> ExtReal {
        match self {
            ExtReal::Infinity => ExtReal::Finite(0.0),
            ExtReal::Finite(v) if v == 0.0 => ExtReal::Infinity,
            ExtReal::Finite(v) => ExtReal::Finite(1.0 / v),
        }
    }

    /// `recip().value()`, the form every coefficient formula consumes.
    pub fn inv(self) -> f64 {
        self.recip().value()
    }

    /// `self + rho`; `+∞` absorbs any finite shift.
    pub fn shift(self, rho: f64) -> ExtReal {
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(v + rho),
            ExtReal::Infinity => ExtReal::Infinity,
        }
    }

    /// Compares against a plain real.
    pub fn cmp_real(self, other: f64) -> Option<Ordering> {
        self.value().partial_cmp(&other)
    }

    pub fn gt(self, other: f64) -> bool {
        self.cmp_real(other) == Some(Ordering::Greater)
    }

    fn is_nan(self) -> bool {
        matches!(self, ExtReal::Finite(v) if v.is_nan())
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtReal::Infinity
        } else {
            ExtReal::Finite(v)
        }
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value().partial_cmp(&other.value())
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => serializer.serialize_f64(*v),
            ExtReal::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ExtRealVisitor;

        impl Visitor<'_> for ExtRealVisitor {
            type Value = ExtReal;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtReal, E> {
                Ok(ExtReal::from(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtReal, E> {
                Ok(ExtReal::Finite(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtReal, E> {
                Ok(ExtReal::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtReal, E> {
                match v.trim().to_ascii_lowercase().as_str() {
                    "inf" | "+inf" | "infinity" | "+infinity" => Ok(ExtReal::Infinity),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        deserializer.deserialize_any(ExtRealVisitor)
    }
}

impl std::str::FromStr for ExtReal {
    type Err = CurvatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(ExtReal::Infinity),
            t => t
                .parse::<f64>()
                .map(ExtReal::from)
                .map_err(|_| CurvatureError::Parse(s.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvatureError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("curvature shift must be a finite real, got {0}")]
    InvalidShift(f64),
    #[error("cannot parse extended real from {0:?}")]
    Parse(String),
}

/// Sign category of a lower curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Hypoconvex,
    Convex,
    StronglyConvex,
}

/// Membership data for the class of functions with lower curvature `mu`
/// and upper curvature `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureClass {
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: ExtReal,
}

impl CurvatureClass {
    pub fn new(mu: f64, l: impl Into<ExtReal>) -> Self {
        Self { mu, l: l.into() }
    }

    pub fn convexity(&self) -> Convexity {
        match self.mu.partial_cmp(&0.0) {
            Some(Ordering::Less) => Convexity::Hypoconvex,
            Some(Ordering::Equal) => Convexity::Convex,
            _ => Convexity::StronglyConvex,
        }
    }

    pub fn is_smooth(&self) -> bool {
        self.l.is_finite()
    }

    /// `0 < L` and `μ < L`, with finite non-NaN `μ`.
    pub fn is_valid(&self) -> bool {
        self.mu.is_finite() && !self.l.is_nan() && self.l.gt(0.0) && self.l.gt(self.mu)
    }

    /// True when `other ⊆ self`, i.e. `self` is a relaxation of `other`.
    pub fn contains(&self, other: &CurvatureClass) -> bool {
        self.mu <= other.mu && self.l >= other.l
    }
}

/// Which DC term a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    F1,
    F2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// NaN or an infinite lower curvature.
    NotARealNumber { term: Term, field: String },
    NonPositiveUpperCurvature { term: Term },
    LowerNotBelowUpper { term: Term },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotARealNumber { term, field } => {
                write!(f, "{term:?}: {field} is not a valid number")
            }
            Violation::NonPositiveUpperCurvature { term } => write!(f, "{term:?}: L must be > 0"),
            Violation::LowerNotBelowUpper { term } => write!(f, "{term:?}: mu < L violated"),
        }
    }
}

/// Outcome of [`DcParams::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// `μ1 + μ2 > 0` or `μ1 = μ2 = 0`.
    pub decrease_precondition: bool,
    /// `μ1 + μ2 ≥ 0`: the weaker condition under which every step decreases `F`.
    pub sufficient_decrease: bool,
    /// `L2 > μ1`.
    pub objective_nonconvex: bool,
    /// `L1 > μ2`.
    pub objective_nonconcave: bool,
    pub f1_smooth: bool,
    pub f2_smooth: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Curvature bounds of `F = f1 − f2`, possibly infinite on either side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBounds {
    /// `μ1 − L2`, `-inf` when `f2` is nonsmooth.
    pub lower: f64,
    /// `L1 − μ2`, `+inf` when `f1` is nonsmooth.
    pub upper: f64,
}

/// Curvature parameters `(μ1, L1, μ2, L2)` of the two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcParams {
    pub mu1: f64,
    #[serde(rename = "L1")]
    pub l1: ExtReal,
    pub mu2: f64,
    #[serde(rename = "L2")]
    pub l2: ExtReal,
}

impl DcParams {
    pub fn new(mu1: f64, l1: impl Into<ExtReal>, mu2: f64, l2: impl Into<ExtReal>) -> Self {
        Self {
            mu1,
            l1: l1.into(),
            mu2,
            l2: l2.into(),
        }
    }

    pub fn f1(&self) -> CurvatureClass {
        CurvatureClass::new(self.mu1, self.l1)
    }

    pub fn f2(&self) -> CurvatureClass {
        CurvatureClass::new(self.mu2, self.l2)
    }

    /// Exchanges the roles of the two terms.
    pub fn swapped(&self) -> DcParams {
        DcParams::new(self.mu2, self.l2, self.mu1, self.l1)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (term, class) in [(Term::F1, self.f1()), (Term::F2, self.f2())] {
            let mut numeric = true;
            if !class.mu.is_finite() {
                violations.push(Violation::NotARealNumber {
                    term,
                    field: "mu".into(),
                });
                numeric = false;
            }
            if class.l.is_nan() {
                violations.push(Violation::NotARealNumber {
                    term,
                    field: "L".into(),
                });
                continue;
            }
            if !class.l.gt(0.0) {
                violations.push(Violation::NonPositiveUpperCurvature { term });
            }
            if numeric && !class.l.gt(class.mu) {
                violations.push(Violation::LowerNotBelowUpper { term });
            }
        }
        let (m1, m2) = (self.mu1, self.mu2);
        ValidationReport {
            violations,
            decrease_precondition: m1 + m2 > 0.0 || (m1 == 0.0 && m2 == 0.0),
            sufficient_decrease: m1 + m2 >= 0.0,
            objective_nonconvex: self.l2.gt(m1),
            objective_nonconcave: self.l1.gt(m2),
            f1_smooth: self.l1.is_finite(),
            f2_smooth: self.l2.is_finite(),
        }
    }

    /// Validates and returns a copy, or the first violation as an error.
    pub fn checked(&self) -> Result<DcParams, CurvatureError> {
        let report = self.validate();
        match report.violations.first() {
            None => Ok(*self),
            Some(v) => Err(CurvatureError::Invalid(v.to_string())),
        }
    }

    pub fn decrease_precondition(&self) -> bool {
        self.mu1 + self.mu2 > 0.0 || (self.mu1 == 0.0 && self.mu2 == 0.0)
    }

    pub fn objective_bounds(&self) -> ObjectiveBounds {
        ObjectiveBounds {
            lower: self.mu1 - self.l2.value(),
            upper: self.l1.value() - self.mu2,
        }
    }

    /// Moves `ρ/2 ‖x‖²` into both terms. `F` itself is unchanged.
    pub fn shift_curvature(&self, rho: f64) -> Result<DcParams, CurvatureError> {
        if !rho.is_finite() {
            return Err(CurvatureError::InvalidShift(rho));
        }
        Ok(DcParams::new(
            self.mu1 + rho,
            self.l1.shift(rho),
            self.mu2 + rho,
            self.l2.shift(rho),
        ))
    }
}

impl fmt::Display for DcParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mu1={} L1={} mu2={} L2={}",
            self.mu1, self.l1, self.mu2, self.l2
        )
    }
}
