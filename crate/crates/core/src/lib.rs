//! Certified convergence rates for the DC algorithm (DCA).
//!
//! The crate classifies a curvature parameter tuple into its convergence
//! regime, runs DCA on concrete instances with exact oracles, and checks the
//! resulting trajectories against the closed-form guarantees.

pub mod certificates;
pub mod curvature;
pub mod engine;
pub mod interpolation;
pub mod oracles;
pub mod probe;
pub mod regimes;
mod vecops;

pub use curvature::{CurvatureClass, DcParams, ExtReal, Term};
pub use oracles::{DcInstance, FunctionSpec, SubgradPolicy};
pub use regimes::{classify, classify_any, RegimeCertificate};

/// Hash of the coefficient-table source, so outputs can be tied to the exact
/// formulas that produced them.
pub fn formula_table_revision() -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(include_str!("regimes.rs").as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
