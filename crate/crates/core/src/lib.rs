//! Numerical certification of strong log-concavity (SLC) and evaluation of
//! the Stein, Brascamp–Lieb and correlation inequalities it implies.
//!
//! Continuous models are carried by their potential φ = −log f on a box in
//! ℝ^d (d ≤ 3); discrete models are pmfs on {0, …, K}. Every expectation is
//! computed by adaptive quadrature (or exact finite sums) with an error bound,
//! so gaps and certificates can be compared against tolerances honestly.

pub mod calculus;
pub mod certify;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod inequalities;
pub mod linalg;
pub mod model;
pub mod numeric;
pub mod testfn;

pub use engine::{Estimate, QuadratureSpec, Summary};
pub use error::{Error, Result};
pub use linalg::SymMat;
pub use model::{parse_config, ContinuousModel, DiscretePmf, Model, ModelConfig};
pub use testfn::{Monotone, TestFunction};
