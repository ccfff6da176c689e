//! Identification and efficient numeric evaluation of interventional
//! distributions `P(y | do(x))` in binary causal models with latent
//! confounding, represented as acyclic directed mixed graphs.
//!
//! The crate has three layers:
//!
//! * structure — [`graph`] (ADMGs, CADMGs, latent DAGs, districts,
//!   restrictions, latent projection, m-separation) and [`intrinsic`]
//!   (intrinsic sets, recursive heads/tails, head partitions);
//! * symbolic identification — [`ident`], the complete recursive
//!   identification algorithm producing effect expressions or hedge
//!   witnesses;
//! * numeric evaluation — [`moebius`] (the binary q-parameterization and the
//!   generalized Möbius transform, plain and memoized), [`eid`]
//!   (width-bounded variable elimination over q parameters), and [`oracle`]
//!   (brute-force latent-DAG ground truth used to validate everything else).
//!
//! Numeric code is generic over [`scalar::Scalar`], so every pipeline runs in
//! `f64` (the default), `f32`, or exact rational arithmetic.

pub mod eid;
pub mod error;
pub mod graph;
pub mod ident;
pub mod intrinsic;
pub mod moebius;
pub mod oracle;
pub mod parse;
pub mod scalar;
pub mod set;

pub use error::{Error, Result};
pub use graph::{Admg, Cadmg, LabelTable, LatentDag};
pub use moebius::{Assignment, ProbTable, QParamSet};
pub use scalar::Scalar;
pub use set::VSet;

/// Exact rational scalar for the oracle's exact mode.
pub type Exact = num_rational::BigRational;

/// Double-precision aliases; the default arithmetic everywhere.
pub type ProbTable64 = moebius::ProbTable<f64>;
pub type QParams64 = moebius::QParamSet<f64>;
