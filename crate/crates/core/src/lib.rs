//! Surrogate-assisted evolutionary optimization.
//!
//! Four optimizers share one real-coded genetic algorithm:
//!
//! * a canonical GA in which every fitness is a true evaluation,
//! * DAFHEA, which replaces most evaluations with an ε-SVR surrogate and
//!   controls it through clustering, an exploration merit and targeted
//!   true evaluations,
//! * DAFHEA-II, which uses a set of SVR models fitted by successive
//!   peeling and retrains them periodically from true evaluations of the
//!   whole population (suited to noisy objectives),
//! * a preference-learning GA whose surrogate only ranks candidates, trained
//!   by kernel ordinal regression on pairwise preferences.

// validation uses `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod control;
pub mod error;
pub mod evolution;
pub mod kernel;
pub mod optimizers;
pub mod ordinal;
pub mod svr;

pub use benchmark::{CountingObjective, FunctionId, NoiseSpec, Objective, Problem, ProblemSpec};
pub use error::{Error, Result};
