//! Linear contextual bandit laboratory.
//!
//! The crate is organised around a few layers:
//!
//! - [`problem`]: contextual problems, linear representations and exact gap structure.
//! - [`diversity`]: the diversity conditions (non-redundant, CMB, BBK, HLS, WYS) and mixed-HLS.
//! - [`repgen`]: constructions and transforms that produce equivalent representations,
//!   plus the named experiment presets.
//! - [`learners`]: LinUCB, LEADER, E-LEADER, GLR best-arm identification and the
//!   EXP4.IX / regret-balancing baselines, all behind the [`learners::Policy`] trait.
//! - [`bounds`]: closed-form regret and time-to-constant-regret expressions.
//! - [`harness`]: seeded multi-run experiments, summaries, CSV and SVG export.

pub mod bounds;
pub mod diversity;
pub mod error;
pub mod harness;
pub mod io;
pub mod learners;
pub mod linalg;
pub mod problem;
pub mod repgen;

pub use error::{Error, Result};
pub use problem::{Context, ContextualProblem, FiniteRepresentation, GapProfile, Representation};
