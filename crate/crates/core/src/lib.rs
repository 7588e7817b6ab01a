//! Track-and-Stop and Sticky Track-and-Stop for pure-exploration bandits.
//!
//! Modules, bottom up:
//!
//! - [`exp_family`]: KL divergences and scalar primitives for Gaussian and Bernoulli arms.
//! - [`problems`]: best-arm and ε-best-arm answer structures and best responses.
//! - [`oracle`]: the characteristic-time game and its oracle weights.
//! - [`tracking`]: C-Tracking with forced exploration.
//! - [`stopping`]: the GLR statistic and its threshold.
//! - [`algorithms`]: TaS and S-TaS agents and full runs.
//! - [`bounds`]: the non-asymptotic upper-bound quantities.
//! - [`harness`]: configuration, Monte Carlo and persistence.

pub mod algorithms;
pub mod bounds;
pub mod error;
pub mod exp_family;
pub mod harness;
pub mod oracle;
pub mod problems;
pub mod stopping;
pub mod tracking;

pub use error::{Error, Result};
pub use exp_family::{FamilyConstants, FamilyKind, FamilySpec, MeanBox};
pub use problems::{BanditModel, BestResponse, ProblemInstance, ProblemKind};
