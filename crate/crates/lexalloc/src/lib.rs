//! One-to-many task allocation with lexicographic agent preferences.
//!
//! Agents rank tasks, tasks rank agents, and each agent carries a
//! downward-closed family of feasible task sets (listed maximal sets or a
//! knapsack test). The crate builds each agent's preference tree over
//! feasible allocations, checks and enumerates matchings, encodes the
//! stable set as a binary program, solves it exactly (optionally with a
//! minimum-instability relaxation), and audits the substitutability of
//! agent choice.

pub mod bruteforce;
pub mod instance;
pub mod ipmodel;
pub mod lextree;
pub mod matching;

pub use instance::{GenParams, Instance, InstanceError, Severity, ValidationReport};
pub use ipmodel::{IpModel, Objective};
pub use lextree::{LexTree, TreeError, TreeLimits};
pub use matching::{BlockingPair, Matching, MatchingError, StabilityReport};
