//! Fixed-confidence best arm identification when arms can only be reached
//! through *boxes*: selecting box `m` pulls arm `k` with an unknown
//! probability `q[m][k]`.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the algorithmic
//! core only:
//!
//! * [`instance`] validates problem instances and simulates box selections.
//! * [`allocation`] evaluates the characteristic function `psi(q, mu, w)` and
//!   solves for the characteristic time `T*` and an optimal box allocation.
//! * [`statistics`] keeps the sufficient statistics of a run and computes the
//!   generalized likelihood ratio statistics.
//! * [`threshold`] evaluates the stopping threshold and its series constant.
//! * [`bbmts`] is the track-and-stop algorithm with modified D-tracking.
//! * [`bbsea`] is the successive elimination algorithm for partitioned boxes,
//!   together with its high-probability and lower bound calculators.
//!
//! Indices (boxes, arms) are zero-based throughout.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod allocation;
pub mod bbmts;
pub mod bbsea;
pub mod instance;
mod linalg;
mod math;
mod outcome;
pub mod rng;
pub mod statistics;
pub mod threshold;

pub use allocation::{Allocation, CharacteristicProblem, SolverResult};
pub use instance::{Gaps, ProblemInstance, RewardModel, ValidatedInstance};
pub use outcome::{RunOutcome, TracePoint};
pub use rng::TrialRng;
pub use statistics::TallyState;
pub use threshold::{Threshold, ThresholdMode};
