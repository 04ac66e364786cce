//! Policy co-training over two-view Markov decision processes.
//!
//! Two policies, one per state-action representation of the same underlying
//! problem, train together: each iteration both roll out on a sampled
//! instance, the better view's trajectories (or DAgger-style state labels in
//! the shared-action case) cross over as demonstrations, and both policies
//! take a combined reinforcement/imitation step. The crate ships two paired
//! environments — minimum vertex cover as a graph MDP and as branch-and-bound
//! over its ILP encoding (with a built-in simplex solver), and a feature-
//! masked two-view gridworld with an exact value-iteration oracle — plus
//! estimators for the improvement diagnostics and PAC disagreement bounds
//! that predict when the exchange helps.

pub mod copier;
pub mod env;
pub mod error;
pub mod learner;
pub mod lp;
pub mod mdp;
pub mod policy;
pub mod seed;
pub mod theory;

pub use error::{CoreError, Result};
pub use mdp::{
    ActionToken, Decision, DemoStep, Environment, MDPSpec, MapDirection, OccupancyEstimate,
    Rollout, StateToken, Step, Trajectory, TwoViewInstance, ViewHandle, ViewId, ViewMapping,
};
pub use policy::{ActionDistribution, DivergenceKind, PolicyArch, PolicyParams};
