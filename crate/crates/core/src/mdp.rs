//! Two-view MDP abstractions: trajectories, cross-view mappings, and
//! occupancy-measure estimation.
//!
//! State tokens are opaque, hashable identifiers produced by each
//! environment; nothing here inspects their structure. The two views of an
//! instance may have completely different state and action spaces — the only
//! bridge between them is a pair of trajectory mappings that preserve total
//! undiscounted reward exactly.

use std::collections::HashMap;
use std::fmt;

use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViewId {
    A,
    B,
}

impl ViewId {
    pub fn other(self) -> ViewId {
        match self {
            ViewId::A => ViewId::B,
            ViewId::B => ViewId::A,
        }
    }
}

impl fmt::Display for ViewId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViewId::A => write!(f, "A"),
            ViewId::B => write!(f, "B"),
        }
    }
}

/// Opaque state identifier. Environments choose the encoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateToken(pub String);

impl fmt::Display for StateToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque action identifier within one view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionToken(pub u64);

impl fmt::Display for ActionToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-view MDP parameters. The terminal predicate and dynamics live in the
/// environment implementation.
#[derive(Debug, Clone, Copy)]
pub struct MDPSpec {
    pub view: ViewId,
    pub gamma: f64,
    pub horizon_cap: usize,
}

impl MDPSpec {
    pub fn new(view: ViewId, gamma: f64, horizon_cap: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "gamma must be in (0, 1], got {gamma}"
            )));
        }
        if horizon_cap == 0 {
            return Err(CoreError::InvalidParameter(
                "horizon_cap must be at least 1".into(),
            ));
        }
        Ok(MDPSpec {
            view,
            gamma,
            horizon_cap,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: StateToken,
    pub action: ActionToken,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub view: ViewId,
    pub steps: Vec<Step>,
    pub final_state: StateToken,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Undiscounted total reward.
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// All states of the trajectory, including the final one.
    pub fn states(&self) -> impl Iterator<Item = &StateToken> {
        self.steps
            .iter()
            .map(|s| &s.state)
            .chain(std::iter::once(&self.final_state))
    }

    pub fn validate(&self, spec: &MDPSpec) -> Result<()> {
        if self.view != spec.view {
            return Err(CoreError::ViewMismatch {
                expected: spec.view,
                got: self.view,
            });
        }
        if self.steps.len() > spec.horizon_cap {
            return Err(CoreError::InvalidParameter(format!(
                "trajectory length {} exceeds horizon cap {}",
                self.steps.len(),
                spec.horizon_cap
            )));
        }
        if self.steps.iter().any(|s| !s.reward.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "trajectory contains a non-finite reward".into(),
            ));
        }
        Ok(())
    }

    /// Debug dump: one line per step, tab-separated
    /// `state_token  action_token  reward`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&format!("{}\t{}\t{}\n", s.state, s.action, s.reward));
        }
        out
    }
}

/// Returns sum_i gamma^i r_i.
pub fn total_discounted_reward(traj: &Trajectory, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "gamma must be in (0, 1], got {gamma}"
        )));
    }
    let mut total = 0.0;
    let mut w = 1.0;
    for s in &traj.steps {
        total += w * s.reward;
        w *= gamma;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    AToB,
    BToA,
}

impl MapDirection {
    pub fn source(self) -> ViewId {
        match self {
            MapDirection::AToB => ViewId::A,
            MapDirection::BToA => ViewId::B,
        }
    }

    pub fn target(self) -> ViewId {
        self.source().other()
    }
}

impl fmt::Display for MapDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapDirection::AToB => write!(f, "A->B"),
            MapDirection::BToA => write!(f, "B->A"),
        }
    }
}

type MapFn = dyn Fn(&Trajectory) -> Result<Trajectory> + Send + Sync;

/// Total function from complete trajectories of the source view to complete
/// trajectories of the target view. Total undiscounted reward is preserved
/// exactly; `apply` enforces this on every call.
pub struct ViewMapping {
    pub direction: MapDirection,
    f: Box<MapFn>,
}

impl ViewMapping {
    pub fn new<F>(direction: MapDirection, f: F) -> Self
    where
        F: Fn(&Trajectory) -> Result<Trajectory> + Send + Sync + 'static,
    {
        ViewMapping {
            direction,
            f: Box::new(f),
        }
    }

    pub fn apply(&self, traj: &Trajectory) -> Result<Trajectory> {
        if traj.view != self.direction.source() {
            return Err(CoreError::ViewMismatch {
                expected: self.direction.source(),
                got: traj.view,
            });
        }
        let mapped = (self.f)(traj)?;
        let src = traj.total_reward();
        let dst = mapped.total_reward();
        if src != dst {
            return Err(CoreError::AssumptionViolated(format!(
                "mapping {} changed total reward: {src} -> {dst}",
                self.direction
            )));
        }
        Ok(mapped)
    }
}

impl fmt::Debug for ViewMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ViewMapping")
            .field("direction", &self.direction)
            .finish()
    }
}

/// Maps a complete trajectory into the other view.
pub fn map_trajectory(traj: &Trajectory, mapping: &ViewMapping) -> Result<Trajectory> {
    mapping.apply(traj)
}

/// Replays a trajectory step by step through a fresh episode, collecting the
/// decision context at every step. Only valid for deterministic dynamics.
pub fn replay_decisions_via_env(
    env: &mut dyn Environment,
    traj: &Trajectory,
) -> Result<Vec<Decision>> {
    let mut rng = rand::SeedableRng::seed_from_u64(0);
    let mut out = Vec::with_capacity(traj.len());
    for step in &traj.steps {
        let decision = env.decision();
        if decision.index_of(step.action).is_none() {
            return Err(CoreError::InvalidAction(format!(
                "action {} not available during replay",
                step.action
            )));
        }
        out.push(decision);
        env.step(step.action, &mut rng)?;
    }
    Ok(out)
}

/// Decision context the environment presents at a state.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    /// One shared feature vector; a fixed set of k actions. Used by views
    /// whose action set is position-independent (the gridworld).
    Categorical {
        features: Vec<f64>,
        actions: Vec<ActionToken>,
    },
    /// One feature vector per legal action; the policy scores each candidate
    /// with a shared scalar head. Used by views with instance-dependent
    /// action sets (vertex selection, node selection).
    Scored {
        candidates: Vec<(ActionToken, Vec<f64>)>,
    },
}

impl Decision {
    pub fn num_actions(&self) -> usize {
        match self {
            Decision::Categorical { actions, .. } => actions.len(),
            Decision::Scored { candidates } => candidates.len(),
        }
    }

    pub fn action_at(&self, idx: usize) -> ActionToken {
        match self {
            Decision::Categorical { actions, .. } => actions[idx],
            Decision::Scored { candidates } => candidates[idx].0,
        }
    }

    pub fn index_of(&self, action: ActionToken) -> Option<usize> {
        match self {
            Decision::Categorical { actions, .. } => actions.iter().position(|a| *a == action),
            Decision::Scored { candidates } => candidates.iter().position(|(a, _)| *a == action),
        }
    }
}

/// One supervised example extracted from a demonstration.
#[derive(Debug, Clone, PartialEq)]
pub enum DemoStep {
    Categorical {
        features: Vec<f64>,
        action: usize,
        /// Full target distribution for the KL surrogate; `None` means the
        /// one-hot target at `action` (plain behavior cloning).
        target: Option<Vec<f64>>,
    },
    Scored {
        candidates: Vec<Vec<f64>>,
        chosen: usize,
    },
}

/// One recorded step of a rollout, with the decision context preserved so
/// learners can recompute log-probabilities without re-simulating.
#[derive(Debug, Clone)]
pub struct RolloutStep {
    pub state: StateToken,
    pub state_features: Vec<f64>,
    pub decision: Decision,
    /// Index into the decision's action list.
    pub chosen: usize,
    pub reward: f64,
}

/// A trajectory plus its per-step decision contexts.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub trajectory: Trajectory,
    pub steps: Vec<RolloutStep>,
}

/// A single-owner, mutable episode of one view.
pub trait Environment {
    fn spec(&self) -> &MDPSpec;
    fn state_token(&self) -> StateToken;
    fn is_terminal(&self) -> bool;
    /// State-level features (baseline fitting; categorical policies).
    fn state_features(&self) -> Vec<f64>;
    /// Legal actions at the current state with their features.
    fn decision(&self) -> Decision;
    /// Applies an action; returns the reward. `rng` feeds stochastic
    /// dynamics and is ignored by deterministic environments.
    fn step(&mut self, action: ActionToken, rng: &mut ChaCha8Rng) -> Result<f64>;
}

/// Immutable handle to one view of an instance: builds fresh episodes and
/// interprets this view's trajectories.
pub trait ViewHandle: Send + Sync {
    fn spec(&self) -> MDPSpec;
    fn build(&self) -> Box<dyn Environment>;
    /// Direct featurization of a state token, for views whose tokens are
    /// self-describing (feature-mask views). `None` when states can only be
    /// interpreted by replay.
    fn featurize(&self, state: &StateToken) -> Option<Vec<f64>>;
    /// Reconstructs the decision context at every step of a trajectory in
    /// this view, aligned with `traj.steps`.
    fn replay_decisions(&self, traj: &Trajectory) -> Result<Vec<Decision>>;

    /// Converts a demonstration trajectory in this view into supervised
    /// steps for this view's policy.
    fn demo_steps(&self, demo: &Trajectory) -> Result<Vec<DemoStep>> {
        let decisions = self.replay_decisions(demo)?;
        decisions
            .into_iter()
            .zip(&demo.steps)
            .map(|(decision, step)| {
                let idx = decision.index_of(step.action).ok_or_else(|| {
                    CoreError::InvalidAction(format!(
                        "demonstrated action {} is not available",
                        step.action
                    ))
                })?;
                Ok(match decision {
                    Decision::Categorical { features, .. } => DemoStep::Categorical {
                        features,
                        action: idx,
                        target: None,
                    },
                    Decision::Scored { candidates } => DemoStep::Scored {
                        candidates: candidates.into_iter().map(|(_, f)| f).collect(),
                        chosen: idx,
                    },
                })
            })
            .collect()
    }
}

/// One problem instance with both views and both trajectory mappings.
pub struct TwoViewInstance {
    pub id: String,
    pub view_a: Box<dyn ViewHandle>,
    pub view_b: Box<dyn ViewHandle>,
    pub map_a_to_b: ViewMapping,
    pub map_b_to_a: ViewMapping,
}

impl TwoViewInstance {
    pub fn view(&self, id: ViewId) -> &dyn ViewHandle {
        match id {
            ViewId::A => self.view_a.as_ref(),
            ViewId::B => self.view_b.as_ref(),
        }
    }

    pub fn mapping_from(&self, source: ViewId) -> &ViewMapping {
        match source {
            ViewId::A => &self.map_a_to_b,
            ViewId::B => &self.map_b_to_a,
        }
    }
}

impl fmt::Debug for TwoViewInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TwoViewInstance").field("id", &self.id).finish()
    }
}

/// Sparse empirical occupancy: average discounted visit count per
/// state-action pair. Unvisited pairs read as zero.
#[derive(Debug, Clone)]
pub struct OccupancyEstimate {
    entries: HashMap<(StateToken, ActionToken), f64>,
    pub gamma: f64,
    pub trajectories: usize,
}

impl OccupancyEstimate {
    pub fn entry(&self, state: &StateToken, action: ActionToken) -> f64 {
        self.entries
            .get(&(state.clone(), action))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn state_mass(&self, state: &StateToken) -> f64 {
        self.entries
            .iter()
            .filter(|((s, _), _)| s == state)
            .map(|(_, v)| v)
            .sum()
    }

    /// Normalized action distribution at a state, sorted by action token.
    /// Empty when the state was never visited.
    pub fn action_distribution_at(&self, state: &StateToken) -> Vec<(ActionToken, f64)> {
        let mut rows: Vec<(ActionToken, f64)> = self
            .entries
            .iter()
            .filter(|((s, _), _)| s == state)
            .map(|((_, a), v)| (*a, *v))
            .collect();
        rows.sort_by_key(|(a, _)| *a);
        let mass: f64 = rows.iter().map(|(_, v)| v).sum();
        if mass > 0.0 {
            for (_, v) in rows.iter_mut() {
                *v /= mass;
            }
        }
        rows
    }

    /// Entries in deterministic (state, action) order.
    pub fn sorted_entries(&self) -> Vec<(&StateToken, ActionToken, f64)> {
        let mut rows: Vec<_> = self
            .entries
            .iter()
            .map(|((s, a), v)| (s, *a, *v))
            .collect();
        rows.sort_by(|x, y| x.0.cmp(y.0).then(x.1.cmp(&y.1)));
        rows
    }
}

/// entry(s, a) = (1/m) sum_trajs sum_t gamma^t 1((s_t, a_t) = (s, a)).
pub fn estimate_occupancy(trajs: &[Trajectory], gamma: f64) -> Result<OccupancyEstimate> {
    if trajs.is_empty() {
        return Err(CoreError::EmptyInput("occupancy needs at least one trajectory"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "gamma must be in (0, 1], got {gamma}"
        )));
    }
    let view = trajs[0].view;
    let mut entries: HashMap<(StateToken, ActionToken), f64> = HashMap::new();
    for t in trajs {
        if t.view != view {
            return Err(CoreError::ViewMismatch {
                expected: view,
                got: t.view,
            });
        }
        let mut w = 1.0;
        for s in &t.steps {
            *entries.entry((s.state.clone(), s.action)).or_insert(0.0) += w;
            w *= gamma;
        }
    }
    let m = trajs.len() as f64;
    for v in entries.values_mut() {
        *v /= m;
    }
    Ok(OccupancyEstimate {
        entries,
        gamma,
        trajectories: trajs.len(),
    })
}

/// Occupancy of the mapped trajectories: places the source policy's
/// occupancy in the target view before any divergence computation.
pub fn mapped_occupancy(
    trajs: &[Trajectory],
    mapping: &ViewMapping,
    gamma: f64,
) -> Result<OccupancyEstimate> {
    if trajs.is_empty() {
        return Err(CoreError::EmptyInput("mapped occupancy needs at least one trajectory"));
    }
    let mapped: Vec<Trajectory> = trajs
        .iter()
        .map(|t| mapping.apply(t))
        .collect::<Result<_>>()?;
    estimate_occupancy(&mapped, gamma)
}
