//! Shared-action two-view gridworld.
//!
//! Both views share the cell dynamics and the four-action space; they differ
//! only in which slice of the full per-cell feature vector they can see.
//! Trajectory mapping between views is therefore the identity on tokens,
//! actions and rewards, with states re-rendered under the other mask. A
//! value-iteration oracle supplies the exact optimal policy, values and
//! Q-gaps used by the disagreement-bound machinery.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::mdp::{
    ActionToken, Decision, Environment, MDPSpec, MapDirection, StateToken, Trajectory,
    TwoViewInstance, ViewHandle, ViewId, ViewMapping,
};
use crate::policy::greedy_index;

pub const NUM_ACTIONS: usize = 4;
/// Up, down, left, right as (dx, dy) on (col, row) coordinates.
const MOVES: [(i64, i64); NUM_ACTIONS] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

const VI_SWEEP_CAP: usize = 200_000;

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub step_reward: f64,
    pub goal_reward: f64,
    pub gamma: f64,
    /// Kept feature indices per view (subsets of the full feature vector).
    pub mask_a: Vec<usize>,
    pub mask_b: Vec<usize>,
    /// Probability that a random direction replaces the chosen one.
    pub noise: f64,
    pub horizon_cap: usize,
}

impl GridConfig {
    /// Full per-cell feature vector: one-hot row, one-hot column, Manhattan
    /// distance to the goal (normalized by width + height so it shares the
    /// one-hot scale), four wall-adjacency bits.
    pub fn full_feature_dim(&self) -> usize {
        self.height + self.width + 1 + NUM_ACTIONS
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(CoreError::InvalidParameter("grid must be non-empty".into()));
        }
        for (name, (x, y)) in [("start", self.start), ("goal", self.goal)] {
            if x >= self.width || y >= self.height {
                return Err(CoreError::InvalidParameter(format!(
                    "{name} cell ({x}, {y}) outside the grid"
                )));
            }
        }
        if self.start == self.goal {
            return Err(CoreError::InvalidParameter("start equals goal".into()));
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return Err(CoreError::InvalidParameter(format!(
                "noise must be in [0, 0.5], got {}",
                self.noise
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        let dim = self.full_feature_dim();
        for (name, mask) in [("mask_a", &self.mask_a), ("mask_b", &self.mask_b)] {
            if mask.is_empty() {
                return Err(CoreError::InvalidParameter(format!("{name} is empty")));
            }
            if mask.iter().any(|i| *i >= dim) {
                return Err(CoreError::InvalidParameter(format!(
                    "{name} indexes outside the {dim}-dimensional feature vector"
                )));
            }
        }
        if self.horizon_cap == 0 {
            return Err(CoreError::InvalidParameter(
                "horizon_cap must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    fn index(&self, cell: (usize, usize)) -> usize {
        cell.1 * self.width + cell.0
    }

    fn cell(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    fn next_cell(&self, cell: (usize, usize), dir: usize) -> (usize, usize) {
        let (dx, dy) = MOVES[dir];
        let nx = cell.0 as i64 + dx;
        let ny = cell.1 as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            cell
        } else {
            (nx as usize, ny as usize)
        }
    }

    fn reward(&self, next: (usize, usize)) -> f64 {
        if next == self.goal {
            self.step_reward + self.goal_reward
        } else {
            self.step_reward
        }
    }

    pub fn full_features(&self, cell: (usize, usize)) -> Vec<f64> {
        let mut f = vec![0.0; self.full_feature_dim()];
        f[cell.1] = 1.0;
        f[self.height + cell.0] = 1.0;
        let dist = cell.0.abs_diff(self.goal.0) + cell.1.abs_diff(self.goal.1);
        f[self.height + self.width] = dist as f64 / (self.width + self.height) as f64;
        for (d, _) in MOVES.iter().enumerate() {
            if self.next_cell(cell, d) == cell {
                f[self.height + self.width + 1 + d] = 1.0;
            }
        }
        f
    }

    pub fn masked_features(&self, cell: (usize, usize), mask: &[usize]) -> Vec<f64> {
        let full = self.full_features(cell);
        mask.iter().map(|i| full[*i]).collect()
    }

    pub fn token(cell: (usize, usize)) -> StateToken {
        StateToken(format!("c:{},{}", cell.0, cell.1))
    }

    /// Recomputes the alternating even/odd view masks and the default
    /// horizon cap for the current shape. Struct-update syntax keeps the
    /// previous shape's masks, so call this after changing width or height.
    pub fn with_derived_masks(mut self) -> Self {
        let dim = self.full_feature_dim();
        self.mask_a = (0..dim).filter(|i| i % 2 == 0).collect();
        self.mask_b = (0..dim).filter(|i| i % 2 == 1).collect();
        self.horizon_cap = 4 * (self.width + self.height);
        self
    }

    pub fn parse_token(token: &StateToken) -> Result<(usize, usize)> {
        let body = token
            .0
            .strip_prefix("c:")
            .ok_or_else(|| CoreError::InvalidParameter(format!("not a cell token: {token}")))?;
        let (x, y) = body.split_once(',').ok_or_else(|| {
            CoreError::InvalidParameter(format!("malformed cell token: {token}"))
        })?;
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| CoreError::InvalidParameter(format!("cell token {token}: {e}")))
        };
        Ok((parse(x)?, parse(y)?))
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        let mut cfg = GridConfig {
            width: 5,
            height: 5,
            start: (0, 0),
            goal: (4, 4),
            step_reward: -1.0,
            goal_reward: 0.0,
            gamma: 0.99,
            mask_a: Vec::new(),
            mask_b: Vec::new(),
            noise: 0.0,
            horizon_cap: 0,
        };
        let dim = cfg.full_feature_dim();
        cfg.mask_a = (0..dim).filter(|i| i % 2 == 0).collect();
        cfg.mask_b = (0..dim).filter(|i| i % 2 == 1).collect();
        cfg.horizon_cap = 4 * (cfg.width + cfg.height);
        cfg
    }
}

// --- environment -------------------------------------------------------------

pub struct GridEnv {
    spec: MDPSpec,
    config: Arc<GridConfig>,
    mask: Vec<usize>,
    pos: (usize, usize),
}

impl GridEnv {
    fn new(config: Arc<GridConfig>, view: ViewId) -> Self {
        let mask = match view {
            ViewId::A => config.mask_a.clone(),
            ViewId::B => config.mask_b.clone(),
        };
        GridEnv {
            spec: MDPSpec::new(view, config.gamma, config.horizon_cap).expect("validated config"),
            pos: config.start,
            config,
            mask,
        }
    }
}

impl Environment for GridEnv {
    fn spec(&self) -> &MDPSpec {
        &self.spec
    }

    fn state_token(&self) -> StateToken {
        GridConfig::token(self.pos)
    }

    fn is_terminal(&self) -> bool {
        self.pos == self.config.goal
    }

    fn state_features(&self) -> Vec<f64> {
        self.config.masked_features(self.pos, &self.mask)
    }

    fn decision(&self) -> Decision {
        Decision::Categorical {
            features: self.state_features(),
            actions: (0..NUM_ACTIONS as u64).map(ActionToken).collect(),
        }
    }

    fn step(&mut self, action: ActionToken, rng: &mut ChaCha8Rng) -> Result<f64> {
        let intended = action.0 as usize;
        if intended >= NUM_ACTIONS {
            return Err(CoreError::InvalidAction(format!(
                "direction {intended} out of range"
            )));
        }
        if self.is_terminal() {
            return Err(CoreError::InvalidAction(
                "episode already at the goal".into(),
            ));
        }
        let dir = if self.config.noise > 0.0 && rng.gen::<f64>() < self.config.noise {
            rng.gen_range(0..NUM_ACTIONS)
        } else {
            intended
        };
        self.pos = self.config.next_cell(self.pos, dir);
        Ok(self.config.reward(self.pos))
    }
}

// --- view handle ---------------------------------------------------------------

struct GridView {
    config: Arc<GridConfig>,
    view: ViewId,
    spec: MDPSpec,
}

impl ViewHandle for GridView {
    fn spec(&self) -> MDPSpec {
        self.spec
    }

    fn build(&self) -> Box<dyn Environment> {
        Box::new(GridEnv::new(Arc::clone(&self.config), self.view))
    }

    fn featurize(&self, state: &StateToken) -> Option<Vec<f64>> {
        let cell = GridConfig::parse_token(state).ok()?;
        let mask = match self.view {
            ViewId::A => &self.config.mask_a,
            ViewId::B => &self.config.mask_b,
        };
        Some(self.config.masked_features(cell, mask))
    }

    fn replay_decisions(&self, traj: &Trajectory) -> Result<Vec<Decision>> {
        traj.steps
            .iter()
            .map(|step| {
                let features = self.featurize(&step.state).ok_or_else(|| {
                    CoreError::InvalidParameter(format!("unknown state token {}", step.state))
                })?;
                Ok(Decision::Categorical {
                    features,
                    actions: (0..NUM_ACTIONS as u64).map(ActionToken).collect(),
                })
            })
            .collect()
    }
}

/// Builds the two-view instance: identical dynamics, per-view feature masks,
/// identity trajectory mapping up to re-rendering.
pub fn make_two_view_grid(id: impl Into<String>, config: GridConfig) -> Result<TwoViewInstance> {
    config.validate()?;
    let config = Arc::new(config);
    let remap = |view: ViewId| {
        move |traj: &Trajectory| -> Result<Trajectory> {
            let mut out = traj.clone();
            out.view = view;
            Ok(out)
        }
    };
    let spec_a = MDPSpec::new(ViewId::A, config.gamma, config.horizon_cap)?;
    let spec_b = MDPSpec::new(ViewId::B, config.gamma, config.horizon_cap)?;
    Ok(TwoViewInstance {
        id: id.into(),
        view_a: Box::new(GridView {
            config: Arc::clone(&config),
            view: ViewId::A,
            spec: spec_a,
        }),
        view_b: Box::new(GridView {
            config: Arc::clone(&config),
            view: ViewId::B,
            spec: spec_b,
        }),
        map_a_to_b: ViewMapping::new(MapDirection::AToB, remap(ViewId::B)),
        map_b_to_a: ViewMapping::new(MapDirection::BToA, remap(ViewId::A)),
    })
}

// --- value iteration -----------------------------------------------------------

/// Exact optimal values, Q-values and greedy actions per cell.
#[derive(Debug, Clone)]
pub struct ValueTable {
    pub width: usize,
    pub height: usize,
    pub goal: (usize, usize),
    pub values: Vec<f64>,
    pub q_values: Vec<[f64; NUM_ACTIONS]>,
    /// Greedy action per cell, lowest index on ties. Meaningless at the goal.
    pub best_action: Vec<usize>,
}

impl ValueTable {
    pub fn value(&self, cell: (usize, usize)) -> f64 {
        self.values[cell.1 * self.width + cell.0]
    }

    pub fn action(&self, cell: (usize, usize)) -> usize {
        self.best_action[cell.1 * self.width + cell.0]
    }

    /// Optimal action for a state token.
    pub fn action_for(&self, token: &StateToken) -> Result<usize> {
        let cell = GridConfig::parse_token(token)?;
        if cell.0 >= self.width || cell.1 >= self.height {
            return Err(CoreError::InvalidParameter(format!(
                "cell token {token} outside the value table"
            )));
        }
        Ok(self.action(cell))
    }

    pub fn is_goal_token(&self, token: &StateToken) -> bool {
        GridConfig::parse_token(token)
            .map(|c| c == self.goal)
            .unwrap_or(false)
    }
}

fn q_from_values(config: &GridConfig, values: &[f64], cell: (usize, usize)) -> [f64; NUM_ACTIONS] {
    let mut q = [0.0; NUM_ACTIONS];
    for (a, qa) in q.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (d, _) in MOVES.iter().enumerate() {
            // executed = intended with prob 1 - noise, otherwise uniform.
            let p = if d == a {
                1.0 - config.noise + config.noise / NUM_ACTIONS as f64
            } else {
                config.noise / NUM_ACTIONS as f64
            };
            if p == 0.0 {
                continue;
            }
            let next = config.next_cell(cell, d);
            let v_next = if next == config.goal {
                0.0
            } else {
                values[config.index(next)]
            };
            acc += p * (config.reward(next) + config.gamma * v_next);
        }
        *qa = acc;
    }
    q
}

/// Sweeps the Bellman optimality operator until the max residual drops below
/// `tolerance`. Works for gamma = 1 because the goal is absorbing and every
/// non-goal step pays the step reward.
pub fn value_iteration(config: &GridConfig, tolerance: f64) -> Result<ValueTable> {
    config.validate()?;
    let cells = config.cell_count();
    let mut values = vec![0.0; cells];
    let mut converged = false;
    for _ in 0..VI_SWEEP_CAP {
        let mut residual: f64 = 0.0;
        for idx in 0..cells {
            let cell = config.cell(idx);
            if cell == config.goal {
                continue;
            }
            let q = q_from_values(config, &values, cell);
            let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            residual = residual.max((best - values[idx]).abs());
            values[idx] = best;
        }
        if residual < tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CoreError::NotConverged(format!(
            "value iteration residual above {tolerance} after {VI_SWEEP_CAP} sweeps"
        )));
    }
    let mut q_values = Vec::with_capacity(cells);
    let mut best_action = Vec::with_capacity(cells);
    for idx in 0..cells {
        let cell = config.cell(idx);
        let q = q_from_values(config, &values, cell);
        best_action.push(greedy_index(&q));
        q_values.push(q);
    }
    Ok(ValueTable {
        width: config.width,
        height: config.height,
        goal: config.goal,
        values,
        q_values,
        best_action,
    })
}

/// Largest one-step deviation loss: max over non-goal cells and actions of
/// V*(s) - Q*(s, a).
pub fn optimal_gap_u(table: &ValueTable) -> f64 {
    let mut u: f64 = 0.0;
    for idx in 0..table.values.len() {
        let cell = (idx % table.width, idx / table.width);
        if cell == table.goal {
            continue;
        }
        for a in 0..NUM_ACTIONS {
            u = u.max(table.values[idx] - table.q_values[idx][a]);
        }
    }
    u
}

/// Max Bellman residual of the table under its config; diagnostics for tests.
pub fn bellman_residual(config: &GridConfig, table: &ValueTable) -> f64 {
    let mut worst: f64 = 0.0;
    for idx in 0..config.cell_count() {
        let cell = config.cell(idx);
        if cell == config.goal {
            continue;
        }
        let q = q_from_values(config, &table.values, cell);
        let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((best - table.values[idx]).abs());
    }
    worst
}
