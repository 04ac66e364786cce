//! Dual-view minimum vertex cover.
//!
//! View A operates on the graph directly: actions select vertices, reward -1
//! per selection, terminal once the selection covers every edge. View B is
//! branch-and-bound over the ILP encoding (maximize -sum x_v subject to
//! x_u + x_v >= 1 per edge): actions pick which open node to expand next,
//! rewards are incumbent improvements. A feasible ILP solution and a vertex
//! cover are the same object, which is what makes the trajectory mappings
//! between the views exact.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::lp::{solve_lp, Constraint, LPProblem, LpStatus, Sense};
use crate::mdp::{
    ActionToken, Decision, Environment, MDPSpec, MapDirection, StateToken, Step,
    Trajectory, TwoViewInstance, ViewHandle, ViewId, ViewMapping,
};
use crate::seed::fnv1a;

const INTEGRAL_TOL: f64 = 1e-6;

// --- graph ------------------------------------------------------------------

/// Undirected simple graph with vertices 0..n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut normalized = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(CoreError::InvalidParameter(format!("self-loop at {u}")));
            }
            if u >= n || v >= n {
                return Err(CoreError::InvalidParameter(format!(
                    "edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        normalized.dedup();
        Ok(Graph {
            n,
            edges: normalized,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|(a, b)| *a == v || *b == v).count()
    }

    pub fn is_cover(&self, selected: &[bool]) -> bool {
        self.edges.iter().all(|&(u, v)| selected[u] || selected[v])
    }

    /// `p <n> <m>` header then one `e <u> <v>` line per edge, 0-indexed.
    pub fn to_file_format(&self) -> String {
        let mut out = format!("p {} {}\n", self.n, self.edges.len());
        for (u, v) in &self.edges {
            let _ = writeln!(out, "e {u} {v}");
        }
        out
    }

    pub fn from_file_format(text: &str) -> Result<Self> {
        let mut n = None;
        let mut m = 0usize;
        let mut edges = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| CoreError::Parse {
                line: idx + 1,
                reason,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["p", nv, ne] => {
                    n = Some(nv.parse::<usize>().map_err(|e| err(e.to_string()))?);
                    m = ne.parse::<usize>().map_err(|e| err(e.to_string()))?;
                }
                ["e", u, v] => {
                    edges.push((
                        u.parse::<usize>().map_err(|e| err(e.to_string()))?,
                        v.parse::<usize>().map_err(|e| err(e.to_string()))?,
                    ));
                }
                _ => return Err(err(format!("unrecognized line {line:?}"))),
            }
        }
        let n = n.ok_or(CoreError::Parse {
            line: 0,
            reason: "missing p header".into(),
        })?;
        if edges.len() != m {
            return Err(CoreError::Parse {
                line: 0,
                reason: format!("header claims {m} edges, found {}", edges.len()),
            });
        }
        Graph::new(n, edges)
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_file_format())?;
        Ok(())
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        Self::from_file_format(&std::fs::read_to_string(path)?)
    }
}

/// Erdos-Renyi graph: each unordered pair appears independently with
/// probability `p`. Reproducible by seed.
pub fn generate_er_graph(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return Err(CoreError::InvalidParameter(
            "graph needs at least one vertex".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(CoreError::InvalidParameter(format!(
            "edge probability must be in [0, 1], got {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges)
}

// --- graph view -------------------------------------------------------------

/// Partial solution: the set of selected vertices.
#[derive(Debug, Clone)]
pub struct GraphState {
    pub graph: Arc<Graph>,
    pub selected: Vec<bool>,
}

impl GraphState {
    pub fn initial(graph: Arc<Graph>) -> Self {
        let n = graph.num_vertices();
        GraphState {
            graph,
            selected: vec![false; n],
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.graph.is_cover(&self.selected)
    }

    pub fn selected_count(&self) -> usize {
        self.selected.iter().filter(|s| **s).count()
    }

    pub fn token(&self) -> StateToken {
        let bits: String = self
            .selected
            .iter()
            .map(|s| if *s { '1' } else { '0' })
            .collect();
        StateToken(format!("g:{bits}"))
    }

    fn uncovered_incident(&self, v: usize) -> usize {
        self.graph
            .edges()
            .iter()
            .filter(|&&(a, b)| (a == v || b == v) && !self.selected[a] && !self.selected[b])
            .count()
    }
}

/// Adds a vertex to the partial solution. Reward -1; terminal when the
/// selection covers every edge. Only re-selection is illegal: stepping from
/// an already-covering state is permitted (needed when translating ILP
/// incumbents that carry branching-fixed redundant vertices).
pub fn graph_step(state: &GraphState, vertex: usize) -> Result<(GraphState, f64, bool)> {
    if vertex >= state.selected.len() {
        return Err(CoreError::InvalidAction(format!(
            "vertex {vertex} out of range"
        )));
    }
    if state.selected[vertex] {
        return Err(CoreError::InvalidAction(format!(
            "vertex {vertex} already selected"
        )));
    }
    let mut next = state.clone();
    next.selected[vertex] = true;
    let terminal = next.is_terminal();
    Ok((next, -1.0, terminal))
}

pub struct GraphEnv {
    spec: MDPSpec,
    state: GraphState,
}

impl GraphEnv {
    pub fn new(graph: Arc<Graph>) -> Self {
        let n = graph.num_vertices();
        GraphEnv {
            spec: MDPSpec::new(ViewId::A, 1.0, n.max(1)).expect("static spec"),
            state: GraphState::initial(graph),
        }
    }

    pub fn state(&self) -> &GraphState {
        &self.state
    }
}

impl Environment for GraphEnv {
    fn spec(&self) -> &MDPSpec {
        &self.spec
    }

    fn state_token(&self) -> StateToken {
        self.state.token()
    }

    fn is_terminal(&self) -> bool {
        self.state.is_terminal()
    }

    fn state_features(&self) -> Vec<f64> {
        let g = &self.state.graph;
        let n = g.num_vertices().max(1) as f64;
        let m = g.num_edges().max(1) as f64;
        let uncovered = g
            .edges()
            .iter()
            .filter(|&&(u, v)| !self.state.selected[u] && !self.state.selected[v])
            .count() as f64;
        vec![1.0, self.state.selected_count() as f64 / n, uncovered / m]
    }

    fn decision(&self) -> Decision {
        let g = &self.state.graph;
        let n = g.num_vertices().max(1) as f64;
        let candidates = (0..g.num_vertices())
            .filter(|v| !self.state.selected[*v])
            .map(|v| {
                let feats = vec![
                    0.0,
                    g.degree(v) as f64 / n,
                    self.state.uncovered_incident(v) as f64 / n,
                ];
                (ActionToken(v as u64), feats)
            })
            .collect();
        Decision::Scored { candidates }
    }

    fn step(&mut self, action: ActionToken, _rng: &mut ChaCha8Rng) -> Result<f64> {
        let (next, reward, _terminal) = graph_step(&self.state, action.0 as usize)?;
        self.state = next;
        Ok(reward)
    }
}

// --- ILP encoding -----------------------------------------------------------

/// The ILP encoding of an MVC instance: LP relaxation plus integrality
/// markers on every variable.
#[derive(Debug, Clone)]
pub struct ILPInstance {
    pub problem: LPProblem,
    pub integer_vars: Vec<usize>,
}

/// maximize -sum x_v; x_u + x_v >= 1 per edge; x_v in [0, 1].
pub fn build_ilp(graph: &Graph) -> ILPInstance {
    let n = graph.num_vertices();
    let constraints = graph
        .edges()
        .iter()
        .map(|&(u, v)| {
            let mut coeffs = vec![0.0; n];
            coeffs[u] = 1.0;
            coeffs[v] = 1.0;
            Constraint {
                coeffs,
                sense: Sense::Ge,
                rhs: 1.0,
            }
        })
        .collect();
    ILPInstance {
        problem: LPProblem {
            objective: vec![-1.0; n],
            constraints,
            lower: vec![0.0; n],
            upper: vec![1.0; n],
        },
        integer_vars: (0..n).collect(),
    }
}

// --- branch and bound -------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Open,
    Expanded,
    Pruned,
    IntegralLeaf,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct BnBNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub branch_var: Option<usize>,
    pub branch_val: Option<u8>,
    /// min(frac, 1 - frac) of the branching variable in the parent's LP
    /// optimum; 0 for the root.
    pub branch_fractionality: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub status: NodeStatus,
    pub lp_feasible: bool,
    pub lp_objective: f64,
    pub lp_x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Incumbent {
    pub assignment: Vec<f64>,
    /// Exact integer objective of the rounded assignment.
    pub objective: f64,
}

/// Branch-and-bound search state. The incumbent objective starts at the
/// empty-solution sentinel 0, so the telescoped expansion rewards add up to
/// exactly the final incumbent objective.
pub struct BnBTree {
    pub ilp: ILPInstance,
    pub nodes: Vec<BnBNode>,
    open: BTreeSet<usize>,
    pub incumbent: Option<Incumbent>,
    pub budget: Option<usize>,
    pub expanded: usize,
}

impl BnBTree {
    pub fn new(ilp: ILPInstance, budget: Option<usize>) -> Result<Self> {
        let mut tree = BnBTree {
            ilp,
            nodes: Vec::new(),
            open: BTreeSet::new(),
            incumbent: None,
            budget,
            expanded: 0,
        };
        let lower = tree.ilp.problem.lower.clone();
        let upper = tree.ilp.problem.upper.clone();
        tree.create_node(None, None, None, 0.0, lower, upper)?;
        Ok(tree)
    }

    fn create_node(
        &mut self,
        parent: Option<usize>,
        branch_var: Option<usize>,
        branch_val: Option<u8>,
        branch_fractionality: f64,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<usize> {
        let id = self.nodes.len();
        let depth = parent.map_or(0, |p| self.nodes[p].depth + 1);
        let mut problem = self.ilp.problem.clone();
        problem.lower = lower.clone();
        problem.upper = upper.clone();
        let sol = solve_lp(&problem)?;
        let (lp_feasible, lp_objective, lp_x) = match sol.status {
            LpStatus::Optimal => (true, sol.objective, sol.x),
            _ => (false, f64::NEG_INFINITY, Vec::new()),
        };
        self.nodes.push(BnBNode {
            id,
            parent,
            depth,
            branch_var,
            branch_val,
            branch_fractionality,
            lower,
            upper,
            status: NodeStatus::Open,
            lp_feasible,
            lp_objective,
            lp_x,
        });
        self.open.insert(id);
        Ok(id)
    }

    pub fn open_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.open.iter().copied()
    }

    /// Sentinel 0 before the first incumbent.
    pub fn incumbent_objective(&self) -> f64 {
        self.incumbent.as_ref().map_or(0.0, |inc| inc.objective)
    }

    /// Best (largest) LP bound among feasible open nodes.
    pub fn best_open_bound(&self) -> f64 {
        self.open
            .iter()
            .filter(|id| self.nodes[**id].lp_feasible)
            .map(|id| self.nodes[*id].lp_objective)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_done(&self) -> bool {
        self.open.is_empty() || self.budget.is_some_and(|b| self.expanded >= b)
    }

    fn is_integral(&self, x: &[f64]) -> bool {
        self.ilp
            .integer_vars
            .iter()
            .all(|&j| (x[j] - x[j].round()).abs() <= INTEGRAL_TOL)
    }

    fn most_fractional_var(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.ilp.integer_vars {
            let frac = x[j] - x[j].floor();
            let dist = frac.min(1.0 - frac);
            if dist > INTEGRAL_TOL {
                match best {
                    Some((_, bd)) if dist <= bd => {}
                    _ => best = Some((j, dist)),
                }
            }
        }
        best
    }

    /// Expands one open node: prune on infeasibility or a dominated bound,
    /// promote an integral LP optimum to the incumbent (reward = objective
    /// delta), otherwise branch on the most-fractional variable. Returns the
    /// reward and whether the search is finished (open set empty or budget
    /// exhausted).
    pub fn expand(&mut self, node_id: usize) -> Result<(f64, bool)> {
        if node_id >= self.nodes.len() {
            return Err(CoreError::InvalidAction(format!(
                "node {node_id} does not exist"
            )));
        }
        if self.nodes[node_id].status != NodeStatus::Open {
            return Err(CoreError::InvalidAction(format!(
                "node {node_id} is not open"
            )));
        }
        if self.budget.is_some_and(|b| self.expanded >= b) {
            return Err(CoreError::InvalidAction("node budget exhausted".into()));
        }
        self.open.remove(&node_id);
        self.expanded += 1;

        if !self.nodes[node_id].lp_feasible {
            self.nodes[node_id].status = NodeStatus::Infeasible;
            return Ok((0.0, self.is_done()));
        }
        let lp_obj = self.nodes[node_id].lp_objective;
        if let Some(inc) = &self.incumbent {
            if lp_obj <= inc.objective + 1e-9 {
                self.nodes[node_id].status = NodeStatus::Pruned;
                return Ok((0.0, self.is_done()));
            }
        }
        let lp_x = self.nodes[node_id].lp_x.clone();
        if self.is_integral(&lp_x) {
            let assignment: Vec<f64> = lp_x.iter().map(|v| v.round()).collect();
            let objective: f64 = self
                .ilp
                .problem
                .objective
                .iter()
                .zip(&assignment)
                .map(|(c, v)| c * v)
                .sum();
            let reward = objective - self.incumbent_objective();
            self.incumbent = Some(Incumbent {
                assignment,
                objective,
            });
            self.nodes[node_id].status = NodeStatus::IntegralLeaf;
            return Ok((reward, self.is_done()));
        }

        let (var, dist) = self
            .most_fractional_var(&lp_x)
            .expect("non-integral solution must have a fractional variable");
        for val in [0.0, 1.0] {
            let mut lower = self.nodes[node_id].lower.clone();
            let mut upper = self.nodes[node_id].upper.clone();
            lower[var] = val;
            upper[var] = val;
            self.create_node(
                Some(node_id),
                Some(var),
                Some(val as u8),
                dist,
                lower,
                upper,
            )?;
        }
        self.nodes[node_id].status = NodeStatus::Expanded;
        Ok((0.0, self.is_done()))
    }

    /// Fixed-length feature vector for one node; see `node_feature_vec` for
    /// the layout.
    pub fn node_features(&self, node_id: usize) -> Result<Vec<f64>> {
        let node = self
            .nodes
            .get(node_id)
            .ok_or_else(|| CoreError::InvalidAction(format!("node {node_id} does not exist")))?;
        let n = self.ilp.problem.num_vars();
        let lp_obj = if node.lp_feasible {
            node.lp_objective
        } else {
            infeasible_penalty(n)
        };
        let inc = self.incumbent_objective();
        let best = if self.open.is_empty() {
            inc
        } else {
            self.best_open_bound()
        };
        let best = if best.is_finite() { best } else { inc };
        let budget_frac = self
            .budget
            .map_or(0.0, |b| self.expanded as f64 / b.max(1) as f64);
        Ok(node_feature_vec(
            lp_obj,
            node.depth,
            node.branch_fractionality,
            inc,
            best,
            budget_frac,
        ))
    }
}

/// LP-objective stand-in for infeasible nodes: worse than any feasible bound.
fn infeasible_penalty(n: usize) -> f64 {
    -(n as f64) - 1.0
}

pub const NODE_FEATURE_DIM: usize = 7;

/// Layout: node LP objective, depth, branching-variable fractionality,
/// incumbent objective, best open LP bound, gap (best bound - incumbent),
/// fraction of node budget used.
pub fn node_feature_vec(
    lp_objective: f64,
    depth: usize,
    fractionality: f64,
    incumbent: f64,
    best_bound: f64,
    budget_frac: f64,
) -> Vec<f64> {
    vec![
        lp_objective,
        depth as f64,
        fractionality,
        incumbent,
        best_bound,
        best_bound - incumbent,
        budget_frac,
    ]
}

/// Expands one node of the tree; free-function form of `BnBTree::expand`.
pub fn bnb_expand(tree: &mut BnBTree, node_id: usize) -> Result<(f64, bool)> {
    tree.expand(node_id)
}

/// Feature vector of one node; free-function form of `BnBTree::node_features`.
pub fn bnb_node_features(tree: &BnBTree, node_id: usize) -> Result<Vec<f64>> {
    tree.node_features(node_id)
}

// --- solution mapping -------------------------------------------------------

/// Cover {v : x_v = 1} of a feasible assignment, sorted ascending.
pub fn assignment_to_cover(graph: &Graph, x: &[f64]) -> Result<Vec<usize>> {
    if x.len() != graph.num_vertices() {
        return Err(CoreError::DimensionMismatch {
            what: "assignment",
            expected: graph.num_vertices(),
            got: x.len(),
        });
    }
    let selected: Vec<bool> = x.iter().map(|v| (*v - 1.0).abs() <= INTEGRAL_TOL).collect();
    for (j, v) in x.iter().enumerate() {
        if !selected[j] && v.abs() > INTEGRAL_TOL {
            return Err(CoreError::InvalidParameter(format!(
                "assignment entry {j} = {v} is not binary"
            )));
        }
    }
    if !graph.is_cover(&selected) {
        return Err(CoreError::InvalidParameter(
            "assignment does not satisfy every edge constraint".into(),
        ));
    }
    Ok((0..x.len()).filter(|j| selected[*j]).collect())
}

/// Indicator assignment of a cover.
pub fn cover_to_assignment(graph: &Graph, cover: &[usize]) -> Result<Vec<f64>> {
    let n = graph.num_vertices();
    let mut selected = vec![false; n];
    for &v in cover {
        if v >= n {
            return Err(CoreError::InvalidParameter(format!(
                "cover vertex {v} out of range"
            )));
        }
        selected[v] = true;
    }
    if !graph.is_cover(&selected) {
        return Err(CoreError::InvalidParameter(
            "vertex set does not cover every edge".into(),
        ));
    }
    Ok(selected.iter().map(|s| if *s { 1.0 } else { 0.0 }).collect())
}

// --- trajectory mappings ----------------------------------------------------

fn parse_graph_token(token: &StateToken) -> Result<Vec<bool>> {
    let bits = token
        .0
        .strip_prefix("g:")
        .ok_or_else(|| CoreError::MappingFailed(format!("not a graph state token: {token}")))?;
    Ok(bits.chars().map(|c| c == '1').collect())
}

fn dive_state_token(expansions: usize, prefix: &[bool]) -> StateToken {
    let bits: String = prefix.iter().map(|b| if *b { '1' } else { '0' }).collect();
    StateToken(format!("dive:{expansions}:{bits}"))
}

fn dive_final_token(bits: &[bool]) -> StateToken {
    let s: String = bits.iter().map(|b| if *b { '1' } else { '0' }).collect();
    StateToken(format!("dive:done:i{s}"))
}

/// Node id scheme inside a demonstration dive: root 0; the two children
/// created at depth t fix variable t and get ids 2t+1 (value 0) and
/// 2t+2 (value 1).
fn dive_child_id(parent_depth: usize, bit: bool) -> usize {
    2 * parent_depth + 1 + usize::from(bit)
}

/// The branch-and-bound dive demonstrating a cover: fixes variables in
/// ascending index order along the path to the cover's indicator leaf.
/// Internal steps reward 0; the leaf pays objective minus the sentinel 0,
/// i.e. -|cover|, so the total matches the graph view exactly.
pub fn dive_trajectory(bits: &[bool]) -> Trajectory {
    let n = bits.len();
    let cover_size = bits.iter().filter(|b| **b).count();
    let mut steps = Vec::with_capacity(n + 1);
    for t in 0..=n {
        let state = dive_state_token(t, &bits[..t.saturating_sub(1)]);
        let action = if t == 0 {
            0
        } else {
            dive_child_id(t - 1, bits[t - 1])
        };
        let reward = if t == n { -(cover_size as f64) } else { 0.0 };
        steps.push(Step {
            state,
            action: ActionToken(action as u64),
            reward,
        });
    }
    Trajectory {
        view: ViewId::B,
        steps,
        final_state: dive_final_token(bits),
    }
}

/// Replays the dive with LP solves to recover each step's decision context
/// (open nodes and their features) for behavior cloning and diagnostics.
pub fn dive_decisions(graph: &Graph, bits: &[bool]) -> Result<Vec<Decision>> {
    let n = graph.num_vertices();
    if bits.len() != n {
        return Err(CoreError::DimensionMismatch {
            what: "dive bits",
            expected: n,
            got: bits.len(),
        });
    }
    let ilp = build_ilp(graph);

    struct DiveNode {
        id: usize,
        depth: usize,
        fractionality: f64,
        lower: Vec<f64>,
        upper: Vec<f64>,
        lp_feasible: bool,
        lp_objective: f64,
        lp_x: Vec<f64>,
    }
    let solve =
        |ilp: &ILPInstance, lower: &[f64], upper: &[f64]| -> Result<(bool, f64, Vec<f64>)> {
            let mut problem = ilp.problem.clone();
            problem.lower = lower.to_vec();
            problem.upper = upper.to_vec();
            let sol = solve_lp(&problem)?;
            Ok(match sol.status {
                LpStatus::Optimal => (true, sol.objective, sol.x),
                _ => (false, infeasible_penalty(n), Vec::new()),
            })
        };

    let (feas, obj, x) = solve(&ilp, &ilp.problem.lower, &ilp.problem.upper)?;
    let mut open = vec![DiveNode {
        id: 0,
        depth: 0,
        fractionality: 0.0,
        lower: ilp.problem.lower.clone(),
        upper: ilp.problem.upper.clone(),
        lp_feasible: feas,
        lp_objective: obj,
        lp_x: x,
    }];
    let mut contexts = Vec::with_capacity(n + 1);
    for t in 0..=n {
        open.sort_by_key(|node| node.id);
        let best = open
            .iter()
            .filter(|node| node.lp_feasible)
            .map(|node| node.lp_objective)
            .fold(f64::NEG_INFINITY, f64::max);
        let best = if best.is_finite() { best } else { 0.0 };
        let chosen_id = if t == 0 {
            0
        } else {
            dive_child_id(t - 1, bits[t - 1])
        };
        let chosen_idx = open
            .iter()
            .position(|node| node.id == chosen_id)
            .expect("dive child must be open");
        let candidates: Vec<(ActionToken, Vec<f64>)> = open
            .iter()
            .map(|node| {
                let feats = node_feature_vec(
                    node.lp_objective,
                    node.depth,
                    node.fractionality,
                    0.0,
                    best,
                    0.0,
                );
                (ActionToken(node.id as u64), feats)
            })
            .collect();
        contexts.push(Decision::Scored { candidates });
        let chosen = open.remove(chosen_idx);
        if t < n {
            let frac = if chosen.lp_feasible && !chosen.lp_x.is_empty() {
                let f = chosen.lp_x[t] - chosen.lp_x[t].floor();
                f.min(1.0 - f)
            } else {
                0.0
            };
            for bit in [false, true] {
                let mut lower = chosen.lower.clone();
                let mut upper = chosen.upper.clone();
                let val = if bit { 1.0 } else { 0.0 };
                lower[t] = val;
                upper[t] = val;
                let (feas, obj, x) = solve(&ilp, &lower, &upper)?;
                open.push(DiveNode {
                    id: dive_child_id(t, bit),
                    depth: t + 1,
                    fractionality: frac,
                    lower,
                    upper,
                    lp_feasible: feas,
                    lp_objective: obj,
                    lp_x: x,
                });
            }
        }
    }
    Ok(contexts)
}

fn graph_to_ilp_trajectory(graph: &Graph, traj: &Trajectory) -> Result<Trajectory> {
    if traj.is_empty() {
        // Degenerate instance: a complete empty trajectory (edgeless graph)
        // maps to the empty trajectory.
        if graph.num_edges() > 0 {
            return Err(CoreError::IncompleteTrajectory(
                "empty graph trajectory on a graph with edges".into(),
            ));
        }
        return Ok(Trajectory {
            view: ViewId::B,
            steps: Vec::new(),
            final_state: dive_final_token(&vec![false; graph.num_vertices()]),
        });
    }
    let selected = parse_graph_token(&traj.final_state)?;
    if selected.len() != graph.num_vertices() {
        return Err(CoreError::MappingFailed(
            "graph trajectory token does not match the instance".into(),
        ));
    }
    if !graph.is_cover(&selected) {
        return Err(CoreError::IncompleteTrajectory(
            "graph trajectory did not reach a cover".into(),
        ));
    }
    Ok(dive_trajectory(&selected))
}

fn parse_bnb_final_token(token: &StateToken) -> Result<Vec<bool>> {
    let fields: Vec<&str> = token.0.split(':').collect();
    let done = fields.contains(&"done");
    if !done {
        return Err(CoreError::IncompleteTrajectory(format!(
            "branch-and-bound trajectory did not finish: {token}"
        )));
    }
    let inc = fields
        .iter()
        .find_map(|f| f.strip_prefix('i'))
        .ok_or_else(|| {
            CoreError::MappingFailed(format!("token lacks incumbent field: {token}"))
        })?;
    if inc == "none" {
        return Err(CoreError::MappingFailed(
            "no incumbent: nothing to translate into a cover".into(),
        ));
    }
    Ok(inc.chars().map(|c| c == '1').collect())
}

fn ilp_to_graph_trajectory(graph: &Graph, traj: &Trajectory) -> Result<Trajectory> {
    if traj.is_empty() {
        return Err(CoreError::IncompleteTrajectory(
            "empty branch-and-bound trajectory has no incumbent".into(),
        ));
    }
    let selected = parse_bnb_final_token(&traj.final_state)?;
    if selected.len() != graph.num_vertices() {
        return Err(CoreError::MappingFailed(
            "incumbent does not match the instance".into(),
        ));
    }
    if !graph.is_cover(&selected) {
        return Err(CoreError::MappingFailed(
            "incumbent assignment is not a cover".into(),
        ));
    }
    let cover: Vec<usize> = (0..selected.len()).filter(|v| selected[*v]).collect();
    let mut state = GraphState::initial(Arc::new(graph.clone()));
    let mut steps = Vec::with_capacity(cover.len());
    for &v in &cover {
        let token = state.token();
        let (next, reward, _terminal) = graph_step(&state, v)?;
        steps.push(Step {
            state: token,
            action: ActionToken(v as u64),
            reward,
        });
        state = next;
    }
    Ok(Trajectory {
        view: ViewId::A,
        steps,
        final_state: state.token(),
    })
}

// --- view handles and instance assembly --------------------------------------

struct GraphView {
    graph: Arc<Graph>,
    spec: MDPSpec,
}

impl ViewHandle for GraphView {
    fn spec(&self) -> MDPSpec {
        self.spec
    }

    fn build(&self) -> Box<dyn Environment> {
        Box::new(GraphEnv::new(Arc::clone(&self.graph)))
    }

    fn featurize(&self, _state: &StateToken) -> Option<Vec<f64>> {
        None
    }

    fn replay_decisions(&self, traj: &Trajectory) -> Result<Vec<Decision>> {
        let mut env = GraphEnv::new(Arc::clone(&self.graph));
        crate::mdp::replay_decisions_via_env(&mut env, traj)
    }
}

struct BnbView {
    graph: Arc<Graph>,
    spec: MDPSpec,
    budget: Option<usize>,
}

impl ViewHandle for BnbView {
    fn spec(&self) -> MDPSpec {
        self.spec
    }

    fn build(&self) -> Box<dyn Environment> {
        BnbEnv::new(Arc::clone(&self.graph), self.budget, self.spec)
            .map(|env| Box::new(env) as Box<dyn Environment>)
            .expect("root LP of an MVC relaxation is always solvable")
    }

    fn featurize(&self, _state: &StateToken) -> Option<Vec<f64>> {
        None
    }

    fn replay_decisions(&self, traj: &Trajectory) -> Result<Vec<Decision>> {
        if traj.is_empty() {
            return Ok(Vec::new());
        }
        if traj.final_state.0.starts_with("dive:") {
            let bits = parse_bnb_final_token(&traj.final_state)?;
            return dive_decisions(&self.graph, &bits);
        }
        // Real search trajectory: replay the expansions.
        let mut env = BnbEnv::new(Arc::clone(&self.graph), self.budget, self.spec)?;
        crate::mdp::replay_decisions_via_env(&mut env, traj)
    }
}

pub struct BnbEnv {
    spec: MDPSpec,
    tree: BnBTree,
}

impl BnbEnv {
    pub fn new(graph: Arc<Graph>, budget: Option<usize>, spec: MDPSpec) -> Result<Self> {
        let tree = BnBTree::new(build_ilp(&graph), budget)?;
        Ok(BnbEnv { spec, tree })
    }

    pub fn tree(&self) -> &BnBTree {
        &self.tree
    }
}

impl Environment for BnbEnv {
    fn spec(&self) -> &MDPSpec {
        &self.spec
    }

    fn state_token(&self) -> StateToken {
        let open_ids: Vec<u8> = self
            .tree
            .open_nodes()
            .flat_map(|id| (id as u64).to_le_bytes())
            .collect();
        let inc = match &self.tree.incumbent {
            Some(inc) => inc
                .assignment
                .iter()
                .map(|v| if *v > 0.5 { '1' } else { '0' })
                .collect::<String>(),
            None => "none".to_string(),
        };
        let done = if self.tree.is_done() { ":done" } else { "" };
        StateToken(format!(
            "bnb:e{}:h{:016x}:i{}{}",
            self.tree.expanded,
            fnv1a(&open_ids),
            inc,
            done
        ))
    }

    fn is_terminal(&self) -> bool {
        self.tree.is_done()
    }

    fn state_features(&self) -> Vec<f64> {
        let n = self.tree.ilp.problem.num_vars().max(1) as f64;
        let budget_frac = self
            .tree
            .budget
            .map_or(0.0, |b| self.tree.expanded as f64 / b.max(1) as f64);
        let inc = self.tree.incumbent_objective();
        let best = self.tree.best_open_bound();
        let best = if best.is_finite() { best } else { inc };
        vec![1.0, budget_frac, inc / n, best / n, (best - inc) / n]
    }

    fn decision(&self) -> Decision {
        let candidates = self
            .tree
            .open_nodes()
            .map(|id| {
                let feats = self
                    .tree
                    .node_features(id)
                    .expect("open node always has features");
                (ActionToken(id as u64), feats)
            })
            .collect();
        Decision::Scored { candidates }
    }

    fn step(&mut self, action: ActionToken, _rng: &mut ChaCha8Rng) -> Result<f64> {
        let (reward, _done) = self.tree.expand(action.0 as usize)?;
        Ok(reward)
    }
}

/// Assembles the two-view MVC instance for one graph. View A samples vertex
/// selections; view B runs branch-and-bound under the given node budget.
pub fn mvc_instance(id: impl Into<String>, graph: Graph, budget: Option<usize>) -> TwoViewInstance {
    let graph = Arc::new(graph);
    let n = graph.num_vertices();
    let bnb_cap = budget.unwrap_or(1_000_000).max(n + 1);
    let spec_a = MDPSpec::new(ViewId::A, 1.0, n.max(1)).expect("static spec");
    let spec_b = MDPSpec::new(ViewId::B, 1.0, bnb_cap).expect("static spec");

    let g_ab = Arc::clone(&graph);
    let map_a_to_b = ViewMapping::new(MapDirection::AToB, move |traj| {
        graph_to_ilp_trajectory(&g_ab, traj)
    });
    let g_ba = Arc::clone(&graph);
    let map_b_to_a = ViewMapping::new(MapDirection::BToA, move |traj| {
        ilp_to_graph_trajectory(&g_ba, traj)
    });

    TwoViewInstance {
        id: id.into(),
        view_a: Box::new(GraphView {
            graph: Arc::clone(&graph),
            spec: spec_a,
        }),
        view_b: Box::new(BnbView {
            graph,
            spec: spec_b,
            budget,
        }),
        map_a_to_b,
        map_b_to_a,
    }
}
