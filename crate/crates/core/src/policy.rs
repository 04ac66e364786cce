//! Categorical policy classes: tabular softmax, linear softmax over
//! features, and a one-hidden-layer tanh network.
//!
//! Every class supports two invocation modes:
//!
//! * categorical — one feature vector in, a distribution over k fixed
//!   actions out (gridworld);
//! * scored — the same parameters used as a scalar scoring head (k = 1)
//!   applied to each candidate's features, softmaxed over the candidates
//!   (vertex selection, branch-and-bound node selection).
//!
//! Policies are immutable snapshots; updates build new values.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::mdp::{Decision, Environment, Rollout, RolloutStep, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyArch {
    /// Logit matrix over one-hot features: W is k x d, no bias.
    Tabular,
    /// W x + b.
    Linear,
    /// One tanh hidden layer of the given width.
    Mlp { hidden: usize },
}

impl PolicyArch {
    pub fn param_count(&self, feature_dim: usize, actions: usize) -> usize {
        match *self {
            PolicyArch::Tabular => actions * feature_dim,
            PolicyArch::Linear => actions * feature_dim + actions,
            PolicyArch::Mlp { hidden } => {
                hidden * feature_dim + hidden + actions * hidden + actions
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            PolicyArch::Tabular => "tabular",
            PolicyArch::Linear => "linear",
            PolicyArch::Mlp { .. } => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub arch: PolicyArch,
    pub feature_dim: usize,
    pub actions: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
}

impl ActionDistribution {
    /// Greedy action: argmax with lowest-index tie-breaking.
    pub fn greedy(&self) -> usize {
        greedy_index(&self.probs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "distribution has a negative or non-finite probability".into(),
            ));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidParameter(format!(
                "distribution sums to {sum}"
            )));
        }
        Ok(())
    }
}

/// Argmax with lowest-index tie-breaking.
pub fn greedy_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl PolicyParams {
    pub fn zeros(arch: PolicyArch, feature_dim: usize, actions: usize) -> Self {
        PolicyParams {
            arch,
            feature_dim,
            actions,
            params: vec![0.0; arch.param_count(feature_dim, actions)],
        }
    }

    /// Parameters drawn uniformly from [-0.05, 0.05].
    pub fn init_uniform(
        arch: PolicyArch,
        feature_dim: usize,
        actions: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let n = arch.param_count(feature_dim, actions);
        let params = (0..n).map(|_| rng.gen_range(-0.05..=0.05)).collect();
        PolicyParams {
            arch,
            feature_dim,
            actions,
            params,
        }
    }

    /// Description length in bits: 32 bits per parameter.
    pub fn description_bits(&self) -> f64 {
        32.0 * self.params.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.arch.param_count(self.feature_dim, self.actions);
        if self.params.len() != expected {
            return Err(CoreError::DimensionMismatch {
                what: "policy parameter vector",
                expected,
                got: self.params.len(),
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "policy has a non-finite parameter".into(),
            ));
        }
        Ok(())
    }

    fn check_features(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.feature_dim {
            return Err(CoreError::DimensionMismatch {
                what: "feature vector",
                expected: self.feature_dim,
                got: features.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_features(features)?;
        let d = self.feature_dim;
        let k = self.actions;
        let p = &self.params;
        Ok(match self.arch {
            PolicyArch::Tabular => (0..k)
                .map(|a| (0..d).map(|j| p[a * d + j] * features[j]).sum())
                .collect(),
            PolicyArch::Linear => (0..k)
                .map(|a| {
                    let w: f64 = (0..d).map(|j| p[a * d + j] * features[j]).sum();
                    w + p[k * d + a]
                })
                .collect(),
            PolicyArch::Mlp { hidden } => {
                let (w1, rest) = p.split_at(hidden * d);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(k * hidden);
                let a1: Vec<f64> = (0..hidden)
                    .map(|i| {
                        let z: f64 =
                            (0..d).map(|j| w1[i * d + j] * features[j]).sum::<f64>() + b1[i];
                        z.tanh()
                    })
                    .collect();
                (0..k)
                    .map(|a| {
                        (0..hidden).map(|i| w2[a * hidden + i] * a1[i]).sum::<f64>() + b2[a]
                    })
                    .collect()
            }
        })
    }

    /// Softmax over the k logits.
    pub fn action_distribution(&self, features: &[f64]) -> Result<ActionDistribution> {
        Ok(ActionDistribution {
            probs: softmax(&self.logits(features)?),
        })
    }

    /// Scalar score; the policy must have a single output head.
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if self.actions != 1 {
            return Err(CoreError::InvalidParameter(format!(
                "scoring requires a single-output policy, this one has {} actions",
                self.actions
            )));
        }
        Ok(self.logits(features)?[0])
    }

    /// Softmax over per-candidate scores.
    pub fn scored_distribution(&self, candidates: &[Vec<f64>]) -> Result<ActionDistribution> {
        if candidates.is_empty() {
            return Err(CoreError::EmptyInput("scored distribution needs candidates"));
        }
        let scores: Vec<f64> = candidates
            .iter()
            .map(|c| self.score(c))
            .collect::<Result<_>>()?;
        Ok(ActionDistribution {
            probs: softmax(&scores),
        })
    }

    /// Distribution over the legal actions of a decision context.
    pub fn decision_distribution(&self, decision: &Decision) -> Result<ActionDistribution> {
        match decision {
            Decision::Categorical { features, actions } => {
                let dist = self.action_distribution(features)?;
                if dist.probs.len() != actions.len() {
                    return Err(CoreError::DimensionMismatch {
                        what: "decision action count",
                        expected: actions.len(),
                        got: dist.probs.len(),
                    });
                }
                Ok(dist)
            }
            Decision::Scored { candidates } => {
                let feats: Vec<Vec<f64>> = candidates.iter().map(|(_, f)| f.clone()).collect();
                self.scored_distribution(&feats)
            }
        }
    }

    /// Gradient of sum_c weights[c] * logit_c with respect to the parameters.
    fn logit_combo_gradient(&self, features: &[f64], weights: &[f64]) -> Vec<f64> {
        let d = self.feature_dim;
        let k = self.actions;
        let mut grad = vec![0.0; self.params.len()];
        match self.arch {
            PolicyArch::Tabular => {
                for a in 0..k {
                    if weights[a] != 0.0 {
                        for j in 0..d {
                            grad[a * d + j] = weights[a] * features[j];
                        }
                    }
                }
            }
            PolicyArch::Linear => {
                for a in 0..k {
                    if weights[a] != 0.0 {
                        for j in 0..d {
                            grad[a * d + j] = weights[a] * features[j];
                        }
                        grad[k * d + a] = weights[a];
                    }
                }
            }
            PolicyArch::Mlp { hidden } => {
                let p = &self.params;
                let (w1, rest) = p.split_at(hidden * d);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, _b2) = rest.split_at(k * hidden);
                let a1: Vec<f64> = (0..hidden)
                    .map(|i| {
                        let z: f64 =
                            (0..d).map(|j| w1[i * d + j] * features[j]).sum::<f64>() + b1[i];
                        z.tanh()
                    })
                    .collect();
                let off_b1 = hidden * d;
                let off_w2 = off_b1 + hidden;
                let off_b2 = off_w2 + k * hidden;
                let mut da1 = vec![0.0; hidden];
                for a in 0..k {
                    let w = weights[a];
                    if w != 0.0 {
                        for i in 0..hidden {
                            grad[off_w2 + a * hidden + i] = w * a1[i];
                            da1[i] += w * w2[a * hidden + i];
                        }
                        grad[off_b2 + a] = w;
                    }
                }
                for i in 0..hidden {
                    let dz = da1[i] * (1.0 - a1[i] * a1[i]);
                    for j in 0..d {
                        grad[i * d + j] = dz * features[j];
                    }
                    grad[off_b1 + i] = dz;
                }
            }
        }
        grad
    }

    /// Gradient of ln pi(action | features) with respect to the parameters.
    pub fn log_prob_gradient(&self, features: &[f64], action: usize) -> Result<Vec<f64>> {
        if action >= self.actions {
            return Err(CoreError::InvalidAction(format!(
                "action {action} out of range for {} actions",
                self.actions
            )));
        }
        let dist = self.action_distribution(features)?;
        let mut weights: Vec<f64> = dist.probs.iter().map(|p| -p).collect();
        weights[action] += 1.0;
        Ok(self.logit_combo_gradient(features, &weights))
    }

    /// Gradient of ln pi(chosen | candidates) in scored mode.
    pub fn scored_log_prob_gradient(
        &self,
        candidates: &[Vec<f64>],
        chosen: usize,
    ) -> Result<Vec<f64>> {
        if chosen >= candidates.len() {
            return Err(CoreError::InvalidAction(format!(
                "candidate {chosen} out of range for {}",
                candidates.len()
            )));
        }
        let dist = self.scored_distribution(candidates)?;
        let mut grad = self.logit_combo_gradient(&candidates[chosen], &[1.0]);
        for (c, p) in candidates.iter().zip(&dist.probs) {
            let g = self.logit_combo_gradient(c, &[*p]);
            for (acc, v) in grad.iter_mut().zip(&g) {
                *acc -= v;
            }
        }
        Ok(grad)
    }

    /// Gradient of ln pi(chosen | decision), dispatching on the decision kind.
    pub fn decision_log_prob_gradient(
        &self,
        decision: &Decision,
        chosen: usize,
    ) -> Result<Vec<f64>> {
        match decision {
            Decision::Categorical { features, .. } => self.log_prob_gradient(features, chosen),
            Decision::Scored { candidates } => {
                let feats: Vec<Vec<f64>> = candidates.iter().map(|(_, f)| f.clone()).collect();
                self.scored_log_prob_gradient(&feats, chosen)
            }
        }
    }

    /// ln pi(chosen | decision).
    pub fn decision_log_prob(&self, decision: &Decision, chosen: usize) -> Result<f64> {
        let dist = self.decision_distribution(decision)?;
        if chosen >= dist.probs.len() {
            return Err(CoreError::InvalidAction(format!(
                "choice {chosen} out of range for {}",
                dist.probs.len()
            )));
        }
        Ok(dist.probs[chosen].max(f64::MIN_POSITIVE).ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    Kl,
    Js,
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (pi, qi) in p.iter().zip(q) {
        if *pi > 0.0 {
            if *qi <= 0.0 {
                return f64::INFINITY;
            }
            acc += pi * (pi / qi).ln();
        }
    }
    acc
}

/// KL(p || q) or JS(p || q) in nats. KL returns +infinity when q lacks mass
/// somewhere p has it; JS is always finite and at most ln 2.
pub fn divergence(p: &ActionDistribution, q: &ActionDistribution, kind: DivergenceKind) -> Result<f64> {
    if p.probs.len() != q.probs.len() {
        return Err(CoreError::DimensionMismatch {
            what: "divergence arguments",
            expected: p.probs.len(),
            got: q.probs.len(),
        });
    }
    Ok(match kind {
        DivergenceKind::Kl => kl(&p.probs, &q.probs),
        DivergenceKind::Js => {
            let m: Vec<f64> = p
                .probs
                .iter()
                .zip(&q.probs)
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            0.5 * kl(&p.probs, &m) + 0.5 * kl(&q.probs, &m)
        }
    })
}

// --- checkpoint io ----------------------------------------------------------

impl PolicyParams {
    /// Textual checkpoint: header then one parameter per line.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("arch {}\n", self.arch.tag()));
        out.push_str(&format!("features {}\n", self.feature_dim));
        out.push_str(&format!("actions {}\n", self.actions));
        if let PolicyArch::Mlp { hidden } = self.arch {
            out.push_str(&format!("hidden {hidden}\n"));
        }
        for p in &self.params {
            out.push_str(&format!("{p}\n"));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut arch_tag = None;
        let mut features = None;
        let mut actions = None;
        let mut hidden = None;
        let mut params = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |reason: String| CoreError::Parse {
                line: idx + 1,
                reason,
            };
            if let Some((key, value)) = line.split_once(' ') {
                match key {
                    "arch" => arch_tag = Some(value.to_string()),
                    "features" => {
                        features =
                            Some(value.parse::<usize>().map_err(|e| parse_err(e.to_string()))?)
                    }
                    "actions" => {
                        actions =
                            Some(value.parse::<usize>().map_err(|e| parse_err(e.to_string()))?)
                    }
                    "hidden" => {
                        hidden =
                            Some(value.parse::<usize>().map_err(|e| parse_err(e.to_string()))?)
                    }
                    _ => return Err(parse_err(format!("unknown header key {key:?}"))),
                }
            } else {
                params.push(line.parse::<f64>().map_err(|e| parse_err(e.to_string()))?);
            }
        }
        let arch = match arch_tag.as_deref() {
            Some("tabular") => PolicyArch::Tabular,
            Some("linear") => PolicyArch::Linear,
            Some("mlp") => PolicyArch::Mlp {
                hidden: hidden.ok_or(CoreError::Parse {
                    line: 0,
                    reason: "mlp checkpoint missing hidden width".into(),
                })?,
            },
            other => {
                return Err(CoreError::Parse {
                    line: 0,
                    reason: format!("missing or unknown arch {other:?}"),
                })
            }
        };
        let policy = PolicyParams {
            arch,
            feature_dim: features.ok_or(CoreError::Parse {
                line: 0,
                reason: "missing features header".into(),
            })?,
            actions: actions.ok_or(CoreError::Parse {
                line: 0,
                reason: "missing actions header".into(),
            })?,
            params,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn write_checkpoint(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn read_checkpoint(path: &std::path::Path) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read_to_string(path)?)
    }
}

// --- rollouts ---------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionChoice {
    /// Sample from the policy's distribution.
    Sample,
    /// Deterministic argmax extraction (lowest index on ties).
    Greedy,
}

fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Runs one episode, recording the decision context of every step so that
/// learners never need to re-simulate their own rollouts.
pub fn rollout_with(
    policy: &PolicyParams,
    env: &mut dyn Environment,
    seed: u64,
    choice: ActionChoice,
) -> Result<Rollout> {
    let spec = *env.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = Vec::new();
    let mut traj_steps = Vec::new();
    while !env.is_terminal() && traj_steps.len() < spec.horizon_cap {
        let state = env.state_token();
        let state_features = env.state_features();
        let decision = env.decision();
        if decision.num_actions() == 0 {
            break;
        }
        let dist = policy.decision_distribution(&decision)?;
        let chosen = match choice {
            ActionChoice::Sample => sample_index(&dist.probs, &mut rng),
            ActionChoice::Greedy => dist.greedy(),
        };
        let action = decision.action_at(chosen);
        let reward = env.step(action, &mut rng)?;
        traj_steps.push(crate::mdp::Step {
            state: state.clone(),
            action,
            reward,
        });
        steps.push(RolloutStep {
            state,
            state_features,
            decision,
            chosen,
            reward,
        });
    }
    Ok(Rollout {
        trajectory: Trajectory {
            view: spec.view,
            steps: traj_steps,
            final_state: env.state_token(),
        },
        steps,
    })
}

/// Samples one trajectory by iterating the policy's action distribution and
/// the environment transition until a terminal state or the horizon cap.
/// Bit-reproducible given (policy, environment state, seed).
pub fn sample_trajectory(
    policy: &PolicyParams,
    env: &mut dyn Environment,
    seed: u64,
) -> Result<Rollout> {
    rollout_with(policy, env, seed, ActionChoice::Sample)
}
