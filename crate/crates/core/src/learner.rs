//! Losses and the combined update step: REINFORCE with a linear baseline,
//! behavior cloning, a mean-KL surrogate for the shared-action case, and the
//! single gradient step that mixes them.

use crate::error::{CoreError, Result};
use crate::mdp::{DemoStep, Rollout};
use crate::policy::PolicyParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    RlWithIl,
    IlOnly,
}

/// Which policy-difference surrogate the imitation term uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surrogate {
    /// Negative log-likelihood behavior cloning.
    Nll,
    /// Mean KL(target distribution || policy) at exchanged states. Falls
    /// back to the one-hot target (= NLL) where no distribution is attached.
    MeanKl,
}

#[derive(Debug, Clone, Copy)]
pub struct UpdateConfig {
    pub mode: UpdateMode,
    /// Imitation weight (lambda).
    pub lambda: f64,
    /// Step size (alpha).
    pub learning_rate: f64,
    pub gamma: f64,
    pub surrogate: Surrogate,
}

impl UpdateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.lambda < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

impl Default for UpdateConfig {
    fn default() -> Self {
        UpdateConfig {
            mode: UpdateMode::RlWithIl,
            lambda: 1.0,
            learning_rate: 0.01,
            gamma: 1.0,
            surrogate: Surrogate::Nll,
        }
    }
}

/// Linear state-value baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl BaselineModel {
    pub fn zero(dim: usize) -> Self {
        BaselineModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(features)
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias
    }
}

/// Discounted return-to-go at every step of a rollout.
pub fn returns_to_go(rollout: &Rollout, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rollout.steps.len()];
    let mut acc = 0.0;
    for (i, step) in rollout.steps.iter().enumerate().rev() {
        acc = step.reward + gamma * acc;
        out[i] = acc;
    }
    out
}

/// Solves M x = rhs by Gaussian elimination with partial pivoting.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col].abs() < 1e-12 {
            return Err(CoreError::InvalidParameter(
                "singular normal-equation system".into(),
            ));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for j in col..n {
                        m[row][j] -= f * m[col][j];
                    }
                    rhs[row] -= f * rhs[col];
                }
            }
        }
    }
    Ok((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Ridge least-squares fit (ridge 1e-6 on the feature weights, bias free) of
/// the discounted return-to-go on per-state features.
pub fn fit_linear_baseline(rollouts: &[Rollout], gamma: f64) -> Result<BaselineModel> {
    const RIDGE: f64 = 1e-6;
    if rollouts.is_empty() {
        return Err(CoreError::EmptyInput("baseline fit needs at least one trajectory"));
    }
    let dim = rollouts
        .iter()
        .flat_map(|r| r.steps.first())
        .map(|s| s.state_features.len())
        .next()
        .unwrap_or(0);
    if dim == 0 {
        return Ok(BaselineModel::zero(0));
    }
    // Normal equations over [weights, bias].
    let n = dim + 1;
    let mut m = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    let mut samples = 0usize;
    for r in rollouts {
        let gs = returns_to_go(r, gamma);
        for (step, g) in r.steps.iter().zip(gs) {
            let x = &step.state_features;
            if x.len() != dim {
                return Err(CoreError::DimensionMismatch {
                    what: "baseline state features",
                    expected: dim,
                    got: x.len(),
                });
            }
            for i in 0..dim {
                for j in 0..dim {
                    m[i][j] += x[i] * x[j];
                }
                m[i][dim] += x[i];
                m[dim][i] += x[i];
                rhs[i] += x[i] * g;
            }
            rhs[dim] += g;
            samples += 1;
        }
    }
    if samples == 0 {
        return Ok(BaselineModel::zero(dim));
    }
    m[dim][dim] = samples as f64;
    for i in 0..dim {
        m[i][i] += RIDGE;
    }
    let sol = solve_dense(m, rhs)?;
    Ok(BaselineModel {
        weights: sol[..dim].to_vec(),
        bias: sol[dim],
    })
}

/// REINFORCE ascent direction with a baseline: the mean over trajectories of
/// sum_t grad ln pi(a_t | s_t) * gamma^t * (G_t - b(s_t)).
pub fn policy_gradient(
    policy: &PolicyParams,
    rollouts: &[Rollout],
    baseline: &BaselineModel,
    gamma: f64,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; policy.params.len()];
    if rollouts.is_empty() {
        return Ok(grad);
    }
    for r in rollouts {
        let gs = returns_to_go(r, gamma);
        let mut w = 1.0;
        for (step, g) in r.steps.iter().zip(gs) {
            let adv = g - baseline.predict(&step.state_features);
            let lg = policy.decision_log_prob_gradient(&step.decision, step.chosen)?;
            let scale = w * adv;
            for (acc, v) in grad.iter_mut().zip(&lg) {
                *acc += scale * v;
            }
            w *= gamma;
        }
    }
    let m = rollouts.len() as f64;
    for v in grad.iter_mut() {
        *v /= m;
    }
    Ok(grad)
}

fn demo_nll_and_grad(policy: &PolicyParams, demo: &DemoStep) -> Result<(f64, Vec<f64>)> {
    match demo {
        DemoStep::Categorical {
            features, action, ..
        } => {
            let dist = policy.action_distribution(features)?;
            if *action >= dist.probs.len() {
                return Err(CoreError::InvalidAction(format!(
                    "demo action {action} out of range for {} actions",
                    dist.probs.len()
                )));
            }
            let loss = -dist.probs[*action].max(f64::MIN_POSITIVE).ln();
            let mut grad = policy.log_prob_gradient(features, *action)?;
            for v in grad.iter_mut() {
                *v = -*v;
            }
            Ok((loss, grad))
        }
        DemoStep::Scored { candidates, chosen } => {
            let dist = policy.scored_distribution(candidates)?;
            let loss = -dist.probs[*chosen].max(f64::MIN_POSITIVE).ln();
            let mut grad = policy.scored_log_prob_gradient(candidates, *chosen)?;
            for v in grad.iter_mut() {
                *v = -*v;
            }
            Ok((loss, grad))
        }
    }
}

/// Mean negative log-likelihood of the demo actions and its gradient.
/// An empty demo set yields loss 0 with a zero gradient.
pub fn behavior_cloning_loss(
    policy: &PolicyParams,
    demos: &[DemoStep],
) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut grad = vec![0.0; policy.params.len()];
    if demos.is_empty() {
        return Ok((loss, grad));
    }
    for demo in demos {
        let (l, g) = demo_nll_and_grad(policy, demo)?;
        loss += l;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    let n = demos.len() as f64;
    loss /= n;
    for v in grad.iter_mut() {
        *v /= n;
    }
    Ok((loss, grad))
}

/// Mean KL(target || policy) over demo states. Items without an attached
/// target distribution contribute their one-hot term, i.e. plain NLL.
pub fn kl_surrogate_loss(policy: &PolicyParams, demos: &[DemoStep]) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut grad = vec![0.0; policy.params.len()];
    if demos.is_empty() {
        return Ok((loss, grad));
    }
    for demo in demos {
        match demo {
            DemoStep::Categorical {
                features,
                target: Some(q),
                ..
            } => {
                let dist = policy.action_distribution(features)?;
                if q.len() != dist.probs.len() {
                    return Err(CoreError::DimensionMismatch {
                        what: "KL surrogate target",
                        expected: dist.probs.len(),
                        got: q.len(),
                    });
                }
                for (qi, pi) in q.iter().zip(&dist.probs) {
                    if *qi > 0.0 {
                        loss += qi * (qi.ln() - pi.max(f64::MIN_POSITIVE).ln());
                    }
                }
                // grad of -sum_c q_c ln p_c; per-logit weight is p - q.
                let weights: Vec<f64> = dist
                    .probs
                    .iter()
                    .zip(q)
                    .map(|(p, qi)| p - qi)
                    .collect();
                let g = grad_logits(policy, features, &weights)?;
                for (acc, v) in grad.iter_mut().zip(&g) {
                    *acc += v;
                }
            }
            other => {
                let (l, g) = demo_nll_and_grad(policy, other)?;
                loss += l;
                for (acc, v) in grad.iter_mut().zip(&g) {
                    *acc += v;
                }
            }
        }
    }
    let n = demos.len() as f64;
    loss /= n;
    for v in grad.iter_mut() {
        *v /= n;
    }
    Ok((loss, grad))
}

// Gradient of sum_c w_c logit_c for zero-sum weights. When sum_c w_c = 0,
// sum_a w_a grad ln pi(a) = sum_a w_a grad logit_a because the shared
// -sum_c p_c grad logit_c term cancels.
fn grad_logits(policy: &PolicyParams, features: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    debug_assert!(weights.iter().sum::<f64>().abs() < 1e-9);
    let mut grad = vec![0.0; policy.params.len()];
    for (a, w) in weights.iter().enumerate() {
        if *w != 0.0 {
            let g = policy.log_prob_gradient(features, a)?;
            for (acc, v) in grad.iter_mut().zip(&g) {
                *acc += w * v;
            }
        }
    }
    Ok(grad)
}

fn surrogate_gradient(
    policy: &PolicyParams,
    demos: &[DemoStep],
    surrogate: Surrogate,
) -> Result<Vec<f64>> {
    let (_, grad) = match surrogate {
        Surrogate::Nll => behavior_cloning_loss(policy, demos)?,
        Surrogate::MeanKl => kl_surrogate_loss(policy, demos)?,
    };
    Ok(grad)
}

/// One combined update step. In `RlWithIl` mode the loss is
/// -(reward term) + lambda * C(pi, demos); in `IlOnly` mode it is
/// lambda * C alone. Returns a fresh snapshot.
pub fn copier_update(
    policy: &PolicyParams,
    rollouts: &[Rollout],
    demos: &[DemoStep],
    config: &UpdateConfig,
) -> Result<PolicyParams> {
    config.validate()?;
    let mut params = policy.params.clone();
    match config.mode {
        UpdateMode::RlWithIl => {
            if rollouts.is_empty() {
                return Err(CoreError::EmptyInput(
                    "RL update needs at least one rollout",
                ));
            }
            let baseline = fit_linear_baseline(rollouts, config.gamma)?;
            let pg = policy_gradient(policy, rollouts, &baseline, config.gamma)?;
            for (p, g) in params.iter_mut().zip(&pg) {
                *p += config.learning_rate * g;
            }
            if config.lambda != 0.0 && !demos.is_empty() {
                let cg = surrogate_gradient(policy, demos, config.surrogate)?;
                for (p, g) in params.iter_mut().zip(&cg) {
                    *p -= config.learning_rate * config.lambda * g;
                }
            }
        }
        UpdateMode::IlOnly => {
            if config.lambda != 0.0 && !demos.is_empty() {
                let cg = surrogate_gradient(policy, demos, config.surrogate)?;
                for (p, g) in params.iter_mut().zip(&cg) {
                    *p -= config.learning_rate * config.lambda * g;
                }
            }
        }
    }
    Ok(PolicyParams {
        arch: policy.arch,
        feature_dim: policy.feature_dim,
        actions: policy.actions,
        params,
    })
}
