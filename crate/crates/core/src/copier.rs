//! The co-training meta-algorithm.
//!
//! Each iteration samples one instance, rolls out both policies on their
//! views, exchanges supervision (whole mapped trajectories in the general
//! case, interactive state labels when the views share an action space),
//! and applies one combined update per view. Final evaluation runs both
//! policies and returns the better solution.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::learner::{copier_update, fit_linear_baseline, returns_to_go, UpdateConfig};
use crate::mdp::{
    estimate_occupancy, ActionToken, DemoStep, MapDirection, Rollout, StateToken, Trajectory,
    TwoViewInstance, ViewHandle, ViewId,
};
use crate::policy::{sample_trajectory, ActionDistribution, PolicyParams};
use crate::seed::{derive_seed, stream_rng};
use crate::theory::{improvement_diagnostics, ImprovementDiagnostics, InstanceDiagnostics, MappedStateEval};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangeMode {
    /// Whole mapped trajectories flow from the better policy (Exchange,
    /// general case).
    General,
    /// DAgger-style interactive labels flow both ways (shared action space).
    SharedAction,
}

/// Which way demonstrations flowed in one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangeFlow {
    AToB,
    BToA,
    Both,
    None,
}

impl std::fmt::Display for ExchangeFlow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExchangeFlow::AToB => write!(f, "A->B"),
            ExchangeFlow::BToA => write!(f, "B->A"),
            ExchangeFlow::Both => write!(f, "both"),
            ExchangeFlow::None => write!(f, "none"),
        }
    }
}

/// Outcome of the general-case exchange.
#[derive(Debug)]
pub struct ExchangeResult {
    /// Mapped demonstrations for the view-B policy (produced by A).
    pub demos_a_to_b: Vec<Trajectory>,
    /// Mapped demonstrations for the view-A policy (produced by B).
    pub demos_b_to_a: Vec<Trajectory>,
    pub eta_hat_a: f64,
    pub eta_hat_b: f64,
    pub direction: MapDirection,
    /// Winner trajectories that could not be translated (for example a
    /// budget-truncated search with no incumbent) and were dropped.
    pub dropped: usize,
}

fn mean_total_reward(trajs: &[Trajectory]) -> f64 {
    trajs.iter().map(Trajectory::total_reward).sum::<f64>() / trajs.len() as f64
}

/// Estimates each policy's quality by the sample mean of its trajectory
/// rewards and hands the better side's trajectories to the other view as
/// demonstrations. Ties flow B to A (the comparison is strict).
pub fn exchange_general(
    trajs_a: &[Trajectory],
    trajs_b: &[Trajectory],
    instance: &TwoViewInstance,
) -> Result<ExchangeResult> {
    if trajs_a.is_empty() || trajs_b.is_empty() {
        return Err(CoreError::EmptyInput("exchange needs rollouts from both views"));
    }
    let eta_hat_a = mean_total_reward(trajs_a);
    let eta_hat_b = mean_total_reward(trajs_b);
    let direction = if eta_hat_a > eta_hat_b {
        MapDirection::AToB
    } else {
        MapDirection::BToA
    };
    let (winners, mapping) = match direction {
        MapDirection::AToB => (trajs_a, &instance.map_a_to_b),
        MapDirection::BToA => (trajs_b, &instance.map_b_to_a),
    };
    let mut demos = Vec::with_capacity(winners.len());
    let mut dropped = 0usize;
    for traj in winners {
        match mapping.apply(traj) {
            Ok(mapped) => demos.push(mapped),
            Err(CoreError::IncompleteTrajectory(_)) | Err(CoreError::MappingFailed(_)) => {
                dropped += 1;
            }
            Err(other) => return Err(other),
        }
    }
    let (demos_a_to_b, demos_b_to_a) = match direction {
        MapDirection::AToB => (demos, Vec::new()),
        MapDirection::BToA => (Vec::new(), demos),
    };
    Ok(ExchangeResult {
        demos_a_to_b,
        demos_b_to_a,
        eta_hat_a,
        eta_hat_b,
        direction,
        dropped,
    })
}

/// One interactive label: a visited state, the query policy's features
/// there, its greedy action, and its full action distribution.
#[derive(Debug, Clone)]
pub struct LabeledState {
    pub state: StateToken,
    pub features: Vec<f64>,
    pub action: usize,
    pub distribution: Vec<f64>,
}

/// Queries the policy at every state of every trajectory (final states
/// included); duplicates are retained.
pub fn interactive_labels(
    trajs: &[Trajectory],
    query_policy: &PolicyParams,
    view: &dyn ViewHandle,
) -> Result<Vec<LabeledState>> {
    let mut labels = Vec::new();
    for traj in trajs {
        for state in traj.states() {
            let features = view.featurize(state).ok_or_else(|| {
                CoreError::InvalidParameter(format!(
                    "state {state} is not featurizable in the query view"
                ))
            })?;
            let dist = query_policy.action_distribution(&features)?;
            labels.push(LabeledState {
                state: state.clone(),
                features,
                action: dist.greedy(),
                distribution: dist.probs,
            });
        }
    }
    Ok(labels)
}

/// Shared-action exchange: both directions are always produced. The labels
/// for the view-B policy come from querying A on B's trajectories mapped
/// into view A, and symmetrically.
pub fn exchange_special(
    trajs_a: &[Trajectory],
    trajs_b: &[Trajectory],
    policy_a: &PolicyParams,
    policy_b: &PolicyParams,
    instance: &TwoViewInstance,
) -> Result<(Vec<LabeledState>, Vec<LabeledState>)> {
    let mapped_b: Vec<Trajectory> = trajs_b
        .iter()
        .map(|t| instance.map_b_to_a.apply(t))
        .collect::<Result<_>>()?;
    let d_a_to_b = interactive_labels(&mapped_b, policy_a, instance.view_a.as_ref())?;
    let mapped_a: Vec<Trajectory> = trajs_a
        .iter()
        .map(|t| instance.map_a_to_b.apply(t))
        .collect::<Result<_>>()?;
    let d_b_to_a = interactive_labels(&mapped_a, policy_b, instance.view_b.as_ref())?;
    Ok((d_a_to_b, d_b_to_a))
}

/// Re-renders interactive labels as supervised steps for the receiving view.
pub fn labels_to_demos(
    labels: &[LabeledState],
    receiver: &dyn ViewHandle,
) -> Result<Vec<DemoStep>> {
    labels
        .iter()
        .map(|label| {
            let features = receiver.featurize(&label.state).ok_or_else(|| {
                CoreError::InvalidParameter(format!(
                    "state {} is not featurizable in the receiving view",
                    label.state
                ))
            })?;
            Ok(DemoStep::Categorical {
                features,
                action: label.action,
                target: Some(label.distribution.clone()),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CopierConfig {
    pub iterations: usize,
    /// Rollouts per iteration on view A (m) and view B (n).
    pub rollouts_a: usize,
    pub rollouts_b: usize,
    pub update_a: UpdateConfig,
    pub update_b: UpdateConfig,
    pub exchange_mode: ExchangeMode,
    pub seed: u64,
    /// Compute per-iteration improvement diagnostics.
    pub diagnostics: bool,
}

impl CopierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(CoreError::InvalidParameter("iterations must be at least 1".into()));
        }
        if self.rollouts_a == 0 || self.rollouts_b == 0 {
            return Err(CoreError::InvalidParameter(
                "each view needs at least one rollout per iteration".into(),
            ));
        }
        self.update_a.validate()?;
        self.update_b.validate()
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub instance_id: String,
    pub eta_hat_a: Option<f64>,
    pub eta_hat_b: Option<f64>,
    pub flow: ExchangeFlow,
    pub demos_for_a: usize,
    pub demos_for_b: usize,
    pub dropped: usize,
    pub diagnostics: Option<ImprovementDiagnostics>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub records: Vec<IterationRecord>,
}

fn rollout_batch(
    view: &dyn ViewHandle,
    policy: &PolicyParams,
    count: usize,
    run_seed: u64,
    label: &str,
) -> Result<Vec<Rollout>> {
    (0..count)
        .map(|j| {
            let mut env = view.build();
            sample_trajectory(policy, env.as_mut(), derive_seed(run_seed, &format!("{label}/{j}")))
        })
        .collect()
}

fn demo_steps_for(view: &dyn ViewHandle, demos: &[Trajectory]) -> Result<Vec<DemoStep>> {
    let mut out = Vec::new();
    for demo in demos {
        out.extend(view.demo_steps(demo)?);
    }
    Ok(out)
}

/// Cross-view JS material for one direction: the source policy's occupancy
/// mapped into the target view, compared with the target policy at every
/// mapped state. In shared-token instances the source distribution is
/// evaluated analytically (the normalized expected mapped occupancy of an
/// identity mapping is the policy's own distribution); otherwise it is the
/// sampled mapped-occupancy estimate.
fn beta_evals(
    source_trajs: &[Trajectory],
    source_view: &dyn ViewHandle,
    source_policy: &PolicyParams,
    mapping: &crate::mdp::ViewMapping,
    target_view: &dyn ViewHandle,
    target_policy: &PolicyParams,
    gamma_target: f64,
) -> Result<Vec<MappedStateEval>> {
    let mut mapped = Vec::new();
    for traj in source_trajs {
        match mapping.apply(traj) {
            Ok(m) => mapped.push(m),
            Err(CoreError::IncompleteTrajectory(_)) | Err(CoreError::MappingFailed(_)) => {}
            Err(other) => return Err(other),
        }
    }
    if mapped.is_empty() {
        return Ok(Vec::new());
    }
    let shared_tokens = mapped
        .iter()
        .flat_map(|t| t.states().next())
        .all(|s| source_view.featurize(s).is_some());
    let occupancy = if shared_tokens {
        None
    } else {
        Some(estimate_occupancy(&mapped, gamma_target)?)
    };

    let mut evals = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for traj in &mapped {
        let decisions = target_view.replay_decisions(traj)?;
        for (step, decision) in traj.steps.iter().zip(decisions) {
            if !seen.insert(step.state.clone()) {
                continue;
            }
            let dist = target_policy.decision_distribution(&decision)?;
            let second: Vec<(ActionToken, f64)> = (0..decision.num_actions())
                .map(|i| (decision.action_at(i), dist.probs[i]))
                .collect();
            let first: Vec<(ActionToken, f64)> = match &occupancy {
                Some(occ) => occ.action_distribution_at(&step.state),
                None => {
                    let feats = source_view.featurize(&step.state).expect("checked above");
                    let d = source_policy.action_distribution(&feats)?;
                    d.probs
                        .iter()
                        .enumerate()
                        .map(|(i, p)| (ActionToken(i as u64), *p))
                        .collect()
                }
            };
            evals.push(MappedStateEval {
                state: step.state.clone(),
                first,
                second,
            });
        }
    }
    Ok(evals)
}

fn abs_advantages(rollouts: &[Rollout], gamma: f64) -> Result<Vec<f64>> {
    if rollouts.iter().all(|r| r.steps.is_empty()) {
        return Ok(Vec::new());
    }
    let baseline = fit_linear_baseline(rollouts, gamma)?;
    let mut out = Vec::new();
    for r in rollouts {
        for (step, g) in r.steps.iter().zip(returns_to_go(r, gamma)) {
            out.push((g - baseline.predict(&step.state_features)).abs());
        }
    }
    Ok(out)
}

fn kl_pairs(
    rollouts: &[Rollout],
    old: &PolicyParams,
    new: &PolicyParams,
) -> Result<Vec<(ActionDistribution, ActionDistribution)>> {
    let mut out = Vec::new();
    for r in rollouts {
        for step in &r.steps {
            out.push((
                old.decision_distribution(&step.decision)?,
                new.decision_distribution(&step.decision)?,
            ));
        }
    }
    Ok(out)
}

fn trajectories(rollouts: &[Rollout]) -> Vec<Trajectory> {
    rollouts.iter().map(|r| r.trajectory.clone()).collect()
}

/// Runs the co-training loop for `config.iterations` iterations and returns
/// the final snapshots plus the per-iteration history. Reproducible given
/// the seed.
pub fn copier_train(
    instances: &[TwoViewInstance],
    policy_a: &PolicyParams,
    policy_b: &PolicyParams,
    config: &CopierConfig,
) -> Result<(PolicyParams, PolicyParams, TrainHistory)> {
    config.validate()?;
    if instances.is_empty() {
        return Err(CoreError::EmptyInput("training needs at least one instance"));
    }
    let mut pol_a = policy_a.clone();
    let mut pol_b = policy_b.clone();
    let mut history = TrainHistory::default();

    for iter in 0..config.iterations {
        let pick = stream_rng(config.seed, &format!("train/iter{iter}/instance"))
            .gen_range(0..instances.len());
        let instance = &instances[pick];
        let gamma_a = instance.view_a.spec().gamma;
        let gamma_b = instance.view_b.spec().gamma;

        let rollouts_a = rollout_batch(
            instance.view_a.as_ref(),
            &pol_a,
            config.rollouts_a,
            config.seed,
            &format!("train/iter{iter}/rollout/A"),
        )?;
        let rollouts_b = rollout_batch(
            instance.view_b.as_ref(),
            &pol_b,
            config.rollouts_b,
            config.seed,
            &format!("train/iter{iter}/rollout/B"),
        )?;
        let trajs_a = trajectories(&rollouts_a);
        let trajs_b = trajectories(&rollouts_b);

        let (demos_for_a, demos_for_b, eta_a, eta_b, flow, dropped) = match config.exchange_mode {
            ExchangeMode::General => {
                let ex = exchange_general(&trajs_a, &trajs_b, instance)?;
                let for_b = demo_steps_for(instance.view_b.as_ref(), &ex.demos_a_to_b)?;
                let for_a = demo_steps_for(instance.view_a.as_ref(), &ex.demos_b_to_a)?;
                let flow = match ex.direction {
                    MapDirection::AToB if !ex.demos_a_to_b.is_empty() => ExchangeFlow::AToB,
                    MapDirection::BToA if !ex.demos_b_to_a.is_empty() => ExchangeFlow::BToA,
                    _ => ExchangeFlow::None,
                };
                (for_a, for_b, ex.eta_hat_a, ex.eta_hat_b, flow, ex.dropped)
            }
            ExchangeMode::SharedAction => {
                let (d_a_to_b, d_b_to_a) =
                    exchange_special(&trajs_a, &trajs_b, &pol_a, &pol_b, instance)?;
                let for_b = labels_to_demos(&d_a_to_b, instance.view_b.as_ref())?;
                let for_a = labels_to_demos(&d_b_to_a, instance.view_a.as_ref())?;
                let flow = if for_a.is_empty() && for_b.is_empty() {
                    ExchangeFlow::None
                } else {
                    ExchangeFlow::Both
                };
                (
                    for_a,
                    for_b,
                    mean_total_reward(&trajs_a),
                    mean_total_reward(&trajs_b),
                    flow,
                    0,
                )
            }
        };

        let mut packet = InstanceDiagnostics {
            instance_id: instance.id.clone(),
            eta_hat_a: eta_a,
            eta_hat_b: eta_b,
            ..InstanceDiagnostics::default()
        };
        if config.diagnostics {
            packet.js_a_in_b = beta_evals(
                &trajs_a,
                instance.view_a.as_ref(),
                &pol_a,
                &instance.map_a_to_b,
                instance.view_b.as_ref(),
                &pol_b,
                gamma_b,
            )?;
            packet.js_b_in_a = beta_evals(
                &trajs_b,
                instance.view_b.as_ref(),
                &pol_b,
                &instance.map_b_to_a,
                instance.view_a.as_ref(),
                &pol_a,
                gamma_a,
            )?;
            packet.abs_advantages_a = abs_advantages(&rollouts_a, gamma_a)?;
            packet.abs_advantages_b = abs_advantages(&rollouts_b, gamma_b)?;
        }

        let new_a = copier_update(&pol_a, &rollouts_a, &demos_for_a, &config.update_a)?;
        let new_b = copier_update(&pol_b, &rollouts_b, &demos_for_b, &config.update_b)?;

        let diagnostics = if config.diagnostics {
            packet.kl_steps_a = kl_pairs(&rollouts_a, &pol_a, &new_a)?;
            packet.kl_steps_b = kl_pairs(&rollouts_b, &pol_b, &new_b)?;
            Some(improvement_diagnostics(&[packet], gamma_a, gamma_b)?)
        } else {
            None
        };

        history.records.push(IterationRecord {
            iteration: iter,
            instance_id: instance.id.clone(),
            eta_hat_a: Some(eta_a),
            eta_hat_b: Some(eta_b),
            flow,
            demos_for_a: demos_for_a.len(),
            demos_for_b: demos_for_b.len(),
            dropped,
            diagnostics,
        });
        pol_a = new_a;
        pol_b = new_b;
    }
    Ok((pol_a, pol_b, history))
}

/// Single-view baseline: the same loop with no exchange.
pub fn single_view_train(
    view: ViewId,
    instances: &[TwoViewInstance],
    policy: &PolicyParams,
    config: &CopierConfig,
) -> Result<(PolicyParams, TrainHistory)> {
    config.validate()?;
    if instances.is_empty() {
        return Err(CoreError::EmptyInput("training needs at least one instance"));
    }
    let (count, update) = match view {
        ViewId::A => (config.rollouts_a, &config.update_a),
        ViewId::B => (config.rollouts_b, &config.update_b),
    };
    let mut pol = policy.clone();
    let mut history = TrainHistory::default();
    for iter in 0..config.iterations {
        let pick = stream_rng(config.seed, &format!("train/iter{iter}/instance"))
            .gen_range(0..instances.len());
        let instance = &instances[pick];
        let handle = instance.view(view);
        let rollouts = rollout_batch(
            handle,
            &pol,
            count,
            config.seed,
            &format!("train/iter{iter}/rollout/{view}"),
        )?;
        let eta = mean_total_reward(&trajectories(&rollouts));
        pol = copier_update(&pol, &rollouts, &[], update)?;
        history.records.push(IterationRecord {
            iteration: iter,
            instance_id: instance.id.clone(),
            eta_hat_a: (view == ViewId::A).then_some(eta),
            eta_hat_b: (view == ViewId::B).then_some(eta),
            flow: ExchangeFlow::None,
            demos_for_a: 0,
            demos_for_b: 0,
            dropped: 0,
            diagnostics: None,
        });
    }
    Ok((pol, history))
}

/// Outcome of the final evaluation rule on one instance.
#[derive(Debug, Clone)]
pub struct FinalEvaluation {
    pub best: Trajectory,
    pub source: ViewId,
    /// Best undiscounted total per view across the evaluation seeds.
    pub best_a: f64,
    pub best_b: f64,
}

/// Runs both policies on the instance (one rollout per seed per view) and
/// returns the trajectory with the higher total reward; ties go to view A.
pub fn copier_final(
    policy_a: &PolicyParams,
    policy_b: &PolicyParams,
    instance: &TwoViewInstance,
    seeds: &[u64],
) -> Result<FinalEvaluation> {
    if seeds.is_empty() {
        return Err(CoreError::EmptyInput("final evaluation needs at least one seed"));
    }
    let best_of = |view: &dyn ViewHandle, policy: &PolicyParams| -> Result<(Trajectory, f64)> {
        let mut best: Option<(Trajectory, f64)> = None;
        for &seed in seeds {
            let mut env = view.build();
            let rollout = sample_trajectory(policy, env.as_mut(), seed)?;
            let total = rollout.trajectory.total_reward();
            if best.as_ref().is_none_or(|(_, b)| total > *b) {
                best = Some((rollout.trajectory, total));
            }
        }
        Ok(best.expect("at least one seed"))
    };
    let (traj_a, best_a) = best_of(instance.view_a.as_ref(), policy_a)?;
    let (traj_b, best_b) = best_of(instance.view_b.as_ref(), policy_b)?;
    let (best, source) = if best_b > best_a {
        (traj_b, ViewId::B)
    } else {
        (traj_a, ViewId::A)
    };
    Ok(FinalEvaluation {
        best,
        source,
        best_a,
        best_b,
    })
}
