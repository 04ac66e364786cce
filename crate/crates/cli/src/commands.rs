//! The four subcommands: instance generation, training, evaluation, and the
//! run-directory completeness check.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::Rng;

use cotrain_core::copier::{
    copier_final, copier_train, single_view_train, CopierConfig, ExchangeMode, TrainHistory,
};
use cotrain_core::env::grid::{make_two_view_grid, value_iteration, NUM_ACTIONS};
use cotrain_core::env::mvc::{generate_er_graph, mvc_instance, Graph, NODE_FEATURE_DIM};
use cotrain_core::policy::{rollout_with, sample_trajectory, ActionChoice, PolicyParams};
use cotrain_core::seed::{derive_seed, stream_rng};
use cotrain_core::theory::{disagreement_counts, measure_policy_error, pac_disagreement_bound};
use cotrain_core::{StateToken, Trajectory, TwoViewInstance, ViewId};

use crate::config::{parse_grid_instance, render_grid_instance, EnvKind, RunConfig, RunMode};
use crate::csv::{
    cell, cell_bool, CsvFile, BOUND_HEADER, BOUND_SCHEMA, DIAGNOSTICS_HEADER, DIAGNOSTICS_SCHEMA,
    EVALUATION_HEADER, EVALUATION_SCHEMA, HISTORY_HEADER, HISTORY_SCHEMA,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    fn tag(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "val",
            Split::Test => "test",
        }
    }
}

/// 50/20/30 split with the remainder going to training.
fn split_sizes(count: usize) -> (usize, usize, usize) {
    let val = count * 20 / 100;
    let test = count * 30 / 100;
    (count - val - test, val, test)
}

fn instance_file_name(cfg: &RunConfig, index: usize) -> String {
    match cfg.env {
        EnvKind::Mvc => format!("inst_{index:04}.graph"),
        EnvKind::Grid => format!("inst_{index:04}.grid"),
    }
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let dir = PathBuf::from(&cfg.instances_dir);
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating instance directory {}", dir.display()))?;
    let mut manifest = String::new();
    let (n_train, n_val, _n_test) = split_sizes(cfg.gen_count);
    for i in 0..cfg.gen_count {
        let name = instance_file_name(cfg, i);
        match cfg.env {
            EnvKind::Mvc => {
                let n = stream_rng(cfg.seed, &format!("gen/{i}/n"))
                    .gen_range(cfg.mvc_n_min..=cfg.mvc_n_max);
                let graph =
                    generate_er_graph(n, cfg.mvc_edge_p, derive_seed(cfg.seed, &format!("gen/{i}/graph")))?;
                graph.write_file(&dir.join(&name))?;
            }
            EnvKind::Grid => {
                let mut grid = cfg.grid.clone();
                // One instance per start cell, drawn without the goal.
                let mut rng = stream_rng(cfg.seed, &format!("gen/{i}/start"));
                loop {
                    let start = (
                        rng.gen_range(0..grid.width),
                        rng.gen_range(0..grid.height),
                    );
                    if start != grid.goal {
                        grid.start = start;
                        break;
                    }
                }
                std::fs::write(dir.join(&name), render_grid_instance(&grid))?;
            }
        }
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
        manifest.push_str(&format!("{name}\t{}\n", split.tag()));
    }
    std::fs::write(dir.join("manifest.txt"), manifest)?;
    println!(
        "generated {} instances into {}",
        cfg.gen_count,
        dir.display()
    );
    Ok(())
}

fn read_manifest(dir: &Path) -> Result<Vec<(String, Split)>> {
    let path = dir.join("manifest.txt");
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading {} (run `generate` first)", path.display()))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (name, split) = line
            .split_once('\t')
            .with_context(|| format!("manifest line {}", idx + 1))?;
        let split = match split.trim() {
            "train" => Split::Train,
            "val" => Split::Validation,
            "test" => Split::Test,
            other => bail!("manifest line {}: unknown split {other:?}", idx + 1),
        };
        out.push((name.to_string(), split));
    }
    Ok(out)
}

pub fn load_instances(cfg: &RunConfig, split: Split) -> Result<Vec<TwoViewInstance>> {
    let dir = PathBuf::from(&cfg.instances_dir);
    let mut instances = Vec::new();
    for (name, s) in read_manifest(&dir)? {
        if s != split {
            continue;
        }
        let id = name
            .rsplit_once('.')
            .map(|(stem, _)| stem.to_string())
            .unwrap_or_else(|| name.clone());
        let path = dir.join(&name);
        match cfg.env {
            EnvKind::Mvc => {
                let graph = Graph::read_file(&path)?;
                instances.push(mvc_instance(id, graph, cfg.node_budget()));
            }
            EnvKind::Grid => {
                let text = std::fs::read_to_string(&path)?;
                let grid = parse_grid_instance(&text, &cfg.grid)?;
                instances.push(make_two_view_grid(id, grid)?);
            }
        }
    }
    if instances.is_empty() {
        bail!(
            "no {} instances found in {}",
            split.tag(),
            dir.display()
        );
    }
    Ok(instances)
}

fn policy_shape(cfg: &RunConfig, view: ViewId) -> (usize, usize) {
    match cfg.env {
        EnvKind::Mvc => match view {
            ViewId::A => (3, 1),
            ViewId::B => (NODE_FEATURE_DIM, 1),
        },
        EnvKind::Grid => match view {
            ViewId::A => (cfg.grid.mask_a.len(), NUM_ACTIONS),
            ViewId::B => (cfg.grid.mask_b.len(), NUM_ACTIONS),
        },
    }
}

fn init_policy(cfg: &RunConfig, view: ViewId) -> PolicyParams {
    let (dim, actions) = policy_shape(cfg, view);
    let mut rng = stream_rng(cfg.seed, &format!("init/{view}"));
    PolicyParams::init_uniform(cfg.policy_arch, dim, actions, &mut rng)
}

fn env_gamma(cfg: &RunConfig) -> f64 {
    match cfg.env {
        EnvKind::Mvc => 1.0,
        EnvKind::Grid => cfg.grid.gamma,
    }
}

fn copier_config(cfg: &RunConfig) -> CopierConfig {
    let gamma = env_gamma(cfg);
    CopierConfig {
        iterations: cfg.iterations,
        rollouts_a: cfg.rollouts_a,
        rollouts_b: cfg.rollouts_b,
        update_a: cfg.update_config_a(gamma),
        update_b: cfg.update_config_b(gamma),
        exchange_mode: match cfg.env {
            EnvKind::Mvc => ExchangeMode::General,
            EnvKind::Grid => ExchangeMode::SharedAction,
        },
        seed: cfg.seed,
        diagnostics: cfg.diagnostics,
    }
}

fn checkpoint_path(out: &Path, view: ViewId) -> PathBuf {
    match view {
        ViewId::A => out.join("policy_a.ckpt"),
        ViewId::B => out.join("policy_b.ckpt"),
    }
}

fn write_history_csv(cfg: &RunConfig, history: &TrainHistory, out: &Path) -> Result<()> {
    let run_id = cfg.run_id();
    let mut file = CsvFile::new(HISTORY_SCHEMA, HISTORY_HEADER);
    for rec in &history.records {
        let mut row_for = |view: ViewId, eta: Option<f64>, demos: usize, beta: Option<f64>| {
            let (d1, d2) = rec
                .diagnostics
                .as_ref()
                .map(|d| (Some(d.delta_hat_1), Some(d.delta_hat_2)))
                .unwrap_or((None, None));
            file.push_row(&[
                run_id.clone(),
                rec.iteration.to_string(),
                rec.instance_id.clone(),
                view.to_string(),
                cell(eta),
                rec.flow.to_string(),
                demos.to_string(),
                rec.dropped.to_string(),
                cell(beta),
                cell(d1),
                cell(d2),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]);
        };
        if rec.eta_hat_a.is_some() {
            row_for(
                ViewId::A,
                rec.eta_hat_a,
                rec.demos_for_a,
                rec.diagnostics.as_ref().map(|d| d.beta_hat_a_d1),
            );
        }
        if rec.eta_hat_b.is_some() {
            row_for(
                ViewId::B,
                rec.eta_hat_b,
                rec.demos_for_b,
                rec.diagnostics.as_ref().map(|d| d.beta_hat_b_d2),
            );
        }
    }
    file.write(&out.join("history.csv"))?;
    Ok(())
}

fn write_diagnostics_csv(cfg: &RunConfig, history: &TrainHistory, out: &Path) -> Result<()> {
    let run_id = cfg.run_id();
    let mut file = CsvFile::new(DIAGNOSTICS_SCHEMA, DIAGNOSTICS_HEADER);
    for rec in &history.records {
        let Some(d) = &rec.diagnostics else { continue };
        file.push_row(&[
            run_id.clone(),
            rec.iteration.to_string(),
            rec.instance_id.clone(),
            cell(Some(d.alpha_hat_a)),
            cell(Some(d.alpha_hat_b)),
            cell(Some(d.beta_hat_a_d1)),
            cell(Some(d.beta_hat_b_d2)),
            cell(Some(d.delta_hat_1)),
            cell(Some(d.delta_hat_2)),
            cell(Some(d.eps_hat_a_d)),
            cell(Some(d.eps_hat_b_d)),
            cell(Some(d.eps_hat_a_d1)),
            cell(Some(d.eps_hat_b_d2)),
            cell_bool(Some(d.applicable)),
            cell(d.penalty_a()),
            cell(d.penalty_b()),
        ]);
    }
    file.write(&out.join("diagnostics.csv"))?;
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let out = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config_echo.txt"), cfg.render())?;
    let manifest_src = PathBuf::from(&cfg.instances_dir).join("manifest.txt");
    std::fs::copy(&manifest_src, out.join("manifest.txt"))
        .with_context(|| format!("copying {}", manifest_src.display()))?;

    let instances = load_instances(cfg, Split::Train)?;
    let train_cfg = copier_config(cfg);
    match cfg.mode {
        RunMode::Copier => {
            let init_a = init_policy(cfg, ViewId::A);
            let init_b = init_policy(cfg, ViewId::B);
            let (pol_a, pol_b, history) = copier_train(&instances, &init_a, &init_b, &train_cfg)?;
            pol_a.write_checkpoint(&checkpoint_path(&out, ViewId::A))?;
            pol_b.write_checkpoint(&checkpoint_path(&out, ViewId::B))?;
            write_history_csv(cfg, &history, &out)?;
            if cfg.diagnostics {
                write_diagnostics_csv(cfg, &history, &out)?;
            }
        }
        RunMode::SingleA | RunMode::SingleB => {
            let view = if cfg.mode == RunMode::SingleA {
                ViewId::A
            } else {
                ViewId::B
            };
            let init = init_policy(cfg, view);
            let (pol, history) = single_view_train(view, &instances, &init, &train_cfg)?;
            pol.write_checkpoint(&checkpoint_path(&out, view))?;
            write_history_csv(cfg, &history, &out)?;
        }
    }
    append_timing(&out, "train", start)?;
    println!("trained {} into {}", cfg.run_id(), out.display());
    Ok(())
}

fn append_timing(out: &Path, what: &str, start: Instant) -> Result<()> {
    use std::io::Write as _;
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out.join("timing.txt"))?;
    writeln!(f, "{what}_wall_seconds = {:.3}", start.elapsed().as_secs_f64())?;
    Ok(())
}

struct EvalRow {
    instance_id: String,
    reward_a: Option<f64>,
    reward_b: Option<f64>,
    reward_final: f64,
    final_view: String,
    epsilon_a: Option<f64>,
    b_max: Option<f64>,
    bound_valid: Option<bool>,
}

fn eval_seeds(cfg: &RunConfig, instance_id: &str) -> Vec<u64> {
    (0..cfg.eval_final_rollouts)
        .map(|j| derive_seed(cfg.seed, &format!("eval/final/{instance_id}/{j}")))
        .collect()
}

/// Greedy deterministic rollouts of one policy on one view.
fn greedy_rollouts(
    instance: &TwoViewInstance,
    view: ViewId,
    policy: &PolicyParams,
    count: usize,
    run_seed: u64,
) -> Result<Vec<Trajectory>> {
    (0..count)
        .map(|j| {
            let mut env = instance.view(view).build();
            let seed = derive_seed(run_seed, &format!("eval/bound/{}/{j}", instance.id));
            Ok(rollout_with(policy, env.as_mut(), seed, ActionChoice::Greedy)?.trajectory)
        })
        .collect()
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let out = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out)?;
    let instances = load_instances(cfg, Split::Test)?;
    let run_id = cfg.run_id();

    let load = |view: ViewId| -> Result<PolicyParams> {
        let path = checkpoint_path(&out, view);
        PolicyParams::read_checkpoint(&path)
            .with_context(|| format!("missing checkpoint {}", path.display()))
    };

    // Optimal-policy oracle for the grid's disagreement column.
    let table = match cfg.env {
        EnvKind::Grid => Some(value_iteration(&cfg.grid, 1e-10)?),
        EnvKind::Mvc => None,
    };

    let mut rows: Vec<EvalRow> = Vec::new();
    let mut bound_file = CsvFile::new(BOUND_SCHEMA, BOUND_HEADER);
    let mut wrote_bounds = false;

    match cfg.mode {
        RunMode::Copier => {
            let pol_a = load(ViewId::A)?;
            let pol_b = load(ViewId::B)?;
            for instance in &instances {
                let eval = copier_final(&pol_a, &pol_b, instance, &eval_seeds(cfg, &instance.id))?;
                let mut row = EvalRow {
                    instance_id: instance.id.clone(),
                    reward_a: Some(eval.best_a),
                    reward_b: Some(eval.best_b),
                    reward_final: eval.best.total_reward(),
                    final_view: eval.source.to_string(),
                    epsilon_a: None,
                    b_max: None,
                    bound_valid: None,
                };
                if let Some(table) = &table {
                    let trajs =
                        greedy_rollouts(instance, ViewId::A, &pol_a, cfg.eval_bound_rollouts, cfg.seed)?;
                    let mapped: cotrain_core::Result<Vec<Trajectory>> =
                        trajs.iter().map(|t| instance.map_a_to_b.apply(t)).collect();
                    let mapped = mapped?;
                    let argmax = |policy: &PolicyParams, view: ViewId| {
                        let policy = policy.clone();
                        let handle = instance.view(view);
                        move |token: &StateToken| -> cotrain_core::Result<usize> {
                            let feats = handle.featurize(token).ok_or_else(|| {
                                cotrain_core::CoreError::InvalidParameter(format!(
                                    "state {token} not featurizable"
                                ))
                            })?;
                            Ok(policy.action_distribution(&feats)?.greedy())
                        }
                    };
                    let stats = disagreement_counts(
                        &mapped,
                        NUM_ACTIONS,
                        argmax(&pol_a, ViewId::A),
                        argmax(&pol_b, ViewId::B),
                    )?;
                    let report = pac_disagreement_bound(
                        &stats,
                        pol_a.description_bits(),
                        pol_b.description_bits(),
                        cfg.sigma,
                    )?;
                    row.epsilon_a = Some(measure_policy_error(
                        &trajs,
                        argmax(&pol_a, ViewId::A),
                        |token| table.action_for(token),
                    )?);
                    row.b_max = report.max_b;
                    row.bound_valid = Some(report.all_defined_valid && !report.vacuous);
                    for ab in &report.per_action {
                        bound_file.push_row(&[
                            run_id.clone(),
                            instance.id.clone(),
                            ab.action.to_string(),
                            ab.n_b.to_string(),
                            cell(Some(ab.eps)),
                            cell(Some(ab.zeta)),
                            cell(Some(ab.b)),
                            cell_bool(Some(ab.defined)),
                            cell_bool(Some(ab.valid)),
                        ]);
                    }
                    wrote_bounds = true;
                }
                rows.push(row);
            }
        }
        RunMode::SingleA | RunMode::SingleB => {
            let view = if cfg.mode == RunMode::SingleA {
                ViewId::A
            } else {
                ViewId::B
            };
            let pol = load(view)?;
            for instance in &instances {
                let best = eval_seeds(cfg, &instance.id)
                    .iter()
                    .map(|&s| {
                        let mut env = instance.view(view).build();
                        Ok(sample_trajectory(&pol, env.as_mut(), s)?
                            .trajectory
                            .total_reward())
                    })
                    .collect::<Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max);
                let epsilon = match &table {
                    Some(table) => {
                        let trajs =
                            greedy_rollouts(instance, view, &pol, cfg.eval_bound_rollouts, cfg.seed)?;
                        let handle = instance.view(view);
                        let polc = pol.clone();
                        Some(measure_policy_error(
                            &trajs,
                            move |token| {
                                let feats = handle.featurize(token).ok_or_else(|| {
                                    cotrain_core::CoreError::InvalidParameter(format!(
                                        "state {token} not featurizable"
                                    ))
                                })?;
                                Ok(polc.action_distribution(&feats)?.greedy())
                            },
                            |token| table.action_for(token),
                        )?)
                    }
                    None => None,
                };
                rows.push(EvalRow {
                    instance_id: instance.id.clone(),
                    reward_a: (view == ViewId::A).then_some(best),
                    reward_b: (view == ViewId::B).then_some(best),
                    reward_final: best,
                    final_view: view.to_string(),
                    epsilon_a: epsilon,
                    b_max: None,
                    bound_valid: None,
                });
            }
        }
    }

    // Summary row of column means.
    let mean_of = |values: Vec<f64>| {
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    let summary = EvalRow {
        instance_id: "mean".into(),
        reward_a: mean_of(rows.iter().filter_map(|r| r.reward_a).collect()),
        reward_b: mean_of(rows.iter().filter_map(|r| r.reward_b).collect()),
        reward_final: rows.iter().map(|r| r.reward_final).sum::<f64>() / rows.len().max(1) as f64,
        final_view: String::new(),
        epsilon_a: mean_of(rows.iter().filter_map(|r| r.epsilon_a).collect()),
        b_max: mean_of(rows.iter().filter_map(|r| r.b_max).collect()),
        bound_valid: None,
    };

    let mut file = CsvFile::new(EVALUATION_SCHEMA, EVALUATION_HEADER);
    for row in rows.iter().chain(std::iter::once(&summary)) {
        file.push_row(&[
            run_id.clone(),
            row.instance_id.clone(),
            cell(row.reward_a),
            cell(row.reward_b),
            cell(Some(row.reward_final)),
            row.final_view.clone(),
            cell(row.epsilon_a),
            cell(row.b_max),
            cell_bool(row.bound_valid),
        ]);
    }
    file.write(&out.join("evaluation.csv"))?;
    if wrote_bounds {
        bound_file.write(&out.join("bound_report.csv"))?;
    }
    append_timing(&out, "evaluate", start)?;
    println!("evaluated {} into {}", run_id, out.display());
    Ok(())
}

/// Completeness check: exit code 0 when the run directory holds the config
/// echo, manifest, history and evaluation CSVs, and at least one checkpoint.
pub fn cmd_check(cfg: &RunConfig) -> Result<bool> {
    let out = PathBuf::from(&cfg.out_dir);
    let mut missing = Vec::new();
    for name in ["config_echo.txt", "manifest.txt", "history.csv", "evaluation.csv"] {
        if !out.join(name).is_file() {
            missing.push(name.to_string());
        }
    }
    let has_checkpoint =
        out.join("policy_a.ckpt").is_file() || out.join("policy_b.ckpt").is_file();
    if !has_checkpoint {
        missing.push("policy checkpoint".to_string());
    }
    if missing.is_empty() {
        println!("run directory {} is complete", out.display());
        Ok(true)
    } else {
        println!(
            "run directory {} is missing: {}",
            out.display(),
            missing.join(", ")
        );
        Ok(false)
    }
}
