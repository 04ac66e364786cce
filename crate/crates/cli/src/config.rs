//! Flat `key = value` run configuration.
//!
//! File values override the built-in defaults; command-line flags override
//! the file. `--print-config` emits the fully resolved configuration in the
//! same format, and the training commands echo it into the run directory so
//! every run is auditable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use cotrain_core::env::grid::GridConfig;
use cotrain_core::learner::{Surrogate, UpdateConfig, UpdateMode};
use cotrain_core::policy::PolicyArch;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Mvc,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Copier,
    SingleA,
    SingleB,
}

impl RunMode {
    pub fn tag(&self) -> &'static str {
        match self {
            RunMode::Copier => "copier",
            RunMode::SingleA => "single-A",
            RunMode::SingleB => "single-B",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "copier" => RunMode::Copier,
            "single-A" => RunMode::SingleA,
            "single-B" => RunMode::SingleB,
            other => bail!("unknown mode {other:?} (expected copier|single-A|single-B)"),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ViewUpdateSettings {
    pub mode: UpdateMode,
    pub lambda: f64,
    pub learning_rate: f64,
    pub surrogate: Surrogate,
}

impl ViewUpdateSettings {
    pub fn to_update_config(&self, gamma: f64) -> UpdateConfig {
        UpdateConfig {
            mode: self.mode,
            lambda: self.lambda,
            learning_rate: self.learning_rate,
            gamma,
            surrogate: self.surrogate,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub env: EnvKind,
    pub seed: u64,
    pub instances_dir: String,
    pub out_dir: String,
    pub mode: RunMode,

    pub gen_count: usize,
    pub mvc_n_min: usize,
    pub mvc_n_max: usize,
    pub mvc_edge_p: f64,
    /// 0 means unlimited.
    pub mvc_node_budget: usize,

    pub grid: GridConfig,

    pub policy_arch: PolicyArch,

    pub iterations: usize,
    pub rollouts_a: usize,
    pub rollouts_b: usize,
    pub diagnostics: bool,
    pub update_a: ViewUpdateSettings,
    pub update_b: ViewUpdateSettings,

    pub eval_final_rollouts: usize,
    pub eval_bound_rollouts: usize,
    pub sigma: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvKind::Mvc,
            seed: 0,
            instances_dir: "instances".into(),
            out_dir: "run".into(),
            mode: RunMode::Copier,
            gen_count: 12,
            mvc_n_min: 25,
            mvc_n_max: 40,
            mvc_edge_p: 0.25,
            mvc_node_budget: 500,
            // Masks and horizon stay empty/zero here and are derived from
            // the final shape in `finalize`, unless set explicitly.
            grid: GridConfig {
                mask_a: Vec::new(),
                mask_b: Vec::new(),
                horizon_cap: 0,
                ..GridConfig::default()
            },
            policy_arch: PolicyArch::Linear,
            iterations: 40,
            rollouts_a: 4,
            rollouts_b: 4,
            diagnostics: true,
            update_a: ViewUpdateSettings {
                mode: UpdateMode::RlWithIl,
                lambda: 1.0,
                learning_rate: 0.1,
                surrogate: Surrogate::Nll,
            },
            update_b: ViewUpdateSettings {
                mode: UpdateMode::IlOnly,
                lambda: 1.0,
                learning_rate: 0.1,
                surrogate: Surrogate::Nll,
            },
            eval_final_rollouts: 3,
            eval_bound_rollouts: 300,
            sigma: 0.05,
        }
    }
}

fn parse_mask(value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| s.trim().parse::<usize>().context("mask index"))
        .collect()
}

fn mask_string(mask: &[usize]) -> String {
    mask.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let ctx = || format!("key {key:?} value {v:?}");
        match key {
            "env" => {
                self.env = match v {
                    "mvc" => EnvKind::Mvc,
                    "grid" => EnvKind::Grid,
                    other => bail!("unknown env {other:?} (expected mvc|grid)"),
                }
            }
            "seed" => self.seed = v.parse().with_context(ctx)?,
            "instances_dir" => self.instances_dir = v.to_string(),
            "out_dir" => self.out_dir = v.to_string(),
            "mode" => self.mode = RunMode::parse(v)?,
            "gen.count" => self.gen_count = v.parse().with_context(ctx)?,
            "gen.mvc.n_min" => self.mvc_n_min = v.parse().with_context(ctx)?,
            "gen.mvc.n_max" => self.mvc_n_max = v.parse().with_context(ctx)?,
            "gen.mvc.edge_p" => self.mvc_edge_p = v.parse().with_context(ctx)?,
            "mvc.node_budget" => self.mvc_node_budget = v.parse().with_context(ctx)?,
            "grid.width" => self.grid.width = v.parse().with_context(ctx)?,
            "grid.height" => self.grid.height = v.parse().with_context(ctx)?,
            "grid.start_x" => self.grid.start.0 = v.parse().with_context(ctx)?,
            "grid.start_y" => self.grid.start.1 = v.parse().with_context(ctx)?,
            "grid.goal_x" => self.grid.goal.0 = v.parse().with_context(ctx)?,
            "grid.goal_y" => self.grid.goal.1 = v.parse().with_context(ctx)?,
            "grid.step_reward" => self.grid.step_reward = v.parse().with_context(ctx)?,
            "grid.goal_reward" => self.grid.goal_reward = v.parse().with_context(ctx)?,
            "grid.gamma" => self.grid.gamma = v.parse().with_context(ctx)?,
            "grid.noise" => self.grid.noise = v.parse().with_context(ctx)?,
            "grid.horizon_cap" => self.grid.horizon_cap = v.parse().with_context(ctx)?,
            "grid.mask_a" => self.grid.mask_a = parse_mask(v)?,
            "grid.mask_b" => self.grid.mask_b = parse_mask(v)?,
            "policy.arch" => {
                self.policy_arch = match v {
                    "tabular" => PolicyArch::Tabular,
                    "linear" => PolicyArch::Linear,
                    "mlp" => PolicyArch::Mlp { hidden: 16 },
                    other => bail!("unknown policy arch {other:?}"),
                }
            }
            "policy.hidden" => {
                let hidden = v.parse().with_context(ctx)?;
                if let PolicyArch::Mlp { .. } = self.policy_arch {
                    self.policy_arch = PolicyArch::Mlp { hidden };
                } else {
                    bail!("policy.hidden only applies after policy.arch = mlp");
                }
            }
            "train.iterations" => self.iterations = v.parse().with_context(ctx)?,
            "train.rollouts_a" => self.rollouts_a = v.parse().with_context(ctx)?,
            "train.rollouts_b" => self.rollouts_b = v.parse().with_context(ctx)?,
            "train.diagnostics" => self.diagnostics = v.parse().with_context(ctx)?,
            "train.a.mode" | "train.b.mode" => {
                let mode = match v {
                    "rl_with_il" => UpdateMode::RlWithIl,
                    "il_only" => UpdateMode::IlOnly,
                    other => bail!("unknown update mode {other:?}"),
                };
                if key == "train.a.mode" {
                    self.update_a.mode = mode;
                } else {
                    self.update_b.mode = mode;
                }
            }
            "train.a.lambda" => self.update_a.lambda = v.parse().with_context(ctx)?,
            "train.b.lambda" => self.update_b.lambda = v.parse().with_context(ctx)?,
            "train.a.lr" => self.update_a.learning_rate = v.parse().with_context(ctx)?,
            "train.b.lr" => self.update_b.learning_rate = v.parse().with_context(ctx)?,
            "train.a.surrogate" | "train.b.surrogate" => {
                let surrogate = match v {
                    "nll" => Surrogate::Nll,
                    "kl" => Surrogate::MeanKl,
                    other => bail!("unknown surrogate {other:?}"),
                };
                if key == "train.a.surrogate" {
                    self.update_a.surrogate = surrogate;
                } else {
                    self.update_b.surrogate = surrogate;
                }
            }
            "eval.final_rollouts" => self.eval_final_rollouts = v.parse().with_context(ctx)?,
            "eval.bound_rollouts" => self.eval_bound_rollouts = v.parse().with_context(ctx)?,
            "sigma" => self.sigma = v.parse().with_context(ctx)?,
            other => bail!("unknown configuration key {other:?}"),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", idx + 1))?;
            self.set(key.trim(), value)
                .with_context(|| format!("line {}", idx + 1))?;
        }
        Ok(())
    }

    /// Fills derived values (grid masks, horizon) and validates.
    pub fn finalize(&mut self) -> Result<()> {
        let derived = self.grid.clone().with_derived_masks();
        if self.grid.mask_a.is_empty() {
            self.grid.mask_a = derived.mask_a;
        }
        if self.grid.mask_b.is_empty() {
            self.grid.mask_b = derived.mask_b;
        }
        if self.grid.horizon_cap == 0 {
            self.grid.horizon_cap = derived.horizon_cap;
        }
        if self.env == EnvKind::Grid {
            self.grid.validate()?;
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            bail!("sigma must be in (0, 1)");
        }
        if self.mvc_n_min == 0 || self.mvc_n_min > self.mvc_n_max {
            bail!("gen.mvc.n_min must be in [1, n_max]");
        }
        if !(0.0..=1.0).contains(&self.mvc_edge_p) {
            bail!("gen.mvc.edge_p must be in [0, 1]");
        }
        Ok(())
    }

    pub fn node_budget(&self) -> Option<usize> {
        (self.mvc_node_budget > 0).then_some(self.mvc_node_budget)
    }

    pub fn update_config_a(&self, gamma: f64) -> UpdateConfig {
        self.update_a.to_update_config(gamma)
    }

    pub fn update_config_b(&self, gamma: f64) -> UpdateConfig {
        self.update_b.to_update_config(gamma)
    }

    pub fn run_id(&self) -> String {
        let env = match self.env {
            EnvKind::Mvc => "mvc",
            EnvKind::Grid => "grid",
        };
        format!("{env}-{}-s{}", self.mode.tag(), self.seed)
    }

    /// Fully resolved configuration in the input format, deterministic order.
    pub fn render(&self) -> String {
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert(
            "env",
            match self.env {
                EnvKind::Mvc => "mvc".into(),
                EnvKind::Grid => "grid".into(),
            },
        );
        kv.insert("seed", self.seed.to_string());
        kv.insert("instances_dir", self.instances_dir.clone());
        kv.insert("out_dir", self.out_dir.clone());
        kv.insert("mode", self.mode.tag().into());
        kv.insert("gen.count", self.gen_count.to_string());
        kv.insert("gen.mvc.n_min", self.mvc_n_min.to_string());
        kv.insert("gen.mvc.n_max", self.mvc_n_max.to_string());
        kv.insert("gen.mvc.edge_p", self.mvc_edge_p.to_string());
        kv.insert("mvc.node_budget", self.mvc_node_budget.to_string());
        kv.insert("grid.width", self.grid.width.to_string());
        kv.insert("grid.height", self.grid.height.to_string());
        kv.insert("grid.start_x", self.grid.start.0.to_string());
        kv.insert("grid.start_y", self.grid.start.1.to_string());
        kv.insert("grid.goal_x", self.grid.goal.0.to_string());
        kv.insert("grid.goal_y", self.grid.goal.1.to_string());
        kv.insert("grid.step_reward", self.grid.step_reward.to_string());
        kv.insert("grid.goal_reward", self.grid.goal_reward.to_string());
        kv.insert("grid.gamma", self.grid.gamma.to_string());
        kv.insert("grid.noise", self.grid.noise.to_string());
        kv.insert("grid.horizon_cap", self.grid.horizon_cap.to_string());
        kv.insert("grid.mask_a", mask_string(&self.grid.mask_a));
        kv.insert("grid.mask_b", mask_string(&self.grid.mask_b));
        kv.insert("policy.arch", self.policy_arch.tag().into());
        if let PolicyArch::Mlp { hidden } = self.policy_arch {
            kv.insert("policy.hidden", hidden.to_string());
        }
        kv.insert("train.iterations", self.iterations.to_string());
        kv.insert("train.rollouts_a", self.rollouts_a.to_string());
        kv.insert("train.rollouts_b", self.rollouts_b.to_string());
        kv.insert("train.diagnostics", self.diagnostics.to_string());
        for (prefix, u) in [("train.a", &self.update_a), ("train.b", &self.update_b)] {
            let mode = match u.mode {
                UpdateMode::RlWithIl => "rl_with_il",
                UpdateMode::IlOnly => "il_only",
            };
            let surrogate = match u.surrogate {
                Surrogate::Nll => "nll",
                Surrogate::MeanKl => "kl",
            };
            kv.insert(
                match prefix {
                    "train.a" => "train.a.mode",
                    _ => "train.b.mode",
                },
                mode.into(),
            );
            kv.insert(
                match prefix {
                    "train.a" => "train.a.lambda",
                    _ => "train.b.lambda",
                },
                u.lambda.to_string(),
            );
            kv.insert(
                match prefix {
                    "train.a" => "train.a.lr",
                    _ => "train.b.lr",
                },
                u.learning_rate.to_string(),
            );
            kv.insert(
                match prefix {
                    "train.a" => "train.a.surrogate",
                    _ => "train.b.surrogate",
                },
                surrogate.into(),
            );
        }
        kv.insert("eval.final_rollouts", self.eval_final_rollouts.to_string());
        kv.insert("eval.bound_rollouts", self.eval_bound_rollouts.to_string());
        kv.insert("sigma", self.sigma.to_string());

        let mut out = String::new();
        for (k, v) in kv {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Serializes one grid instance (the shared shape with its own start cell).
pub fn render_grid_instance(grid: &GridConfig) -> String {
    let mut out = String::new();
    let mut push = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    push("grid.width", grid.width.to_string());
    push("grid.height", grid.height.to_string());
    push("grid.start_x", grid.start.0.to_string());
    push("grid.start_y", grid.start.1.to_string());
    push("grid.goal_x", grid.goal.0.to_string());
    push("grid.goal_y", grid.goal.1.to_string());
    push("grid.step_reward", grid.step_reward.to_string());
    push("grid.goal_reward", grid.goal_reward.to_string());
    push("grid.gamma", grid.gamma.to_string());
    push("grid.noise", grid.noise.to_string());
    push("grid.horizon_cap", grid.horizon_cap.to_string());
    push("grid.mask_a", mask_string(&grid.mask_a));
    push("grid.mask_b", mask_string(&grid.mask_b));
    out
}

/// Reads a grid instance file back into a config.
pub fn parse_grid_instance(text: &str, base: &GridConfig) -> Result<GridConfig> {
    let mut cfg = RunConfig {
        grid: base.clone(),
        ..RunConfig::default()
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key = value", idx + 1))?;
        cfg.set(key.trim(), value)
            .with_context(|| format!("line {}", idx + 1))?;
    }
    cfg.grid.validate()?;
    Ok(cfg.grid)
}
