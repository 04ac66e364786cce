//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with its runtime. Criterion 9 (byte-identical command output) lives in
//! the command-line crate's tests, next to the binary it exercises.

use std::time::Instant;

use cotrain_core::copier::{
    copier_final, copier_train, exchange_general, single_view_train, CopierConfig, ExchangeMode,
};
use cotrain_core::env::grid::{
    make_two_view_grid, optimal_gap_u, value_iteration, GridConfig, ValueTable, NUM_ACTIONS,
};
use cotrain_core::env::mvc::{
    build_ilp, generate_er_graph, mvc_instance, BnBTree, Graph, NODE_FEATURE_DIM,
};
use cotrain_core::learner::{
    behavior_cloning_loss, copier_update, Surrogate, UpdateConfig, UpdateMode,
};
use cotrain_core::lp::solve_lp;
use cotrain_core::mdp::{DemoStep, TwoViewInstance};
use cotrain_core::policy::{
    rollout_with, sample_trajectory, ActionChoice, PolicyArch, PolicyParams,
};
use cotrain_core::seed::derive_seed;
use cotrain_core::theory::{
    disagreement_counts, measure_policy_error, pac_disagreement_bound, performance_gap_bound,
    DisagreementStats, GapBoundParams,
};
use cotrain_core::ViewId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(criterion: usize, name: &str, start: Instant) {
    println!(
        "acceptance criterion {criterion} ({name}): PASS in {:.2}s",
        start.elapsed().as_secs_f64()
    );
}

/// The worked 5-vertex example: a path 0-1-2 glued to the triangle 2-3-4.
/// Optimal cover {1, 2, 3}.
fn five_vertex_graph() -> Graph {
    Graph::new(5, vec![(0, 1), (1, 2), (2, 3), (2, 4), (3, 4)]).unwrap()
}

fn graph_policy(seed: u64) -> PolicyParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PolicyParams::init_uniform(PolicyArch::Linear, 3, 1, &mut rng)
}

fn bnb_policy(seed: u64) -> PolicyParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PolicyParams::init_uniform(PolicyArch::Linear, NODE_FEATURE_DIM, 1, &mut rng)
}

fn mvc_copier_config(seed: u64, iterations: usize) -> CopierConfig {
    CopierConfig {
        iterations,
        rollouts_a: 6,
        rollouts_b: 4,
        update_a: UpdateConfig {
            mode: UpdateMode::RlWithIl,
            lambda: 2.0,
            learning_rate: 0.5,
            gamma: 1.0,
            surrogate: Surrogate::Nll,
        },
        update_b: UpdateConfig {
            mode: UpdateMode::IlOnly,
            lambda: 1.0,
            learning_rate: 0.5,
            gamma: 1.0,
            surrogate: Surrogate::Nll,
        },
        exchange_mode: ExchangeMode::General,
        seed,
        diagnostics: false,
    }
}

#[test]
fn criterion_1_five_vertex_exactness() {
    let start = Instant::now();
    let instances = vec![mvc_instance("five", five_vertex_graph(), Some(200))];
    let cfg = mvc_copier_config(41, 12);
    let (pol_a, pol_b, _) =
        copier_train(&instances, &graph_policy(1), &bnb_policy(2), &cfg).unwrap();
    let eval = copier_final(&pol_a, &pol_b, &instances[0], &[0, 1, 2]).unwrap();
    assert_eq!(
        eval.best.total_reward(),
        -3.0,
        "expected the optimal cover of size 3"
    );
    assert!(start.elapsed().as_secs_f64() < 5.0, "criterion 1 over budget");
    pass(1, "five-vertex exactness", start);
}

fn brute_force_min_cover(graph: &Graph) -> usize {
    let n = graph.num_vertices();
    let mut best = n;
    for mask in 0u32..(1 << n) {
        let selected: Vec<bool> = (0..n).map(|v| mask & (1 << v) != 0).collect();
        if graph.is_cover(&selected) {
            best = best.min(mask.count_ones() as usize);
        }
    }
    best
}

#[test]
fn criterion_2_search_optimality_oracle() {
    let start = Instant::now();
    for trial in 0..50u64 {
        let n = 4 + (trial as usize % 9); // 4..=12
        let p = 0.2 + 0.05 * (trial % 7) as f64;
        let graph = generate_er_graph(n, p, 1000 + trial).unwrap();
        let mut tree = BnBTree::new(build_ilp(&graph), None).unwrap();
        while !tree.is_done() {
            let id = tree.open_nodes().next().unwrap();
            tree.expand(id).unwrap();
        }
        let expected = if graph.num_edges() == 0 {
            0.0
        } else {
            -(brute_force_min_cover(&graph) as f64)
        };
        assert_eq!(
            tree.incumbent_objective(),
            expected,
            "graph {trial}: n={n} p={p}"
        );
    }
    assert!(start.elapsed().as_secs_f64() < 120.0, "criterion 2 over budget");
    pass(2, "search optimality vs brute force", start);
}

/// Relaxation optima of this family are half-integral, so brute force over
/// {0, 1/2, 1}^n is an exact oracle.
fn half_integral_lp_optimum(graph: &Graph) -> f64 {
    let n = graph.num_vertices();
    let mut best = f64::NEG_INFINITY;
    let mut point = vec![0.0f64; n];
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        for slot in point.iter_mut() {
            *slot = [0.0, 0.5, 1.0][c % 3];
            c /= 3;
        }
        let feasible = graph
            .edges()
            .iter()
            .all(|&(u, v)| point[u] + point[v] >= 1.0 - 1e-12);
        if feasible {
            best = best.max(-point.iter().sum::<f64>());
        }
    }
    best
}

#[test]
fn criterion_3_lp_oracle_equivalence() {
    let start = Instant::now();
    for trial in 0..100u64 {
        let n = 2 + (trial as usize % 9); // 2..=10
        let p = 0.15 + 0.08 * (trial % 9) as f64;
        let graph = generate_er_graph(n, p, 2000 + trial).unwrap();
        let sol = solve_lp(&build_ilp(&graph).problem).unwrap();
        let oracle = half_integral_lp_optimum(&graph);
        assert!(
            (sol.objective - oracle).abs() < 1e-7,
            "graph {trial}: n={n} p={p}: simplex {} vs oracle {oracle}",
            sol.objective
        );
    }
    assert!(start.elapsed().as_secs_f64() < 60.0, "criterion 3 over budget");
    pass(3, "relaxation oracle equivalence", start);
}

#[test]
fn criterion_4_disagreement_bound_numeric() {
    let start = Instant::now();
    let stats = DisagreementStats {
        k: 2,
        count_a: vec![20_000, 0],
        count_b: vec![20_000, 0],
        agree: vec![20_000, 0],
        total: 20_000,
    };
    let report = pac_disagreement_bound(&stats, 32.0, 32.0, 0.05).unwrap();
    let got = &report.per_action[0];
    // Independent evaluation of the three formulas.
    let eps = ((2.0f64.ln() * (32.0 + 32.0) + (2.0 * 2.0 / 0.05f64).ln()) / (2.0 * 20_000.0)).sqrt();
    let zeta = 1.0 - 0.0 - 2.0 * eps;
    let b = (0.0 + eps) / zeta;
    assert!((got.eps - eps).abs() < 1e-6);
    assert!((got.zeta - zeta).abs() < 1e-6);
    assert!((got.b - b).abs() < 1e-6);
    assert_eq!(report.max_b, Some(got.b));
    pass(4, "disagreement bound numeric reproduction", start);
}

// --- criterion 5: empirical bound validity on the corridor gridworld ---------

/// Corridor with a unique optimal action everywhere: on 2-D grids many cells
/// tie between two optimal actions, and tie-breaking noise against the
/// lowest-index optimal policy would swamp what the bound is about.
fn corridor_config() -> GridConfig {
    let mut cfg = GridConfig {
        width: 10,
        height: 1,
        start: (0, 0),
        goal: (9, 0),
        step_reward: -1.0,
        goal_reward: 0.0,
        gamma: 1.0,
        noise: 0.1,
        mask_a: Vec::new(),
        mask_b: Vec::new(),
        horizon_cap: 60,
    };
    // Row one-hot is index 0; columns occupy 1..=10; distance sits at 11.
    cfg.mask_a = vec![1, 3, 5, 7, 9, 11];
    cfg.mask_b = vec![2, 4, 6, 8, 10, 11];
    cfg
}

fn grid_view_policy(instance: &TwoViewInstance, view: ViewId, seed: u64) -> PolicyParams {
    let dim = instance
        .view(view)
        .featurize(&GridConfig::token((0, 0)))
        .unwrap()
        .len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PolicyParams::init_uniform(PolicyArch::Linear, dim, NUM_ACTIONS, &mut rng)
}

/// State-action pairs from greedy optimal-policy episodes, rendered in one
/// view. This is the small labeled set both policies bootstrap from.
fn optimal_demos(
    instance: &TwoViewInstance,
    view: ViewId,
    table: &ValueTable,
    episodes: usize,
    seed: u64,
) -> Vec<DemoStep> {
    let handle = instance.view(view);
    let mut demos = Vec::new();
    for e in 0..episodes {
        let mut env = handle.build();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("demo/{e}")));
        let mut steps = 0usize;
        while !env.is_terminal() && steps < 60 {
            let token = env.state_token();
            let action = table.action_for(&token).unwrap();
            demos.push(DemoStep::Categorical {
                features: handle.featurize(&token).unwrap(),
                action,
                target: None,
            });
            env.step(cotrain_core::ActionToken(action as u64), &mut rng)
                .unwrap();
            steps += 1;
        }
    }
    demos
}

fn pretrain(policy: &PolicyParams, demos: &[DemoStep], steps: usize, lr: f64) -> PolicyParams {
    let cfg = UpdateConfig {
        mode: UpdateMode::IlOnly,
        lambda: 1.0,
        learning_rate: lr,
        gamma: 1.0,
        surrogate: Surrogate::Nll,
    };
    let mut pol = policy.clone();
    for _ in 0..steps {
        pol = copier_update(&pol, &[], demos, &cfg).unwrap();
    }
    pol
}

/// One seeded trial: bootstrap both policies from the same labeled set,
/// co-train, then test measured disagreement with the optimal policy against
/// the computed bound. Returns (all validity flags hold, bound holds).
fn bound_validity_trial(trial_seed: u64) -> (bool, bool) {
    let cfg = corridor_config();
    let table = value_iteration(&cfg, 1e-10).unwrap();
    let instance = make_two_view_grid(format!("corridor{trial_seed}"), cfg).unwrap();

    let demos_a = optimal_demos(&instance, ViewId::A, &table, 2, derive_seed(trial_seed, "boot/A"));
    let demos_b = optimal_demos(&instance, ViewId::B, &table, 2, derive_seed(trial_seed, "boot/B"));
    let pol_a = pretrain(
        &grid_view_policy(&instance, ViewId::A, derive_seed(trial_seed, "init/A")),
        &demos_a,
        40,
        0.5,
    );
    let pol_b = pretrain(
        &grid_view_policy(&instance, ViewId::B, derive_seed(trial_seed, "init/B")),
        &demos_b,
        40,
        0.5,
    );

    let update = |_: ()| UpdateConfig {
        mode: UpdateMode::RlWithIl,
        lambda: 0.5,
        learning_rate: 0.1,
        gamma: 1.0,
        surrogate: Surrogate::MeanKl,
    };
    let train_cfg = CopierConfig {
        iterations: 25,
        rollouts_a: 8,
        rollouts_b: 8,
        update_a: update(()),
        update_b: update(()),
        exchange_mode: ExchangeMode::SharedAction,
        seed: derive_seed(trial_seed, "train"),
        diagnostics: false,
    };
    let instances = vec![instance];
    let (pol_a, pol_b, _) = copier_train(&instances, &pol_a, &pol_b, &train_cfg).unwrap();
    let instance = &instances[0];

    // Deterministic rollouts of the extracted view-A policy.
    let mut trajs = Vec::new();
    for j in 0..600u64 {
        let mut env = instance.view_a.build();
        let rollout = rollout_with(
            &pol_a,
            env.as_mut(),
            derive_seed(trial_seed, &format!("eval/{j}")),
            ActionChoice::Greedy,
        )
        .unwrap();
        trajs.push(rollout.trajectory);
    }
    let mapped: Vec<_> = trajs
        .iter()
        .map(|t| instance.map_a_to_b.apply(t).unwrap())
        .collect();

    let act = |policy: &PolicyParams, view: ViewId| {
        let policy = policy.clone();
        let handle = match view {
            ViewId::A => &instance.view_a,
            ViewId::B => &instance.view_b,
        };
        move |token: &cotrain_core::StateToken| -> cotrain_core::Result<usize> {
            let feats = handle.featurize(token).unwrap();
            Ok(policy.action_distribution(&feats)?.greedy())
        }
    };
    let stats = disagreement_counts(
        &mapped,
        NUM_ACTIONS,
        act(&pol_a, ViewId::A),
        act(&pol_b, ViewId::B),
    )
    .unwrap();
    let report = pac_disagreement_bound(
        &stats,
        pol_a.description_bits(),
        pol_b.description_bits(),
        0.05,
    )
    .unwrap();

    let eps_a = measure_policy_error(&trajs, act(&pol_a, ViewId::A), |token| {
        table.action_for(token)
    })
    .unwrap();

    let valid = !report.vacuous && report.all_defined_valid;
    let holds = match report.max_b {
        Some(b) => eps_a <= b,
        None => false,
    };
    (valid, holds)
}

#[test]
fn criterion_5_bound_validity_trials() {
    let start = Instant::now();
    let mut valid_trials = 0usize;
    let mut held = 0usize;
    for trial in 0..100u64 {
        let (valid, holds) = bound_validity_trial(9000 + trial);
        if valid {
            valid_trials += 1;
            if holds {
                held += 1;
            }
        }
    }
    println!("criterion 5: {held}/{valid_trials} valid trials satisfied the bound");
    assert!(
        valid_trials >= 95,
        "only {valid_trials}/100 trials had all validity flags hold"
    );
    assert!(
        held as f64 >= 0.95 * valid_trials as f64 && held >= 95,
        "bound held in {held}/{valid_trials} valid trials"
    );
    assert!(start.elapsed().as_secs_f64() < 300.0, "criterion 5 over budget");
    pass(5, "empirical bound validity", start);
}

// --- criterion 6: gradient checks ---------------------------------------------

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-12)
}

#[test]
fn criterion_6_gradient_correctness() {
    let start = Instant::now();
    let archs = [
        PolicyArch::Tabular,
        PolicyArch::Linear,
        PolicyArch::Mlp { hidden: 6 },
    ];
    let h = 1e-6;
    for arch in archs {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + arch.param_count(3, 3) as u64);
        for case in 0..100 {
            let policy = PolicyParams::init_uniform(arch, 3, 3, &mut rng);
            let feats: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let action = rng.gen_range(0..3);

            // score-function gradient
            let grad = policy.log_prob_gradient(&feats, action).unwrap();
            let mut fd = vec![0.0; policy.params.len()];
            for j in 0..policy.params.len() {
                let mut hi = policy.clone();
                hi.params[j] += h;
                let mut lo = policy.clone();
                lo.params[j] -= h;
                let f = |p: &PolicyParams| p.action_distribution(&feats).unwrap().probs[action].ln();
                fd[j] = (f(&hi) - f(&lo)) / (2.0 * h);
            }
            assert!(
                rel_err(&grad, &fd) < 1e-4,
                "{arch:?} case {case}: log-prob gradient"
            );

            // behavior-cloning loss gradient on a small batch
            let demos: Vec<DemoStep> = (0..3)
                .map(|_| DemoStep::Categorical {
                    features: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    action: rng.gen_range(0..3),
                    target: None,
                })
                .collect();
            let (_, bc_grad) = behavior_cloning_loss(&policy, &demos).unwrap();
            let mut bc_fd = vec![0.0; policy.params.len()];
            for j in 0..policy.params.len() {
                let mut hi = policy.clone();
                hi.params[j] += h;
                let mut lo = policy.clone();
                lo.params[j] -= h;
                bc_fd[j] = (behavior_cloning_loss(&hi, &demos).unwrap().0
                    - behavior_cloning_loss(&lo, &demos).unwrap().0)
                    / (2.0 * h);
            }
            assert!(
                rel_err(&bc_grad, &bc_fd) < 1e-4,
                "{arch:?} case {case}: cloning gradient"
            );
        }
    }
    assert!(start.elapsed().as_secs_f64() < 60.0, "criterion 6 over budget");
    pass(6, "gradient correctness", start);
}

// --- criterion 7: co-training improvement --------------------------------------

fn grid_benchmark_config() -> GridConfig {
    GridConfig {
        width: 4,
        height: 4,
        start: (0, 0),
        goal: (3, 3),
        gamma: 1.0,
        noise: 0.05,
        ..GridConfig::default()
    }
    .with_derived_masks()
}

fn grid_train_config(seed: u64) -> CopierConfig {
    let update = UpdateConfig {
        mode: UpdateMode::RlWithIl,
        lambda: 0.3,
        learning_rate: 0.12,
        gamma: 1.0,
        surrogate: Surrogate::MeanKl,
    };
    CopierConfig {
        iterations: 60,
        rollouts_a: 8,
        rollouts_b: 8,
        update_a: update,
        update_b: update,
        exchange_mode: ExchangeMode::SharedAction,
        seed,
        diagnostics: false,
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[test]
fn criterion_7a_grid_improvement() {
    let start = Instant::now();
    let eval_seeds: Vec<u64> = (0..5).collect();
    let mut copier_returns = Vec::new();
    let mut single_a_returns = Vec::new();
    let mut single_b_returns = Vec::new();

    for seed in 0..10u64 {
        let instances = vec![make_two_view_grid("grid", grid_benchmark_config()).unwrap()];
        let instance = &instances[0];
        let init_a = grid_view_policy(instance, ViewId::A, derive_seed(seed, "7a/init/A"));
        let init_b = grid_view_policy(instance, ViewId::B, derive_seed(seed, "7a/init/B"));
        let cfg = grid_train_config(derive_seed(seed, "7a/train"));

        let (ca, cb, history) = copier_train(&instances, &init_a, &init_b, &cfg).unwrap();
        assert!(
            history.records.iter().all(|r| r.demos_for_a > 0 && r.demos_for_b > 0),
            "shared-action exchange must flow both ways"
        );
        let eval = copier_final(&ca, &cb, instance, &eval_seeds).unwrap();
        copier_returns.push(eval.best.total_reward());

        let (sa, _) = single_view_train(ViewId::A, &instances, &init_a, &cfg).unwrap();
        let (sb, _) = single_view_train(ViewId::B, &instances, &init_b, &cfg).unwrap();
        // Evaluate each single policy on its own view with the same seeds.
        let best_on = |pol: &PolicyParams, view: ViewId| -> f64 {
            eval_seeds
                .iter()
                .map(|&s| {
                    let mut env = instance.view(view).build();
                    sample_trajectory(pol, env.as_mut(), s)
                        .unwrap()
                        .trajectory
                        .total_reward()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        single_a_returns.push(best_on(&sa, ViewId::A));
        single_b_returns.push(best_on(&sb, ViewId::B));
    }

    let copier_mean = mean(&copier_returns);
    let better_single = mean(&single_a_returns).max(mean(&single_b_returns));
    let all: Vec<f64> = copier_returns
        .iter()
        .chain(&single_a_returns)
        .chain(&single_b_returns)
        .copied()
        .collect();
    let range = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - all.iter().cloned().fold(f64::INFINITY, f64::min);
    println!(
        "criterion 7a: copier mean {copier_mean:.3}, better single {better_single:.3}, range {range:.3}"
    );
    assert!(
        copier_mean >= better_single - 0.01 * range,
        "copier {copier_mean} vs better single {better_single} (range {range})"
    );
    pass(7, "grid improvement (part a)", start);
}

#[test]
fn criterion_7b_mvc_improvement() {
    let start = Instant::now();
    // Budget tight enough that the search cannot close the tree: incumbent
    // quality then depends on node selection, and the two views' solution
    // qualities are comparable, so demonstrations can flow either way.
    let budget = Some(16);
    let train_instances: Vec<TwoViewInstance> = (0..14u64)
        .map(|i| {
            let n = 25 + (i as usize * 3) % 16;
            let p = 0.22 + 0.04 * (i % 3) as f64;
            mvc_instance(
                format!("train{i}"),
                generate_er_graph(n, p, 7000 + i).unwrap(),
                budget,
            )
        })
        .collect();
    let test_instances: Vec<TwoViewInstance> = (0..20u64)
        .map(|i| {
            let n = 25 + (i as usize) % 16;
            let p = 0.22 + 0.04 * (i % 3) as f64;
            mvc_instance(
                format!("test{i}"),
                generate_er_graph(n, p, 8000 + i).unwrap(),
                budget,
            )
        })
        .collect();

    let cfg = mvc_copier_config(73, 80);
    let init_a = graph_policy(11);
    let init_b = bnb_policy(12);
    let (ca, cb, history) = copier_train(&train_instances, &init_a, &init_b, &cfg).unwrap();
    let exchanged: usize = history
        .records
        .iter()
        .map(|r| r.demos_for_a + r.demos_for_b)
        .sum();
    assert!(exchanged > 0, "training never exchanged demonstrations");

    let (sa, _) = single_view_train(ViewId::A, &train_instances, &init_a, &cfg).unwrap();
    let (sb, _) = single_view_train(ViewId::B, &train_instances, &init_b, &cfg).unwrap();

    let eval_seeds: Vec<u64> = (0..3).collect();
    let mut copier_sizes = Vec::new();
    let mut combined_sizes = Vec::new();
    for instance in &test_instances {
        let c = copier_final(&ca, &cb, instance, &eval_seeds).unwrap();
        copier_sizes.push(-c.best.total_reward());
        let s = copier_final(&sa, &sb, instance, &eval_seeds).unwrap();
        combined_sizes.push(-s.best.total_reward());
    }
    let copier_mean = mean(&copier_sizes);
    let combined_mean = mean(&combined_sizes);
    println!(
        "criterion 7b: copier mean cover {copier_mean:.3}, combined single baseline {combined_mean:.3}"
    );
    assert!(
        copier_mean <= combined_mean,
        "copier {copier_mean} vs combined single {combined_mean}"
    );
    assert!(start.elapsed().as_secs_f64() < 1800.0, "criterion 7 over budget");
    pass(7, "cover improvement (part b)", start);
}

#[test]
fn criterion_8_reward_preservation() {
    let start = Instant::now();
    // Every exchanged demonstration passes an exact total-reward equality
    // check inside the mapping layer; exercise it across both environments
    // and verify the totals independently here.
    let mut checked = 0usize;

    let instance = mvc_instance("pres", generate_er_graph(12, 0.25, 4242).unwrap(), Some(200));
    let pol_a = graph_policy(3);
    let pol_b = bnb_policy(4);
    for seed in 0..20u64 {
        let mut env_a = instance.view_a.build();
        let ta = sample_trajectory(&pol_a, env_a.as_mut(), seed).unwrap().trajectory;
        let mut env_b = instance.view_b.build();
        let tb = sample_trajectory(&pol_b, env_b.as_mut(), seed).unwrap().trajectory;
        let ex = exchange_general(std::slice::from_ref(&ta), std::slice::from_ref(&tb), &instance).unwrap();
        for demo in ex.demos_a_to_b.iter() {
            assert_eq!(demo.total_reward(), ta.total_reward());
            checked += 1;
        }
        for demo in ex.demos_b_to_a.iter() {
            assert_eq!(demo.total_reward(), tb.total_reward());
            checked += 1;
        }
    }

    let grid = make_two_view_grid("pres", grid_benchmark_config()).unwrap();
    let gp = grid_view_policy(&grid, ViewId::A, 5);
    for seed in 0..20u64 {
        let mut env = grid.view_a.build();
        let t = sample_trajectory(&gp, env.as_mut(), seed).unwrap().trajectory;
        let mapped = grid.map_a_to_b.apply(&t).unwrap();
        assert_eq!(mapped.total_reward(), t.total_reward());
        checked += 1;
    }
    assert!(checked >= 40, "too few preservation checks exercised");
    println!("criterion 8: {checked} exchanged trajectories preserved totals exactly");
    pass(8, "reward preservation", start);
}

#[test]
fn gap_bound_holds_on_the_grid() {
    // Supporting check behind criterion 5's machinery: the measured
    // disagreement rate, horizon and deviation gap bound the distance to the
    // optimal return on a deterministic grid.
    let start = Instant::now();
    let cfg = GridConfig {
        width: 4,
        height: 4,
        start: (0, 0),
        goal: (3, 3),
        gamma: 1.0,
        noise: 0.0,
        ..GridConfig::default()
    }
    .with_derived_masks();
    let table = value_iteration(&cfg, 1e-10).unwrap();
    let u = optimal_gap_u(&table);
    let horizon = cfg.horizon_cap;
    let instance = make_two_view_grid("gap", cfg).unwrap();

    // A mediocre policy: bootstrap briefly from the optimal labels.
    let demos = optimal_demos(&instance, ViewId::A, &table, 1, 99);
    let policy = pretrain(&grid_view_policy(&instance, ViewId::A, 1), &demos, 3, 0.3);

    let mut env = instance.view_a.build();
    let rollout = rollout_with(&policy, env.as_mut(), 0, ActionChoice::Greedy).unwrap();
    let eta_pi = rollout.trajectory.total_reward();
    let eta_star = table.value((0, 0));

    let pol = policy.clone();
    let handle = &instance.view_a;
    let eps = measure_policy_error(
        std::slice::from_ref(&rollout.trajectory),
        |token| {
            let feats = handle.featurize(token).unwrap();
            Ok(pol.action_distribution(&feats)?.greedy())
        },
        |token| table.action_for(token),
    )
    .unwrap();
    let bound = performance_gap_bound(GapBoundParams {
        u,
        t: horizon,
        epsilon: eps,
    })
    .unwrap();
    assert!(
        eta_pi >= eta_star - bound - 1e-9,
        "return {eta_pi} vs optimal {eta_star} minus bound {bound}"
    );
    pass(5, "performance-gap bound support check", start);
}
