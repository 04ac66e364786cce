//! Cross-module invariants, mostly property-based.

use proptest::prelude::*;

use cotrain_core::env::grid::{make_two_view_grid, GridConfig, NUM_ACTIONS};
use cotrain_core::env::mvc::{
    assignment_to_cover, build_ilp, cover_to_assignment, generate_er_graph, mvc_instance, BnBTree,
    Graph, NODE_FEATURE_DIM,
};
use cotrain_core::lp::{solve_lp, LpStatus};
use cotrain_core::mdp::{estimate_occupancy, ActionToken, StateToken, Step, Trajectory};
use cotrain_core::policy::{
    divergence, rollout_with, sample_trajectory, ActionChoice, ActionDistribution, DivergenceKind,
    PolicyArch, PolicyParams,
};
use cotrain_core::ViewId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arb_distribution(k: usize) -> impl Strategy<Value = ActionDistribution> {
    proptest::collection::vec(1e-3..1.0f64, k).prop_map(|raw| {
        let sum: f64 = raw.iter().sum();
        ActionDistribution {
            probs: raw.into_iter().map(|v| v / sum).collect(),
        }
    })
}

proptest! {
    #[test]
    fn divergences_stay_in_range(p in arb_distribution(4), q in arb_distribution(4)) {
        let kl = divergence(&p, &q, DivergenceKind::Kl).unwrap();
        prop_assert!(kl >= 0.0);
        let js = divergence(&p, &q, DivergenceKind::Js).unwrap();
        prop_assert!(js >= 0.0 && js <= 2.0f64.ln() + 1e-12);
        let js_rev = divergence(&q, &p, DivergenceKind::Js).unwrap();
        prop_assert!((js - js_rev).abs() < 1e-12);
    }

    #[test]
    fn distributions_normalize(seed in any::<u64>(), arch_pick in 0usize..3) {
        let arch = [PolicyArch::Tabular, PolicyArch::Linear, PolicyArch::Mlp { hidden: 6 }][arch_pick];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = PolicyParams::init_uniform(arch, 5, 4, &mut rng);
        let features: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let dist = policy.action_distribution(&features).unwrap();
        prop_assert!(dist.validate().is_ok());
    }

    #[test]
    fn occupancy_mass_is_bounded(
        seed in any::<u64>(),
        gamma in 0.5..0.99f64,
        lens in proptest::collection::vec(1usize..12, 1..5),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trajs: Vec<Trajectory> = lens
            .iter()
            .map(|&len| Trajectory {
                view: ViewId::A,
                steps: (0..len)
                    .map(|_| Step {
                        state: StateToken(format!("s{}", rng.gen_range(0..4))),
                        action: ActionToken(rng.gen_range(0..3)),
                        reward: 0.0,
                    })
                    .collect(),
                final_state: StateToken("end".into()),
            })
            .collect();
        let occ = estimate_occupancy(&trajs, gamma).unwrap();
        prop_assert!(occ.total_mass() <= 1.0 / (1.0 - gamma) + 1e-9);
        let occ1 = estimate_occupancy(&trajs, 1.0).unwrap();
        let avg_len = lens.iter().sum::<usize>() as f64 / lens.len() as f64;
        prop_assert!((occ1.total_mass() - avg_len).abs() < 1e-9);
    }

    #[test]
    fn solution_mapping_round_trips(seed in any::<u64>(), n in 2usize..9, p in 0.2..0.9f64) {
        let graph = generate_er_graph(n, p, seed).unwrap();
        // Any superset of the full vertex set restricted by a random keep
        // pattern that still covers works; fall back to the full cover.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
        let mut selected: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
        if !graph.is_cover(&selected) {
            selected = vec![true; n];
        }
        let x: Vec<f64> = selected.iter().map(|s| if *s { 1.0 } else { 0.0 }).collect();
        let cover = assignment_to_cover(&graph, &x).unwrap();
        let back = cover_to_assignment(&graph, &cover).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn lp_solutions_are_feasible(seed in any::<u64>(), n in 2usize..9, p in 0.2..0.9f64) {
        let graph = generate_er_graph(n, p, seed).unwrap();
        let ilp = build_ilp(&graph);
        let sol = solve_lp(&ilp.problem).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!(ilp.problem.violation(&sol.x) <= 1e-7);
    }

    #[test]
    fn mvc_mappings_preserve_reward(seed in any::<u64>(), n in 2usize..8, p in 0.3..0.9f64) {
        let graph = generate_er_graph(n, p, seed).unwrap();
        let instance = mvc_instance("prop", graph, Some(200));
        let graph_policy = PolicyParams::zeros(PolicyArch::Linear, 3, 1);
        let bnb_policy = PolicyParams::zeros(PolicyArch::Linear, NODE_FEATURE_DIM, 1);

        let mut env_a = instance.view_a.build();
        let ra = sample_trajectory(&graph_policy, env_a.as_mut(), seed).unwrap();
        let mapped = instance.map_a_to_b.apply(&ra.trajectory).unwrap();
        prop_assert_eq!(mapped.total_reward(), ra.trajectory.total_reward());

        let mut env_b = instance.view_b.build();
        let rb = sample_trajectory(&bnb_policy, env_b.as_mut(), seed).unwrap();
        if let Ok(back) = instance.map_b_to_a.apply(&rb.trajectory) {
            prop_assert_eq!(back.total_reward(), rb.trajectory.total_reward());
        }
    }

    #[test]
    fn bnb_rewards_telescope(seed in any::<u64>(), n in 3usize..10, p in 0.2..0.8f64) {
        let graph = generate_er_graph(n, p, seed).unwrap();
        let mut tree = BnBTree::new(build_ilp(&graph), Some(300)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let mut total = 0.0;
        while !tree.is_done() {
            let open: Vec<usize> = tree.open_nodes().collect();
            let pick = open[rng.gen_range(0..open.len())];
            let (r, _) = tree.expand(pick).unwrap();
            total += r;
        }
        prop_assert_eq!(total, tree.incumbent_objective());
    }

    #[test]
    fn grid_mapping_involution(seed in any::<u64>(), noise in 0.0..0.4f64) {
        let cfg = GridConfig {
            width: 4,
            height: 3,
            start: (0, 0),
            goal: (3, 2),
            gamma: 1.0,
            noise,
            ..GridConfig::default()
        }
        .with_derived_masks();
        let instance = make_two_view_grid("prop", cfg).unwrap();
        let dim = instance
            .view_a
            .featurize(&GridConfig::token((0, 0)))
            .unwrap()
            .len();
        let policy = PolicyParams::zeros(PolicyArch::Linear, dim, NUM_ACTIONS);
        let mut env = instance.view_a.build();
        let rollout = rollout_with(&policy, env.as_mut(), seed, ActionChoice::Sample).unwrap();
        let there = instance.map_a_to_b.apply(&rollout.trajectory).unwrap();
        let back = instance.map_b_to_a.apply(&there).unwrap();
        prop_assert_eq!(back, rollout.trajectory);
    }
}

// Non-proptest cross-module invariant: unlimited-budget search is exact on a
// small fixed batch (the acceptance suite runs the full 50-graph version).
#[test]
fn bnb_matches_brute_force_on_small_graphs() {
    for seed in 0..5u64 {
        let graph = generate_er_graph(7, 0.4, seed).unwrap();
        let mut tree = BnBTree::new(build_ilp(&graph), None).unwrap();
        while !tree.is_done() {
            let id = tree.open_nodes().next().unwrap();
            tree.expand(id).unwrap();
        }
        let mut best = graph.num_vertices();
        for mask in 0u32..(1 << graph.num_vertices()) {
            let selected: Vec<bool> = (0..graph.num_vertices())
                .map(|v| mask & (1 << v) != 0)
                .collect();
            if graph.is_cover(&selected) {
                best = best.min(mask.count_ones() as usize);
            }
        }
        if graph.num_edges() == 0 {
            assert!(tree.incumbent_objective() == 0.0);
        } else {
            assert_eq!(tree.incumbent_objective(), -(best as f64), "seed {seed}");
        }
    }
}

// Exchange XOR: exactly one demo set is nonempty for nonempty inputs.
#[test]
fn exchange_xor_on_grid() {
    use cotrain_core::copier::exchange_general;
    let cfg = GridConfig {
        width: 3,
        height: 3,
        start: (0, 0),
        goal: (2, 2),
        gamma: 1.0,
        noise: 0.1,
        ..GridConfig::default()
    }
    .with_derived_masks();
    let instance = make_two_view_grid("xor", cfg).unwrap();
    let dim_a = instance
        .view_a
        .featurize(&GridConfig::token((0, 0)))
        .unwrap()
        .len();
    let dim_b = instance
        .view_b
        .featurize(&GridConfig::token((0, 0)))
        .unwrap()
        .len();
    let pol_a = PolicyParams::zeros(PolicyArch::Linear, dim_a, NUM_ACTIONS);
    let pol_b = PolicyParams::zeros(PolicyArch::Linear, dim_b, NUM_ACTIONS);
    for seed in 0..10u64 {
        let mut env_a = instance.view_a.build();
        let mut env_b = instance.view_b.build();
        let ta = sample_trajectory(&pol_a, env_a.as_mut(), seed).unwrap().trajectory;
        let tb = sample_trajectory(&pol_b, env_b.as_mut(), seed + 100)
            .unwrap()
            .trajectory;
        let ex = exchange_general(&[ta], &[tb], &instance).unwrap();
        assert!(ex.demos_a_to_b.is_empty() != ex.demos_b_to_a.is_empty());
    }
}

// Deterministic-policy extraction is the lowest-index argmax.
#[test]
fn greedy_extraction_tie_break() {
    let dist = ActionDistribution {
        probs: vec![0.25, 0.25, 0.25, 0.25],
    };
    assert_eq!(dist.greedy(), 0);
    let dist = ActionDistribution {
        probs: vec![0.2, 0.4, 0.4],
    };
    assert_eq!(dist.greedy(), 1);
}

// Graph files round-trip through disk byte-identically.
#[test]
fn graph_file_io_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.graph");
    let graph = generate_er_graph(9, 0.3, 17).unwrap();
    graph.write_file(&path).unwrap();
    let bytes1 = std::fs::read(&path).unwrap();
    let back = Graph::read_file(&path).unwrap();
    assert_eq!(back, graph);
    back.write_file(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), bytes1);
}
