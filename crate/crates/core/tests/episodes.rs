use std::sync::OnceLock;

use fabric_fold::cloth::{render, ClothState, NoiseParams};
use fabric_fold::data::{goal_library, goal_state};
use fabric_fold::executor::{
    episode_config, replay, run_bench, run_episode, BenchConfig, EpisodeConfig, Mode, Pipeline, CSV_HEADER,
};
use fabric_fold::latent::encode;

fn pipeline() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| Pipeline::build_default().unwrap())
}

fn flat() -> ClothState {
    ClothState::flat(&pipeline().dataset.meta.cloth).unwrap()
}

fn goal(tier: u32, variant: u64) -> ClothState {
    let cloth = &pipeline().dataset.meta.cloth;
    goal_state(cloth, &goal_library(cloth, tier, variant).unwrap()).unwrap()
}

fn noisy(mode: Mode, seed: u64) -> EpisodeConfig {
    EpisodeConfig {
        mode,
        noise: NoiseParams { grasp_sigma_m: 0.005, settle_sigma_m: 0.001, seed: seed + 1000 },
        seed,
        ..EpisodeConfig::default()
    }
}

#[test]
fn start_equal_to_goal_needs_nothing() {
    let g = goal(2, 3);
    for mode in Mode::ALL {
        let cfg = EpisodeConfig { mode, ..EpisodeConfig::default() };
        let r = run_episode(&cfg, &g, &g, pipeline()).unwrap();
        assert_eq!(r.n_actions, 0, "{mode}");
        assert!(r.success);
        assert_eq!(r.mpde_mm, 0.0);
    }
}

#[test]
fn one_step_tasks_match_across_flow_modes() {
    for v in 0..8 {
        let g = goal(1, v);
        let run =
            |mode| run_episode(&EpisodeConfig { mode, ..EpisodeConfig::default() }, &flat(), &g, pipeline()).unwrap();
        let defnet = run(Mode::Defnet);
        assert_eq!(defnet.n_actions, 1);
        assert_eq!(run(Mode::NoIim).actions, defnet.actions, "variant {v}");
        assert_eq!(run(Mode::SingleStepFlow).actions, defnet.actions, "variant {v}");
    }
}

#[test]
fn recorded_actions_replay_bit_exactly() {
    for mode in Mode::ALL {
        for seed in 0..4 {
            let cfg = noisy(mode, seed);
            let r = run_episode(&cfg, &flat(), &goal(3, seed), pipeline()).unwrap();
            let again = replay(&cfg, &flat(), &r.actions).unwrap();
            assert_eq!(again, r.final_state, "{mode} seed {seed}");
            assert_eq!(r.trace.len(), r.n_actions);
        }
    }
}

#[test]
fn episodes_respect_the_iteration_cap() {
    for mode in Mode::ALL {
        for max_iters in 1..=3 {
            let cfg = EpisodeConfig { max_iters, ..noisy(mode, 7) };
            let r = run_episode(&cfg, &flat(), &goal(4, 1), pipeline()).unwrap();
            assert!(r.n_actions <= max_iters, "{mode}: {} > {max_iters}", r.n_actions);
            assert_eq!(r.actions.len(), r.n_actions);
        }
    }
}

#[test]
fn success_means_the_final_latent_is_near_the_goal_node() {
    let p = pipeline();
    let tau = p.roadmap.epsilon / 2.0;
    let mut successes = 0;
    for seed in 0..6 {
        let g = goal(2 + (seed % 3) as u32, seed);
        let r = run_episode(&noisy(Mode::Defnet, seed), &flat(), &g, p).unwrap();
        if r.success {
            successes += 1;
            let z = encode(&p.encoder, &render(&r.final_state, p.resolution())).unwrap();
            let (node, _) = p.roadmap.map_to_node(&encode(&p.encoder, &render(&g, p.resolution())).unwrap());
            let d: f64 =
                z.iter().zip(&p.roadmap.nodes[node].centroid).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(d <= tau, "seed {seed}: {d} > {tau}");
        }
    }
    assert!(successes > 0);
}

#[test]
fn bench_rows_are_sorted_and_reproducible() {
    let mut cfg =
        BenchConfig { seeds_per_tier: 3, modes: Mode::ALL.to_vec(), master_seed: 9, ..BenchConfig::default() };
    cfg.episode.noise = NoiseParams { grasp_sigma_m: 0.005, settle_sigma_m: 0.001, seed: 0 };
    let a = run_bench(&cfg, pipeline()).unwrap();
    let b = run_bench(&cfg, pipeline()).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.rows.len(), 4 * 3 * 4);
    let keys: Vec<_> = a.rows.iter().map(|r| (r.tier, r.seed, r.mode)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(a.to_csv().lines().next(), Some(CSV_HEADER));

    // Modes share the action noise of a cell.
    let d = episode_config(&cfg, 2, 1, Mode::Defnet);
    let n = episode_config(&cfg, 2, 1, Mode::NoIim);
    assert_eq!(d.noise, n.noise);

    for agg in a.aggregates() {
        let rows: Vec<_> = a.rows.iter().filter(|r| r.tier == agg.tier && r.mode == agg.mode).collect();
        let mean = rows.iter().map(|r| r.mpde_mm).sum::<f64>() / rows.len() as f64;
        assert!((agg.mpde_mm.mean - mean).abs() < 1e-12);
        assert_eq!(agg.episodes, rows.len());
    }
}

#[test]
fn traces_serialise_one_line_per_episode() {
    let cfg = BenchConfig { tiers: vec![2], seeds_per_tier: 2, ..BenchConfig::default() };
    let report = run_bench(&cfg, pipeline()).unwrap();
    let text = report.traces_jsonl();
    assert_eq!(text.lines().count(), 2);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["steps"].as_array().unwrap().len(), 2);
    }
}
