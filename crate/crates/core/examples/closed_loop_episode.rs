//! One noisy tier-4 episode per mode, with the closed-loop trace.
//!
//! ```bash
//! cargo run --release --example closed_loop_episode -- [seed]
//! ```

use fabric_fold::cloth::{ClothState, NoiseParams};
use fabric_fold::data::{goal_library, goal_state};
use fabric_fold::executor::{replay, run_episode, EpisodeConfig, Mode, Pipeline};

fn main() -> fabric_fold::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed"));
    let p = Pipeline::build_default()?;
    let cloth = &p.dataset.meta.cloth;
    let start = ClothState::flat(cloth)?;
    let goal = goal_state(cloth, &goal_library(cloth, 4, seed)?)?;

    for mode in Mode::ALL {
        let cfg = EpisodeConfig {
            mode,
            noise: NoiseParams { grasp_sigma_m: 0.005, settle_sigma_m: 0.001, seed },
            seed,
            ..EpisodeConfig::default()
        };
        let r = run_episode(&cfg, &start, &goal, &p)?;
        println!(
            "{mode}: {} actions, mpde {:.2} mm, miou {:.3}, success {}",
            r.n_actions, r.mpde_mm, r.miou, r.success
        );
        if mode == Mode::Defnet {
            for s in &r.trace {
                println!(
                    "  iter {} node {:?} plan {:?} -> {:?}, executed {}, deviation {:.2} mm",
                    s.iteration, s.node, s.plan_len, s.subgoal_node, s.executed, s.deviation_mm
                );
            }
        }
        assert_eq!(replay(&cfg, &start, &r.actions)?, r.final_state);
    }
    Ok(())
}
