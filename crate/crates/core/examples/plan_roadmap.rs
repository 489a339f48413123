//! Build the roadmap and plan from the flat cloth to every tier-4 goal.
//!
//! ```bash
//! cargo run --release --example plan_roadmap > roadmap.dot
//! ```

use fabric_fold::cloth::{render, ClothState};
use fabric_fold::data::{goal_library, goal_state};
use fabric_fold::executor::Pipeline;
use fabric_fold::roadmap::DEFAULT_PATH_CAP;

fn main() -> fabric_fold::Result<()> {
    let p = Pipeline::build_default()?;
    let rm = &p.roadmap;
    eprintln!("{} nodes, {} edges, epsilon {:.4}", rm.node_count(), rm.edges.len(), rm.epsilon);

    let cloth = &p.dataset.meta.cloth;
    let flat = render(&ClothState::flat(cloth)?, p.resolution());
    for v in 0..8 {
        let goal = render(&goal_state(cloth, &goal_library(cloth, 4, v)?)?, p.resolution());
        let plan = rm.plan(&p.encoder, &flat, &goal, v)?;
        let (s, g) = (plan.nodes[0], *plan.nodes.last().unwrap());
        let n_paths = rm.all_shortest_paths(s, g, DEFAULT_PATH_CAP)?.len();
        eprintln!("tier 4 variant {v}: {:?} (one of {n_paths})", plan.nodes);
    }
    print!("{}", rm.to_dot());
    Ok(())
}
