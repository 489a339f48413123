//! Fold a flat cloth twice, print the occupancy as ASCII and the metrics
//! against the goal.
//!
//! ```bash
//! cargo run --example fold_and_render
//! ```

use fabric_fold::cloth::{
    apply_fold, mask_iou, mean_particle_distance, render, ClothConfig, ClothState, DistanceMode, NoiseParams,
};
use fabric_fold::data::{goal_library, goal_state, GrammarFold, Side};

fn ascii(state: &ClothState, resolution: usize) -> String {
    let obs = render(state, resolution);
    let mut out = String::new();
    // rows follow +y, print top row first
    for row in (0..resolution).rev() {
        for col in 0..resolution {
            let k = obs.index(row, col);
            out.push(match (obs.occupancy[k], obs.height[k] as u32) {
                (0, _) => '.',
                (_, 0) => '#',
                (_, h) => char::from_digit(h.min(9), 10).unwrap(),
            });
        }
        out.push('\n');
    }
    out
}

fn main() -> fabric_fold::Result<()> {
    let cfg = ClothConfig::default();
    let flat = ClothState::flat(&cfg)?;

    let left = GrammarFold::Half(Side::Left).resolve(&flat);
    let (once, _) = apply_fold(&flat, &left, &NoiseParams::none())?;
    let bottom = GrammarFold::Half(Side::Bottom).resolve(&once);
    let (twice, _) = apply_fold(&once, &bottom, &NoiseParams::none())?;
    println!("after two half folds (max layer {}):\n{}", twice.max_layer(), ascii(&twice, 32));

    // The same goal from the library, then a noisy attempt at it.
    let goal = goal_state(&cfg, &goal_library(&cfg, 2, 0)?)?;
    let noise = NoiseParams { grasp_sigma_m: 0.005, settle_sigma_m: 0.001, seed: 3 };
    let (n1, _) = apply_fold(&flat, &left, &noise)?;
    let (n2, _) = apply_fold(&n1, &bottom, &noise.with_seed(4))?;

    for (name, s) in [("exact", &twice), ("noisy", &n2)] {
        println!(
            "{name}: mpde {:.3} mm, planar {:.3} mm, iou {:.4}",
            mean_particle_distance(s, &goal, DistanceMode::Spatial)?,
            mean_particle_distance(s, &goal, DistanceMode::Planar)?,
            mask_iou(&render(s, 64), &render(&goal, 64))?
        );
    }
    let out = std::env::temp_dir().join("fold.pgm");
    std::fs::write(&out, render(&n2, 64).occupancy_pgm())?;
    println!("wrote {}", out.display());
    Ok(())
}
