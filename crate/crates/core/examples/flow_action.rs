//! Flow field, pick heatmap and proposed action for a diagonal fold, with
//! the trained pick scorer next to the geometric one.
//!
//! ```bash
//! cargo run --release --example flow_action
//! ```

use fabric_fold::cloth::{apply_fold, mean_particle_distance, render, ClothState, DistanceMode, NoiseParams};
use fabric_fold::data::{build_corpus, Corner, GrammarFold};
use fabric_fold::flow::{
    oracle_flow, pick_heatmap, propose_action, select_pick, train_pick_scorer, PickScorer, PickTrainConfig, Proposal,
};

fn main() -> fabric_fold::Result<()> {
    let d = build_corpus(8, 2, 0)?;
    let current = ClothState::flat(&d.meta.cloth)?;
    let fold = GrammarFold::Diagonal(Corner::BottomLeft).resolve(&current);
    let (subgoal, _) = apply_fold(&current, &fold, &NoiseParams::none())?;

    let flow = oracle_flow(&current, &subgoal, 64)?;
    println!("valid flow pixels: {}", flow.valid_count());
    let out = std::env::temp_dir().join("flow.ppm");
    std::fs::write(&out, flow.to_color_wheel_ppm())?;

    let (trained, report) = train_pick_scorer(&d, &PickTrainConfig::default())?;
    println!(
        "trained scorer: final loss {:.4}, held-out agreement {:.2} on {} tuples",
        report.losses.last().copied().unwrap_or(f64::NAN),
        report.heldout_agreement,
        report.heldout_tuples
    );

    let obs = render(&current, 64);
    let threshold_px = 15.0 / 1000.0 / obs.pixel_to_meter;
    for scorer in [PickScorer::Geometric, trained] {
        let h = pick_heatmap(&scorer, &flow, &obs, threshold_px)?;
        println!("{scorer:?}: pick {:?}", select_pick(&h));
        if let Proposal::Act { action, pick, place } = propose_action(&scorer, &current, &subgoal, 64, 15.0)? {
            let (next, _) = apply_fold(&current, &action, &NoiseParams::none())?;
            println!(
                "  {pick:?} -> {place:?}, mpde to sub-goal {:.3} mm",
                mean_particle_distance(&next, &subgoal, DistanceMode::Spatial)?
            );
        }
    }
    Ok(())
}
