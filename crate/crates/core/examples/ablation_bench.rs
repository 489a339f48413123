//! The tiered benchmark: zero-noise action counts, then the noisy ablation
//! over all four modes.
//!
//! ```bash
//! cargo run --release --example ablation_bench -- [seeds]
//! ```

use fabric_fold::cloth::NoiseParams;
use fabric_fold::executor::{run_bench, BenchConfig, Mode, Pipeline};

fn main() -> fabric_fold::Result<()> {
    let seeds: u64 = std::env::args().nth(1).map_or(50, |s| s.parse().expect("seed count"));
    let p = Pipeline::build_default()?;

    let clean = run_bench(&BenchConfig::default(), &p)?;
    println!("zero noise, defnet\n{}", clean.summary_table());

    let mut cfg = BenchConfig { seeds_per_tier: seeds, modes: Mode::ALL.to_vec(), ..BenchConfig::default() };
    cfg.episode.noise = NoiseParams { grasp_sigma_m: 0.005, settle_sigma_m: 0.001, seed: 0 };
    let noisy = run_bench(&cfg, &p)?;
    println!("grasp 5 mm, settle 1 mm, {seeds} seeds\n{}", noisy.summary_table());
    for mode in Mode::ALL {
        println!("{:<17} tiers 2-4 mean mpde {:.3} mm", mode.as_str(), noisy.mean_mpde(mode, &[2, 3, 4]));
    }
    let out = std::env::temp_dir().join("ablation.csv");
    std::fs::write(&out, noisy.to_csv())?;
    Ok(())
}
