use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::episode::{run_episode, EpisodeConfig, EpisodeResult, Mode, TraceStep};
use super::Pipeline;
use crate::cloth::ClothState;
use crate::data::{goal_library, goal_state};
use crate::{derive_seed, Result};

pub const CSV_HEADER: &str = "tier,seed,mode,mpde_mm,miou,n_actions,success";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub tier: u32,
    pub seed: u64,
    pub mode: Mode,
    pub mpde_mm: f64,
    pub miou: f64,
    pub n_actions: usize,
    pub success: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population mean and standard deviation.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub tier: u32,
    pub mode: Mode,
    pub episodes: usize,
    pub mpde_mm: MeanStd,
    pub miou: MeanStd,
    pub n_actions: MeanStd,
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub tier: u32,
    pub seed: u64,
    pub mode: Mode,
    pub steps: Vec<TraceStep>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct BenchReport {
    /// Sorted by (tier, seed, mode).
    pub rows: Vec<BenchRow>,
    pub traces: Vec<TraceRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub tiers: Vec<u32>,
    pub seeds_per_tier: u64,
    pub modes: Vec<Mode>,
    /// Template for every episode; `mode`, `seed` and the noise seed are
    /// filled in per episode.
    pub episode: EpisodeConfig,
    pub master_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            tiers: vec![1, 2, 3, 4],
            seeds_per_tier: 10,
            modes: vec![Mode::Defnet],
            episode: EpisodeConfig::default(),
            master_seed: 0,
        }
    }
}

/// Episode configuration for one cell. The noise stream depends only on
/// (master seed, tier, seed), so modes are compared on identical noise.
pub fn episode_config(cfg: &BenchConfig, tier: u32, seed: u64, mode: Mode) -> EpisodeConfig {
    let mut ep = cfg.episode.clone();
    ep.mode = mode;
    ep.seed = derive_seed(cfg.master_seed, &[tier as u64, seed, 1]);
    ep.noise.seed = derive_seed(cfg.master_seed, &[tier as u64, seed, 2]);
    ep
}

pub fn run_bench(cfg: &BenchConfig, p: &Pipeline) -> Result<BenchReport> {
    let cloth = p.dataset.meta.cloth.clone();
    let start = ClothState::flat(&cloth)?;
    let mut cells = Vec::new();
    for &tier in &cfg.tiers {
        for seed in 0..cfg.seeds_per_tier {
            for &mode in &cfg.modes {
                cells.push((tier, seed, mode));
            }
        }
    }
    let mut results: Vec<(BenchRow, TraceRecord)> = cells
        .par_iter()
        .map(|&(tier, seed, mode)| {
            let goal = goal_state(&cloth, &goal_library(&cloth, tier, seed)?)?;
            let r: EpisodeResult = run_episode(&episode_config(cfg, tier, seed, mode), &start, &goal, p)?;
            Ok((
                BenchRow {
                    tier,
                    seed,
                    mode,
                    mpde_mm: r.mpde_mm,
                    miou: r.miou,
                    n_actions: r.n_actions,
                    success: r.success,
                },
                TraceRecord { tier, seed, mode, steps: r.trace },
            ))
        })
        .collect::<Result<_>>()?;
    results.sort_by_key(|r| (r.0.tier, r.0.seed, r.0.mode));
    let (rows, traces) = results.into_iter().unzip();
    Ok(BenchReport { rows, traces })
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{},{}",
                r.tier, r.seed, r.mode, r.mpde_mm, r.miou, r.n_actions, r.success
            );
        }
        out
    }

    /// One JSON object per episode.
    pub fn traces_jsonl(&self) -> String {
        self.traces.iter().map(|t| serde_json::to_string(t).expect("trace records serialise") + "\n").collect()
    }

    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut groups: BTreeMap<(u32, Mode), Vec<&BenchRow>> = BTreeMap::new();
        for r in &self.rows {
            groups.entry((r.tier, r.mode)).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|((tier, mode), rows)| {
                let col = |f: fn(&BenchRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
                Aggregate {
                    tier,
                    mode,
                    episodes: rows.len(),
                    mpde_mm: MeanStd::of(&col(|r| r.mpde_mm)),
                    miou: MeanStd::of(&col(|r| r.miou)),
                    n_actions: MeanStd::of(&col(|r| r.n_actions as f64)),
                    success_rate: rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64,
                }
            })
            .collect()
    }

    /// Mean MPDE of `mode` over the given tiers.
    pub fn mean_mpde(&self, mode: Mode, tiers: &[u32]) -> f64 {
        let v: Vec<f64> =
            self.rows.iter().filter(|r| r.mode == mode && tiers.contains(&r.tier)).map(|r| r.mpde_mm).collect();
        MeanStd::of(&v).mean
    }

    /// Fixed-width summary: one line per (tier, mode).
    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<4} {:<17} {:>8}  {:>21}  {:>6}  {:>7}  {:>7}\n",
            "tier", "mode", "episodes", "mpde_mm (mean ± std) ", "miou", "actions", "success"
        );
        for a in self.aggregates() {
            let _ = writeln!(
                out,
                "{:<4} {:<17} {:>8}  {:>9.3} ± {:<9.3}  {:>6.4}  {:>7.2}  {:>7.2}",
                a.tier,
                a.mode.as_str(),
                a.episodes,
                a.mpde_mm.mean,
                a.mpde_mm.std,
                a.miou.mean,
                a.n_actions.mean,
                a.success_rate
            );
        }
        out
    }
}
