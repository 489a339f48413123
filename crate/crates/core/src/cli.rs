//! Command-line front end: corpus generation, encoder fitting, roadmap
//! building, planning, single episodes, benchmarks and ablations.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! missing artifacts, I/O and everything else.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::cloth::{render, ClothConfig, ClothState, NoiseParams};
use crate::config::{load_config, merge_into_args};
use crate::data::{
    build_corpus_with, goal_library, goal_state, load_dataset, load_goal, save_dataset, save_goal, CorpusConfig,
    GoalFile, DATASET_VERSION,
};
use crate::executor::{run_bench, run_episode, BenchConfig, BenchReport, EpisodeConfig, Mode, Pipeline};
use crate::latent::{encode_dataset, fit_encoder, EncoderHyper, EncoderModel, EncoderVariant};
use crate::roadmap::{build_lsr, tune_epsilon};
use crate::util::write_atomic;
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "fabric-fold", version, about = "Latent-roadmap and flow-based cloth folding")]
struct Cli {
    /// `key = value` file supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the transition corpus and export the goal library.
    GenData(GenData),
    /// Fit an observation encoder on a corpus.
    FitEncoder(FitEncoder),
    /// Build the latent space roadmap.
    BuildLsr(BuildLsr),
    /// Plan a shortest sequence of intermediate states.
    Plan(PlanCmd),
    /// Run one folding episode.
    Run(RunCmd),
    /// Run the tiered benchmark and write the metrics CSV.
    Bench(BenchCmd),
    /// Noisy benchmark over every mode with a summary of the orderings.
    Ablate(BenchCmd),
}

#[derive(Args, Debug)]
struct GenData {
    #[arg(long)]
    out: PathBuf,
    /// Goal library directory; defaults to `goals/` next to the corpus.
    #[arg(long)]
    goals_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    variants: u64,
    #[arg(long, default_value_t = 2)]
    perturbs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    resolution: usize,
    #[arg(long, default_value_t = 15.0)]
    delta_move_mm: f64,
    #[arg(long, default_value_t = 1.5)]
    perturb_mm: f64,
}

#[derive(Args, Debug)]
struct FitEncoder {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "fitted-pca")]
    variant: String,
    #[arg(long, default_value_t = 8)]
    latent_dim: usize,
    #[arg(long, default_value_t = 16)]
    downsample: usize,
    #[arg(long, default_value_t = 0.25)]
    height_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct BuildLsr {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    encoder: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the graph in DOT format.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Clustering radius; tuned from the corpus when omitted.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct Artifacts {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[arg(long)]
    roadmap: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlanCmd {
    /// `flat` or a goal/state JSON file.
    #[arg(long, default_value = "flat")]
    start: String,
    /// `flat`, a goal JSON file, or `tier<k>_<seed>`.
    #[arg(long)]
    goal: String,
    #[command(flatten)]
    artifacts: Artifacts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    #[arg(long, default_value_t = 0.0)]
    grasp_sigma_mm: f64,
    #[arg(long, default_value_t = 0.0)]
    settle_sigma_mm: f64,
}

#[derive(Args, Debug)]
struct RunCmd {
    #[arg(long, default_value = "flat")]
    start: String,
    #[arg(long)]
    goal: String,
    #[command(flatten)]
    artifacts: Artifacts,
    #[arg(long, default_value = "defnet")]
    mode: String,
    #[arg(long, default_value_t = 8)]
    max_iters: usize,
    #[arg(long)]
    tau: Option<f64>,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep one path for the whole episode instead of re-drawing per step.
    #[arg(long)]
    fixed_path: bool,
    /// Per-step trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Final occupancy image (PGM).
    #[arg(long)]
    final_pgm: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchCmd {
    /// Tier list such as `1-4` or `2,3`.
    #[arg(long)]
    tiers: Option<String>,
    #[arg(long)]
    seeds: Option<u64>,
    /// Comma-separated modes.
    #[arg(long)]
    modes: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Episode traces as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    artifacts: Artifacts,
    #[arg(long)]
    grasp_sigma_mm: Option<f64>,
    #[arg(long)]
    settle_sigma_mm: Option<f64>,
    #[arg(long, default_value_t = 8)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(args, &mut out) {
        Ok(()) => 0,
        Err(CliError::Clap(e)) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            code
        }
        Err(CliError::App(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 1,
                _ => 2,
            }
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Clap(clap::Error),
    App(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::App(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::App(Error::Io(e))
    }
}

/// Parses `args`, applies the config file and executes the subcommand,
/// writing human-readable output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> std::result::Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut args: Vec<String> = args.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    if let Some(path) = config_path(&args) {
        let config = load_config(&path)?;
        let sub =
            args.iter().skip(1).find(|a| !a.starts_with('-') && Cli::command().find_subcommand(a).is_some()).cloned();
        if let Some(sub) = sub {
            let cmd = Cli::command();
            let sc = cmd.find_subcommand(&sub).expect("subcommand exists");
            let accepts = |key: &str| {
                sc.get_arguments()
                    .find(|a| a.get_long() == Some(key) && key != "config")
                    .map(|a| !a.get_action().takes_values())
            };
            merge_into_args(&mut args, &config, accepts)?;
        }
    }
    let cli = Cli::try_parse_from(&args).map_err(CliError::Clap)?;
    match cli.command {
        Command::GenData(c) => gen_data(c, out)?,
        Command::FitEncoder(c) => fit(c, out)?,
        Command::BuildLsr(c) => build(c, out)?,
        Command::Plan(c) => plan(c, out)?,
        Command::Run(c) => run_one(c, out)?,
        Command::Bench(c) => bench(c, false, out)?,
        Command::Ablate(c) => bench(c, true, out)?,
    }
    Ok(())
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn gen_data(c: GenData, out: &mut dyn Write) -> Result<()> {
    let cfg = CorpusConfig {
        n_variants: c.variants,
        perturbs_per_state: c.perturbs,
        seed: c.seed,
        resolution: c.resolution,
        delta_move_mm: c.delta_move_mm,
        perturb_scale_m: c.perturb_mm / 1000.0,
        ..CorpusConfig::default()
    };
    let d = build_corpus_with(&cfg)?;
    save_dataset(&d, &c.out)?;
    let goals_dir = c.goals_dir.unwrap_or_else(|| c.out.parent().unwrap_or(Path::new("")).join("goals"));
    for tier in 1..=4 {
        for seed in 0..c.variants {
            let script = goal_library(&cfg.cloth, tier, seed)?;
            let state = goal_state(&cfg.cloth, &script)?;
            let goal = GoalFile { version: DATASET_VERSION, tier, seed, script, state };
            save_goal(&goal, &goals_dir.join(format!("tier{tier}_{seed}.json")))?;
        }
    }
    writeln!(
        out,
        "wrote {} tuples ({} action, {} no-action, {} distinct states) to {}",
        d.tuples.len(),
        d.action_count(),
        d.no_action_count(),
        d.distinct_states(),
        c.out.display()
    )?;
    writeln!(out, "wrote {} goals to {}", 4 * c.variants, goals_dir.display())?;
    Ok(())
}

fn fit(c: FitEncoder, out: &mut dyn Write) -> Result<()> {
    let d = load_dataset(&c.data)?;
    let variant: EncoderVariant = c.variant.parse()?;
    let hyper = EncoderHyper {
        latent_dim: c.latent_dim,
        downsample: c.downsample,
        height_weight: c.height_weight,
        alpha: c.alpha,
        margin: c.margin,
        epochs: c.epochs,
        learning_rate: c.learning_rate,
        seed: c.seed,
        ..EncoderHyper::default()
    };
    let m = fit_encoder(&d, variant, &hyper)?;
    m.save(&c.out)?;
    let enc = encode_dataset(&m, &d)?;
    let min_action = enc.distances(1).into_iter().fold(f64::INFINITY, f64::min);
    let max_still = enc.distances(0).into_iter().fold(0.0, f64::max);
    writeln!(out, "wrote {} encoder (d = {}) to {}", c.variant, m.latent_dim(), c.out.display())?;
    writeln!(out, "min action distance {min_action:.4}, max no-action distance {max_still:.4}")?;
    Ok(())
}

fn build(c: BuildLsr, out: &mut dyn Write) -> Result<()> {
    let d = load_dataset(&c.data)?;
    let m = EncoderModel::load(&c.encoder)?;
    let enc = encode_dataset(&m, &d)?;
    let epsilon = match c.epsilon {
        Some(e) => e,
        None => tune_epsilon(&enc)?,
    };
    let mut rm = build_lsr(&enc, &d, epsilon)?;
    rm.dataset_path = Some(stored_path(&c.data, &c.out)?);
    rm.encoder_path = Some(stored_path(&c.encoder, &c.out)?);
    rm.save(&c.out)?;
    if let Some(dot) = &c.dot {
        write_atomic(dot, rm.to_dot().as_bytes())?;
    }
    writeln!(out, "roadmap: {} nodes, {} edges, epsilon {:.6}", rm.node_count(), rm.edges.len(), epsilon)?;
    Ok(())
}

/// `artifact` as recorded in a roadmap written to `roadmap`: relative to the
/// roadmap's directory when it lives below it, absolute otherwise.
fn stored_path(artifact: &Path, roadmap: &Path) -> Result<String> {
    let cwd = std::env::current_dir()?;
    let artifact = cwd.join(artifact);
    let base = cwd.join(roadmap).parent().map(Path::to_path_buf).unwrap_or(cwd);
    let p = artifact.strip_prefix(&base).unwrap_or(&artifact);
    Ok(p.display().to_string())
}

/// Reads the stored dataset and encoder paths from a roadmap file, resolved
/// against the roadmap's directory.
fn roadmap_refs(path: &Path) -> Result<(Option<PathBuf>, Option<PathBuf>)> {
    #[derive(serde::Deserialize)]
    struct Refs {
        dataset_path: Option<String>,
        encoder_path: Option<String>,
    }
    if !path.exists() {
        return Err(Error::ArtifactMissing(path.to_path_buf()));
    }
    let refs: Refs = serde_json::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| Error::Format { line: e.line(), message: e.to_string() })?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: Option<String>| p.map(|p| base.join(p));
    Ok((resolve(refs.dataset_path), resolve(refs.encoder_path)))
}

fn load_pipeline(a: &Artifacts) -> Result<Pipeline> {
    match (&a.data, &a.encoder, &a.roadmap) {
        (None, None, None) => Pipeline::build_default(),
        (data, encoder, Some(roadmap)) => {
            let (stored_data, stored_encoder) = roadmap_refs(roadmap)?;
            let data = data
                .clone()
                .or(stored_data)
                .ok_or_else(|| Error::Config("roadmap does not name its dataset; pass --data".into()))?;
            let encoder = encoder
                .clone()
                .or(stored_encoder)
                .ok_or_else(|| Error::Config("roadmap does not name its encoder; pass --encoder".into()))?;
            Pipeline::load(&data, &encoder, roadmap)
        }
        (Some(data), Some(encoder), None) => {
            let d = load_dataset(data)?;
            let m = EncoderModel::load(encoder)?;
            let enc = encode_dataset(&m, &d)?;
            let rm = build_lsr(&enc, &d, tune_epsilon(&enc)?)?;
            Pipeline::from_parts(d, m, rm, Default::default())
        }
        _ => Err(Error::Config("pass --roadmap, or both --data and --encoder, or none of them".into())),
    }
}

/// `flat`, `tier<k>_<seed>`, or a goal JSON file.
fn resolve_state(spec: &str, cloth: &ClothConfig) -> Result<ClothState> {
    if spec == "flat" {
        return ClothState::flat(cloth);
    }
    if let Some(rest) = spec.strip_prefix("tier") {
        if let Some((t, s)) = rest.split_once('_') {
            if let (Ok(tier), Ok(seed)) = (t.parse::<u32>(), s.parse::<u64>()) {
                if !Path::new(spec).exists() {
                    return goal_state(cloth, &goal_library(cloth, tier, seed)?);
                }
            }
        }
    }
    Ok(load_goal(Path::new(spec))?.state)
}

fn plan(c: PlanCmd, out: &mut dyn Write) -> Result<()> {
    let p = load_pipeline(&c.artifacts)?;
    let cloth = p.dataset.meta.cloth.clone();
    let start = resolve_state(&c.start, &cloth)?;
    let goal = resolve_state(&c.goal, &cloth)?;
    let r = p.resolution();
    let plan = p.roadmap.plan(&p.encoder, &render(&start, r), &render(&goal, r), c.seed)?;
    let nodes: Vec<String> = plan.nodes.iter().map(|n| n.to_string()).collect();
    writeln!(out, "{}", nodes.join(" -> "))?;
    writeln!(
        out,
        "length {} (start covered: {}, goal covered: {})",
        plan.len(),
        plan.start_covered,
        plan.goal_covered
    )?;
    Ok(())
}

fn run_one(c: RunCmd, out: &mut dyn Write) -> Result<()> {
    let p = load_pipeline(&c.artifacts)?;
    let cloth = p.dataset.meta.cloth.clone();
    let start = resolve_state(&c.start, &cloth)?;
    let goal = resolve_state(&c.goal, &cloth)?;
    let cfg = EpisodeConfig {
        mode: c.mode.parse()?,
        max_iters: c.max_iters,
        tau: c.tau,
        noise: NoiseParams {
            grasp_sigma_m: c.noise.grasp_sigma_mm / 1000.0,
            settle_sigma_m: c.noise.settle_sigma_mm / 1000.0,
            seed: c.seed,
        },
        seed: c.seed,
        replan_path_each_iter: !c.fixed_path,
    };
    let r = run_episode(&cfg, &start, &goal, &p)?;
    if let Some(path) = &c.trace {
        let text: String =
            r.trace.iter().map(|s| serde_json::to_string(s).expect("trace steps serialise") + "\n").collect();
        write_atomic(path, text.as_bytes())?;
    }
    if let Some(path) = &c.final_pgm {
        write_atomic(path, &render(&r.final_state, p.resolution()).occupancy_pgm())?;
    }
    writeln!(
        out,
        "mode {} actions {} mpde_mm {:.6} miou {:.6} success {}",
        cfg.mode, r.n_actions, r.mpde_mm, r.miou, r.success
    )?;
    Ok(())
}

fn parse_tiers(s: &str) -> Result<Vec<u32>> {
    let bad = || Error::Config(format!("bad tier list `{s}`"));
    let mut tiers = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u32, u32) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
                tiers.extend(a..=b);
            }
            None => tiers.push(part.parse().map_err(|_| bad())?),
        }
    }
    if tiers.is_empty() || tiers.iter().any(|t| !(1..=4).contains(t)) {
        return Err(bad());
    }
    Ok(tiers)
}

fn parse_modes(s: &str) -> Result<Vec<Mode>> {
    s.split(',').map(str::trim).filter(|m| !m.is_empty()).map(str::parse).collect()
}

fn bench(c: BenchCmd, ablate: bool, out: &mut dyn Write) -> Result<()> {
    let (default_seeds, default_modes, default_grasp, default_settle) =
        if ablate { (50, "defnet,no_iim,single_step_flow,apm", 5.0, 1.0) } else { (10, "defnet", 0.0, 0.0) };
    let mut cfg = BenchConfig {
        tiers: parse_tiers(c.tiers.as_deref().unwrap_or("1-4"))?,
        seeds_per_tier: c.seeds.unwrap_or(default_seeds),
        modes: parse_modes(c.modes.as_deref().unwrap_or(default_modes))?,
        master_seed: c.master_seed,
        ..BenchConfig::default()
    };
    cfg.episode.max_iters = c.max_iters;
    cfg.episode.noise = NoiseParams {
        grasp_sigma_m: c.grasp_sigma_mm.unwrap_or(default_grasp) / 1000.0,
        settle_sigma_m: c.settle_sigma_mm.unwrap_or(default_settle) / 1000.0,
        seed: 0,
    };
    let p = load_pipeline(&c.artifacts)?;
    let report = run_bench(&cfg, &p)?;
    if let Some(path) = &c.out {
        write_atomic(path, report.to_csv().as_bytes())?;
    }
    if let Some(path) = &c.trace {
        write_atomic(path, report.traces_jsonl().as_bytes())?;
    }
    write!(out, "{}", report.summary_table())?;
    if ablate {
        write_orderings(&report, &cfg, out)?;
    }
    Ok(())
}

fn write_orderings(report: &BenchReport, cfg: &BenchConfig, out: &mut dyn Write) -> Result<()> {
    let deep: Vec<u32> = cfg.tiers.iter().copied().filter(|&t| t >= 2).collect();
    writeln!(out, "mean mpde_mm over tiers {deep:?}:")?;
    for &m in &cfg.modes {
        writeln!(out, "  {:<17} {:.3}", m.as_str(), report.mean_mpde(m, &deep))?;
    }
    if cfg.tiers.contains(&1) {
        let one: Vec<f64> = [Mode::Defnet, Mode::NoIim, Mode::SingleStepFlow]
            .into_iter()
            .filter(|m| cfg.modes.contains(m))
            .map(|m| report.mean_mpde(m, &[1]))
            .collect();
        let spread =
            one.iter().copied().fold(f64::NEG_INFINITY, f64::max) - one.iter().copied().fold(f64::INFINITY, f64::min);
        writeln!(out, "tier-1 spread across defnet/no_iim/single_step_flow: {spread:.3} mm")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tier_lists() {
        assert_eq!(parse_tiers("1-4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_tiers("2,4").unwrap(), vec![2, 4]);
        assert!(parse_tiers("0-2").is_err());
        assert!(parse_tiers("x").is_err());
    }

    #[test]
    fn mode_lists() {
        assert_eq!(parse_modes("defnet,no_iim").unwrap(), vec![Mode::Defnet, Mode::NoIim]);
        assert!(parse_modes("defnet,fast").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main(["fabric-fold", "frobnicate"]), 1);
        assert_eq!(main(["fabric-fold", "bench", "--tiers", "9"]), 1);
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("rm.json");
        let code = main(["fabric-fold", "run", "--goal", "tier1_0", "--roadmap", missing.to_str().unwrap()]);
        assert_eq!(code, 2);
    }
}
