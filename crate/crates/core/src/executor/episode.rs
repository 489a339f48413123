use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Pipeline;
use crate::cloth::{
    apply_fold, mask_iou, mean_particle_distance, render, ClothState, DistanceMode, FoldAction, NoiseParams,
};
use crate::flow::{apm_baseline_action, propose_action, Pixel, Proposal};
use crate::latent::encode;
use crate::util::euclidean;
use crate::{derive_seed, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Defnet,
    NoIim,
    SingleStepFlow,
    Apm,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Defnet, Mode::NoIim, Mode::SingleStepFlow, Mode::Apm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Defnet => "defnet",
            Mode::NoIim => "no_iim",
            Mode::SingleStepFlow => "single_step_flow",
            Mode::Apm => "apm",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            Error::Config(format!("unknown mode `{s}` (expected defnet, no_iim, single_step_flow or apm)"))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub mode: Mode,
    pub max_iters: usize,
    /// Latent success radius around the goal node centroid; half the
    /// roadmap epsilon when `None`.
    pub tau: Option<f64>,
    pub noise: NoiseParams,
    pub seed: u64,
    pub replan_path_each_iter: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Defnet,
            max_iters: 8,
            tau: None,
            noise: NoiseParams::none(),
            seed: 0,
            replan_path_each_iter: true,
        }
    }
}

impl EpisodeConfig {
    /// Noise for the `k`-th executed action. Paired across modes: the same
    /// episode seed gives every mode the same perturbation per action slot.
    pub fn action_noise(&self, k: usize) -> NoiseParams {
        self.noise.with_seed(derive_seed(self.noise.seed, &[k as u64]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub node: Option<usize>,
    pub plan_len: Option<usize>,
    pub subgoal_node: Option<usize>,
    pub action: FoldAction,
    pub pick: Option<Pixel>,
    pub place: Option<Pixel>,
    pub executed: bool,
    /// Mean particle distance from the post-action state to the sub-goal.
    pub deviation_mm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub actions: Vec<FoldAction>,
    pub final_state: ClothState,
    pub mpde_mm: f64,
    pub miou: f64,
    pub n_actions: usize,
    pub success: bool,
    pub trace: Vec<TraceStep>,
}

/// Re-executes `actions` from `start` with the per-action noise of `cfg`.
pub fn replay(cfg: &EpisodeConfig, start: &ClothState, actions: &[FoldAction]) -> Result<ClothState> {
    let mut state = start.clone();
    for (k, a) in actions.iter().enumerate() {
        state = apply_fold(&state, a, &cfg.action_noise(k))?.0;
    }
    Ok(state)
}

struct Runner<'a> {
    cfg: &'a EpisodeConfig,
    p: &'a Pipeline,
    goal: &'a ClothState,
    state: ClothState,
    actions: Vec<FoldAction>,
    trace: Vec<TraceStep>,
}

impl Runner<'_> {
    fn execute(&mut self, step: TraceStep, subgoal: &ClothState) -> Result<()> {
        let noise = self.cfg.action_noise(self.actions.len());
        let (next, executed) = apply_fold(&self.state, &step.action, &noise)?;
        let deviation_mm = mean_particle_distance(&next, subgoal, DistanceMode::Spatial)?;
        self.actions.push(step.action);
        self.trace.push(TraceStep { executed, deviation_mm, ..step });
        self.state = next;
        Ok(())
    }

    fn step(iteration: usize, action: FoldAction) -> TraceStep {
        TraceStep {
            iteration,
            node: None,
            plan_len: None,
            subgoal_node: None,
            action,
            pick: None,
            place: None,
            executed: false,
            deviation_mm: 0.0,
        }
    }

    fn threshold_mm(&self) -> f64 {
        self.p.dataset.delta_move_mm
    }

    fn proposal(&self, subgoal: &ClothState) -> Result<Proposal> {
        propose_action(&self.p.scorer, &self.state, subgoal, self.p.resolution(), self.threshold_mm())
    }

    /// Closed loop: observe, plan, act towards the first planned state.
    fn closed_loop(&mut self, goal_node: usize, tau: f64, use_apm: bool) -> Result<()> {
        let rm = &self.p.roadmap;
        let r = self.p.resolution();
        for iter in 0..self.cfg.max_iters {
            let obs = render(&self.state, r);
            let z = encode(&self.p.encoder, &obs)?;
            let (node, covered) = rm.map_to_node(&z);
            if node == goal_node || euclidean(&z, &rm.nodes[goal_node].centroid) <= tau {
                return Ok(());
            }
            // The first plan uses the episode seed itself, so it matches the
            // single plan of the open-loop mode.
            let seed = if self.cfg.replan_path_each_iter && iter > 0 {
                derive_seed(self.cfg.seed, &[iter as u64])
            } else {
                self.cfg.seed
            };
            let plan = match rm.plan_between(node, goal_node, seed, covered, true) {
                Ok(plan) => plan,
                Err(Error::NoPath { .. }) => return Ok(()),
                Err(e) => return Err(e),
            };
            let (subgoal, subgoal_node) = match plan.interior.first() {
                Some(s) => (s.clone(), plan.nodes[1]),
                None => (self.goal.clone(), goal_node),
            };
            let mut step = Self::step(iter, FoldAction::null_at(self.state.centroid()));
            step.node = Some(node);
            step.plan_len = Some(plan.len());
            step.subgoal_node = Some(subgoal_node);
            if use_apm {
                step.action = apm_baseline_action(&self.p.encoded, &self.p.encoder, &obs, &render(&subgoal, r))?;
            } else {
                match self.proposal(&subgoal)? {
                    Proposal::Act { action, pick, place } => {
                        step.action = action;
                        step.pick = Some(pick);
                        step.place = Some(place);
                    }
                    Proposal::NoActionNeeded => return Ok(()),
                }
            }
            self.execute(step, &subgoal)?;
        }
        Ok(())
    }

    /// Plan once, derive every action from consecutive planned states, then
    /// execute them blind.
    fn open_loop(&mut self, start_node: usize, goal_node: usize, start_covered: bool) -> Result<()> {
        let rm = &self.p.roadmap;
        let plan = match rm.plan_between(start_node, goal_node, self.cfg.seed, start_covered, true) {
            Ok(plan) => plan,
            Err(Error::NoPath { .. }) => return Ok(()),
            Err(e) => return Err(e),
        };
        let mut planned = vec![self.state.clone()];
        planned.extend(plan.interior.iter().cloned());
        if !plan.is_empty() {
            planned.push(self.goal.clone());
        }
        let mut steps = Vec::new();
        for (i, pair) in planned.windows(2).enumerate() {
            let proposal =
                propose_action(&self.p.scorer, &pair[0], &pair[1], self.p.resolution(), self.threshold_mm())?;
            if let Proposal::Act { action, pick, place } = proposal {
                let mut step = Self::step(i, action);
                step.node = Some(plan.nodes[i]);
                step.plan_len = Some(plan.len());
                step.subgoal_node = Some(plan.nodes[i + 1]);
                step.pick = Some(pick);
                step.place = Some(place);
                steps.push((step, pair[1].clone()));
            }
        }
        for (step, subgoal) in steps.into_iter().take(self.cfg.max_iters) {
            self.execute(step, &subgoal)?;
        }
        Ok(())
    }

    /// No planning: act directly towards the final goal until the flow is
    /// below the movement threshold.
    fn direct(&mut self) -> Result<()> {
        let goal = self.goal.clone();
        for iter in 0..self.cfg.max_iters {
            match self.proposal(&goal)? {
                Proposal::Act { action, pick, place } => {
                    let mut step = Self::step(iter, action);
                    step.pick = Some(pick);
                    step.place = Some(place);
                    self.execute(step, &goal)?;
                }
                Proposal::NoActionNeeded => break,
            }
        }
        Ok(())
    }
}

/// Runs one folding episode from `start` towards `goal`.
pub fn run_episode(cfg: &EpisodeConfig, start: &ClothState, goal: &ClothState, p: &Pipeline) -> Result<EpisodeResult> {
    if cfg.max_iters == 0 {
        return Err(Error::Config("max_iters must be >= 1".into()));
    }
    let rm = &p.roadmap;
    let r = p.resolution();
    let tau = cfg.tau.unwrap_or(0.5 * rm.epsilon);
    if !(tau >= 0.0) {
        return Err(Error::Config(format!("tau must be >= 0, got {tau}")));
    }
    let goal_obs = render(goal, r);
    let (goal_node, _) = rm.map_to_node(&encode(&p.encoder, &goal_obs)?);
    let mut runner = Runner { cfg, p, goal, state: start.clone(), actions: Vec::new(), trace: Vec::new() };
    match cfg.mode {
        Mode::Defnet => runner.closed_loop(goal_node, tau, false)?,
        Mode::Apm => runner.closed_loop(goal_node, tau, true)?,
        Mode::NoIim => {
            let (start_node, covered) = rm.map_to_node(&encode(&p.encoder, &render(start, r))?);
            runner.open_loop(start_node, goal_node, covered)?
        }
        Mode::SingleStepFlow => runner.direct()?,
    }
    debug_assert!(runner.actions.len() <= cfg.max_iters);

    let final_state = runner.state;
    let z = encode(&p.encoder, &render(&final_state, r))?;
    let success = euclidean(&z, &rm.nodes[goal_node].centroid) <= tau;
    Ok(EpisodeResult {
        n_actions: runner.actions.len(),
        mpde_mm: mean_particle_distance(&final_state, goal, DistanceMode::Spatial)?,
        miou: mask_iou(&render(&final_state, r), &goal_obs)?,
        actions: runner.actions,
        final_state,
        success,
        trace: runner.trace,
    })
}
