use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grammar::{goal_library, FoldScript, GrammarFold};
use crate::cloth::{
    apply_fold, max_particle_movement, render, ClothConfig, ClothState, FoldAction, NoiseParams, Observation,
};
use crate::{derive_seed, Error, Result};

/// Movement threshold separating action from no-action pairs.
pub const DEFAULT_DELTA_MOVE_MM: f64 = 15.0;

const MAX_PERTURB_ATTEMPTS: usize = 100;

/// One training record: two observations, the states behind them, whether
/// the cloth moved (`a`), and the grasp-and-place action `u` between them.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionTuple {
    pub obs0: Observation,
    pub obs1: Observation,
    pub state0: ClothState,
    pub state1: ClothState,
    pub a: u8,
    pub u: FoldAction,
    /// Ground-truth ids of the underlying states, assigned by
    /// [`build_corpus`]: two states share an id iff their clean renders are
    /// identical. `None` for tuples built outside a corpus.
    pub state_ids: Option<[usize; 2]>,
}

impl TransitionTuple {
    /// Builds a tuple, labelling `a` from the particle movement between the
    /// two states.
    pub fn labelled(
        state0: ClothState,
        state1: ClothState,
        u: FoldAction,
        delta_move_mm: f64,
        resolution: usize,
    ) -> Result<Self> {
        let a = (max_particle_movement(&state0, &state1)? > delta_move_mm) as u8;
        Ok(Self {
            obs0: render(&state0, resolution),
            obs1: render(&state1, resolution),
            state0,
            state1,
            a,
            u,
            state_ids: None,
        })
    }

    pub fn is_action(&self) -> bool {
        self.a == 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub cloth: ClothConfig,
    pub resolution: usize,
    pub n_variants: u64,
    pub perturbs_per_state: usize,
    pub perturb_scale_m: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub tuples: Vec<TransitionTuple>,
    pub delta_move_mm: f64,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn action_count(&self) -> usize {
        self.tuples.iter().filter(|t| t.is_action()).count()
    }

    pub fn no_action_count(&self) -> usize {
        self.tuples.len() - self.action_count()
    }

    /// Number of distinct ground-truth states (0 if ids were never assigned).
    pub fn distinct_states(&self) -> usize {
        self.tuples.iter().filter_map(|t| t.state_ids).flat_map(|ids| ids.into_iter()).max().map_or(0, |m| m + 1)
    }

    /// Checks the movement invariant of every tuple.
    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.tuples.iter().enumerate() {
            let moved = max_particle_movement(&t.state0, &t.state1)?;
            if (moved > self.delta_move_mm) != t.is_action() {
                return Err(Error::Format {
                    line: i + 2,
                    message: format!("tuple {i}: a={} but max movement {moved:.3} mm", t.a),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub cloth: ClothConfig,
    pub resolution: usize,
    pub n_variants: u64,
    pub perturbs_per_state: usize,
    pub seed: u64,
    pub delta_move_mm: f64,
    pub perturb_scale_m: f64,
    /// Also record every quarter and diagonal fold of the flat cloth.
    pub explore_grammar: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            cloth: ClothConfig::default(),
            resolution: 64,
            n_variants: super::GOAL_VARIANTS,
            perturbs_per_state: 2,
            seed: 0,
            delta_move_mm: DEFAULT_DELTA_MOVE_MM,
            perturb_scale_m: DEFAULT_DELTA_MOVE_MM / 10.0 / 1000.0,
            explore_grammar: true,
        }
    }
}

/// Zero-noise execution of `script` from the flat cloth: one action tuple
/// per fold, plus the final state.
pub fn rollout_scripted(cfg: &CorpusConfig, script: &FoldScript) -> Result<(Vec<TransitionTuple>, ClothState)> {
    if script.actions.is_empty() {
        return Err(Error::InvalidTier(script.tier));
    }
    let mut state = ClothState::flat(&cfg.cloth)?;
    let mut tuples = Vec::with_capacity(script.actions.len());
    for action in &script.actions {
        let (next, _) = apply_fold(&state, action, &NoiseParams::none())?;
        tuples.push(TransitionTuple::labelled(state, next.clone(), *action, cfg.delta_move_mm, cfg.resolution)?);
        state = next;
    }
    Ok((tuples, state))
}

/// A no-action pair: `state` against a copy with i.i.d. Gaussian planar
/// jitter of scale `perturb_scale_m` on every particle, resampled until the
/// largest displacement is within `delta_move_mm`.
pub fn make_no_action_pair(
    state: &ClothState,
    perturb_scale_m: f64,
    seed: u64,
    delta_move_mm: f64,
    resolution: usize,
) -> Result<TransitionTuple> {
    let u = FoldAction::null_at(state.centroid());
    if perturb_scale_m == 0.0 {
        let mut t = TransitionTuple::labelled(state.clone(), state.clone(), u, delta_move_mm, resolution)?;
        t.a = 0;
        return Ok(t);
    }
    let normal = Normal::new(0.0, perturb_scale_m)
        .map_err(|_| Error::InvalidCloth(format!("bad perturbation scale {perturb_scale_m}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_PERTURB_ATTEMPTS {
        let mut jittered = state.clone();
        for q in jittered.positions_mut() {
            q[0] += normal.sample(&mut rng);
            q[1] += normal.sample(&mut rng);
        }
        if max_particle_movement(state, &jittered)? <= delta_move_mm {
            return TransitionTuple::labelled(state.clone(), jittered, u, delta_move_mm, resolution);
        }
    }
    Err(Error::PerturbTooLarge { attempts: MAX_PERTURB_ATTEMPTS })
}

/// [`build_corpus_with`] on the default cloth and thresholds.
pub fn build_corpus(n_variants: u64, perturbs_per_state: usize, seed: u64) -> Result<Dataset> {
    build_corpus_with(&CorpusConfig { n_variants, perturbs_per_state, seed, ..CorpusConfig::default() })
}

/// Scripted rollouts over every (tier, variant), optional single grammar
/// folds from the flat state, and `perturbs_per_state` no-action pairs per
/// distinct visited state.
pub fn build_corpus_with(cfg: &CorpusConfig) -> Result<Dataset> {
    if cfg.n_variants == 0 {
        return Err(Error::Config("n_variants must be >= 1".into()));
    }
    let units: Vec<(u32, u64)> = (1..=4).flat_map(|t| (0..cfg.n_variants).map(move |v| (t, v))).collect();
    let scripted: Vec<Vec<TransitionTuple>> = units
        .par_iter()
        .map(|&(tier, variant)| {
            let script = goal_library(&cfg.cloth, tier, variant)?;
            Ok(rollout_scripted(cfg, &script)?.0)
        })
        .collect::<Result<_>>()?;
    let mut tuples: Vec<TransitionTuple> = scripted.into_iter().flatten().collect();

    if cfg.explore_grammar {
        let flat = ClothState::flat(&cfg.cloth)?;
        for fold in GrammarFold::all() {
            if matches!(fold, GrammarFold::Half(_)) {
                continue;
            }
            let action = fold.resolve(&flat);
            let (next, _) = apply_fold(&flat, &action, &NoiseParams::none())?;
            tuples.push(TransitionTuple::labelled(flat.clone(), next, action, cfg.delta_move_mm, cfg.resolution)?);
        }
    }

    // Ground-truth state identity = identical clean render.
    let mut ids: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut representatives: Vec<ClothState> = Vec::new();
    for t in &mut tuples {
        let mut pair = [0; 2];
        for (slot, (obs, state)) in [(&t.obs0, &t.state0), (&t.obs1, &t.state1)].into_iter().enumerate() {
            let next_id = ids.len();
            let id = *ids.entry(obs.content_key()).or_insert(next_id);
            if id == representatives.len() {
                representatives.push(state.clone());
            }
            pair[slot] = id;
        }
        t.state_ids = Some(pair);
    }

    let no_action: Vec<TransitionTuple> = representatives
        .par_iter()
        .enumerate()
        .flat_map_iter(|(id, state)| {
            (0..cfg.perturbs_per_state).map(move |k| {
                let seed = derive_seed(cfg.seed, &[id as u64, k as u64]);
                let mut t = make_no_action_pair(state, cfg.perturb_scale_m, seed, cfg.delta_move_mm, cfg.resolution)?;
                t.state_ids = Some([id, id]);
                Ok(t)
            })
        })
        .collect::<Result<_>>()?;
    tuples.extend(no_action);

    Ok(Dataset {
        tuples,
        delta_move_mm: cfg.delta_move_mm,
        meta: DatasetMeta {
            seed: cfg.seed,
            cloth: cfg.cloth.clone(),
            resolution: cfg.resolution,
            n_variants: cfg.n_variants,
            perturbs_per_state: cfg.perturbs_per_state,
            perturb_scale_m: cfg.perturb_scale_m,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tier_rollout_counts() {
        let cfg = CorpusConfig::default();
        let s1 = goal_library(&cfg.cloth, 1, 0).unwrap();
        let (t1, _) = rollout_scripted(&cfg, &s1).unwrap();
        assert_eq!(t1.len(), 1);
        assert!(t1[0].is_action());
        let s4 = goal_library(&cfg.cloth, 4, 3).unwrap();
        let (t4, goal) = rollout_scripted(&cfg, &s4).unwrap();
        assert_eq!(t4.len(), 4);
        for t in &t4 {
            assert!(max_particle_movement(&t.state0, &t.state1).unwrap() > cfg.delta_move_mm);
            assert!(t.is_action());
        }
        assert_eq!(&t4[3].state1, &goal);
    }

    #[test]
    fn empty_script_is_rejected() {
        let cfg = CorpusConfig::default();
        let mut s = goal_library(&cfg.cloth, 1, 0).unwrap();
        s.actions.clear();
        assert!(matches!(rollout_scripted(&cfg, &s), Err(Error::InvalidTier(_))));
    }

    #[test]
    fn no_action_pairs() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        let t = make_no_action_pair(&s, 0.0, 1, 15.0, 64).unwrap();
        assert_eq!(t.a, 0);
        assert_eq!(t.obs0, t.obs1);
        assert_eq!(t.u.grasp, t.u.place);

        let t = make_no_action_pair(&s, 0.0015, 1, 15.0, 64).unwrap();
        assert_eq!(t.a, 0);
        assert!(max_particle_movement(&t.state0, &t.state1).unwrap() <= 15.0);

        assert!(matches!(make_no_action_pair(&s, 0.15, 1, 15.0, 64), Err(Error::PerturbTooLarge { attempts: 100 })));
    }

    #[test]
    fn corpus_counts() {
        let cfg = CorpusConfig { n_variants: 1, perturbs_per_state: 0, explore_grammar: false, ..Default::default() };
        let d = build_corpus_with(&cfg).unwrap();
        assert_eq!(d.action_count(), 10);
        assert_eq!(d.no_action_count(), 0);

        let cfg = CorpusConfig { n_variants: 1, perturbs_per_state: 2, explore_grammar: false, ..Default::default() };
        let d = build_corpus_with(&cfg).unwrap();
        // nested variant-0 scripts visit flat + 4 fold depths
        assert_eq!(d.distinct_states(), 5);
        assert_eq!(d.no_action_count(), 2 * d.distinct_states());
        d.validate().unwrap();
    }

    #[test]
    fn corpus_is_reproducible() {
        let a = build_corpus(2, 1, 9).unwrap();
        let b = build_corpus(2, 1, 9).unwrap();
        assert_eq!(a, b);
    }
}
