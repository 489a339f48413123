//! Latent space roadmap: clusters of covered latent states joined by the
//! actions witnessed between them, and shortest-path planning over it.

mod paths;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloth::{ClothState, FoldAction, Observation};
use crate::data::Dataset;
use crate::latent::{encode, EncodedDataset, EncoderModel, LatentVector};
use crate::util::{euclidean, median, write_atomic};
use crate::{Error, Result};

pub use paths::{hop_distances, shortest_paths};

pub const ROADMAP_VERSION: u32 = 1;
pub const DEFAULT_PATH_CAP: usize = 64;
pub const EPSILON_MEDIAN_FACTOR: f64 = 2.0;

/// Points at one covered state: side 0 is `state0` of the tuple, side 1 is
/// `state1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoveredRef {
    pub tuple: usize,
    pub side: u8,
}

impl CoveredRef {
    pub fn from_index(idx: usize) -> Self {
        Self { tuple: idx / 2, side: (idx % 2) as u8 }
    }

    pub fn index(&self) -> usize {
        2 * self.tuple + self.side as usize
    }

    pub fn state<'a>(&self, d: &'a Dataset) -> Option<&'a ClothState> {
        let t = d.tuples.get(self.tuple)?;
        Some(if self.side == 0 { &t.state0 } else { &t.state1 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadmapNode {
    pub id: usize,
    pub centroid: LatentVector,
    pub representative: CoveredRef,
    /// Covered-state indices, ascending.
    pub members: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessedAction {
    pub from: usize,
    pub to: usize,
    pub u: FoldAction,
}

/// Undirected edge `a < b` with every action seen between the two nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadmapEdge {
    pub a: usize,
    pub b: usize,
    pub actions: Vec<WitnessedAction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roadmap {
    pub version: u32,
    pub epsilon: f64,
    pub nodes: Vec<RoadmapNode>,
    pub edges: Vec<RoadmapEdge>,
    #[serde(default)]
    pub dataset_path: Option<String>,
    #[serde(default)]
    pub encoder_path: Option<String>,
    #[serde(skip)]
    representatives: Vec<ClothState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub nodes: Vec<usize>,
    /// Representative states of the interior nodes.
    pub interior: Vec<ClothState>,
    pub start_covered: bool,
    pub goal_covered: bool,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `min(2 * median no-action distance, min action distance / 2)`. A zero
/// median leaves only the action bound, so the radius stays positive.
pub fn tune_epsilon(enc: &EncodedDataset) -> Result<f64> {
    tune_epsilon_with(enc, EPSILON_MEDIAN_FACTOR)
}

pub fn tune_epsilon_with(enc: &EncodedDataset, factor: f64) -> Result<f64> {
    let mut still = enc.distances(0);
    let moved = enc.distances(1);
    if moved.is_empty() {
        return Err(Error::InsufficientPairs);
    }
    let med = median(&mut still).ok_or(Error::InsufficientPairs)?;
    let min_moved = moved.into_iter().fold(f64::INFINITY, f64::min);
    let half = 0.5 * min_moved;
    Ok(if med > 0.0 { (factor * med).min(half) } else { half })
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // Keep the smaller index as root so labels follow first appearance.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Node label of every covered state; nodes are numbered in order of their
/// smallest member.
pub fn cluster_labels(enc: &EncodedDataset, epsilon: f64) -> Vec<usize> {
    let n = enc.covered_len();
    let mut parent: Vec<usize> = (0..n).collect();
    for (i, t) in enc.tuples.iter().enumerate() {
        if t.a == 0 {
            union(&mut parent, 2 * i, 2 * i + 1);
        }
    }
    for i in 0..n {
        for j in 0..i {
            if euclidean(enc.covered(i), enc.covered(j)) <= epsilon {
                union(&mut parent, i, j);
            }
        }
    }
    let mut label_of_root = BTreeMap::new();
    (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            let next = label_of_root.len();
            *label_of_root.entry(root).or_insert(next)
        })
        .collect()
}

pub fn build_lsr(enc: &EncodedDataset, bank: &Dataset, epsilon: f64) -> Result<Roadmap> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    if bank.tuples.len() != enc.tuples.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} encoded tuples but {} dataset tuples",
            enc.tuples.len(),
            bank.tuples.len()
        )));
    }
    let labels = cluster_labels(enc, epsilon);
    let n_nodes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); n_nodes];
    for (idx, &l) in labels.iter().enumerate() {
        members[l].push(idx);
    }

    let mut nodes = Vec::with_capacity(n_nodes);
    let mut representatives = Vec::with_capacity(n_nodes);
    for (id, m) in members.into_iter().enumerate() {
        let dim = enc.covered(m[0]).len();
        let mut centroid = vec![0.0; dim];
        for &idx in &m {
            for (c, v) in centroid.iter_mut().zip(enc.covered(idx)) {
                *c += v / m.len() as f64;
            }
        }
        let mut best = m[0];
        let mut best_dist = f64::INFINITY;
        for &idx in &m {
            let d = euclidean(enc.covered(idx), &centroid);
            if d < best_dist {
                best = idx;
                best_dist = d;
            }
        }
        let representative = CoveredRef::from_index(best);
        representatives.push(representative.state(bank).cloned().ok_or(Error::EmptyBank)?);
        nodes.push(RoadmapNode { id, centroid, representative, members: m });
    }

    let mut edges: BTreeMap<(usize, usize), Vec<WitnessedAction>> = BTreeMap::new();
    for (i, t) in enc.tuples.iter().enumerate() {
        if t.a == 0 {
            continue;
        }
        let (from, to) = (labels[2 * i], labels[2 * i + 1]);
        if from == to {
            return Err(Error::EpsilonTooLarge { epsilon, tuple: i });
        }
        let w = WitnessedAction { from, to, u: t.u };
        let list = edges.entry((from.min(to), from.max(to))).or_default();
        if !list.contains(&w) {
            list.push(w);
        }
    }
    let edges = edges.into_iter().map(|((a, b), actions)| RoadmapEdge { a, b, actions }).collect();

    Ok(Roadmap {
        version: ROADMAP_VERSION,
        epsilon,
        nodes,
        edges,
        dataset_path: None,
        encoder_path: None,
        representatives,
    })
}

impl Roadmap {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn representative(&self, id: usize) -> &ClothState {
        &self.representatives[id]
    }

    /// Successors along witnessed action directions, ascending.
    pub fn directed_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            for w in &e.actions {
                adj[w.from].push(w.to);
            }
        }
        for succ in &mut adj {
            succ.sort_unstable();
            succ.dedup();
        }
        adj
    }

    /// Nearest centroid (lowest id on ties) and whether it lies within
    /// epsilon.
    pub fn map_to_node(&self, z: &[f64]) -> (usize, bool) {
        let mut best = (0, f64::INFINITY);
        for n in &self.nodes {
            let d = euclidean(z, &n.centroid);
            if d < best.1 {
                best = (n.id, d);
            }
        }
        (best.0, best.1 <= self.epsilon)
    }

    pub fn all_shortest_paths(&self, s: usize, g: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
        shortest_paths(&self.directed_adjacency(), s, g, cap)
    }

    pub fn plan(&self, m: &EncoderModel, obs_start: &Observation, obs_goal: &Observation, seed: u64) -> Result<Plan> {
        let (s, start_covered) = self.map_to_node(&encode(m, obs_start)?);
        let (g, goal_covered) = self.map_to_node(&encode(m, obs_goal)?);
        self.plan_between(s, g, seed, start_covered, goal_covered)
    }

    pub fn plan_between(&self, s: usize, g: usize, seed: u64, start_covered: bool, goal_covered: bool) -> Result<Plan> {
        let paths = self.all_shortest_paths(s, g, DEFAULT_PATH_CAP)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nodes = paths[rng.random_range(0..paths.len())].clone();
        let interior = if nodes.len() > 2 {
            nodes[1..nodes.len() - 1].iter().map(|&id| self.representatives[id].clone()).collect()
        } else {
            Vec::new()
        };
        Ok(Plan { nodes, interior, start_covered, goal_covered })
    }

    /// Actions witnessed from `from` to `to`.
    pub fn actions_between(&self, from: usize, to: usize) -> Vec<FoldAction> {
        self.edges
            .iter()
            .filter(|e| (e.a, e.b) == (from.min(to), from.max(to)))
            .flat_map(|e| e.actions.iter().filter(|w| w.from == from && w.to == to).map(|w| w.u))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format { line: 1, message: e.to_string() })
    }

    /// Parses a roadmap and restores representative states from `bank`.
    pub fn from_json(text: &str, bank: &Dataset) -> Result<Self> {
        let mut rm: Roadmap =
            serde_json::from_str(text).map_err(|e| Error::Format { line: e.line(), message: e.to_string() })?;
        if rm.version != ROADMAP_VERSION {
            return Err(Error::Format { line: 1, message: format!("unsupported roadmap version {}", rm.version) });
        }
        rm.representatives = rm
            .nodes
            .iter()
            .map(|n| {
                n.representative.state(bank).cloned().ok_or_else(|| Error::Format {
                    line: 1,
                    message: format!("node {} refers to tuple {} outside the dataset", n.id, n.representative.tuple),
                })
            })
            .collect::<Result<_>>()?;
        Ok(rm)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path, bank: &Dataset) -> Result<Self> {
        if !path.exists() {
            return Err(Error::ArtifactMissing(path.to_path_buf()));
        }
        Self::from_json(&fs::read_to_string(path)?, bank)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph roadmap {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  n{} [label=\"{} ({})\"];", n.id, n.id, n.members.len());
        }
        for e in &self.edges {
            let _ = writeln!(out, "  n{} -- n{} [label=\"{}\"];", e.a, e.b, e.actions.len());
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloth::{render, ClothConfig};
    use crate::data::{goal_library, goal_state, DatasetMeta, TransitionTuple};
    use crate::latent::LatentTuple;

    fn enc(tuples: &[(Vec<f64>, Vec<f64>, u8)]) -> EncodedDataset {
        EncodedDataset {
            tuples: tuples
                .iter()
                .enumerate()
                .map(|(i, (z0, z1, a))| LatentTuple {
                    z0: z0.clone(),
                    z1: z1.clone(),
                    a: *a,
                    u: FoldAction::new([0.1, 0.1], [0.2, 0.1 + i as f64 * 0.01]),
                    source: i,
                })
                .collect(),
        }
    }

    fn bank(n: usize) -> Dataset {
        let cfg = ClothConfig::default();
        let flat = ClothState::flat(&cfg).unwrap();
        let folded = goal_state(&cfg, &goal_library(&cfg, 1, 0).unwrap()).unwrap();
        let t = TransitionTuple {
            obs0: render(&flat, 64),
            obs1: render(&folded, 64),
            state0: flat,
            state1: folded,
            a: 1,
            u: FoldAction::null_at([0.2, 0.2]),
            state_ids: None,
        };
        Dataset {
            tuples: vec![t; n],
            delta_move_mm: 15.0,
            meta: DatasetMeta {
                seed: 0,
                cloth: cfg,
                resolution: 64,
                n_variants: 1,
                perturbs_per_state: 0,
                perturb_scale_m: 0.0,
            },
        }
    }

    #[test]
    fn epsilon_formula() {
        let e = enc(&[(vec![0.0], vec![0.0], 0), (vec![0.0], vec![10.0], 1)]);
        assert_eq!(tune_epsilon(&e).unwrap(), 5.0);
        let e = enc(&[
            (vec![0.0], vec![1.0], 0),
            (vec![0.0], vec![1.0], 0),
            (vec![0.0], vec![1.0], 0),
            (vec![0.0], vec![100.0], 1),
        ]);
        assert_eq!(tune_epsilon(&e).unwrap(), 2.0);
        let e = enc(&[(vec![0.0], vec![1.0], 0)]);
        assert!(matches!(tune_epsilon(&e), Err(Error::InsufficientPairs)));
        let e = enc(&[(vec![0.0], vec![1.0], 1)]);
        assert!(matches!(tune_epsilon(&e), Err(Error::InsufficientPairs)));
    }

    #[test]
    fn repeated_state_is_one_node() {
        let z = vec![1.0, 2.0];
        let e = enc(&vec![(z.clone(), z.clone(), 0); 5]);
        let rm = build_lsr(&e, &bank(5), 0.5).unwrap();
        assert_eq!(rm.node_count(), 1);
        assert!(rm.edges.is_empty());
        assert_eq!(rm.nodes[0].members.len(), 10);
    }

    #[test]
    fn two_far_states_make_one_edge() {
        let e = enc(&[(vec![0.0, 0.0], vec![10.0, 0.0], 1)]);
        let rm = build_lsr(&e, &bank(1), 1.0).unwrap();
        assert_eq!(rm.node_count(), 2);
        assert_eq!(rm.edges.len(), 1);
        assert_eq!(rm.edges[0].actions, vec![WitnessedAction { from: 0, to: 1, u: e.tuples[0].u }]);
        assert_eq!(rm.actions_between(0, 1), vec![e.tuples[0].u]);
        assert!(rm.actions_between(1, 0).is_empty());
        // Stored undirected, traversed only in the witnessed direction.
        assert_eq!(rm.directed_adjacency(), vec![vec![1], vec![]]);
        assert!(matches!(rm.all_shortest_paths(1, 0, 64), Err(Error::NoPath { .. })));
    }

    #[test]
    fn collapsed_action_is_rejected() {
        let e = enc(&[(vec![0.0], vec![1.0], 1)]);
        assert!(matches!(build_lsr(&e, &bank(1), 2.0), Err(Error::EpsilonTooLarge { tuple: 0, .. })));
    }

    #[test]
    fn map_to_node_coverage_and_ties() {
        let e = enc(&[(vec![0.0], vec![10.0], 1)]);
        let rm = build_lsr(&e, &bank(1), 1.0).unwrap();
        assert_eq!(rm.map_to_node(&[10.0]), (1, true));
        assert_eq!(rm.map_to_node(&[5.0]), (0, false));
        assert_eq!(rm.map_to_node(&[110.0]), (1, false));
    }

    #[test]
    fn plan_selection_is_uniform_on_a_square() {
        let e = enc(&[
            (vec![0.0, 0.0], vec![10.0, 0.0], 1),
            (vec![10.0, 0.0], vec![10.0, 10.0], 1),
            (vec![0.0, 0.0], vec![0.0, 10.0], 1),
            (vec![0.0, 10.0], vec![10.0, 10.0], 1),
        ]);
        let rm = build_lsr(&e, &bank(4), 1.0).unwrap();
        assert_eq!(rm.node_count(), 4);
        let (s, g) = (rm.map_to_node(&[0.0, 0.0]).0, rm.map_to_node(&[10.0, 10.0]).0);
        let paths = rm.all_shortest_paths(s, g, 64).unwrap();
        assert_eq!(paths.len(), 2);
        let first =
            (0..1000).filter(|&seed| rm.plan_between(s, g, seed, true, true).unwrap().nodes == paths[0]).count();
        assert!((450..=550).contains(&first), "{first}");
        let a = rm.plan_between(s, g, 7, true, true).unwrap();
        assert_eq!(a, rm.plan_between(s, g, 7, true, true).unwrap());
        assert_eq!(a.len(), 2);
        assert_eq!(a.interior.len(), 1);
    }

    #[test]
    fn json_and_dot() {
        let e = enc(&[(vec![0.0], vec![10.0], 1)]);
        let b = bank(1);
        let rm = build_lsr(&e, &b, 1.0).unwrap();
        let back = Roadmap::from_json(&rm.to_json().unwrap(), &b).unwrap();
        assert_eq!(back, rm);
        assert_eq!(back.representative(1), &b.tuples[0].state1);
        let dot = rm.to_dot();
        assert!(dot.starts_with("graph roadmap {"));
        assert!(dot.contains("n0 -- n1"));
    }
}
