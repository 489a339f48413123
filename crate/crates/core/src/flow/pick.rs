use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::field::{oracle_flow, FlowField, Pixel};
use crate::cloth::{render, ClothState, FoldAction, Observation};
use crate::{Error, Result};

pub const FEATURE_COUNT: usize = 4;
const EDGE_SATURATION_PX: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub resolution: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(resolution: usize) -> Self {
        Self { resolution, values: vec![0.0; resolution * resolution] }
    }

    pub fn at(&self, p: Pixel) -> f64 {
        self.values[p.row * self.resolution + p.col]
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum PickScorer {
    /// Normalised flow magnitude.
    #[default]
    Geometric,
    /// Logistic model over [`pixel_features`].
    TrainedLogistic { weights: [f64; FEATURE_COUNT] },
}

/// Per-pixel features: normalised flow magnitude, top-layer flag, distance
/// to the nearest empty pixel (saturating at 8 px, scaled to `[0, 1]`) and a
/// constant bias.
pub fn pixel_features(flow: &FlowField, obs: &Observation) -> Vec<[f64; FEATURE_COUNT]> {
    let n = flow.vectors.len();
    let max_mag = (0..n).filter(|&k| flow.valid[k]).map(|k| flow.magnitude(k)).fold(0.0, f64::max);
    let top = obs.max_height();
    let edge = edge_distance(obs);
    (0..n)
        .map(|k| {
            let mag = if flow.valid[k] && max_mag > 0.0 { flow.magnitude(k) / max_mag } else { 0.0 };
            let on_top = (obs.occupancy[k] != 0 && obs.height[k] == top) as u8 as f64;
            [mag, on_top, edge[k].min(EDGE_SATURATION_PX) / EDGE_SATURATION_PX, 1.0]
        })
        .collect()
}

/// Chessboard distance from each occupied pixel to the nearest empty one
/// (the image border counts as empty).
fn edge_distance(obs: &Observation) -> Vec<f64> {
    let r = obs.resolution;
    let mut dist = vec![usize::MAX; r * r];
    let mut queue = VecDeque::new();
    for row in 0..r {
        for col in 0..r {
            let k = obs.index(row, col);
            if obs.occupancy[k] == 0 {
                dist[k] = 0;
                queue.push_back((row, col));
            } else if row == 0 || col == 0 || row + 1 == r || col + 1 == r {
                dist[k] = 1;
                queue.push_back((row, col));
            }
        }
    }
    while let Some((row, col)) = queue.pop_front() {
        let d = dist[row * r + col];
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let (nr, nc) = (row as i64 + dr, col as i64 + dc);
                if nr < 0 || nc < 0 || nr >= r as i64 || nc >= r as i64 {
                    continue;
                }
                let k = nr as usize * r + nc as usize;
                if dist[k] > d + 1 {
                    dist[k] = d + 1;
                    queue.push_back((nr as usize, nc as usize));
                }
            }
        }
    }
    dist.into_iter().map(|d| d as f64).collect()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn logistic(weights: &[f64; FEATURE_COUNT], f: &[f64; FEATURE_COUNT]) -> f64 {
    sigmoid(weights.iter().zip(f).map(|(w, x)| w * x).sum())
}

/// Scores every pixel as a grasp candidate. Pixels without cloth or whose
/// flow is at most `move_threshold_px` score zero.
pub fn pick_heatmap(
    scorer: &PickScorer,
    flow: &FlowField,
    obs: &Observation,
    move_threshold_px: f64,
) -> Result<Heatmap> {
    if flow.resolution != obs.resolution {
        return Err(Error::ShapeMismatch(format!(
            "flow resolution {} but observation resolution {}",
            flow.resolution, obs.resolution
        )));
    }
    let n = flow.vectors.len();
    let live = |k: usize| flow.valid[k] && flow.magnitude(k) > move_threshold_px;
    let mut h = Heatmap::zeros(flow.resolution);
    match scorer {
        PickScorer::Geometric => {
            let max = (0..n).filter(|&k| live(k)).map(|k| flow.magnitude(k)).fold(0.0, f64::max);
            for k in (0..n).filter(|&k| live(k)) {
                h.values[k] = flow.magnitude(k) / max;
            }
        }
        PickScorer::TrainedLogistic { weights } => {
            let feats = pixel_features(flow, obs);
            for k in (0..n).filter(|&k| live(k)) {
                h.values[k] = logistic(weights, &feats[k]);
            }
        }
    }
    Ok(h)
}

/// Arg-max pixel, first in row-major order among ties; `None` for an
/// all-zero heatmap (no action needed).
pub fn select_pick(h: &Heatmap) -> Option<Pixel> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &v) in h.values.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| Pixel::new(k / h.resolution, k % h.resolution))
}

/// `g + flow(g)`, rounded and clamped to the image.
pub fn select_place(flow: &FlowField, g: Pixel) -> Result<Pixel> {
    let [dr, dc] = flow.get(g).ok_or(Error::InvalidPick { row: g.row, col: g.col })?;
    let max = (flow.resolution - 1) as f64;
    let clamp = |v: f64| v.round().clamp(0.0, max) as usize;
    Ok(Pixel::new(clamp(g.row as f64 + dr), clamp(g.col as f64 + dc)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Proposal {
    Act { action: FoldAction, pick: Pixel, place: Pixel },
    NoActionNeeded,
}

impl Proposal {
    pub fn action(&self) -> Option<FoldAction> {
        match self {
            Proposal::Act { action, .. } => Some(*action),
            Proposal::NoActionNeeded => None,
        }
    }
}

/// Flow from `current` to `subgoal`, heatmap arg-max as the grasp pixel, the
/// flow at that pixel as the place, both mapped to pixel centres in metres.
pub fn propose_action(
    scorer: &PickScorer,
    current: &ClothState,
    subgoal: &ClothState,
    resolution: usize,
    move_threshold_mm: f64,
) -> Result<Proposal> {
    let flow = oracle_flow(current, subgoal, resolution)?;
    let obs = render(current, resolution);
    let threshold_px = move_threshold_mm / 1000.0 / obs.pixel_to_meter;
    let h = pick_heatmap(scorer, &flow, &obs, threshold_px)?;
    let Some(pick) = select_pick(&h) else {
        return Ok(Proposal::NoActionNeeded);
    };
    let place = select_place(&flow, pick)?;
    let action = FoldAction::new(obs.pixel_center(pick.row, pick.col), obs.pixel_center(place.row, place.col));
    Ok(Proposal::Act { action, pick, place })
}
