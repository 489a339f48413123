use serde::{Deserialize, Serialize};

use crate::cloth::{apply_fold, ClothConfig, ClothState, FoldAction, NoiseParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// min x
    Left,
    /// max x
    Right,
    /// min y
    Bottom,
    /// max y
    Top,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corner {
    BottomLeft,
    BottomRight,
    TopLeft,
    TopRight,
}

/// A fold from the restricted grammar, expressed relative to the bounding
/// box of the cloth it is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GrammarFold {
    /// Grasp the midpoint of `side`, place it on the midpoint of the
    /// opposite side: folds along the centre line.
    Half(Side),
    /// Grasp the midpoint of `side`, place it halfway across: folds the
    /// outer quarter over.
    Quarter(Side),
    /// Grasp `corner`, place it on the opposite corner.
    Diagonal(Corner),
}

impl GrammarFold {
    /// All twelve grammar folds.
    pub fn all() -> Vec<GrammarFold> {
        let sides = [Side::Left, Side::Right, Side::Bottom, Side::Top];
        let corners = [Corner::BottomLeft, Corner::BottomRight, Corner::TopLeft, Corner::TopRight];
        sides
            .iter()
            .map(|&s| GrammarFold::Half(s))
            .chain(sides.iter().map(|&s| GrammarFold::Quarter(s)))
            .chain(corners.iter().map(|&c| GrammarFold::Diagonal(c)))
            .collect()
    }

    /// Concrete action for this fold on `state`.
    pub fn resolve(&self, state: &ClothState) -> FoldAction {
        let [x0, y0, x1, y1] = state.bounding_box();
        let (xm, ym) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        match *self {
            GrammarFold::Half(side) | GrammarFold::Quarter(side) => {
                let frac = if matches!(self, GrammarFold::Half(_)) { 1.0 } else { 0.5 };
                let (g, p) = match side {
                    Side::Left => ([x0, ym], [x0 + frac * (x1 - x0), ym]),
                    Side::Right => ([x1, ym], [x1 - frac * (x1 - x0), ym]),
                    Side::Bottom => ([xm, y0], [xm, y0 + frac * (y1 - y0)]),
                    Side::Top => ([xm, y1], [xm, y1 - frac * (y1 - y0)]),
                };
                FoldAction::new(g, p)
            }
            GrammarFold::Diagonal(corner) => {
                let (g, p) = match corner {
                    Corner::BottomLeft => ([x0, y0], [x1, y1]),
                    Corner::TopRight => ([x1, y1], [x0, y0]),
                    Corner::BottomRight => ([x1, y0], [x0, y1]),
                    Corner::TopLeft => ([x0, y1], [x1, y0]),
                };
                FoldAction::new(g, p)
            }
        }
    }
}

/// Number of distinct goal scripts per tier; `variant_seed` is taken modulo
/// this.
pub const GOAL_VARIANTS: u64 = 8;

/// Ordered folds whose final state is a tier-`tier` goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldScript {
    pub tier: u32,
    pub variant: u64,
    pub folds: Vec<GrammarFold>,
    /// `folds` resolved against the flat cloth and its successors.
    pub actions: Vec<FoldAction>,
}

fn perpendicular(side: Side, clockwise: bool) -> Side {
    match (side, clockwise) {
        (Side::Left, true) | (Side::Right, false) => Side::Bottom,
        (Side::Bottom, true) | (Side::Top, false) => Side::Right,
        (Side::Right, true) | (Side::Left, false) => Side::Top,
        (Side::Top, true) | (Side::Bottom, false) => Side::Left,
    }
}

/// The tier-`tier` goal script for `variant_seed`.
///
/// Tier `n` alternates `n` half folds between two perpendicular axes. The
/// eight variants pick the first side (four choices) and which
/// perpendicular side follows it (two choices), so variants `v` and `v + 4`
/// share their first fold and reach mirror-image goals.
pub fn goal_library(cloth: &ClothConfig, tier: u32, variant_seed: u64) -> Result<FoldScript> {
    if !(1..=4).contains(&tier) {
        return Err(Error::InvalidTier(tier));
    }
    let variant = variant_seed % GOAL_VARIANTS;
    let first = [Side::Left, Side::Bottom, Side::Right, Side::Top][(variant % 4) as usize];
    let second = perpendicular(first, variant < 4);
    let folds: Vec<GrammarFold> =
        [first, second, first, second].iter().take(tier as usize).map(|&s| GrammarFold::Half(s)).collect();

    let mut state = ClothState::flat(cloth)?;
    let mut actions = Vec::with_capacity(folds.len());
    for fold in &folds {
        let action = fold.resolve(&state);
        let (next, executed) = apply_fold(&state, &action, &NoiseParams::none())?;
        debug_assert!(executed, "grammar fold grasps its own bounding-box edge");
        actions.push(action);
        state = next;
    }
    Ok(FoldScript { tier, variant, folds, actions })
}

/// Zero-noise final state of `script` from the flat cloth.
pub fn goal_state(cloth: &ClothConfig, script: &FoldScript) -> Result<ClothState> {
    let mut state = ClothState::flat(cloth)?;
    for action in &script.actions {
        state = apply_fold(&state, action, &NoiseParams::none())?.0;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloth::render;

    #[test]
    fn tier_one_is_a_half_fold() {
        let cfg = ClothConfig::default();
        let flat = ClothState::flat(&cfg).unwrap();
        let [x0, y0, x1, y1] = flat.bounding_box();
        for seed in 0..8 {
            let s = goal_library(&cfg, 1, seed).unwrap();
            assert_eq!(s.actions.len(), 1);
            let a = s.actions[0];
            let on_edge_mid = |p: [f64; 2]| {
                let ym = 0.5 * (y0 + y1);
                let xm = 0.5 * (x0 + x1);
                let near = |a: f64, b: f64| (a - b).abs() < 1e-12;
                ((near(p[0], x0) || near(p[0], x1)) && near(p[1], ym))
                    || ((near(p[1], y0) || near(p[1], y1)) && near(p[0], xm))
            };
            assert!(on_edge_mid(a.grasp) && on_edge_mid(a.place), "{a:?}");
            let d = (a.place[0] - a.grasp[0]).hypot(a.place[1] - a.grasp[1]);
            assert!((d - 0.23).abs() < 1e-12);
        }
    }

    #[test]
    fn tier_two_is_a_quarter_footprint() {
        let cfg = ClothConfig::default();
        let flat_area = render(&ClothState::flat(&cfg).unwrap(), 64).area() as f64;
        for seed in 0..8 {
            let s = goal_library(&cfg, 2, seed).unwrap();
            let g = goal_state(&cfg, &s).unwrap();
            let ratio = render(&g, 64).area() as f64 / flat_area;
            assert!((ratio - 0.25).abs() < 0.03, "seed {seed}: {ratio}");
            assert_eq!(g.max_layer(), 3);
        }
    }

    #[test]
    fn tier_four_layers_and_footprint() {
        let cfg = ClothConfig::default();
        let flat_area = render(&ClothState::flat(&cfg).unwrap(), 64).area() as f64;
        for seed in 0..8 {
            let s = goal_library(&cfg, 4, seed).unwrap();
            assert_eq!(s.actions.len(), 4);
            let g = goal_state(&cfg, &s).unwrap();
            assert!(g.max_layer() <= 15);
            let ratio = render(&g, 64).area() as f64 / flat_area;
            assert!(ratio <= 1.0 / 16.0 + 0.02, "seed {seed}: {ratio}");
        }
    }

    #[test]
    fn invalid_tier() {
        let cfg = ClothConfig::default();
        assert!(matches!(goal_library(&cfg, 0, 0), Err(Error::InvalidTier(0))));
        assert!(matches!(goal_library(&cfg, 5, 0), Err(Error::InvalidTier(5))));
    }

    #[test]
    fn every_grammar_fold_executes_on_flat_cloth() {
        let cfg = ClothConfig::default();
        let flat = ClothState::flat(&cfg).unwrap();
        for f in GrammarFold::all() {
            let (next, ok) = apply_fold(&flat, &f.resolve(&flat), &NoiseParams::none()).unwrap();
            assert!(ok, "{f:?}");
            assert_ne!(next, flat);
        }
    }
}
