use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Geometry of a cloth and the square workspace it lives in.
///
/// The workspace frame spans `[0, workspace_m]` on both axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClothConfig {
    pub grid_w: usize,
    pub grid_h: usize,
    pub spacing_m: f64,
    pub thickness_m: f64,
    pub workspace_m: f64,
}

impl Default for ClothConfig {
    fn default() -> Self {
        Self { grid_w: 24, grid_h: 24, spacing_m: 0.01, thickness_m: 0.002, workspace_m: 0.4 }
    }
}

impl ClothConfig {
    pub fn grasp_radius_m(&self) -> f64 {
        1.5 * self.spacing_m
    }
}

/// Particle configuration of one cloth: planar positions plus a stacking
/// index per particle. The height of particle `i` is `layers[i] * thickness_m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRecord", into = "StateRecord")]
pub struct ClothState {
    grid_w: usize,
    grid_h: usize,
    positions: Vec<[f64; 2]>,
    layers: Vec<u32>,
    spacing_m: f64,
    thickness_m: f64,
    workspace_m: f64,
}

impl ClothState {
    /// Axis-aligned flat grid centred in the workspace, all layers 0.
    pub fn flat(cfg: &ClothConfig) -> Result<Self> {
        if cfg.grid_w < 2 || cfg.grid_h < 2 {
            return Err(Error::InvalidCloth(format!("grid must be at least 2x2, got {}x{}", cfg.grid_w, cfg.grid_h)));
        }
        if !(cfg.spacing_m > 0.0) || !cfg.spacing_m.is_finite() {
            return Err(Error::InvalidCloth(format!("spacing must be positive, got {}", cfg.spacing_m)));
        }
        if !(cfg.thickness_m >= 0.0) || !(cfg.workspace_m > 0.0) {
            return Err(Error::InvalidCloth("thickness must be >= 0 and workspace > 0".into()));
        }
        let x0 = 0.5 * cfg.workspace_m - 0.5 * (cfg.grid_w - 1) as f64 * cfg.spacing_m;
        let y0 = 0.5 * cfg.workspace_m - 0.5 * (cfg.grid_h - 1) as f64 * cfg.spacing_m;
        let mut positions = Vec::with_capacity(cfg.grid_w * cfg.grid_h);
        for j in 0..cfg.grid_h {
            for i in 0..cfg.grid_w {
                positions.push([x0 + i as f64 * cfg.spacing_m, y0 + j as f64 * cfg.spacing_m]);
            }
        }
        Ok(Self {
            grid_w: cfg.grid_w,
            grid_h: cfg.grid_h,
            layers: vec![0; positions.len()],
            positions,
            spacing_m: cfg.spacing_m,
            thickness_m: cfg.thickness_m,
            workspace_m: cfg.workspace_m,
        })
    }

    /// Builds a state from explicit particle data, checking every invariant.
    pub fn from_parts(cfg: &ClothConfig, positions: Vec<[f64; 2]>, layers: Vec<u32>) -> Result<Self> {
        let flat = Self::flat(cfg)?;
        let n = flat.positions.len();
        if positions.len() != n || layers.len() != n {
            return Err(Error::InvalidCloth(format!(
                "expected {n} particles, got {} positions and {} layers",
                positions.len(),
                layers.len()
            )));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCloth("non-finite particle position".into()));
        }
        Ok(Self { positions, layers, ..flat })
    }

    pub fn config(&self) -> ClothConfig {
        ClothConfig {
            grid_w: self.grid_w,
            grid_h: self.grid_h,
            spacing_m: self.spacing_m,
            thickness_m: self.thickness_m,
            workspace_m: self.workspace_m,
        }
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn layers(&self) -> &[u32] {
        &self.layers
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    pub fn thickness_m(&self) -> f64 {
        self.thickness_m
    }

    pub fn workspace_m(&self) -> f64 {
        self.workspace_m
    }

    pub fn grasp_radius_m(&self) -> f64 {
        1.5 * self.spacing_m
    }

    pub fn max_layer(&self) -> u32 {
        self.layers.iter().copied().max().unwrap_or(0)
    }

    pub fn z(&self, i: usize) -> f64 {
        self.layers[i] as f64 * self.thickness_m
    }

    pub fn same_grid(&self, other: &ClothState) -> bool {
        self.grid_w == other.grid_w && self.grid_h == other.grid_h
    }

    /// `(min_x, min_y, max_x, max_y)` over all particles.
    pub fn bounding_box(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in &self.positions {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].min(p[1]);
            b[2] = b[2].max(p[0]);
            b[3] = b[3].max(p[1]);
        }
        b
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.positions.len() as f64;
        let (sx, sy) = self.positions.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }

    /// Index of the particle nearest `point`, with its distance.
    pub fn nearest_particle(&self, point: [f64; 2]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.positions.iter().enumerate() {
            let d = (q[0] - point[0]).hypot(q[1] - point[1]);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.positions
    }

    pub(crate) fn contains_point(&self, p: [f64; 2]) -> bool {
        p.iter().all(|v| v.is_finite() && *v >= 0.0 && *v <= self.workspace_m)
    }
}

#[derive(Serialize, Deserialize)]
struct StateRecord {
    grid_w: usize,
    grid_h: usize,
    spacing_m: f64,
    thickness_m: f64,
    workspace_m: f64,
    positions: Vec<f64>,
    layers: Vec<u32>,
}

impl From<ClothState> for StateRecord {
    fn from(s: ClothState) -> Self {
        Self {
            grid_w: s.grid_w,
            grid_h: s.grid_h,
            spacing_m: s.spacing_m,
            thickness_m: s.thickness_m,
            workspace_m: s.workspace_m,
            positions: s.positions.iter().flatten().copied().collect(),
            layers: s.layers,
        }
    }
}

impl TryFrom<StateRecord> for ClothState {
    type Error = Error;

    fn try_from(r: StateRecord) -> Result<Self> {
        if !r.positions.len().is_multiple_of(2) {
            return Err(Error::InvalidCloth("odd number of position coordinates".into()));
        }
        let cfg = ClothConfig {
            grid_w: r.grid_w,
            grid_h: r.grid_h,
            spacing_m: r.spacing_m,
            thickness_m: r.thickness_m,
            workspace_m: r.workspace_m,
        };
        let positions = r.positions.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        ClothState::from_parts(&cfg, positions, r.layers)
    }
}

/// One grasp-and-place primitive in workspace metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldAction {
    pub grasp: [f64; 2],
    pub place: [f64; 2],
}

impl FoldAction {
    pub fn new(grasp: [f64; 2], place: [f64; 2]) -> Self {
        Self { grasp, place }
    }

    /// Grasp and place at the same point: the "no movement" action stored
    /// with no-action tuples.
    pub fn null_at(p: [f64; 2]) -> Self {
        Self { grasp: p, place: p }
    }
}

/// Execution noise. Zero sigmas give bit-deterministic dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub grasp_sigma_m: f64,
    pub settle_sigma_m: f64,
    pub seed: u64,
}

impl NoiseParams {
    pub fn none() -> Self {
        Self { grasp_sigma_m: 0.0, settle_sigma_m: 0.0, seed: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.grasp_sigma_m == 0.0 && self.settle_sigma_m == 0.0
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self::none()
    }
}

/// Reflection of `q` across the line through `mid` with unit normal `n`.
pub fn reflect_point(q: [f64; 2], mid: [f64; 2], n: [f64; 2]) -> [f64; 2] {
    let s = (q[0] - mid[0]) * n[0] + (q[1] - mid[1]) * n[1];
    [q[0] - 2.0 * s * n[0], q[1] - 2.0 * s * n[1]]
}

/// Executes one grasp-and-place fold.
///
/// Every particle on the grasp side of the perpendicular bisector of
/// `grasp -> place` is mirrored across it and stacked on top
/// (`layer -> 2M + 1 - layer`, `M` the pre-fold maximum). Particles on the
/// bisector or beyond it are untouched. Returns the input unchanged with
/// `executed = false` when the (possibly perturbed) grasp point has no
/// particle within the grasp radius or grasp and place coincide.
pub fn apply_fold(state: &ClothState, action: &FoldAction, noise: &NoiseParams) -> Result<(ClothState, bool)> {
    if !state.contains_point(action.grasp) || !state.contains_point(action.place) {
        return Err(Error::InvalidAction(format!(
            "action {:?} -> {:?} leaves the workspace",
            action.grasp, action.place
        )));
    }
    if !(noise.grasp_sigma_m >= 0.0 && noise.settle_sigma_m >= 0.0) {
        return Err(Error::InvalidAction("noise sigmas must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut g = action.grasp;
    if noise.grasp_sigma_m > 0.0 {
        let dist = Normal::new(0.0, noise.grasp_sigma_m).expect("sigma checked above");
        g[0] += dist.sample(&mut rng);
        g[1] += dist.sample(&mut rng);
    }
    let p = action.place;
    let d = [p[0] - g[0], p[1] - g[1]];
    let len = d[0].hypot(d[1]);
    if !(len > 1e-12) {
        return Ok((state.clone(), false));
    }
    if state.nearest_particle(g).1 > state.grasp_radius_m() {
        return Ok((state.clone(), false));
    }

    let mid = [0.5 * (g[0] + p[0]), 0.5 * (g[1] + p[1])];
    let n = [d[0] / len, d[1] / len];
    let top = state.max_layer();
    let settle =
        (noise.settle_sigma_m > 0.0).then(|| Normal::new(0.0, noise.settle_sigma_m).expect("sigma checked above"));

    let mut next = state.clone();
    for (q, layer) in next.positions.iter_mut().zip(next.layers.iter_mut()) {
        let s = (q[0] - mid[0]) * n[0] + (q[1] - mid[1]) * n[1];
        if s < 0.0 {
            *q = [q[0] - 2.0 * s * n[0], q[1] - 2.0 * s * n[1]];
            *layer = 2 * top + 1 - *layer;
            if let Some(jitter) = &settle {
                q[0] += jitter.sample(&mut rng);
                q[1] += jitter.sample(&mut rng);
            }
        }
    }
    Ok((next, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> ClothState {
        // 11x11 particles covering [0, 1]^2 in a unit workspace.
        let cfg = ClothConfig { grid_w: 11, grid_h: 11, spacing_m: 0.1, thickness_m: 0.01, workspace_m: 1.0 };
        ClothState::flat(&cfg).unwrap()
    }

    #[test]
    fn flat_two_by_two() {
        let cfg = ClothConfig { grid_w: 2, grid_h: 2, spacing_m: 0.1, ..Default::default() };
        let s = ClothState::flat(&cfg).unwrap();
        assert_eq!(s.len(), 4);
        let [x0, y0, x1, y1] = s.bounding_box();
        assert!(((x1 - x0) - 0.1).abs() < 1e-15 && ((y1 - y0) - 0.1).abs() < 1e-15);
        assert!(s.layers().iter().all(|&l| l == 0));
    }

    #[test]
    fn flat_default_span() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        assert_eq!(s.len(), 576);
        let [x0, _, x1, _] = s.bounding_box();
        assert!(((x1 - x0) - 0.23).abs() < 1e-12);
        let c = s.centroid();
        assert!((c[0] - 0.2).abs() < 1e-12 && (c[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn invalid_dimensions() {
        let cfg = ClothConfig { grid_w: 1, grid_h: 5, ..Default::default() };
        assert!(matches!(ClothState::flat(&cfg), Err(Error::InvalidCloth(_))));
        let cfg = ClothConfig { spacing_m: 0.0, ..Default::default() };
        assert!(matches!(ClothState::flat(&cfg), Err(Error::InvalidCloth(_))));
    }

    #[test]
    fn diagonal_fold_of_unit_square() {
        let s = unit_square();
        let a = FoldAction::new([0.0, 0.0], [1.0, 1.0]);
        let (next, executed) = apply_fold(&s, &a, &NoiseParams::none()).unwrap();
        assert!(executed);
        // particle (0.2, 0) is index 2 of row 0
        let q = next.positions()[2];
        assert!((q[0] - 1.0).abs() < 1e-12 && (q[1] - 0.8).abs() < 1e-12, "{q:?}");
        assert_eq!(next.layers()[2], 1);
        // (x, y) -> (1 - y, 1 - x) on the whole moving triangle
        for (i, (before, after)) in s.positions().iter().zip(next.positions()).enumerate() {
            if before[0] + before[1] < 1.0 - 1e-9 {
                assert!((after[0] - (1.0 - before[1])).abs() < 1e-12);
                assert!((after[1] - (1.0 - before[0])).abs() < 1e-12);
                assert_eq!(next.layers()[i], 1);
            }
        }
    }

    #[test]
    fn degenerate_and_missed_grasps_are_no_ops() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        let on = s.positions()[0];
        let (same, executed) = apply_fold(&s, &FoldAction::new(on, on), &NoiseParams::none()).unwrap();
        assert!(!executed);
        assert_eq!(same, s);
        let (same, executed) =
            apply_fold(&s, &FoldAction::new([0.01, 0.01], [0.2, 0.2]), &NoiseParams::none()).unwrap();
        assert!(!executed);
        assert_eq!(same, s);
    }

    #[test]
    fn out_of_workspace_action_is_rejected() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        let r = apply_fold(&s, &FoldAction::new([0.1, 0.1], [0.5, 0.1]), &NoiseParams::none());
        assert!(matches!(r, Err(Error::InvalidAction(_))));
    }

    #[test]
    fn flat_fold_layers_become_one() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        let [x0, y0, x1, y1] = s.bounding_box();
        let ym = 0.5 * (y0 + y1);
        let (next, _) = apply_fold(&s, &FoldAction::new([x0, ym], [x1, ym]), &NoiseParams::none()).unwrap();
        for i in 0..s.len() {
            let moved = next.positions()[i] != s.positions()[i];
            assert_eq!(next.layers()[i], moved as u32);
        }
        assert_eq!(next.layers().iter().filter(|&&l| l == 1).count(), 288);
    }

    #[test]
    fn noise_is_seeded() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        let [x0, y0, x1, y1] = s.bounding_box();
        let ym = 0.5 * (y0 + y1);
        let a = FoldAction::new([x0, ym], [x1, ym]);
        let noise = NoiseParams { grasp_sigma_m: 0.005, settle_sigma_m: 0.001, seed: 42 };
        let (a1, _) = apply_fold(&s, &a, &noise).unwrap();
        let (a2, _) = apply_fold(&s, &a, &noise).unwrap();
        assert_eq!(a1, a2);
        let (a3, _) = apply_fold(&s, &a, &noise.with_seed(43)).unwrap();
        assert_ne!(a1, a3);
    }

    #[test]
    fn serde_round_trip() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: ClothState = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
        let broken = json.replace("\"grid_w\":24", "\"grid_w\":25");
        assert!(serde_json::from_str::<ClothState>(&broken).is_err());
    }
}
