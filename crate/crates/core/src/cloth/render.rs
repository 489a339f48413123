use super::ClothState;

/// Top-down image of a cloth: an occupancy mask and the top layer index
/// per pixel. Row index grows with workspace `y`, column with `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub resolution: usize,
    pub occupancy: Vec<u8>,
    pub height: Vec<f64>,
    pub pixel_to_meter: f64,
}

impl Observation {
    pub fn empty(resolution: usize, pixel_to_meter: f64) -> Self {
        Self {
            resolution,
            occupancy: vec![0; resolution * resolution],
            height: vec![0.0; resolution * resolution],
            pixel_to_meter,
        }
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.resolution + col
    }

    pub fn occupied(&self, row: usize, col: usize) -> bool {
        self.occupancy[self.index(row, col)] != 0
    }

    /// Number of occupied pixels.
    pub fn area(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o != 0).count()
    }

    pub fn max_height(&self) -> f64 {
        self.height.iter().copied().fold(0.0, f64::max)
    }

    /// Centre of pixel `(row, col)` in workspace metres, as `[x, y]`.
    pub fn pixel_center(&self, row: usize, col: usize) -> [f64; 2] {
        [(col as f64 + 0.5) * self.pixel_to_meter, (row as f64 + 0.5) * self.pixel_to_meter]
    }

    /// Pixel `(row, col)` containing a workspace point, clamped to the image.
    pub fn pixel_of(&self, p: [f64; 2]) -> (usize, usize) {
        let clamp = |v: f64| (v / self.pixel_to_meter).floor().clamp(0.0, (self.resolution - 1) as f64) as usize;
        (clamp(p[1]), clamp(p[0]))
    }

    /// Exact byte key of the image content; equal keys mean equal images.
    pub fn content_key(&self) -> Vec<u8> {
        let mut key = Vec::with_capacity(self.occupancy.len() * 9);
        key.extend_from_slice(&self.occupancy);
        for h in &self.height {
            key.extend_from_slice(&h.to_bits().to_le_bytes());
        }
        key
    }

    /// Binary PGM (P5) of the occupancy mask, values {0, 255}.
    pub fn occupancy_pgm(&self) -> Vec<u8> {
        let pixels: Vec<u8> = self.occupancy.iter().map(|&o| if o != 0 { 255 } else { 0 }).collect();
        pgm(self.resolution, &pixels)
    }

    /// Binary PGM (P5) of the height map scaled by `255 / max layer`.
    pub fn height_pgm(&self) -> Vec<u8> {
        let max = self.max_height();
        let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
        let pixels: Vec<u8> = self.height.iter().map(|&h| (h * scale).round().clamp(0.0, 255.0) as u8).collect();
        pgm(self.resolution, &pixels)
    }
}

pub(crate) fn pgm(resolution: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{resolution} {resolution}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// For every pixel, the particle seen from above: the highest layer among
/// particles whose footprint covers the pixel centre, ties going to the
/// particle closest to the centre and then to the lowest index.
///
/// Each particle covers the `spacing x spacing` square centred on it, so a
/// flat cloth renders as a filled block even when pixels are smaller than
/// the particle spacing.
pub(crate) fn top_particle_map(state: &ClothState, resolution: usize) -> Vec<Option<usize>> {
    let px = state.workspace_m() / resolution as f64;
    let half = 0.5 * state.spacing_m();
    let mut top: Vec<Option<usize>> = vec![None; resolution * resolution];
    let mut best_d: Vec<f64> = vec![f64::INFINITY; resolution * resolution];
    let range = |lo: f64, hi: f64| {
        let a = ((lo / px) - 0.5).ceil().max(0.0);
        let b = ((hi / px) - 0.5).ceil().min(resolution as f64);
        (a as usize)..(b.max(a) as usize)
    };
    let layers = state.layers();
    for (i, q) in state.positions().iter().enumerate() {
        for row in range(q[1] - half, q[1] + half) {
            for col in range(q[0] - half, q[0] + half) {
                let k = row * resolution + col;
                let cx = (col as f64 + 0.5) * px;
                let cy = (row as f64 + 0.5) * px;
                let d = (q[0] - cx).hypot(q[1] - cy);
                let replace = match top[k] {
                    None => true,
                    Some(j) => layers[i] > layers[j] || (layers[i] == layers[j] && d < best_d[k]),
                };
                if replace {
                    top[k] = Some(i);
                    best_d[k] = d;
                }
            }
        }
    }
    top
}

/// Renders the workspace onto a `resolution x resolution` top-down image.
///
/// # Panics
///
/// If `resolution < 8`.
pub fn render(state: &ClothState, resolution: usize) -> Observation {
    assert!(resolution >= 8, "render resolution must be at least 8, got {resolution}");
    let mut obs = Observation::empty(resolution, state.workspace_m() / resolution as f64);
    for (k, top) in top_particle_map(state, resolution).into_iter().enumerate() {
        if let Some(i) = top {
            obs.occupancy[k] = 1;
            obs.height[k] = state.layers()[i] as f64;
        }
    }
    obs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloth::{apply_fold, ClothConfig, FoldAction, NoiseParams};

    #[test]
    fn flat_cloth_is_a_filled_square() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        let obs = render(&s, 64);
        let rows: Vec<usize> = (0..64).filter(|&r| (0..64).any(|c| obs.occupied(r, c))).collect();
        let cols: Vec<usize> = (0..64).filter(|&c| (0..64).any(|r| obs.occupied(r, c))).collect();
        let (r0, r1) = (rows[0], *rows.last().unwrap());
        let (c0, c1) = (cols[0], *cols.last().unwrap());
        assert_eq!(rows.len(), r1 - r0 + 1);
        assert_eq!(obs.area(), (r1 - r0 + 1) * (c1 - c0 + 1), "block must have no holes");
        // 0.24 m footprint at 6.25 mm pixels
        assert_eq!(r1 - r0 + 1, 38);
        assert!(obs.height.iter().all(|&h| h == 0.0));
        assert!(!obs.occupied(0, 0) && !obs.occupied(63, 63));
        assert_eq!(obs.height[0], 0.0);
    }

    #[test]
    fn diagonal_fold_renders_a_triangle() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        let [x0, y0, x1, y1] = s.bounding_box();
        let (folded, ok) = apply_fold(&s, &FoldAction::new([x0, y0], [x1, y1]), &NoiseParams::none()).unwrap();
        assert!(ok);
        let flat = render(&s, 64);
        let obs = render(&folded, 64);
        assert_eq!(obs.max_height(), 1.0);
        let ratio = obs.area() as f64 / flat.area() as f64;
        assert!((ratio - 0.5).abs() < 0.06, "triangle area ratio {ratio}");
        // the corner that moved is empty, the opposite one is covered twice
        let (r, c) = obs.pixel_of([x0, y0]);
        assert!(!obs.occupied(r, c));
        let (r, c) = obs.pixel_of([x1, y1]);
        assert!(obs.occupied(r, c));
        assert_eq!(obs.height[obs.index(r, c)], 1.0);
        // height > 0 implies occupancy
        assert!(obs.height.iter().zip(&obs.occupancy).all(|(&h, &o)| h == 0.0 || o == 1));
    }

    #[test]
    fn pgm_headers() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        let obs = render(&s, 16);
        let bytes = obs.occupancy_pgm();
        assert!(bytes.starts_with(b"P5\n16 16\n255\n"));
        assert_eq!(bytes.len(), b"P5\n16 16\n255\n".len() + 256);
        assert!(bytes.iter().skip(13).all(|&b| b == 0 || b == 255));
        assert!(obs.height_pgm().iter().skip(13).all(|&b| b == 0));
    }
}
