use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cloth::{top_particle_map, ClothState};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Per-pixel displacement in pixels, stored as `[d_row, d_col]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub resolution: usize,
    pub vectors: Vec<[f64; 2]>,
    pub valid: Vec<bool>,
}

impl FlowField {
    pub fn zeros(resolution: usize) -> Self {
        Self {
            resolution,
            vectors: vec![[0.0; 2]; resolution * resolution],
            valid: vec![false; resolution * resolution],
        }
    }

    pub fn index(&self, p: Pixel) -> usize {
        p.row * self.resolution + p.col
    }

    pub fn get(&self, p: Pixel) -> Option<[f64; 2]> {
        let k = self.index(p);
        self.valid[k].then_some(self.vectors[k])
    }

    pub fn magnitude(&self, k: usize) -> f64 {
        self.vectors[k][0].hypot(self.vectors[k][1])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Multiplies every vector by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vectors {
            v[0] *= s;
            v[1] *= s;
        }
        out
    }

    /// Plain text: one line per row, `d_row,d_col` per pixel separated by
    /// spaces, `-` for invalid pixels.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.resolution, self.resolution);
        for row in 0..self.resolution {
            for col in 0..self.resolution {
                if col > 0 {
                    out.push(' ');
                }
                match self.get(Pixel::new(row, col)) {
                    Some([dr, dc]) => {
                        let _ = write!(out, "{dr:.3},{dc:.3}");
                    }
                    None => out.push('-'),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Binary PPM (P6) with hue from flow direction and brightness from
    /// magnitude relative to the field maximum. Invalid pixels are black.
    pub fn to_color_wheel_ppm(&self) -> Vec<u8> {
        let max = (0..self.vectors.len()).filter(|&k| self.valid[k]).map(|k| self.magnitude(k)).fold(0.0, f64::max);
        let r = self.resolution;
        let mut out = format!("P6\n{r} {r}\n255\n").into_bytes();
        for k in 0..self.vectors.len() {
            if !self.valid[k] || max == 0.0 {
                out.extend_from_slice(&[0, 0, 0]);
                continue;
            }
            let [dr, dc] = self.vectors[k];
            let hue = (dr.atan2(dc).to_degrees() + 360.0) % 360.0;
            out.extend_from_slice(&hsv_to_rgb(hue, 1.0, self.magnitude(k) / max));
        }
        out
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0) % 2.0 - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match (h / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r, g, b].map(|v| ((v + m) * 255.0).round() as u8)
}

/// Exact flow from known particle correspondences: each pixel follows the
/// particle seen on top of `current` to its position in `goal`.
pub fn oracle_flow(current: &ClothState, goal: &ClothState, resolution: usize) -> Result<FlowField> {
    if !current.same_grid(goal) {
        return Err(Error::ShapeMismatch(format!(
            "current is {}x{} but goal is {}x{}",
            current.grid_w(),
            current.grid_h(),
            goal.grid_w(),
            goal.grid_h()
        )));
    }
    let px = current.workspace_m() / resolution as f64;
    let mut flow = FlowField::zeros(resolution);
    let (from, to) = (current.positions(), goal.positions());
    for (k, top) in top_particle_map(current, resolution).into_iter().enumerate() {
        if let Some(i) = top {
            flow.valid[k] = true;
            flow.vectors[k] = [(to[i][1] - from[i][1]) / px, (to[i][0] - from[i][0]) / px];
        }
    }
    Ok(flow)
}

/// Mean endpoint error over the pixels valid in `f`.
pub fn epe(f_hat: &FlowField, f: &FlowField) -> Result<f64> {
    if f_hat.resolution != f.resolution {
        return Err(Error::ShapeMismatch(format!("flow resolutions {} and {}", f_hat.resolution, f.resolution)));
    }
    let n = f.valid_count();
    if n == 0 {
        return Err(Error::EmptyFlow);
    }
    let sum: f64 = (0..f.vectors.len())
        .filter(|&k| f.valid[k])
        .map(|k| {
            let (a, b) = (f_hat.vectors[k], f.vectors[k]);
            (a[0] - b[0]).hypot(a[1] - b[1])
        })
        .sum();
    Ok(sum / n as f64)
}
