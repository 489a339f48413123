use serde::{Deserialize, Serialize};

use crate::cloth::Observation;
use crate::{Error, Result};

/// What an encoder consumes: `resolution`-pixel observations, block-averaged
/// to `downsample x downsample` on both the occupancy and height channels.
/// Heights are multiplied by `height_weight`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub resolution: usize,
    pub downsample: usize,
    pub height_weight: f64,
}

impl InputSpec {
    pub fn input_dim(&self) -> usize {
        2 * self.downsample * self.downsample
    }
}

/// Flattened feature vector: occupancy block means, then height block means.
pub fn observation_features(obs: &Observation, spec: &InputSpec) -> Result<Vec<f64>> {
    if obs.resolution != spec.resolution {
        return Err(Error::ShapeMismatch(format!(
            "observation resolution {} but encoder expects {}",
            obs.resolution, spec.resolution
        )));
    }
    let k = spec.downsample;
    if k == 0 || !spec.resolution.is_multiple_of(k) {
        return Err(Error::ShapeMismatch(format!("downsample {k} does not divide resolution {}", spec.resolution)));
    }
    let block = spec.resolution / k;
    let norm = 1.0 / (block * block) as f64;
    let hnorm = norm * spec.height_weight;
    let mut occ = vec![0.0; k * k];
    let mut height = vec![0.0; k * k];
    for row in 0..spec.resolution {
        for col in 0..spec.resolution {
            let i = obs.index(row, col);
            let b = (row / block) * k + col / block;
            occ[b] += obs.occupancy[i] as f64 * norm;
            height[b] += obs.height[i] * hnorm;
        }
    }
    occ.extend(height);
    Ok(occ)
}
