//! Particle-grid cloth with a reflection-fold pick-and-place operator,
//! top-down rendering and the evaluation metrics.

mod metrics;
mod render;
mod state;

pub use metrics::{mask_iou, max_particle_movement, mean_particle_distance, DistanceMode};
pub(crate) use render::top_particle_map;
pub use render::{render, Observation};
pub use state::{apply_fold, reflect_point, ClothConfig, ClothState, FoldAction, NoiseParams};
