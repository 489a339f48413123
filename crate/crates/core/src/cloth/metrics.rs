use super::{ClothState, Observation};
use crate::{Error, Result};

/// Whether particle distances include the layer-derived height.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DistanceMode {
    #[default]
    Spatial,
    Planar,
}

fn check_grid(a: &ClothState, b: &ClothState) -> Result<()> {
    if a.same_grid(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!("grid {}x{} vs {}x{}", a.grid_w(), a.grid_h(), b.grid_w(), b.grid_h())))
    }
}

/// Mean per-particle distance between two configurations, in millimetres.
pub fn mean_particle_distance(state: &ClothState, goal: &ClothState, mode: DistanceMode) -> Result<f64> {
    check_grid(state, goal)?;
    let total: f64 = (0..state.len())
        .map(|i| {
            let p = state.positions()[i];
            let q = goal.positions()[i];
            let dz = match mode {
                DistanceMode::Spatial => state.z(i) - goal.z(i),
                DistanceMode::Planar => 0.0,
            };
            ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + dz * dz).sqrt()
        })
        .sum();
    Ok(1000.0 * total / state.len() as f64)
}

/// Largest planar displacement of any particle, in millimetres.
pub fn max_particle_movement(before: &ClothState, after: &ClothState) -> Result<f64> {
    check_grid(before, after)?;
    let max = before
        .positions()
        .iter()
        .zip(after.positions())
        .map(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]))
        .fold(0.0, f64::max);
    Ok(1000.0 * max)
}

/// Intersection over union of two occupancy masks; 1.0 when both are empty.
pub fn mask_iou(a: &Observation, b: &Observation) -> Result<f64> {
    if a.resolution != b.resolution {
        return Err(Error::ShapeMismatch(format!("resolution {} vs {}", a.resolution, b.resolution)));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.occupancy.iter().zip(&b.occupancy) {
        let (x, y) = (x != 0, y != 0);
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloth::{apply_fold, render, ClothConfig, FoldAction, NoiseParams};

    #[test]
    fn identity_and_translation() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        assert_eq!(mean_particle_distance(&s, &s, DistanceMode::Spatial).unwrap(), 0.0);
        let moved: Vec<[f64; 2]> = s.positions().iter().map(|p| [p[0] + 0.005, p[1]]).collect();
        let t = ClothState::from_parts(&s.config(), moved, s.layers().to_vec()).unwrap();
        assert!((mean_particle_distance(&s, &t, DistanceMode::Spatial).unwrap() - 5.0).abs() < 1e-9);
        assert!((max_particle_movement(&s, &t).unwrap() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn two_by_two_diagonal_fold() {
        let cfg = ClothConfig { grid_w: 2, grid_h: 2, spacing_m: 0.1, thickness_m: 0.002, workspace_m: 0.4 };
        let s = ClothState::flat(&cfg).unwrap();
        let [x0, y0, x1, y1] = s.bounding_box();
        let (f, ok) = apply_fold(&s, &FoldAction::new([x0, y0], [x1, y1]), &NoiseParams::none()).unwrap();
        assert!(ok);
        // Brute force: only the grasped corner crosses the anti-diagonal; it
        // lands on the opposite corner (0.1*sqrt(2) planar) one layer up.
        let oracle: f64 = (0..4)
            .map(|i| {
                let p = s.positions()[i];
                let (q, dz) = if p[0] + p[1] < x0 + y1 - 1e-12 { ([x1, y1], 0.002) } else { (p, 0.0) };
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + dz * dz).sqrt()
            })
            .sum::<f64>()
            / 4.0
            * 1000.0;
        let got = mean_particle_distance(&s, &f, DistanceMode::Spatial).unwrap();
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
        let planar = mean_particle_distance(&s, &f, DistanceMode::Planar).unwrap();
        assert!((planar - 1000.0 * 0.1 * 2f64.sqrt() / 4.0).abs() < 1e-9);
    }

    #[test]
    fn half_fold_max_movement_is_span() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        let [x0, y0, x1, y1] = s.bounding_box();
        let ym = 0.5 * (y0 + y1);
        let (f, _) = apply_fold(&s, &FoldAction::new([x0, ym], [x1, ym]), &NoiseParams::none()).unwrap();
        assert!((max_particle_movement(&s, &f).unwrap() - 230.0).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch() {
        let a = ClothState::flat(&ClothConfig::default()).unwrap();
        let b = ClothState::flat(&ClothConfig { grid_w: 10, ..Default::default() }).unwrap();
        assert!(matches!(mean_particle_distance(&a, &b, DistanceMode::Spatial), Err(Error::ShapeMismatch(_))));
        assert!(matches!(max_particle_movement(&a, &b), Err(Error::ShapeMismatch(_))));
        let ra = render(&a, 16);
        let rb = render(&a, 32);
        assert!(matches!(mask_iou(&ra, &rb), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn iou_cases() {
        let mut a = Observation::empty(8, 0.05);
        let b = Observation::empty(8, 0.05);
        assert_eq!(mask_iou(&a, &b).unwrap(), 1.0);
        for c in 0..4 {
            a.occupancy[c] = 1;
        }
        let mut d = Observation::empty(8, 0.05);
        d.occupancy[10] = 1;
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &d).unwrap(), 0.0);
    }

    #[test]
    fn half_fold_footprint_iou() {
        let s = ClothState::flat(&ClothConfig::default()).unwrap();
        let [x0, y0, x1, y1] = s.bounding_box();
        let ym = 0.5 * (y0 + y1);
        let (f, _) = apply_fold(&s, &FoldAction::new([x0, ym], [x1, ym]), &NoiseParams::none()).unwrap();
        let iou = mask_iou(&render(&s, 64), &render(&f, 64)).unwrap();
        assert!((iou - 0.5).abs() < 1e-12, "iou {iou}");
    }
}
