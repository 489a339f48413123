use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::field::{oracle_flow, Pixel};
use super::pick::{logistic, pick_heatmap, pixel_features, select_pick, Heatmap, PickScorer, FEATURE_COUNT};
use crate::data::Dataset;
use crate::{Error, Result};

const P_MIN: f64 = 1e-7;
const P_MAX: f64 = 1.0 - 1e-7;

/// Mean pixelwise binary cross-entropy of `h_hat` against targets `h`, with
/// predictions clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_pick_loss(h: &Heatmap, h_hat: &Heatmap) -> Result<f64> {
    if h.resolution != h_hat.resolution {
        return Err(Error::ShapeMismatch(format!("heatmaps of {} and {} pixels", h.resolution, h_hat.resolution)));
    }
    let n = h.values.len() as f64;
    Ok(h.values.iter().zip(&h_hat.values).map(|(&y, &p)| bce(y, p)).sum::<f64>() / n)
}

fn bce(y: f64, p: f64) -> f64 {
    let p = p.clamp(P_MIN, P_MAX);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Gaussian blob of width `sigma_px` centred on `center`.
pub fn gaussian_target(resolution: usize, center: Pixel, sigma_px: f64) -> Heatmap {
    let mut h = Heatmap::zeros(resolution);
    for row in 0..resolution {
        for col in 0..resolution {
            let dr = row as f64 - center.row as f64;
            let dc = col as f64 - center.col as f64;
            h.values[row * resolution + col] = (-(dr * dr + dc * dc) / (2.0 * sigma_px * sigma_px)).exp();
        }
    }
    h
}

/// One training sample: a pixel's features and its target probability.
pub type PickSample = ([f64; FEATURE_COUNT], f64);

/// Mean BCE of the logistic scorer over `samples` and its gradient.
pub fn logistic_loss_and_gradient(
    weights: &[f64; FEATURE_COUNT],
    samples: &[PickSample],
) -> (f64, [f64; FEATURE_COUNT]) {
    let n = samples.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = [0.0; FEATURE_COUNT];
    for (f, y) in samples {
        let p = logistic(weights, f);
        loss += bce(*y, p);
        if p > P_MIN && p < P_MAX {
            for (g, x) in grad.iter_mut().zip(f) {
                *g += (p - y) * x / n;
            }
        }
    }
    (loss / n, grad)
}

/// Largest relative deviation between the analytic logistic gradient and
/// central finite differences (step 1e-5).
pub fn logistic_gradient_check(weights: &[f64; FEATURE_COUNT], samples: &[PickSample]) -> f64 {
    const STEP: f64 = 1e-5;
    let (_, analytic) = logistic_loss_and_gradient(weights, samples);
    let mut worst: f64 = 0.0;
    for i in 0..FEATURE_COUNT {
        let mut up = *weights;
        let mut down = *weights;
        up[i] += STEP;
        down[i] -= STEP;
        let numeric =
            (logistic_loss_and_gradient(&up, samples).0 - logistic_loss_and_gradient(&down, samples).0) / (2.0 * STEP);
        let scale = analytic[i].abs().max(numeric.abs());
        if scale < 1e-9 {
            continue;
        }
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct PickTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub sigma_px: f64,
    pub seed: u64,
    /// Every `holdout_every`-th action tuple is held out for evaluation.
    pub holdout_every: usize,
    pub agreement_radius_px: f64,
}

impl Default for PickTrainConfig {
    fn default() -> Self {
        Self { epochs: 300, learning_rate: 2.0, sigma_px: 2.0, seed: 0, holdout_every: 5, agreement_radius_px: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PickTrainReport {
    pub losses: Vec<f64>,
    pub train_tuples: usize,
    pub heldout_tuples: usize,
    /// Fraction of held-out tuples whose trained pick lies within the
    /// agreement radius of the geometric pick.
    pub heldout_agreement: f64,
}

/// Fits the logistic scorer by full-batch gradient descent on Gaussian pick
/// targets centred on each action tuple's grasp point.
pub fn train_pick_scorer(d: &Dataset, cfg: &PickTrainConfig) -> Result<(PickScorer, PickTrainReport)> {
    let actions: Vec<usize> = (0..d.tuples.len()).filter(|&i| d.tuples[i].is_action()).collect();
    if actions.is_empty() {
        return Err(Error::InsufficientPairs);
    }
    let every = cfg.holdout_every.max(2);
    let heldout: Vec<usize> = actions.iter().copied().skip(every - 1).step_by(every).collect();
    let train: Vec<usize> = actions.iter().copied().filter(|i| !heldout.contains(i)).collect();
    let r = d.meta.resolution;
    let threshold_px = |obs_px: f64| d.delta_move_mm / 1000.0 / obs_px;

    let samples: Vec<PickSample> = train
        .par_iter()
        .map(|&i| {
            let t = &d.tuples[i];
            let flow = oracle_flow(&t.state0, &t.state1, r)?;
            let (row, col) = t.obs0.pixel_of(t.u.grasp);
            let target = gaussian_target(r, Pixel::new(row, col), cfg.sigma_px);
            let feats = pixel_features(&flow, &t.obs0);
            Ok(feats.into_iter().zip(target.values).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 0.1).expect("positive sigma");
    let mut weights = [0.0; FEATURE_COUNT];
    for w in &mut weights {
        *w = init.sample(&mut rng);
    }
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (loss, grad) = logistic_loss_and_gradient(&weights, &samples);
        losses.push(loss);
        for (w, g) in weights.iter_mut().zip(grad) {
            *w -= cfg.learning_rate * g;
        }
    }
    let scorer = PickScorer::TrainedLogistic { weights };

    let agree = heldout
        .par_iter()
        .map(|&i| {
            let t = &d.tuples[i];
            let flow = oracle_flow(&t.state0, &t.state1, r)?;
            let th = threshold_px(t.obs0.pixel_to_meter);
            let geo = select_pick(&pick_heatmap(&PickScorer::Geometric, &flow, &t.obs0, th)?);
            let learned = select_pick(&pick_heatmap(&scorer, &flow, &t.obs0, th)?);
            Ok(match (geo, learned) {
                (Some(a), Some(b)) => {
                    let dr = a.row as f64 - b.row as f64;
                    let dc = a.col as f64 - b.col as f64;
                    dr.hypot(dc) <= cfg.agreement_radius_px
                }
                (None, None) => true,
                _ => false,
            })
        })
        .collect::<Result<Vec<bool>>>()?;
    let heldout_agreement =
        if agree.is_empty() { 1.0 } else { agree.iter().filter(|&&a| a).count() as f64 / agree.len() as f64 };
    let report =
        PickTrainReport { losses, train_tuples: train.len(), heldout_tuples: heldout.len(), heldout_agreement };
    Ok((scorer, report))
}
