use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Matrix;

/// Affine Gaussian encoder (mean and log-variance heads) with an affine
/// decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearVae {
    pub mean_w: Matrix,
    pub mean_b: Vec<f64>,
    pub logvar_w: Matrix,
    pub logvar_b: Vec<f64>,
    pub dec_w: Matrix,
    pub dec_b: Vec<f64>,
}

/// One training pair with the reparameterisation noise used for each side.
#[derive(Clone, Debug, PartialEq)]
pub struct VaePair {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub a: u8,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
}

impl VaePair {
    /// Pair evaluated at the posterior means (zero noise).
    pub fn deterministic(x1: Vec<f64>, x2: Vec<f64>, a: u8, latent_dim: usize) -> Self {
        Self { x1, x2, a, eps1: vec![0.0; latent_dim], eps2: vec![0.0; latent_dim] }
    }
}

impl LinearVae {
    pub fn zeros(input_dim: usize, latent_dim: usize) -> Self {
        Self {
            mean_w: Matrix::zeros(latent_dim, input_dim),
            mean_b: vec![0.0; latent_dim],
            logvar_w: Matrix::zeros(latent_dim, input_dim),
            logvar_b: vec![0.0; latent_dim],
            dec_w: Matrix::zeros(input_dim, latent_dim),
            dec_b: vec![0.0; input_dim],
        }
    }

    pub fn random(input_dim: usize, latent_dim: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scale).expect("finite scale");
        let mut m = Self::zeros(input_dim, latent_dim);
        for v in m.params_mut() {
            *v = normal.sample(&mut rng);
        }
        m
    }

    pub fn latent_dim(&self) -> usize {
        self.mean_b.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dec_b.len()
    }

    pub fn mean(&self, x: &[f64]) -> Vec<f64> {
        self.mean_w.affine(x, &self.mean_b)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.mean_w
            .data
            .iter_mut()
            .chain(self.mean_b.iter_mut())
            .chain(self.logvar_w.data.iter_mut())
            .chain(self.logvar_b.iter_mut())
            .chain(self.dec_w.data.iter_mut())
            .chain(self.dec_b.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.mean_w
            .data
            .iter()
            .chain(self.mean_b.iter())
            .chain(self.logvar_w.data.iter())
            .chain(self.logvar_b.iter())
            .chain(self.dec_w.data.iter())
            .chain(self.dec_b.iter())
    }

    pub fn param_count(&self) -> usize {
        self.params().count()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params().copied().collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) {
        for (p, v) in self.params_mut().zip(values) {
            *p = v.to_owned();
        }
    }

    /// Reconstruction (summed squared error) plus KL to the unit Gaussian
    /// for one observation, decoding `z = mu + exp(logvar / 2) * eps`.
    /// Gradients scaled by `scale` are accumulated into `grad`.
    pub(crate) fn vae_term(&self, x: &[f64], eps: &[f64], scale: f64, grad: Option<&mut LinearVae>) -> f64 {
        let mu = self.mean_w.affine(x, &self.mean_b);
        let lv = self.logvar_w.affine(x, &self.logvar_b);
        let sigma: Vec<f64> = lv.iter().map(|v| (0.5 * v).exp()).collect();
        let z: Vec<f64> = mu.iter().zip(&sigma).zip(eps).map(|((m, s), e)| m + s * e).collect();
        let recon = self.dec_w.affine(&z, &self.dec_b);
        let resid: Vec<f64> = recon.iter().zip(x).map(|(r, v)| r - v).collect();
        let rec_loss: f64 = resid.iter().map(|r| r * r).sum();
        let kl: f64 = -0.5 * mu.iter().zip(&lv).map(|(m, l)| 1.0 + l - m * m - l.exp()).sum::<f64>();

        if let Some(g) = grad {
            let d_recon: Vec<f64> = resid.iter().map(|r| 2.0 * r).collect();
            g.dec_w.add_outer(scale, &d_recon, &z);
            for (b, d) in g.dec_b.iter_mut().zip(&d_recon) {
                *b += scale * d;
            }
            let dz = self.dec_w.transpose_mul(&d_recon);
            let d_mu: Vec<f64> = dz.iter().zip(&mu).map(|(d, m)| d + m).collect();
            let d_lv: Vec<f64> = dz
                .iter()
                .zip(eps)
                .zip(&sigma)
                .zip(&lv)
                .map(|(((d, e), s), l)| d * e * s * 0.5 + 0.5 * (l.exp() - 1.0))
                .collect();
            g.mean_w.add_outer(scale, &d_mu, x);
            g.logvar_w.add_outer(scale, &d_lv, x);
            for (b, d) in g.mean_b.iter_mut().zip(&d_mu) {
                *b += scale * d;
            }
            for (b, d) in g.logvar_b.iter_mut().zip(&d_lv) {
                *b += scale * d;
            }
        }
        rec_loss + kl
    }

    /// Latent distance term on the posterior means: hinge
    /// `max(0, margin - |mu1 - mu2|)^2` for action pairs, `|mu1 - mu2|^2`
    /// for no-action pairs.
    pub(crate) fn action_term(
        &self,
        x1: &[f64],
        x2: &[f64],
        a: u8,
        margin: f64,
        scale: f64,
        grad: Option<&mut LinearVae>,
    ) -> f64 {
        let mu1 = self.mean(x1);
        let mu2 = self.mean(x2);
        let delta: Vec<f64> = mu1.iter().zip(&mu2).map(|(p, q)| p - q).collect();
        let dist = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        let (loss, d_delta): (f64, Vec<f64>) = if a == 0 {
            (dist * dist, delta.iter().map(|d| 2.0 * d).collect())
        } else {
            let h = margin - dist;
            if h > 0.0 && dist > 0.0 {
                (h * h, delta.iter().map(|d| -2.0 * h * d / dist).collect())
            } else {
                (h.max(0.0).powi(2), vec![0.0; delta.len()])
            }
        };
        if let Some(g) = grad {
            g.mean_w.add_outer(scale, &d_delta, x1);
            g.mean_w.add_outer(-scale, &d_delta, x2);
        }
        loss
    }

    /// Mean combined loss over `batch`, with its gradient when requested.
    pub fn batch_loss(&self, batch: &[VaePair], alpha: f64, margin: f64, mut grad: Option<&mut LinearVae>) -> f64 {
        if batch.is_empty() {
            return 0.0;
        }
        let w = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for p in batch {
            total += 0.5 * self.vae_term(&p.x1, &p.eps1, 0.5 * w, grad.as_deref_mut());
            total += 0.5 * self.vae_term(&p.x2, &p.eps2, 0.5 * w, grad.as_deref_mut());
            if alpha != 0.0 {
                total += alpha * self.action_term(&p.x1, &p.x2, p.a, margin, alpha * w, grad.as_deref_mut());
            }
        }
        total * w
    }

    pub fn batch_gradient(&self, batch: &[VaePair], alpha: f64, margin: f64) -> (f64, LinearVae) {
        let mut g = LinearVae::zeros(self.input_dim(), self.latent_dim());
        let loss = self.batch_loss(batch, alpha, margin, Some(&mut g));
        (loss, g)
    }
}

/// Largest relative deviation between the analytic gradient of the batch
/// loss and central finite differences (step 1e-5). Parameters whose
/// analytic and numeric gradients are both below `1e-9` count as agreeing.
pub fn gradient_check(model: &LinearVae, batch: &[VaePair], alpha: f64, margin: f64) -> f64 {
    const STEP: f64 = 1e-5;
    let (_, analytic) = model.batch_gradient(batch, alpha, margin);
    let analytic = analytic.flat_params();
    let base = model.flat_params();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut values = base.clone();
    for i in 0..base.len() {
        values[i] = base[i] + STEP;
        probe.set_flat_params(&values);
        let up = probe.batch_loss(batch, alpha, margin, None);
        values[i] = base[i] - STEP;
        probe.set_flat_params(&values);
        let down = probe.batch_loss(batch, alpha, margin, None);
        values[i] = base[i];
        let numeric = (up - down) / (2.0 * STEP);
        let scale = analytic[i].abs().max(numeric.abs());
        if scale < 1e-9 {
            continue;
        }
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

/// Full-batch gradient descent. With `noise_seed = Some(s)` fresh
/// reparameterisation noise is drawn every epoch; with `None` the posterior
/// means are decoded and the objective is deterministic. Returns the model
/// and the loss before each epoch's update.
pub fn train_linear_vae(
    init: LinearVae,
    pairs: &[VaePair],
    alpha: f64,
    margin: f64,
    learning_rate: f64,
    epochs: usize,
    noise_seed: Option<u64>,
) -> (LinearVae, Vec<f64>) {
    let mut model = init;
    let mut history = Vec::with_capacity(epochs);
    let mut batch = pairs.to_vec();
    let d = model.latent_dim();
    let mut rng = noise_seed.map(ChaCha8Rng::seed_from_u64);
    for _ in 0..epochs {
        if let Some(rng) = rng.as_mut() {
            for p in &mut batch {
                p.eps1 = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                p.eps2 = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            }
        }
        let (loss, grad) = model.batch_gradient(&batch, alpha, margin);
        history.push(loss);
        let step: Vec<f64> =
            model.flat_params().iter().zip(grad.flat_params()).map(|(p, g)| p - learning_rate * g).collect();
        model.set_flat_params(&step);
    }
    (model, history)
}
