use std::collections::HashSet;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{observation_features, InputSpec};
use super::vae::{train_linear_vae, LinearVae, VaePair};
use super::Matrix;
use crate::cloth::{ClothState, FoldAction, Observation};
use crate::data::Dataset;
use crate::util::{euclidean, median, write_atomic};
use crate::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

pub type LatentVector = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderVariant {
    FittedPca,
    LinearVae,
}

impl std::str::FromStr for EncoderVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fitted-pca" | "pca" => Ok(Self::FittedPca),
            "linear-vae" | "vae" => Ok(Self::LinearVae),
            other => Err(Error::Config(format!("unknown encoder variant `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderHyper {
    pub latent_dim: usize,
    pub downsample: usize,
    pub height_weight: f64,
    pub alpha: f64,
    /// Hinge margin for action pairs; measured after warm-up when `None`.
    pub margin: Option<f64>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub init_scale: f64,
    pub seed: u64,
    /// Sample reparameterisation noise while training.
    pub reparam_noise: bool,
}

impl Default for EncoderHyper {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            downsample: 16,
            height_weight: 0.25,
            alpha: 1.0,
            margin: None,
            learning_rate: 1e-2,
            epochs: 300,
            warmup_epochs: 50,
            init_scale: 0.01,
            seed: 0,
            reparam_noise: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaParams {
    pub mean: Vec<f64>,
    /// One principal direction per row.
    pub components: Matrix,
    pub variances: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum EncoderParams {
    FittedPca(PcaParams),
    LinearVae(LinearVae),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub version: u32,
    pub input: InputSpec,
    pub hyper: EncoderHyper,
    pub margin: f64,
    pub params: EncoderParams,
}

impl EncoderModel {
    pub fn variant(&self) -> EncoderVariant {
        match self.params {
            EncoderParams::FittedPca(_) => EncoderVariant::FittedPca,
            EncoderParams::LinearVae(_) => EncoderVariant::LinearVae,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.hyper.latent_dim
    }

    pub fn features(&self, obs: &Observation) -> Result<Vec<f64>> {
        observation_features(obs, &self.input)
    }

    pub fn encode_features(&self, x: &[f64]) -> LatentVector {
        match &self.params {
            EncoderParams::FittedPca(p) => {
                let centered: Vec<f64> = x.iter().zip(&p.mean).map(|(v, m)| v - m).collect();
                p.components.affine(&centered, &vec![0.0; p.components.rows])
            }
            EncoderParams::LinearVae(v) => v.mean(x),
        }
    }

    fn vae(&self) -> Result<&LinearVae> {
        match &self.params {
            EncoderParams::LinearVae(v) => Ok(v),
            EncoderParams::FittedPca(_) => Err(Error::UnsupportedVariant("linear-vae")),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format { line: 1, message: e.to_string() })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self =
            serde_json::from_str(text).map_err(|e| Error::Format { line: e.line(), message: e.to_string() })?;
        if m.version != MODEL_VERSION {
            return Err(Error::Format { line: 1, message: format!("unsupported model version {}", m.version) });
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::ArtifactMissing(path.to_path_buf()));
        }
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub fn fit_encoder(d: &Dataset, variant: EncoderVariant, hyper: &EncoderHyper) -> Result<EncoderModel> {
    if d.tuples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let input =
        InputSpec { resolution: d.meta.resolution, downsample: hyper.downsample, height_weight: hyper.height_weight };
    if hyper.latent_dim == 0 || hyper.latent_dim > input.input_dim() {
        return Err(Error::Config(format!("latent dim {} must be in 1..={}", hyper.latent_dim, input.input_dim())));
    }
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = d
        .tuples
        .par_iter()
        .map(|t| Ok((observation_features(&t.obs0, &input)?, observation_features(&t.obs1, &input)?)))
        .collect::<Result<_>>()?;
    let (params, margin) = match variant {
        EncoderVariant::FittedPca => {
            let rows: Vec<&Vec<f64>> = pairs.iter().flat_map(|(a, b)| [a, b]).collect();
            (EncoderParams::FittedPca(fit_pca(&rows, hyper.latent_dim)), hyper.margin.unwrap_or(0.0))
        }
        EncoderVariant::LinearVae => {
            let labels: Vec<u8> = d.tuples.iter().map(|t| t.a).collect();
            let (vae, margin) = fit_vae(&pairs, &labels, input.input_dim(), hyper);
            (EncoderParams::LinearVae(vae), margin)
        }
    };
    Ok(EncoderModel { version: MODEL_VERSION, input, hyper: hyper.clone(), margin, params })
}

/// PCA over the distinct rows of `rows`, through the eigenvectors of the
/// centred Gram matrix.
fn fit_pca(rows: &[&Vec<f64>], dim: usize) -> PcaParams {
    let mut seen = HashSet::new();
    let distinct: Vec<&Vec<f64>> =
        rows.iter().copied().filter(|r| seen.insert(r.iter().map(|v| v.to_bits()).collect::<Vec<u64>>())).collect();
    let n = distinct.len();
    let width = distinct[0].len();
    let mut mean = vec![0.0; width];
    for r in &distinct {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v / n as f64;
        }
    }
    let x = DMatrix::from_fn(n, width, |i, j| distinct[i][j] - mean[j]);
    let gram = &x * x.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut components = Matrix::zeros(dim, width);
    let mut variances = vec![0.0; dim];
    let tol = 1e-10 * eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for (k, &idx) in order.iter().take(dim).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= tol {
            break;
        }
        let v = eig.eigenvectors.column(idx);
        let mut dir: Vec<f64> = (0..width).map(|j| (0..n).map(|i| x[(i, j)] * v[i]).sum::<f64>()).collect();
        let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
        let pivot = dir.iter().copied().fold(0.0f64, |best, c| if c.abs() > best.abs() { c } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for c in &mut dir {
            *c *= sign / norm;
        }
        components.data[k * width..(k + 1) * width].copy_from_slice(&dir);
        variances[k] = lambda / n as f64;
    }
    PcaParams { mean, components, variances }
}

fn fit_vae(pairs: &[(Vec<f64>, Vec<f64>)], labels: &[u8], input_dim: usize, hyper: &EncoderHyper) -> (LinearVae, f64) {
    let d = hyper.latent_dim;
    let batch: Vec<VaePair> =
        pairs.iter().zip(labels).map(|((x1, x2), &a)| VaePair::deterministic(x1.clone(), x2.clone(), a, d)).collect();
    let noise = |salt: u64| hyper.reparam_noise.then(|| crate::derive_seed(hyper.seed, &[salt]));
    let init = LinearVae::random(input_dim, d, hyper.init_scale, hyper.seed);
    let (warm, margin) = match hyper.margin {
        Some(m) => (init, m),
        None => {
            let (warm, _) =
                train_linear_vae(init, &batch, 0.0, 0.0, hyper.learning_rate, hyper.warmup_epochs, noise(1));
            let mut still: Vec<f64> =
                batch.iter().filter(|p| p.a == 0).map(|p| euclidean(&warm.mean(&p.x1), &warm.mean(&p.x2))).collect();
            (warm, 2.0 * median(&mut still).unwrap_or(0.0))
        }
    };
    let (model, _) = train_linear_vae(warm, &batch, hyper.alpha, margin, hyper.learning_rate, hyper.epochs, noise(2));
    (model, margin)
}

pub fn encode(m: &EncoderModel, obs: &Observation) -> Result<LatentVector> {
    Ok(m.encode_features(&m.features(obs)?))
}

/// Index of the bank entry nearest to `z`; ties go to the lowest index.
pub fn nearest_in_bank(z: &[f64], bank: &[LatentVector]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, b) in bank.iter().enumerate() {
        let dist = euclidean(z, b);
        if best.is_none_or(|(_, d)| dist < d) {
            best = Some((i, dist));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyBank)
}

/// Retrieval decoding: the bank state whose encoding is nearest to `z`.
pub fn decode(z: &[f64], bank: &[(LatentVector, ClothState)]) -> Result<ClothState> {
    let latents: Vec<LatentVector> = bank.iter().map(|(l, _)| l.clone()).collect();
    Ok(bank[nearest_in_bank(z, &latents)?].1.clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentTuple {
    pub z0: LatentVector,
    pub z1: LatentVector,
    pub a: u8,
    pub u: FoldAction,
    pub source: usize,
}

/// Latent tuples in dataset order. Covered state `2i` is `z0` of tuple `i`
/// and `2i + 1` its `z1`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct EncodedDataset {
    pub tuples: Vec<LatentTuple>,
}

impl EncodedDataset {
    pub fn covered_len(&self) -> usize {
        2 * self.tuples.len()
    }

    pub fn covered(&self, idx: usize) -> &LatentVector {
        let t = &self.tuples[idx / 2];
        if idx.is_multiple_of(2) {
            &t.z0
        } else {
            &t.z1
        }
    }

    pub fn distances(&self, a: u8) -> Vec<f64> {
        self.tuples.iter().filter(|t| t.a == a).map(|t| euclidean(&t.z0, &t.z1)).collect()
    }
}

pub fn encode_dataset(m: &EncoderModel, d: &Dataset) -> Result<EncodedDataset> {
    let tuples = d
        .tuples
        .par_iter()
        .enumerate()
        .map(|(i, t)| Ok(LatentTuple { z0: encode(m, &t.obs0)?, z1: encode(m, &t.obs1)?, a: t.a, u: t.u, source: i }))
        .collect::<Result<_>>()?;
    Ok(EncodedDataset { tuples })
}

/// Reconstruction plus KL, decoding the posterior mean.
pub fn loss_vae(m: &EncoderModel, obs: &Observation) -> Result<f64> {
    let vae = m.vae()?;
    let x = m.features(obs)?;
    Ok(vae.vae_term(&x, &vec![0.0; vae.latent_dim()], 1.0, None))
}

pub fn loss_action(m: &EncoderModel, obs1: &Observation, obs2: &Observation, a: u8) -> Result<f64> {
    let vae = m.vae()?;
    Ok(vae.action_term(&m.features(obs1)?, &m.features(obs2)?, a, m.margin, 1.0, None))
}

pub fn loss_combined(m: &EncoderModel, obs1: &Observation, obs2: &Observation, a: u8) -> Result<f64> {
    let vae = m.vae()?;
    let d = vae.latent_dim();
    let pair = VaePair::deterministic(m.features(obs1)?, m.features(obs2)?, a, d);
    Ok(vae.batch_loss(&[pair], m.hyper.alpha, m.margin, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloth::{render, ClothConfig};
    use crate::data::{build_corpus_with, CorpusConfig, DatasetMeta, TransitionTuple};

    fn dataset_of(states: &[ClothState], pairs: &[(usize, usize, u8)]) -> Dataset {
        let tuples = pairs
            .iter()
            .map(|&(i, j, a)| TransitionTuple {
                obs0: render(&states[i], 64),
                obs1: render(&states[j], 64),
                state0: states[i].clone(),
                state1: states[j].clone(),
                a,
                u: FoldAction::null_at([0.2, 0.2]),
                state_ids: None,
            })
            .collect();
        Dataset {
            tuples,
            delta_move_mm: 15.0,
            meta: DatasetMeta {
                seed: 0,
                cloth: ClothConfig::default(),
                resolution: 64,
                n_variants: 1,
                perturbs_per_state: 0,
                perturb_scale_m: 0.0,
            },
        }
    }

    fn two_states() -> Vec<ClothState> {
        let cfg = ClothConfig::default();
        let flat = ClothState::flat(&cfg).unwrap();
        let script = crate::data::goal_library(&cfg, 1, 0).unwrap();
        let folded = crate::data::goal_state(&cfg, &script).unwrap();
        vec![flat, folded]
    }

    fn pairwise(z: &[LatentVector]) -> Vec<f64> {
        z.iter().flat_map(|a| z.iter().map(move |b| euclidean(a, b))).collect()
    }

    #[test]
    fn identical_observations_collapse() {
        let s = two_states();
        let d = dataset_of(&s, &[(0, 0, 0), (0, 0, 0)]);
        let m = fit_encoder(&d, EncoderVariant::FittedPca, &EncoderHyper::default()).unwrap();
        let EncoderParams::FittedPca(p) = &m.params else { unreachable!() };
        assert!(p.variances.iter().all(|&v| v == 0.0));
        let z = encode(&m, &d.tuples[0].obs0).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_states_separate_in_one_dimension() {
        let s = two_states();
        let d = dataset_of(&s, &[(0, 1, 1), (0, 0, 0), (1, 1, 0)]);
        let hyper = EncoderHyper { latent_dim: 1, ..Default::default() };
        let m = fit_encoder(&d, EncoderVariant::FittedPca, &hyper).unwrap();
        let e = encode_dataset(&m, &d).unwrap();
        assert_ne!(e.tuples[0].z0, e.tuples[0].z1);
        assert_eq!(e.tuples[1].z0, e.tuples[0].z0);
        assert_eq!(e.tuples[2].z1, e.tuples[0].z1);
        // The mean of the two distinct points encodes to the origin.
        let sum = e.tuples[0].z0[0] + e.tuples[0].z1[0];
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn duplicates_do_not_move_encodings() {
        let d =
            build_corpus_with(&CorpusConfig { n_variants: 1, perturbs_per_state: 1, ..Default::default() }).unwrap();
        let m = fit_encoder(&d, EncoderVariant::FittedPca, &EncoderHyper::default()).unwrap();
        let mut dup = d.clone();
        dup.tuples.extend(d.tuples.iter().take(5).cloned());
        let m2 = fit_encoder(&dup, EncoderVariant::FittedPca, &EncoderHyper::default()).unwrap();
        let obs: Vec<&Observation> = d.tuples.iter().map(|t| &t.obs1).collect();
        let z1: Vec<_> = obs.iter().map(|o| encode(&m, o).unwrap()).collect();
        let z2: Vec<_> = obs.iter().map(|o| encode(&m2, o).unwrap()).collect();
        for (a, b) in pairwise(&z1).iter().zip(pairwise(&z2)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn decode_is_nearest_with_low_index_ties() {
        let s = two_states();
        let bank =
            vec![(vec![0.0, 0.0], s[0].clone()), (vec![2.0, 0.0], s[1].clone()), (vec![-2.0, 0.0], s[1].clone())];
        assert_eq!(decode(&[2.0, 0.0], &bank).unwrap(), s[1]);
        assert_eq!(nearest_in_bank(&[0.0, 5.0], &[vec![0.0, 0.0], vec![0.0, 10.0]]).unwrap(), 0);
        assert_eq!(nearest_in_bank(&[1.0, 0.0], &[vec![3.0, 0.0], vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap(), 1);
        assert!(matches!(nearest_in_bank(&[0.0], &[]), Err(Error::EmptyBank)));
    }

    #[test]
    fn losses_need_the_vae() {
        let s = two_states();
        let d = dataset_of(&s, &[(0, 1, 1), (0, 0, 0)]);
        let m = fit_encoder(&d, EncoderVariant::FittedPca, &EncoderHyper::default()).unwrap();
        let o = &d.tuples[0].obs0;
        assert!(matches!(loss_vae(&m, o), Err(Error::UnsupportedVariant(_))));
        assert!(matches!(loss_combined(&m, o, o, 0), Err(Error::UnsupportedVariant(_))));
    }

    #[test]
    fn vae_losses() {
        let s = two_states();
        let d = dataset_of(&s, &[(0, 1, 1), (0, 0, 0), (1, 1, 0)]);
        let hyper = EncoderHyper { latent_dim: 2, downsample: 8, epochs: 20, warmup_epochs: 5, ..Default::default() };
        let mut m = fit_encoder(&d, EncoderVariant::LinearVae, &hyper).unwrap();
        let (o0, o1) = (&d.tuples[0].obs0, &d.tuples[0].obs1);
        assert_eq!(loss_action(&m, o0, o0, 0).unwrap(), 0.0);
        m.margin = 0.0;
        assert_eq!(loss_action(&m, o0, o1, 1).unwrap(), 0.0);
        m.hyper.alpha = 0.0;
        let mean = 0.5 * (loss_vae(&m, o0).unwrap() + loss_vae(&m, o1).unwrap());
        assert!((loss_combined(&m, o0, o1, 1).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn model_json_round_trip() {
        let s = two_states();
        let d = dataset_of(&s, &[(0, 1, 1)]);
        let m =
            fit_encoder(&d, EncoderVariant::FittedPca, &EncoderHyper { latent_dim: 2, ..Default::default() }).unwrap();
        let back = EncoderModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = m.to_json().unwrap().replacen("\"version\":1", "\"version\":7", 1);
        assert!(EncoderModel::from_json(&bad).is_err());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let d = dataset_of(&two_states(), &[]);
        assert!(matches!(
            fit_encoder(&d, EncoderVariant::FittedPca, &EncoderHyper::default()),
            Err(Error::EmptyDataset)
        ));
    }
}
