use std::path::Path;

use crate::data::{build_corpus_with, load_dataset, CorpusConfig, Dataset};
use crate::flow::PickScorer;
use crate::latent::{encode_dataset, fit_encoder, EncodedDataset, EncoderHyper, EncoderModel, EncoderVariant};
use crate::roadmap::{build_lsr, tune_epsilon, Roadmap};
use crate::Result;

/// Everything an episode needs: the corpus, its encoder and encodings, the
/// roadmap built on them and the pick scorer.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub dataset: Dataset,
    pub encoder: EncoderModel,
    pub encoded: EncodedDataset,
    pub roadmap: Roadmap,
    pub scorer: PickScorer,
}

impl Pipeline {
    pub fn from_parts(dataset: Dataset, encoder: EncoderModel, roadmap: Roadmap, scorer: PickScorer) -> Result<Self> {
        let encoded = encode_dataset(&encoder, &dataset)?;
        Ok(Self { dataset, encoder, encoded, roadmap, scorer })
    }

    /// Corpus, fitted PCA encoder, tuned roadmap, geometric scorer.
    pub fn build(corpus: &CorpusConfig, hyper: &EncoderHyper) -> Result<Self> {
        let dataset = build_corpus_with(corpus)?;
        Self::from_dataset(dataset, hyper)
    }

    pub fn from_dataset(dataset: Dataset, hyper: &EncoderHyper) -> Result<Self> {
        let encoder = fit_encoder(&dataset, EncoderVariant::FittedPca, hyper)?;
        let encoded = encode_dataset(&encoder, &dataset)?;
        let roadmap = build_lsr(&encoded, &dataset, tune_epsilon(&encoded)?)?;
        Ok(Self { dataset, encoder, encoded, roadmap, scorer: PickScorer::Geometric })
    }

    pub fn build_default() -> Result<Self> {
        Self::build(&CorpusConfig::default(), &EncoderHyper::default())
    }

    /// Loads the three artifacts; a missing file is reported by path.
    pub fn load(dataset: &Path, encoder: &Path, roadmap: &Path) -> Result<Self> {
        let dataset = load_dataset(dataset)?;
        let encoder = EncoderModel::load(encoder)?;
        let roadmap = Roadmap::load(roadmap, &dataset)?;
        Self::from_parts(dataset, encoder, roadmap, PickScorer::Geometric)
    }

    pub fn resolution(&self) -> usize {
        self.dataset.meta.resolution
    }
}
