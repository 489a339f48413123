//! Observation encoders: a fitted PCA projection (the pipeline default) and
//! a linear variational autoencoder trained on the combined reconstruction
//! plus latent-distance objective. Decoding is retrieval from a bank of
//! known states.

mod features;
mod matrix;
mod model;
mod vae;

pub use features::{observation_features, InputSpec};
pub use matrix::Matrix;
pub use model::{
    decode, encode, encode_dataset, fit_encoder, loss_action, loss_combined, loss_vae, nearest_in_bank, EncodedDataset,
    EncoderHyper, EncoderModel, EncoderParams, EncoderVariant, LatentTuple, LatentVector, PcaParams, MODEL_VERSION,
};
pub use vae::{gradient_check, train_linear_vae, LinearVae, VaePair};
