use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cloth: {0}")]
    InvalidCloth(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid tier {0}, expected 1..=4")]
    InvalidTier(u32),
    #[error("no-action perturbation exceeded the movement threshold in all {attempts} attempts")]
    PerturbTooLarge { attempts: usize },
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("decode bank is empty")]
    EmptyBank,
    #[error("operation requires the {0} variant")]
    UnsupportedVariant(&'static str),
    #[error("need at least one action pair and one no-action pair")]
    InsufficientPairs,
    #[error("epsilon {epsilon} puts both ends of action tuple {tuple} in one node")]
    EpsilonTooLarge { epsilon: f64, tuple: usize },
    #[error("no path from node {from} to node {to}")]
    NoPath { from: usize, to: usize },
    #[error("flow field has no valid pixels")]
    EmptyFlow,
    #[error("pick pixel ({row}, {col}) shows no cloth")]
    InvalidPick { row: usize, col: usize },
    #[error("artifact missing: {}", .0.display())]
    ArtifactMissing(PathBuf),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
