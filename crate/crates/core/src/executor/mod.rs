//! Closed-loop folding episodes, the ablation executors and the tiered
//! benchmark harness.

mod bench;
mod episode;
mod pipeline;

pub use bench::{
    episode_config, run_bench, Aggregate, BenchConfig, BenchReport, BenchRow, MeanStd, TraceRecord, CSV_HEADER,
};
pub use episode::{replay, run_episode, EpisodeConfig, EpisodeResult, Mode, TraceStep};
pub use pipeline::Pipeline;
