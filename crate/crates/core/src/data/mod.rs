//! Transition corpus: scripted fold rollouts, no-action perturbation pairs,
//! the tiered goal library, and the JSON-lines dataset format.

mod corpus;
mod grammar;
mod io;

pub use corpus::{
    build_corpus, build_corpus_with, make_no_action_pair, rollout_scripted, CorpusConfig, Dataset, DatasetMeta,
    TransitionTuple, DEFAULT_DELTA_MOVE_MM,
};
pub use grammar::{goal_library, goal_state, Corner, FoldScript, GrammarFold, Side, GOAL_VARIANTS};
pub use io::{load_dataset, load_goal, save_dataset, save_goal, GoalFile, DATASET_VERSION};
