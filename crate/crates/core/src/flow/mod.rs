//! Folding actions from flow: per-pixel displacement between the current
//! cloth and a sub-goal, a pick heatmap over it, and the place point read
//! off the flow at the pick.

mod apm;
mod field;
mod pick;
mod train;

pub use apm::apm_baseline_action;
pub use field::{epe, oracle_flow, FlowField, Pixel};
pub use pick::{
    pick_heatmap, pixel_features, propose_action, select_pick, select_place, Heatmap, PickScorer, Proposal,
    FEATURE_COUNT,
};
pub use train::{
    bce_pick_loss, gaussian_target, logistic_gradient_check, logistic_loss_and_gradient, train_pick_scorer, PickSample,
    PickTrainConfig, PickTrainReport,
};
