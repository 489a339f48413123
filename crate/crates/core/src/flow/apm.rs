use crate::cloth::{FoldAction, Observation};
use crate::latent::{encode, EncodedDataset, EncoderModel};
use crate::{Error, Result};

/// Direct action proposal by retrieval: the action of the stored action
/// tuple whose latent endpoints best match `(current, subgoal)`.
pub fn apm_baseline_action(
    enc: &EncodedDataset,
    m: &EncoderModel,
    current: &Observation,
    subgoal: &Observation,
) -> Result<FoldAction> {
    let zc = encode(m, current)?;
    let zs = encode(m, subgoal)?;
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut best: Option<(f64, FoldAction)> = None;
    for t in enc.tuples.iter().filter(|t| t.a == 1) {
        let cost = sq(&t.z0, &zc) + sq(&t.z1, &zs);
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, t.u));
        }
    }
    best.map(|(_, u)| u).ok_or(Error::InsufficientPairs)
}
