//! Fit both encoder variants on the default corpus and compare how well
//! they separate action pairs from no-action pairs.
//!
//! ```bash
//! cargo run --release --example fit_encoder
//! ```

use fabric_fold::data::build_corpus;
use fabric_fold::latent::{encode_dataset, fit_encoder, EncoderHyper, EncoderVariant};
use fabric_fold::roadmap::tune_epsilon;

fn main() -> fabric_fold::Result<()> {
    let d = build_corpus(8, 2, 0)?;
    for variant in [EncoderVariant::FittedPca, EncoderVariant::LinearVae] {
        let m = fit_encoder(&d, variant, &EncoderHyper::default())?;
        let enc = encode_dataset(&m, &d)?;
        let min_a1 = enc.distances(1).into_iter().fold(f64::INFINITY, f64::min);
        let max_a0 = enc.distances(0).into_iter().fold(0.0, f64::max);
        println!(
            "{variant:?}: d={} min action {min_a1:.4}, max no-action {max_a0:.4}, separated {}, epsilon {:.4}",
            m.latent_dim(),
            min_a1 > max_a0,
            tune_epsilon(&enc)?
        );
    }
    Ok(())
}
