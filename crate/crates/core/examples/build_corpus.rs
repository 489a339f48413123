//! Generate the transition corpus, save it and read it back.
//!
//! ```bash
//! cargo run --release --example build_corpus -- [variants] [perturbs] [seed]
//! ```

use fabric_fold::data::{build_corpus_with, load_dataset, save_dataset, CorpusConfig};

fn main() -> fabric_fold::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("numeric argument"));
    let cfg = CorpusConfig {
        n_variants: args.next().unwrap_or(8),
        perturbs_per_state: args.next().unwrap_or(2) as usize,
        seed: args.next().unwrap_or(0),
        ..CorpusConfig::default()
    };
    let d = build_corpus_with(&cfg)?;
    println!(
        "{} tuples: {} action, {} no-action, {} distinct states",
        d.tuples.len(),
        d.action_count(),
        d.no_action_count(),
        d.distinct_states()
    );

    let path = std::env::temp_dir().join("fabric-fold-corpus.jsonl");
    save_dataset(&d, &path)?;
    let back = load_dataset(&path)?;
    back.validate()?;
    println!("round trip through {} ok ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    Ok(())
}
