//! Trains the text-group classifier on a synthetic corpus mixing clean
//! scenes and scenes with window grids, then prints the strongest stumps.
//!
//! `cargo run --release --example train_classifier -- [model.json]`

use hiertext::groupdesc::GROUP_FEATURE_NAMES;
use hiertext::simspace::default_optimal_weights;
use hiertext::training::{
    generate_synthetic, harvest_corpus, train_classifier, ClassifierTraining, HarvestConfig, SyntheticSpec,
};

fn main() -> hiertext::Result<()> {
    let clean = SyntheticSpec::default();
    let busy = SyntheticSpec {
        distractors: true,
        ..SyntheticSpec::default()
    };
    let corpus = (0..100u64)
        .map(|s| generate_synthetic(s, if s % 2 == 0 { &clean } else { &busy }))
        .collect::<hiertext::Result<Vec<_>>>()?;

    let harvest = harvest_corpus(&corpus, &default_optimal_weights(), &HarvestConfig::default())?;
    println!(
        "{} positive and {} negative groups",
        harvest.positives.len(),
        harvest.negatives.len()
    );
    let model = train_classifier(&harvest, &ClassifierTraining::default())?;

    let mut stumps = model.stumps.clone();
    stumps.sort_by(|a, b| (b.right - b.left).abs().total_cmp(&(a.right - a.left).abs()));
    for s in stumps.iter().take(5) {
        println!(
            "{:>22} <= {:<10.4} {:+.3} / {:+.3}",
            GROUP_FEATURE_NAMES[s.feature], s.threshold, s.left, s.right
        );
    }

    if let Some(path) = std::env::args().nth(1) {
        std::fs::write(&path, model.to_json()).map_err(|e| hiertext::Error::io(&path, e))?;
        println!("model written to {path}");
    }
    Ok(())
}
