//! Similarity weight search on generated scenes: text group recall of the
//! identity weighting, the shipped optimum and the searched weighting, then
//! two diversified weightings.

use hiertext::imageproc::{channel_regions, select_channels, ChannelSet, MserParams};
use hiertext::simspace::{default_optimal_weights, WeightConfig};
use hiertext::training::{
    combined_tgr, corpus_tgr, diversify_weights, generate_synthetic, optimize_weights, SearchConfig, SyntheticSpec,
    TrainingSample,
};

fn main() -> hiertext::Result<()> {
    let spec = SyntheticSpec {
        distractors: true,
        ..SyntheticSpec::default()
    };
    let mut samples = Vec::new();
    for seed in 0..12 {
        let (img, gt) = generate_synthetic(seed, &spec)?;
        for ch in select_channels(&img, ChannelSet::Gray)? {
            samples.push(TrainingSample::from_regions(&channel_regions(&ch, &MserParams::default())?, &gt));
        }
    }
    let cfg = SearchConfig {
        coarse_step: 10,
        ..SearchConfig::default()
    };
    println!("identity   {:.4}", corpus_tgr(&samples, &WeightConfig::uniform()));
    println!("shipped    {:.4}", corpus_tgr(&samples, &default_optimal_weights()));
    let best = optimize_weights(&samples, &cfg)?;
    println!("searched   {:.4} {:?} after {} evaluations", best.tgr, best.weights.w, best.evaluations);

    let found = diversify_weights(&samples, 2, &cfg)?;
    for f in &found {
        println!("{:<10} {:?}", f.weights.label, f.weights.w);
    }
    let configs: Vec<WeightConfig> = found.into_iter().map(|f| f.weights).collect();
    println!("combined   {:.4}", combined_tgr(&samples, &configs));
    Ok(())
}
