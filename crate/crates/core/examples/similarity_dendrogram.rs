//! Single-linkage dendrogram over a handful of hand-placed regions: two
//! words of different colour sitting side by side.

use hiertext::simspace::{default_optimal_weights, SimilarityVector, WeightConfig};
use hiertext::slc::build_dendrogram;

fn main() -> hiertext::Result<()> {
    let mut points = Vec::new();
    for i in 0..4 {
        points.push(SimilarityVector::new([30.0, 220.0, 90.0, 24.0, 4.0], (20.0 * i as f64, 50.0)));
    }
    for i in 0..3 {
        points.push(SimilarityVector::new([200.0, 40.0, 90.0, 30.0, 6.0], (95.0 + 20.0 * i as f64, 50.0)));
    }

    for w in [WeightConfig::uniform(), default_optimal_weights()] {
        let d = build_dendrogram(&points, &w)?;
        println!("{} {:?}", w.label, w.w);
        for (k, m) in d.merges().enumerate() {
            println!(
                "  {:>2}: {:?} + {:?} at {:.1}",
                d.n_leaves + k,
                d.members(m.left),
                d.members(m.right),
                m.distance
            );
        }
    }
    println!("{}", build_dendrogram(&points[..3], &WeightConfig::uniform())?.to_debug_json());
    Ok(())
}
