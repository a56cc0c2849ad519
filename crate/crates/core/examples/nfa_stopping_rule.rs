//! Number of false alarms and the stopping rule on a word with one stray
//! region attached: the word alone is more meaningful than the word plus
//! the stray, so only the word is kept.

use hiertext::groupdesc::{RegionSummary, MAX_CLUSTER_SIZE};
use hiertext::simspace::{default_optimal_weights, SimilarityVector};
use hiertext::slc::build_dendrogram_with_stats;
use hiertext::stoprule::{binomial_tail, log_nfa, select_groups, NfaContext};

fn region(x: f64, f: [f64; 5]) -> RegionSummary {
    RegionSummary {
        centroid: (x, 60.0),
        similarity: SimilarityVector::new(f, (x, 60.0)),
        fg_intensity: f[0],
        bg_intensity: f[1],
        major_axis: f[3],
        stroke_width: f[4],
        border_gradient: f[2],
        aspect_ratio: 0.6,
        hull_compactness: 0.7,
        convexity_defects: 1.0,
        hu: [0.2, 0.01, 0.0, 0.0, 0.0, 0.0, 0.0],
    }
}

fn main() -> hiertext::Result<()> {
    println!("B(2,3,0.5) = {}", binomial_tail(2, 3, 0.5));
    println!("B(3,10,0.1) = {:.6}", binomial_tail(3, 10, 0.1));

    let mut table: Vec<RegionSummary> = (0..5)
        .map(|i| {
            let t = i as f64;
            region(20.0 * t, [30.0 + t, 228.0, 118.0 + t, 24.0 + 0.4 * t, 4.0])
        })
        .collect();
    table.push(region(120.0, [170.0, 120.0, 40.0, 55.0, 10.0]));

    let mut d = build_dendrogram_with_stats(&table, &default_optimal_weights(), MAX_CLUSTER_SIZE)?;
    let ctx = NfaContext::for_image(150, 640, 480);
    for id in d.n_leaves..d.nodes.len() {
        let stats = d.nodes[id].stats.as_ref().and_then(|s| s.group()).cloned();
        d.nodes[id].log_nfa = stats.as_ref().and_then(|s| log_nfa(s, &ctx));
        // Pretend the classifier accepts every group of three or more.
        d.nodes[id].label = Some(d.nodes[id].size >= 3);
    }
    for id in d.n_leaves..d.nodes.len() {
        let n = &d.nodes[id];
        println!(
            "node {id:>2} members {:?} ln NFA {:9.2} text {}",
            d.members(id),
            n.log_nfa.unwrap_or(f64::NAN),
            n.label == Some(true)
        );
    }
    for id in select_groups(&d) {
        println!("selected {:?}", d.members(id));
    }
    Ok(())
}
