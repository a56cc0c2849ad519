//! Group descriptors of a word against those of a random scatter of
//! regions, both built by merging node statistics bottom-up.

use hiertext::groupdesc::{group_features, stats_for_members, RegionSummary, GROUP_FEATURE_NAMES};
use hiertext::simspace::SimilarityVector;

fn region(x: f64, y: f64, stroke: f64, major: f64, fg: f64) -> RegionSummary {
    RegionSummary {
        centroid: (x, y),
        similarity: SimilarityVector::new([fg, 230.0, 110.0, major, stroke], (x, y)),
        fg_intensity: fg,
        bg_intensity: 230.0,
        major_axis: major,
        stroke_width: stroke,
        border_gradient: 110.0,
        aspect_ratio: 0.6,
        hull_compactness: 0.75,
        convexity_defects: 1.0,
        hu: [0.21, 0.012, 0.001, 0.0, 0.0, 0.0, 0.0],
    }
}

fn main() -> hiertext::Result<()> {
    let mut table: Vec<RegionSummary> = (0..6)
        .map(|i| region(22.0 * i as f64, 40.0 + (i % 2) as f64, 4.0, 26.0, 20.0))
        .collect();
    let clutter = [(13.0, 140.0, 2.0, 9.0), (90.0, 95.0, 9.0, 60.0), (40.0, 200.0, 5.0, 31.0), (160.0, 130.0, 1.5, 12.0)];
    for (x, y, s, m) in clutter {
        table.push(region(x, y, s, m, 20.0 + 4.0 * m));
    }
    let word: Vec<usize> = (0..6).collect();
    let noise: Vec<usize> = (6..10).collect();

    let a = group_features(stats_for_members(&word, &table).group().unwrap(), &table)?;
    let b = group_features(stats_for_members(&noise, &table).group().unwrap(), &table)?;
    println!("{:>28} {:>10} {:>10}", "feature", "word", "clutter");
    for (i, name) in GROUP_FEATURE_NAMES.iter().enumerate() {
        println!("{name:>28} {:>10.4} {:>10.4}", a.get(i), b.get(i));
    }
    Ok(())
}
