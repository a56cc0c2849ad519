//! Deduplication, collinear merging and word splitting on groups selected
//! from two channels of the same scene.

use hiertext::pipeline::{builtin_model, Extractor, OutputLevel, PipelineConfig};
use hiertext::postproc::{deduplicate, merge_collinear, split_words, PostprocConfig};
use hiertext::training::{generate_synthetic, SyntheticSpec};

fn main() -> hiertext::Result<()> {
    let (img, gt) = generate_synthetic(8, &SyntheticSpec::default())?;
    // Segmentation level skips word splitting; post-processing is redone
    // below step by step.
    let cfg = PipelineConfig {
        output_level: OutputLevel::Segmentation,
        postproc: PostprocConfig {
            dedup_iou: 1.0,
            merge_angle: 0.0,
            ..PostprocConfig::default()
        },
        ..PipelineConfig::default()
    };
    let raw = Extractor::new(cfg, builtin_model())?.extract(&img)?.groups;
    let pc = PostprocConfig::default();
    let unique = deduplicate(raw.clone(), pc.dedup_iou);
    let lines = merge_collinear(unique.clone(), &pc);
    let mut words = Vec::new();
    for l in &lines {
        if l.members.len() > 1 {
            words.extend(split_words(l, pc.word_spacing)?);
        }
    }
    println!("selected {} -> deduplicated {} -> lines {} -> words {}", raw.len(), unique.len(), lines.len(), words.len());
    println!("truth: {} words", gt.groups_at(hiertext::postproc::GroupLevel::Word).count());
    for w in &words {
        println!(
            "  word of {} regions at ({:.0},{:.0}), angle {:.1} deg",
            w.members.len(),
            w.rect.cx,
            w.rect.cy,
            w.baseline.to_degrees()
        );
    }
    Ok(())
}
