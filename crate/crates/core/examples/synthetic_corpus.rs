//! Writes a small annotated corpus of generated scenes.
//!
//! `cargo run --release --example synthetic_corpus -- out_dir [count]`

use std::path::PathBuf;

use hiertext::postproc::GroupLevel;
use hiertext::training::{generate_synthetic, write_manifest, write_sample, Manifest, SyntheticSpec};

fn main() -> hiertext::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let count: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    std::fs::create_dir_all(&root).map_err(|e| hiertext::Error::io(&root, e))?;

    let spec = SyntheticSpec {
        distractors: true,
        ..SyntheticSpec::default()
    };
    let mut samples = Vec::new();
    for seed in 0..count {
        let (img, gt) = generate_synthetic(seed, &spec)?;
        println!(
            "{seed}: {} characters, {} words, {} lines",
            gt.char_areas().len(),
            gt.groups_at(GroupLevel::Word).count(),
            gt.groups_at(GroupLevel::Line).count()
        );
        samples.push(write_sample(&root, &format!("{seed:04}"), &img, &gt)?);
    }
    write_manifest(&root, &Manifest { samples })?;
    println!("corpus written to {}", root.display());
    Ok(())
}
