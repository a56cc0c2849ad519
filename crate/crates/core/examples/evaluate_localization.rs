//! Pixel and rectangle scores of detections against ground truth across a
//! few generated scenes, plus a precision/recall sweep over the classifier
//! threshold.

use hiertext::cli::truth_rects;
use hiertext::eval::{localization_score, pixel_score, pr_sweep, rect_match, CorpusReport, ImageReport};
use hiertext::geometry::RotatedRect;
use hiertext::pipeline::{builtin_model, Extractor, PipelineConfig};
use hiertext::training::{generate_synthetic, SyntheticSpec};

fn main() -> hiertext::Result<()> {
    let g = RotatedRect::new(50.0, 20.0, 60.0, 16.0, 0.0);
    for (what, d) in [
        ("shifted", RotatedRect::new(56.0, 22.0, 60.0, 16.0, 0.0)),
        ("tilted 20 deg", RotatedRect::new(50.0, 20.0, 60.0, 16.0, 20f64.to_radians())),
        ("tilted 25 deg", RotatedRect::new(50.0, 20.0, 60.0, 16.0, 25f64.to_radians())),
    ] {
        println!("{what:>14}: match {}", rect_match(&d, &g));
    }

    let ex = Extractor::new(PipelineConfig::default(), builtin_model())?;
    let spec = SyntheticSpec::default();
    let mut images = Vec::new();
    let mut analyses = Vec::new();
    for seed in 100..106 {
        let (img, gt) = generate_synthetic(seed, &spec)?;
        let analysis = ex.analyze(&img)?;
        let out = ex.finish(&analysis);
        let found: Vec<RotatedRect> = out.rects.iter().map(|r| r.rect()).collect();
        images.push(ImageReport {
            id: seed.to_string(),
            pixel: pixel_score(&out.mask, &gt.mask())?,
            localization: Some(localization_score(&found, &truth_rects(&gt))),
        });
        analyses.push((analysis, gt.mask()));
    }
    let report = CorpusReport::new(images);
    println!("mean pixel f {:.3}", report.mean_pixel_fscore);
    if let Some(l) = &report.localization {
        println!("rectangles p {:.3} r {:.3} f {:.3}", l.precision, l.recall, l.fscore);
    }
    let thresholds: Vec<f64> = (-6..=6).map(|t| f64::from(t) * 5.0).collect();
    for p in pr_sweep(&ex, &analyses, &thresholds)? {
        println!("threshold {:>6.1}: p {:.3} r {:.3}", p.threshold, p.precision, p.recall);
    }
    Ok(())
}
