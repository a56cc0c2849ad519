//! Full extraction with the bundled model: mask, rectangles and stage
//! timings for a generated scene or an image given on the command line.
//!
//! `cargo run --release --example end_to_end_extract -- [image.png] [out_mask.png]`

use hiertext::eval::pixel_score;
use hiertext::pipeline::{builtin_model, Extractor, PipelineConfig};
use hiertext::training::{generate_synthetic, SyntheticSpec};

fn main() -> hiertext::Result<()> {
    let mut args = std::env::args().skip(1);
    let (image, truth) = match args.next() {
        Some(path) => (
            image::open(&path).map_err(|e| hiertext::Error::Decode(format!("{path}: {e}")))?,
            None,
        ),
        None => {
            let (img, gt) = generate_synthetic(
                5,
                &SyntheticSpec {
                    distractors: true,
                    ..SyntheticSpec::default()
                },
            )?;
            (img, Some(gt))
        }
    };

    let ex = Extractor::new(PipelineConfig::default(), builtin_model())?;
    let out = ex.extract(&image)?;
    for r in &out.rects {
        println!(
            "{:?} centre ({:.1},{:.1}) size {:.1}x{:.1} angle {:.1} deg",
            r.level,
            r.cx,
            r.cy,
            r.w,
            r.h,
            r.angle_rad.to_degrees()
        );
    }
    println!("{}", serde_json::to_string_pretty(&out.timing)?);
    if let Some(gt) = truth {
        let s = pixel_score(&out.mask, &gt.mask())?;
        println!("pixel p {:.3} r {:.3} f {:.3}", s.precision, s.recall, s.fscore);
    }
    if let Some(path) = args.next() {
        out.mask.save(&path)?;
    }
    Ok(())
}
