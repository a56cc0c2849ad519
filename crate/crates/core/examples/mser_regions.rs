//! MSER regions of a generated scene, per channel, with a few of the
//! per-region features.
//!
//! `cargo run --release --example mser_regions -- [image.png]`

use hiertext::imageproc::{channel_regions, project_channels, MserParams};
use hiertext::training::{generate_synthetic, SyntheticSpec};

fn main() -> hiertext::Result<()> {
    let image = match std::env::args().nth(1) {
        Some(path) => image::open(&path).map_err(|e| hiertext::Error::Decode(format!("{path}: {e}")))?,
        None => generate_synthetic(1, &SyntheticSpec::default())?.0,
    };
    let params = MserParams::default();
    for channel in project_channels(&image)? {
        let regions = channel_regions(&channel, &params)?;
        println!("{:>5}: {} regions", channel.channel().name(), regions.len());
        for r in regions.iter().take(4) {
            println!(
                "       {:?} area {:>5} at ({:6.1},{:6.1})  stroke {:5.2}  axis {:6.2}  compact {:.2}  defects {}",
                r.polarity,
                r.area,
                r.centroid.0,
                r.centroid.1,
                r.stroke_width_mean,
                r.major_axis,
                r.hull_compactness,
                r.convexity_defect_count
            );
        }
    }
    Ok(())
}
