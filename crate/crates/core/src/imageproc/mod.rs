//! Image decoding, channel projections, MSER extraction and per-region
//! features.

mod channels;
mod features;
mod mser;

pub use channels::{
    luma, project_channels, project_rgb, select_channels, ChannelId, ChannelImage, ChannelSet,
};
pub use features::{
    compute_features_for_pixels, compute_region_features, hu_moments, sobel_magnitude,
    BoundingBox, Region, DEFECT_MIN_DEPTH,
};
pub use mser::{extract_mser, extract_polarity, MserParams, Polarity, RegionGeometry};

use crate::error::Result;

/// MSER extraction followed by feature computation for one channel.
pub fn channel_regions(channel: &ChannelImage, params: &MserParams) -> Result<Vec<Region>> {
    extract_mser(channel, params)?
        .iter()
        .map(|g| compute_region_features(g, channel))
        .collect()
}
