use hiertext::imageproc::{channel_regions, select_channels, ChannelSet, MserParams};
use hiertext::training::{generate_synthetic, match_char, SyntheticSpec};

#[test]
fn every_glyph_is_an_extremal_region() {
    let spec = SyntheticSpec::default();
    let params = MserParams::default();
    for seed in 0..20 {
        let (img, gt) = generate_synthetic(seed, &spec).unwrap();
        let gray = select_channels(&img, ChannelSet::Gray).unwrap().remove(0);
        let regions = channel_regions(&gray, &params).unwrap();
        let areas = gt.char_areas();
        let found: std::collections::HashSet<u32> =
            regions.iter().filter_map(|r| match_char(&r.pixels, &gt, &areas)).collect();
        let missing: Vec<u32> = areas.keys().filter(|c| !found.contains(c)).copied().collect();
        assert!(missing.is_empty(), "seed {seed}: glyphs {missing:?} of {} not recovered", areas.len());
    }
}
