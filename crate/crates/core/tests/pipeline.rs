use hiertext::eval::{pixel_score, pr_sweep};
use hiertext::imageproc::{channel_regions, select_channels, ChannelSet};
use hiertext::pipeline::{builtin_model, Extractor, OutputLevel, PipelineConfig};
use hiertext::postproc::{
    deduplicate, emit_outputs, line_groups, merge_collinear, split_words, GroupLevel, TextGroup,
};
use hiertext::simspace::default_optimal_weights;
use hiertext::slc::build_dendrogram_with_stats;
use hiertext::groupdesc::{group_features, RegionSummary};
use hiertext::stoprule::{log_nfa, select_groups, NfaContext};
use hiertext::training::{generate_synthetic, SyntheticSpec};
use image::{DynamicImage, GrayImage, Luma, Rgb, RgbImage};

fn extractor(cfg: PipelineConfig) -> Extractor {
    Extractor::new(cfg, builtin_model()).unwrap()
}

fn two_words() -> SyntheticSpec {
    SyntheticSpec {
        words: (2, 2),
        orientation_deg: (0.0, 0.0),
        ..SyntheticSpec::default()
    }
}

#[test]
fn blank_image_gives_empty_outputs() {
    let img = DynamicImage::ImageRgb8(RgbImage::from_pixel(200, 150, Rgb([128, 128, 128])));
    let out = extractor(PipelineConfig::default()).extract(&img).unwrap();
    assert!(out.rects.is_empty());
    assert!(out.groups.is_empty());
    assert!(out.mask.pixels().all(|p| p[0] == 0));
    assert_eq!(out.timing.regions, 0);
}

#[test]
fn two_word_scenes_are_recovered() {
    let ex = extractor(PipelineConfig::default());
    for seed in 0..5 {
        let (img, gt) = generate_synthetic(seed, &two_words()).unwrap();
        let out = ex.extract(&img).unwrap();
        let s = pixel_score(&out.mask, &gt.mask()).unwrap();
        assert!(s.fscore >= 0.9, "seed {seed}: {s:?}");
        assert_eq!(out.rects.len(), 2, "seed {seed}");
    }
}

/// Nearest-neighbour rotation about the image centre onto a canvas large
/// enough to hold the whole input.
fn rotate<P: image::Pixel>(
    src: &image::ImageBuffer<P, Vec<P::Subpixel>>,
    deg: f64,
    fill: P,
) -> image::ImageBuffer<P, Vec<P::Subpixel>> {
    let (w, h) = (f64::from(src.width()), f64::from(src.height()));
    let (s, c) = deg.to_radians().sin_cos();
    let (nw, nh) = ((w * c.abs() + h * s.abs()).ceil(), (w * s.abs() + h * c.abs()).ceil());
    image::ImageBuffer::from_fn(nw as u32, nh as u32, |x, y| {
        let (dx, dy) = (f64::from(x) + 0.5 - nw / 2.0, f64::from(y) + 0.5 - nh / 2.0);
        let (sx, sy) = (c * dx + s * dy + w / 2.0, -s * dx + c * dy + h / 2.0);
        if sx >= 0.0 && sy >= 0.0 && sx < w && sy < h {
            *src.get_pixel(sx as u32, sy as u32)
        } else {
            fill
        }
    })
}

#[test]
fn rotated_scene_gives_same_groups() {
    let ex = extractor(PipelineConfig::default());
    for seed in 0..3 {
        let (img, gt) = generate_synthetic(seed, &two_words()).unwrap();
        let rgb = img.to_rgb8();
        let base = ex.extract(&img).unwrap();
        let f0 = pixel_score(&base.mask, &gt.mask()).unwrap().fscore;

        let rot = DynamicImage::ImageRgb8(rotate(&rgb, 45.0, *rgb.get_pixel(0, 0)));
        let truth = rotate(&gt.mask(), 45.0, Luma([0]));
        let out = ex.extract(&rot).unwrap();
        let f1 = pixel_score(&out.mask, &truth).unwrap().fscore;
        assert_eq!(out.rects.len(), base.rects.len(), "seed {seed}");
        assert!((f1 - f0).abs() <= 0.05, "seed {seed}: {f0} vs {f1}");
    }
}

#[test]
fn orchestration_matches_manual_stages() {
    let (img, _) = generate_synthetic(3, &SyntheticSpec::default()).unwrap();
    let cfg = PipelineConfig {
        channels: ChannelSet::Gray,
        ..PipelineConfig::default()
    };
    let ex = extractor(cfg.clone());
    let out = ex.extract(&img).unwrap();

    let model = builtin_model();
    let w = default_optimal_weights();
    let gray = select_channels(&img, ChannelSet::Gray).unwrap().remove(0);
    let regions = channel_regions(&gray, &cfg.mser).unwrap();
    let table: Vec<RegionSummary> = regions.iter().map(RegionSummary::from).collect();
    let mut d = build_dendrogram_with_stats(&table, &w, cfg.max_cluster_size).unwrap();
    let ctx = NfaContext::for_image(table.len(), img.width(), img.height());
    for node in d.nodes.iter_mut() {
        let Some(stats) = node.stats.as_ref().and_then(|s| s.group()).cloned() else {
            continue;
        };
        if let Ok(h) = group_features(&stats, &table) {
            node.label = Some(model.classify(&h));
            node.log_nfa = log_nfa(&stats, &ctx);
        }
    }
    let pc = &cfg.postproc;
    let groups: Vec<TextGroup> = select_groups(&d)
        .into_iter()
        .flat_map(|id| line_groups(&d, id, &regions, pc.max_line_height))
        .collect();
    let merged = merge_collinear(deduplicate(groups, pc.dedup_iou), pc);
    let words: Vec<TextGroup> = merged
        .iter()
        .flat_map(|g| split_words(g, pc.word_spacing).unwrap())
        .collect();
    let words = deduplicate(words, pc.dedup_iou);
    let (mask, rects) = emit_outputs(&words, img.width(), img.height());

    assert!(!rects.is_empty());
    assert_eq!(mask, out.mask);
    assert_eq!(rects, out.rects);
}

#[test]
fn extraction_is_repeatable() {
    let (img, _) = generate_synthetic(9, &SyntheticSpec { distractors: true, ..SyntheticSpec::default() }).unwrap();
    let ex = extractor(PipelineConfig::default());
    let (a, b) = (ex.extract(&img).unwrap(), ex.extract(&img).unwrap());
    assert_eq!(a.mask, b.mask);
    assert_eq!(a.rects, b.rects);
}

#[test]
fn output_levels() {
    let (img, _) = generate_synthetic(4, &SyntheticSpec::default()).unwrap();
    let word = extractor(PipelineConfig::default()).extract(&img).unwrap();
    let line = extractor(PipelineConfig {
        output_level: OutputLevel::Line,
        ..PipelineConfig::default()
    })
    .extract(&img)
    .unwrap();
    let seg = extractor(PipelineConfig {
        output_level: OutputLevel::Segmentation,
        ..PipelineConfig::default()
    })
    .extract(&img)
    .unwrap();
    assert!(word.rects.len() >= line.rects.len());
    assert!(word.rects.iter().all(|r| r.level == GroupLevel::Word));
    assert!(line.rects.iter().all(|r| r.level == GroupLevel::Line));
    assert!(seg.rects.is_empty());
    assert_eq!(seg.mask, line.mask);
}

#[test]
fn threshold_sweep_ends() {
    let ex = extractor(PipelineConfig::default());
    let data: Vec<(_, GrayImage)> = (20..24)
        .map(|s| {
            let (img, gt) = generate_synthetic(s, &SyntheticSpec::default()).unwrap();
            (ex.analyze(&img).unwrap(), gt.mask())
        })
        .collect();
    let pts = pr_sweep(&ex, &data, &[f64::INFINITY, 0.0, f64::NEG_INFINITY, 5.0]).unwrap();
    let thresholds: Vec<f64> = pts.iter().map(|p| p.threshold).collect();
    assert_eq!(thresholds, vec![f64::NEG_INFINITY, 0.0, 5.0, f64::INFINITY]);
    assert_eq!(pts[3].recall, 0.0);
    assert!(pts.iter().all(|p| pts[0].recall >= p.recall));
    assert!(pr_sweep(&ex, &data, &[0.0]).is_err());
}
