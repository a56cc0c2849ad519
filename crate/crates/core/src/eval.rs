//! Pixel-level and rectangle-level scoring against ground truth, and
//! precision/recall sweeps over the classifier threshold.
//!
//! Rectangles are matched with the MSRA-TD500 rule: axis-aligned versions
//! must overlap with IoU above 0.5 and the angles must differ by less than
//! pi/8. The Wolf-Jolion protocol is not implemented.

use std::io::Write;
use std::path::Path;

use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RotatedRect;
use crate::pipeline::{Analysis, Extractor};
use crate::postproc::axial_difference;

fn fscore(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelScore {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub detected: usize,
    pub truth: usize,
    pub overlap: usize,
}

impl PixelScore {
    pub fn from_counts(detected: usize, truth: usize, overlap: usize) -> Self {
        if detected == 0 && truth == 0 {
            return PixelScore {
                precision: 1.0,
                recall: 1.0,
                fscore: 1.0,
                detected,
                truth,
                overlap,
            };
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (p, r) = (ratio(overlap, detected), ratio(overlap, truth));
        PixelScore {
            precision: p,
            recall: r,
            fscore: fscore(p, r),
            detected,
            truth,
            overlap,
        }
    }
}

/// Non-zero pixels are text in both masks.
pub fn pixel_score(detected: &GrayImage, truth: &GrayImage) -> Result<PixelScore> {
    if detected.dimensions() != truth.dimensions() {
        return Err(Error::DataFormat(format!(
            "mask sizes differ: {:?} vs {:?}",
            detected.dimensions(),
            truth.dimensions()
        )));
    }
    let (mut e, mut t, mut both) = (0, 0, 0);
    for (a, b) in detected.pixels().zip(truth.pixels()) {
        let (ea, tb) = (a.0[0] > 0, b.0[0] > 0);
        e += usize::from(ea);
        t += usize::from(tb);
        both += usize::from(ea && tb);
    }
    Ok(PixelScore::from_counts(e, t, both))
}

pub const MSRA_MIN_IOU: f64 = 0.5;
pub const MSRA_MAX_ANGLE: f64 = std::f64::consts::FRAC_PI_8;

pub fn rect_match(d: &RotatedRect, g: &RotatedRect) -> bool {
    d.axis_aligned().iou(&g.axis_aligned()) > MSRA_MIN_IOU && axial_difference(d.angle, g.angle) < MSRA_MAX_ANGLE
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationScore {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub true_positives: usize,
    pub detected: usize,
    pub truth: usize,
}

impl LocalizationScore {
    pub fn from_counts(tp: usize, detected: usize, truth: usize) -> Self {
        let p = if detected == 0 { 1.0 } else { tp as f64 / detected as f64 };
        let r = if truth == 0 { 1.0 } else { tp as f64 / truth as f64 };
        LocalizationScore {
            precision: p,
            recall: r,
            fscore: fscore(p, r),
            true_positives: tp,
            detected,
            truth,
        }
    }
}

fn rect_key(r: &RotatedRect) -> [u64; 5] {
    [r.cx, r.cy, r.w, r.h, r.angle].map(|v| v.to_bits())
}

/// One-to-one greedy matching over matching pairs in descending IoU.
pub fn localization_score(detected: &[RotatedRect], truth: &[RotatedRect]) -> LocalizationScore {
    let mut pairs = Vec::new();
    for (i, d) in detected.iter().enumerate() {
        for (j, g) in truth.iter().enumerate() {
            if rect_match(d, g) {
                pairs.push((d.axis_aligned().iou(&g.axis_aligned()), i, j));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| rect_key(&detected[a.1]).cmp(&rect_key(&detected[b.1])))
            .then_with(|| rect_key(&truth[a.2]).cmp(&rect_key(&truth[b.2])))
    });
    let (mut used_d, mut used_g) = (vec![false; detected.len()], vec![false; truth.len()]);
    let mut tp = 0;
    for (_, i, j) in pairs {
        if !used_d[i] && !used_g[j] {
            used_d[i] = true;
            used_g[j] = true;
            tp += 1;
        }
    }
    LocalizationScore::from_counts(tp, detected.len(), truth.len())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub id: String,
    pub pixel: PixelScore,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub localization: Option<LocalizationScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub images: Vec<ImageReport>,
    /// Means of the per-image pixel scores.
    pub mean_pixel_precision: f64,
    pub mean_pixel_recall: f64,
    pub mean_pixel_fscore: f64,
    /// Localization pooled over all images.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub localization: Option<LocalizationScore>,
}

impl CorpusReport {
    pub fn new(images: Vec<ImageReport>) -> Self {
        let n = images.len().max(1) as f64;
        let mean = |f: fn(&PixelScore) -> f64| images.iter().map(|r| f(&r.pixel)).sum::<f64>() / n;
        let localization = if images.iter().all(|r| r.localization.is_some()) && !images.is_empty() {
            let (mut tp, mut d, mut t) = (0, 0, 0);
            for l in images.iter().filter_map(|r| r.localization) {
                tp += l.true_positives;
                d += l.detected;
                t += l.truth;
            }
            Some(LocalizationScore::from_counts(tp, d, t))
        } else {
            None
        };
        CorpusReport {
            mean_pixel_precision: mean(|p| p.precision),
            mean_pixel_recall: mean(|p| p.recall),
            mean_pixel_fscore: mean(|p| p.fscore),
            localization,
            images,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Pooled pixel precision and recall at each threshold, re-running the
/// stopping rule and post-processing on precomputed analyses. Thresholds are
/// sorted ascending.
pub fn pr_sweep(
    extractor: &Extractor,
    analyses: &[(Analysis, GrayImage)],
    thresholds: &[f64],
) -> Result<Vec<SweepPoint>> {
    if thresholds.len() < 2 {
        return Err(Error::InvalidInput("a sweep needs at least two thresholds".into()));
    }
    let mut ts = thresholds.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.into_iter()
        .map(|t| {
            let (mut e, mut g, mut both) = (0, 0, 0);
            for (a, truth) in analyses {
                let out = extractor.finish_at(a, t);
                let s = pixel_score(&out.mask, truth)?;
                e += s.detected;
                g += s.truth;
                both += s.overlap;
            }
            let s = PixelScore::from_counts(e, g, both);
            Ok(SweepPoint {
                threshold: t,
                precision: s.precision,
                recall: s.recall,
            })
        })
        .collect()
}

pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "threshold,precision,recall").expect("write to memory");
    for p in points {
        writeln!(out, "{},{},{}", p.threshold, p.precision, p.recall).expect("write to memory");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Luma;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn mask(w: u32, h: u32, lit: impl Fn(u32, u32) -> bool) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| Luma([if lit(x, y) { 255 } else { 0 }]))
    }

    #[test]
    fn pixel_fixtures() {
        let a = mask(20, 20, |x, _| x < 5);
        assert_eq!(pixel_score(&a, &a).unwrap().fscore, 1.0);
        let b = mask(20, 20, |x, _| x >= 10);
        let s = pixel_score(&a, &b).unwrap();
        assert_eq!((s.precision, s.recall, s.fscore), (0.0, 0.0, 0.0));
        let e = mask(20, 20, |x, _| x < 5);
        let t = mask(20, 20, |x, _| x < 10);
        let s = pixel_score(&e, &t).unwrap();
        assert_eq!((s.detected, s.truth, s.overlap), (100, 200, 100));
        assert_eq!((s.precision, s.recall), (1.0, 0.5));
        assert_eq!(s.fscore, 2.0 / 3.0);
        let empty = mask(20, 20, |_, _| false);
        let s = pixel_score(&empty, &empty).unwrap();
        assert_eq!((s.precision, s.recall, s.fscore), (1.0, 1.0, 1.0));
        let s = pixel_score(&empty, &t).unwrap();
        assert_eq!((s.precision, s.recall, s.fscore), (0.0, 0.0, 0.0));
        assert!(pixel_score(&mask(3, 3, |_, _| true), &t).is_err());
    }

    #[test]
    fn rect_fixtures() {
        let g = RotatedRect::new(50.0, 50.0, 40.0, 10.0, 0.3);
        assert!(rect_match(&g, &g));
        let turned = RotatedRect::new(50.0, 50.0, 40.0, 10.0, 0.3 + PI / 4.0);
        assert!(!rect_match(&turned, &g));
        let a = RotatedRect::new(5.0, 5.0, 10.0, 10.0, 0.0);
        let b = RotatedRect::new(10.0, 5.0, 10.0, 10.0, 0.0);
        assert_eq!(a.axis_aligned().iou(&b.axis_aligned()), 50.0 / 150.0);
        assert!(!rect_match(&a, &b));
        // The gate is strict at pi/8.
        let near = RotatedRect::new(50.0, 50.0, 40.0, 10.0, 0.3 + PI / 8.0 - 1e-9);
        let at = RotatedRect::new(50.0, 50.0, 40.0, 10.0, 0.3 + PI / 8.0);
        assert!(rect_match(&near, &g));
        assert!(!rect_match(&at, &g));
    }

    #[test]
    fn localization_fixtures() {
        let g = RotatedRect::new(50.0, 50.0, 40.0, 10.0, 0.0);
        let s = localization_score(&[g], &[g]);
        assert_eq!((s.precision, s.recall, s.fscore), (1.0, 1.0, 1.0));
        let s = localization_score(&[], &[g]);
        assert_eq!((s.precision, s.recall, s.fscore), (1.0, 0.0, 0.0));
        let d2 = RotatedRect::new(51.0, 50.0, 40.0, 10.0, 0.0);
        let s = localization_score(&[g, d2], &[g]);
        assert_eq!(s.true_positives, 1);
        assert_eq!(s.precision, 0.5);
    }

    fn arb_rect() -> impl Strategy<Value = RotatedRect> {
        (0.0..40.0f64, 0.0..40.0f64, 2.0..30.0f64, 2.0..30.0f64, -1.5..1.5f64)
            .prop_map(|(x, y, w, h, a)| RotatedRect::new(x, y, w, h, a))
    }

    proptest! {
        #[test]
        fn rect_match_symmetric(a in arb_rect(), b in arb_rect()) {
            prop_assert_eq!(rect_match(&a, &b), rect_match(&b, &a));
        }

        #[test]
        fn pixel_score_swaps(bits_a in prop::collection::vec(any::<bool>(), 64), bits_b in prop::collection::vec(any::<bool>(), 64)) {
            let a = mask(8, 8, |x, y| bits_a[(y * 8 + x) as usize]);
            let b = mask(8, 8, |x, y| bits_b[(y * 8 + x) as usize]);
            let ab = pixel_score(&a, &b).unwrap();
            let ba = pixel_score(&b, &a).unwrap();
            prop_assert_eq!(ab.precision, ba.recall);
            prop_assert_eq!(ab.recall, ba.precision);
        }

        #[test]
        fn tp_ignores_order(e in prop::collection::vec(arb_rect(), 0..6), t in prop::collection::vec(arb_rect(), 0..6), seed in any::<u64>()) {
            let base = localization_score(&e, &t).true_positives;
            let mut e2 = e.clone();
            let mut t2 = t.clone();
            let k = (seed % 7) as usize;
            let k = k.min(e2.len());
            e2.rotate_left(k);
            t2.reverse();
            prop_assert_eq!(localization_score(&e2, &t2).true_positives, base);
            prop_assert!(base <= e.len().min(t.len()));
        }
    }
}
