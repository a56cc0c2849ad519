//! Deterministic synthetic scenes: block-letter words on noisy backgrounds,
//! with optional grids of rectangles that imitate windows and bricks.
//!
//! Glyphs are unions of axis-aligned strokes in their own frame, rasterized
//! by pixel center after rotation, so the label image reproduces the glyph
//! pixels exactly.

use image::{DynamicImage, Luma, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageproc::luma;
use crate::postproc::GroupLevel;

use super::groundtruth::{GroundTruth, GtGroup, LabelImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub width: u32,
    pub height: u32,
    /// Inclusive range of words per image.
    pub words: (usize, usize),
    /// Inclusive range of glyphs per word.
    pub glyphs: (usize, usize),
    /// Inclusive range of glyph heights in pixels.
    pub glyph_height: (u32, u32),
    /// Inclusive range of line orientations in degrees.
    pub orientation_deg: (f64, f64),
    /// Most words that share one line.
    pub max_words_per_line: usize,
    /// Minimum gray-level difference between text and background.
    pub min_contrast: u8,
    /// Amplitude of uniform per-channel noise.
    pub noise: u8,
    pub distractors: bool,
    /// Inclusive range of distractor grids when enabled.
    pub distractor_grids: (usize, usize),
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            width: 320,
            height: 240,
            words: (2, 5),
            glyphs: (3, 8),
            glyph_height: (18, 30),
            orientation_deg: (-45.0, 45.0),
            max_words_per_line: 2,
            min_contrast: 60,
            noise: 6,
            distractors: false,
            distractor_grids: (1, 3),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("synthetic spec: {m}")));
        if self.width < 32 || self.height < 32 {
            return bad("canvas must be at least 32x32");
        }
        if self.words.0 > self.words.1 || self.glyphs.0 > self.glyphs.1 || self.glyphs.0 == 0 {
            return bad("word and glyph ranges must be non-empty");
        }
        if self.glyph_height.0 < 12 || self.glyph_height.0 > self.glyph_height.1 {
            return bad("glyph heights must start at 12 pixels or more");
        }
        let (lo, hi) = self.orientation_deg;
        if !(-90.0..=90.0).contains(&lo) || !(-90.0..=90.0).contains(&hi) || lo > hi {
            return bad("orientation must lie within [-90, 90] degrees");
        }
        if self.min_contrast < 60 {
            return bad("contrast must be at least 60 gray levels");
        }
        if self.max_words_per_line == 0 || self.distractor_grids.0 > self.distractor_grids.1 {
            return bad("line and distractor ranges must be non-empty");
        }
        Ok(())
    }

    /// Text-free variant with distractors only.
    pub fn distractors_only(mut self) -> Self {
        self.words = (0, 0);
        self.distractors = true;
        self
    }
}

/// A stroke `[x0, x1) x [y0, y1)` in glyph units where the glyph box is
/// `1 x 1`; `S` marks offsets in stroke widths.
#[derive(Clone, Copy)]
struct Stroke {
    x0: Edge,
    x1: Edge,
    y0: Edge,
    y1: Edge,
}

#[derive(Clone, Copy)]
enum Edge {
    /// Fraction of the box.
    F(f64),
    /// Fraction of the box plus a multiple of the stroke width.
    FS(f64, f64),
}

impl Edge {
    fn at(self, size: f64, stroke: f64) -> f64 {
        match self {
            Edge::F(f) => f * size,
            Edge::FS(f, s) => f * size + s * stroke,
        }
    }
}

use Edge::{F, FS};

const fn st(x0: Edge, x1: Edge, y0: Edge, y1: Edge) -> Stroke {
    Stroke { x0, x1, y0, y1 }
}

const LEFT: Stroke = st(F(0.0), FS(0.0, 1.0), F(0.0), F(1.0));
const RIGHT: Stroke = st(FS(1.0, -1.0), F(1.0), F(0.0), F(1.0));
const TOP: Stroke = st(F(0.0), F(1.0), F(0.0), FS(0.0, 1.0));
const BOTTOM: Stroke = st(F(0.0), F(1.0), FS(1.0, -1.0), F(1.0));
const MIDDLE: Stroke = st(F(0.0), F(1.0), FS(0.5, -0.5), FS(0.5, 0.5));
const SHORT_MIDDLE: Stroke = st(F(0.0), F(0.75), FS(0.5, -0.5), FS(0.5, 0.5));
const STEM: Stroke = st(FS(0.5, -0.5), FS(0.5, 0.5), F(0.0), F(1.0));
const UPPER_RIGHT: Stroke = st(FS(1.0, -1.0), F(1.0), F(0.0), FS(0.5, 0.5));
const LOWER_RIGHT: Stroke = st(FS(1.0, -1.0), F(1.0), FS(0.5, -0.5), F(1.0));

const GLYPHS: &[&[Stroke]] = &[
    &[STEM],                                // I
    &[LEFT, BOTTOM],                        // L
    &[TOP, STEM],                           // T
    &[LEFT, RIGHT, MIDDLE],                 // H
    &[LEFT, RIGHT, BOTTOM],                 // U
    &[LEFT, TOP, SHORT_MIDDLE, BOTTOM],     // E
    &[LEFT, TOP, BOTTOM],                   // C
    &[LEFT, RIGHT, TOP, BOTTOM],            // O
    &[LEFT, TOP, SHORT_MIDDLE],             // F
    &[LEFT, TOP, MIDDLE, UPPER_RIGHT],      // P
    &[TOP, MIDDLE, BOTTOM, UPPER_RIGHT, st(F(0.0), FS(0.0, 1.0), FS(0.5, -0.5), F(1.0))], // 2-like
    &[TOP, MIDDLE, BOTTOM, UPPER_RIGHT, LOWER_RIGHT], // 3-like
    &[LEFT, MIDDLE, RIGHT, st(F(0.0), F(1.0), F(0.0), FS(0.0, 1.0))], // A-like
    &[TOP, MIDDLE, BOTTOM, LOWER_RIGHT, st(F(0.0), FS(0.0, 1.0), F(0.0), FS(0.5, 0.5))], // S-like
];

/// Glyph width over glyph height.
const GLYPH_ASPECT: f64 = 0.62;
/// Blank space between glyphs of a word, in glyph heights.
const GLYPH_GAP: f64 = 0.38;
/// Blank space between words of a line, in glyph heights.
const WORD_GAP: f64 = 4.0;

struct LinePlan {
    height: f64,
    angle: f64,
    /// Glyph shape indices per word.
    words: Vec<Vec<usize>>,
}

impl LinePlan {
    fn stroke(&self) -> f64 {
        (self.height * 0.18).round().max(3.0)
    }

    fn glyph_width(&self) -> f64 {
        (self.height * GLYPH_ASPECT).round()
    }

    fn gap(&self) -> f64 {
        (self.height * GLYPH_GAP).round().max(4.0)
    }

    /// Glyph boxes as `(word, u0)` along the line.
    fn layout(&self) -> (Vec<(usize, usize, f64)>, f64) {
        let (gw, gap) = (self.glyph_width(), self.gap());
        let mut u = 0.0;
        let mut out = Vec::new();
        for (wi, word) in self.words.iter().enumerate() {
            if wi > 0 {
                u += (WORD_GAP * self.height).round() - gap;
            }
            for &shape in word {
                out.push((wi, shape, u));
                u += gw + gap;
            }
        }
        (out, u - gap)
    }
}

struct Canvas {
    width: u32,
    height: u32,
    occupied: Vec<bool>,
}

impl Canvas {
    /// Pixels of the rotated rectangle `[0, len] x [0, h]` placed at
    /// `origin`, grown by `margin`; `None` if it leaves the canvas.
    fn footprint(&self, origin: (f64, f64), angle: f64, len: f64, h: f64, margin: f64) -> Option<Vec<usize>> {
        let (s, c) = angle.sin_cos();
        let corners = [(-margin, -margin), (len + margin, -margin), (len + margin, h + margin), (-margin, h + margin)];
        let pts: Vec<(f64, f64)> = corners
            .iter()
            .map(|&(u, v)| (origin.0 + u * c - v * s, origin.1 + u * s + v * c))
            .collect();
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y) in &pts {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        if x0 < 1.0 || y0 < 1.0 || x1 > f64::from(self.width) - 1.0 || y1 > f64::from(self.height) - 1.0 {
            return None;
        }
        let mut cells = Vec::new();
        for y in y0.floor() as u32..=y1.ceil().min(f64::from(self.height) - 1.0) as u32 {
            for x in x0.floor() as u32..=x1.ceil().min(f64::from(self.width) - 1.0) as u32 {
                let (dx, dy) = (x as f64 + 0.5 - origin.0, y as f64 + 0.5 - origin.1);
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                if u >= -margin && u <= len + margin && v >= -margin && v <= h + margin {
                    cells.push((y * self.width + x) as usize);
                }
            }
        }
        Some(cells)
    }

    fn try_claim(&mut self, cells: &[usize]) -> bool {
        if cells.iter().any(|&i| self.occupied[i]) {
            return false;
        }
        for &i in cells {
            self.occupied[i] = true;
        }
        true
    }
}

struct Scene {
    image: RgbImage,
    labels: LabelImage,
    groups: Vec<GtGroup>,
    next_char: u16,
}

fn random_color(rng: &mut ChaCha8Rng) -> [u8; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

fn gray_of(c: [u8; 3]) -> u8 {
    luma(c[0], c[1], c[2])
}

/// A color whose gray level differs from `bg` by at least `contrast`, kept
/// clear of saturation so noise cannot wrap.
fn contrasting_color(rng: &mut ChaCha8Rng, bg: [u8; 3], contrast: u8) -> [u8; 3] {
    let target = i32::from(contrast) + 10;
    loop {
        let c = [rng.gen_range(16..240u8), rng.gen_range(16..240u8), rng.gen_range(16..240u8)];
        if (i32::from(gray_of(c)) - i32::from(gray_of(bg))).abs() >= target {
            return c;
        }
    }
}

impl LinePlan {
    /// Whether the rotated line and its margin fit inside the canvas.
    fn fits(&self, spec: &SyntheticSpec) -> bool {
        let (_, len) = self.layout();
        let m = 1.2 * self.height + 2.0;
        let (s, c) = (self.angle.sin().abs(), self.angle.cos().abs());
        let bw = (len + m) * c + (self.height + m) * s;
        let bh = (len + m) * s + (self.height + m) * c;
        bw < f64::from(spec.width) - 2.0 && bh < f64::from(spec.height) - 2.0
    }
}

fn plan_lines(rng: &mut ChaCha8Rng, spec: &SyntheticSpec, n_words: usize) -> Vec<LinePlan> {
    let mut words: Vec<Vec<usize>> = (0..n_words)
        .map(|_| {
            let n = rng.gen_range(spec.glyphs.0..=spec.glyphs.1);
            (0..n).map(|_| rng.gen_range(0..GLYPHS.len())).collect()
        })
        .collect();
    let mut lines = Vec::new();
    while !words.is_empty() {
        let k = rng.gen_range(1..=spec.max_words_per_line.min(words.len()));
        let height = f64::from(rng.gen_range(spec.glyph_height.0..=spec.glyph_height.1));
        let angle = rng.gen_range(spec.orientation_deg.0..=spec.orientation_deg.1).to_radians();
        let mut plan = LinePlan {
            height,
            angle,
            words: words.drain(..k).collect(),
        };
        // Shrink an oversized line: fewer words per line, then smaller
        // glyphs, then shorter words.
        while !plan.fits(spec) {
            if plan.words.len() > 1 {
                let last = plan.words.pop().expect("several words");
                words.insert(0, last);
            } else if plan.height > f64::from(spec.glyph_height.0) {
                plan.height -= 1.0;
            } else if plan.words[0].len() > spec.glyphs.0 {
                plan.words[0].pop();
            } else {
                break;
            }
        }
        lines.push(plan);
    }
    lines
}

const PLACEMENT_TRIES: usize = 200;

fn place_line(rng: &mut ChaCha8Rng, canvas: &mut Canvas, scene: &mut Scene, plan: &LinePlan, color: [u8; 3]) -> bool {
    let (boxes, len) = plan.layout();
    let h = plan.height;
    for _ in 0..PLACEMENT_TRIES {
        let origin = (
            rng.gen_range(0.0..f64::from(canvas.width)),
            rng.gen_range(0.0..f64::from(canvas.height)),
        );
        let Some(cells) = canvas.footprint(origin, plan.angle, len, h, 0.6 * h) else {
            continue;
        };
        if !canvas.try_claim(&cells) {
            continue;
        }
        render_line(scene, plan, &boxes, origin, len, color);
        return true;
    }
    false
}

fn render_line(scene: &mut Scene, plan: &LinePlan, boxes: &[(usize, usize, f64)], origin: (f64, f64), len: f64, color: [u8; 3]) {
    let (s, c) = plan.angle.sin_cos();
    let (gw, h, sw) = (plan.glyph_width(), plan.height, plan.stroke());
    let first_id = scene.next_char;
    let (w, ht) = (scene.image.width(), scene.image.height());
    let span = len.hypot(h) + 2.0;
    let (x0, x1) = ((origin.0 - span).max(0.0) as u32, ((origin.0 + span).ceil() as u32).min(w - 1));
    let (y0, y1) = ((origin.1 - span).max(0.0) as u32, ((origin.1 + span).ceil() as u32).min(ht - 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 + 0.5 - origin.0, y as f64 + 0.5 - origin.1);
            let u = dx * c + dy * s;
            let v = -dx * s + dy * c;
            if v < 0.0 || v >= h || u < 0.0 || u >= len {
                continue;
            }
            for (k, &(_, shape, u0)) in boxes.iter().enumerate() {
                let lu = u - u0;
                if lu < 0.0 || lu >= gw {
                    continue;
                }
                let inside = GLYPHS[shape].iter().any(|stroke| {
                    lu >= stroke.x0.at(gw, sw)
                        && lu < stroke.x1.at(gw, sw)
                        && v >= stroke.y0.at(h, sw)
                        && v < stroke.y1.at(h, sw)
                });
                if inside {
                    scene.image.put_pixel(x, y, Rgb(color));
                    scene.labels.put_pixel(x, y, Luma([first_id + k as u16]));
                }
                break;
            }
        }
    }
    scene.next_char += boxes.len() as u16;

    let mut line_members = Vec::new();
    for wi in 0..plan.words.len() {
        let members: Vec<u32> = boxes
            .iter()
            .enumerate()
            .filter(|(_, b)| b.0 == wi)
            .map(|(k, _)| u32::from(first_id) + k as u32)
            .collect();
        line_members.extend_from_slice(&members);
        let id = scene.groups.len() as u32 + 1;
        scene.groups.push(GtGroup {
            id,
            level: GroupLevel::Word,
            members,
        });
    }
    let id = scene.groups.len() as u32 + 1;
    scene.groups.push(GtGroup {
        id,
        level: GroupLevel::Line,
        members: line_members,
    });
}

fn place_distractors(rng: &mut ChaCha8Rng, canvas: &mut Canvas, scene: &mut Scene, spec: &SyntheticSpec, bg: [u8; 3]) {
    let n = rng.gen_range(spec.distractor_grids.0..=spec.distractor_grids.1);
    for _ in 0..n {
        let cw = f64::from(rng.gen_range(8..=18u32));
        let ch = f64::from(rng.gen_range(8..=22u32));
        let gap = f64::from(rng.gen_range(4..=9u32));
        let (rows, cols) = (rng.gen_range(2..=5usize), rng.gen_range(3..=8usize));
        let angle = rng.gen_range(-8.0f64..=8.0).to_radians();
        let color = contrasting_color(rng, bg, spec.min_contrast);
        let len = cols as f64 * (cw + gap) - gap;
        let tall = rows as f64 * (ch + gap) - gap;
        for _ in 0..PLACEMENT_TRIES {
            let origin = (
                rng.gen_range(0.0..f64::from(canvas.width)),
                rng.gen_range(0.0..f64::from(canvas.height)),
            );
            let Some(cells) = canvas.footprint(origin, angle, len, tall, 6.0) else {
                continue;
            };
            if !canvas.try_claim(&cells) {
                continue;
            }
            let (s, c) = angle.sin_cos();
            for y in 0..scene.image.height() {
                for x in 0..scene.image.width() {
                    let (dx, dy) = (x as f64 + 0.5 - origin.0, y as f64 + 0.5 - origin.1);
                    let u = dx * c + dy * s;
                    let v = -dx * s + dy * c;
                    if u < 0.0 || v < 0.0 || u >= len || v >= tall {
                        continue;
                    }
                    let (cu, cv) = (u % (cw + gap), v % (ch + gap));
                    if cu < cw && cv < ch {
                        scene.image.put_pixel(x, y, Rgb(color));
                    }
                }
            }
            break;
        }
    }
}

/// Renders one scene. Packing failures retry with one word fewer; a scene
/// that cannot hold even the minimum word count is an error.
pub fn generate_synthetic(seed: u64, spec: &SyntheticSpec) -> Result<(DynamicImage, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bg = random_color(&mut rng);
    let bg = [bg[0].clamp(20, 235), bg[1].clamp(20, 235), bg[2].clamp(20, 235)];
    let mut n_words = rng.gen_range(spec.words.0..=spec.words.1);
    let layout_seed: u64 = rng.gen();
    let noise_seed: u64 = rng.gen();

    let mut attempt = 0u64;
    let (mut canvas, mut scene, mut lrng) = loop {
        let mut lrng = ChaCha8Rng::seed_from_u64(layout_seed.wrapping_add(attempt));
        let mut canvas = Canvas {
            width: spec.width,
            height: spec.height,
            occupied: vec![false; (spec.width * spec.height) as usize],
        };
        let mut scene = Scene {
            image: RgbImage::from_pixel(spec.width, spec.height, Rgb(bg)),
            labels: LabelImage::new(spec.width, spec.height),
            groups: Vec::new(),
            next_char: 1,
        };
        let plans = plan_lines(&mut lrng, spec, n_words);
        let mut ok = true;
        for plan in &plans {
            let color = contrasting_color(&mut lrng, bg, spec.min_contrast);
            if !place_line(&mut lrng, &mut canvas, &mut scene, plan, color) {
                ok = false;
                break;
            }
        }
        if ok {
            break (canvas, scene, lrng);
        }
        attempt += 1;
        if attempt % 4 == 0 {
            if n_words <= spec.words.0.max(1) {
                return Err(Error::InvalidInput(format!(
                    "cannot pack {n_words} words into a {}x{} canvas",
                    spec.width, spec.height
                )));
            }
            n_words -= 1;
        }
    };

    if spec.distractors {
        place_distractors(&mut lrng, &mut canvas, &mut scene, spec, bg);
    }

    let mut nrng = ChaCha8Rng::seed_from_u64(noise_seed);
    let amp = i16::from(spec.noise);
    if amp > 0 {
        for px in scene.image.pixels_mut() {
            for v in px.0.iter_mut() {
                let n = nrng.gen_range(-amp..=amp);
                *v = (i16::from(*v) + n).clamp(0, 255) as u8;
            }
        }
    }
    let gt = GroundTruth::new(scene.labels, scene.groups)?;
    Ok((DynamicImage::ImageRgb8(scene.image), gt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scene() {
        let spec = SyntheticSpec::default();
        let (a, ga) = generate_synthetic(11, &spec).unwrap();
        let (b, gb) = generate_synthetic(11, &spec).unwrap();
        assert_eq!(a.as_bytes(), b.as_bytes());
        assert_eq!(ga, gb);
        let (c, _) = generate_synthetic(12, &spec).unwrap();
        assert_ne!(a.as_bytes(), c.as_bytes());
    }

    #[test]
    fn ground_truth_structure() {
        let spec = SyntheticSpec::default();
        for seed in 0..10 {
            let (_, gt) = generate_synthetic(seed, &spec).unwrap();
            let words: Vec<_> = gt.groups_at(GroupLevel::Word).collect();
            assert!((2..=5).contains(&words.len()), "seed {seed}: {} words", words.len());
            for w in &words {
                assert!((3..=8).contains(&w.members.len()));
            }
            let areas = gt.char_areas();
            assert!(areas.values().all(|&a| a >= 50), "seed {seed}");
        }
    }

    #[test]
    fn distractor_only_scene_has_no_groups() {
        let (img, gt) = generate_synthetic(3, &SyntheticSpec::default().distractors_only()).unwrap();
        assert!(gt.groups.is_empty());
        assert!(gt.char_areas().is_empty());
        let first = img.to_rgb8().get_pixel(0, 0).0;
        assert!(img.to_rgb8().pixels().any(|p| {
            p.0.iter().zip(first).any(|(a, b)| (i16::from(*a) - i16::from(b)).abs() > 30)
        }));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = SyntheticSpec::default();
        spec.min_contrast = 30;
        assert!(generate_synthetic(0, &spec).is_err());
        let mut spec = SyntheticSpec::default();
        spec.orientation_deg = (-120.0, 0.0);
        assert!(generate_synthetic(0, &spec).is_err());
    }

    #[test]
    fn impossible_packing_errors() {
        let spec = SyntheticSpec {
            width: 40,
            height: 40,
            words: (3, 3),
            glyphs: (8, 8),
            glyph_height: (30, 30),
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(0, &spec).is_err());
    }
}
