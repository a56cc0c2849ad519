//! Fusion of selected groups across channels and weightings, collinear
//! merging, word splitting and output rendering.

use std::io::Write;
use std::path::Path;

use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pixel_min_area_rect, wrap_half_turn, RotatedRect};
use crate::imageproc::{ChannelId, Region};
use crate::slc::{Dendrogram, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupLevel {
    Word,
    Line,
}

impl GroupLevel {
    pub fn name(self) -> &'static str {
        match self {
            GroupLevel::Word => "word",
            GroupLevel::Line => "line",
        }
    }
}

/// A region inside a text group together with where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupMember {
    pub channel: ChannelId,
    pub weights: String,
    pub centroid: (f64, f64),
    /// Row-major sorted pixel coordinates.
    pub pixels: Vec<(u32, u32)>,
}

impl GroupMember {
    pub fn from_region(r: &Region, weights: &str) -> Self {
        GroupMember {
            channel: r.channel,
            weights: weights.to_string(),
            centroid: r.centroid,
            pixels: r.pixels.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextGroup {
    pub members: Vec<GroupMember>,
    /// Union of member pixels as sorted `(x, y)` pairs.
    pub footprint: Vec<(u32, u32)>,
    pub rect: RotatedRect,
    /// Direction of the text baseline, in `[-pi/2, pi/2)`.
    pub baseline: f64,
    pub mean_height: f64,
    pub log_nfa: f64,
    pub level: GroupLevel,
}

impl TextGroup {
    pub fn new(members: Vec<GroupMember>, log_nfa: f64, level: GroupLevel) -> Result<Self> {
        let mut footprint: Vec<(u32, u32)> = members.iter().flat_map(|m| m.pixels.iter().copied()).collect();
        if footprint.is_empty() {
            return Err(Error::InvalidInput("text group without pixels".into()));
        }
        footprint.sort_unstable();
        footprint.dedup();
        let rect = pixel_min_area_rect(footprint.iter().copied()).expect("non-empty footprint");
        let baseline = baseline_direction(&members).unwrap_or(rect.angle);
        let mean_height = mean_height(&members, baseline);
        Ok(TextGroup {
            members,
            footprint,
            rect,
            baseline,
            mean_height,
            log_nfa,
            level,
        })
    }

    pub fn centroid(&self) -> (f64, f64) {
        let k = self.members.len() as f64;
        let (sx, sy) = self
            .members
            .iter()
            .fold((0.0, 0.0), |(sx, sy), m| (sx + m.centroid.0, sy + m.centroid.1));
        (sx / k, sy / k)
    }

    pub fn footprint_iou(&self, other: &TextGroup) -> f64 {
        sorted_iou(&self.footprint, &other.footprint)
    }
}

/// Principal direction of the member centroids, or `None` when they do not
/// spread out.
fn baseline_direction(members: &[GroupMember]) -> Option<f64> {
    if members.len() < 2 {
        return None;
    }
    let k = members.len() as f64;
    let mx = members.iter().map(|m| m.centroid.0).sum::<f64>() / k;
    let my = members.iter().map(|m| m.centroid.1).sum::<f64>() / k;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for m in members {
        let (dx, dy) = (m.centroid.0 - mx, m.centroid.1 - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx + syy < 1e-9 {
        return None;
    }
    Some(wrap_half_turn(0.5 * (2.0 * sxy).atan2(sxx - syy)))
}

/// Mean member extent across the baseline, in pixels.
fn mean_height(members: &[GroupMember], baseline: f64) -> f64 {
    let (s, c) = baseline.sin_cos();
    let total: f64 = members
        .iter()
        .map(|m| {
            let (mut lo, mut hi) = (f64::MAX, f64::MIN);
            for &(x, y) in &m.pixels {
                let v = -(x as f64) * s + y as f64 * c;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if lo > hi {
                0.0
            } else {
                hi - lo + 1.0
            }
        })
        .sum();
    total / members.len().max(1) as f64
}

fn sorted_iou(a: &[(u32, u32)], b: &[(u32, u32)]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn pixel_iou(a: &[(u32, u32)], b: &[(u32, u32)]) -> f64 {
    // Member pixels are row-major; footprint comparisons need one order.
    let key = |v: &[(u32, u32)]| {
        let mut s: Vec<(u32, u32)> = v.to_vec();
        s.sort_unstable();
        s
    };
    sorted_iou(&key(a), &key(b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostprocConfig {
    pub dedup_iou: f64,
    /// Maximum baseline angle difference for merging, radians.
    pub merge_angle: f64,
    /// Maximum member gap in units of the larger mean height.
    pub merge_gap: f64,
    /// Maximum ratio between mean heights.
    pub merge_height_ratio: f64,
    /// Maximum offset across the shared baseline in units of the larger
    /// mean height.
    pub merge_offset: f64,
    /// Tallest group, in mean member heights, still taken as one line.
    pub max_line_height: f64,
    /// Word boundary factor over the mean inter-member gap.
    pub word_spacing: f64,
}

impl Default for PostprocConfig {
    fn default() -> Self {
        PostprocConfig {
            dedup_iou: 0.8,
            merge_angle: 10f64.to_radians(),
            merge_gap: 2.0,
            merge_height_ratio: 2.0,
            merge_offset: 0.5,
            max_line_height: 1.8,
            word_spacing: 2.5,
        }
    }
}

/// Collapses groups whose footprints overlap above `iou`, keeping the more
/// meaningful one. Output is ordered by ascending NFA.
pub fn deduplicate(mut groups: Vec<TextGroup>, iou: f64) -> Vec<TextGroup> {
    groups.sort_by(|a, b| a.log_nfa.total_cmp(&b.log_nfa));
    let mut kept: Vec<TextGroup> = Vec::with_capacity(groups.len());
    for g in groups {
        let bb = footprint_bounds(&g.footprint);
        let dup = kept
            .iter()
            .any(|k| bounds_touch(bb, footprint_bounds(&k.footprint)) && k.footprint_iou(&g) > iou);
        if !dup {
            kept.push(g);
        }
    }
    kept
}

type Bounds = (u32, u32, u32, u32);

fn footprint_bounds(fp: &[(u32, u32)]) -> Bounds {
    let mut b = (u32::MAX, u32::MAX, 0, 0);
    for &(x, y) in fp {
        b.0 = b.0.min(x);
        b.1 = b.1.min(y);
        b.2 = b.2.max(x);
        b.3 = b.3.max(y);
    }
    b
}

fn bounds_touch(a: Bounds, b: Bounds) -> bool {
    a.0 <= b.2 && b.0 <= a.2 && a.1 <= b.3 && b.1 <= a.3
}

/// Axial difference between two directions, in `[0, pi/2]`.
pub fn axial_difference(a: f64, b: f64) -> f64 {
    wrap_half_turn(a - b).abs()
}

fn collinear(g: &TextGroup, h: &TextGroup, cfg: &PostprocConfig) -> bool {
    if axial_difference(g.baseline, h.baseline) >= cfg.merge_angle {
        return false;
    }
    let (hi, lo) = if g.mean_height >= h.mean_height {
        (g.mean_height, h.mean_height)
    } else {
        (h.mean_height, g.mean_height)
    };
    if hi >= cfg.merge_height_ratio * lo {
        return false;
    }
    let mut gap = f64::MAX;
    for a in &g.members {
        for b in &h.members {
            gap = gap.min((a.centroid.0 - b.centroid.0).hypot(a.centroid.1 - b.centroid.1));
        }
    }
    if gap >= cfg.merge_gap * hi {
        return false;
    }
    // Offset across the mean baseline direction.
    let theta = g.baseline + 0.5 * wrap_half_turn(h.baseline - g.baseline);
    let (s, c) = theta.sin_cos();
    let (cg, ch) = (g.centroid(), h.centroid());
    let offset = (-(ch.0 - cg.0) * s + (ch.1 - cg.1) * c).abs();
    offset < cfg.merge_offset * hi
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Merges collinear groups transitively, repeating until no pair qualifies,
/// so a second application changes nothing.
pub fn merge_collinear(mut groups: Vec<TextGroup>, cfg: &PostprocConfig) -> Vec<TextGroup> {
    loop {
        let n = groups.len();
        let mut parent: Vec<usize> = (0..n).collect();
        let mut merged_any = false;
        for i in 0..n {
            for j in i + 1..n {
                if collinear(&groups[i], &groups[j], cfg) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[rj.max(ri)] = ri.min(rj);
                        merged_any = true;
                    }
                }
            }
        }
        if !merged_any {
            return groups;
        }
        let mut buckets: Vec<Vec<TextGroup>> = (0..n).map(|_| Vec::new()).collect();
        for (i, g) in groups.into_iter().enumerate() {
            let r = find(&mut parent, i);
            buckets[r].push(g);
        }
        groups = buckets
            .into_iter()
            .filter(|b| !b.is_empty())
            .map(fuse)
            .collect();
    }
}

fn fuse(mut parts: Vec<TextGroup>) -> TextGroup {
    if parts.len() == 1 {
        return parts.pop().expect("one part");
    }
    let log_nfa = parts.iter().map(|g| g.log_nfa).fold(f64::INFINITY, f64::min);
    let mut members: Vec<GroupMember> = Vec::new();
    for m in parts.into_iter().flat_map(|g| g.members) {
        if !members.iter().any(|k| pixel_iou(&k.pixels, &m.pixels) > 0.5) {
            members.push(m);
        }
    }
    TextGroup::new(members, log_nfa, GroupLevel::Line).expect("fused members carry pixels")
}

/// Groups for a selected dendrogram node. A node whose rectangle is more
/// than `max_line_height` mean member heights tall holds several lines, so
/// its children are taken instead, recursively. Nodes without an NFA of
/// their own inherit the selected node's.
pub fn line_groups(d: &Dendrogram, id: NodeId, regions: &[Region], max_line_height: f64) -> Vec<TextGroup> {
    let nfa = d.nodes[id].log_nfa.unwrap_or(0.0);
    let mut out = Vec::new();
    let mut stack = vec![id];
    while let Some(n) = stack.pop() {
        let members: Vec<GroupMember> = d
            .members(n)
            .into_iter()
            .map(|m| GroupMember::from_region(&regions[m], &d.weight_label))
            .collect();
        let g = TextGroup::new(members, d.nodes[n].log_nfa.unwrap_or(nfa), GroupLevel::Line)
            .expect("regions carry pixels");
        match d.nodes[n].children {
            Some((a, b)) if g.rect.h > max_line_height * g.mean_height => {
                stack.push(b);
                stack.push(a);
            }
            _ => out.push(g),
        }
    }
    out
}

/// Splits a line into words at gaps wider than `tau` times the mean gap
/// between consecutive members along the baseline.
pub fn split_words(group: &TextGroup, tau: f64) -> Result<Vec<TextGroup>> {
    if group.members.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "word splitting needs at least two members, got {}",
            group.members.len()
        )));
    }
    let (s, c) = group.baseline.sin_cos();
    let mut order: Vec<(f64, usize)> = group
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| (m.centroid.0 * c + m.centroid.1 * s, i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let gaps: Vec<f64> = order.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let limit = tau * mean;

    let mut words = Vec::new();
    let mut current = vec![group.members[order[0].1].clone()];
    for (k, &gap) in gaps.iter().enumerate() {
        if mean > 0.0 && gap > limit {
            words.push(std::mem::take(&mut current));
        }
        current.push(group.members[order[k + 1].1].clone());
    }
    words.push(current);
    words
        .into_iter()
        .map(|m| TextGroup::new(m, group.log_nfa, GroupLevel::Word))
        .collect()
}

/// One line of the rectangle output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectRecord {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub angle_rad: f64,
    pub level: GroupLevel,
}

impl RectRecord {
    pub fn rect(&self) -> RotatedRect {
        RotatedRect::new(self.cx, self.cy, self.w, self.h, self.angle_rad)
    }
}

/// Binary text mask and one minimum-area rectangle per group.
pub fn emit_outputs(groups: &[TextGroup], width: u32, height: u32) -> (GrayImage, Vec<RectRecord>) {
    let mut mask = GrayImage::new(width, height);
    for g in groups {
        for &(x, y) in &g.footprint {
            if x < width && y < height {
                mask.put_pixel(x, y, image::Luma([255]));
            }
        }
    }
    let rects = groups
        .iter()
        .map(|g| RectRecord {
            cx: g.rect.cx,
            cy: g.rect.cy,
            w: g.rect.w,
            h: g.rect.h,
            angle_rad: g.rect.angle,
            level: g.level,
        })
        .collect();
    (mask, rects)
}

pub fn write_rects_jsonl(path: &Path, rects: &[RectRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for r in rects {
        let line = serde_json::to_string(r)?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rects_jsonl(path: &Path) -> Result<Vec<RectRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str::<RectRecord>(l)?))
        .collect()
}
