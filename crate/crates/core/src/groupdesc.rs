//! Group-level statistics maintained incrementally on dendrogram nodes, and
//! the 14-dimensional group descriptor fed to the text-group classifier.
//!
//! Scalar statistics merge in constant time. The 2-D minimum spanning tree
//! of member centers is propagated from children to parent: the parent's
//! tree is found among the children's tree edges plus every cross edge,
//! because an edge rejected by a child tree closes a cycle of shorter edges
//! and therefore cannot enter the union's tree either.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageproc::Region;
use crate::simspace::{SimilarityVector, SIMILARITY_DIMS};

/// Nodes with more members than this are discarded without computing
/// features (the longest text line in the reference training set).
pub const MAX_CLUSTER_SIZE: usize = 50;

pub const GROUP_FEATURE_DIMS: usize = 14;

pub const GROUP_FEATURE_NAMES: [&str; GROUP_FEATURE_DIMS] = [
    "fg_intensity_std",
    "bg_intensity_std",
    "major_axis_cv",
    "stroke_width_cv",
    "border_gradient_std",
    "aspect_ratio_cv",
    "hu_mean_distance",
    "hull_compactness_mean",
    "hull_compactness_std",
    "convexity_defects_cv",
    "mst_angle_mean",
    "mst_angle_std",
    "mst_edge_width_cv",
    "mst_edge_length_to_diameter",
];

/// Per-region values the descriptors read.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionSummary {
    pub centroid: (f64, f64),
    pub similarity: SimilarityVector,
    pub fg_intensity: f64,
    pub bg_intensity: f64,
    pub major_axis: f64,
    pub stroke_width: f64,
    pub border_gradient: f64,
    pub aspect_ratio: f64,
    pub hull_compactness: f64,
    pub convexity_defects: f64,
    pub hu: [f64; 7],
}

impl From<&Region> for RegionSummary {
    fn from(r: &Region) -> Self {
        RegionSummary {
            centroid: r.centroid,
            similarity: SimilarityVector::from(r),
            fg_intensity: r.intensity_mean,
            bg_intensity: r.boundary_intensity_mean,
            major_axis: r.major_axis,
            stroke_width: r.stroke_width_mean,
            border_gradient: r.border_gradient_mean,
            aspect_ratio: r.aspect_ratio,
            hull_compactness: r.hull_compactness,
            convexity_defects: f64::from(r.convexity_defect_count),
            hu: r.hu_moments,
        }
    }
}

impl RegionSummary {
    fn moment_values(&self) -> [f64; MOMENT_FEATURES] {
        [
            self.fg_intensity,
            self.bg_intensity,
            self.major_axis,
            self.stroke_width,
            self.border_gradient,
            self.aspect_ratio,
            self.hull_compactness,
            self.convexity_defects,
        ]
    }
}

pub fn hu_distance(a: &[f64; 7], b: &[f64; 7]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Count, mean and centered sum of squares, merged with Chan's pairwise
/// update so that merged statistics agree with a two-pass computation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningMoments {
    pub count: f64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningMoments {
    pub fn single(x: f64) -> Self {
        RunningMoments {
            count: 1.0,
            mean: x,
            m2: 0.0,
        }
    }

    pub fn merge(&self, other: &RunningMoments) -> RunningMoments {
        if self.count == 0.0 {
            return *other;
        }
        if other.count == 0.0 {
            return *self;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        RunningMoments {
            count: n,
            mean: self.mean + delta * other.count / n,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / n,
        }
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        if self.count == 0.0 {
            0.0
        } else {
            (self.m2 / self.count).max(0.0).sqrt()
        }
    }

    /// Coefficient of variation; zero when the mean is zero.
    pub fn cv(&self) -> f64 {
        if self.mean == 0.0 {
            0.0
        } else {
            self.std() / self.mean.abs()
        }
    }
}

const MOMENT_FEATURES: usize = 8;
const FG: usize = 0;
const BG: usize = 1;
const MAJOR: usize = 2;
const STROKE: usize = 3;
const GRADIENT: usize = 4;
const ASPECT: usize = 5;
const COMPACTNESS: usize = 6;
const DEFECTS: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    /// Undirected orientation in `[0, pi)`.
    pub angle: f64,
}

impl MstEdge {
    pub fn between(a: usize, b: usize, table: &[RegionSummary]) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let (pa, pb) = (table[a].centroid, table[b].centroid);
        let (dx, dy) = (pb.0 - pa.0, pb.1 - pa.1);
        let mut angle = dy.atan2(dx).rem_euclid(PI);
        if angle >= PI {
            angle = 0.0;
        }
        MstEdge {
            a,
            b,
            length: (dx * dx + dy * dy).sqrt(),
            angle,
        }
    }

    fn order(&self, other: &MstEdge) -> Ordering {
        self.length
            .total_cmp(&other.length)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MstState {
    /// Tree edges in ascending length order.
    pub edges: Vec<MstEdge>,
    /// Sum of edge lengths, accumulated in ascending order.
    pub total_length: f64,
}

impl MstState {
    /// Kruskal over `candidates` restricted to the vertex set `members`
    /// (sorted ascending).
    pub fn kruskal(members: &[usize], mut candidates: Vec<MstEdge>) -> MstState {
        candidates.sort_by(|x, y| x.order(y));
        let local = |id: usize| members.binary_search(&id).expect("edge endpoint is a member");
        let mut dsu: Vec<usize> = (0..members.len()).collect();
        fn find(d: &mut [usize], mut x: usize) -> usize {
            while d[x] != x {
                d[x] = d[d[x]];
                x = d[x];
            }
            x
        }
        let mut edges = Vec::with_capacity(members.len().saturating_sub(1));
        for e in candidates {
            let (ra, rb) = (find(&mut dsu, local(e.a)), find(&mut dsu, local(e.b)));
            if ra == rb {
                continue;
            }
            dsu[ra] = rb;
            edges.push(e);
            if edges.len() + 1 == members.len() {
                break;
            }
        }
        let total_length = edges.iter().map(|e| e.length).sum();
        MstState {
            edges,
            total_length,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IncrementalStats {
    /// Member region ids, sorted.
    pub members: Vec<usize>,
    moments: [RunningMoments; MOMENT_FEATURES],
    pub sim_min: [f64; SIMILARITY_DIMS],
    pub sim_max: [f64; SIMILARITY_DIMS],
    /// Sum of Hu-vector distances over all unordered member pairs.
    pub hu_pair_sum: f64,
    pub mst: MstState,
}

/// Statistics attached to a dendrogram node.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeStats {
    Group(IncrementalStats),
    /// More than the cluster-size cap; never classified.
    Oversize,
}

impl NodeStats {
    pub fn group(&self) -> Option<&IncrementalStats> {
        match self {
            NodeStats::Group(s) => Some(s),
            NodeStats::Oversize => None,
        }
    }
}

impl IncrementalStats {
    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn moments(&self) -> &[RunningMoments; MOMENT_FEATURES] {
        &self.moments
    }
}

pub fn stats_from_region(id: usize, r: &RegionSummary) -> IncrementalStats {
    let vals = r.moment_values();
    IncrementalStats {
        members: vec![id],
        moments: vals.map(RunningMoments::single),
        sim_min: r.similarity.f,
        sim_max: r.similarity.f,
        hu_pair_sum: 0.0,
        mst: MstState::default(),
    }
}

/// Combines the statistics of two disjoint groups. Returns
/// [`NodeStats::Oversize`] when the union exceeds `max_size` members.
pub fn merge_stats(
    a: &IncrementalStats,
    b: &IncrementalStats,
    table: &[RegionSummary],
    max_size: usize,
) -> NodeStats {
    let n = a.count() + b.count();
    if n > max_size {
        return NodeStats::Oversize;
    }
    let mut members = Vec::with_capacity(n);
    members.extend_from_slice(&a.members);
    members.extend_from_slice(&b.members);
    members.sort_unstable();

    let mut moments = a.moments;
    for (m, o) in moments.iter_mut().zip(&b.moments) {
        *m = m.merge(o);
    }
    let mut sim_min = a.sim_min;
    let mut sim_max = a.sim_max;
    for i in 0..SIMILARITY_DIMS {
        sim_min[i] = sim_min[i].min(b.sim_min[i]);
        sim_max[i] = sim_max[i].max(b.sim_max[i]);
    }

    let mut cross_hu = 0.0;
    let mut candidates =
        Vec::with_capacity(a.mst.edges.len() + b.mst.edges.len() + a.count() * b.count());
    candidates.extend_from_slice(&a.mst.edges);
    candidates.extend_from_slice(&b.mst.edges);
    for &i in &a.members {
        for &j in &b.members {
            cross_hu += hu_distance(&table[i].hu, &table[j].hu);
            candidates.push(MstEdge::between(i, j, table));
        }
    }
    let mst = MstState::kruskal(&members, candidates);

    NodeStats::Group(IncrementalStats {
        members,
        moments,
        sim_min,
        sim_max,
        hu_pair_sum: a.hu_pair_sum + b.hu_pair_sum + cross_hu,
        mst,
    })
}

/// Folds singleton statistics of `ids` left to right.
pub fn stats_for_members(ids: &[usize], table: &[RegionSummary]) -> NodeStats {
    let mut iter = ids.iter();
    let Some(&first) = iter.next() else {
        return NodeStats::Oversize;
    };
    let mut acc = stats_from_region(first, &table[first]);
    for &id in iter {
        match merge_stats(&acc, &stats_from_region(id, &table[id]), table, usize::MAX) {
            NodeStats::Group(s) => acc = s,
            NodeStats::Oversize => unreachable!("no size cap"),
        }
    }
    NodeStats::Group(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupFeatureVector(pub [f64; GROUP_FEATURE_DIMS]);

impl GroupFeatureVector {
    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Circular mean and spread of undirected angles in `[0, pi)`, computed on
/// doubled angles.
pub fn axial_mean_std(angles: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (mut c, mut s, mut n) = (0.0, 0.0, 0usize);
    for a in angles {
        c += (2.0 * a).cos();
        s += (2.0 * a).sin();
        n += 1;
    }
    if n == 0 {
        return (0.0, 0.0);
    }
    let (c, s) = (c / n as f64, s / n as f64);
    let mut mean = 0.5 * s.atan2(c).rem_euclid(2.0 * PI);
    if mean >= PI {
        mean = 0.0;
    }
    let r = c.hypot(s).clamp(1e-12, 1.0);
    let std = 0.5 * (-2.0 * r.ln()).max(0.0).sqrt();
    (mean, std)
}

pub fn group_features(s: &IncrementalStats, table: &[RegionSummary]) -> Result<GroupFeatureVector> {
    let n = s.count();
    if n < 2 {
        return Err(Error::UndefinedGroup(n));
    }
    let m = &s.moments;
    let pairs = (n * (n - 1) / 2) as f64;
    let (angle_mean, angle_std) = axial_mean_std(s.mst.edges.iter().map(|e| e.angle));

    let mut widths = RunningMoments::default();
    for e in &s.mst.edges {
        let w = 0.5 * (table[e.a].stroke_width + table[e.b].stroke_width);
        widths = widths.merge(&RunningMoments::single(w));
    }
    let mean_edge = s.mst.total_length / s.mst.edges.len() as f64;
    let spacing = if m[MAJOR].mean == 0.0 {
        0.0
    } else {
        mean_edge / m[MAJOR].mean
    };

    Ok(GroupFeatureVector([
        m[FG].std(),
        m[BG].std(),
        m[MAJOR].cv(),
        m[STROKE].cv(),
        m[GRADIENT].std(),
        m[ASPECT].cv(),
        s.hu_pair_sum / pairs,
        m[COMPACTNESS].mean,
        m[COMPACTNESS].std(),
        m[DEFECTS].cv(),
        angle_mean,
        angle_std,
        widths.cv(),
        spacing,
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn summary(x: f64, y: f64, stroke: f64, major: f64) -> RegionSummary {
        RegionSummary {
            centroid: (x, y),
            similarity: SimilarityVector::new([0.0, 255.0, 100.0, major, stroke], (x, y)),
            fg_intensity: 0.0,
            bg_intensity: 255.0,
            major_axis: major,
            stroke_width: stroke,
            border_gradient: 100.0,
            aspect_ratio: 0.5,
            hull_compactness: 0.8,
            convexity_defects: 1.0,
            hu: [0.2, 0.01, 0.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    fn group(ids: &[usize], table: &[RegionSummary]) -> IncrementalStats {
        match stats_for_members(ids, table) {
            NodeStats::Group(s) => s,
            NodeStats::Oversize => panic!(),
        }
    }

    #[test]
    fn singleton_stats() {
        let t = vec![summary(3.0, 4.0, 5.0, 20.0)];
        let s = stats_from_region(0, &t[0]);
        assert_eq!(s.count(), 1);
        assert!(s.moments().iter().all(|m| m.std() == 0.0));
        assert_eq!(s.moments()[STROKE].mean, 5.0);
        assert_eq!(s.moments()[STROKE].cv(), 0.0);
        assert_eq!(s.sim_min, s.sim_max);
        assert!(s.mst.edges.is_empty());
        assert!(matches!(group_features(&s, &t), Err(Error::UndefinedGroup(1))));
    }

    #[test]
    fn two_singletons_one_edge() {
        let t = vec![summary(0.0, 0.0, 3.0, 9.0), summary(6.0, 8.0, 3.0, 9.0)];
        let s = group(&[0, 1], &t);
        assert_eq!(s.mst.edges.len(), 1);
        assert_eq!(s.mst.total_length, 10.0);
    }

    #[test]
    fn collinear_triplet() {
        let t = vec![
            summary(0.0, 0.0, 4.0, 20.0),
            summary(10.0, 0.0, 6.0, 20.0),
            summary(20.0, 0.0, 5.0, 20.0),
        ];
        let s = group(&[2, 0, 1], &t);
        let lens: Vec<f64> = s.mst.edges.iter().map(|e| e.length).collect();
        assert_eq!(lens, vec![10.0, 10.0]);
        let h = group_features(&s, &t).unwrap();
        assert_eq!(h.0[11], 0.0);
        assert_eq!(h.0[13], 0.5);
        assert_eq!(h.0[6], 0.0);
        assert_eq!(h.0[0], 0.0);
    }

    #[test]
    fn stroke_cv_of_pair() {
        let t = vec![summary(0.0, 0.0, 4.0, 10.0), summary(5.0, 0.0, 6.0, 10.0)];
        let h = group_features(&group(&[0, 1], &t), &t).unwrap();
        assert!((h.0[3] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn oversize_marker() {
        let t: Vec<RegionSummary> = (0..60).map(|i| summary(f64::from(i), 0.0, 2.0, 5.0)).collect();
        let a = group(&(0..30).collect::<Vec<_>>(), &t);
        let b = group(&(30..60).collect::<Vec<_>>(), &t);
        assert_eq!(merge_stats(&a, &b, &t, MAX_CLUSTER_SIZE), NodeStats::Oversize);
    }

    #[test]
    fn axial_stats_wrap() {
        let (mean, std) = axial_mean_std([179f64.to_radians(), 1f64.to_radians()]);
        assert!(mean < 1e-9 || (PI - mean) < 1e-9);
        assert!(std < 0.02);
    }
}
