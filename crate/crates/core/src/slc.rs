//! Single-linkage dendrograms over the regions of one channel.
//!
//! Single-linkage merge order is the ascending edge order of a minimum
//! spanning tree of the complete distance graph, so the tree is found with a
//! dense O(n^2) Prim pass and then replayed through a union-find. Runs of
//! exactly equal distances are replayed pair by pair so that the merge order
//! follows the tie rule: the pair of clusters with the lexicographically
//! smallest `(min member id, max member id)` key goes first, where a
//! cluster's id is its smallest member region id.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::groupdesc::{merge_stats, stats_from_region, NodeStats, RegionSummary};
use crate::imageproc::ChannelId;
use crate::simspace::{distance, SimilarityVector, WeightConfig};

pub type NodeId = usize;

#[derive(Clone, Debug)]
pub struct ClusterNode {
    pub id: NodeId,
    pub size: usize,
    /// Children ordered by their smallest member id.
    pub children: Option<(NodeId, NodeId)>,
    pub merge_distance: f64,
    pub parent: Option<NodeId>,
    /// Smallest member region id.
    pub min_member: usize,
    pub stats: Option<NodeStats>,
    pub score: Option<f64>,
    pub label: Option<bool>,
    /// Natural log of the number of false alarms.
    pub log_nfa: Option<f64>,
}

impl ClusterNode {
    fn leaf(id: NodeId) -> Self {
        ClusterNode {
            id,
            size: 1,
            children: None,
            merge_distance: 0.0,
            parent: None,
            min_member: id,
            stats: None,
            score: None,
            label: None,
            log_nfa: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// One agglomeration step, expressed in node ids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub left: NodeId,
    pub right: NodeId,
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct Dendrogram {
    pub nodes: Vec<ClusterNode>,
    pub root: NodeId,
    pub n_leaves: usize,
    pub channel: Option<ChannelId>,
    pub weight_label: String,
}

impl Dendrogram {
    pub fn node(&self, id: NodeId) -> &ClusterNode {
        &self.nodes[id]
    }

    /// Internal nodes in merge order.
    pub fn merges(&self) -> impl Iterator<Item = Merge> + '_ {
        self.nodes[self.n_leaves..].iter().map(|n| {
            let (left, right) = n.children.expect("internal node");
            Merge {
                left,
                right,
                distance: n.merge_distance,
            }
        })
    }

    /// Member region ids of a node, sorted.
    pub fn members(&self, id: NodeId) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes[id].size);
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            match self.nodes[n].children {
                None => out.push(n),
                Some((a, b)) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Strict ancestors from parent to root.
    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.nodes[id].parent, move |&n| self.nodes[n].parent)
    }

    pub fn to_debug_json(&self) -> String {
        #[derive(Serialize)]
        struct DumpNode {
            id: NodeId,
            children: Option<[NodeId; 2]>,
            merge_distance: f64,
            members: Vec<usize>,
        }
        let nodes: Vec<DumpNode> = self
            .nodes
            .iter()
            .map(|n| DumpNode {
                id: n.id,
                children: n.children.map(|(a, b)| [a, b]),
                merge_distance: n.merge_distance,
                members: self.members(n.id),
            })
            .collect();
        serde_json::json!({
            "channel": self.channel.map(|c| c.name()),
            "weights": self.weight_label,
            "root": self.root,
            "nodes": nodes,
        })
        .to_string()
    }
}

/// Minimum spanning tree edges `(u, v, d)` of the complete graph, Prim's
/// algorithm with dense updates.
fn prim_edges(points: &[SimilarityVector], w: &WeightConfig) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut cur = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        let pc = &points[cur];
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let d = distance(pc, &points[v], w);
            if d < best[v] || (d == best[v] && cur < from[v]) {
                best[v] = d;
                from[v] = cur;
            }
            if best[v] < next_d || next == usize::MAX {
                next_d = best[v];
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push((from[next].min(next), from[next].max(next), next_d));
        cur = next;
    }
    edges
}

struct Clusters {
    parent: Vec<usize>,
    node: Vec<NodeId>,
    min_member: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Clusters {
    fn new(n: usize) -> Self {
        Clusters {
            parent: (0..n).collect(),
            node: (0..n).collect(),
            min_member: (0..n).collect(),
            members: (0..n).map(|i| vec![i]).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn key(&self, ra: usize, rb: usize) -> (usize, usize) {
        let (a, b) = (self.min_member[ra], self.min_member[rb]);
        (a.min(b), a.max(b))
    }

    /// Unites two roots; returns `(left node, right node)` ordered by
    /// smallest member, and the new root.
    fn unite(&mut self, ra: usize, rb: usize) -> ((NodeId, NodeId), usize) {
        let (first, second) = if self.min_member[ra] <= self.min_member[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        let pair = (self.node[first], self.node[second]);
        let (big, small) = if self.members[ra].len() >= self.members[rb].len() {
            (ra, rb)
        } else {
            (rb, ra)
        };
        let moved = std::mem::take(&mut self.members[small]);
        self.members[big].extend(moved);
        self.parent[small] = big;
        self.min_member[big] = self.min_member[ra].min(self.min_member[rb]);
        (pair, big)
    }
}

/// Single-linkage merge sequence over `points`.
pub fn single_linkage(points: &[SimilarityVector], w: &WeightConfig) -> Vec<Merge> {
    let mut merges = Vec::new();
    replay(points, w, |m, _, _| merges.push(m));
    merges
}

/// Replays the merge sequence, calling `on_merge(merge, new_node_id,
/// cluster_size)` for each step.
fn replay(points: &[SimilarityVector], w: &WeightConfig, mut on_merge: impl FnMut(Merge, NodeId, usize)) {
    let n = points.len();
    if n < 2 {
        return;
    }
    let mut edges = prim_edges(points, w);
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));

    let mut cl = Clusters::new(n);
    let mut next_id = n;
    let mut emit = |cl: &mut Clusters, ra: usize, rb: usize, d: f64| {
        let ((left, right), root) = cl.unite(ra, rb);
        let id = next_id;
        next_id += 1;
        cl.node[root] = id;
        let size = cl.members[root].len();
        on_merge(
            Merge {
                left,
                right,
                distance: d,
            },
            id,
            size,
        );
    };

    let mut i = 0;
    while i < edges.len() {
        let d = edges[i].2;
        let mut j = i + 1;
        while j < edges.len() && edges[j].2 == d {
            j += 1;
        }
        if j - i == 1 {
            let (u, v, _) = edges[i];
            let (ru, rv) = (cl.find(u), cl.find(v));
            emit(&mut cl, ru, rv, d);
        } else {
            resolve_ties(points, w, &edges[i..j], &mut cl, &mut emit);
        }
        i = j;
    }
}

/// Replays a run of equal-distance tree edges. Every pair of current
/// clusters in the run whose linkage equals the run distance is a
/// candidate, not only pairs joined by a tree edge.
fn resolve_ties(
    points: &[SimilarityVector],
    w: &WeightConfig,
    run: &[(usize, usize, f64)],
    cl: &mut Clusters,
    emit: &mut impl FnMut(&mut Clusters, usize, usize, f64),
) {
    let d = run[0].2;
    let mut roots: Vec<usize> = run
        .iter()
        .flat_map(|&(u, v, _)| [u, v])
        .map(|x| cl.find(x))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    let regions: Vec<usize> = roots
        .iter()
        .flat_map(|&r| cl.members[r].iter().copied())
        .collect();
    let mut tied: Vec<(usize, usize)> = Vec::new();
    for (k, &a) in regions.iter().enumerate() {
        for &b in &regions[k + 1..] {
            if distance(&points[a], &points[b], w) == d && cl.find(a) != cl.find(b) {
                tied.push((a, b));
            }
        }
    }
    for _ in 0..run.len() {
        let mut best: Option<((usize, usize), usize, usize)> = None;
        for &(a, b) in &tied {
            let (ra, rb) = (cl.find(a), cl.find(b));
            if ra == rb {
                continue;
            }
            let key = cl.key(ra, rb);
            if best.map_or(true, |(k, _, _)| key < k) {
                best = Some((key, ra, rb));
            }
        }
        let (_, ra, rb) = best.expect("equal-distance run has a candidate pair");
        emit(cl, ra, rb, d);
    }
}

fn assemble(n: usize, merges: &[(Merge, NodeId)], weight_label: &str) -> Dendrogram {
    let mut nodes: Vec<ClusterNode> = (0..n).map(ClusterNode::leaf).collect();
    for &(m, id) in merges {
        debug_assert_eq!(id, nodes.len());
        let size = nodes[m.left].size + nodes[m.right].size;
        let min_member = nodes[m.left].min_member.min(nodes[m.right].min_member);
        nodes[m.left].parent = Some(id);
        nodes[m.right].parent = Some(id);
        nodes.push(ClusterNode {
            id,
            size,
            children: Some((m.left, m.right)),
            merge_distance: m.distance,
            parent: None,
            min_member,
            stats: None,
            score: None,
            label: None,
            log_nfa: None,
        });
    }
    let root = nodes.len() - 1;
    Dendrogram {
        nodes,
        root,
        n_leaves: n,
        channel: None,
        weight_label: weight_label.to_string(),
    }
}

pub fn build_dendrogram(points: &[SimilarityVector], w: &WeightConfig) -> Result<Dendrogram> {
    if points.is_empty() {
        return Err(Error::InvalidInput("dendrogram needs at least one region".into()));
    }
    let mut merges = Vec::with_capacity(points.len());
    replay(points, w, |m, id, _| merges.push((m, id)));
    Ok(assemble(points.len(), &merges, &w.label))
}

/// Builds the dendrogram and attaches group statistics to every node while
/// merging. Nodes above `max_cluster_size` carry [`NodeStats::Oversize`].
pub fn build_dendrogram_with_stats(
    table: &[RegionSummary],
    w: &WeightConfig,
    max_cluster_size: usize,
) -> Result<Dendrogram> {
    if table.is_empty() {
        return Err(Error::InvalidInput("dendrogram needs at least one region".into()));
    }
    let points: Vec<SimilarityVector> = table.iter().map(|r| r.similarity).collect();
    let n = points.len();
    let mut stats: Vec<NodeStats> = table
        .iter()
        .enumerate()
        .map(|(i, r)| NodeStats::Group(stats_from_region(i, r)))
        .collect();
    let mut merges = Vec::with_capacity(n);
    replay(&points, w, |m, id, size| {
        let merged = if size > max_cluster_size {
            NodeStats::Oversize
        } else {
            match (&stats[m.left], &stats[m.right]) {
                (NodeStats::Group(a), NodeStats::Group(b)) => {
                    merge_stats(a, b, table, max_cluster_size)
                }
                _ => NodeStats::Oversize,
            }
        };
        stats.push(merged);
        merges.push((m, id));
    });
    let mut d = assemble(n, &merges, &w.label);
    for (node, s) in d.nodes.iter_mut().zip(stats) {
        node.stats = Some(s);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64) -> SimilarityVector {
        SimilarityVector::new([1.0; 5], (x, y))
    }

    #[test]
    fn three_points_on_a_line() {
        let pts = [at(0.0, 0.0), at(1.0, 0.0), at(5.0, 0.0)];
        let d = build_dendrogram(&pts, &WeightConfig::uniform()).unwrap();
        let m: Vec<Merge> = d.merges().collect();
        assert_eq!(m[0], Merge { left: 0, right: 1, distance: 1.0 });
        assert_eq!(m[1], Merge { left: 3, right: 2, distance: 16.0 });
        assert_eq!(d.members(d.root), vec![0, 1, 2]);
        assert_eq!(d.nodes.len(), 5);
    }

    #[test]
    fn identical_points_merge_at_zero() {
        let pts = [at(2.0, 2.0), at(2.0, 2.0)];
        let d = build_dendrogram(&pts, &WeightConfig::uniform()).unwrap();
        assert_eq!(d.merges().count(), 1);
        assert_eq!(d.node(d.root).merge_distance, 0.0);
    }

    #[test]
    fn single_region_is_a_leaf() {
        let d = build_dendrogram(&[at(0.0, 0.0)], &WeightConfig::uniform()).unwrap();
        assert_eq!(d.nodes.len(), 1);
        assert!(d.node(d.root).is_leaf());
        assert!(build_dendrogram(&[], &WeightConfig::uniform()).is_err());
    }

    #[test]
    fn equilateral_tie_prefers_smallest_key() {
        // Three mutually equidistant points; the tree keeps two of the
        // three edges but the first merge must still be {0, 1}.
        let h = 3f64.sqrt() / 2.0 * 2.0;
        let pts = [at(1.0, h), at(0.0, 0.0), at(2.0, 0.0)];
        let w = WeightConfig::uniform();
        let d01 = distance(&pts[0], &pts[1], &w);
        let d02 = distance(&pts[0], &pts[2], &w);
        let d12 = distance(&pts[1], &pts[2], &w);
        if d01 == d02 && d02 == d12 {
            let m: Vec<Merge> = single_linkage(&pts, &w);
            assert_eq!((m[0].left, m[0].right), (0, 1));
        }
        // A square grid has exact ties everywhere.
        let grid: Vec<_> = (0..9).map(|i| at(f64::from(i % 3), f64::from(i / 3))).collect();
        let m = single_linkage(&grid, &w);
        assert_eq!((m[0].left, m[0].right), (0, 1));
        assert_eq!((m[1].left, m[1].right), (9, 2));
        assert!(m.iter().all(|x| x.distance == 1.0));
    }

    #[test]
    fn debug_dump_lists_every_node() {
        let pts = [at(0.0, 0.0), at(1.0, 0.0), at(5.0, 0.0)];
        let d = build_dendrogram(&pts, &WeightConfig::uniform()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&d.to_debug_json()).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), 5);
        assert_eq!(v["nodes"][4]["members"], serde_json::json!([0, 1, 2]));
    }
}
