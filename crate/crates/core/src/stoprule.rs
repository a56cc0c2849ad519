//! Group meaningfulness (number of false alarms) and the stopping rule that
//! selects text groups from a dendrogram.
//!
//! A node is selected when the classifier labels it text and its NFA is
//! below the NFA of every text-labelled successor and every text-labelled
//! ancestor. Exact NFA ties between nested text nodes go to the deeper node.

use std::sync::OnceLock;

use crate::groupdesc::IncrementalStats;
use crate::simspace::SIMILARITY_DIMS;
use crate::slc::{ClusterNode, Dendrogram, NodeId};

/// Per-dimension extent floor of the normalized feature volume.
pub const EXTENT_FLOOR: f64 = 1e-4;
/// Floor of the volume ratio `p`.
pub const P_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct NfaContext {
    /// Number of regions in the channel.
    pub n: usize,
    pub ranges: [(f64, f64); SIMILARITY_DIMS],
}

impl NfaContext {
    /// Intensity-like dimensions span `[0, 255]`; diameter and stroke width
    /// span `[0, image diagonal]`.
    pub fn for_image(n: usize, width: u32, height: u32) -> Self {
        let diag = f64::from(width).hypot(f64::from(height)).max(1.0);
        NfaContext {
            n: n.max(1),
            ranges: [
                (0.0, 255.0),
                (0.0, 255.0),
                (0.0, 255.0),
                (0.0, diag),
                (0.0, diag),
            ],
        }
    }
}

const LN_FACT_CACHE: usize = 4096;

fn ln_factorial(k: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0; LN_FACT_CACHE];
        for i in 2..LN_FACT_CACHE {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    });
    if k < LN_FACT_CACHE {
        table[k]
    } else {
        // Stirling series; relative error far below 1e-15 at this size.
        let x = k as f64;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x * x * x)
    }
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Natural log of the binomial upper tail `sum_{i=k}^{n} C(n,i) p^i (1-p)^(n-i)`.
pub fn ln_binomial_tail(k: usize, n: usize, p: f64) -> f64 {
    assert!(k <= n, "binomial tail needs k <= n");
    if k == 0 || p >= 1.0 {
        return 0.0;
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms: Vec<f64> = (k..=n)
        .map(|i| ln_choose(n, i) + i as f64 * lp + (n - i) as f64 * lq)
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// Binomial upper tail, summed in the log domain.
pub fn binomial_tail(k: usize, n: usize, p: f64) -> f64 {
    assert!(k <= n, "binomial tail needs k <= n");
    assert!((0.0..=1.0).contains(&p), "p must be a probability");
    if k == 0 {
        return 1.0;
    }
    if k == n {
        return p.powi(n as i32);
    }
    ln_binomial_tail(k, n, p).exp().clamp(0.0, 1.0)
}

/// Fraction of the feature-space volume spanned by the group.
pub fn volume_ratio(stats: &IncrementalStats, ctx: &NfaContext) -> f64 {
    let mut p = 1.0;
    for i in 0..SIMILARITY_DIMS {
        let (lo, hi) = ctx.ranges[i];
        let extent = (stats.sim_max[i] - stats.sim_min[i]) / (hi - lo);
        p *= extent.clamp(EXTENT_FLOOR, 1.0);
    }
    p.max(P_FLOOR)
}

/// NFA of a group; `None` for singletons.
pub fn nfa(stats: &IncrementalStats, ctx: &NfaContext) -> Option<f64> {
    let k = stats.count();
    if k < 2 {
        return None;
    }
    let n = ctx.n.max(k);
    Some(binomial_tail(k, n, volume_ratio(stats, ctx)))
}

/// Log-domain NFA, which keeps large tight groups ordered where the tail
/// itself underflows.
pub fn log_nfa(stats: &IncrementalStats, ctx: &NfaContext) -> Option<f64> {
    let k = stats.count();
    if k < 2 {
        return None;
    }
    let n = ctx.n.max(k);
    Some(ln_binomial_tail(k, n, volume_ratio(stats, ctx)))
}

/// Text groups of a dendrogram whose nodes already carry `label` and
/// `log_nfa`. Returned ids are ascending.
pub fn select_groups(d: &Dendrogram) -> Vec<NodeId> {
    select_by(d, |n| n.label == Some(true))
}

/// Stopping rule with the text verdict supplied by `is_text`.
pub fn select_by(d: &Dendrogram, is_text: impl Fn(&ClusterNode) -> bool) -> Vec<NodeId> {
    let candidate = |id: NodeId| -> Option<f64> {
        let n = &d.nodes[id];
        if is_text(n) {
            n.log_nfa
        } else {
            None
        }
    };
    let m = d.nodes.len();

    // Children always precede parents in node order.
    let mut below = vec![f64::INFINITY; m];
    for id in 0..m {
        if let Some((a, b)) = d.nodes[id].children {
            let sub = |c: NodeId| candidate(c).map_or(below[c], |v| v.min(below[c]));
            below[id] = sub(a).min(sub(b));
        }
    }
    let mut above = vec![f64::INFINITY; m];
    for id in (0..m).rev() {
        if let Some(p) = d.nodes[id].parent {
            above[id] = candidate(p).map_or(above[p], |v| v.min(above[p]));
        }
    }

    (0..m)
        .filter(|&id| candidate(id).is_some_and(|v| v < below[id] && v <= above[id]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simspace::{SimilarityVector, WeightConfig};
    use crate::slc::build_dendrogram;

    #[test]
    fn tail_edges() {
        assert_eq!(binomial_tail(0, 7, 0.3), 1.0);
        assert_eq!(binomial_tail(5, 5, 0.3), 0.3f64.powi(5));
        assert!((binomial_tail(2, 3, 0.5) - 0.5).abs() < 1e-15);
        assert!((binomial_tail(3, 10, 0.1) - 0.070_190_826_4).abs() < 1e-9);
        assert_eq!(binomial_tail(3, 10, 1.0), 1.0);
        assert_eq!(binomial_tail(3, 10, 0.0), 0.0);
    }

    #[test]
    fn huge_n_stays_finite() {
        let v = binomial_tail(40, 20_000, 1e-12);
        assert!(v >= 0.0 && v < 1e-100);
        let l = ln_binomial_tail(40, 20_000, 1e-12);
        assert!(l.is_finite() && l < -500.0);
    }

    fn chain(nfas: &[f64]) -> Dendrogram {
        // Points far apart along x in increasing gaps give a left-deep chain.
        let pts: Vec<SimilarityVector> = (0..=nfas.len())
            .map(|i| SimilarityVector::new([0.0; 5], ((i * i) as f64 * 10.0, 0.0)))
            .collect();
        let mut d = build_dendrogram(&pts, &WeightConfig::uniform()).unwrap();
        let n = d.n_leaves;
        for (k, &v) in nfas.iter().enumerate() {
            d.nodes[n + k].label = Some(true);
            d.nodes[n + k].log_nfa = Some(v.ln());
        }
        d
    }

    #[test]
    fn nested_chain_picks_local_minimum() {
        let d = chain(&[0.3, 0.1, 0.5]);
        assert_eq!(select_groups(&d), vec![d.n_leaves + 1]);
    }

    #[test]
    fn single_text_node_is_selected() {
        let mut d = chain(&[0.3, 0.1, 0.5]);
        let n = d.n_leaves;
        d.nodes[n].label = Some(false);
        d.nodes[n + 2].label = None;
        d.nodes[n + 1].log_nfa = Some(0.9f64.ln());
        assert_eq!(select_groups(&d), vec![n + 1]);
    }

    #[test]
    fn tie_goes_to_deeper_node() {
        let d = chain(&[0.2, 0.2]);
        assert_eq!(select_groups(&d), vec![d.n_leaves]);
    }

    #[test]
    fn nothing_labelled_selects_nothing() {
        let mut d = chain(&[0.3]);
        d.nodes[d.n_leaves].label = Some(false);
        assert!(select_groups(&d).is_empty());
    }
}
