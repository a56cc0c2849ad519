//! Grid search for similarity weights that maximize text group recall, and
//! the diversification loop that finds complementary weightings.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simspace::{WeightConfig, SIMILARITY_DIMS};

use super::tgr::TrainingSample;

/// Weights are searched on an integer lattice of `unit`-sized steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub unit: f64,
    /// Upper bound in units; the lower bound is zero.
    pub max_units: u32,
    pub coarse_step: u32,
    pub refine_step: u32,
    /// Contribution at which a ground-truth group counts as detected during
    /// diversification.
    pub detected: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            unit: 0.05,
            max_units: 30,
            coarse_step: 5,
            refine_step: 1,
            detected: 0.9,
        }
    }
}

type Lattice = [u32; SIMILARITY_DIMS];

impl SearchConfig {
    fn weights(&self, label: &str, p: &Lattice) -> WeightConfig {
        WeightConfig {
            label: label.to_string(),
            w: p.map(|u| f64::from(u) * self.unit),
        }
    }

    fn coarse_grid(&self) -> Vec<Lattice> {
        let axis: Vec<u32> = (0..=self.max_units).step_by(self.coarse_step.max(1) as usize).collect();
        let mut out = vec![[0u32; SIMILARITY_DIMS]];
        for d in 0..SIMILARITY_DIMS {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p;
                        q[d] = v;
                        q
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub weights: WeightConfig,
    pub tgr: f64,
    pub evaluations: usize,
}

/// Mean TGR over the samples that carry ground-truth groups.
pub fn corpus_tgr(samples: &[TrainingSample], w: &WeightConfig) -> f64 {
    combined_tgr(samples, std::slice::from_ref(w))
}

/// TGR when each group may be recovered by any of the weightings.
pub fn combined_tgr(samples: &[TrainingSample], configs: &[WeightConfig]) -> f64 {
    let per_sample: Vec<Option<f64>> = samples
        .par_iter()
        .map(|s| {
            if s.groups.is_empty() {
                return None;
            }
            let mut best = vec![0.0f64; s.groups.len()];
            for w in configs {
                for (b, c) in best.iter_mut().zip(s.contributions(w)) {
                    *b = b.max(c);
                }
            }
            Some(best.iter().sum::<f64>() / best.len() as f64)
        })
        .collect();
    let vals: Vec<f64> = per_sample.into_iter().flatten().collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

struct Evaluator<'a> {
    samples: &'a [TrainingSample],
    cfg: &'a SearchConfig,
    cache: HashMap<Lattice, f64>,
}

impl Evaluator<'_> {
    /// Scores in input order; results do not depend on scheduling.
    fn score_all(&mut self, points: &[Lattice]) -> Vec<f64> {
        let missing: Vec<Lattice> = points.iter().filter(|p| !self.cache.contains_key(*p)).copied().collect();
        let scored: Vec<f64> = missing
            .par_iter()
            .map(|p| corpus_tgr(self.samples, &self.cfg.weights("candidate", p)))
            .collect();
        self.cache.extend(missing.into_iter().zip(scored));
        points.iter().map(|p| self.cache[p]).collect()
    }
}

/// Coarse grid over the lattice, then coordinate refinement around the
/// incumbent until no neighbour improves. Among equal scores the
/// lexicographically smallest weight vector wins.
pub fn optimize_weights(samples: &[TrainingSample], cfg: &SearchConfig) -> Result<SearchOutcome> {
    optimize_labelled(samples, cfg, "w_opt")
}

fn optimize_labelled(samples: &[TrainingSample], cfg: &SearchConfig, label: &str) -> Result<SearchOutcome> {
    if samples.iter().all(|s| s.groups.is_empty()) {
        return Err(Error::InvalidInput("weight search needs ground-truth groups".into()));
    }
    if !(cfg.unit > 0.0) || cfg.coarse_step == 0 || cfg.refine_step == 0 {
        return Err(Error::InvalidInput(format!("invalid search configuration {cfg:?}")));
    }
    let mut eval = Evaluator {
        samples,
        cfg,
        cache: HashMap::new(),
    };
    let grid = cfg.coarse_grid();
    let scores = eval.score_all(&grid);
    let mut best = grid[0];
    let mut best_score = scores[0];
    for (p, &s) in grid.iter().zip(&scores).skip(1) {
        if s > best_score {
            best = *p;
            best_score = s;
        }
    }

    loop {
        let mut neighbours = Vec::with_capacity(2 * SIMILARITY_DIMS);
        for d in 0..SIMILARITY_DIMS {
            if best[d] >= cfg.refine_step {
                let mut q = best;
                q[d] -= cfg.refine_step;
                neighbours.push(q);
            }
            if best[d] + cfg.refine_step <= cfg.max_units {
                let mut q = best;
                q[d] += cfg.refine_step;
                neighbours.push(q);
            }
        }
        neighbours.sort_unstable();
        let scores = eval.score_all(&neighbours);
        let mut next: Option<(Lattice, f64)> = None;
        for (p, &s) in neighbours.iter().zip(&scores) {
            if s > best_score && next.map_or(true, |(_, ns)| s > ns) {
                next = Some((*p, s));
            }
        }
        match next {
            Some((p, s)) => {
                best = p;
                best_score = s;
            }
            None => break,
        }
    }

    Ok(SearchOutcome {
        weights: cfg.weights(label, &best),
        tgr: best_score,
        evaluations: eval.cache.len(),
    })
}

/// Finds up to `n` weightings. After each search the ground-truth groups the
/// new weighting detects are removed and the search runs again on the rest.
pub fn diversify_weights(samples: &[TrainingSample], n: usize, cfg: &SearchConfig) -> Result<Vec<SearchOutcome>> {
    if n == 0 {
        return Err(Error::InvalidInput("diversification needs n >= 1".into()));
    }
    let mut remaining: Vec<TrainingSample> = samples.to_vec();
    let mut out = Vec::new();
    for k in 1..=n {
        if remaining.iter().all(|s| s.groups.is_empty()) {
            break;
        }
        let label = if n == 1 { "w_opt".to_string() } else { format!("w_opt{k}") };
        let found = optimize_labelled(&remaining, cfg, &label)?;
        for s in &mut remaining {
            let c = s.contributions(&found.weights);
            let keep: Vec<bool> = c.iter().map(|&v| v < cfg.detected).collect();
            let mut it = keep.into_iter();
            s.groups.retain(|_| it.next().unwrap_or(true));
        }
        out.push(found);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postproc::GroupLevel;
    use crate::simspace::SimilarityVector;
    use crate::training::GtGroup;

    fn small_cfg() -> SearchConfig {
        SearchConfig {
            max_units: 20,
            coarse_step: 10,
            ..SearchConfig::default()
        }
    }

    /// Two three-character words that share intensity 100, one clutter
    /// region with a different intensity placed between them.
    fn color_sample() -> TrainingSample {
        let mut points = Vec::new();
        let mut chars = Vec::new();
        for (i, x) in [0.0, 10.0, 20.0].into_iter().enumerate() {
            points.push(SimilarityVector::new([100.0, 0.0, 0.0, 0.0, 0.0], (x, 0.0)));
            chars.push(Some(i as u32 + 1));
        }
        points.push(SimilarityVector::new([160.0, 0.0, 0.0, 0.0, 0.0], (5.0, 1.0)));
        chars.push(None);
        TrainingSample {
            points,
            chars,
            groups: vec![GtGroup {
                id: 1,
                level: GroupLevel::Word,
                members: vec![1, 2, 3],
            }],
        }
    }

    #[test]
    fn grid_order_and_size() {
        let g = small_cfg().coarse_grid();
        assert_eq!(g.len(), 3usize.pow(5));
        assert_eq!(g[0], [0; 5]);
        assert_eq!(g[1], [0, 0, 0, 0, 10]);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn separating_weight_wins() {
        let s = vec![color_sample()];
        let out = optimize_weights(&s, &small_cfg()).unwrap();
        assert_eq!(out.tgr, 1.0);
        // Features that never vary stay at the smallest value.
        assert_eq!(&out.weights.w[1..], &[0.0; 4]);
        assert!(out.weights.w[0] > 0.0);
        assert!(corpus_tgr(&s, &WeightConfig::uniform()) <= out.tgr);
    }

    #[test]
    fn search_is_reproducible() {
        let s = vec![color_sample(), color_sample()];
        let a = optimize_weights(&s, &small_cfg()).unwrap();
        let b = optimize_weights(&s, &small_cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_round_diversification() {
        let s = vec![color_sample()];
        let one = diversify_weights(&s, 1, &small_cfg()).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], optimize_weights(&s, &small_cfg()).unwrap());
        // The first weighting already covers everything.
        assert_eq!(diversify_weights(&s, 3, &small_cfg()).unwrap().len(), 1);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(optimize_weights(&[], &SearchConfig::default()).is_err());
        assert!(diversify_weights(&[color_sample()], 0, &SearchConfig::default()).is_err());
    }
}
