//! Real AdaBoost over decision stumps on group feature vectors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groupdesc::{GroupFeatureVector, GROUP_FEATURE_DIMS, GROUP_FEATURE_NAMES};

pub const DEFAULT_ROUNDS: usize = 200;
pub const DEFAULT_HARD_NEGATIVES: usize = 100;

/// `h[feature] < threshold` takes the left score, otherwise the right one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    #[serde(rename = "f")]
    pub feature: usize,
    #[serde(rename = "thr")]
    pub threshold: f64,
    #[serde(rename = "l")]
    pub left: f64,
    #[serde(rename = "r")]
    pub right: f64,
}

impl Stump {
    #[inline]
    pub fn eval(&self, h: &[f64]) -> f64 {
        if h[self.feature] < self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

fn feature_names() -> Vec<String> {
    GROUP_FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub rounds: usize,
    pub accept_threshold: f64,
    pub stumps: Vec<Stump>,
    #[serde(skip, default = "feature_names")]
    pub feature_names: Vec<String>,
}

impl Default for BoostedModel {
    fn default() -> Self {
        BoostedModel {
            rounds: 0,
            accept_threshold: 0.0,
            stumps: Vec::new(),
            feature_names: feature_names(),
        }
    }
}

impl BoostedModel {
    pub fn from_stumps(stumps: Vec<Stump>) -> Self {
        BoostedModel {
            rounds: stumps.len(),
            stumps,
            ..BoostedModel::default()
        }
    }

    pub fn score(&self, h: &GroupFeatureVector) -> f64 {
        self.score_slice(h.as_slice())
    }

    pub fn score_slice(&self, h: &[f64]) -> f64 {
        self.stumps.iter().map(|s| s.eval(h)).sum()
    }

    pub fn accepts_score(&self, score: f64) -> bool {
        score > self.accept_threshold
    }

    /// Verdict: text iff the score exceeds the acceptance threshold.
    pub fn classify(&self, h: &GroupFeatureVector) -> bool {
        self.accepts_score(self.score(h))
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.accept_threshold = t;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: BoostedModel = serde_json::from_str(text)?;
        if m.rounds != m.stumps.len() {
            return Err(Error::DataFormat(format!(
                "model declares {} rounds but holds {} stumps",
                m.rounds,
                m.stumps.len()
            )));
        }
        if let Some(s) = m
            .stumps
            .iter()
            .find(|s| s.feature >= GROUP_FEATURE_DIMS || !s.left.is_finite() || !s.right.is_finite())
        {
            return Err(Error::DataFormat(format!("invalid stump {s:?}")));
        }
        Ok(m)
    }
}

/// Mean of `exp(-y * F(x))` over labelled examples.
pub fn exponential_loss(
    model: &BoostedModel,
    positives: &[GroupFeatureVector],
    negatives: &[GroupFeatureVector],
) -> f64 {
    let n = positives.len() + negatives.len();
    if n == 0 {
        return 0.0;
    }
    let pos: f64 = positives.iter().map(|h| (-model.score(h)).exp()).sum();
    let neg: f64 = negatives.iter().map(|h| model.score(h).exp()).sum();
    (pos + neg) / n as f64
}

/// Real AdaBoost. Each round picks the stump minimizing
/// `Z = 2 * sum over sides of sqrt(W+ * W-)`; side scores are
/// `0.5 * ln((W+ + eps) / (W- + eps))` with `eps = 1 / (4N)`.
pub fn train(
    positives: &[GroupFeatureVector],
    negatives: &[GroupFeatureVector],
    rounds: usize,
) -> Result<BoostedModel> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Training("both classes need at least one example".into()));
    }
    if rounds == 0 {
        return Err(Error::Training("rounds must be >= 1".into()));
    }
    let xs: Vec<&[f64]> = positives
        .iter()
        .chain(negatives)
        .map(|h| h.as_slice())
        .collect();
    let ys: Vec<f64> = std::iter::repeat(1.0)
        .take(positives.len())
        .chain(std::iter::repeat(-1.0).take(negatives.len()))
        .collect();
    let n = xs.len();
    let eps = 1.0 / (4.0 * n as f64);

    // Sorted example order per feature, computed once.
    let sorted: Vec<Vec<usize>> = (0..GROUP_FEATURE_DIMS)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let splittable = sorted
        .iter()
        .enumerate()
        .any(|(f, idx)| xs[idx[0]][f] < xs[idx[n - 1]][f]);
    if !splittable {
        return Err(Error::Training(
            "all feature vectors are identical; no stump can split them".into(),
        ));
    }

    let mut weights = vec![1.0 / n as f64; n];
    let mut stumps = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let (tot_pos, tot_neg) = weights
            .iter()
            .zip(&ys)
            .fold((0.0, 0.0), |(p, q), (&w, &y)| if y > 0.0 { (p + w, q) } else { (p, q + w) });

        // (z, feature, threshold, left W+, left W-)
        let mut best: Option<(f64, usize, f64, f64, f64)> = None;
        for (f, idx) in sorted.iter().enumerate() {
            let (mut lp, mut ln) = (0.0, 0.0);
            for k in 0..n - 1 {
                let i = idx[k];
                if ys[i] > 0.0 {
                    lp += weights[i];
                } else {
                    ln += weights[i];
                }
                let (v, next) = (xs[i][f], xs[idx[k + 1]][f]);
                if v == next {
                    continue;
                }
                let (rp, rn) = ((tot_pos - lp).max(0.0), (tot_neg - ln).max(0.0));
                let z = 2.0 * ((lp * ln).sqrt() + (rp * rn).sqrt());
                if best.map_or(true, |b| z < b.0) {
                    best = Some((z, f, 0.5 * (v + next), lp, ln));
                }
            }
        }
        let (_, feature, threshold, lp, ln) = best.expect("splittable feature exists");
        let (rp, rn) = ((tot_pos - lp).max(0.0), (tot_neg - ln).max(0.0));
        let stump = Stump {
            feature,
            threshold,
            left: 0.5 * ((lp + eps) / (ln + eps)).ln(),
            right: 0.5 * ((rp + eps) / (rn + eps)).ln(),
        };
        let mut norm = 0.0;
        for i in 0..n {
            weights[i] *= (-ys[i] * stump.eval(xs[i])).exp();
            norm += weights[i];
        }
        for w in &mut weights {
            *w /= norm;
        }
        stumps.push(stump);
    }
    Ok(BoostedModel::from_stumps(stumps))
}

/// Randomly downsamples the larger class to the size of the smaller one.
pub fn balance(
    positives: &[GroupFeatureVector],
    negatives: &[GroupFeatureVector],
    seed: u64,
) -> (Vec<GroupFeatureVector>, Vec<GroupFeatureVector>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = positives.len().min(negatives.len());
    let pick = |v: &[GroupFeatureVector], rng: &mut ChaCha8Rng| -> Vec<GroupFeatureVector> {
        if v.len() <= k {
            return v.to_vec();
        }
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.shuffle(rng);
        let mut chosen = idx[..k].to_vec();
        chosen.sort_unstable();
        chosen.into_iter().map(|i| v[i]).collect()
    };
    let p = pick(positives, &mut rng);
    let n = pick(negatives, &mut rng);
    (p, n)
}

/// The `k` highest-scoring vectors of `pool` under `model`, ties broken by
/// pool order.
pub fn hardest_negatives(
    model: &BoostedModel,
    pool: &[GroupFeatureVector],
    k: usize,
) -> Vec<GroupFeatureVector> {
    let mut scored: Vec<(f64, usize)> = pool.iter().enumerate().map(|(i, h)| (model.score(h), i)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, i)| pool[i]).collect()
}

/// Appends the `k` hardest negatives from `pool` to the training negatives
/// and retrains. A pool smaller than `k` is used whole.
pub fn mine_and_retrain(
    model: &BoostedModel,
    positives: &[GroupFeatureVector],
    negatives: &[GroupFeatureVector],
    pool: &[GroupFeatureVector],
    k: usize,
    rounds: usize,
) -> Result<BoostedModel> {
    let mut negs = negatives.to_vec();
    negs.extend(hardest_negatives(model, pool, k));
    let mut retrained = train(positives, &negs, rounds)?;
    retrained.accept_threshold = model.accept_threshold;
    Ok(retrained)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn vec_with(f: usize, v: f64) -> GroupFeatureVector {
        let mut h = [0.0; GROUP_FEATURE_DIMS];
        h[f] = v;
        GroupFeatureVector(h)
    }

    #[test]
    fn empty_model_rejects() {
        let m = BoostedModel::default();
        assert_eq!(m.score(&vec_with(0, 3.0)), 0.0);
        assert!(!m.classify(&vec_with(0, 3.0)));
    }

    #[test]
    fn single_stump_and_tie_goes_right() {
        let m = BoostedModel::from_stumps(vec![Stump {
            feature: 0,
            threshold: 5.0,
            left: -1.0,
            right: 1.0,
        }]);
        assert_eq!(m.score(&vec_with(0, 7.0)), 1.0);
        assert!(m.classify(&vec_with(0, 7.0)));
        assert_eq!(m.score(&vec_with(0, 5.0)), 1.0);
        assert_eq!(m.score(&vec_with(0, 4.9)), -1.0);
    }

    #[test]
    fn separable_in_one_round() {
        let pos: Vec<_> = (1..20).map(|i| vec_with(3, f64::from(i))).collect();
        let neg: Vec<_> = (1..20).map(|i| vec_with(3, -f64::from(i))).collect();
        let m = train(&pos, &neg, 1).unwrap();
        assert!(pos.iter().all(|h| m.classify(h)));
        assert!(neg.iter().all(|h| !m.classify(h)));
        assert_eq!(m.stumps[0].feature, 3);
    }

    #[test]
    fn interval_pattern_on_one_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for _ in 0..200 {
            let x: f64 = rng.gen_range(-2.0..2.0);
            if x.abs() < 1.0 {
                pos.push(vec_with(0, x));
            } else {
                neg.push(vec_with(0, x));
            }
        }
        let m = train(&pos, &neg, 50).unwrap();
        let correct = pos.iter().filter(|h| m.classify(h)).count()
            + neg.iter().filter(|h| !m.classify(h)).count();
        assert!(correct as f64 / 200.0 > 0.5);
    }

    #[test]
    fn loss_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rand_vec = |rng: &mut ChaCha8Rng| {
            let mut h = [0.0; GROUP_FEATURE_DIMS];
            for v in &mut h {
                *v = rng.gen_range(0.0..1.0);
            }
            GroupFeatureVector(h)
        };
        let pos: Vec<_> = (0..60).map(|_| rand_vec(&mut rng)).collect();
        let neg: Vec<_> = (0..60).map(|_| rand_vec(&mut rng)).collect();
        let full = train(&pos, &neg, 40).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..=40 {
            let partial = BoostedModel::from_stumps(full.stumps[..t].to_vec());
            let loss = exponential_loss(&partial, &pos, &neg);
            assert!(loss <= prev + 1e-12, "round {t}: {loss} > {prev}");
            prev = loss;
        }
    }

    #[test]
    fn degenerate_data_is_an_error() {
        let h = vec_with(0, 1.0);
        assert!(matches!(train(&[h], &[h], 5), Err(Error::Training(_))));
        assert!(train(&[], &[h], 5).is_err());
    }

    #[test]
    fn json_shape_and_round_trip() {
        let m = BoostedModel::from_stumps(vec![Stump {
            feature: 2,
            threshold: 0.1 + 0.2,
            left: -0.7,
            right: 1.0 / 3.0,
        }]);
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["rounds"], 1);
        assert_eq!(v["stumps"][0]["f"], 2);
        assert!(v["stumps"][0].get("thr").is_some());
        let back = BoostedModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(BoostedModel::from_json(r#"{"rounds":2,"accept_threshold":0,"stumps":[]}"#).is_err());
    }

    #[test]
    fn mining_picks_top_scores() {
        let m = BoostedModel::from_stumps(vec![Stump {
            feature: 0,
            threshold: 0.0,
            left: -1.0,
            right: 1.0,
        }]);
        let pool: Vec<_> = (-5..5).map(|i| vec_with(0, f64::from(i))).collect();
        let hard = hardest_negatives(&m, &pool, 5);
        assert!(hard.iter().all(|h| m.score(h) > 0.0));
        assert_eq!(hard.len(), 5);
    }
}
