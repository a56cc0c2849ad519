//! Positive and negative group examples for the text-group classifier, and
//! the training procedure built on them.

use std::collections::{HashMap, HashSet};

use image::DynamicImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{balance, mine_and_retrain, train, BoostedModel, DEFAULT_HARD_NEGATIVES, DEFAULT_ROUNDS};
use crate::error::{Error, Result};
use crate::groupdesc::{group_features, stats_for_members, GroupFeatureVector, RegionSummary, MAX_CLUSTER_SIZE};
use crate::imageproc::{channel_regions, compute_features_for_pixels, select_channels, ChannelSet, MserParams, Polarity};
use crate::simspace::WeightConfig;
use crate::slc::{build_dendrogram_with_stats, Dendrogram};

use super::groundtruth::{match_char, GroundTruth, GtGroup};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarvestConfig {
    pub mser: MserParams,
    pub channels: ChannelSet,
    pub max_cluster_size: usize,
    /// Match fraction a node must exceed to be a positive.
    pub positive_match: f64,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            mser: MserParams::default(),
            channels: ChannelSet::Mserpp,
            max_cluster_size: MAX_CLUSTER_SIZE,
            positive_match: 0.8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Harvest {
    pub positives: Vec<GroupFeatureVector>,
    pub negatives: Vec<GroupFeatureVector>,
}

impl Harvest {
    pub fn extend(&mut self, other: Harvest) {
        self.positives.extend(other.positives);
        self.negatives.extend(other.negatives);
    }
}

/// How well a node reproduces a ground-truth group: the smaller of its
/// purity (share of members matching characters of the group) and its
/// coverage (share of the group's characters matched by some member).
pub fn node_match_fraction(members: &[usize], region_chars: &[Option<u32>], group: &GtGroup) -> f64 {
    if members.is_empty() || group.members.is_empty() {
        return 0.0;
    }
    let chars: HashSet<u32> = group.members.iter().copied().collect();
    let mut held = HashSet::new();
    let mut pure = 0usize;
    for &m in members {
        if let Some(c) = region_chars[m] {
            if chars.contains(&c) {
                pure += 1;
                held.insert(c);
            }
        }
    }
    let purity = pure as f64 / members.len() as f64;
    let coverage = held.len() as f64 / chars.len() as f64;
    purity.min(coverage)
}

/// Positives and negatives from the nodes of one dendrogram. Nodes above
/// the size cap carry no statistics and are skipped.
pub fn harvest_dendrogram(
    d: &Dendrogram,
    table: &[RegionSummary],
    region_chars: &[Option<u32>],
    groups: &[GtGroup],
    positive_match: f64,
) -> Harvest {
    let mut out = Harvest::default();
    for node in &d.nodes[d.n_leaves..] {
        let Some(stats) = node.stats.as_ref().and_then(|s| s.group()) else {
            continue;
        };
        let members = &stats.members;
        let matched = members.iter().any(|&m| region_chars[m].is_some());
        let best = groups
            .iter()
            .map(|g| node_match_fraction(members, region_chars, g))
            .fold(0.0, f64::max);
        let is_pos = best > positive_match;
        if !is_pos && matched {
            continue;
        }
        let Ok(h) = group_features(stats, table) else {
            continue;
        };
        if is_pos {
            out.positives.push(h);
        } else {
            out.negatives.push(h);
        }
    }
    out
}

/// Descriptors of the ground-truth groups themselves, with character masks
/// standing in for detected regions on the gray channel.
pub fn truth_group_features(image: &DynamicImage, gt: &GroundTruth) -> Result<Vec<GroupFeatureVector>> {
    let gray = select_channels(image, ChannelSet::Gray)?.remove(0);
    let pixels = gt.char_pixels();
    let mut out = Vec::new();
    for g in &gt.groups {
        if g.members.len() < 2 || g.members.len() > MAX_CLUSTER_SIZE {
            continue;
        }
        let table = g
            .members
            .iter()
            .map(|c| {
                let px = pixels
                    .get(c)
                    .ok_or_else(|| Error::DataFormat(format!("character {c} has no pixels")))?;
                let r = compute_features_for_pixels(px.clone(), Polarity::Dark, &gray)?;
                Ok(RegionSummary::from(&r))
            })
            .collect::<Result<Vec<_>>>()?;
        let ids: Vec<usize> = (0..table.len()).collect();
        if let Some(stats) = stats_for_members(&ids, &table).group() {
            out.push(group_features(stats, &table)?);
        }
    }
    Ok(out)
}

/// Harvest for one annotated image under one weighting.
pub fn harvest_image(image: &DynamicImage, gt: &GroundTruth, w: &WeightConfig, cfg: &HarvestConfig) -> Result<Harvest> {
    let mut out = Harvest {
        positives: truth_group_features(image, gt)?,
        negatives: Vec::new(),
    };
    let areas = gt.char_areas();
    for channel in select_channels(image, cfg.channels)? {
        let regions = channel_regions(&channel, &cfg.mser)?;
        if regions.is_empty() {
            continue;
        }
        let table: Vec<RegionSummary> = regions.iter().map(RegionSummary::from).collect();
        let chars: Vec<Option<u32>> = regions.iter().map(|r| match_char(&r.pixels, gt, &areas)).collect();
        let d = build_dendrogram_with_stats(&table, w, cfg.max_cluster_size)?;
        out.extend(harvest_dendrogram(&d, &table, &chars, &gt.groups, cfg.positive_match));
    }
    Ok(out)
}

/// Harvest over a corpus, concatenated in corpus order.
pub fn harvest_corpus(
    samples: &[(DynamicImage, GroundTruth)],
    w: &WeightConfig,
    cfg: &HarvestConfig,
) -> Result<Harvest> {
    let parts: Vec<Harvest> = samples
        .par_iter()
        .map(|(img, gt)| harvest_image(img, gt, w, cfg))
        .collect::<Result<_>>()?;
    let mut out = Harvest::default();
    for p in parts {
        out.extend(p);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierTraining {
    pub rounds: usize,
    pub hard_negatives: usize,
    pub seed: u64,
}

impl Default for ClassifierTraining {
    fn default() -> Self {
        ClassifierTraining {
            rounds: DEFAULT_ROUNDS,
            hard_negatives: DEFAULT_HARD_NEGATIVES,
            seed: 0,
        }
    }
}

/// Balanced training followed by one round of hard-negative mining over the
/// negatives left out by balancing.
pub fn train_classifier(h: &Harvest, cfg: &ClassifierTraining) -> Result<BoostedModel> {
    let (pos, neg) = balance(&h.positives, &h.negatives, cfg.seed);
    let model = train(&pos, &neg, cfg.rounds)?;
    let key = |v: &GroupFeatureVector| v.0.map(f64::to_bits);
    let mut used: HashMap<[u64; 14], usize> = HashMap::new();
    for v in &neg {
        *used.entry(key(v)).or_insert(0) += 1;
    }
    let pool: Vec<GroupFeatureVector> = h
        .negatives
        .iter()
        .filter(|v| match used.get_mut(&key(v)) {
            Some(c) if *c > 0 => {
                *c -= 1;
                false
            }
            _ => true,
        })
        .copied()
        .collect();
    if pool.is_empty() || cfg.hard_negatives == 0 {
        return Ok(model);
    }
    mine_and_retrain(&model, &pos, &neg, &pool, cfg.hard_negatives, cfg.rounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postproc::GroupLevel;

    fn word(members: &[u32]) -> GtGroup {
        GtGroup {
            id: 1,
            level: GroupLevel::Word,
            members: members.to_vec(),
        }
    }

    #[test]
    fn match_fraction_rules() {
        let chars = [Some(1), Some(2), None, Some(3), Some(4)];
        let g = word(&[1, 2, 3, 4]);
        assert_eq!(node_match_fraction(&[0, 1, 3, 4], &chars, &g), 1.0);
        assert_eq!(node_match_fraction(&[0, 1], &chars, &g), 0.5);
        assert_eq!(node_match_fraction(&[0, 1, 2, 3, 4], &chars, &g), 0.8);
        assert_eq!(node_match_fraction(&[2], &chars, &g), 0.0);
    }
}
