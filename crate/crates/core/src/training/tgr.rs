//! Text group recall: how well the nodes of a dendrogram can reproduce the
//! ground-truth words and lines.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::imageproc::Region;
use crate::simspace::{SimilarityVector, WeightConfig};
use crate::slc::{build_dendrogram, Dendrogram};

use super::groundtruth::{match_char, GroundTruth, GtGroup};

/// Per ground-truth group, the largest fraction of its characters held by a
/// node whose every member matches a character of that group.
///
/// `region_chars[i]` is the character matched by leaf `i`. Several regions
/// can match the same character, so the fraction counts distinct characters
/// and never exceeds one.
pub fn group_contributions(d: &Dendrogram, region_chars: &[Option<u32>], groups: &[GtGroup]) -> Vec<f64> {
    let m = d.nodes.len();
    let mut pure = vec![false; m];
    groups
        .iter()
        .map(|g| {
            let chars: HashSet<u32> = g.members.iter().copied().collect();
            for id in 0..m {
                pure[id] = match d.nodes[id].children {
                    None => region_chars[id].is_some_and(|c| chars.contains(&c)),
                    Some((a, b)) => pure[a] && pure[b],
                };
            }
            let mut best = 0usize;
            for id in 0..m {
                let maximal = pure[id] && d.nodes[id].parent.map_or(true, |p| !pure[p]);
                if maximal {
                    let held: HashSet<u32> = d.members(id).iter().filter_map(|&r| region_chars[r]).collect();
                    best = best.max(held.len());
                }
            }
            best as f64 / chars.len() as f64
        })
        .collect()
}

/// Mean contribution over the ground-truth groups.
pub fn text_group_recall(d: &Dendrogram, region_chars: &[Option<u32>], groups: &[GtGroup]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::InvalidInput("text group recall needs ground-truth groups".into()));
    }
    let c = group_contributions(d, region_chars, groups);
    Ok(c.iter().sum::<f64>() / c.len() as f64)
}

/// Regions of one image channel reduced to what weight search needs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub points: Vec<SimilarityVector>,
    pub chars: Vec<Option<u32>>,
    pub groups: Vec<GtGroup>,
}

impl TrainingSample {
    pub fn from_regions(regions: &[Region], gt: &GroundTruth) -> Self {
        let areas = gt.char_areas();
        TrainingSample {
            points: regions.iter().map(SimilarityVector::from).collect(),
            chars: regions.iter().map(|r| match_char(&r.pixels, gt, &areas)).collect(),
            groups: gt.groups.clone(),
        }
    }

    pub fn contributions(&self, w: &WeightConfig) -> Vec<f64> {
        match build_dendrogram(&self.points, w) {
            Ok(d) => group_contributions(&d, &self.chars, &self.groups),
            Err(_) => vec![0.0; self.groups.len()],
        }
    }

    /// `None` when the sample has no ground-truth groups.
    pub fn tgr(&self, w: &WeightConfig) -> Option<f64> {
        if self.groups.is_empty() {
            return None;
        }
        let c = self.contributions(w);
        Some(c.iter().sum::<f64>() / c.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postproc::GroupLevel;

    fn word(id: u32, members: &[u32]) -> GtGroup {
        GtGroup {
            id,
            level: GroupLevel::Word,
            members: members.to_vec(),
        }
    }

    fn sample(xs: &[f64], chars: &[Option<u32>], groups: Vec<GtGroup>) -> TrainingSample {
        TrainingSample {
            points: xs.iter().map(|&x| SimilarityVector::new([0.0; 5], (x, 0.0))).collect(),
            chars: chars.to_vec(),
            groups,
        }
    }

    #[test]
    fn perfect_nodes_give_one() {
        let s = sample(
            &[0.0, 1.0, 2.0, 100.0, 101.0],
            &[Some(1), Some(2), Some(3), Some(4), Some(5)],
            vec![word(1, &[1, 2, 3]), word(2, &[4, 5])],
        );
        assert_eq!(s.tgr(&WeightConfig::uniform()), Some(1.0));
    }

    #[test]
    fn nothing_matched_gives_zero() {
        let s = sample(&[0.0, 1.0], &[None, None], vec![word(1, &[1, 2])]);
        assert_eq!(s.tgr(&WeightConfig::uniform()), Some(0.0));
    }

    #[test]
    fn half_recovered_word() {
        // Characters 1 and 2 pair up, but a clutter region joins them before
        // characters 3 and 4 do.
        let s = sample(
            &[0.0, 1.0, 3.0, 10.0, 11.0],
            &[Some(1), Some(2), None, Some(3), Some(4)],
            vec![word(1, &[1, 2, 3, 4])],
        );
        assert_eq!(s.tgr(&WeightConfig::uniform()), Some(0.5));
    }

    #[test]
    fn duplicate_regions_do_not_inflate() {
        let s = sample(&[0.0, 0.5, 1.0], &[Some(1), Some(1), Some(2)], vec![word(1, &[1, 2, 3])]);
        let c = s.contributions(&WeightConfig::uniform());
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_truth_is_an_error() {
        let d = build_dendrogram(&[SimilarityVector::new([0.0; 5], (0.0, 0.0))], &WeightConfig::uniform()).unwrap();
        assert!(text_group_recall(&d, &[None], &[]).is_err());
    }
}
