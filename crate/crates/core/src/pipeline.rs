//! End-to-end extraction: channels, regions, one dendrogram per channel and
//! weighting, classification, stopping rule and post-processing.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use image::{DynamicImage, GrayImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::BoostedModel;
use crate::error::{Error, Result};
use crate::groupdesc::{group_features, RegionSummary, MAX_CLUSTER_SIZE};
use crate::imageproc::{channel_regions, select_channels, ChannelId, ChannelSet, MserParams, Region};
use crate::postproc::{
    deduplicate, emit_outputs, line_groups, merge_collinear, split_words, GroupLevel, PostprocConfig, RectRecord,
    TextGroup,
};
use crate::simspace::{default_optimal_weights, WeightConfig};
use crate::slc::{build_dendrogram_with_stats, ClusterNode, Dendrogram};
use crate::stoprule::{log_nfa, select_by, NfaContext};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputLevel {
    #[default]
    Word,
    Line,
    /// Mask only, no rectangles.
    Segmentation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub mser: MserParams,
    pub weights: Vec<WeightConfig>,
    pub model_path: Option<PathBuf>,
    /// Overrides the threshold stored with the model.
    pub accept_threshold: Option<f64>,
    pub max_cluster_size: usize,
    pub postproc: PostprocConfig,
    pub output_level: OutputLevel,
    pub channels: ChannelSet,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mser: MserParams::default(),
            weights: vec![default_optimal_weights()],
            model_path: None,
            accept_threshold: None,
            max_cluster_size: MAX_CLUSTER_SIZE,
            postproc: PostprocConfig::default(),
            output_level: OutputLevel::Word,
            channels: ChannelSet::Mserpp,
            threads: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::InvalidInput("at least one weight configuration is required".into()));
        }
        for w in &self.weights {
            w.validate()?;
        }
        self.mser.validate()?;
        if self.max_cluster_size < 2 {
            return Err(Error::InvalidInput("max_cluster_size must be at least 2".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("threads must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn load_model(path: &Path) -> Result<BoostedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BoostedModel::from_json(&text)
}

/// Model trained on the synthetic corpus, shipped with the crate.
pub fn builtin_model() -> BoostedModel {
    BoostedModel::from_json(include_str!("../models/default.json")).expect("bundled model is valid")
}

/// Wall time per stage in milliseconds. Stages that run as parallel tasks
/// report the sum over tasks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub channels_ms: f64,
    pub mser_ms: f64,
    pub dendrogram_ms: f64,
    pub classify_ms: f64,
    pub select_ms: f64,
    pub postproc_ms: f64,
    pub total_ms: f64,
    pub regions: usize,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Regions of one channel and the scored dendrogram for every weighting.
#[derive(Clone, Debug)]
pub struct ChannelAnalysis {
    pub channel: ChannelId,
    pub regions: Vec<Region>,
    pub dendrograms: Vec<Dendrogram>,
}

/// Everything up to the stopping rule; thresholds can be varied afterwards
/// without recomputation.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub width: u32,
    pub height: u32,
    pub channels: Vec<ChannelAnalysis>,
    pub timing: TimingReport,
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub mask: GrayImage,
    pub rects: Vec<RectRecord>,
    pub groups: Vec<TextGroup>,
    pub timing: TimingReport,
}

pub struct Extractor {
    pub config: PipelineConfig,
    pub model: BoostedModel,
}

impl Extractor {
    pub fn new(config: PipelineConfig, mut model: BoostedModel) -> Result<Self> {
        config.validate()?;
        if let Some(t) = config.accept_threshold {
            model.accept_threshold = t;
        }
        Ok(Extractor { config, model })
    }

    /// Reads the model named in the configuration.
    pub fn from_config(config: PipelineConfig) -> Result<Self> {
        let path = config
            .model_path
            .clone()
            .ok_or_else(|| Error::InvalidInput("configuration names no model".into()))?;
        let model = load_model(&path)?;
        Self::new(config, model)
    }

    fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.config.threads {
            None => Ok(f()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
        }
    }

    pub fn analyze(&self, image: &DynamicImage) -> Result<Analysis> {
        self.run(|| self.analyze_inner(image))?
    }

    fn analyze_inner(&self, image: &DynamicImage) -> Result<Analysis> {
        let start = Instant::now();
        let mut timing = TimingReport::default();
        let t = Instant::now();
        let channels = select_channels(image, self.config.channels)?;
        timing.channels_ms = ms(t.elapsed());

        let extracted: Vec<(Vec<Region>, Duration)> = channels
            .par_iter()
            .map(|c| {
                let t = Instant::now();
                channel_regions(c, &self.config.mser).map(|r| (r, t.elapsed()))
            })
            .collect::<Result<_>>()?;
        timing.mser_ms = extracted.iter().map(|(_, d)| ms(*d)).sum();
        timing.regions = extracted.iter().map(|(r, _)| r.len()).sum();

        let (width, height) = (image.width(), image.height());
        let tasks: Vec<(usize, usize)> = (0..channels.len())
            .flat_map(|c| (0..self.config.weights.len()).map(move |w| (c, w)))
            .collect();
        let tables: Vec<Vec<RegionSummary>> =
            extracted.iter().map(|(r, _)| r.iter().map(RegionSummary::from).collect()).collect();
        let built: Vec<Option<(Dendrogram, Duration, Duration)>> = tasks
            .par_iter()
            .map(|&(c, w)| {
                let table = &tables[c];
                if table.is_empty() {
                    return Ok(None);
                }
                let t = Instant::now();
                let mut d = build_dendrogram_with_stats(table, &self.config.weights[w], self.config.max_cluster_size)?;
                d.channel = Some(channels[c].channel());
                let built = t.elapsed();
                let t = Instant::now();
                self.score(&mut d, table, width, height);
                Ok(Some((d, built, t.elapsed())))
            })
            .collect::<Result<_>>()?;

        let mut out: Vec<ChannelAnalysis> = channels
            .iter()
            .zip(extracted)
            .map(|(c, (regions, _))| ChannelAnalysis {
                channel: c.channel(),
                regions,
                dendrograms: Vec::new(),
            })
            .collect();
        for ((c, _), b) in tasks.iter().zip(built) {
            if let Some((d, tb, tc)) = b {
                timing.dendrogram_ms += ms(tb);
                timing.classify_ms += ms(tc);
                out[*c].dendrograms.push(d);
            }
        }
        timing.total_ms = ms(start.elapsed());
        Ok(Analysis {
            width,
            height,
            channels: out,
            timing,
        })
    }

    /// Attaches classifier scores, verdicts and NFAs to every node that
    /// carries group statistics.
    fn score(&self, d: &mut Dendrogram, table: &[RegionSummary], width: u32, height: u32) {
        let ctx = NfaContext::for_image(table.len(), width, height);
        for node in d.nodes.iter_mut() {
            let Some(stats) = node.stats.as_ref().and_then(|s| s.group()) else {
                continue;
            };
            let Ok(h) = group_features(stats, table) else {
                continue;
            };
            let s = self.model.score(&h);
            node.score = Some(s);
            node.label = Some(self.model.accepts_score(s));
            node.log_nfa = log_nfa(stats, &ctx);
        }
    }

    /// Stopping rule and post-processing at the model's threshold.
    pub fn finish(&self, analysis: &Analysis) -> Extraction {
        self.finish_at(analysis, self.model.accept_threshold)
    }

    /// Stopping rule and post-processing with nodes scoring above
    /// `threshold` treated as text.
    pub fn finish_at(&self, analysis: &Analysis, threshold: f64) -> Extraction {
        let mut timing = analysis.timing.clone();
        let t = Instant::now();
        let mut groups = Vec::new();
        for ca in &analysis.channels {
            for d in &ca.dendrograms {
                for id in select_by(d, |n: &ClusterNode| n.score.is_some_and(|s| s > threshold)) {
                    groups.extend(line_groups(d, id, &ca.regions, self.config.postproc.max_line_height));
                }
            }
        }
        timing.select_ms = ms(t.elapsed());

        let t = Instant::now();
        let cfg = &self.config.postproc;
        let mut groups = merge_collinear(deduplicate(groups, cfg.dedup_iou), cfg);
        if self.config.output_level == OutputLevel::Word {
            groups = groups
                .into_iter()
                .flat_map(|g| {
                    if g.members.len() < 2 {
                        vec![TextGroup { level: GroupLevel::Word, ..g }]
                    } else {
                        split_words(&g, cfg.word_spacing).expect("at least two members")
                    }
                })
                .collect();
            groups = deduplicate(groups, cfg.dedup_iou);
        }
        let (mask, mut rects) = emit_outputs(&groups, analysis.width, analysis.height);
        if self.config.output_level == OutputLevel::Segmentation {
            rects.clear();
        }
        timing.postproc_ms = ms(t.elapsed());
        timing.total_ms += timing.select_ms + timing.postproc_ms;
        Extraction {
            mask,
            rects,
            groups,
            timing,
        }
    }

    pub fn extract(&self, image: &DynamicImage) -> Result<Extraction> {
        let analysis = self.analyze(image)?;
        Ok(self.finish(&analysis))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Stump;

    fn accept_all() -> BoostedModel {
        BoostedModel::from_stumps(vec![Stump {
            feature: 0,
            threshold: f64::NEG_INFINITY,
            left: 1.0,
            right: 1.0,
        }])
    }

    #[test]
    fn blank_image_gives_nothing() {
        let ex = Extractor::new(PipelineConfig::default(), accept_all()).unwrap();
        let img = DynamicImage::ImageRgb8(image::RgbImage::from_pixel(64, 48, image::Rgb([90, 90, 90])));
        let out = ex.extract(&img).unwrap();
        assert!(out.rects.is_empty());
        assert!(out.mask.pixels().all(|p| p.0[0] == 0));
        assert_eq!(out.timing.regions, 0);
    }

    #[test]
    fn config_json_roundtrip() {
        let cfg = PipelineConfig {
            channels: ChannelSet::Gray,
            output_level: OutputLevel::Line,
            threads: Some(2),
            ..PipelineConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"gray\"") && text.contains("\"line\""));
        assert_eq!(PipelineConfig::from_json(&text).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_json("{}").unwrap(), PipelineConfig::default());
        assert!(PipelineConfig::from_json(r#"{"weights": []}"#).is_err());
    }

    #[test]
    fn missing_model_is_an_io_error() {
        let cfg = PipelineConfig {
            model_path: Some("/nonexistent/model.json".into()),
            ..PipelineConfig::default()
        };
        assert!(matches!(Extractor::from_config(cfg), Err(Error::Io { .. })));
    }
}
