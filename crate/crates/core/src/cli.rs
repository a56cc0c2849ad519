//! Command-line front end. Every subcommand writes only inside `--out`.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 data-format error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use image::{DynamicImage, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifier::{DEFAULT_HARD_NEGATIVES, DEFAULT_ROUNDS};
use crate::error::{Error, Result};
use crate::eval::{localization_score, pixel_score, pr_sweep, write_sweep_csv, CorpusReport, ImageReport};
use crate::geometry::{pixel_min_area_rect, RotatedRect};
use crate::imageproc::{channel_regions, select_channels, ChannelSet};
use crate::pipeline::{builtin_model, load_model, Extractor, OutputLevel, PipelineConfig};
use crate::postproc::{read_rects_jsonl, write_rects_jsonl, GroupLevel};
use crate::simspace::{default_optimal_weights, WeightConfig};
use crate::training::{
    diversify_weights, generate_synthetic, harvest_corpus, train_classifier, write_manifest, write_sample,
    ClassifierTraining, Corpus, GroundTruth, HarvestConfig, Manifest, SearchConfig, SyntheticSpec, TrainingSample,
};

#[derive(Parser, Debug)]
#[command(name = "hiertext", version, about = "Multi-script scene text extraction")]
struct Cli {
    /// Print progress to standard error.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract text from images: writes a mask PNG, a rectangles JSONL file
    /// and a timing report per image.
    Extract(ExtractArgs),
    /// Search similarity weights on an annotated corpus.
    TrainWeights(TrainWeightsArgs),
    /// Train the text-group classifier on an annotated corpus.
    TrainClassifier(TrainClassifierArgs),
    /// Generate an annotated synthetic corpus.
    GenSynthetic(GenSyntheticArgs),
    /// Score extraction outputs against a corpus.
    Evaluate(EvaluateArgs),
    /// Precision and recall over a range of classifier thresholds.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Pipeline configuration JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Classifier model JSON; the built-in model is used otherwise.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Weight configuration JSON, one object or a list.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// gray or mserpp.
    #[arg(long, value_parser = parse_channels)]
    channels: Option<ChannelSet>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// word, line or segmentation.
    #[arg(long, value_parser = parse_level)]
    level: Option<OutputLevel>,
    /// Override the classifier acceptance threshold.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    /// Also draw the rectangles over the input.
    #[arg(long)]
    overlay: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainWeightsArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of diversified weightings.
    #[arg(long, default_value_t = 1)]
    diversify: usize,
    #[arg(long, value_parser = parse_channels, default_value = "gray")]
    channels: ChannelSet,
    /// Search configuration JSON.
    #[arg(long)]
    search: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainClassifierArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Weight configuration JSON; the shipped optimum otherwise.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, value_parser = parse_channels, default_value = "mserpp")]
    channels: ChannelSet,
    #[arg(long, default_value_t = DEFAULT_ROUNDS)]
    rounds: usize,
    #[arg(long, default_value_t = DEFAULT_HARD_NEGATIVES)]
    hard_negatives: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GenSyntheticArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Scene specification JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Add window and brick grids.
    #[arg(long)]
    distractors: bool,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Directory holding `<id>_mask.png` and `<id>_rects.jsonl` files.
    #[arg(long)]
    outputs: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = -30.0, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
    to: f64,
    #[arg(long, default_value_t = 31)]
    steps: usize,
}

fn parse_channels(s: &str) -> std::result::Result<ChannelSet, String> {
    match s {
        "gray" => Ok(ChannelSet::Gray),
        "mserpp" => Ok(ChannelSet::Mserpp),
        _ => Err(format!("expected gray or mserpp, got {s}")),
    }
}

fn parse_level(s: &str) -> std::result::Result<OutputLevel, String> {
    match s {
        "word" => Ok(OutputLevel::Word),
        "line" => Ok(OutputLevel::Line),
        "segmentation" => Ok(OutputLevel::Segmentation),
        _ => Err(format!("expected word, line or segmentation, got {s}")),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("error: {e}");
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) => 1,
        Error::Io { .. } => 2,
        Error::Decode(_) | Error::DataFormat(_) | Error::Training(_) | Error::UndefinedGroup(_) => 3,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Extract(a) => extract(a, verbose),
        Command::TrainWeights(a) => train_weights(a, verbose),
        Command::TrainClassifier(a) => train_classifier_cmd(a, verbose),
        Command::GenSynthetic(a) => gen_synthetic(a, verbose),
        Command::Evaluate(a) => evaluate(a, verbose),
        Command::Sweep(a) => sweep(a, verbose),
    }
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")))
    }
}

fn require_dir(p: &Path) -> Result<()> {
    if p.is_dir() {
        Ok(())
    } else {
        Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory")))
    }
}

fn make_out(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One weight object or a list of them.
pub fn read_weights(path: &Path) -> Result<Vec<WeightConfig>> {
    let v: serde_json::Value = read_json(path)?;
    let list: Vec<WeightConfig> = if v.is_array() {
        serde_json::from_value(v)?
    } else {
        vec![serde_json::from_value(v)?]
    };
    if list.is_empty() {
        return Err(Error::DataFormat(format!("{} holds no weights", path.display())));
    }
    for w in &list {
        w.validate().map_err(|e| Error::DataFormat(e.to_string()))?;
    }
    Ok(list)
}

fn build_extractor(a: &PipelineArgs) -> Result<Extractor> {
    for p in [&a.config, &a.model, &a.weights].into_iter().flatten() {
        require_file(p)?;
    }
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(w) = &a.weights {
        cfg.weights = read_weights(w)?;
    }
    if let Some(c) = a.channels {
        cfg.channels = c;
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    if let Some(m) = &a.model {
        cfg.model_path = Some(m.clone());
    }
    let model = match &cfg.model_path {
        Some(p) => load_model(p)?,
        None => builtin_model(),
    };
    Extractor::new(cfg, model)
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

fn open_image(p: &Path) -> Result<DynamicImage> {
    image::open(p).map_err(|e| match e {
        image::ImageError::IoError(source) => Error::io(p, source),
        other => Error::Decode(format!("{}: {other}", p.display())),
    })
}

fn save_png(img: &DynamicImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(source) => Error::io(path, source),
        other => Error::Decode(format!("{}: {other}", path.display())),
    })
}

fn extract(a: ExtractArgs, verbose: bool) -> Result<()> {
    for p in &a.images {
        require_file(p)?;
    }
    let mut ex = build_extractor(&a.pipeline)?;
    if let Some(l) = a.level {
        ex.config.output_level = l;
    }
    if let Some(t) = a.threshold {
        ex.model.accept_threshold = t;
    }
    make_out(&a.out)?;
    a.images
        .par_iter()
        .map(|path| {
            let img = open_image(path)?;
            let out = ex.extract(&img)?;
            let name = stem(path);
            save_png(&DynamicImage::ImageLuma8(out.mask.clone()), &a.out.join(format!("{name}_mask.png")))?;
            write_rects_jsonl(&a.out.join(format!("{name}_rects.jsonl")), &out.rects)?;
            write_text(
                &a.out.join(format!("{name}_timing.json")),
                &serde_json::to_string_pretty(&out.timing)?,
            )?;
            if a.overlay {
                let rects: Vec<RotatedRect> = out.rects.iter().map(|r| r.rect()).collect();
                let drawn = draw_overlay(&img, &rects);
                save_png(&DynamicImage::ImageRgb8(drawn), &a.out.join(format!("{name}_overlay.png")))?;
            }
            if verbose {
                eprintln!(
                    "{}: {} groups in {:.1} ms",
                    path.display(),
                    out.rects.len(),
                    out.timing.total_ms
                );
            }
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(())
}

/// Rectangle outlines drawn in red over the input.
pub fn draw_overlay(image: &DynamicImage, rects: &[RotatedRect]) -> RgbImage {
    let mut out = image.to_rgb8();
    let (w, h) = (out.width() as i64, out.height() as i64);
    for r in rects {
        let c = r.corners();
        for i in 0..4 {
            let (a, b) = (c[i], c[(i + 1) % 4]);
            let steps = (b.x - a.x).abs().max((b.y - a.y).abs()).ceil().max(1.0) as usize;
            for k in 0..=steps {
                let t = k as f64 / steps as f64;
                let x = (a.x + t * (b.x - a.x)).floor() as i64;
                let y = (a.y + t * (b.y - a.y)).floor() as i64;
                if x >= 0 && y >= 0 && x < w && y < h {
                    out.put_pixel(x as u32, y as u32, Rgb([255, 0, 0]));
                }
            }
        }
    }
    out
}

fn load_corpus(dir: &Path) -> Result<(Corpus, Vec<(DynamicImage, GroundTruth)>)> {
    require_dir(dir)?;
    let corpus = Corpus::open(dir)?;
    if corpus.is_empty() {
        return Err(Error::DataFormat(format!("corpus {} is empty", dir.display())));
    }
    let samples = corpus.load_all()?;
    Ok((corpus, samples))
}

fn train_weights(a: TrainWeightsArgs, verbose: bool) -> Result<()> {
    if let Some(p) = &a.search {
        require_file(p)?;
    }
    if a.diversify == 0 {
        return Err(Error::InvalidInput("--diversify must be at least 1".into()));
    }
    let (_, samples) = load_corpus(&a.corpus)?;
    let search: SearchConfig = match &a.search {
        Some(p) => read_json(p)?,
        None => SearchConfig::default(),
    };
    make_out(&a.out)?;
    let params = crate::imageproc::MserParams::default();
    let mut training = Vec::new();
    for (img, gt) in &samples {
        for ch in select_channels(img, a.channels)? {
            let regions = channel_regions(&ch, &params)?;
            training.push(TrainingSample::from_regions(&regions, gt));
        }
    }
    let found = diversify_weights(&training, a.diversify, &search)?;
    if verbose {
        for f in &found {
            eprintln!("{}: {:?} tgr {:.4} ({} evaluations)", f.weights.label, f.weights.w, f.tgr, f.evaluations);
        }
    }
    let weights: Vec<WeightConfig> = found.into_iter().map(|f| f.weights).collect();
    write_text(&a.out.join("weights.json"), &serde_json::to_string_pretty(&weights)?)
}

fn train_classifier_cmd(a: TrainClassifierArgs, verbose: bool) -> Result<()> {
    if let Some(p) = &a.weights {
        require_file(p)?;
    }
    let (_, samples) = load_corpus(&a.corpus)?;
    let w = match &a.weights {
        Some(p) => read_weights(p)?.remove(0),
        None => default_optimal_weights(),
    };
    make_out(&a.out)?;
    let hc = HarvestConfig {
        channels: a.channels,
        ..HarvestConfig::default()
    };
    let harvest = harvest_corpus(&samples, &w, &hc)?;
    if verbose {
        eprintln!(
            "harvested {} positives and {} negatives",
            harvest.positives.len(),
            harvest.negatives.len()
        );
    }
    let tc = ClassifierTraining {
        rounds: a.rounds,
        hard_negatives: a.hard_negatives,
        seed: a.seed,
    };
    let model = train_classifier(&harvest, &tc)?;
    write_text(&a.out.join("model.json"), &model.to_json())
}

fn gen_synthetic(a: GenSyntheticArgs, verbose: bool) -> Result<()> {
    if let Some(p) = &a.spec {
        require_file(p)?;
    }
    let mut spec: SyntheticSpec = match &a.spec {
        Some(p) => read_json(p)?,
        None => SyntheticSpec::default(),
    };
    if a.distractors {
        spec.distractors = true;
    }
    spec.validate()?;
    make_out(&a.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let seeds: Vec<u64> = (0..a.count).map(|_| rng.gen()).collect();
    let entries = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let (img, gt) = generate_synthetic(s, &spec)?;
            write_sample(&a.out, &format!("{i:05}"), &img, &gt)
        })
        .collect::<Result<Vec<_>>>()?;
    write_manifest(&a.out, &Manifest { samples: entries })?;
    if verbose {
        eprintln!("wrote {} samples to {}", a.count, a.out.display());
    }
    Ok(())
}

/// Word rectangles of the ground truth.
pub fn truth_rects(gt: &GroundTruth) -> Vec<RotatedRect> {
    let pixels = gt.char_pixels();
    gt.groups_at(GroupLevel::Word)
        .filter_map(|g| {
            pixel_min_area_rect(
                g.members
                    .iter()
                    .filter_map(|c| pixels.get(c))
                    .flat_map(|v| v.iter().copied()),
            )
        })
        .collect()
}

fn evaluate(a: EvaluateArgs, verbose: bool) -> Result<()> {
    require_dir(&a.outputs)?;
    let (corpus, samples) = load_corpus(&a.corpus)?;
    make_out(&a.out)?;
    let mut images = Vec::new();
    for (entry, (_, gt)) in corpus.manifest.samples.iter().zip(&samples) {
        let mask_path = a.outputs.join(format!("{}_mask.png", entry.id));
        let mask = open_image(&mask_path)?.to_luma8();
        let pixel = pixel_score(&mask, &gt.mask())?;
        let rect_path = a.outputs.join(format!("{}_rects.jsonl", entry.id));
        let localization = if rect_path.is_file() {
            let found: Vec<RotatedRect> = read_rects_jsonl(&rect_path)?.iter().map(|r| r.rect()).collect();
            Some(localization_score(&found, &truth_rects(gt)))
        } else {
            None
        };
        images.push(ImageReport {
            id: entry.id.clone(),
            pixel,
            localization,
        });
    }
    let report = CorpusReport::new(images);
    if verbose {
        eprintln!("mean pixel f-score {:.4}", report.mean_pixel_fscore);
    }
    write_text(&a.out.join("report.json"), &report.to_json())
}

fn sweep(a: SweepArgs, verbose: bool) -> Result<()> {
    if a.steps < 2 || !(a.from < a.to) {
        return Err(Error::InvalidInput("a sweep needs --from < --to and --steps >= 2".into()));
    }
    let ex = build_extractor(&a.pipeline)?;
    let (_, samples) = load_corpus(&a.corpus)?;
    make_out(&a.out)?;
    let analyses = samples
        .par_iter()
        .map(|(img, gt)| Ok((ex.analyze(img)?, gt.mask())))
        .collect::<Result<Vec<_>>>()?;
    let thresholds: Vec<f64> = (0..a.steps)
        .map(|i| a.from + (a.to - a.from) * i as f64 / (a.steps - 1) as f64)
        .collect();
    let points = pr_sweep(&ex, &analyses, &thresholds)?;
    if verbose {
        for p in &points {
            eprintln!("{:.3}: p {:.4} r {:.4}", p.threshold, p.precision, p.recall);
        }
    }
    write_sweep_csv(&a.out.join("sweep.csv"), &points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["hiertext"]), 1);
        assert_eq!(run(["hiertext", "frobnicate"]), 1);
        assert_eq!(run(["hiertext", "extract", "--out", "x"]), 1);
        assert_eq!(run(["hiertext", "--help"]), 0);
    }

    #[test]
    fn missing_input_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let code = run([
            "hiertext".as_ref(),
            "extract".as_ref(),
            "--out".as_ref(),
            out.as_os_str(),
            dir.path().join("missing.png").as_os_str(),
        ]);
        assert_eq!(code, 2);
        assert!(!out.exists());
    }
}
