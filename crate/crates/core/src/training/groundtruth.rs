//! Ground truth for one image and the on-disk corpus layout.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postproc::GroupLevel;

pub type LabelImage = ImageBuffer<Luma<u16>, Vec<u16>>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtGroup {
    pub id: u32,
    pub level: GroupLevel,
    /// Character ids from the label image.
    pub members: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// Every character carries a unique positive id; background is 0.
    pub labels: LabelImage,
    pub groups: Vec<GtGroup>,
}

#[derive(Serialize, Deserialize)]
struct GroupsFile {
    groups: Vec<GtGroup>,
}

impl GroundTruth {
    pub fn new(labels: LabelImage, groups: Vec<GtGroup>) -> Result<Self> {
        let present: HashSet<u32> = labels.pixels().map(|p| u32::from(p.0[0])).filter(|&v| v > 0).collect();
        let mut seen: HashMap<GroupLevel, HashSet<u32>> = HashMap::new();
        for g in &groups {
            if g.members.is_empty() {
                return Err(Error::DataFormat(format!("group {} has no members", g.id)));
            }
            let used = seen.entry(g.level).or_default();
            for m in &g.members {
                if !present.contains(m) {
                    return Err(Error::DataFormat(format!(
                        "group {} references character {m} missing from the label image",
                        g.id
                    )));
                }
                if !used.insert(*m) {
                    return Err(Error::DataFormat(format!(
                        "character {m} belongs to two {} groups",
                        g.level.name()
                    )));
                }
            }
        }
        Ok(GroundTruth { labels, groups })
    }

    pub fn width(&self) -> u32 {
        self.labels.width()
    }

    pub fn height(&self) -> u32 {
        self.labels.height()
    }

    /// Text pixels as a 0/255 mask.
    pub fn mask(&self) -> GrayImage {
        GrayImage::from_fn(self.width(), self.height(), |x, y| {
            Luma([if self.labels.get_pixel(x, y).0[0] > 0 { 255 } else { 0 }])
        })
    }

    /// Pixel count per character id.
    pub fn char_areas(&self) -> HashMap<u32, usize> {
        let mut areas = HashMap::new();
        for p in self.labels.pixels() {
            if p.0[0] > 0 {
                *areas.entry(u32::from(p.0[0])).or_insert(0) += 1;
            }
        }
        areas
    }

    /// Row-major pixels of every character.
    pub fn char_pixels(&self) -> BTreeMap<u32, Vec<(u32, u32)>> {
        let mut out: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
        for (x, y, p) in self.labels.enumerate_pixels() {
            if p.0[0] > 0 {
                out.entry(u32::from(p.0[0])).or_default().push((x, y));
            }
        }
        out
    }

    pub fn groups_at(&self, level: GroupLevel) -> impl Iterator<Item = &GtGroup> {
        self.groups.iter().filter(move |g| g.level == level)
    }

    pub fn groups_json(&self) -> String {
        serde_json::to_string_pretty(&GroupsFile {
            groups: self.groups.clone(),
        })
        .expect("groups serialize")
    }

    pub fn save(&self, label_path: &Path, groups_path: &Path) -> Result<()> {
        self.labels.save(label_path).map_err(|e| image_err(label_path, e))?;
        std::fs::write(groups_path, self.groups_json()).map_err(|e| Error::io(groups_path, e))
    }

    pub fn load(label_path: &Path, groups_path: &Path) -> Result<Self> {
        let img = image::open(label_path).map_err(|e| image_err(label_path, e))?;
        let labels = match img {
            DynamicImage::ImageLuma16(l) => l,
            DynamicImage::ImageLuma8(l) => {
                ImageBuffer::from_fn(l.width(), l.height(), |x, y| Luma([u16::from(l.get_pixel(x, y).0[0])]))
            }
            _ => {
                return Err(Error::DataFormat(format!(
                    "{} is not a single-channel label image",
                    label_path.display()
                )))
            }
        };
        let text = std::fs::read_to_string(groups_path).map_err(|e| Error::io(groups_path, e))?;
        let groups: GroupsFile = serde_json::from_str(&text)?;
        GroundTruth::new(labels, groups.groups)
    }
}

fn image_err(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(source) => Error::io(path, source),
        other => Error::Decode(format!("{}: {other}", path.display())),
    }
}

/// Intersection over union of two pixel sets.
pub fn region_match(region: &[(u32, u32)], gt: &[(u32, u32)]) -> f64 {
    let a: HashSet<&(u32, u32)> = region.iter().collect();
    let b: HashSet<&(u32, u32)> = gt.iter().collect();
    let inter = a.intersection(&b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Overlap a region must exceed to count as a ground-truth character.
pub const CHAR_MATCH: f64 = 0.9;

/// The character a region matches with overlap above [`CHAR_MATCH`], if any.
/// Overlap above one half is unique, so only the dominant label is checked.
pub fn match_char(pixels: &[(u32, u32)], gt: &GroundTruth, areas: &HashMap<u32, usize>) -> Option<u32> {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &(x, y) in pixels {
        if x < gt.width() && y < gt.height() {
            let l = u32::from(gt.labels.get_pixel(x, y).0[0]);
            if l > 0 {
                *counts.entry(l).or_insert(0) += 1;
            }
        }
    }
    let (&label, &inter) = counts.iter().max_by_key(|(l, c)| (**c, std::cmp::Reverse(**l)))?;
    let union = pixels.len() + areas[&label] - inter;
    (inter as f64 / union as f64 > CHAR_MATCH).then_some(label)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: String,
    pub label: String,
    pub groups: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub samples: Vec<ManifestEntry>,
}

/// A directory of `(image, label, groups)` triples listed in
/// `manifest.json`.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub root: PathBuf,
    pub manifest: Manifest,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Corpus {
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Corpus {
            root: root.to_path_buf(),
            manifest: serde_json::from_str(&text)?,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.samples.is_empty()
    }

    pub fn load_image(&self, entry: &ManifestEntry) -> Result<DynamicImage> {
        let path = self.root.join(&entry.image);
        image::open(&path).map_err(|e| image_err(&path, e))
    }

    pub fn load_truth(&self, entry: &ManifestEntry) -> Result<GroundTruth> {
        GroundTruth::load(&self.root.join(&entry.label), &self.root.join(&entry.groups))
    }

    pub fn load(&self, entry: &ManifestEntry) -> Result<(DynamicImage, GroundTruth)> {
        let image = self.load_image(entry)?;
        let truth = self.load_truth(entry)?;
        if (image.width(), image.height()) != (truth.width(), truth.height()) {
            return Err(Error::DataFormat(format!(
                "sample {}: image and label sizes differ",
                entry.id
            )));
        }
        Ok((image, truth))
    }

    pub fn load_all(&self) -> Result<Vec<(DynamicImage, GroundTruth)>> {
        self.manifest.samples.iter().map(|e| self.load(e)).collect()
    }
}

/// Writes one sample next to the others and returns its manifest entry.
pub fn write_sample(root: &Path, id: &str, image: &DynamicImage, gt: &GroundTruth) -> Result<ManifestEntry> {
    let entry = ManifestEntry {
        id: id.to_string(),
        image: format!("{id}.png"),
        label: format!("{id}_label.png"),
        groups: format!("{id}_groups.json"),
    };
    let img_path = root.join(&entry.image);
    image.save(&img_path).map_err(|e| image_err(&img_path, e))?;
    gt.save(&root.join(&entry.label), &root.join(&entry.groups))?;
    Ok(entry)
}

pub fn write_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    let path = root.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
