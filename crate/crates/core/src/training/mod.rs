//! Ground truth, text group recall, weight search, classifier data
//! harvesting and the synthetic scene generator.

mod groundtruth;
mod harvest;
mod search;
mod synthetic;
mod tgr;

pub use groundtruth::{
    match_char, region_match, write_manifest, write_sample, Corpus, GroundTruth, GtGroup, LabelImage, Manifest,
    ManifestEntry, CHAR_MATCH, MANIFEST_FILE,
};
pub use harvest::{
    harvest_corpus, harvest_dendrogram, harvest_image, node_match_fraction, train_classifier, truth_group_features,
    ClassifierTraining, Harvest, HarvestConfig,
};
pub use search::{combined_tgr, corpus_tgr, diversify_weights, optimize_weights, SearchConfig, SearchOutcome};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use tgr::{group_contributions, text_group_recall, TrainingSample};
