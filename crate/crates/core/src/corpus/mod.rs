//! Corpus metadata: taxonomy mapping, class weights, frame propagation,
//! stratified splits and distribution stats.

pub mod frames;
pub mod manifest;
pub mod split;
pub mod stats;
pub mod taxonomy;
pub mod weights;

pub use frames::{frame_count, propagate_frames, propagate_labeled, FrameLabelSequence, FRAME_PERIOD};
pub use manifest::{label_records, read_manifest, LabeledRecord, Split, UtteranceRecord};
pub use split::{stratified_split, SplitRatios};
pub use stats::{corpus_stats, stats_from_counts, ClassStats, CorpusStats};
pub use taxonomy::{EmotionClass, LabelMapping, SourceDataset, NUM_CLASSES};
pub use weights::{compute_class_weights, count_classes, inverse_frequency_weights, ClassCounts, ClassWeights};
