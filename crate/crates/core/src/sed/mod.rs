//! Frame-level emotion classifier, its training loop, label smoothing and
//! classification reporting.

pub mod bootstrap;
pub mod head;
pub mod loss;
pub mod report;
pub mod smooth;
pub mod synthetic;
pub mod train;

pub use bootstrap::bootstrap_ci;
pub use head::{head_forward, predict, FeatureSequence, HeadCache, PosteriorSequence, SedHead, SedHeadConfig};
pub use loss::weighted_frame_ce;
pub use report::{accuracy, classification_report, confusion_counts, weighted_f1, ClassScores, ClassificationReport, ConfusionMatrix, WeightedScores};
pub use smooth::{majority_pass, smooth_predictions};
pub use synthetic::{cluster_centers, synthetic_set, SyntheticSetConfig};
pub use train::{class_weights_from_set, evaluate_set, train_sed, EpochStats, SedTrainConfig, SedTrainer, Utterance};
