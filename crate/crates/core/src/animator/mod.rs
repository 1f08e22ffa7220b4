//! Emotion-conditioned audio-to-vertex model, its lip/CTC pathway, composite
//! loss, toy training and inference.

pub mod ctc;
pub mod infer;
pub mod mesh;
pub mod model;
pub mod synth;
pub mod train;

pub use ctc::{ctc_loss, CharSequence, BLANK};
pub use infer::{animate, features_to_animation_rate};
pub use mesh::{TemplateMesh, VertexSequence};
pub use model::{composite_loss, Animator, AnimatorConfig, CompositeLoss, ForwardPass, LossBreakdown, LossWeights};
pub use synth::{state_amplitude, state_frequency, synth_dataset, synth_template, AnimatorSample, SynthConfig, SynthDataset};
pub use train::{sample_loss_and_grad, train_animator, AnimatorTrainConfig, StepRecord};
