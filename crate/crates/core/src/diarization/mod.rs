//! Posterior sequences to cleaned emotion timelines, and timelines to
//! per-frame conditioning vectors.

pub mod conditioning;
pub mod timeline;

pub use conditioning::{
    build_conditioning, build_conditioning_frames, conditioning_frames, ConditioningSequence, EmotionIntensityTable,
    EmotionState, FrameMix,
};
pub use timeline::{
    estimate_intensity, frames_to_segments, smooth_timeline, EmotionSegment, EmotionTimeline, TimelineConfig,
};
