use crate::animator::mesh::{TemplateMesh, VertexSequence};
use crate::animator::model::Animator;
use crate::diarization::{build_conditioning_frames, EmotionTimeline};
use crate::error::{Error, Result};
use crate::numeric::{resample::output_len, ResamplePlan, Tensor};
use crate::sed::FeatureSequence;

/// Audio features at the feature rate resampled to the animation rate.
pub fn features_to_animation_rate(features: &FeatureSequence, fps: f64) -> Result<Tensor> {
    let rate = 1.0 / features.frame_period;
    let t_in = features.len();
    if t_in == 1 {
        let n = output_len(1, rate, fps).max(1);
        let row = features.frames.row(0);
        let data: Vec<f64> = (0..n).flat_map(|_| row.iter().copied()).collect();
        return Tensor::matrix(n, row.len(), data);
    }
    ResamplePlan::new(t_in, rate, fps)?.apply(&features.frames)
}

/// Features → animation rate → timeline conditioning → backbone → vertices.
pub fn animate(
    features: &FeatureSequence,
    timeline: &EmotionTimeline,
    template: &TemplateMesh,
    model: &Animator,
    transition_frames: usize,
) -> Result<VertexSequence> {
    let audio_duration = features.duration();
    if (audio_duration - timeline.duration).abs() > features.frame_period + 1e-9 {
        return Err(Error::Alignment {
            what: "feature duration vs timeline duration (s)".into(),
            left: audio_duration,
            right: timeline.duration,
        });
    }
    let audio = features_to_animation_rate(features, model.config.fps)?;
    let cond = build_conditioning_frames(
        timeline,
        &model.table,
        &model.store,
        model.config.fps,
        transition_frames,
        audio.rows(),
    )?;
    model.animate_conditioned(&audio, &cond.vectors, template)
}
