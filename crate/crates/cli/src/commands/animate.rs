use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use sedtalker_core::animator::{animate, synth_dataset, train_animator, Animator, StepRecord};
use sedtalker_core::diarization::EmotionTimeline;
use sedtalker_core::io::{animator_checkpoint, read_tensor_file, restore_animator, write_atomic, write_mesh_file, Checkpoint};
use sedtalker_core::numeric::RngStream;
use sedtalker_core::sed::FeatureSequence;
use sedtalker_core::Error;

use crate::commands::{ensure_dir, read_template, TemplateFile};
use crate::config::RunConfig;
use crate::output::render;

const MODEL_INIT_STREAM: u64 = 3;

#[derive(Args)]
pub struct TrainAnimatorArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct AnimatorHistory<'a> {
    samples: usize,
    steps: &'a [StepRecord],
}

/// Trains on the synthetic set and writes `anim.ckpt`, `template.json` and
/// `history.json`. Zero epochs give the initial (template-only) model.
pub fn train(args: &TrainAnimatorArgs, config: &RunConfig) -> Result<()> {
    let a = &config.animator;
    if a.synth.audio_dim != a.model.audio_dim || a.synth.lip_dim != a.model.lip_dim {
        bail!(Error::Config(format!(
            "synthetic data widths (audio {}, lip {}) differ from the model's (audio {}, lip {})",
            a.synth.audio_dim, a.synth.lip_dim, a.model.audio_dim, a.model.lip_dim
        )));
    }
    let data = synth_dataset(config.seed, a.synth);
    let mut model = Animator::new(a.model, &data.template, &mut RngStream::new(config.seed).fork(MODEL_INIT_STREAM))?;
    let steps = train_animator(&mut model, &data.samples, &data.template, &a.train, config.seed)?;

    let hash = config.hash();
    let template = render(&TemplateFile::from_mesh(&data.template), &hash)?;
    let history = render(&AnimatorHistory { samples: data.samples.len(), steps: &steps }, &hash)?;
    let ckpt = animator_checkpoint(&model, a.checkpoint_dtype)?;
    ensure_dir(&args.out_dir)?;
    ckpt.save(&args.out_dir.join("anim.ckpt"))?;
    write_atomic(&args.out_dir.join("template.json"), &template)?;
    write_atomic(&args.out_dir.join("history.json"), &history)?;
    Ok(())
}

#[derive(Args)]
pub struct AnimateArgs {
    /// Audio feature file (T×D at the configured frame period).
    #[arg(long)]
    pub features: PathBuf,
    /// Timeline from `diarize`.
    #[arg(long)]
    pub timeline: PathBuf,
    /// Template JSON: {positions: [[x, y, z], ...], lip_indices, upper_indices}.
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output mesh sequence (SEDM).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &AnimateArgs, config: &RunConfig) -> Result<()> {
    let model = restore_animator(&Checkpoint::load(&args.checkpoint)?)?;
    let template = read_template(&args.template)?;
    let text = std::fs::read_to_string(&args.timeline).with_context(|| format!("cannot read {}", args.timeline.display()))?;
    let timeline = EmotionTimeline::from_json(&text)?;
    let features = FeatureSequence::new(config.diarization.frame_period, read_tensor_file(&args.features)?)?;
    let seq = animate(&features, &timeline, &template, &model, config.diarization.transition_frames)?;
    write_mesh_file(&args.out, &seq)?;
    Ok(())
}
