use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use sedtalker_core::corpus::{
    stratified_split, EmotionClass, LabeledRecord, SourceDataset, Split, UtteranceRecord, FRAME_PERIOD, NUM_CLASSES,
};
use sedtalker_core::diarization::{frames_to_segments, smooth_timeline, EmotionTimeline};
use sedtalker_core::io::{
    read_tensor_file, restore_sed_head, restore_sed_trainer, sed_trainer_checkpoint, write_atomic, write_tensor_file,
    Checkpoint,
};
use sedtalker_core::numeric::RngStream;
use sedtalker_core::sed::{
    accuracy, bootstrap_ci, class_weights_from_set, classification_report, predict, synthetic_set, weighted_f1,
    ClassificationReport, EpochStats, FeatureSequence, SedHead, SedTrainer, Utterance,
};
use sedtalker_core::Error;

use crate::commands::ensure_dir;
use crate::commands::prepare::{SplitsFile, WeightsFile};
use crate::config::RunConfig;
use crate::output::{read_json, read_value, render, write_json};

const HEAD_INIT_STREAM: u64 = 1;
const SYNTH_SAMPLE_STREAM: u64 = 2;

#[derive(Args)]
pub struct SynthSedArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Writes `features/<id>.sedt` and a `splits.json` shaped like `prepare`'s.
pub fn synth(args: &SynthSedArgs, config: &RunConfig) -> Result<()> {
    let cfg = config.sed.synthetic;
    let sample_seed = RngStream::new(config.seed).fork(SYNTH_SAMPLE_STREAM).seed();
    let set = synthetic_set(cfg, config.seed, sample_seed);
    let mut records: Vec<LabeledRecord> = set
        .iter()
        .map(|u| LabeledRecord {
            record: UtteranceRecord {
                id: u.id.clone(),
                source: SourceDataset::Esd,
                raw_label: u.class().name().to_string(),
                duration: u.features.rows() as f64 * FRAME_PERIOD,
                speaker: "synthetic".into(),
                split: Split::Unassigned,
            },
            emotion: u.class(),
        })
        .collect();
    stratified_split(&mut records, config.corpus.split, config.seed)?;
    let splits = render(&SplitsFile { records }, &config.hash())?;

    let feat_dir = args.out_dir.join("features");
    ensure_dir(&feat_dir)?;
    for u in &set {
        write_tensor_file(&feat_dir.join(format!("{}.sedt", u.id)), &u.features)?;
    }
    write_atomic(&args.out_dir.join("splits.json"), &splits)?;
    Ok(())
}

#[derive(Args)]
pub struct TrainSedArgs {
    /// Directory of `<id>.sedt` feature files (T×D, one row per 20 ms frame).
    #[arg(long)]
    pub features: PathBuf,
    /// `splits.json` from `prepare`; utterance labels propagate to every frame.
    #[arg(long)]
    pub splits: PathBuf,
    /// `weights.json` from `prepare`; computed from the training split when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Trainer checkpoint to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Serialize)]
struct HistoryFile<'a> {
    epochs_completed: usize,
    class_weights: sedtalker_core::corpus::ClassWeights,
    history: &'a [EpochStats],
}

fn load_split(splits: &SplitsFile, split: Split, dir: &Path) -> Result<Vec<Utterance>> {
    splits
        .of(split)
        .map(|r| {
            let path = dir.join(format!("{}.sedt", r.record.id));
            let features = read_tensor_file(&path)?;
            if features.shape().len() != 2 || features.rows() == 0 {
                bail!(Error::Dimension(format!("{}: expected a non-empty T×D matrix, got {:?}", path.display(), features.shape())));
            }
            Ok(Utterance { id: r.record.id.clone(), labels: vec![r.emotion; features.rows()], features })
        })
        .collect()
}

pub fn train(args: &TrainSedArgs, config: &RunConfig) -> Result<()> {
    let splits = SplitsFile::read(&args.splits)?;
    let train = load_split(&splits, Split::Train, &args.features)?;
    let val = load_split(&splits, Split::Val, &args.features)?;
    if train.is_empty() || val.is_empty() {
        bail!(Error::EmptyInput("training and validation splits must both be non-empty".into()));
    }

    let mut trainer = match &args.resume {
        Some(p) => {
            let mut t = restore_sed_trainer(&Checkpoint::load(p)?)?;
            let wanted = sedtalker_core::sed::SedTrainConfig { max_epochs: t.config.max_epochs, ..config.sed.train };
            if t.config != wanted || t.head.config != config.sed.head {
                bail!(Error::Config("resumed checkpoint was trained with a different sed configuration".into()));
            }
            t.config.max_epochs = config.sed.train.max_epochs;
            t
        }
        None => {
            let weights = match &args.weights {
                Some(p) => read_json::<WeightsFile>(p)?.weights,
                None => class_weights_from_set(&train)?,
            };
            let head = SedHead::new(config.sed.head, &mut RngStream::new(config.seed).fork(HEAD_INIT_STREAM))?;
            SedTrainer::new(head, config.sed.train, weights, config.seed)?
        }
    };
    let dim = trainer.head.config.input_dim;
    if let Some(u) = train.iter().chain(&val).find(|u| u.features.cols() != dim) {
        bail!(Error::Dimension(format!("utterance `{}` has {} feature columns, head expects {dim}", u.id, u.features.cols())));
    }
    trainer.run(&train, &val)?;

    let history = render(
        &HistoryFile { epochs_completed: trainer.epoch, class_weights: trainer.weights, history: &trainer.history },
        &config.hash(),
    )?;
    let ckpt = sed_trainer_checkpoint(&trainer)?;
    ensure_dir(&args.out_dir)?;
    ckpt.save(&args.out_dir.join("sed.ckpt"))?;
    write_atomic(&args.out_dir.join("history.json"), &history)?;
    Ok(())
}

#[derive(Args)]
pub struct DiarizeArgs {
    /// Feature file (T×D at the configured frame period).
    #[arg(long)]
    pub features: PathBuf,
    /// Classifier or trainer checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the T×7 per-frame posteriors here.
    #[arg(long)]
    pub posteriors: Option<PathBuf>,
    /// Also write the per-frame argmax labels here, in `report-sed` input form.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
pub struct LabelsFile {
    pub labels: Vec<EmotionClass>,
}

pub fn diarize(args: &DiarizeArgs, config: &RunConfig) -> Result<()> {
    let head = restore_sed_head(&Checkpoint::load(&args.checkpoint)?)?;
    let frames = read_tensor_file(&args.features)?;
    let features = FeatureSequence::new(config.diarization.frame_period, frames)?;
    let post = predict(&head, &features)?;
    let segments = frames_to_segments(&post, &config.diarization)?;
    let timeline: EmotionTimeline = smooth_timeline(&segments, &config.diarization, features.duration())?;

    let hash = config.hash();
    let body = render(&timeline, &hash)?;
    let labels = args.labels.as_ref().map(|_| render(&LabelsFile { labels: post.argmax() }, &hash)).transpose()?;
    if let Some(p) = &args.posteriors {
        write_tensor_file(p, &post.probs)?;
    }
    if let (Some(p), Some(bytes)) = (&args.labels, labels) {
        write_atomic(p, &bytes)?;
    }
    write_atomic(&args.out, &body)?;
    Ok(())
}

#[derive(Args)]
pub struct ReportSedArgs {
    /// Predicted frame labels: a JSON array of class names or ids, or `{"labels": [...]}`.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Interval {
    point: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct BootstrapSummary {
    resamples: usize,
    level: f64,
    seed: u64,
    accuracy: Interval,
    weighted_f1: Interval,
}

#[derive(Serialize)]
struct SedReport {
    report: ClassificationReport,
    bootstrap: BootstrapSummary,
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let v = read_value(path)?;
    let arr = match &v {
        Value::Array(a) => a,
        Value::Object(m) => match m.get("labels") {
            Some(Value::Array(a)) => a,
            _ => bail!(Error::Input(format!("{}: expected a `labels` array", path.display()))),
        },
        _ => bail!(Error::Input(format!("{}: expected a label array", path.display()))),
    };
    arr.iter()
        .enumerate()
        .map(|(i, x)| {
            let class = match x {
                Value::String(s) => s.parse::<EmotionClass>().ok(),
                Value::Number(n) => n.as_u64().and_then(|id| EmotionClass::from_id(id as usize)),
                _ => None,
            };
            class
                .map(|c| c.id())
                .ok_or_else(|| Error::Input(format!("{}: label {i} ({x}) is not one of the {NUM_CLASSES} classes", path.display())).into())
        })
        .collect::<Result<Vec<_>>>()
        .with_context(|| format!("reading labels from {}", path.display()))
}

pub fn report(args: &ReportSedArgs, config: &RunConfig) -> Result<()> {
    let pred = read_labels(&args.pred)?;
    let truth = read_labels(&args.truth)?;
    let report = classification_report(&pred, &truth, NUM_CLASSES)?;
    let m = config.metrics;
    let acc = bootstrap_ci(accuracy, &pred, &truth, m.bootstrap_resamples, m.ci_level, config.seed)?;
    let wf1 = bootstrap_ci(|p, t| weighted_f1(p, t, NUM_CLASSES), &pred, &truth, m.bootstrap_resamples, m.ci_level, config.seed)?;
    let body = SedReport {
        bootstrap: BootstrapSummary {
            resamples: m.bootstrap_resamples,
            level: m.ci_level,
            seed: config.seed,
            accuracy: Interval { point: report.accuracy, lower: acc.0, upper: acc.1 },
            weighted_f1: Interval { point: report.weighted.f1, lower: wf1.0, upper: wf1.1 },
        },
        report,
    };
    write_json(&args.out, &body, &config.hash())
}
