use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use sedtalker_core::corpus::{
    compute_class_weights, corpus_stats, count_classes, label_records, read_manifest, stratified_split, ClassWeights,
    CorpusStats, EmotionClass, LabelMapping, LabeledRecord, Split,
};
use sedtalker_core::Error;

use crate::commands::ensure_dir;
use crate::config::RunConfig;
use crate::output::{render, read_json};

#[derive(Args)]
pub struct PrepareArgs {
    /// CSV with columns id,source,raw_label,duration_s,speaker.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Label mapping JSON; the built-in table when omitted.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
pub struct SplitsFile {
    pub records: Vec<LabeledRecord>,
}

impl SplitsFile {
    pub fn read(path: &std::path::Path) -> Result<Self> {
        read_json(path)
    }

    pub fn of(&self, split: Split) -> impl Iterator<Item = &LabeledRecord> {
        self.records.iter().filter(move |r| r.record.split == split)
    }
}

#[derive(Serialize, Deserialize)]
pub struct WeightsFile {
    /// Which records the counts were taken from.
    pub basis: String,
    pub counts: BTreeMap<EmotionClass, u64>,
    pub weights: ClassWeights,
}

#[derive(Serialize)]
struct StatsFile {
    overall: CorpusStats,
    splits: BTreeMap<Split, CorpusStats>,
}

pub fn run(args: &PrepareArgs, config: &RunConfig) -> Result<()> {
    let file = std::fs::File::open(&args.manifest).with_context(|| format!("cannot open {}", args.manifest.display()))?;
    let rows = read_manifest(file)?;
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("manifest {} has no rows", args.manifest.display())).into());
    }
    let mut mapping = match &args.mapping {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            LabelMapping::from_json(&text)?
        }
        None => LabelMapping::default(),
    };
    for (label, class) in &config.corpus.label_overrides {
        mapping = mapping.with_override(label, *class);
    }
    let mut records = label_records(rows, &mapping)?;
    stratified_split(&mut records, config.corpus.split, config.seed)?;

    let train: Vec<LabeledRecord> = records.iter().filter(|r| r.record.split == Split::Train).cloned().collect();
    let counts = count_classes(train.iter().map(|r| &r.emotion));
    let weights = WeightsFile {
        basis: "train split utterance counts".into(),
        counts: EmotionClass::ALL.into_iter().map(|c| (c, counts[c.id()])).collect(),
        weights: compute_class_weights(&counts)?,
    };
    let stats = StatsFile {
        overall: corpus_stats(&records),
        splits: Split::ASSIGNED
            .into_iter()
            .map(|s| {
                let part: Vec<LabeledRecord> = records.iter().filter(|r| r.record.split == s).cloned().collect();
                (s, corpus_stats(&part))
            })
            .collect(),
    };

    let hash = config.hash();
    let outputs = [
        ("weights.json", render(&weights, &hash)?),
        ("splits.json", render(&SplitsFile { records }, &hash)?),
        ("stats.json", render(&stats, &hash)?),
    ];
    ensure_dir(&args.out_dir)?;
    for (name, bytes) in outputs {
        sedtalker_core::io::write_atomic(&args.out_dir.join(name), &bytes)?;
    }
    Ok(())
}
