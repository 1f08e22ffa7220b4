use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;

use sedtalker_core::io::{read_mesh_file, write_atomic};
use sedtalker_core::metrics::{all_metrics, full_report, EvalPair, MeshRegions};
use sedtalker_core::Error;

use crate::commands::{file_stem, list_files, read_template};
use crate::config::RunConfig;
use crate::output::{read_json, render};

const DEFAULT_TAG: &str = "all";

#[derive(Args)]
pub struct EvaluateArgs {
    /// Directory of predicted `<id>.sedm` files.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth `<id>.sedm` files; every id must exist in both.
    #[arg(long)]
    pub truth: PathBuf,
    /// Template JSON whose lip and upper-face sets define the regions.
    #[arg(long, conflicts_with = "regions", required_unless_present = "regions")]
    pub template: Option<PathBuf>,
    /// Region JSON {lip: [...], upper: [...]}.
    #[arg(long)]
    pub regions: Option<PathBuf>,
    /// JSON object mapping sequence id to a group tag (usually its emotion).
    #[arg(long)]
    pub tags: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write one CSV row of metrics per sequence.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    sequence: &'a str,
    tag: &'a str,
    frames: usize,
    mve: f64,
    lve: f64,
    eve: f64,
    ffe: f64,
    fdd: f64,
    fdd_abs: f64,
    #[serde(rename = "mod")]
    mod_: f64,
    ae: f64,
    tc: f64,
}

pub fn run(args: &EvaluateArgs, config: &RunConfig) -> Result<()> {
    let regions: MeshRegions = match (&args.template, &args.regions) {
        (Some(t), _) => MeshRegions::from_template(&read_template(t)?),
        (None, Some(r)) => read_json(r)?,
        (None, None) => bail!("either --template or --regions is required"),
    };
    let tags: BTreeMap<String, String> = match &args.tags {
        Some(p) => read_json(p)?,
        None => BTreeMap::new(),
    };

    let truth_files = list_files(&args.truth, "sedm")?;
    let pred_files = list_files(&args.pred, "sedm")?;
    let truth_ids = truth_files.iter().map(|p| file_stem(p)).collect::<Result<Vec<_>>>()?;
    let pred_ids = pred_files.iter().map(|p| file_stem(p)).collect::<Result<Vec<_>>>()?;
    if truth_ids != pred_ids {
        let missing: Vec<&String> = truth_ids.iter().filter(|id| !pred_ids.contains(id)).collect();
        let extra: Vec<&String> = pred_ids.iter().filter(|id| !truth_ids.contains(id)).collect();
        bail!(Error::Input(format!("prediction and truth directories differ: missing {missing:?}, unexpected {extra:?}")));
    }
    if truth_ids.is_empty() {
        bail!(Error::EmptyInput(format!("no .sedm files in {}", args.truth.display())));
    }

    let mut seqs = Vec::with_capacity(truth_ids.len());
    for (p, t) in pred_files.iter().zip(&truth_files) {
        seqs.push((read_mesh_file(p)?, read_mesh_file(t)?));
    }
    let tag_of = |id: &str| tags.get(id).map(String::as_str).unwrap_or(DEFAULT_TAG);
    let pairs: Vec<EvalPair<'_>> = truth_ids
        .iter()
        .zip(&seqs)
        .map(|(id, (pred, truth))| EvalPair { tag: tag_of(id), pred, truth })
        .collect();
    let report = render(&full_report(&pairs, &regions)?, &config.hash())?;

    let csv = match &args.csv {
        Some(_) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for (id, p) in truth_ids.iter().zip(&pairs) {
                let m = all_metrics(p.pred, p.truth, &regions)?;
                w.serialize(CsvRow {
                    sequence: id,
                    tag: p.tag,
                    frames: p.pred.len(),
                    mve: m.mve,
                    lve: m.lve,
                    eve: m.eve,
                    ffe: m.ffe,
                    fdd: m.fdd,
                    fdd_abs: m.fdd_abs,
                    mod_: m.mod_,
                    ae: m.ae,
                    tc: m.tc,
                })?;
            }
            Some(w.into_inner()?)
        }
        None => None,
    };
    if let (Some(path), Some(bytes)) = (&args.csv, csv) {
        write_atomic(path, &bytes)?;
    }
    write_atomic(&args.out, &report)?;
    Ok(())
}
