//! Vertex-sequence evaluation metrics and their grouped report.
//!
//! All metrics compare a predicted and a ground-truth sequence of identical
//! shape and frame rate. Distances are Euclidean per vertex.

use std::collections::BTreeMap;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::animator::{TemplateMesh, VertexSequence};
use crate::error::{Error, Result};

fn check_pair(pred: &VertexSequence, truth: &VertexSequence) -> Result<()> {
    if pred.fps != truth.fps {
        return Err(Error::Alignment { what: "frame rate (fps)".into(), left: pred.fps, right: truth.fps });
    }
    if pred.len() != truth.len() {
        return Err(Error::Alignment { what: "frame count".into(), left: pred.len() as f64, right: truth.len() as f64 });
    }
    if pred.vertex_count() != truth.vertex_count() {
        return Err(Error::Alignment {
            what: "vertex count".into(),
            left: pred.vertex_count() as f64,
            right: truth.vertex_count() as f64,
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("vertex sequences have no frames".into()));
    }
    Ok(())
}

fn check_region(set: &[usize], vertices: usize, what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Input(format!("{what} index set is empty")));
    }
    if let Some(&i) = set.iter().find(|&&i| i >= vertices) {
        return Err(Error::Topology(format!("{what} index {i} out of range for {vertices} vertices")));
    }
    Ok(())
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Per-frame error vector `e_t[n] = v̂_t[n] − v_t[n]`.
fn error_at(pred: &VertexSequence, truth: &VertexSequence, t: usize, n: usize) -> [f64; 3] {
    sub3(pred.vertex(t, n), truth.vertex(t, n))
}

/// Mean vertex error over all frames and vertices.
pub fn mve(pred: &VertexSequence, truth: &VertexSequence) -> Result<f64> {
    check_pair(pred, truth)?;
    let (t_len, n) = (pred.len(), pred.vertex_count());
    let mut total = 0.0;
    for t in 0..t_len {
        for v in 0..n {
            total += norm3(error_at(pred, truth, t, v));
        }
    }
    Ok(total / (t_len * n) as f64)
}

/// Per frame, the largest error within `set`; averaged over frames.
pub fn region_max_error(pred: &VertexSequence, truth: &VertexSequence, set: &[usize], what: &str) -> Result<f64> {
    check_pair(pred, truth)?;
    check_region(set, pred.vertex_count(), what)?;
    let total: f64 = (0..pred.len())
        .map(|t| set.iter().map(|&v| norm3(error_at(pred, truth, t, v))).fold(0.0, f64::max))
        .sum();
    Ok(total / pred.len() as f64)
}

pub fn lve(pred: &VertexSequence, truth: &VertexSequence, lip_set: &[usize]) -> Result<f64> {
    region_max_error(pred, truth, lip_set, "lip")
}

pub fn eve(pred: &VertexSequence, truth: &VertexSequence, upper_set: &[usize]) -> Result<f64> {
    region_max_error(pred, truth, upper_set, "upper-face")
}

/// Mean absolute difference of one-sided DFT magnitude spectra over every
/// vertex coordinate trajectory, divided by `T`.
///
/// Bins `1..=T/2`. The DC bin is left out: it carries only the trajectory
/// mean, and including it would make the score change when both sequences
/// are translated together.
pub fn ffe(pred: &VertexSequence, truth: &VertexSequence) -> Result<f64> {
    check_pair(pred, truth)?;
    let t_len = pred.len();
    let width = 3 * pred.vertex_count();
    if t_len < 2 {
        return Ok(0.0);
    }
    let bins = t_len / 2;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(t_len);
    let mut a = vec![Complex::new(0.0, 0.0); t_len];
    let mut b = vec![Complex::new(0.0, 0.0); t_len];
    let mut total = 0.0;
    for c in 0..width {
        for t in 0..t_len {
            a[t] = Complex::new(pred.frames.row(t)[c], 0.0);
            b[t] = Complex::new(truth.frames.row(t)[c], 0.0);
        }
        fft.process(&mut a);
        fft.process(&mut b);
        total += (1..=bins).map(|k| (a[k].norm() - b[k].norm()).abs()).sum::<f64>();
    }
    Ok(total / (bins * width) as f64 / t_len as f64)
}

/// Population standard deviation of a vertex's frame-to-frame displacement
/// magnitude. Zero with fewer than two displacements.
fn motion_std(seq: &VertexSequence, v: usize) -> f64 {
    if seq.len() < 3 {
        return 0.0;
    }
    let d: Vec<f64> = (1..seq.len()).map(|t| norm3(sub3(seq.vertex(t, v), seq.vertex(t - 1, v)))).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt()
}

/// Mean over `upper_set` of `std_pred − std_truth`. Signed.
pub fn fdd(pred: &VertexSequence, truth: &VertexSequence, upper_set: &[usize]) -> Result<f64> {
    check_pair(pred, truth)?;
    check_region(upper_set, pred.vertex_count(), "upper-face")?;
    let total: f64 = upper_set.iter().map(|&v| motion_std(pred, v) - motion_std(truth, v)).sum();
    Ok(total / upper_set.len() as f64)
}

/// `order`-th forward difference of a vertex trajectory at frame `t`.
fn diff_at(seq: &VertexSequence, t: usize, v: usize, order: usize) -> [f64; 3] {
    match order {
        1 => sub3(seq.vertex(t + 1, v), seq.vertex(t, v)),
        2 => sub3(diff_at(seq, t + 1, v, 1), diff_at(seq, t, v, 1)),
        _ => unreachable!("only first and second differences are used"),
    }
}

fn difference_error(pred: &VertexSequence, truth: &VertexSequence, order: usize) -> Result<f64> {
    check_pair(pred, truth)?;
    let (t_len, n) = (pred.len(), pred.vertex_count());
    if t_len <= order {
        return Ok(0.0);
    }
    let steps = t_len - order;
    let mut total = 0.0;
    for t in 0..steps {
        for v in 0..n {
            total += norm3(sub3(diff_at(pred, t, v, order), diff_at(truth, t, v, order)));
        }
    }
    Ok(total / (steps * n) as f64)
}

/// Mean `‖Δv̂ − Δv‖` over first differences.
pub fn mod_metric(pred: &VertexSequence, truth: &VertexSequence) -> Result<f64> {
    difference_error(pred, truth, 1)
}

/// Mean `‖Δ²v̂ − Δ²v‖` over second differences.
pub fn ae(pred: &VertexSequence, truth: &VertexSequence) -> Result<f64> {
    difference_error(pred, truth, 2)
}

/// Mean `‖e_{t+1} − e_t‖` of the error signal `e = v̂ − v`.
pub fn tc(pred: &VertexSequence, truth: &VertexSequence) -> Result<f64> {
    check_pair(pred, truth)?;
    let (t_len, n) = (pred.len(), pred.vertex_count());
    if t_len < 2 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for t in 0..t_len - 1 {
        for v in 0..n {
            total += norm3(sub3(error_at(pred, truth, t + 1, v), error_at(pred, truth, t, v)));
        }
    }
    Ok(total / ((t_len - 1) * n) as f64)
}

/// Index sets used by the region metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshRegions {
    pub lip: Vec<usize>,
    pub upper: Vec<usize>,
}

impl MeshRegions {
    pub fn from_template(template: &TemplateMesh) -> Self {
        Self { lip: template.lip_indices.clone(), upper: template.upper_indices.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricValues {
    pub mve: f64,
    pub lve: f64,
    pub eve: f64,
    pub ffe: f64,
    pub fdd: f64,
    pub fdd_abs: f64,
    #[serde(rename = "mod")]
    pub mod_: f64,
    pub ae: f64,
    pub tc: f64,
}

impl MetricValues {
    fn fields(&self) -> [f64; 8] {
        [self.mve, self.lve, self.eve, self.ffe, self.fdd, self.mod_, self.ae, self.tc]
    }

    fn from_fields(f: [f64; 8]) -> Self {
        Self { mve: f[0], lve: f[1], eve: f[2], ffe: f[3], fdd: f[4], fdd_abs: f[4].abs(), mod_: f[5], ae: f[6], tc: f[7] }
    }
}

pub fn all_metrics(pred: &VertexSequence, truth: &VertexSequence, regions: &MeshRegions) -> Result<MetricValues> {
    Ok(MetricValues::from_fields([
        mve(pred, truth)?,
        lve(pred, truth, &regions.lip)?,
        eve(pred, truth, &regions.upper)?,
        ffe(pred, truth)?,
        fdd(pred, truth, &regions.upper)?,
        mod_metric(pred, truth)?,
        ae(pred, truth)?,
        tc(pred, truth)?,
    ]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub sequences: usize,
    pub frames: usize,
    #[serde(flatten)]
    pub values: MetricValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sequences: usize,
    pub frames: usize,
    pub overall: MetricValues,
    pub per_emotion: BTreeMap<String, GroupMetrics>,
    /// Formula for every reported column.
    pub definitions: BTreeMap<String, String>,
}

/// A predicted/ground-truth pair tagged with its emotion group.
#[derive(Debug, Clone, Copy)]
pub struct EvalPair<'a> {
    pub tag: &'a str,
    pub pred: &'a VertexSequence,
    pub truth: &'a VertexSequence,
}

pub fn metric_definitions() -> BTreeMap<String, String> {
    [
        ("mve", "mean over frames and vertices of |v_hat - v|"),
        ("lve", "mean over frames of the max lip-vertex |v_hat - v|"),
        ("eve", "mean over frames of the max upper-face-vertex |v_hat - v|"),
        ("ffe", "mean |abs(DFT(v_hat)) - abs(DFT(v))| over bins 1..=T/2 and coordinates, divided by T"),
        ("fdd", "mean over upper-face vertices of std_t |dv_hat_t| - std_t |dv_t| (signed)"),
        ("fdd_abs", "absolute value of fdd"),
        ("mod", "mean over frames and vertices of |dv_hat - dv| (first differences)"),
        ("ae", "mean over frames and vertices of |d2v_hat - d2v| (second differences)"),
        ("tc", "mean over frames and vertices of |e_(t+1) - e_t|, e = v_hat - v"),
        ("aggregation", "per-sequence values averaged with frame-count weights"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// Per-emotion and overall aggregates, each a frame-weighted mean of
/// per-sequence values. `fdd_abs` is the magnitude of the aggregated `fdd`.
pub fn full_report(pairs: &[EvalPair<'_>], regions: &MeshRegions) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no sequence pairs to evaluate".into()));
    }
    let mut groups: BTreeMap<String, (usize, usize, [f64; 8])> = BTreeMap::new();
    let mut overall = [0.0; 8];
    let mut frames = 0;
    for p in pairs {
        let m = all_metrics(p.pred, p.truth, regions)?.fields();
        let w = p.pred.len();
        let g = groups.entry(p.tag.to_string()).or_insert((0, 0, [0.0; 8]));
        g.0 += 1;
        g.1 += w;
        for k in 0..8 {
            g.2[k] += w as f64 * m[k];
            overall[k] += w as f64 * m[k];
        }
        frames += w;
    }
    let normalize = |sums: [f64; 8], w: usize| MetricValues::from_fields(sums.map(|s| s / w as f64));
    Ok(MetricReport {
        sequences: pairs.len(),
        frames,
        overall: normalize(overall, frames),
        per_emotion: groups
            .into_iter()
            .map(|(tag, (n, w, sums))| (tag, GroupMetrics { sequences: n, frames: w, values: normalize(sums, w) }))
            .collect(),
        definitions: metric_definitions(),
    })
}
