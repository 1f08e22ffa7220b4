//! Checks that span a whole module. Each panics with a description on the
//! first violation and returns what it measured.

use sedtalker_core::animator::VertexSequence;
use sedtalker_core::corpus::{compute_class_weights, ClassWeights, EmotionClass, NUM_CLASSES};
use sedtalker_core::diarization::{frames_to_segments, smooth_timeline, TimelineConfig};
use sedtalker_core::metrics::*;
use sedtalker_core::numeric::{selective_scan, RngStream};
use sedtalker_core::sed::{class_weights_from_set, evaluate_set, synthetic_set, train_sed, EpochStats, SedHead, SedHeadConfig, SedTrainConfig, SyntheticSetConfig};

use super::oracles::{check_timeline_invariants, naive, naive_scan, offset, random_frames, random_posteriors, to_seq};
use super::rand_tensor;

/// Class, utterance count, share of the corpus (%) and published weight.
pub const PUBLISHED: [(EmotionClass, u64, f64, f64); 7] = [
    (EmotionClass::Happy, 16_133, 27.4, 0.31),
    (EmotionClass::Angry, 15_115, 25.7, 0.34),
    (EmotionClass::Sad, 10_558, 17.9, 0.48),
    (EmotionClass::Neutral, 8_041, 13.7, 0.63),
    (EmotionClass::Upset, 3_573, 6.1, 1.42),
    (EmotionClass::Disgust, 3_054, 5.2, 1.66),
    (EmotionClass::Fear, 2_360, 4.0, 2.15),
];

pub fn published_counts() -> [u64; NUM_CLASSES] {
    let mut c = [0; NUM_CLASSES];
    for (class, n, _, _) in PUBLISHED {
        c[class.id()] = n;
    }
    c
}

/// Direct evaluation of 1/N_c normalized to sum K; the N_total/K factor cancels.
pub fn oracle_weights(counts: &[u64]) -> Vec<f64> {
    let inv: Vec<f64> = counts.iter().map(|&n| 1.0 / n as f64).collect();
    let s: f64 = inv.iter().sum();
    inv.iter().map(|v| v * counts.len() as f64 / s).collect()
}

/// Returns the computed weights and the largest gap to the published ones.
pub fn published_weights() -> (ClassWeights, f64) {
    let w = compute_class_weights(&published_counts()).unwrap();
    let mut worst: f64 = 0.0;
    for (class, _, _, expected) in PUBLISHED {
        let gap = (w.get(class) - expected).abs();
        assert!(gap <= 0.015, "{class}: {} vs {expected}", w.get(class));
        worst = worst.max(gap);
    }
    assert!((w.sum() - 7.0).abs() < 1e-9, "sum {}", w.sum());
    for (a, b) in w.as_array().iter().zip(oracle_weights(&published_counts())) {
        assert!((a - b).abs() < 1e-12);
    }
    (w, worst)
}

/// Random scans against the per-step recurrence; returns the worst error.
pub fn scan_oracle_suite(cases: usize) -> f64 {
    let mut rng = RngStream::new(64);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let (t_len, d) = (1 + rng.below(64), 1 + rng.below(5));
        let x = rand_tensor(&mut rng, &[t_len, d]);
        let a = rand_tensor(&mut rng, &[t_len, d]).map(|v| 1.0 / (1.0 + (-v).exp()));
        let b = rand_tensor(&mut rng, &[t_len, d]);
        let c = rand_tensor(&mut rng, &[t_len, d]);
        let y = selective_scan(&x, &a, &b, &c).unwrap();
        for (p, q) in y.data().iter().zip(naive_scan(&x, &a, &b, &c)) {
            let err = (p - q).abs();
            assert!(err <= 1e-12, "case {case} (T={t_len}): {p} vs {q}");
            worst = worst.max(err);
        }
    }
    worst
}

/// Random flickery posteriors through segmentation and smoothing; returns
/// the total number of output segments.
pub fn timeline_suite(cases: usize) -> usize {
    let cfg = TimelineConfig::default();
    let mut rng = RngStream::new(2024);
    let mut segments = 0;
    for case in 0..cases {
        let frames = 1 + rng.below(400);
        let post = random_posteriors(&mut rng, frames);
        let segs = frames_to_segments(&post, &cfg).unwrap();
        let duration = frames as f64 * 0.02;
        let t = smooth_timeline(&segs, &cfg, duration).unwrap();
        check_timeline_invariants(&t, &cfg).unwrap_or_else(|e| panic!("case {case}: {e}"));
        assert_eq!(smooth_timeline(&t.segments, &cfg, duration).unwrap(), t, "case {case}");
        segments += t.segments.len();
    }
    segments
}

fn metric_pairs(ps: &VertexSequence, gs: &VertexSequence, lip: &[usize], upper: &[usize]) -> [f64; 8] {
    [
        mve(ps, gs).unwrap(),
        lve(ps, gs, lip).unwrap(),
        eve(ps, gs, upper).unwrap(),
        ffe(ps, gs).unwrap(),
        fdd(ps, gs, upper).unwrap(),
        mod_metric(ps, gs).unwrap(),
        ae(ps, gs).unwrap(),
        tc(ps, gs).unwrap(),
    ]
}

/// Identity, offset and naive-agreement checks; returns the worst
/// disagreement with the naive versions.
pub fn metric_suite(cases: usize) -> f64 {
    let mut rng = RngStream::new(41);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let t = 1 + rng.below(10);
        let n = 2 + rng.below(7);
        let p = random_frames(t, n, &mut rng);
        let g = random_frames(t, n, &mut rng);
        let lip: Vec<usize> = (0..n).filter(|i| i % 2 == 0).collect();
        let upper: Vec<usize> = (0..n).filter(|i| i % 2 == 1).collect();
        let (ps, gs) = (to_seq(&p), to_seq(&g));

        let got = metric_pairs(&ps, &gs, &lip, &upper);
        let want = [
            naive::mve(&p, &g),
            naive::region(&p, &g, &lip),
            naive::region(&p, &g, &upper),
            naive::ffe(&p, &g),
            naive::fdd(&p, &g, &upper),
            naive::mod_(&p, &g),
            naive::ae(&p, &g),
            naive::tc(&p, &g),
        ];
        for (i, (a, b)) in got.iter().zip(want).enumerate() {
            assert!((a - b).abs() < 1e-10, "case {case} metric {i} (T={t}, N={n}): {a} vs {b}");
            worst = worst.max((a - b).abs());
        }

        let regions = MeshRegions { lip: lip.clone(), upper: upper.clone() };
        assert_eq!(all_metrics(&gs, &gs, &regions).unwrap(), MetricValues::default(), "case {case}: identity");

        let delta = 2.0 * rng.normal();
        let shifted = to_seq(&offset(&g, [delta, 0.0, 0.0]));
        let m = mve(&shifted, &gs).unwrap();
        assert!((m - delta.abs()).abs() < 1e-12, "case {case}: MVE {m} under offset {delta}");

        let moved = to_seq(&offset(&p, [delta, -0.7 * delta, 0.3]));
        let before = [mod_metric(&ps, &gs).unwrap(), ae(&ps, &gs).unwrap(), tc(&ps, &gs).unwrap()];
        let after = [mod_metric(&moved, &gs).unwrap(), ae(&moved, &gs).unwrap(), tc(&moved, &gs).unwrap()];
        for (a, b) in before.iter().zip(after) {
            assert!((a - b).abs() < 1e-9, "case {case}: offset changed {a} to {b}");
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct SedProbe {
    pub accuracy: f64,
    pub init_val_loss: f64,
    pub history: Vec<EpochStats>,
}

/// Trains the default head shape on the separable synthetic set for up to
/// 20 epochs and scores a held-out set.
pub fn sed_probe() -> SedProbe {
    let centers = 42;
    let train = synthetic_set(SyntheticSetConfig::default(), centers, 1);
    let val = synthetic_set(SyntheticSetConfig { utterances: 35, ..Default::default() }, centers, 2);
    let test = synthetic_set(SyntheticSetConfig { utterances: 35, ..Default::default() }, centers, 3);
    let mut rng = RngStream::new(4);
    let head = SedHead::new(SedHeadConfig { input_dim: 16, ..Default::default() }, &mut rng).unwrap();
    let weights = class_weights_from_set(&train).unwrap();
    let (init_val_loss, _) = evaluate_set(&head, &val, &weights).unwrap();
    let config = SedTrainConfig { max_epochs: 20, ..Default::default() };
    let (head, history) = train_sed(&train, &val, head, config, 5).unwrap();
    let (_, accuracy) = evaluate_set(&head, &test, &weights).unwrap();
    SedProbe { accuracy, init_val_loss, history }
}
