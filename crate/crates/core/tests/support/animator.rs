//! Toy animator fixtures and the animator-side checks.

use sedtalker_core::animator::*;
use sedtalker_core::corpus::EmotionClass;
use sedtalker_core::diarization::{build_conditioning_frames, ConditioningSequence, EmotionSegment, EmotionTimeline};
use sedtalker_core::numeric::{finite_diff_check, log_softmax_rows, GradCheckConfig, RngStream};
use sedtalker_core::sed::FeatureSequence;
use sedtalker_core::Error;

use super::oracles::brute_force_ctc;
use super::random_matrix;

pub fn toy(vertices: usize, lips: usize, seed: u64) -> (TemplateMesh, Animator) {
    let template = synth_template(vertices, lips, seed);
    let mut rng = RngStream::new(seed ^ 0xA11);
    let model = Animator::new(AnimatorConfig::default(), &template, &mut rng).unwrap();
    (template, model)
}

/// Replaces the zero decoder with small random weights so that gradients
/// reach the backbone.
pub fn randomize_decoder(model: &mut Animator, seed: u64) {
    let mut rng = RngStream::new(seed);
    let ids = [Some(model.decoder.weight), model.decoder.bias];
    for id in ids.into_iter().flatten() {
        for v in model.store.value_mut(id).data_mut() {
            *v = 0.1 * rng.normal();
        }
    }
}

pub fn timeline(parts: &[(f64, EmotionClass, u8)]) -> EmotionTimeline {
    let mut start = 0.0;
    let segments = parts
        .iter()
        .map(|&(len, emotion, intensity)| {
            let s = EmotionSegment { start, end: start + len, emotion, intensity, mean_posterior: 0.9 };
            start += len;
            s
        })
        .collect();
    EmotionTimeline { duration: start, segments }
}

pub fn features50(duration: f64, dim: usize, rng: &mut RngStream) -> FeatureSequence {
    let frames = (duration / 0.02).round() as usize;
    FeatureSequence::new(0.02, random_matrix(frames, dim, 1.0, rng)).unwrap()
}

pub fn small_sample(template: &TemplateMesh, frames: usize, seed: u64) -> AnimatorSample {
    let cfg = SynthConfig { samples: 1, frames, vertices: template.vertex_count(), lip_count: template.lip_indices.len(), ..Default::default() };
    let mut s = synth_dataset(seed, cfg).samples.remove(0);
    // Truth from a different seed's template is fine: only the loss value changes.
    s.truth = s.truth.map(|v| v * 0.9);
    s
}

/// The complete training objective as a function of the parameter store.
pub fn composite_gradcheck(model: &mut Animator, template: &TemplateMesh, sample: &AnimatorSample, weights: LossWeights) -> f64 {
    // The error floor is in loss units; scaling by the largest weight is the
    // same as checking `L / λ_max` against the unit floor.
    let scale = [weights.vertex, weights.velocity, weights.lip, weights.ctc].into_iter().fold(1.0, f64::max);
    let mut store = std::mem::take(&mut model.store);
    let report = finite_diff_check(
        &mut store,
        |s| {
            std::mem::swap(&mut model.store, s);
            let out = sample_loss_and_grad(model, sample, template, &weights);
            std::mem::swap(&mut model.store, s);
            Ok(out?.total)
        },
        GradCheckConfig { coords_per_param: 12, denom_floor: 1e-4 * scale, ..Default::default() },
    )
    .unwrap();
    model.store = store;
    assert!(report.checked > 300);
    report.max_rel_err
}

/// Each loss term alone, all four at unit weight, then the default weights.
/// Returns the worst relative error.
pub fn composite_suite() -> f64 {
    let (template, mut model) = toy(12, 4, 9);
    randomize_decoder(&mut model, 10);
    let sample = small_sample(&template, 6, 11);
    let weights = [
        LossWeights { vertex: 1.0, velocity: 0.0, lip: 0.0, ctc: 0.0 },
        LossWeights { vertex: 0.0, velocity: 1.0, lip: 0.0, ctc: 0.0 },
        LossWeights { vertex: 0.0, velocity: 0.0, lip: 1.0, ctc: 0.0 },
        LossWeights { vertex: 0.0, velocity: 0.0, lip: 0.0, ctc: 1.0 },
        LossWeights { vertex: 1.0, velocity: 1.0, lip: 1.0, ctc: 1.0 },
        LossWeights::default(),
    ];
    weights.into_iter().map(|w| composite_gradcheck(&mut model, &template, &sample, w)).fold(0.0, f64::max)
}

/// 200 feasible random instances against path enumeration; returns the worst
/// absolute error over losses and gradients.
pub fn ctc_oracle_suite() -> f64 {
    let mut rng = RngStream::new(31);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 200 {
        let chars = 1 + rng.below(4);
        let v = chars + 1;
        let t_len = 1 + rng.below(8);
        let len = 1 + rng.below(3);
        let target = CharSequence::new((0..len).map(|_| 1 + rng.below(chars)).collect()).unwrap();
        let lp = log_softmax_rows(&random_matrix(t_len, v, 1.5, &mut rng));
        if t_len < target.min_frames() {
            assert!(matches!(ctc_loss(&lp, &target), Err(Error::InfeasibleAlignment { .. })));
            continue;
        }
        let (loss, grad) = ctc_loss(&lp, &target).unwrap();
        let (want, want_grad) = brute_force_ctc(&lp, target.ids());
        let err = (loss - want).abs().max(grad.max_abs_diff(&want_grad));
        assert!(err < 1e-9, "T={t_len} {:?}: {loss} vs {want}", target.ids());
        worst = worst.max(err);
        checked += 1;
    }
    worst
}

/// Untrained models on random topologies, audio and timelines; panics on the
/// first frame that is not the template bit for bit. Returns frames compared.
pub fn zero_init_suite(cases: usize) -> usize {
    let mut rng = RngStream::new(36);
    let mut frames = 0;
    for case in 0..cases {
        let (template, model) = toy(10 + rng.below(60), 4, case as u64);
        let mut parts: Vec<(f64, EmotionClass, u8)> = Vec::new();
        while parts.len() < 1 + case % 4 {
            let state = (EmotionClass::from_id(rng.below(7)).unwrap(), 1 + rng.below(3) as u8);
            // Neighbouring segments of a valid timeline carry different states.
            if parts.last().map_or(true, |p| (p.1, p.2) != state) {
                parts.push((0.1 * (1 + rng.below(10)) as f64, state.0, state.1));
            }
        }
        let tl = timeline(&parts);
        let feats = features50(tl.duration, 32, &mut rng);
        let feats = FeatureSequence::new(0.02, feats.frames.scale(1.0 + 5.0 * rng.next_f64())).unwrap();
        let out = animate(&feats, &tl, &template, &model, 9).unwrap();
        for t in 0..out.len() {
            for n in 0..template.vertex_count() {
                assert_eq!(out.vertex(t, n), template.positions.row(n), "case {case} frame {t} vertex {n}");
            }
        }
        frames += out.len();
    }
    frames
}

#[derive(Debug, Clone, Copy)]
pub struct OverfitResult {
    pub first: LossBreakdown,
    pub last: LossBreakdown,
    pub drop: f64,
    pub steps: usize,
}

/// One 30-frame sample on the 50-vertex toy, 200 optimizer steps.
pub fn overfit_one_sample() -> OverfitResult {
    let ds = synth_dataset(21, SynthConfig { samples: 1, frames: 30, vertices: 50, ..Default::default() });
    let mut rng = RngStream::new(22);
    let mut model = Animator::new(AnimatorConfig::default(), &ds.template, &mut rng).unwrap();
    let cfg = AnimatorTrainConfig { epochs: 200, learning_rate: 1e-4, ..Default::default() };
    let hist = train_animator(&mut model, &ds.samples, &ds.template, &cfg, 0).unwrap();
    let first = hist[0].loss;
    let last = hist.last().unwrap().loss;
    OverfitResult { first, last, drop: 1.0 - last.total / first.total, steps: hist.len() }
}

/// Animates across a two-segment boundary and compares the α=0 and α=1
/// frames with runs conditioned on the pure states. Returns those frames.
pub fn boundary_endpoints() -> (usize, usize) {
    let (template, mut model) = toy(20, 4, 30);
    randomize_decoder(&mut model, 31);
    let prev = (EmotionClass::Happy, 2);
    let next = (EmotionClass::Fear, 3);
    let tl = timeline(&[(1.0, prev.0, prev.1), (1.0, next.0, next.1)]);
    let mut rng = RngStream::new(32);
    let feats = features50(tl.duration, 32, &mut rng);
    let out = animate(&feats, &tl, &template, &model, 9).unwrap();
    let audio = features_to_animation_rate(&feats, 30.0).unwrap();
    let cond = build_conditioning_frames(&tl, &model.table, &model.store, 30.0, 9, audio.rows()).unwrap();
    let t0 = cond.mix.iter().position(|m| m.from != m.to && m.alpha == 0.0).unwrap();
    let t1 = cond.mix.iter().position(|m| m.from != m.to && m.alpha == 1.0).unwrap();
    assert_eq!(cond.vectors.row(t0), model.table.state_vector(&model.store, prev).as_slice());
    assert_eq!(cond.vectors.row(t1), model.table.state_vector(&model.store, next).as_slice());

    let pure_prev = ConditioningSequence::constant(&model.table, &model.store, prev, 30.0, audio.rows());
    let ref_prev = model.animate_conditioned(&audio, &pure_prev.vectors, &template).unwrap();
    for t in 0..=t0 {
        assert_eq!(out.frame(t), ref_prev.frame(t), "frame {t}");
    }
    // The backbone is causal, so frame t1 depends on the history too; keep
    // that history and swap in the pure next state at t1 only.
    let mut explicit = cond.vectors.clone();
    explicit.row_mut(t1).copy_from_slice(&model.table.state_vector(&model.store, next));
    let ref_next = model.animate_conditioned(&audio, &explicit, &template).unwrap();
    assert_eq!(out.frame(t1), ref_next.frame(t1));
    (t0, t1)
}

