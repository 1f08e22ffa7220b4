//! Slow, obviously-correct reference implementations.

use sedtalker_core::animator::{VertexSequence, BLANK};
use sedtalker_core::corpus::NUM_CLASSES;
use sedtalker_core::diarization::{EmotionTimeline, TimelineConfig};
use sedtalker_core::numeric::{RngStream, Tensor};
use sedtalker_core::sed::PosteriorSequence;

/// Sums path probabilities over every length-T path that collapses to the target.
pub fn brute_force_ctc(log_probs: &Tensor, target: &[usize]) -> (f64, Tensor) {
    let (t_len, v) = (log_probs.rows(), log_probs.cols());
    let mut total = 0.0;
    let mut occupancy = Tensor::zeros(&[t_len, v]);
    let mut path = vec![0usize; t_len];
    for code in 0..v.pow(t_len as u32) {
        let mut c = code;
        for p in path.iter_mut() {
            *p = c % v;
            c /= v;
        }
        let mut collapsed = Vec::new();
        let mut prev = None;
        for &s in &path {
            if Some(s) != prev && s != BLANK {
                collapsed.push(s);
            }
            prev = Some(s);
        }
        if collapsed != target {
            continue;
        }
        let p: f64 = path.iter().enumerate().map(|(t, &s)| log_probs.row(t)[s]).sum::<f64>().exp();
        total += p;
        for (t, &s) in path.iter().enumerate() {
            occupancy.row_mut(t)[s] += p;
        }
    }
    (-total.ln(), occupancy.scale(-1.0 / total))
}

pub fn naive_scan(x: &Tensor, a: &Tensor, b: &Tensor, c: &Tensor) -> Vec<f64> {
    let (t_len, d) = (x.rows(), x.cols());
    let mut out = vec![0.0; t_len * d];
    for ch in 0..d {
        let mut h = 0.0;
        for t in 0..t_len {
            let i = t * d + ch;
            h = a.data()[i] * h + b.data()[i] * x.data()[i];
            out[i] = c.data()[i] * h;
        }
    }
    out
}

/// Flickery posteriors: short random runs with random confidence.
pub fn random_posteriors(rng: &mut RngStream, frames: usize) -> PosteriorSequence {
    let mut data = Vec::with_capacity(frames * NUM_CLASSES);
    let mut t = 0;
    while t < frames {
        let c = rng.below(NUM_CLASSES);
        let max_run = if rng.next_f64() < 0.5 { 3 } else { 25 };
        let run = 1 + rng.below(max_run);
        for _ in 0..run.min(frames - t) {
            let raw: Vec<f64> = (0..NUM_CLASSES)
                .map(|k| if k == c { 1.0 + 6.0 * rng.next_f64() } else { rng.next_f64() })
                .collect();
            let s: f64 = raw.iter().sum();
            data.extend(raw.iter().map(|v| v / s));
        }
        t += run;
    }
    PosteriorSequence::new(0.02, Tensor::matrix(frames, NUM_CLASSES, data).unwrap()).unwrap()
}

pub fn check_timeline_invariants(t: &EmotionTimeline, cfg: &TimelineConfig) -> Result<(), String> {
    t.validate_smoothed().map_err(|e| e.to_string())?;
    if t.segments.len() > 1 {
        for s in &t.segments {
            if s.duration() < cfg.min_segment_dur - 1e-9 {
                return Err(format!("short segment {s:?}"));
            }
        }
    }
    let total: f64 = t.segments.iter().map(|s| s.duration()).sum();
    if (total - t.duration).abs() > 1e-9 {
        return Err(format!("durations sum to {total}, expected {}", t.duration));
    }
    Ok(())
}

pub type Frames = Vec<Vec<[f64; 3]>>;

pub fn to_seq(f: &Frames) -> VertexSequence {
    let rows: Vec<Vec<f64>> = f.iter().map(|fr| fr.iter().flat_map(|v| v.iter().copied()).collect()).collect();
    VertexSequence::from_flat(30.0, Tensor::from_rows(&rows).unwrap()).unwrap()
}

pub fn random_frames(t: usize, n: usize, rng: &mut RngStream) -> Frames {
    (0..t).map(|_| (0..n).map(|_| [rng.normal(), rng.normal(), rng.normal()]).collect()).collect()
}

pub fn offset(f: &Frames, d: [f64; 3]) -> Frames {
    f.iter().map(|fr| fr.iter().map(|v| [v[0] + d[0], v[1] + d[1], v[2] + d[2]]).collect()).collect()
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Loop-per-definition versions of the mesh metrics.
pub mod naive {
    use super::{dist, Frames};

    pub fn mve(p: &Frames, g: &Frames) -> f64 {
        let mut s = 0.0;
        let mut c = 0.0;
        for t in 0..p.len() {
            for n in 0..p[t].len() {
                s += dist(p[t][n], g[t][n]);
                c += 1.0;
            }
        }
        s / c
    }

    pub fn region(p: &Frames, g: &Frames, set: &[usize]) -> f64 {
        let mut s = 0.0;
        for t in 0..p.len() {
            let mut m: f64 = 0.0;
            for &n in set {
                m = m.max(dist(p[t][n], g[t][n]));
            }
            s += m;
        }
        s / p.len() as f64
    }

    fn dft_mag(x: &[f64], k: usize) -> f64 {
        let t = x.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, v) in x.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / t;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        (re * re + im * im).sqrt()
    }

    pub fn ffe(p: &Frames, g: &Frames) -> f64 {
        let t = p.len();
        if t < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        let mut c = 0.0;
        for n in 0..p[0].len() {
            for k in 0..3 {
                let a: Vec<f64> = p.iter().map(|f| f[n][k]).collect();
                let b: Vec<f64> = g.iter().map(|f| f[n][k]).collect();
                for bin in 1..=t / 2 {
                    s += (dft_mag(&a, bin) - dft_mag(&b, bin)).abs();
                    c += 1.0;
                }
            }
        }
        s / c / t as f64
    }

    fn std_of_speed(f: &Frames, n: usize) -> f64 {
        if f.len() < 3 {
            return 0.0;
        }
        let speeds: Vec<f64> = f.windows(2).map(|w| dist(w[1][n], w[0][n])).collect();
        let m = speeds.iter().sum::<f64>() / speeds.len() as f64;
        (speeds.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / speeds.len() as f64).sqrt()
    }

    pub fn fdd(p: &Frames, g: &Frames, set: &[usize]) -> f64 {
        set.iter().map(|&n| std_of_speed(p, n) - std_of_speed(g, n)).sum::<f64>() / set.len() as f64
    }

    fn diff(f: &Frames) -> Frames {
        f.windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| [a[0] - b[0], a[1] - b[1], a[2] - b[2]]).collect())
            .collect()
    }

    pub fn mod_(p: &Frames, g: &Frames) -> f64 {
        if p.len() < 2 { 0.0 } else { mve(&diff(p), &diff(g)) }
    }

    pub fn ae(p: &Frames, g: &Frames) -> f64 {
        if p.len() < 3 { 0.0 } else { mve(&diff(&diff(p)), &diff(&diff(g))) }
    }

    pub fn tc(p: &Frames, g: &Frames) -> f64 {
        if p.len() < 2 {
            return 0.0;
        }
        let e: Frames = p
            .iter()
            .zip(g)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| [x[0] - y[0], x[1] - y[1], x[2] - y[2]]).collect())
            .collect();
        let zero: Frames = vec![vec![[0.0; 3]; p[0].len()]; p.len() - 1];
        mve(&diff(&e), &zero)
    }
}
