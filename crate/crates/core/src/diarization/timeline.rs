use serde::{Deserialize, Serialize};

use crate::corpus::{EmotionClass, FRAME_PERIOD};
use crate::error::{Error, Result};
use crate::sed::PosteriorSequence;

/// Slack for comparing boundaries that went through float arithmetic.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmotionSegment {
    #[serde(rename = "start_s")]
    pub start: f64,
    #[serde(rename = "end_s")]
    pub end: f64,
    pub emotion: EmotionClass,
    /// Discrete level in `1..=3`.
    pub intensity: u8,
    pub mean_posterior: f64,
}

impl EmotionSegment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn state(&self) -> (EmotionClass, u8) {
        (self.emotion, self.intensity)
    }

    fn check(&self, i: usize) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite() && self.start < self.end) {
            return Err(Error::Validation(format!(
                "segment {i}: start < end violated ({} .. {})",
                self.start, self.end
            )));
        }
        if !(0.0..=1.0).contains(&self.mean_posterior) {
            return Err(Error::Validation(format!(
                "segment {i}: mean_posterior {} outside [0, 1]",
                self.mean_posterior
            )));
        }
        if !(1..=3).contains(&self.intensity) {
            return Err(Error::Validation(format!(
                "segment {i}: intensity {} outside 1..=3",
                self.intensity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionTimeline {
    #[serde(rename = "duration_s")]
    pub duration: f64,
    pub segments: Vec<EmotionSegment>,
}

impl EmotionTimeline {
    /// Per-segment checks, ordering, non-overlap and `[0, duration]` bounds.
    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::Validation(format!("duration {} is not a non-negative number", self.duration)));
        }
        for (i, s) in self.segments.iter().enumerate() {
            s.check(i)?;
            if s.start < -TIME_EPS || s.end > self.duration + TIME_EPS {
                return Err(Error::Validation(format!(
                    "segment {i} ({} .. {}) lies outside [0, {}]",
                    s.start, s.end, self.duration
                )));
            }
        }
        for (i, w) in self.segments.windows(2).enumerate() {
            if w[1].start < w[0].start {
                return Err(Error::Validation(format!("segments {i} and {} are out of order", i + 1)));
            }
            if w[1].start < w[0].end - TIME_EPS {
                return Err(Error::Validation(format!(
                    "segments {i} and {} overlap ({} > {})",
                    i + 1,
                    w[0].end,
                    w[1].start
                )));
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus contiguous coverage of `[0, duration)`
    /// and no adjacent pair with the same `(emotion, intensity)`.
    pub fn validate_smoothed(&self) -> Result<()> {
        self.validate()?;
        if self.duration > 0.0 && self.segments.is_empty() {
            return Err(Error::EmptyTimeline(self.duration));
        }
        if let (Some(first), Some(last)) = (self.segments.first(), self.segments.last()) {
            if first.start != 0.0 || last.end != self.duration {
                return Err(Error::Validation(format!(
                    "timeline covers [{}, {}) instead of [0, {})",
                    first.start, last.end, self.duration
                )));
            }
        }
        for (i, w) in self.segments.windows(2).enumerate() {
            if w[1].start != w[0].end {
                return Err(Error::Validation(format!("gap between segments {i} and {}", i + 1)));
            }
            if w[0].state() == w[1].state() {
                return Err(Error::Validation(format!(
                    "segments {i} and {} share ({}, {})",
                    i + 1,
                    w[0].emotion,
                    w[0].intensity
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates. Unknown top-level keys are ignored, so header
    /// fields added by writers pass through.
    pub fn from_json(text: &str) -> Result<Self> {
        let t: EmotionTimeline = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimelineConfig {
    pub frame_period: f64,
    pub min_segment_dur: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Transition window in animation frames; odd.
    pub transition_frames: usize,
}

impl Default for TimelineConfig {
    fn default() -> Self {
        Self {
            frame_period: FRAME_PERIOD,
            min_segment_dur: 0.2,
            theta1: 0.5,
            theta2: 0.8,
            transition_frames: 9,
        }
    }
}

impl TimelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_period > 0.0) || self.min_segment_dur < self.frame_period - TIME_EPS {
            return Err(Error::Config(format!(
                "need 0 < frame_period ≤ min_segment_dur, got {} and {}",
                self.frame_period, self.min_segment_dur
            )));
        }
        if !(0.0 < self.theta1 && self.theta1 < self.theta2 && self.theta2 < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < θ1 < θ2 < 1, got {} and {}",
                self.theta1, self.theta2
            )));
        }
        if self.transition_frames % 2 == 0 {
            return Err(Error::Config(format!("transition window {} must be odd", self.transition_frames)));
        }
        Ok(())
    }
}

/// Thresholded confidence → level; neutral is always level 1.
pub fn estimate_intensity(emotion: EmotionClass, mean_posterior: f64, config: &TimelineConfig) -> Result<u8> {
    if !(0.0..=1.0).contains(&mean_posterior) {
        return Err(Error::Input(format!("mean posterior {mean_posterior} outside [0, 1]")));
    }
    Ok(if emotion == EmotionClass::Neutral || mean_posterior < config.theta1 {
        1
    } else if mean_posterior < config.theta2 {
        2
    } else {
        3
    })
}

/// Run-length encodes the per-frame argmax into segments on frame edges.
pub fn frames_to_segments(posteriors: &PosteriorSequence, config: &TimelineConfig) -> Result<Vec<EmotionSegment>> {
    let labels = posteriors.argmax();
    if labels.is_empty() {
        return Err(Error::EmptyInput("posterior sequence has no frames".into()));
    }
    let fp = posteriors.frame_period;
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=labels.len() {
        if t == labels.len() || labels[t] != labels[start] {
            let c = labels[start];
            let mean = (start..t).map(|f| posteriors.probs.row(f)[c.id()]).sum::<f64>() / (t - start) as f64;
            let mean = mean.clamp(0.0, 1.0);
            out.push(EmotionSegment {
                start: start as f64 * fp,
                end: t as f64 * fp,
                emotion: c,
                intensity: estimate_intensity(c, mean, config)?,
                mean_posterior: mean,
            });
            start = t;
        }
    }
    Ok(out)
}

/// Short-segment absorption, same-state merging, then gap filling.
pub fn smooth_timeline(
    segments: &[EmotionSegment],
    config: &TimelineConfig,
    duration: f64,
) -> Result<EmotionTimeline> {
    config.validate()?;
    let input = EmotionTimeline {
        duration,
        segments: segments.to_vec(),
    };
    input.validate()?;
    if segments.is_empty() {
        if duration > 0.0 {
            return Err(Error::EmptyTimeline(duration));
        }
        return Ok(input);
    }
    let mut segs = segments.to_vec();
    absorb_short(&mut segs, config.min_segment_dur);
    let mut segs = merge_equal(segs);
    fill_gaps(&mut segs, duration);
    Ok(EmotionTimeline { duration, segments: segs })
}

fn is_short(s: &EmotionSegment, min_dur: f64) -> bool {
    s.duration() < min_dur - TIME_EPS
}

/// Repeatedly hands the shortest sub-threshold segment to its longer neighbor.
fn absorb_short(segs: &mut Vec<EmotionSegment>, min_dur: f64) {
    while segs.len() > 1 {
        let Some(i) = (0..segs.len())
            .filter(|&i| is_short(&segs[i], min_dur))
            .min_by(|&a, &b| segs[a].duration().total_cmp(&segs[b].duration()).then(a.cmp(&b)))
        else {
            break;
        };
        let take_prev = match (i.checked_sub(1), segs.get(i + 1)) {
            (Some(p), Some(next)) => segs[p].duration() >= next.duration(),
            (Some(_), None) => true,
            _ => false,
        };
        let gone = segs.remove(i);
        if take_prev {
            segs[i - 1].end = gone.end;
        } else {
            segs[i].start = gone.start;
        }
    }
}

fn merge_equal(segs: Vec<EmotionSegment>) -> Vec<EmotionSegment> {
    let mut out: Vec<EmotionSegment> = Vec::with_capacity(segs.len());
    for s in segs {
        match out.last_mut() {
            Some(prev) if prev.state() == s.state() => {
                let (a, b) = (prev.duration(), s.duration());
                prev.mean_posterior = ((prev.mean_posterior * a + s.mean_posterior * b) / (a + b)).clamp(0.0, 1.0);
                prev.end = s.end;
            }
            _ => out.push(s),
        }
    }
    out
}

fn fill_gaps(segs: &mut [EmotionSegment], duration: f64) {
    if let Some(first) = segs.first_mut() {
        first.start = 0.0;
    }
    if let Some(last) = segs.last_mut() {
        last.end = duration;
    }
    for i in 1..segs.len() {
        if segs[i].start != segs[i - 1].end {
            let mid = 0.5 * (segs[i - 1].end + segs[i].start);
            segs[i - 1].end = mid;
            segs[i].start = mid;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Tensor;
    use EmotionClass::{Angry as A, Sad as B};

    fn seg(start: f64, end: f64, emotion: EmotionClass, intensity: u8) -> EmotionSegment {
        EmotionSegment { start, end, emotion, intensity, mean_posterior: 0.6 }
    }

    fn posteriors(winners: &[(EmotionClass, f64)]) -> PosteriorSequence {
        let mut data = Vec::new();
        for &(c, p) in winners {
            let rest = (1.0 - p) / 6.0;
            data.extend((0..7).map(|k| if k == c.id() { p } else { rest }));
        }
        PosteriorSequence::new(0.02, Tensor::matrix(winners.len(), 7, data).unwrap()).unwrap()
    }

    #[test]
    fn run_length_segments() {
        let cfg = TimelineConfig::default();
        let s = frames_to_segments(&posteriors(&[(A, 0.9); 10]), &cfg).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].end - 0.2).abs() < 1e-15);

        let p = posteriors(&[(A, 0.9), (A, 0.9), (B, 0.6), (B, 0.8), (B, 0.7)]);
        let s = frames_to_segments(&p, &cfg).unwrap();
        assert_eq!((s[0].emotion, s[1].emotion), (A, B));
        assert!((s[0].end - 0.04).abs() < 1e-15 && (s[1].end - 0.10).abs() < 1e-15);
        assert!((s[1].mean_posterior - 0.7).abs() < 1e-12);
        assert_eq!(s[1].intensity, 2);

        let s = frames_to_segments(&posteriors(&[(A, 0.6), (A, 0.8)]), &cfg).unwrap();
        assert!((s[0].mean_posterior - 0.7).abs() < 1e-12);
    }

    #[test]
    fn intensity_thresholds() {
        let cfg = TimelineConfig::default();
        assert_eq!(estimate_intensity(A, 0.3, &cfg).unwrap(), 1);
        assert_eq!(estimate_intensity(A, 0.5, &cfg).unwrap(), 2);
        assert_eq!(estimate_intensity(A, 0.8, &cfg).unwrap(), 3);
        assert_eq!(estimate_intensity(A, 0.95, &cfg).unwrap(), 3);
        assert_eq!(estimate_intensity(EmotionClass::Neutral, 0.95, &cfg).unwrap(), 1);
        assert!(estimate_intensity(A, 1.2, &cfg).is_err());
    }

    #[test]
    fn absorb_then_merge() {
        let cfg = TimelineConfig::default();
        let t = smooth_timeline(&[seg(0.0, 1.0, A, 1), seg(1.0, 1.05, B, 2), seg(1.05, 2.0, A, 1)], &cfg, 2.0).unwrap();
        assert_eq!(t.segments.len(), 1);
        assert_eq!((t.segments[0].start, t.segments[0].end, t.segments[0].state()), (0.0, 2.0, (A, 1)));
    }

    #[test]
    fn gaps_annexed() {
        let cfg = TimelineConfig::default();
        let t = smooth_timeline(&[seg(0.5, 1.0, A, 1)], &cfg, 2.0).unwrap();
        assert_eq!((t.segments[0].start, t.segments[0].end), (0.0, 2.0));
        let t = smooth_timeline(&[seg(0.0, 1.0, A, 1), seg(1.4, 2.0, B, 1)], &cfg, 2.0).unwrap();
        assert!((t.segments[0].end - 1.2).abs() < 1e-15);
        t.validate_smoothed().unwrap();
    }

    #[test]
    fn clean_timeline_is_fixed_point() {
        let cfg = TimelineConfig::default();
        let t = smooth_timeline(&[seg(0.0, 0.7, A, 1), seg(0.7, 2.0, B, 3)], &cfg, 2.0).unwrap();
        assert_eq!(smooth_timeline(&t.segments, &cfg, 2.0).unwrap(), t);
        assert!(matches!(smooth_timeline(&[], &cfg, 1.0), Err(Error::EmptyTimeline(_))));
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let t = EmotionTimeline { duration: 2.0, segments: vec![seg(0.0, 0.7, A, 1), seg(0.7, 2.0, B, 3)] };
        assert_eq!(EmotionTimeline::from_json(&t.to_json().unwrap()).unwrap(), t);
        let overlap = r#"{"duration_s": 2, "segments": [
            {"start_s": 0, "end_s": 1.2, "emotion": "angry", "intensity": 1, "mean_posterior": 0.5},
            {"start_s": 1.0, "end_s": 2, "emotion": "sad", "intensity": 1, "mean_posterior": 0.5}]}"#;
        assert!(matches!(EmotionTimeline::from_json(overlap), Err(Error::Validation(m)) if m.contains("overlap")));
        let order = r#"{"duration_s": 2, "segments": [
            {"start_s": 1, "end_s": 2, "emotion": "angry", "intensity": 1, "mean_posterior": 0.5},
            {"start_s": 0, "end_s": 1, "emotion": "sad", "intensity": 1, "mean_posterior": 0.5}]}"#;
        assert!(matches!(EmotionTimeline::from_json(order), Err(Error::Validation(m)) if m.contains("order")));
    }
}
