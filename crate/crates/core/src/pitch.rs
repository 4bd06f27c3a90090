//! Fundamental-frequency estimation and contour normalization.
//!
//! F0 is estimated per frame with the windowed, window-normalized
//! autocorrelation method: each frame yields an unvoiced candidate plus up
//! to `candidates_per_frame` lag peaks, and a Viterbi pass picks the
//! cheapest path through them. Contours are then mapped into [0, 1] by the
//! speaker's pitch range and resampled to a fixed number of points.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AudioBuffer, SyllableSpan};

/// Number of points in a normalized contour.
pub const CONTOUR_LEN: usize = 40;

/// Minimum voiced frames a syllable needs to yield a contour.
pub const MIN_VOICED_PER_SYLLABLE: usize = 4;

/// Minimum voiced frames across a speaker's corpus to estimate a range.
pub const MIN_VOICED_FOR_RANGE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PitchParams {
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub frame_hop_s: f64,
    /// Analysis window length in periods of `f0_min_hz`.
    pub periods_per_window: f64,
    pub candidates_per_frame: usize,
    pub voicing_threshold: f64,
    pub silence_threshold: f64,
    pub octave_cost: f64,
    pub octave_jump_cost: f64,
    pub voiced_unvoiced_cost: f64,
}

impl Default for PitchParams {
    fn default() -> Self {
        Self {
            f0_min_hz: 75.0,
            f0_max_hz: 500.0,
            frame_hop_s: 0.01,
            periods_per_window: 3.0,
            candidates_per_frame: 15,
            voicing_threshold: 0.45,
            silence_threshold: 0.03,
            octave_cost: 0.01,
            octave_jump_cost: 0.35,
            voiced_unvoiced_cost: 0.14,
        }
    }
}

impl PitchParams {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(0.0 < self.f0_min_hz && self.f0_min_hz < self.f0_max_hz && self.f0_max_hz < nyquist) {
            return bad(format!(
                "need 0 < f0_min ({}) < f0_max ({}) < nyquist ({nyquist})",
                self.f0_min_hz, self.f0_max_hz
            ));
        }
        if !(self.frame_hop_s > 0.0) || !(self.periods_per_window > 0.0) {
            return bad("frame hop and window length must be positive".into());
        }
        if self.candidates_per_frame == 0 {
            return bad("candidates_per_frame must be at least 1".into());
        }
        for (name, t) in [
            ("voicing_threshold", self.voicing_threshold),
            ("silence_threshold", self.silence_threshold),
        ] {
            if !(0.0 < t && t < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {t}"));
            }
        }
        for (name, c) in [
            ("octave_cost", self.octave_cost),
            ("octave_jump_cost", self.octave_jump_cost),
            ("voiced_unvoiced_cost", self.voiced_unvoiced_cost),
        ] {
            if !(c >= 0.0) {
                return bad(format!("{name} must be non-negative, got {c}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Frame {
    pub time_s: f64,
    pub f0_hz: Option<f64>,
    /// Normalized autocorrelation of the best lag peak, in [0, 1].
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub frames: Vec<F0Frame>,
    pub hop_s: f64,
}

impl F0Track {
    pub fn voiced(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.frames
            .iter()
            .filter_map(|f| f.f0_hz.map(|hz| (f.time_s, hz)))
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    /// 0 marks the unvoiced candidate.
    f0_hz: f64,
    /// Local score, higher is better.
    score: f64,
}

/// Periodic-at-the-edges Hann window evaluated at sample midpoints.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos())
        .collect()
}

fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|lag| {
            if lag >= x.len() {
                0.0
            } else {
                x[..x.len() - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum()
            }
        })
        .collect()
}

/// Estimates an F0 track with autocorrelation candidates and Viterbi path
/// selection.
pub fn estimate_f0(audio: &AudioBuffer, params: &PitchParams) -> Result<F0Track> {
    params.validate(audio.sample_rate_hz())?;
    let sr = audio.sample_rate_hz() as f64;
    let x = audio.samples();

    let window_len = (params.periods_per_window / params.f0_min_hz * sr).round() as usize;
    if x.len() < window_len {
        return Err(Error::AudioTooShort {
            samples: x.len(),
            needed: window_len,
        });
    }
    let hop = ((params.frame_hop_s * sr).round() as usize).max(1);
    let hop_s = hop as f64 / sr;
    let min_lag = ((sr / params.f0_max_hz).floor() as usize).max(2);
    let max_lag = ((sr / params.f0_min_hz).ceil() as usize).min(window_len - 2);
    let n_frames = (x.len() - window_len) / hop + 1;

    let window = hann(window_len);
    let r_window = autocorrelation(&window, max_lag + 1);
    let global_peak = x.iter().fold(0.0f64, |m, s| m.max(s.abs()));

    let mut frames = Vec::with_capacity(n_frames);
    let mut candidates: Vec<Vec<Candidate>> = Vec::with_capacity(n_frames);
    let mut seg = vec![0.0; window_len];
    for i in 0..n_frames {
        let start = i * hop;
        let raw = &x[start..start + window_len];
        let mean = raw.iter().sum::<f64>() / window_len as f64;
        let mut local_peak = 0.0f64;
        for ((s, &r), &w) in seg.iter_mut().zip(raw).zip(&window) {
            let centered = r - mean;
            local_peak = local_peak.max(centered.abs());
            *s = centered * w;
        }
        let time_s = (start as f64 + window_len as f64 / 2.0) / sr;

        let intensity = if global_peak > 0.0 { local_peak / global_peak } else { 0.0 };
        let unvoiced_score = params.voicing_threshold
            + (2.0 - intensity / (params.silence_threshold / (1.0 + params.voicing_threshold)))
                .max(0.0);
        let mut cands = vec![Candidate {
            f0_hz: 0.0,
            score: unvoiced_score,
        }];
        let mut best_strength = 0.0f64;

        let r_seg = autocorrelation(&seg, max_lag + 1);
        if r_seg[0] > 0.0 {
            let r: Vec<f64> = r_seg
                .iter()
                .zip(&r_window)
                .map(|(a, w)| if *w > 0.0 { (a / r_seg[0]) / (w / r_window[0]) } else { 0.0 })
                .collect();
            let mut peaks = Vec::new();
            for lag in min_lag.max(1)..=max_lag {
                let (prev, cur, next) = (r[lag - 1], r[lag], r[lag + 1]);
                if cur > 0.0 && cur > prev && cur >= next {
                    let denom = prev - 2.0 * cur + next;
                    let (offset, height) = if denom < 0.0 {
                        let d = (0.5 * (prev - next) / denom).clamp(-0.5, 0.5);
                        (d, cur - 0.25 * (prev - next) * d)
                    } else {
                        (0.0, cur)
                    };
                    let f0_hz = sr / (lag as f64 + offset);
                    if f0_hz < params.f0_min_hz || f0_hz > params.f0_max_hz {
                        continue;
                    }
                    // Values above 1 come from window-edge effects; fold them back.
                    let strength = if height > 1.0 { 1.0 / height } else { height };
                    peaks.push((f0_hz, strength));
                }
            }
            peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
            peaks.truncate(params.candidates_per_frame);
            for (f0_hz, strength) in peaks {
                best_strength = best_strength.max(strength);
                cands.push(Candidate {
                    f0_hz,
                    score: strength - params.octave_cost * (params.f0_min_hz / f0_hz).log2(),
                });
            }
        }
        frames.push(F0Frame {
            time_s,
            f0_hz: None,
            strength: best_strength.clamp(0.0, 1.0),
        });
        candidates.push(cands);
    }

    let path = viterbi(&candidates, hop_s, params);
    for ((frame, cands), choice) in frames.iter_mut().zip(&candidates).zip(path) {
        let c = cands[choice];
        if c.f0_hz > 0.0 {
            frame.f0_hz = Some(c.f0_hz);
        }
    }
    Ok(F0Track { frames, hop_s })
}

fn viterbi(candidates: &[Vec<Candidate>], hop_s: f64, params: &PitchParams) -> Vec<usize> {
    let n = candidates.len();
    if n == 0 {
        return Vec::new();
    }
    // Transition costs are calibrated for a 10 ms hop.
    let time_correction = 0.01 / hop_s;
    let transition = |a: &Candidate, b: &Candidate| -> f64 {
        let cost = match (a.f0_hz > 0.0, b.f0_hz > 0.0) {
            (false, false) => 0.0,
            (true, true) => params.octave_jump_cost * (a.f0_hz / b.f0_hz).log2().abs(),
            _ => params.voiced_unvoiced_cost,
        };
        cost * time_correction
    };

    let mut cost: Vec<f64> = candidates[0].iter().map(|c| -c.score).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(n);
    back.push(vec![0; candidates[0].len()]);
    for t in 1..n {
        let mut next_cost = Vec::with_capacity(candidates[t].len());
        let mut next_back = Vec::with_capacity(candidates[t].len());
        for cur in &candidates[t] {
            let (best_k, best) = candidates[t - 1]
                .iter()
                .zip(&cost)
                .map(|(prev, c)| c + transition(prev, cur))
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (k, c)| if c < acc.1 { (k, c) } else { acc });
            next_cost.push(best - cur.score);
            next_back.push(best_k);
        }
        cost = next_cost;
        back.push(next_back);
    }

    let mut path = vec![0; n];
    path[n - 1] = cost
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &c)| if c < acc.1 { (k, c) } else { acc })
        .0;
    for t in (1..n).rev() {
        path[t - 1] = back[t][path[t]];
    }
    path
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakerRange {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

/// Nearest-rank percentile of sorted data, `p` in (0, 100].
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Speaker pitch range as the 5th and 95th percentiles of all voiced frames.
pub fn speaker_range<'a>(tracks: impl IntoIterator<Item = &'a F0Track>) -> Result<SpeakerRange> {
    let mut values: Vec<f64> = tracks
        .into_iter()
        .flat_map(|t| t.voiced().map(|(_, hz)| hz))
        .collect();
    speaker_range_from_values(&mut values)
}

/// [`speaker_range`] over a flat list of voiced F0 values.
pub fn speaker_range_from_values(values: &mut [f64]) -> Result<SpeakerRange> {
    if values.len() < MIN_VOICED_FOR_RANGE {
        return Err(Error::InsufficientVoicedFrames {
            found: values.len(),
            needed: MIN_VOICED_FOR_RANGE,
        });
    }
    values.sort_by(f64::total_cmp);
    let lo_hz = nearest_rank(values, 5.0);
    let hi_hz = nearest_rank(values, 95.0);
    if !(lo_hz < hi_hz) {
        return Err(Error::InsufficientRange { lo_hz, hi_hz });
    }
    Ok(SpeakerRange { lo_hz, hi_hz })
}

/// Voiced frames inside `span`, mapped linearly from the speaker range onto
/// [0, 1] and clamped.
pub fn normalize_segment(
    track: &F0Track,
    span: &SyllableSpan,
    range: &SpeakerRange,
) -> Result<Vec<(f64, f64)>> {
    let width = range.hi_hz - range.lo_hz;
    let points: Vec<(f64, f64)> = track
        .voiced()
        .filter(|(t, _)| *t >= span.start_s && *t <= span.end_s)
        .map(|(t, hz)| (t, ((hz - range.lo_hz) / width).clamp(0.0, 1.0)))
        .collect();
    if points.len() < MIN_VOICED_PER_SYLLABLE {
        return Err(Error::TooFewVoicedFrames {
            found: points.len(),
            needed: MIN_VOICED_PER_SYLLABLE,
        });
    }
    Ok(points)
}

/// Linearly interpolates `points` at `n` equally spaced times from the first
/// to the last point, bridging any interior gaps.
pub fn resample_contour(points: &[(f64, f64)], n: usize) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            found: points.len(),
            needed: 2,
        });
    }
    if n < 2 {
        return Err(Error::InvalidContour(format!("cannot resample to {n} points")));
    }
    if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(Error::InvalidContour("times must be strictly increasing".into()));
    }
    let t0 = points[0].0;
    let t1 = points[points.len() - 1].0;
    let mut seg = 0;
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                return points[points.len() - 1].1;
            }
            let t = t0 + i as f64 * (t1 - t0) / (n - 1) as f64;
            while seg + 2 < points.len() && points[seg + 1].0 <= t {
                seg += 1;
            }
            let (ta, va) = points[seg];
            let (tb, vb) = points[seg + 1];
            let u = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            va + u * (vb - va)
        })
        .collect())
}

/// Exactly [`CONTOUR_LEN`] pitch values in [0, 1] for one syllable.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedContour {
    pub word_id: String,
    pub syllable_index: usize,
    values: Vec<f64>,
}

impl NormalizedContour {
    pub fn new(word_id: impl Into<String>, syllable_index: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != CONTOUR_LEN {
            return Err(Error::InvalidContour(format!(
                "expected {CONTOUR_LEN} values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidContour(format!("value {v} outside [0, 1]")));
        }
        Ok(Self {
            word_id: word_id.into(),
            syllable_index,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One line of the contour cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourRecord {
    pub word: String,
    pub syll: usize,
    pub tone: Option<String>,
    pub values: Vec<f64>,
}

impl ContourRecord {
    pub fn contour(&self) -> Result<NormalizedContour> {
        NormalizedContour::new(self.word.clone(), self.syll, self.values.clone())
    }
}

pub fn write_contour_cache(path: impl AsRef<Path>, records: &[ContourRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Reads a contour cache, validating every record as a [`NormalizedContour`].
pub fn read_contour_cache(path: impl AsRef<Path>) -> Result<Vec<ContourRecord>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::MalformedRow {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: ContourRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        rec.contour().map_err(|e| bad(e.to_string()))?;
        records.push(rec);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_audio, Signal};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn sine_220() {
        let audio = gen_audio(Signal::Sine { f_hz: 220.0 }, 1.0, 44100).unwrap();
        let track = estimate_f0(&audio, &PitchParams::default()).unwrap();
        assert!(track.frames.iter().all(|f| f.f0_hz.is_some()));
        let errs: Vec<f64> = track.voiced().map(|(_, hz)| (hz - 220.0).abs()).collect();
        assert!(median(errs) < 1.0);
    }

    #[test]
    fn silence_is_unvoiced() {
        let audio = gen_audio(Signal::Silence, 1.0, 16000).unwrap();
        let track = estimate_f0(&audio, &PitchParams::default()).unwrap();
        assert!(!track.frames.is_empty());
        assert!(track.frames.iter().all(|f| f.f0_hz.is_none()));
    }

    #[test]
    fn frames_have_constant_hop() {
        let audio = gen_audio(Signal::Sine { f_hz: 150.0 }, 0.5, 16000).unwrap();
        let track = estimate_f0(&audio, &PitchParams::default()).unwrap();
        for w in track.frames.windows(2) {
            assert!((w[1].time_s - w[0].time_s - track.hop_s).abs() < 1e-12);
        }
    }

    #[test]
    fn too_short() {
        let audio = AudioBuffer::new(vec![0.0; 100], 16000).unwrap();
        assert!(matches!(
            estimate_f0(&audio, &PitchParams::default()),
            Err(Error::AudioTooShort { .. })
        ));
    }

    #[test]
    fn params_validated() {
        let audio = gen_audio(Signal::Silence, 0.2, 8000).unwrap();
        let p = PitchParams {
            f0_max_hz: 5000.0,
            ..PitchParams::default()
        };
        assert!(matches!(estimate_f0(&audio, &p), Err(Error::InvalidParams(_))));
        let p = PitchParams {
            voicing_threshold: 1.5,
            ..PitchParams::default()
        };
        assert!(p.validate(16000).is_err());
    }

    #[test]
    fn time_shift_moves_frames_not_values() {
        let sr = 16000;
        let audio = gen_audio(Signal::Chirp { f0_hz: 130.0, f1_hz: 200.0 }, 0.6, sr).unwrap();
        let p = PitchParams::default();
        let hop = (p.frame_hop_s * sr as f64).round() as usize;
        let k = 3;
        let mut shifted = vec![0.0; k * hop];
        shifted.extend_from_slice(audio.samples());
        let shifted = AudioBuffer::new(shifted, sr).unwrap();
        let a = estimate_f0(&audio, &p).unwrap();
        let b = estimate_f0(&shifted, &p).unwrap();
        for i in 2..a.frames.len() - 2 {
            let fa = a.frames[i];
            let fb = b.frames[i + k];
            assert!((fb.time_s - fa.time_s - (k * hop) as f64 / sr as f64).abs() < 1e-9);
            match (fa.f0_hz, fb.f0_hz) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 0.5),
                (x, y) => assert_eq!(x.is_some(), y.is_some()),
            }
        }
    }

    #[test]
    fn amplitude_invariance() {
        let p = PitchParams::default();
        for signal in [Signal::Sine { f_hz: 220.0 }, Signal::Chirp { f0_hz: 120.0, f1_hz: 240.0 }] {
            let audio = gen_audio(signal, 1.0, 22050).unwrap();
            let base = estimate_f0(&audio, &p).unwrap();
            for gain in [0.1, 0.37, 1.0] {
                let t = estimate_f0(&audio.scaled(gain), &p).unwrap();
                for (a, b) in base.frames.iter().zip(&t.frames) {
                    assert_eq!(a.f0_hz.is_some(), b.f0_hz.is_some());
                    if let (Some(x), Some(y)) = (a.f0_hz, b.f0_hz) {
                        assert!((x - y).abs() < 0.1);
                    }
                }
            }
        }
    }

    #[test]
    fn range_uniform_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20_000;
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(100.0..300.0)).collect();
        // Oracle: nearest-rank percentile on an independently sorted copy.
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let lo_oracle = sorted[(0.05 * n as f64).ceil() as usize - 1];
        let hi_oracle = sorted[(0.95 * n as f64).ceil() as usize - 1];
        let r = speaker_range_from_values(&mut v).unwrap();
        assert_eq!(r.lo_hz, lo_oracle);
        assert_eq!(r.hi_hz, hi_oracle);
        assert!((r.lo_hz - 110.0).abs() < 2.0 && (r.hi_hz - 290.0).abs() < 2.0);
    }

    #[test]
    fn range_degenerate() {
        let mut flat = vec![200.0; 150];
        assert!(matches!(
            speaker_range_from_values(&mut flat),
            Err(Error::InsufficientRange { .. })
        ));
        let mut v = vec![100.0];
        v.extend(std::iter::repeat(200.0).take(98));
        v.push(400.0);
        match speaker_range_from_values(&mut v) {
            Err(Error::InsufficientRange { lo_hz, hi_hz }) => {
                assert_eq!((lo_hz, hi_hz), (200.0, 200.0))
            }
            other => panic!("{other:?}"),
        }
        let mut few = vec![150.0; 10];
        assert!(matches!(
            speaker_range_from_values(&mut few),
            Err(Error::InsufficientVoicedFrames { found: 10, .. })
        ));
    }

    fn track_of(hz: &[Option<f64>]) -> F0Track {
        F0Track {
            frames: hz
                .iter()
                .enumerate()
                .map(|(i, &f0_hz)| F0Frame {
                    time_s: i as f64 * 0.01,
                    f0_hz,
                    strength: 0.9,
                })
                .collect(),
            hop_s: 0.01,
        }
    }

    fn span(start_s: f64, end_s: f64) -> SyllableSpan {
        SyllableSpan {
            word_id: "w".into(),
            syllable_index: 0,
            start_s,
            end_s,
            tone_label: None,
            eval_excluded: false,
        }
    }

    #[test]
    fn normalize_endpoints_and_clamp() {
        let range = SpeakerRange { lo_hz: 100.0, hi_hz: 300.0 };
        let track = track_of(&[Some(100.0), Some(300.0), Some(200.0), Some(400.0), None, Some(50.0)]);
        let pts = normalize_segment(&track, &span(0.0, 1.0), &range).unwrap();
        let v: Vec<f64> = pts.iter().map(|p| p.1).collect();
        assert_eq!(v, [0.0, 1.0, 0.5, 1.0, 0.0]);
        assert_eq!(pts[4].0, 0.05);
    }

    #[test]
    fn normalize_too_few() {
        let range = SpeakerRange { lo_hz: 100.0, hi_hz: 300.0 };
        let track = track_of(&[Some(150.0), None, None, Some(150.0), Some(150.0)]);
        assert!(matches!(
            normalize_segment(&track, &span(0.0, 1.0), &range),
            Err(Error::TooFewVoicedFrames { found: 3, .. })
        ));
    }

    #[test]
    fn resample_examples() {
        let constant: Vec<(f64, f64)> = (0..7).map(|i| (i as f64 * 0.013, 0.7)).collect();
        assert!(resample_contour(&constant, 40).unwrap().iter().all(|&v| v == 0.7));

        let line: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, i as f64 / 9.0)).collect();
        let out = resample_contour(&line, 40).unwrap();
        for (i, v) in out.iter().enumerate() {
            assert!((v - i as f64 / 39.0).abs() < 1e-12);
        }

        let two = resample_contour(&[(0.0, 0.0), (1.0, 1.0)], 40).unwrap();
        assert!((two[13] - 13.0 / 39.0).abs() < 1e-15);
    }

    #[test]
    fn resample_bridges_gaps() {
        let pts = [(0.0, 0.2), (0.01, 0.2), (0.05, 0.6), (0.06, 0.6)];
        let out = resample_contour(&pts, 7).unwrap();
        // t = 0.03 lies in the gap, halfway between 0.2 and 0.6.
        assert!((out[3] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn resample_errors() {
        assert!(matches!(resample_contour(&[(0.0, 0.1)], 40), Err(Error::TooFewPoints { .. })));
        assert!(resample_contour(&[(0.0, 0.1), (0.0, 0.2)], 40).is_err());
    }

    proptest! {
        #[test]
        fn resample_idempotent_on_grid(vals in prop::collection::vec(0.0f64..=1.0, CONTOUR_LEN)) {
            let pts: Vec<(f64, f64)> = vals.iter().enumerate().map(|(i, &v)| (i as f64 / 39.0, v)).collect();
            let out = resample_contour(&pts, CONTOUR_LEN).unwrap();
            for (a, b) in out.iter().zip(&vals) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn normalize_is_monotone_and_bounded(a in 50.0f64..600.0, b in 50.0f64..600.0) {
            let range = SpeakerRange { lo_hz: 120.0, hi_hz: 280.0 };
            let track = track_of(&[Some(a), Some(b), Some(a), Some(b)]);
            let pts = normalize_segment(&track, &span(0.0, 1.0), &range).unwrap();
            prop_assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p.1)));
            if a <= b {
                prop_assert!(pts[0].1 <= pts[1].1);
            } else {
                prop_assert!(pts[0].1 >= pts[1].1);
            }
        }
    }

    #[test]
    fn contour_invariants() {
        assert!(NormalizedContour::new("w", 0, vec![0.5; 39]).is_err());
        assert!(NormalizedContour::new("w", 0, vec![1.5; 40]).is_err());
        assert!(NormalizedContour::new("w", 0, vec![0.5; 40]).is_ok());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let recs = vec![
            ContourRecord { word: "a".into(), syll: 0, tone: Some("T1".into()), values: vec![0.123456789; 40] },
            ContourRecord { word: "a".into(), syll: 1, tone: None, values: vec![1.0 / 3.0; 40] },
        ];
        write_contour_cache(&p, &recs).unwrap();
        assert_eq!(read_contour_cache(&p).unwrap(), recs);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(r#"{"word":"a","syll":0,"tone":"T1","values":["#));

        fs::write(&p, r#"{"word":"a","syll":0,"tone":null,"values":[0.5]}"#).unwrap();
        assert!(matches!(read_contour_cache(&p), Err(Error::MalformedRow { line: 1, .. })));
    }
}
