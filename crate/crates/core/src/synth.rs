//! Synthetic fixtures with known ground truth: test audio and tone-contour
//! corpora shaped like the Mandarin and Cantonese lexical tones.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AudioBuffer;
use crate::pitch::{ContourRecord, NormalizedContour, CONTOUR_LEN};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Signal {
    Sine { f_hz: f64 },
    /// Linear frequency sweep from `f0_hz` to `f1_hz` over the duration.
    Chirp { f0_hz: f64, f1_hz: f64 },
    Silence,
}

/// Synthesizes a unit-amplitude test signal.
pub fn gen_audio(signal: Signal, duration_s: f64, sample_rate_hz: u32) -> Result<AudioBuffer> {
    let sr = sample_rate_hz as f64;
    let n = (duration_s * sr).round() as usize;
    let check = |f: f64| {
        if f > 0.0 && f < sr / 2.0 {
            Ok(())
        } else {
            Err(Error::InvalidFrequency(f))
        }
    };
    let samples = match signal {
        Signal::Sine { f_hz } => {
            check(f_hz)?;
            (0..n).map(|i| (2.0 * PI * f_hz * i as f64 / sr).sin()).collect()
        }
        Signal::Chirp { f0_hz, f1_hz } => {
            check(f0_hz)?;
            check(f1_hz)?;
            let rate = (f1_hz - f0_hz) / duration_s;
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    (2.0 * PI * (f0_hz * t + 0.5 * rate * t * t)).sin()
                })
                .collect()
        }
        Signal::Silence => vec![0.0; n],
    };
    AudioBuffer::new(samples, sample_rate_hz)
}

/// Instantaneous frequency of a linear chirp at time `t`.
pub fn chirp_frequency(f0_hz: f64, f1_hz: f64, duration_s: f64, t: f64) -> f64 {
    f0_hz + (f1_hz - f0_hz) * t / duration_s
}

/// Frequency-modulated tone whose instantaneous frequency follows `f0_hz(t)`,
/// with a weak second harmonic.
pub fn gen_pitch_audio(
    f0_hz: impl Fn(f64) -> f64,
    duration_s: f64,
    sample_rate_hz: u32,
) -> Result<AudioBuffer> {
    let sr = sample_rate_hz as f64;
    let n = (duration_s * sr).round() as usize;
    let mut phase: f64 = 0.0;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let f = f0_hz(i as f64 / sr);
        if !(f > 0.0 && f < sr / 4.0) {
            return Err(Error::InvalidFrequency(f));
        }
        samples.push(0.6 * phase.sin() + 0.2 * (2.0 * phase).sin());
        phase += 2.0 * PI * f / sr;
    }
    AudioBuffer::new(samples, sample_rate_hz)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneTemplate {
    pub name: String,
    /// (position in [0, 1], level in [0, 1]); positions strictly increase
    /// from 0 to 1.
    pub control_points: Vec<(f64, f64)>,
}

impl ToneTemplate {
    pub fn new(name: impl Into<String>, control_points: Vec<(f64, f64)>) -> Result<Self> {
        let ok = control_points.len() >= 2
            && control_points[0].0 == 0.0
            && control_points[control_points.len() - 1].0 == 1.0
            && control_points.windows(2).all(|w| w[0].0 < w[1].0)
            && control_points.iter().all(|p| (0.0..=1.0).contains(&p.1));
        if !ok {
            return Err(Error::Config(format!("invalid control points {control_points:?}")));
        }
        Ok(Self {
            name: name.into(),
            control_points,
        })
    }

    /// Piecewise-linear level at `x` in [0, 1].
    pub fn level(&self, x: f64) -> f64 {
        let cp = &self.control_points;
        let seg = cp.windows(2).find(|w| x <= w[1].0).unwrap_or(&cp[cp.len() - 2..]);
        let (x0, y0) = seg[0];
        let (x1, y1) = seg[1];
        y0 + (y1 - y0) * ((x - x0) / (x1 - x0)).clamp(0.0, 1.0)
    }

    /// The template sampled on the contour grid.
    pub fn sampled(&self) -> Vec<f64> {
        (0..CONTOUR_LEN)
            .map(|i| self.level(i as f64 / (CONTOUR_LEN - 1) as f64))
            .collect()
    }
}

/// High level, rising, dipping and falling shapes.
pub fn mandarin_templates() -> Vec<ToneTemplate> {
    vec![
        ToneTemplate::new("T1", vec![(0.0, 0.9), (1.0, 0.9)]).unwrap(),
        ToneTemplate::new("T2", vec![(0.0, 0.3), (1.0, 0.8)]).unwrap(),
        ToneTemplate::new("T3", vec![(0.0, 0.35), (0.5, 0.1), (1.0, 0.6)]).unwrap(),
        ToneTemplate::new("T4", vec![(0.0, 0.95), (1.0, 0.15)]).unwrap(),
    ]
}

/// Six-tone Cantonese-like inventory (55, 25, 33, 21, 23, 22).
pub fn cantonese_templates() -> Vec<ToneTemplate> {
    vec![
        ToneTemplate::new("T1", vec![(0.0, 0.9), (1.0, 0.9)]).unwrap(),
        ToneTemplate::new("T2", vec![(0.0, 0.3), (1.0, 0.85)]).unwrap(),
        ToneTemplate::new("T3", vec![(0.0, 0.5), (1.0, 0.5)]).unwrap(),
        ToneTemplate::new("T4", vec![(0.0, 0.25), (1.0, 0.05)]).unwrap(),
        ToneTemplate::new("T5", vec![(0.0, 0.25), (1.0, 0.5)]).unwrap(),
        ToneTemplate::new("T6", vec![(0.0, 0.27), (1.0, 0.25)]).unwrap(),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub templates: Vec<ToneTemplate>,
    pub per_class_count: usize,
    pub jitter_sd: f64,
    pub level_shift_sd: f64,
    /// Inclusive range of syllables per generated word.
    pub syllables_per_word: (usize, usize),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            templates: mandarin_templates(),
            per_class_count: 100,
            jitter_sd: 0.03,
            level_shift_sd: 0.05,
            syllables_per_word: (2, 4),
            seed: 2020,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub contours: Vec<NormalizedContour>,
    pub labels: Vec<String>,
}

impl SynthCorpus {
    pub fn to_records(&self) -> Vec<ContourRecord> {
        self.contours
            .iter()
            .zip(&self.labels)
            .map(|(c, l)| ContourRecord {
                word: c.word_id.clone(),
                syll: c.syllable_index,
                tone: Some(l.clone()),
                values: c.values().to_vec(),
            })
            .collect()
    }
}

/// Generates `per_class_count` noisy copies of each template, grouped into
/// words of random length.
pub fn gen_contour_corpus(cfg: &SynthConfig) -> Result<SynthCorpus> {
    let (min_len, max_len) = cfg.syllables_per_word;
    if cfg.templates.is_empty() || cfg.per_class_count == 0 || min_len == 0 || min_len > max_len {
        return Err(Error::Config("empty synthetic corpus configuration".into()));
    }
    if !(cfg.jitter_sd >= 0.0 && cfg.level_shift_sd >= 0.0) {
        return Err(Error::Config("noise standard deviations must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, cfg.jitter_sd).map_err(|e| Error::Config(e.to_string()))?;
    let shift = Normal::new(0.0, cfg.level_shift_sd).map_err(|e| Error::Config(e.to_string()))?;

    let mut items: Vec<(usize, Vec<f64>)> = Vec::new();
    for (k, template) in cfg.templates.iter().enumerate() {
        let base = template.sampled();
        for _ in 0..cfg.per_class_count {
            let s = shift.sample(&mut rng);
            let values = base
                .iter()
                .map(|v| (v + s + jitter.sample(&mut rng)).clamp(0.0, 1.0))
                .collect();
            items.push((k, values));
        }
    }
    items.shuffle(&mut rng);

    let mut contours = Vec::with_capacity(items.len());
    let mut labels = Vec::with_capacity(items.len());
    let mut remaining = items.into_iter().peekable();
    let mut word = 0;
    while remaining.peek().is_some() {
        let len = rng.random_range(min_len..=max_len);
        let word_id = format!("w{word:04}");
        for (syll, (k, values)) in remaining.by_ref().take(len).enumerate() {
            contours.push(NormalizedContour::new(word_id.clone(), syll, values)?);
            labels.push(cfg.templates[k].name.clone());
        }
        word += 1;
    }
    Ok(SynthCorpus { contours, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_definition() {
        let a = gen_audio(Signal::Sine { f_hz: 220.0 }, 1.0, 44100).unwrap();
        assert_eq!(a.samples().len(), 44100);
        let peak = a.samples().iter().fold(0.0f64, |m, s| m.max(s.abs()));
        assert!((peak - 1.0).abs() < 1e-3);
    }

    #[test]
    fn silence_and_bad_frequency() {
        let s = gen_audio(Signal::Silence, 0.5, 16000).unwrap();
        assert!(s.samples().iter().all(|&x| x == 0.0));
        assert!(matches!(
            gen_audio(Signal::Sine { f_hz: 9000.0 }, 1.0, 16000),
            Err(Error::InvalidFrequency(_))
        ));
    }

    #[test]
    fn chirp_midpoint() {
        assert_eq!(chirp_frequency(120.0, 240.0, 1.0, 0.5), 180.0);
    }

    #[test]
    fn noiseless_equals_template() {
        let cfg = SynthConfig {
            jitter_sd: 0.0,
            level_shift_sd: 0.0,
            ..SynthConfig::default()
        };
        let corpus = gen_contour_corpus(&cfg).unwrap();
        let templates = mandarin_templates();
        for (c, l) in corpus.contours.iter().zip(&corpus.labels) {
            let t = templates.iter().find(|t| &t.name == l).unwrap();
            assert_eq!(c.values(), &t.sampled()[..]);
        }
    }

    #[test]
    fn default_size_and_determinism() {
        let cfg = SynthConfig::default();
        let a = gen_contour_corpus(&cfg).unwrap();
        assert_eq!(a.contours.len(), 400);
        for name in ["T1", "T2", "T3", "T4"] {
            assert_eq!(a.labels.iter().filter(|l| *l == name).count(), 100);
        }
        assert_eq!(a, gen_contour_corpus(&cfg).unwrap());
    }

    #[test]
    fn words_are_contiguous_and_bounded() {
        let corpus = gen_contour_corpus(&SynthConfig::default()).unwrap();
        let mut by_word: std::collections::BTreeMap<&str, Vec<usize>> = Default::default();
        for c in &corpus.contours {
            by_word.entry(&c.word_id).or_default().push(c.syllable_index);
        }
        let n = by_word.len();
        for (i, (_, sylls)) in by_word.into_iter().enumerate() {
            assert_eq!(sylls, (0..sylls.len()).collect::<Vec<_>>());
            // The final word takes whatever is left over.
            assert!(sylls.len() <= 4 && (sylls.len() >= 2 || i == n - 1));
        }
    }

    #[test]
    fn template_validation() {
        assert!(ToneTemplate::new("x", vec![(0.1, 0.5), (1.0, 0.5)]).is_err());
        assert!(ToneTemplate::new("x", vec![(0.0, 0.5), (0.0, 0.5), (1.0, 0.2)]).is_err());
        let dip = &mandarin_templates()[2];
        assert!((dip.level(0.25) - 0.225).abs() < 1e-12);
    }
}
