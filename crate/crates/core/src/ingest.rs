//! Dataset ingestion: manifest, per-word audio, syllable segmentations and
//! ground-truth tone labels.
//!
//! A corpus is described by a JSON manifest naming one WAV file and one
//! segmentation TSV per word. Segmentations are produced by hand (or by an
//! external aligner) and are only read here.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Words with more syllables than this are excluded from the active set.
pub const MAX_SYLLABLES: usize = 4;

/// Lowest sample rate that leaves headroom above the 500 Hz pitch ceiling.
pub const MIN_SAMPLE_RATE_HZ: u32 = 8000;

const SEGMENTATION_HEADER: [&str; 4] = ["syllable_index", "start_s", "end_s", "tone_label"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEntry {
    pub word_id: String,
    pub audio_path: PathBuf,
    pub segmentation_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub language_id: String,
    pub speaker_id: String,
    pub entries: Vec<WordEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    language: String,
    speaker: String,
    words: Vec<RawWord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWord {
    id: String,
    audio: String,
    segmentation: String,
}

/// Reads and validates a manifest. Relative paths are resolved against the
/// manifest's own directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: RawManifest = serde_json::from_str(&text).map_err(|e| Error::MalformedManifest {
        path: path.to_path_buf(),
        field: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));

    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(raw.words.len());
    for (i, w) in raw.words.into_iter().enumerate() {
        if w.id.is_empty() {
            return Err(Error::MalformedManifest {
                path: path.to_path_buf(),
                field: format!("words[{i}].id"),
                message: "word id must be non-empty".into(),
            });
        }
        if !seen.insert(w.id.clone()) {
            return Err(Error::DuplicateWordId(w.id));
        }
        let audio_path = base.join(&w.audio);
        let segmentation_path = base.join(&w.segmentation);
        for p in [&audio_path, &segmentation_path] {
            if !p.is_file() {
                return Err(Error::MissingFile(p.clone()));
            }
        }
        entries.push(WordEntry {
            word_id: w.id,
            audio_path,
            segmentation_path,
        });
    }

    Ok(Manifest {
        language_id: raw.language,
        speaker_id: raw.speaker,
        entries,
    })
}

/// Mono PCM audio, samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidAudio("no samples".into()));
        }
        if sample_rate_hz < MIN_SAMPLE_RATE_HZ {
            return Err(Error::InvalidAudio(format!(
                "sample rate {sample_rate_hz} Hz is below {MIN_SAMPLE_RATE_HZ} Hz"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidAudio(format!("non-finite sample at {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

fn map_hound(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::FormatError(msg) => Error::CorruptHeader(format!("{}: {msg}", path.display())),
        hound::Error::Unsupported => {
            Error::UnsupportedFormat(format!("{}: unsupported WAV encoding", path.display()))
        }
        other => Error::CorruptHeader(format!("{}: {other}", path.display())),
    }
}

/// Reads a 16-bit integer or 32-bit float PCM WAV file, averaging channels
/// to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::CorruptHeader(format!("{}: zero channels", path.display())));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: {bits}-bit {fmt:?} samples (need 16-bit int or 32-bit float)",
                path.display()
            )))
        }
    };

    let mono: Vec<f64> = interleaved
        .chunks_exact(channels)
        .map(|frame| (frame.iter().sum::<f64>() / channels as f64).clamp(-1.0, 1.0))
        .collect();
    AudioBuffer::new(mono, spec.sample_rate)
}

/// Writes a mono 16-bit PCM WAV file.
pub fn write_wav(path: impl AsRef<Path>, audio: &AudioBuffer) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in &audio.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

/// One syllable of a word, with its time span inside the word's recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyllableSpan {
    pub word_id: String,
    pub syllable_index: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub tone_label: Option<String>,
    /// Set for syllables that take part in clustering but not in scoring
    /// (neutral tone).
    #[serde(default)]
    pub eval_excluded: bool,
}

/// Reads a segmentation TSV (`syllable_index, start_s, end_s, tone_label`
/// with a header row) for one word.
pub fn load_segmentation(path: impl AsRef<Path>, word_id: &str) -> Result<Vec<SyllableSpan>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let row_err = |line: usize, message: String| Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => break (i + 1, l),
            None => return Err(row_err(1, "missing header row".into())),
        }
    };
    let cols: Vec<&str> = header.1.split('\t').map(str::trim).collect();
    if cols.len() < 3 || cols.len() > 4 || cols[..] != SEGMENTATION_HEADER[..cols.len()] {
        return Err(row_err(
            header.0,
            format!("expected header {:?}, got {:?}", SEGMENTATION_HEADER, cols),
        ));
    }

    let mut spans = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(row_err(lineno, format!("expected 3 or 4 columns, got {}", fields.len())));
        }
        let syllable_index: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| row_err(lineno, format!("syllable_index: {e}")))?;
        let start_s: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|e| row_err(lineno, format!("start_s: {e}")))?;
        let end_s: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| row_err(lineno, format!("end_s: {e}")))?;
        if !(start_s.is_finite() && end_s.is_finite() && 0.0 <= start_s && start_s < end_s) {
            return Err(row_err(
                lineno,
                format!("need 0 <= start_s < end_s, got [{start_s}, {end_s}]"),
            ));
        }
        let tone_label = fields
            .get(3)
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(str::to_owned);
        spans.push(SyllableSpan {
            word_id: word_id.to_owned(),
            syllable_index,
            start_s,
            end_s,
            tone_label,
            eval_excluded: false,
        });
    }

    spans.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for pair in spans.windows(2) {
        if pair[0].end_s > pair[1].start_s {
            return Err(Error::OverlappingSpans {
                word: word_id.to_owned(),
                first: pair[0].syllable_index,
                second: pair[1].syllable_index,
            });
        }
    }
    if spans.iter().enumerate().any(|(i, s)| s.syllable_index != i) {
        return Err(Error::NonContiguousIndices {
            word: word_id.to_owned(),
        });
    }
    Ok(spans)
}

/// True for language tags that denote Mandarin.
pub fn is_mandarin(language_id: &str) -> bool {
    let tag = language_id.trim().to_ascii_lowercase();
    let primary = tag.split(['-', '_']).next().unwrap_or("");
    matches!(primary, "cmn" | "zh" | "mandarin")
}

/// Canonical Mandarin tone number, accepting `T3`, `t3` or `3`.
fn mandarin_tone(label: &str) -> Option<u8> {
    let digits = label.trim().trim_start_matches(['T', 't']);
    match digits.parse::<u8>() {
        Ok(d) if d <= 5 => Some(d),
        _ => None,
    }
}

fn is_mandarin_neutral(label: &str) -> bool {
    let l = label.trim().to_ascii_lowercase();
    matches!(mandarin_tone(&l), Some(0) | Some(5)) || l == "n" || l == "neutral"
}

/// Rewrites Mandarin ground-truth labels for third-tone sandhi and marks
/// neutral-tone syllables as excluded from evaluation.
///
/// Every T3 that is followed by a T3 in the original label sequence becomes
/// T2, so a run of third tones ends in a single T3 preceded by T2s and no
/// adjacent (T3, T3) pair survives. Other languages pass through unchanged.
pub fn apply_sandhi_labels(spans: &[SyllableSpan], language_id: &str) -> Vec<SyllableSpan> {
    let mut out = spans.to_vec();
    if !is_mandarin(language_id) {
        return out;
    }
    let tones: Vec<Option<u8>> = spans
        .iter()
        .map(|s| s.tone_label.as_deref().and_then(mandarin_tone))
        .collect();
    for i in 0..out.len() {
        if tones[i] == Some(3) && tones.get(i + 1).copied().flatten() == Some(3) {
            out[i].tone_label = Some("T2".into());
        }
        if let Some(label) = &out[i].tone_label {
            if is_mandarin_neutral(label) {
                out[i].eval_excluded = true;
            }
        }
    }
    out
}

/// One word of a loaded corpus.
#[derive(Debug, Clone)]
pub struct Word {
    pub word_id: String,
    pub audio: AudioBuffer,
    pub spans: Vec<SyllableSpan>,
    /// Too many syllables; kept for reporting only.
    pub excluded: bool,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub language_id: String,
    pub speaker_id: String,
    pub words: Vec<Word>,
}

impl Corpus {
    /// Words eligible for analysis (at most [`MAX_SYLLABLES`] syllables).
    pub fn active_words(&self) -> impl Iterator<Item = &Word> {
        self.words.iter().filter(|w| !w.excluded)
    }
}

/// Loads every word of a manifest in parallel, applying the sandhi label
/// rewrite and the syllable-count filter.
pub fn assemble_corpus(manifest: &Manifest) -> Result<Corpus> {
    let words = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let audio = read_wav(&entry.audio_path)?;
            let spans = load_segmentation(&entry.segmentation_path, &entry.word_id)?;
            let spans = apply_sandhi_labels(&spans, &manifest.language_id);
            let excluded = spans.len() > MAX_SYLLABLES;
            if excluded {
                log::warn!(
                    "word {}: {} syllables exceeds {MAX_SYLLABLES}, excluded",
                    entry.word_id,
                    spans.len()
                );
            }
            Ok(Word {
                word_id: entry.word_id.clone(),
                audio,
                spans,
                excluded,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        language_id: manifest.language_id.clone(),
        speaker_id: manifest.speaker_id.clone(),
        words,
    })
}
