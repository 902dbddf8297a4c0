//! Audio ingestion, word annotations, corpus-level standardization and a
//! seeded synthetic corpus generator.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Mono audio with its sample rate.
///
/// `valid_len` is the number of leading samples that carry real audio; it
/// equals `samples.len()` unless the waveform was produced by [`pad_to`].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub utterance_id: String,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    valid_len: usize,
}

impl Waveform {
    pub fn new(utterance_id: impl Into<String>, samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite amplitude at sample {i}")));
        }
        let valid_len = samples.len();
        Ok(Self {
            utterance_id: utterance_id.into(),
            samples,
            sample_rate,
            valid_len,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn valid_len(&self) -> usize {
        self.valid_len
    }

    pub fn valid_samples(&self) -> &[f64] {
        &self.samples[..self.valid_len]
    }

    /// Duration of the real (unpadded) audio in seconds.
    pub fn duration_s(&self) -> f64 {
        self.valid_len as f64 / self.sample_rate as f64
    }
}

/// Reads a PCM WAV file. Integer samples are scaled by `2^(bits-1)`, float
/// samples are clamped to [-1, 1]. Only the first channel is kept and no
/// resampling is done. The utterance id is the file stem.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let unreadable = |reason: String| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason,
    };
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::Unsupported => Error::UnsupportedEncoding(format!("{}", path.display())),
        other => unreadable(other.to_string()),
    })?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;

    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            if spec.bits_per_sample == 0 || spec.bits_per_sample > 32 {
                return Err(Error::UnsupportedEncoding(format!(
                    "{}-bit integer PCM",
                    spec.bits_per_sample
                )));
            }
            let scale = f64::from(1u32 << (spec.bits_per_sample - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| unreadable(e.to_string()))?
        }
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::UnsupportedEncoding(format!(
                    "{}-bit float PCM",
                    spec.bits_per_sample
                )));
            }
            reader
                .into_samples::<f32>()
                .map(|s| s.map(|v| f64::from(v).clamp(-1.0, 1.0)))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| unreadable(e.to_string()))?
        }
    };
    let samples: Vec<f64> = interleaved.into_iter().step_by(channels).collect();
    if samples.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Waveform::new(id, samples, spec.sample_rate)
}

/// Writes the valid region of a waveform as 16-bit mono PCM.
pub fn write_wav(w: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(other.to_string())),
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec).map_err(to_io)?;
    for &x in w.valid_samples() {
        let q = (x.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(to_io)?;
    }
    writer.finalize().map_err(to_io)
}

/// One annotated word, in samples. `end` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSpan {
    pub start: u64,
    pub end: u64,
    pub word: String,
}

/// Ordered, non-overlapping word intervals of a single utterance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordAnnotationSeq {
    entries: Vec<WordSpan>,
}

impl WordAnnotationSeq {
    /// Sorts the entries by start and validates them. Touching intervals
    /// (`next.start == prev.end`) are allowed.
    pub fn new(utterance: &str, mut entries: Vec<WordSpan>) -> Result<Self> {
        for e in &entries {
            if e.start >= e.end {
                return Err(Error::StartNotBeforeEnd {
                    line: 0,
                    start: e.start,
                    end: e.end,
                });
            }
        }
        entries.sort_by_key(|e| (e.start, e.end));
        for pair in entries.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::OverlappingIntervals {
                    utterance: utterance.to_string(),
                    prev_start: pair[0].start,
                    prev_end: pair[0].end,
                    start: pair[1].start,
                    end: pair[1].end,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[WordSpan] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Word start positions in seconds.
    pub fn start_times(&self, sample_rate: u32) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| e.start as f64 / sample_rate as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationFormat {
    /// `start_sample end_sample word`, one word per line.
    TimitWrd,
    /// `utterance_id,start_sample,end_sample,word` with a header row.
    Csv,
}

pub const CSV_HEADER: &str = "utterance_id,start_sample,end_sample,word";

fn parse_sample(field: &str, line: usize) -> Result<u64> {
    field.trim().parse::<u64>().map_err(|_| Error::MalformedLine {
        line,
        reason: format!("expected a sample index, got {field:?}"),
    })
}

fn check_span(line: usize, start: u64, end: u64) -> Result<()> {
    if start >= end {
        return Err(Error::StartNotBeforeEnd { line, start, end });
    }
    Ok(())
}

/// Parses a TIMIT-style `.wrd` file body.
pub fn parse_wrd(text: &str, utterance: &str) -> Result<WordAnnotationSeq> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut parts = raw.split_whitespace();
        let (Some(s), Some(e), Some(word)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::MalformedLine {
                line,
                reason: "expected `start end word`".into(),
            });
        };
        if parts.next().is_some() {
            return Err(Error::MalformedLine {
                line,
                reason: "trailing fields".into(),
            });
        }
        let (start, end) = (parse_sample(s, line)?, parse_sample(e, line)?);
        check_span(line, start, end)?;
        entries.push(WordSpan {
            start,
            end,
            word: word.to_string(),
        });
    }
    WordAnnotationSeq::new(utterance, entries)
}

/// Parses a multi-utterance annotation CSV. The header row is required.
pub fn parse_csv(text: &str) -> Result<BTreeMap<String, WordAnnotationSeq>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::MalformedLine {
                line: 1,
                reason: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut grouped: BTreeMap<String, Vec<WordSpan>> = BTreeMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.splitn(4, ',').collect();
        if fields.len() != 4 || fields[0].is_empty() || fields[3].is_empty() {
            return Err(Error::MalformedLine {
                line,
                reason: "expected `utterance_id,start_sample,end_sample,word`".into(),
            });
        }
        let (start, end) = (parse_sample(fields[1], line)?, parse_sample(fields[2], line)?);
        check_span(line, start, end)?;
        grouped.entry(fields[0].to_string()).or_default().push(WordSpan {
            start,
            end,
            word: fields[3].to_string(),
        });
    }
    grouped
        .into_iter()
        .map(|(utt, entries)| WordAnnotationSeq::new(&utt, entries).map(|seq| (utt, seq)))
        .collect()
}

/// Reads annotations from disk. A `.wrd` file yields one utterance keyed by
/// its file stem.
pub fn parse_annotations(
    path: impl AsRef<Path>,
    format: AnnotationFormat,
) -> Result<BTreeMap<String, WordAnnotationSeq>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    match format {
        AnnotationFormat::TimitWrd => {
            let utt = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let seq = parse_wrd(&text, &utt)?;
            Ok(BTreeMap::from([(utt, seq)]))
        }
        AnnotationFormat::Csv => parse_csv(&text),
    }
}

pub fn to_wrd(seq: &WordAnnotationSeq) -> String {
    let mut out = String::new();
    for e in seq.entries() {
        let _ = writeln!(out, "{} {} {}", e.start, e.end, e.word);
    }
    out
}

pub fn to_csv<'a>(sets: impl IntoIterator<Item = (&'a str, &'a WordAnnotationSeq)>) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (utt, seq) in sets {
        for e in seq.entries() {
            let _ = writeln!(out, "{utt},{},{},{}", e.start, e.end, e.word);
        }
    }
    out
}

/// Pooled mean and population standard deviation over a training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardizationStats {
    pub mean: f64,
    pub std: f64,
    pub total_samples: u64,
}

impl StandardizationStats {
    pub fn to_text(&self) -> String {
        format!("mean={}\nstd={}\ntotal={}\n", self.mean, self.std, self.total_samples)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (mut mean, mut std, mut total) = (None, None, None);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let bad = |reason: &str| Error::MalformedLine {
                line,
                reason: reason.to_string(),
            };
            let (key, value) = raw.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            match key.trim() {
                "mean" => mean = Some(value.trim().parse::<f64>().map_err(|_| bad("bad mean"))?),
                "std" => std = Some(value.trim().parse::<f64>().map_err(|_| bad("bad std"))?),
                "total" => total = Some(value.trim().parse::<u64>().map_err(|_| bad("bad total"))?),
                other => return Err(bad(&format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::MalformedLine {
            line: 0,
            reason: format!("missing key {k}"),
        };
        let stats = Self {
            mean: mean.ok_or_else(|| missing("mean"))?,
            std: std.ok_or_else(|| missing("std"))?,
            total_samples: total.ok_or_else(|| missing("total"))?,
        };
        if !(stats.std > 0.0 && stats.std.is_finite() && stats.mean.is_finite()) || stats.total_samples == 0 {
            return Err(Error::InvalidArgument("stats must have std > 0 and total > 0".into()));
        }
        Ok(stats)
    }
}

/// Pools the valid samples of every waveform and returns their mean and
/// population standard deviation. Longer utterances weigh proportionally.
pub fn compute_stats(waveforms: &[Waveform]) -> Result<StandardizationStats> {
    let first = waveforms
        .first()
        .ok_or_else(|| Error::InvalidArgument("no waveforms".into()))?;
    for w in waveforms {
        if w.sample_rate != first.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: first.sample_rate,
                got: w.sample_rate,
            });
        }
    }
    let total: usize = waveforms.iter().map(Waveform::valid_len).sum();
    if total < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let sum: f64 = waveforms.iter().flat_map(|w| w.valid_samples()).sum();
    let mean = sum / total as f64;
    let sq: f64 = waveforms
        .iter()
        .flat_map(|w| w.valid_samples())
        .map(|x| (x - mean) * (x - mean))
        .sum();
    let std = (sq / total as f64).sqrt();
    if !(std > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(StandardizationStats {
        mean,
        std,
        total_samples: total as u64,
    })
}

pub fn standardize(w: &Waveform, stats: &StandardizationStats) -> Waveform {
    let mut out = w.clone();
    for x in &mut out.samples[..w.valid_len] {
        *x = (*x - stats.mean) / stats.std;
    }
    out
}

/// Right-pads with zeros. The original length is kept as `valid_len`.
pub fn pad_to(w: &Waveform, target_len: usize) -> Result<Waveform> {
    if target_len < w.len() {
        return Err(Error::InvalidArgument(format!(
            "pad target {target_len} shorter than waveform length {}",
            w.len()
        )));
    }
    let mut out = w.clone();
    out.samples.resize(target_len, 0.0);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range<T> {
    pub min: T,
    pub max: T,
}

impl<T> Range<T> {
    pub const fn new(min: T, max: T) -> Self {
        Self { min, max }
    }
}

/// Parameters of the synthetic tone-burst corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub num_utterances: usize,
    pub words_per_utterance: Range<usize>,
    pub word_duration_ms: Range<f64>,
    pub gap_duration_ms: Range<f64>,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_utterances: SplitPlan::default().total(),
            words_per_utterance: Range::new(3, 8),
            word_duration_ms: Range::new(150.0, 400.0),
            gap_duration_ms: Range::new(100.0, 300.0),
            sample_rate: 16_000,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive");
        }
        if self.words_per_utterance.min > self.words_per_utterance.max {
            return bad("words_per_utterance: min > max");
        }
        for (name, r) in [
            ("word_duration_ms", self.word_duration_ms),
            ("gap_duration_ms", self.gap_duration_ms),
        ] {
            if !(r.min > 0.0 && r.min.is_finite() && r.max.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name}: durations must be positive")));
            }
            if r.min > r.max {
                return Err(Error::InvalidArgument(format!("{name}: min > max")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

/// Contiguous train/val/test partition of an ordered utterance list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            train: 200,
            val: 40,
            test: 40,
        }
    }
}

impl SplitPlan {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    pub fn split_of(&self, index: usize) -> Option<Split> {
        if index < self.train {
            Some(Split::Train)
        } else if index < self.train + self.val {
            Some(Split::Val)
        } else if index < self.total() {
            Some(Split::Test)
        } else {
            None
        }
    }
}

fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    ((ms / 1000.0) * sample_rate as f64).round().max(1.0) as usize
}

const NOISE_FLOOR: f64 = 0.003;

fn synth_utterance(spec: &SynthSpec, index: usize) -> (Waveform, WordAnnotationSeq) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let sr = spec.sample_rate as f64;
    let uniform = |rng: &mut ChaCha8Rng, r: Range<f64>| {
        if r.max > r.min {
            rng.random_range(r.min..=r.max)
        } else {
            r.min
        }
    };

    let n_words = rng.random_range(spec.words_per_utterance.min..=spec.words_per_utterance.max);
    let mut samples: Vec<f64> = Vec::new();
    let mut spans = Vec::with_capacity(n_words);

    let lead = ms_to_samples(uniform(&mut rng, spec.gap_duration_ms), spec.sample_rate);
    samples.resize(lead, 0.0);
    for k in 0..n_words {
        let len = ms_to_samples(uniform(&mut rng, spec.word_duration_ms), spec.sample_rate);
        let nyquist = sr / 2.0;
        let f0 = rng.random_range(150.0..(0.4 * nyquist).clamp(151.0, 2500.0));
        let amp = rng.random_range(0.3..0.8);
        let harmonic = if 2.0 * f0 < 0.9 * nyquist {
            rng.random_range(0.2..0.6)
        } else {
            0.0
        };
        let phase = rng.random_range(0.0..2.0 * PI);
        let attack = (rng.random_range(0.002..0.008) * sr).max(1.0);
        let release = (rng.random_range(0.010..0.030) * sr).max(1.0);
        let tremolo_hz = rng.random_range(2.0..6.0);
        let tremolo_depth = rng.random_range(0.0..0.2);
        let start = samples.len();
        for t in 0..len {
            let tt = t as f64;
            let env_a = if tt < attack {
                0.5 - 0.5 * (PI * tt / attack).cos()
            } else {
                1.0
            };
            let rem = (len - t) as f64;
            let env_r = if rem < release {
                0.5 - 0.5 * (PI * rem / release).cos()
            } else {
                1.0
            };
            let trem = 1.0 - tremolo_depth * (0.5 - 0.5 * (2.0 * PI * tremolo_hz * tt / sr).cos());
            let w = 2.0 * PI * f0 * tt / sr + phase;
            let tone = (w.sin() + harmonic * (2.0 * w).sin()) / (1.0 + harmonic);
            samples.push(amp * env_a * env_r * trem * tone);
        }
        spans.push(WordSpan {
            start: start as u64,
            end: (start + len) as u64,
            word: format!("w{k}"),
        });
        let gap = ms_to_samples(uniform(&mut rng, spec.gap_duration_ms), spec.sample_rate);
        samples.resize(samples.len() + gap, 0.0);
    }
    for x in &mut samples {
        *x = (*x + rng.random_range(-NOISE_FLOOR..NOISE_FLOOR)).clamp(-1.0, 1.0);
    }
    let id = format!("synth_{index:04}");
    let annotations = WordAnnotationSeq::new(&id, spans).expect("generated spans are ordered");
    let wave = Waveform::new(id, samples, spec.sample_rate).expect("generated audio is valid");
    (wave, annotations)
}

/// Generates `spec.num_utterances` tone-burst utterances with exact word
/// annotations. Every utterance starts and ends with a gap; each word is a
/// harmonic tone with randomized pitch, level, attack/release and tremolo.
/// Utterance `i` depends only on `(spec, i)`.
pub fn synthesize_corpus(spec: &SynthSpec) -> Result<(Vec<Waveform>, Vec<WordAnnotationSeq>)> {
    use rayon::prelude::*;
    spec.validate()?;
    Ok((0..spec.num_utterances)
        .into_par_iter()
        .map(|i| synth_utterance(spec, i))
        .unzip())
}
