//! On-disk layouts shared by the subcommands: manifests, the prepared
//! directory and atomic file writes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use segwords::classifier::{FeatureMatrix, LabeledUtterance, FEATURE_DIM};
use segwords::corpus::Split;
use segwords::labeling::{format_label_line, parse_label_line};
use segwords::postprocess::{boundaries_to_csv, parse_boundary_csv, BoundaryList};

use crate::error::{CliError, CliResult};

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::input(format!("cannot create {}: {e}", parent.display())))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::input(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents).map_err(|e| CliError::input(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        CliError::input(format!("cannot write {}: {e}", path.display()))
    })
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

pub const MANIFEST_HEADER: &str = "utterance_id,wav_path,split";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utterance_id: String,
    /// Resolved against the manifest's directory.
    pub wav_path: PathBuf,
    pub split: Split,
}

/// Accepts `utterance_id,wav_path,split` or `utterance_id,wav_path` (every
/// utterance in the train split).
pub fn read_manifest(path: &Path) -> CliResult<Vec<ManifestEntry>> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut lines = text.lines().enumerate();
    let with_split = match lines.next().map(|(_, h)| h.trim()) {
        Some(MANIFEST_HEADER) => true,
        Some("utterance_id,wav_path") => false,
        _ => {
            return Err(CliError::input(format!(
                "{}: expected header `{MANIFEST_HEADER}`",
                path.display()
            )))
        }
    };
    let mut out = Vec::new();
    for (idx, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        let bad = || CliError::input(format!("{}: line {}: malformed manifest row", path.display(), idx + 1));
        let split = match (with_split, fields.len()) {
            (true, 3) => fields[2].trim().parse::<Split>().map_err(|_| bad())?,
            (false, 2) => Split::Train,
            _ => return Err(bad()),
        };
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(bad());
        }
        out.push(ManifestEntry {
            utterance_id: fields[0].to_string(),
            wav_path: base.join(fields[1]),
            split,
        });
    }
    Ok(out)
}

/// Per-utterance bookkeeping written by `prepare`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceMeta {
    pub utterance_id: String,
    pub split: Split,
    pub valid_samples: usize,
    pub valid_frames: usize,
    pub num_frames: usize,
}

const UTTERANCES_HEADER: &str = "utterance_id,split,valid_samples,valid_frames,num_frames";

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PrepareMeta {
    pub version: u32,
    pub frame_ms: f64,
    pub frame_len: usize,
    pub sample_rate: u32,
    pub aug_radius: usize,
}

impl PrepareMeta {
    pub fn to_toml(&self) -> String {
        format!(
            "version = {}\nframe_ms = {:?}\nframe_len = {}\nsample_rate = {}\naug_radius = {}\n",
            self.version, self.frame_ms, self.frame_len, self.sample_rate, self.aug_radius
        )
    }
}

pub fn format_features(features: &[&FeatureMatrix]) -> String {
    let mut out = String::new();
    for f in features {
        let _ = writeln!(out, "{}\t{}\t{}", f.utterance_id, f.rows.len(), FEATURE_DIM);
        for row in &f.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

fn parse_features(text: &str, frame_len: usize, sample_rate: u32) -> CliResult<Vec<FeatureMatrix>> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate();
    while let Some((idx, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let bad = |line: usize, what: &str| CliError::input(format!("features.txt: line {}: {what}", line + 1));
        let parts: Vec<&str> = header.split('\t').collect();
        let [utt, m, d] = parts[..] else {
            return Err(bad(idx, "expected `utterance_id<TAB>frames<TAB>dim`"));
        };
        let m: usize = m.parse().map_err(|_| bad(idx, "bad frame count"))?;
        if d != FEATURE_DIM.to_string() {
            return Err(bad(idx, "unexpected feature dimension"));
        }
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            let (i, line) = lines.next().ok_or_else(|| bad(idx, "truncated utterance block"))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| bad(i, "bad real"))?;
            let row: [f64; FEATURE_DIM] = vals.try_into().map_err(|_| bad(i, "wrong row width"))?;
            rows.push(row);
        }
        out.push(FeatureMatrix {
            utterance_id: utt.to_string(),
            rows,
            frame_len,
            sample_rate,
        });
    }
    Ok(out)
}

pub fn format_utterances(meta: &[UtteranceMeta]) -> String {
    let mut out = format!("{UTTERANCES_HEADER}\n");
    for m in meta {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            m.utterance_id,
            m.split.as_str(),
            m.valid_samples,
            m.valid_frames,
            m.num_frames
        );
    }
    out
}

fn parse_utterances(text: &str) -> CliResult<Vec<UtteranceMeta>> {
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, h)| h.trim()) != Some(UTTERANCES_HEADER) {
        return Err(CliError::input("utterances.csv: bad header"));
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, raw)| {
            let bad = || CliError::input(format!("utterances.csv: line {}: malformed row", idx + 1));
            let f: Vec<&str> = raw.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad());
            Ok(UtteranceMeta {
                utterance_id: f[0].to_string(),
                split: f[1].parse().map_err(|_| bad())?,
                valid_samples: num(f[2])?,
                valid_frames: num(f[3])?,
                num_frames: num(f[4])?,
            })
        })
        .collect()
}

/// Everything `prepare` wrote, loaded back in manifest order.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub meta: PrepareMeta,
    pub utterances: Vec<UtteranceMeta>,
    pub data: Vec<LabeledUtterance>,
}

pub const STATS_FILE: &str = "stats.txt";
pub const LABELS_FILE: &str = "labels.txt";
pub const AUG_LABELS_FILE: &str = "labels_train_aug.txt";
pub const FEATURES_FILE: &str = "features.txt";
pub const UTTERANCES_FILE: &str = "utterances.csv";
pub const META_FILE: &str = "prepare.toml";
pub const REFS_FILE: &str = "refs.csv";

pub fn refs_file_for(split: Split) -> String {
    format!("refs_{}.csv", split.as_str())
}

impl Prepared {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let meta: PrepareMeta = toml::from_str(&read_text(&dir.join(META_FILE))?)
            .map_err(|e| CliError::input(format!("{}: {e}", dir.join(META_FILE).display())))?;
        let utterances = parse_utterances(&read_text(&dir.join(UTTERANCES_FILE))?)?;
        let features = parse_features(&read_text(&dir.join(FEATURES_FILE))?, meta.frame_len, meta.sample_rate)?;
        let mut labels = BTreeMap::new();
        for (idx, line) in read_text(&dir.join(LABELS_FILE))?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (utt, y) = parse_label_line(line, meta.frame_len, idx + 1)?;
            labels.insert(utt, y);
        }
        let mut refs = parse_boundary_csv(&read_text(&dir.join(REFS_FILE))?)?;
        let mut features: BTreeMap<String, FeatureMatrix> =
            features.into_iter().map(|f| (f.utterance_id.clone(), f)).collect();

        let mut data = Vec::with_capacity(utterances.len());
        for u in &utterances {
            let missing = |what: &str| CliError::input(format!("prepared data has no {what} for {}", u.utterance_id));
            let features = features.remove(&u.utterance_id).ok_or_else(|| missing("features"))?;
            let mut labels = labels.remove(&u.utterance_id).ok_or_else(|| missing("labels"))?;
            if labels.num_frames() != u.num_frames || features.num_frames() != u.num_frames {
                return Err(CliError::input(format!("{}: frame counts disagree", u.utterance_id)));
            }
            labels.valid_frames = u.valid_frames;
            let reference = refs.remove(&u.utterance_id).map(|b| b.times).unwrap_or_default();
            data.push(LabeledUtterance {
                features,
                labels,
                reference,
            });
        }
        Ok(Self { meta, utterances, data })
    }

    pub fn split(&self, split: Split) -> Vec<LabeledUtterance> {
        self.utterances
            .iter()
            .zip(&self.data)
            .filter(|(m, _)| m.split == split)
            .map(|(_, d)| d.clone())
            .collect()
    }

    pub fn duration_s(&self, index: usize) -> f64 {
        self.utterances[index].valid_samples as f64 / self.meta.sample_rate as f64
    }
}

pub fn label_lines<'a>(rows: impl IntoIterator<Item = (&'a str, &'a segwords::labeling::FrameLabelSeq)>) -> String {
    let mut out = String::new();
    for (utt, y) in rows {
        out.push_str(&format_label_line(utt, y));
        out.push('\n');
    }
    out
}

pub fn refs_csv<'a>(lists: impl IntoIterator<Item = &'a BoundaryList>) -> String {
    boundaries_to_csv(lists)
}
