use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use segwords::classifier::{predict, read_logits, softmax, write_logits, LabeledUtterance, ModelParams};
use segwords::corpus::Split;
use segwords::labeling::frame_len_samples;
use segwords::postprocess::{
    boundaries_to_csv, collapse_clusters, decode, frames_to_times, segment, segments_to_csv, BoundaryList,
    SelectionStrategy, TimeConvention,
};

use super::resolve_config;
use crate::error::{CliError, CliResult};
use crate::store::{read_text, write_atomic, Prepared};
use crate::ConfigArgs;

pub enum Source {
    Model { prepared: PathBuf, model: PathBuf },
    Logits { dir: PathBuf },
}

impl Source {
    pub fn new(prepared: Option<PathBuf>, model: Option<PathBuf>, logits: Option<PathBuf>) -> CliResult<Self> {
        match (prepared, model, logits) {
            (Some(prepared), Some(model), None) => Ok(Self::Model { prepared, model }),
            (None, None, Some(dir)) => Ok(Self::Logits { dir }),
            _ => Err(CliError::input("use either --prepared with --model, or --logits")),
        }
    }
}

/// Decoded, collapsed and timestamped boundaries for each utterance.
pub fn predict_boundaries(
    params: &ModelParams,
    data: &[LabeledUtterance],
    selection: SelectionStrategy,
    convention: TimeConvention,
) -> CliResult<BTreeMap<String, BoundaryList>> {
    data.iter()
        .map(|u| {
            let f = &u.features;
            let logits = predict(params, f)?;
            let probs = softmax(&logits, f.frame_len);
            let idx = collapse_clusters(&decode(&probs, u.labels.valid_frames), selection);
            let b = frames_to_times(&f.utterance_id, &idx, f.frame_len, f.sample_rate, convention);
            Ok((f.utterance_id.clone(), b))
        })
        .collect()
}

pub fn run(
    args: &ConfigArgs,
    source: Source,
    split: Split,
    out: &Path,
    segments_out: Option<&Path>,
    logits_out: Option<&Path>,
) -> CliResult {
    let cfg = resolve_config(args)?;
    let selection: SelectionStrategy = cfg.postprocess.selection.into();
    let convention: TimeConvention = cfg.postprocess.time_convention.into();

    // (boundaries, utterance duration in seconds)
    let mut results: Vec<(BoundaryList, f64)> = Vec::new();
    match source {
        Source::Model { prepared, model } => {
            let prepared = Prepared::load(&prepared)?;
            let params =
                ModelParams::from_text(&read_text(&model)?).map_err(|e| CliError::from(e).context(model.display()))?;
            for (i, (meta, u)) in prepared.utterances.iter().zip(&prepared.data).enumerate() {
                if meta.split != split {
                    continue;
                }
                if let Some(dir) = logits_out {
                    let l = predict(&params, &u.features)?;
                    std::fs::create_dir_all(dir)?;
                    write_logits(&l, dir.join(format!("{}.wseg", meta.utterance_id)))?;
                }
                let b = predict_boundaries(&params, std::slice::from_ref(u), selection, convention)?
                    .pop_first()
                    .map(|(_, b)| b)
                    .expect("one utterance in, one out");
                results.push((b, prepared.duration_s(i)));
            }
        }
        Source::Logits { dir } => {
            let sample_rate = cfg.labeling.sample_rate;
            let frame_len = frame_len_samples(sample_rate, cfg.labeling.frame_ms)?;
            let expected_us = (cfg.labeling.frame_ms * 1000.0).round() as u32;
            let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| CliError::input(format!("cannot list {}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "wseg"))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(CliError::input(format!("no .wseg files in {}", dir.display())));
            }
            for path in files {
                let l = read_logits(&path).map_err(|e| CliError::from(e).context(path.display()))?;
                if l.frame_duration_us != expected_us {
                    return Err(CliError::input(format!(
                        "{}: frame_duration_us {} does not match configured {expected_us}",
                        path.display(),
                        l.frame_duration_us
                    )));
                }
                let probs = softmax(&l, frame_len);
                let idx = collapse_clusters(&decode(&probs, l.num_frames()), selection);
                let b = frames_to_times(&l.utterance_id, &idx, frame_len, sample_rate, convention);
                let duration = l.num_frames() as f64 * f64::from(l.frame_duration_us) / 1e6;
                results.push((b, duration));
            }
        }
    }

    write_atomic(out, boundaries_to_csv(results.iter().map(|(b, _)| b)))?;
    if let Some(path) = segments_out {
        let segs: Vec<(String, Vec<(f64, f64)>)> = results
            .iter()
            .map(|(b, d)| (b.utterance_id.clone(), segment(b, *d)))
            .collect();
        write_atomic(
            path,
            segments_to_csv(segs.iter().map(|(u, s)| (u.as_str(), s.as_slice()))),
        )?;
    }
    let n: usize = results.iter().map(|(b, _)| b.times.len()).sum();
    println!(
        "{n} boundaries over {} utterances written to {}",
        results.len(),
        out.display()
    );
    Ok(())
}
