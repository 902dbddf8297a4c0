use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use segwords::corpus::{
    compute_stats, load_wav, parse_annotations, AnnotationFormat, Split, Waveform, WordAnnotationSeq,
};
use segwords::labeling::{augment_labels, frame_len_samples, AugmentConfig};
use segwords::pipeline::prepare_utterances;
use segwords::postprocess::BoundaryList;

use super::resolve_config;
use crate::error::{CliError, CliResult};
use crate::store::{
    format_features, format_utterances, label_lines, read_manifest, refs_csv, refs_file_for, write_atomic, PrepareMeta,
    UtteranceMeta, AUG_LABELS_FILE, FEATURES_FILE, LABELS_FILE, META_FILE, REFS_FILE, STATS_FILE, UTTERANCES_FILE,
};
use crate::ConfigArgs;

pub fn run(args: &ConfigArgs, manifest: &Path, annotations: Option<&Path>, out: &Path) -> CliResult {
    let cfg = resolve_config(args)?;
    let entries = read_manifest(manifest)?;
    if entries.is_empty() {
        return Err(CliError::input(format!("{}: manifest is empty", manifest.display())));
    }

    let csv_annotations = match annotations {
        Some(path) => Some(
            parse_annotations(path, AnnotationFormat::Csv).map_err(|e| CliError::from(e).context(path.display()))?,
        ),
        None => None,
    };
    let anns: Vec<WordAnnotationSeq> = entries
        .iter()
        .map(|e| match &csv_annotations {
            Some(map) => map
                .get(&e.utterance_id)
                .cloned()
                .ok_or_else(|| CliError::input(format!("no annotations for utterance {}", e.utterance_id))),
            None => {
                let wrd = e.wav_path.with_extension("wrd");
                if !wrd.exists() {
                    return Err(CliError::input(format!(
                        "no annotations for utterance {} (missing {})",
                        e.utterance_id,
                        wrd.display()
                    )));
                }
                let mut map = parse_annotations(&wrd, AnnotationFormat::TimitWrd)
                    .map_err(|err| CliError::from(err).context(wrd.display()))?;
                Ok(map.pop_first().map(|(_, seq)| seq).unwrap_or_default())
            }
        })
        .collect::<CliResult<_>>()?;

    let waves: Vec<Waveform> = entries
        .par_iter()
        .map(|e| {
            let mut w = load_wav(&e.wav_path).map_err(|err| CliError::from(err).context(&e.utterance_id))?;
            w.utterance_id = e.utterance_id.clone();
            Ok(w)
        })
        .collect::<CliResult<_>>()?;

    let sample_rate = waves[0].sample_rate;
    if let Some(w) = waves.iter().find(|w| w.sample_rate != sample_rate) {
        return Err(CliError::input(format!(
            "{}: sample rate {} Hz differs from corpus rate {sample_rate} Hz",
            w.utterance_id, w.sample_rate
        )));
    }
    let train_waves: Vec<Waveform> = entries
        .iter()
        .zip(&waves)
        .filter(|(e, _)| e.split == Split::Train)
        .map(|(_, w)| w.clone())
        .collect();
    if train_waves.is_empty() {
        return Err(CliError::input(
            "manifest has no train utterances to compute statistics from",
        ));
    }
    let stats = compute_stats(&train_waves)?;
    let pad_len = waves.iter().map(Waveform::len).max();
    let frame_len = frame_len_samples(sample_rate, cfg.labeling.frame_ms)?;

    let data = prepare_utterances(
        &waves,
        &anns,
        &stats,
        cfg.labeling.frame_ms,
        pad_len,
        cfg.labeling.inside_rule.into(),
    )
    .map_err(|e| CliError::from(e).context("prepare"))?;

    let metas: Vec<UtteranceMeta> = entries
        .iter()
        .zip(&waves)
        .zip(&data)
        .map(|((e, w), d)| UtteranceMeta {
            utterance_id: e.utterance_id.clone(),
            split: e.split,
            valid_samples: w.valid_len(),
            valid_frames: d.labels.valid_frames,
            num_frames: d.labels.num_frames(),
        })
        .collect();
    let augment = AugmentConfig {
        radius: cfg.labeling.aug_radius,
    };
    let augmented: Vec<_> = entries
        .iter()
        .zip(&data)
        .filter(|(e, _)| e.split == Split::Train)
        .map(|(e, d)| (e.utterance_id.as_str(), augment_labels(&d.labels, augment)))
        .collect();
    let refs: Vec<BoundaryList> = entries
        .iter()
        .zip(&data)
        .map(|(e, d)| BoundaryList::new(e.utterance_id.clone(), d.reference.clone()))
        .collect();

    let meta = PrepareMeta {
        version: 1,
        frame_ms: cfg.labeling.frame_ms,
        frame_len,
        sample_rate,
        aug_radius: cfg.labeling.aug_radius,
    };
    write_atomic(&out.join(META_FILE), meta.to_toml())?;
    write_atomic(&out.join(STATS_FILE), stats.to_text())?;
    write_atomic(&out.join(UTTERANCES_FILE), format_utterances(&metas))?;
    write_atomic(
        &out.join(LABELS_FILE),
        label_lines(
            entries
                .iter()
                .zip(&data)
                .map(|(e, d)| (e.utterance_id.as_str(), &d.labels)),
        ),
    )?;
    write_atomic(
        &out.join(AUG_LABELS_FILE),
        label_lines(augmented.iter().map(|(u, y)| (*u, y))),
    )?;
    write_atomic(
        &out.join(FEATURES_FILE),
        format_features(&data.iter().map(|d| &d.features).collect::<Vec<_>>()),
    )?;
    write_atomic(&out.join(REFS_FILE), refs_csv(&refs))?;
    let mut by_split: BTreeMap<Split, Vec<&BoundaryList>> = BTreeMap::new();
    for (e, r) in entries.iter().zip(&refs) {
        by_split.entry(e.split).or_default().push(r);
    }
    for split in [Split::Train, Split::Val, Split::Test] {
        let lists = by_split.remove(&split).unwrap_or_default();
        write_atomic(&out.join(refs_file_for(split)), refs_csv(lists))?;
    }
    println!(
        "prepared {} utterances ({} Hz, {frame_len}-sample frames) into {}",
        entries.len(),
        sample_rate,
        out.display()
    );
    Ok(())
}
