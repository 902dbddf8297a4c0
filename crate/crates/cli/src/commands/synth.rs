use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use segwords::corpus::{synthesize_corpus, to_csv, write_wav, Range, SplitPlan, SynthSpec};

use crate::error::{CliError, CliResult};
use crate::store::{read_text, write_atomic, MANIFEST_HEADER};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitFile {
    train: usize,
    val: usize,
    test: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    num_utterances: Option<usize>,
    words_per_utterance: Option<[usize; 2]>,
    word_duration_ms: Option<[f64; 2]>,
    gap_duration_ms: Option<[f64; 2]>,
    sample_rate: Option<u32>,
    seed: Option<u64>,
    split: Option<SplitFile>,
}

fn load_spec(path: Option<&Path>) -> CliResult<(SynthSpec, SplitPlan)> {
    let Some(path) = path else {
        return Ok((SynthSpec::default(), SplitPlan::default()));
    };
    let file: SpecFile = toml::from_str(&read_text(path)?)
        .map_err(|e| CliError::input(format!("synth spec {}: {e}", path.display())))?;
    let d = SynthSpec::default();
    let spec = SynthSpec {
        num_utterances: file.num_utterances.unwrap_or(d.num_utterances),
        words_per_utterance: file
            .words_per_utterance
            .map_or(d.words_per_utterance, |[a, b]| Range::new(a, b)),
        word_duration_ms: file
            .word_duration_ms
            .map_or(d.word_duration_ms, |[a, b]| Range::new(a, b)),
        gap_duration_ms: file
            .gap_duration_ms
            .map_or(d.gap_duration_ms, |[a, b]| Range::new(a, b)),
        sample_rate: file.sample_rate.unwrap_or(d.sample_rate),
        seed: file.seed.unwrap_or(d.seed),
    };
    spec.validate()
        .map_err(|e| CliError::input(format!("synth spec {}: {e}", path.display())))?;
    let n = spec.num_utterances;
    let plan = match file.split {
        Some(s) => SplitPlan {
            train: s.train,
            val: s.val,
            test: s.test,
        },
        None => SplitPlan {
            train: n - 2 * (n / 7),
            val: n / 7,
            test: n / 7,
        },
    };
    if plan.total() != n {
        return Err(CliError::input(format!(
            "synth spec {}: split sums to {} but num_utterances = {n}",
            path.display(),
            plan.total()
        )));
    }
    Ok((spec, plan))
}

pub fn run(spec_path: Option<&Path>, out: &Path) -> CliResult {
    let (spec, plan) = load_spec(spec_path)?;
    let (waves, anns) = synthesize_corpus(&spec)?;
    let wav_dir = out.join("wav");
    std::fs::create_dir_all(&wav_dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", wav_dir.display())))?;
    waves.par_iter().try_for_each(|w| {
        let path = wav_dir.join(format!("{}.wav", w.utterance_id));
        write_wav(w, &path).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
    })?;

    let mut manifest = format!("{MANIFEST_HEADER}\n");
    for (i, w) in waves.iter().enumerate() {
        let split = plan.split_of(i).expect("plan covers every utterance");
        let _ = writeln!(manifest, "{id},wav/{id}.wav,{}", split.as_str(), id = w.utterance_id);
    }
    write_atomic(&out.join("manifest.csv"), manifest)?;
    let ann_csv = to_csv(waves.iter().map(|w| w.utterance_id.as_str()).zip(&anns));
    write_atomic(&out.join("annotations.csv"), ann_csv)?;
    println!("synthesized {} utterances into {}", waves.len(), out.display());
    Ok(())
}
