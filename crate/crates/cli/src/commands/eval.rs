use std::collections::BTreeMap;
use std::path::Path;

use segwords::corpus::{parse_csv, CSV_HEADER};
use segwords::eval::{evaluate_corpus_with, report_from_rates, EvalReport};
use segwords::postprocess::{parse_boundary_csv, BoundaryList};

use super::resolve_config;
use crate::error::{CliError, CliResult};
use crate::store::{read_text, write_atomic};
use crate::ConfigArgs;

/// Reads references from an annotation CSV (word starts in samples) or a
/// boundary CSV (seconds), chosen by header.
pub fn load_refs(path: &Path, sample_rate: u32) -> CliResult<BTreeMap<String, BoundaryList>> {
    let text = read_text(path)?;
    let ctx = |e: segwords::Error| CliError::from(e).context(path.display());
    if text.lines().next().map(str::trim) == Some(CSV_HEADER) {
        Ok(parse_csv(&text)
            .map_err(ctx)?
            .into_iter()
            .map(|(utt, seq)| {
                let b = BoundaryList::new(utt.clone(), seq.start_times(sample_rate));
                (utt, b)
            })
            .collect())
    } else {
        parse_boundary_csv(&text).map_err(ctx)
    }
}

fn emit(report: &EvalReport, out: Option<&Path>, csv: bool) -> CliResult {
    if csv {
        println!("{}\n{}", EvalReport::CSV_HEADER, report.to_csv_row());
    } else {
        print!("{}", report.to_key_value());
    }
    if let Some(path) = out {
        write_atomic(path, report.to_key_value())?;
    }
    Ok(())
}

pub fn run(
    args: &ConfigArgs,
    pred: Option<&Path>,
    refs: Option<&Path>,
    from_rates: Option<Vec<f64>>,
    out: Option<&Path>,
    csv: bool,
) -> CliResult {
    let cfg = resolve_config(args)?;
    let tolerance = cfg.tolerance_s();
    if let Some(rates) = from_rates {
        let [prc, rcl, os] = rates[..] else {
            return Err(CliError::input("--from-rates takes exactly prc,rcl,os"));
        };
        return emit(&report_from_rates(prc, rcl, os, tolerance), out, csv);
    }
    let (Some(pred), Some(refs)) = (pred, refs) else {
        return Err(CliError::input("--pred and --refs are required"));
    };
    let mut preds = parse_boundary_csv(&read_text(pred)?).map_err(|e| CliError::from(e).context(pred.display()))?;
    let refs = load_refs(refs, cfg.labeling.sample_rate)?;
    if let Some(extra) = preds.keys().find(|k| !refs.contains_key(*k)) {
        return Err(CliError::input(format!("predictions for unknown utterance {extra}")));
    }
    for utt in refs.keys() {
        if !preds.contains_key(utt) {
            log::warn!("no predicted boundaries for {utt}; counting n_f = 0");
            preds.insert(utt.clone(), BoundaryList::new(utt.clone(), Vec::new()));
        }
    }
    let report = evaluate_corpus_with(&preds, &refs, tolerance, cfg.eval.aggregation.into())?;
    emit(&report, out, csv)
}
