use std::fmt::Write as _;
use std::path::Path;

use segwords::classifier::{train_baseline, LabeledUtterance, ModelParams, TrainConfig};
use segwords::corpus::Split;
use segwords::eval::{evaluate_corpus_with, EvalReport};
use segwords::labeling::AugmentConfig;
use segwords::postprocess::{BoundaryList, SelectionStrategy};

use super::segment::predict_boundaries;
use super::{parse_selection, resolve_config};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::store::{write_atomic, Prepared};
use crate::{ConfigArgs, SweepAxis};

fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::AugRadius => "aug_radius",
        SweepAxis::Selection => "selection",
        SweepAxis::Tolerance => "tolerance_ms",
    }
}

fn default_values(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::AugRadius => "0,1,2,3",
        SweepAxis::Selection => "first,mid,last",
        SweepAxis::Tolerance => "10,20,40",
    }
}

fn score(
    cfg: &RunConfig,
    params: &ModelParams,
    data: &[LabeledUtterance],
    selection: SelectionStrategy,
    tolerance_s: f64,
) -> CliResult<EvalReport> {
    let preds = predict_boundaries(params, data, selection, cfg.postprocess.time_convention.into())?;
    let refs = data
        .iter()
        .map(|u| {
            let id = u.features.utterance_id.clone();
            (id.clone(), BoundaryList::new(id, u.reference.clone()))
        })
        .collect();
    Ok(evaluate_corpus_with(
        &preds,
        &refs,
        tolerance_s,
        cfg.eval.aggregation.into(),
    )?)
}

pub fn run(
    args: &ConfigArgs,
    prepared: &Path,
    axis: SweepAxis,
    values: Option<&str>,
    split: Split,
    out: Option<&Path>,
) -> CliResult {
    let cfg = resolve_config(args)?;
    let values: Vec<&str> = values
        .unwrap_or(default_values(axis))
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(CliError::input("sweep needs at least one value"));
    }
    let prepared = Prepared::load(prepared)?;
    let train = prepared.split(Split::Train);
    let val = prepared.split(Split::Val);
    let eval_data = prepared.split(split);
    if train.is_empty() || val.is_empty() || eval_data.is_empty() {
        return Err(CliError::input(
            "sweep needs non-empty train, val and evaluation splits",
        ));
    }
    let base = cfg.train_config();
    let fit = |tc: &TrainConfig| -> CliResult<ModelParams> { Ok(train_baseline(&train, &val, tc)?.params) };

    let mut table = format!("axis,value,{}\n", EvalReport::CSV_HEADER);
    let selection: SelectionStrategy = cfg.postprocess.selection.into();
    let tolerance = cfg.tolerance_s();
    let name = axis_name(axis);
    match axis {
        SweepAxis::Selection => {
            let strategies = values
                .iter()
                .map(|v| parse_selection(v).map(|s| (*v, SelectionStrategy::from(s))))
                .collect::<CliResult<Vec<_>>>()?;
            let params = fit(&base)?;
            for (v, s) in strategies {
                let r = score(&cfg, &params, &eval_data, s, tolerance)?;
                let _ = writeln!(table, "{name},{v},{}", r.to_csv_row());
            }
        }
        SweepAxis::Tolerance => {
            let tols = values
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|t| *t >= 0.0)
                        .map(|t| (*v, t))
                        .ok_or_else(|| CliError::input(format!("bad tolerance {v:?}")))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let params = fit(&base)?;
            for (v, t) in tols {
                let r = score(&cfg, &params, &eval_data, selection, t / 1000.0)?;
                let _ = writeln!(table, "{name},{v},{}", r.to_csv_row());
            }
        }
        SweepAxis::AugRadius => {
            let radii = values
                .iter()
                .map(|v| {
                    v.parse::<usize>()
                        .map(|r| (*v, r))
                        .map_err(|_| CliError::input(format!("bad radius {v:?}")))
                })
                .collect::<CliResult<Vec<_>>>()?;
            for (v, radius) in radii {
                let tc = TrainConfig {
                    augment: AugmentConfig { radius },
                    ..base.clone()
                };
                let params = fit(&tc)?;
                let r = score(&cfg, &params, &eval_data, selection, tolerance)?;
                let _ = writeln!(table, "{name},{v},{}", r.to_csv_row());
            }
        }
    }
    print!("{table}");
    if let Some(path) = out {
        write_atomic(path, &table)?;
    }
    Ok(())
}
