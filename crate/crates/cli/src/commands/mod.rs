pub mod eval;
pub mod prepare;
pub mod segment;
pub mod sweep;
pub mod synth;
pub mod train;

use crate::config::{AggregationName, RunConfig, SelectionName};
use crate::error::{CliError, CliResult};
use crate::ConfigArgs;

/// Loads the config file (if any) and applies flag overrides.
pub fn resolve_config(args: &ConfigArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(v) = args.frame_ms {
        cfg.labeling.frame_ms = v;
    }
    if let Some(v) = args.tolerance_ms {
        cfg.eval.tolerance_ms = v;
    }
    if let Some(v) = args.aug_radius {
        cfg.labeling.aug_radius = v;
    }
    if let Some(v) = args.sample_rate {
        cfg.labeling.sample_rate = v;
    }
    if let Some(s) = &args.selection {
        cfg.postprocess.selection = parse_selection(s)?;
    }
    if let Some(v) = args.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = args.max_epochs {
        cfg.train.max_epochs = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = args.patience {
        cfg.train.patience = v;
    }
    if args.macro_avg {
        cfg.eval.aggregation = AggregationName::Macro;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_selection(s: &str) -> CliResult<SelectionName> {
    match s.trim().to_ascii_lowercase().as_str() {
        "first" => Ok(SelectionName::First),
        "mid" => Ok(SelectionName::Mid),
        "last" => Ok(SelectionName::Last),
        other => Err(CliError::input(format!("unknown selection strategy {other:?}"))),
    }
}
