use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use segwords::classifier::train_baseline;
use segwords::corpus::Split;

use super::resolve_config;
use crate::error::{CliError, CliResult};
use crate::store::{write_atomic, Prepared};
use crate::ConfigArgs;

pub fn run(args: &ConfigArgs, prepared: &Path, out: &Path, log_path: Option<&Path>) -> CliResult {
    let cfg = resolve_config(args)?;
    let prepared = Prepared::load(prepared)?;
    let train = prepared.split(Split::Train);
    let val = prepared.split(Split::Val);
    if train.is_empty() || val.is_empty() {
        return Err(CliError::input("prepared data needs non-empty train and val splits"));
    }
    let outcome = train_baseline(&train, &val, &cfg.train_config())?;

    let mut log = String::from("epoch,train_loss,val_r\n");
    let _ = writeln!(log, "0,{:.9},", outcome.initial_loss);
    for e in &outcome.log {
        let _ = writeln!(log, "{},{:.9},{:.9}", e.epoch, e.train_loss, e.val_score);
    }
    let log_path = log_path.map_or_else(
        || PathBuf::from(format!("{}.log.csv", out.display())),
        Path::to_path_buf,
    );
    write_atomic(out, outcome.params.to_text())?;
    write_atomic(&log_path, log)?;
    println!(
        "trained {} epochs; best epoch {} with validation score {:.6}; model written to {}",
        outcome.log.len(),
        outcome.best_epoch,
        outcome.best_score,
        out.display()
    );
    Ok(())
}
