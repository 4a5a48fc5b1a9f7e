//! Experiment runner for `ottolab-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;
pub mod suite;

use std::path::{Path, PathBuf};

use anyhow::Result;

use ottolab_core::par::Exec;

use config::ExperimentConfig;
use output::{write_all, Status};

/// Environment variable capping suite parallelism.
pub const THREADS_ENV: &str = "OTTOLAB_THREADS";

pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| config::ConfigInvalid(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
            if n == 0 {
                return Err(config::ConfigInvalid(format!("{THREADS_ENV} must be positive")).into());
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// `ottolab run`: validates, executes and then writes every file.
pub fn run_config(path: &Path, out: Option<&Path>) -> Result<Status> {
    let cfg = ExperimentConfig::load(path)?;
    let params = cfg.validate()?;
    let dir: PathBuf = match (out, &cfg.output_dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => d.clone(),
        (None, None) => PathBuf::from("ottolab-out"),
    };
    let outcome = run::execute(&cfg, &params, Exec::Sequential)?;
    write_all(&dir, &outcome.files)?;
    Ok(Status::from_pass(outcome.pass))
}
