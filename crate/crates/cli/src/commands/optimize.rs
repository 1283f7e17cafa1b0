//! `pcs optimize`: train the configured setup (with restarts) and write
//! `result.json`, `trace.csv`, and `distribution.csv` into the output
//! directory.

use super::{final_rate, run_restarts};
use crate::config::{ExperimentConfig, ResolvedParameters};
use crate::output::{
    distribution_csv, trace_csv, write_atomic, write_json, ResultFile, RESULT_SCHEMA_VERSION,
};
use crate::CliError;
use std::fs;
use std::path::Path;

pub fn run(config_path: &Path, seed_override: Option<u64>) -> Result<(), CliError> {
    let config = ExperimentConfig::load(config_path)?;
    let seed = seed_override.unwrap_or(config.experiment.seed);
    let channel = config.channel;
    let (result, chosen_stream) = run_restarts(&config, channel, seed, 0)?;
    let parameters = ResolvedParameters::from_config(&config, channel);
    let constellation = config.constellation()?;

    let dir = &config.experiment.output_dir;
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    write_json(
        &dir.join("result.json"),
        &ResultFile {
            schema_version: RESULT_SCHEMA_VERSION,
            seed,
            restarts: config.experiment.restarts,
            chosen_stream,
            parameters: &parameters,
            result: &result,
        },
    )?;
    write_atomic(&dir.join("trace.csv"), trace_csv(&result).as_bytes())?;
    write_atomic(
        &dir.join("distribution.csv"),
        distribution_csv(constellation.points(), result.distribution.as_slice()).as_bytes(),
    )?;

    println!(
        "optimize: seed {seed}, {} restart(s), kept stream {chosen_stream}",
        config.experiment.restarts
    );
    println!(
        "final mean rate {} bits/symbol, source entropy {} bits",
        final_rate(&result),
        result.distribution.entropy_bits()
    );
    println!("wrote {}", dir.join("result.json").display());
    Ok(())
}
