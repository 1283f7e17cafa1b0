//! `pcs sweep`: train at every operating point of the configured axes and
//! aggregate the results. Points run in parallel; determinism comes from
//! giving every point its own generator streams derived from its index, so
//! the schedule and `--jobs` cannot change any number.

use super::{numeric, reference_rate, run_restarts};
use crate::config::{BaselineSection, ExperimentConfig, SweepAxes};
use crate::output::{csv_document, write_atomic, write_json};
use crate::CliError;
use pcs_core::channels::{AwgnParams, ImddParams};
use pcs_core::constellation::normalize;
use pcs_core::distribution::ProbabilityVector;
use pcs_core::trainer::{ChannelModel, Metric};
use pcs_core::validation::{mb_scan, mc_metric, shannon_capacity, QuadratureSpec};
use pcs_core::ExperimentRng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Monte-Carlo evaluation streams start far above any training stream
/// (training uses `point_index * restarts + restart`), so the two families
/// can never collide.
const MC_STREAM_BASE: u64 = 1 << 32;

/// One finished operating point, ready for its CSV row.
struct PointRow {
    csv: String,
    gain: f64,
}

#[derive(Serialize)]
struct PointFile<'a> {
    schema_version: u32,
    index: usize,
    seed: u64,
    chosen_stream: u64,
    channel: ChannelModel,
    metric: Metric,
    #[serde(skip_serializing_if = "Option::is_none")]
    shannon_capacity_bits: Option<f64>,
    uniform_bits: f64,
    learned_bits: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mb_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mb_nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uniform_std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    learned_std_error: Option<f64>,
    distribution: &'a [f64],
}

pub fn run(
    config_path: &Path,
    seed_override: Option<u64>,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let config = ExperimentConfig::load(config_path)?;
    let axes = config.sweep_axes()?;
    let seed = seed_override.unwrap_or(config.experiment.seed);
    let dir = config.experiment.output_dir.clone();
    let points_dir = dir.join("points");
    fs::create_dir_all(&points_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", points_dir.display())))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Io(format!("cannot build thread pool: {e}")))?;

    let (header, rows) = match axes {
        SweepAxes::Esn0(esn0_axis) => {
            let rows: Result<Vec<PointRow>, CliError> = pool.install(|| {
                esn0_axis
                    .par_iter()
                    .enumerate()
                    .map(|(index, &esn0_db)| awgn_point(&config, seed, index, esn0_db, &points_dir))
                    .collect()
            });
            (
                "esn0_db,mi_uniform,mi_learned,mi_mb_opt,gap_uniform,gap_learned,gap_mb_opt",
                rows?,
            )
        }
        SweepAxes::SigmaGrid { sigma1, sigma2 } => {
            let grid: Vec<(usize, f64, f64)> = sigma1
                .iter()
                .flat_map(|&s1| sigma2.iter().map(move |&s2| (s1, s2)))
                .enumerate()
                .map(|(index, (s1, s2))| (index, s1, s2))
                .collect();
            let rows: Result<Vec<PointRow>, CliError> = pool.install(|| {
                grid.par_iter()
                    .map(|&(index, s1, s2)| imdd_point(&config, seed, index, s1, s2, &points_dir))
                    .collect()
            });
            let rows = rows?;
            let max_gain = rows.iter().map(|r| r.gain).fold(0.0, f64::max);
            let levels: Vec<String> = contour_levels(max_gain)
                .into_iter()
                .map(|v| format!("{v:.2}"))
                .collect();
            write_atomic(&dir.join("levels.txt"), (levels.join("\n") + "\n").as_bytes())?;
            (
                "sigma1,sigma2,bmi_uniform,bmi_uniform_se,bmi_learned,bmi_learned_se,gain,gain_se",
                rows,
            )
        }
    };

    let lines: Vec<String> = rows.into_iter().map(|r| r.csv).collect();
    write_atomic(
        &dir.join("sweep.csv"),
        csv_document(header, &lines).as_bytes(),
    )?;
    println!(
        "sweep: {} operating point(s), seed {seed} -> {}",
        lines.len(),
        dir.join("sweep.csv").display()
    );
    Ok(())
}

fn awgn_point(
    config: &ExperimentConfig,
    seed: u64,
    index: usize,
    esn0_db: f64,
    points_dir: &Path,
) -> Result<PointRow, CliError> {
    let channel = ChannelModel::Awgn(
        AwgnParams::new(esn0_db).map_err(|e| CliError::Config(format!("sweep.esn0_db: {e}")))?,
    );
    let base_stream = (index * config.experiment.restarts) as u64;
    let (result, chosen_stream) = run_restarts(config, channel, seed, base_stream)?;

    let c = config.constellation()?;
    let metric = config.shaping.metric;
    let constraint = config.shaping.constraint;
    let nodes = config.validation.quadrature_nodes;
    let learned = reference_rate(&c, &result.distribution, constraint, &channel, metric, nodes)?;
    let uniform_p = ProbabilityVector::uniform(c.size()).map_err(numeric)?;
    let uniform = reference_rate(&c, &uniform_p, constraint, &channel, metric, nodes)?;

    // Exponential-family yardstick at the same operating point. The scan
    // locates its optimum by symbol-metric rate; the reported column then
    // re-evaluates that distribution under the configured metric and
    // constraint so all three columns are comparable.
    let (nu_max, nu_grid) = match config.baseline {
        Some(BaselineSection::MbScan { nu_max, nu_grid }) => (nu_max, nu_grid),
        _ => (1.0, 33),
    };
    let awgn = match channel {
        ChannelModel::Awgn(a) => a,
        ChannelModel::Imdd(_) => unreachable!("awgn point"),
    };
    let spec = QuadratureSpec::new(nodes).map_err(numeric)?;
    let scan = mb_scan(&c, awgn.sigma2_total(), nu_max, nu_grid, &spec).map_err(numeric)?;
    let mb = reference_rate(&c, &scan.distribution, constraint, &channel, metric, nodes)?;
    let capacity = shannon_capacity(awgn.esn0_linear());

    write_json(
        &points_dir.join(format!("point_{index:04}.json")),
        &PointFile {
            schema_version: 1,
            index,
            seed,
            chosen_stream,
            channel,
            metric,
            shannon_capacity_bits: Some(capacity),
            uniform_bits: uniform,
            learned_bits: learned,
            mb_bits: Some(mb),
            mb_nu: Some(scan.nu),
            uniform_std_error: None,
            learned_std_error: None,
            distribution: result.distribution.as_slice(),
        },
    )?;

    let mut csv = String::new();
    let _ = write!(
        csv,
        "{esn0_db},{uniform},{learned},{mb},{},{},{}",
        capacity - uniform,
        capacity - learned,
        capacity - mb
    );
    Ok(PointRow {
        csv,
        gain: learned - uniform,
    })
}

fn imdd_point(
    config: &ExperimentConfig,
    seed: u64,
    index: usize,
    sigma1: f64,
    sigma2: f64,
    points_dir: &Path,
) -> Result<PointRow, CliError> {
    let params = ImddParams::new(sigma1, sigma2)
        .map_err(|e| CliError::Config(format!("sweep sigma axes: {e}")))?;
    let channel = ChannelModel::Imdd(params);
    let base_stream = (index * config.experiment.restarts) as u64;
    let (result, chosen_stream) = run_restarts(config, channel, seed, base_stream)?;

    let c = config.constellation()?;
    let metric = config.shaping.metric;
    let constraint = config.shaping.constraint;
    let samples = config.validation.mc_samples;
    let mut rng = ExperimentRng::seed_from_u64(seed);
    rng.set_stream(MC_STREAM_BASE + index as u64);

    let norm_learned = normalize(&c, &result.distribution, constraint).map_err(numeric)?;
    let learned = mc_metric(
        &channel,
        metric,
        &norm_learned.points,
        c.labels(),
        c.bits_per_symbol(),
        &result.distribution,
        samples,
        &mut rng,
    )
    .map_err(numeric)?;
    let uniform_p = ProbabilityVector::uniform(c.size()).map_err(numeric)?;
    let norm_uniform = normalize(&c, &uniform_p, constraint).map_err(numeric)?;
    let uniform = mc_metric(
        &channel,
        metric,
        &norm_uniform.points,
        c.labels(),
        c.bits_per_symbol(),
        &uniform_p,
        samples,
        &mut rng,
    )
    .map_err(numeric)?;

    let gain = learned.value - uniform.value;
    let gain_se = (learned.std_error.powi(2) + uniform.std_error.powi(2)).sqrt();

    write_json(
        &points_dir.join(format!("point_{index:04}.json")),
        &PointFile {
            schema_version: 1,
            index,
            seed,
            chosen_stream,
            channel,
            metric,
            shannon_capacity_bits: None,
            uniform_bits: uniform.value,
            learned_bits: learned.value,
            mb_bits: None,
            mb_nu: None,
            uniform_std_error: Some(uniform.std_error),
            learned_std_error: Some(learned.std_error),
            distribution: result.distribution.as_slice(),
        },
    )?;

    let mut csv = String::new();
    let _ = write!(
        csv,
        "{sigma1},{sigma2},{},{},{},{},{gain},{gain_se}",
        uniform.value, uniform.std_error, learned.value, learned.std_error
    );
    Ok(PointRow { csv, gain })
}

/// Contour levels for plotting the shaping-gain surface: multiples of
/// 0.05 bits, or of 0.01 bits when the whole surface is shallow.
fn contour_levels(max_gain: f64) -> Vec<f64> {
    let step = if max_gain > 0.25 { 0.05 } else { 0.01 };
    let count = ((max_gain / step).ceil() as usize).max(1);
    (1..=count).map(|k| k as f64 * step).collect()
}
