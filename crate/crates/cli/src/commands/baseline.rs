//! `pcs baseline`: evaluate the configured reference distribution without
//! any training — uniform input, the best exponential-family member, or
//! the channel capacity under a fixed constellation — and write it in the
//! same `distribution.csv` shape the optimizer produces, plus a one-row
//! summary CSV.

use super::{numeric, real_amplitudes, reference_rate};
use crate::config::{BaselineSection, ExperimentConfig};
use crate::output::{csv_document, distribution_csv, write_atomic};
use crate::CliError;
use pcs_core::constellation::normalize;
use pcs_core::distribution::ProbabilityVector;
use pcs_core::trainer::ChannelModel;
use pcs_core::validation::{
    awgn_real_likelihood_matrix, blahut_arimoto, imdd_likelihood_matrix, mb_scan, QuadratureSpec,
};
use std::fs;
use std::path::Path;

const BASELINE_HEADER: &str = "kind,metric_bits,nu,capacity_gap_bits,iterations,boundary_warning";

pub fn run(config_path: &Path) -> Result<(), CliError> {
    let config = ExperimentConfig::load(config_path)?;
    let baseline = config.baseline.clone().ok_or_else(|| {
        CliError::Config("baseline command needs a [baseline] section".into())
    })?;
    let c = config.constellation()?;
    let constraint = config.shaping.constraint;
    let metric = config.shaping.metric;
    let nodes = config.validation.quadrature_nodes;

    let (row, p) = match baseline {
        BaselineSection::Uniform => {
            let p = ProbabilityVector::uniform(c.size()).map_err(numeric)?;
            let value = reference_rate(&c, &p, constraint, &config.channel, metric, nodes)?;
            (format!("uniform,{value},,,,"), p)
        }
        BaselineSection::MbScan { nu_max, nu_grid } => {
            let awgn = match config.channel {
                ChannelModel::Awgn(a) => a,
                ChannelModel::Imdd(_) => unreachable!("checked at load time"),
            };
            let spec = QuadratureSpec::new(nodes).map_err(numeric)?;
            let scan =
                mb_scan(&c, awgn.sigma2_total(), nu_max, nu_grid, &spec).map_err(numeric)?;
            let value =
                reference_rate(&c, &scan.distribution, constraint, &config.channel, metric, nodes)?;
            (
                format!(
                    "mb-scan,{value},{},,,{}",
                    scan.nu, scan.boundary_warning
                ),
                scan.distribution,
            )
        }
        BaselineSection::BlahutArimoto {
            cells,
            tol_bits,
            max_iters,
        } => {
            // The constraint is distribution-independent here (checked at
            // load time), so the geometry is fixed and the input
            // distribution itself is the free variable.
            let placeholder = ProbabilityVector::uniform(c.size()).map_err(numeric)?;
            let scaled = normalize(&c, &placeholder, constraint).map_err(numeric)?;
            let matrix = match config.channel {
                ChannelModel::Awgn(awgn) => {
                    let reals: Vec<f64> = scaled.points.iter().map(|z| z.re).collect();
                    awgn_real_likelihood_matrix(&reals, awgn.sigma2_total(), cells)
                }
                ChannelModel::Imdd(params) => {
                    let amps = real_amplitudes(&scaled.points)?;
                    imdd_likelihood_matrix(&amps, &params, cells)
                }
            };
            let ba = blahut_arimoto(&matrix, tol_bits, max_iters).map_err(numeric)?;
            let p = ProbabilityVector::from_masses(ba.distribution.clone()).map_err(numeric)?;
            (
                format!(
                    "blahut-arimoto,{},,{},{},",
                    ba.capacity_bits, ba.upper_bound_gap_bits, ba.iterations
                ),
                p,
            )
        }
    };

    let dir = &config.experiment.output_dir;
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    write_atomic(
        &dir.join("baseline.csv"),
        csv_document(BASELINE_HEADER, &[row]).as_bytes(),
    )?;
    write_atomic(
        &dir.join("distribution.csv"),
        distribution_csv(c.points(), p.as_slice()).as_bytes(),
    )?;
    println!(
        "baseline: source entropy {} bits -> {}",
        p.entropy_bits(),
        dir.join("baseline.csv").display()
    );
    Ok(())
}
