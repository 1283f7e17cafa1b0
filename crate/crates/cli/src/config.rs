//! Experiment configuration file: a versioned TOML document describing one
//! training setup plus optional sweep axes, validation knobs, and a
//! baseline selection. Parsing is strict — unknown or missing fields fail
//! with the parser's line/column diagnostics — and the semantic checks
//! below catch combinations the type system cannot.

use crate::CliError;
use pcs_core::channels::ImddParams;
use pcs_core::constellation::{mb_distribution, Constellation, NormConstraint};
use pcs_core::distribution::ProbabilityVector;
use pcs_core::trainer::{
    ChannelModel, Metric, OptimizerConfig, PipelineSetup, TrainingConfig,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentSection,
    pub channel: ChannelModel,
    pub constellation: ConstellationSection,
    pub shaping: ShapingSection,
    pub training: TrainingSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub validation: ValidationSection,
    #[serde(default)]
    pub baseline: Option<BaselineSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub output_dir: PathBuf,
    pub seed: u64,
    #[serde(default = "one")]
    pub restarts: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationSection {
    pub kind: ConstellationKind,
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstellationKind {
    Qam,
    Pam,
    ImddPam,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingSection {
    pub metric: Metric,
    pub constraint: NormConstraint,
    /// Quadrature resolution of the square-law demapper; unused for AWGN.
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub initial: InitialSection,
}

/// Where the learned distribution starts.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSection {
    #[default]
    Uniform,
    MaxwellBoltzmann {
        nu: f64,
    },
    Explicit {
        probabilities: Vec<f64>,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub esn0_db: Vec<f64>,
    #[serde(default)]
    pub sigma1: Vec<f64>,
    #[serde(default)]
    pub sigma2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    #[serde(default = "default_validation_nodes")]
    pub quadrature_nodes: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
}

impl Default for ValidationSection {
    fn default() -> Self {
        Self {
            quadrature_nodes: default_validation_nodes(),
            mc_samples: default_mc_samples(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaselineSection {
    Uniform,
    MbScan {
        #[serde(default = "default_nu_max")]
        nu_max: f64,
        #[serde(default = "default_nu_grid")]
        nu_grid: usize,
    },
    BlahutArimoto {
        #[serde(default = "default_ba_cells")]
        cells: usize,
        #[serde(default = "default_ba_tol")]
        tol_bits: f64,
        #[serde(default = "default_ba_iters")]
        max_iters: usize,
    },
}

fn one() -> usize {
    1
}
fn default_quad_nodes() -> usize {
    128
}
fn default_validation_nodes() -> usize {
    64
}
fn default_mc_samples() -> usize {
    1_000_000
}
fn default_nu_max() -> f64 {
    1.0
}
fn default_nu_grid() -> usize {
    33
}
fn default_ba_cells() -> usize {
    2048
}
fn default_ba_tol() -> f64 {
    1e-9
}
fn default_ba_iters() -> usize {
    200_000
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        check_tagged_tables(text)?;
        config.check()?;
        Ok(config)
    }

    /// Semantic checks beyond what deserialization enforces.
    fn check(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.experiment.restarts == 0 {
            return fail("experiment.restarts must be at least 1".into());
        }
        match self.channel {
            ChannelModel::Awgn(p) => {
                if !p.esn0_db.is_finite() {
                    return fail("channel.esn0_db must be finite".into());
                }
            }
            ChannelModel::Imdd(p) => {
                ImddParams::new(p.sigma1, p.sigma2)
                    .map_err(|e| CliError::Config(format!("channel: {e}")))?;
                if self.constellation.kind != ConstellationKind::ImddPam {
                    return fail(
                        "the imdd channel needs constellation.kind = \"imdd-pam\" \
                         (strictly positive real amplitudes)"
                            .into(),
                    );
                }
                if self.shaping.quad_nodes < 8 {
                    return fail("shaping.quad_nodes must be at least 8".into());
                }
            }
        }
        if self.training.epochs == 0 || self.training.batches_per_epoch == 0 {
            return fail("training.epochs and training.batches_per_epoch must be positive".into());
        }
        if self.training.batch_size < self.constellation.size {
            return fail(format!(
                "training.batch_size {} cannot represent every symbol of a size-{} \
                 constellation at least once",
                self.training.batch_size, self.constellation.size
            ));
        }
        if let InitialSection::Explicit { probabilities } = &self.training.initial {
            if probabilities.len() != self.constellation.size {
                return fail(format!(
                    "training.initial.probabilities has {} entries for a size-{} constellation",
                    probabilities.len(),
                    self.constellation.size
                ));
            }
        }
        if let Some(BaselineSection::MbScan { nu_max, nu_grid }) = &self.baseline {
            if !matches!(self.channel, ChannelModel::Awgn(_)) {
                return fail("the mb-scan baseline is defined for the awgn channel only".into());
            }
            if *nu_max <= 0.0 || !nu_max.is_finite() || *nu_grid < 3 {
                return fail("baseline.nu_max must be positive and nu_grid at least 3".into());
            }
        }
        if let Some(BaselineSection::BlahutArimoto { cells, tol_bits, .. }) = &self.baseline {
            if self.shaping.constraint == NormConstraint::AveragePower {
                return fail(
                    "the blahut-arimoto baseline needs a distribution-independent \
                     constellation: use constraint = \"peak-power\" or \"none\""
                        .into(),
                );
            }
            if self.constellation.kind == ConstellationKind::Qam {
                return fail(
                    "the blahut-arimoto baseline discretizes a one-dimensional output \
                     and needs a real constellation (pam or imdd-pam)"
                        .into(),
                );
            }
            if *cells < 2 || *tol_bits <= 0.0 {
                return fail("baseline.cells must be >= 2 and tol_bits positive".into());
            }
        }
        if self.validation.quadrature_nodes < 16 {
            return fail("validation.quadrature_nodes must be at least 16".into());
        }
        if self.validation.mc_samples == 0 {
            return fail("validation.mc_samples must be positive".into());
        }
        Ok(())
    }

    /// Sweep axes for the configured channel; errors when the relevant axis
    /// is empty or an axis for the other channel kind is set.
    pub fn sweep_axes(&self) -> Result<SweepAxes, CliError> {
        let sweep = self.sweep.as_ref().ok_or_else(|| {
            CliError::Config("sweep command needs a [sweep] section".into())
        })?;
        match self.channel {
            ChannelModel::Awgn(_) => {
                if !sweep.sigma1.is_empty() || !sweep.sigma2.is_empty() {
                    return Err(CliError::Config(
                        "sweep.sigma1/sigma2 apply to the imdd channel only".into(),
                    ));
                }
                if sweep.esn0_db.is_empty() {
                    return Err(CliError::Config(
                        "sweep.esn0_db must be non-empty for the awgn channel".into(),
                    ));
                }
                if !sweep.esn0_db.iter().all(|v| v.is_finite()) {
                    return Err(CliError::Config("sweep.esn0_db must be finite".into()));
                }
                Ok(SweepAxes::Esn0(sweep.esn0_db.clone()))
            }
            ChannelModel::Imdd(_) => {
                if !sweep.esn0_db.is_empty() {
                    return Err(CliError::Config(
                        "sweep.esn0_db applies to the awgn channel only".into(),
                    ));
                }
                if sweep.sigma1.is_empty() || sweep.sigma2.is_empty() {
                    return Err(CliError::Config(
                        "sweep.sigma1 and sweep.sigma2 must be non-empty for the imdd channel"
                            .into(),
                    ));
                }
                if !sweep
                    .sigma1
                    .iter()
                    .chain(&sweep.sigma2)
                    .all(|&v| v.is_finite() && v > 0.0)
                {
                    return Err(CliError::Config(
                        "sweep.sigma1/sigma2 must be positive and finite".into(),
                    ));
                }
                Ok(SweepAxes::SigmaGrid {
                    sigma1: sweep.sigma1.clone(),
                    sigma2: sweep.sigma2.clone(),
                })
            }
        }
    }

    pub fn constellation(&self) -> Result<Constellation, CliError> {
        let build = match self.constellation.kind {
            ConstellationKind::Qam => Constellation::qam(self.constellation.size),
            ConstellationKind::Pam => Constellation::pam(self.constellation.size),
            ConstellationKind::ImddPam => Constellation::imdd_pam(self.constellation.size),
        };
        build.map_err(|e| CliError::Config(format!("constellation: {e}")))
    }

    pub fn initial_distribution(&self, c: &Constellation) -> Result<ProbabilityVector, CliError> {
        match &self.training.initial {
            InitialSection::Uniform => ProbabilityVector::uniform(c.size())
                .map_err(|e| CliError::Config(format!("training.initial: {e}"))),
            InitialSection::MaxwellBoltzmann { nu } => mb_distribution(c, *nu)
                .map_err(|e| CliError::Config(format!("training.initial: {e}"))),
            InitialSection::Explicit { probabilities } => {
                ProbabilityVector::new(probabilities.clone())
                    .map_err(|e| CliError::Config(format!("training.initial: {e}")))
            }
        }
    }

    pub fn pipeline_setup(&self, channel: ChannelModel) -> Result<PipelineSetup, CliError> {
        Ok(PipelineSetup {
            channel,
            constellation: self.constellation()?,
            constraint: self.shaping.constraint,
            metric: self.shaping.metric,
            quad_nodes: self.shaping.quad_nodes,
        })
    }

    /// The full training description for one restart stream, optionally
    /// with the channel swapped out (sweeps move the operating point).
    pub fn training_config(
        &self,
        channel: ChannelModel,
        seed: u64,
        stream: u64,
    ) -> Result<TrainingConfig, CliError> {
        let setup = self.pipeline_setup(channel)?;
        let initial = self.initial_distribution(&setup.constellation)?;
        Ok(TrainingConfig {
            setup,
            optimizer: self.training.optimizer,
            epochs: self.training.epochs,
            batches_per_epoch: self.training.batches_per_epoch,
            batch_size: self.training.batch_size,
            initial,
            seed,
            stream,
        })
    }
}

/// Operating-point axes of a sweep, already checked against the channel.
#[derive(Debug, Clone)]
pub enum SweepAxes {
    Esn0(Vec<f64>),
    SigmaGrid { sigma1: Vec<f64>, sigma2: Vec<f64> },
}

/// Serde ignores unknown fields inside internally tagged enums even under
/// `deny_unknown_fields`, so the tagged tables get their key sets checked
/// against the raw document by hand.
fn check_tagged_tables(text: &str) -> Result<(), CliError> {
    let root: toml::Value = toml::from_str(text)
        .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    let spots: [(&str, &[(&str, &[&str])]); 4] = [
        (
            "channel",
            &[
                ("awgn", &["esn0_db"]),
                ("imdd", &["sigma1", "sigma2"]),
            ],
        ),
        (
            "training.optimizer",
            &[
                ("cocob", &["alpha"]),
                ("adam", &["lr", "beta1", "beta2", "epsilon"]),
                ("sgd", &["lr"]),
            ],
        ),
        (
            "training.initial",
            &[
                ("uniform", &[]),
                ("maxwell-boltzmann", &["nu"]),
                ("explicit", &["probabilities"]),
            ],
        ),
        (
            "baseline",
            &[
                ("uniform", &[]),
                ("mb-scan", &["nu_max", "nu_grid"]),
                ("blahut-arimoto", &["cells", "tol_bits", "max_iters"]),
            ],
        ),
    ];
    for (path, variants) in spots {
        let mut value = Some(&root);
        for part in path.split('.') {
            value = value.and_then(|v| v.get(part));
        }
        let Some(table) = value.and_then(|v| v.as_table()) else {
            continue;
        };
        let Some(kind) = table.get("kind").and_then(|v| v.as_str()) else {
            continue;
        };
        let Some((_, allowed)) = variants.iter().find(|(name, _)| *name == kind) else {
            continue;
        };
        for key in table.keys() {
            if key != "kind" && !allowed.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown field `{key}` in [{path}] for kind \"{kind}\""
                )));
            }
        }
    }
    Ok(())
}

/// Everything a result file must remember for later validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedParameters {
    pub channel: ChannelModel,
    pub constellation: ConstellationSection,
    pub metric: Metric,
    pub constraint: NormConstraint,
    pub quad_nodes: usize,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
}

impl ResolvedParameters {
    pub fn from_config(config: &ExperimentConfig, channel: ChannelModel) -> Self {
        Self {
            channel,
            constellation: config.constellation,
            metric: config.shaping.metric,
            constraint: config.shaping.constraint,
            quad_nodes: config.shaping.quad_nodes,
            epochs: config.training.epochs,
            batches_per_epoch: config.training.batches_per_epoch,
            batch_size: config.training.batch_size,
            optimizer: config.training.optimizer,
        }
    }

    pub fn constellation(&self) -> Result<Constellation, CliError> {
        let build = match self.constellation.kind {
            ConstellationKind::Qam => Constellation::qam(self.constellation.size),
            ConstellationKind::Pam => Constellation::pam(self.constellation.size),
            ConstellationKind::ImddPam => Constellation::imdd_pam(self.constellation.size),
        };
        build.map_err(|e| CliError::Config(format!("result file constellation: {e}")))
    }
}
